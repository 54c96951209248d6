//! Elements of the abelian Cartan subgroups: structured matrices determined
//! by an angle list. All kinds are closed under angle scaling, so square
//! roots and one-parameter rescaling stay in angle space.

use super::{C64, DenseMatrix};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsgKind {
    /// diag(e^{iα_1}, ..., e^{iα_n}); angle count = dim.
    UDiag,
    /// diag(D, D†) with D = diag(e^{iα_j}); angle count = dim/2.
    SpDiag,
    /// The cos/sin block layout with identity middle of size |p-q|;
    /// angle count = min(p, q).
    Cs { p: usize, q: usize },
    /// F(α) ⊕ F(α) with F ∈ Cs{p,q}; the Cartan subgroup of the canonical
    /// Sp(p+q) decomposition. Angle count = min(p, q), dim = 2(p+q).
    CsSp { p: usize, q: usize },
    /// X-axis variant of Cs with p = q: [[C, -iS], [-iS, C]].
    CsX { p: usize, q: usize },
    /// ⊕_j R(α_j) ⊕ I_{dim mod 2}; angle count = floor(dim/2).
    Schur,
    /// μ ⊕ μᵀ with μ ∈ Schur(dim/2); angle count = floor(dim/4)... more
    /// precisely floor((dim/2)/2).
    SchurPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsgElement {
    pub kind: CsgKind,
    pub dim: usize,
    pub angles: Vec<f64>,
}

fn rot(c: f64, s: f64) -> [[f64; 2]; 2] {
    [[c, s], [-s, c]]
}

impl CsgElement {
    pub fn new(kind: CsgKind, dim: usize, angles: Vec<f64>) -> Self {
        let expected = match kind {
            CsgKind::UDiag => dim,
            CsgKind::SpDiag => dim / 2,
            CsgKind::Cs { p, q } => {
                assert_eq!(p + q, dim);
                p.min(q)
            }
            CsgKind::CsSp { p, q } => {
                assert_eq!(2 * (p + q), dim);
                p.min(q)
            }
            CsgKind::CsX { p, q } => {
                assert_eq!(p + q, dim);
                p.min(q)
            }
            CsgKind::Schur => dim / 2,
            CsgKind::SchurPair => (dim / 2) / 2,
        };
        assert_eq!(angles.len(), expected, "angle count for {kind:?} dim {dim}");
        Self { kind, dim, angles }
    }

    pub fn identity(kind: CsgKind, dim: usize) -> Self {
        let count = match kind {
            CsgKind::UDiag => dim,
            CsgKind::SpDiag => dim / 2,
            CsgKind::Cs { p, q } | CsgKind::CsX { p, q } | CsgKind::CsSp { p, q } => p.min(q),
            CsgKind::Schur => dim / 2,
            CsgKind::SchurPair => (dim / 2) / 2,
        };
        Self::new(kind, dim, vec![0.0; count])
    }

    pub fn materialize(&self) -> DenseMatrix {
        match self.kind {
            CsgKind::UDiag => {
                let mut m = DenseMatrix::zeros_complex(self.dim, self.dim);
                for (j, &a) in self.angles.iter().enumerate() {
                    m.set(j, j, C64::from_polar(1.0, a));
                }
                m
            }
            CsgKind::SpDiag => {
                let n = self.dim / 2;
                let mut m = DenseMatrix::zeros_complex(self.dim, self.dim);
                for (j, &a) in self.angles.iter().enumerate() {
                    m.set(j, j, C64::from_polar(1.0, a));
                    m.set(n + j, n + j, C64::from_polar(1.0, -a));
                }
                m
            }
            CsgKind::Cs { p, q } => cs_matrix(p, q, &self.angles),
            CsgKind::CsSp { p, q } => {
                let f = cs_matrix(p, q, &self.angles);
                f.dsum(&f)
            }
            CsgKind::CsX { p, q } => {
                let r = p.min(q);
                let n = p + q;
                let mut m = DenseMatrix::zeros_complex(n, n);
                for i in 0..n {
                    m.set(i, i, C64::new(1.0, 0.0));
                }
                for (j, &a) in self.angles.iter().enumerate() {
                    let (c, s) = (a.cos(), a.sin());
                    m.set(j, j, C64::new(c, 0.0));
                    m.set(n - r + j, n - r + j, C64::new(c, 0.0));
                    m.set(j, n - r + j, C64::new(0.0, -s));
                    m.set(n - r + j, j, C64::new(0.0, -s));
                }
                m
            }
            CsgKind::Schur => schur_matrix(self.dim, &self.angles),
            CsgKind::SchurPair => {
                let half = self.dim / 2;
                let mu = schur_matrix(half, &self.angles);
                mu.dsum(&mu.transpose())
            }
        }
    }

    /// Principal square root: each angle normalized to (-π, π] then halved;
    /// a tie at exactly π halves to π/2.
    pub fn sqrt(&self) -> Self {
        let angles = self.angles.iter().map(|&a| wrap_angle(a) / 2.0).collect();
        Self { kind: self.kind, dim: self.dim, angles }
    }

    /// Rescale all angles by t (the one-parameter subgroup A(t) = A^t).
    pub fn scale(&self, t: f64) -> Self {
        Self {
            kind: self.kind,
            dim: self.dim,
            angles: self.angles.iter().map(|a| a * t).collect(),
        }
    }

    /// Add π to angle `idx`; flips the determinant branch for UDiag-family
    /// square roots.
    pub fn flip_branch(&mut self, idx: usize) {
        self.angles[idx] += PI;
    }

    /// Determinant from the angle list (exact in angle space).
    pub fn det(&self) -> C64 {
        match self.kind {
            CsgKind::UDiag => C64::from_polar(1.0, self.angles.iter().sum()),
            // all remaining kinds have determinant 1 structurally
            _ => C64::new(1.0, 0.0),
        }
    }

    /// Residual of `m` against this element's structural zero pattern:
    /// the largest magnitude found outside the pattern support.
    pub fn pattern_residual(&self, m: &DenseMatrix) -> f64 {
        let patt = self.materialize();
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let in_pattern = patt.at(i, j).norm() != 0.0
                    || self.in_support(i, j);
                if !in_pattern {
                    worst = worst.max(m.at(i, j).norm());
                }
            }
        }
        worst
    }

    // Support includes positions where an entry may be nonzero for generic
    // angles even if the current angles zero it out.
    fn in_support(&self, i: usize, j: usize) -> bool {
        match self.kind {
            CsgKind::UDiag | CsgKind::SpDiag => i == j,
            CsgKind::Cs { p, q } | CsgKind::CsX { p, q } => cs_support(p, q, i, j),
            CsgKind::CsSp { p, q } => {
                let n = p + q;
                (i < n && j < n && cs_support(p, q, i, j))
                    || (i >= n && j >= n && cs_support(p, q, i - n, j - n))
            }
            CsgKind::Schur => schur_support(self.dim, i, j),
            CsgKind::SchurPair => {
                let half = self.dim / 2;
                (i < half && j < half && schur_support(half, i, j))
                    || (i >= half && j >= half && schur_support(half, i - half, j - half))
            }
        }
    }
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    // map -π to π so the range is (-π, π]
    if x <= -PI {
        x = PI;
    }
    x
}

fn cs_support(p: usize, q: usize, i: usize, j: usize) -> bool {
    let r = p.min(q);
    let n = p + q;
    if i == j {
        return true;
    }
    (i < r && j >= n - r && j - (n - r) == i) || (i >= n - r && j < r && i - (n - r) == j)
}

fn schur_support(dim: usize, i: usize, j: usize) -> bool {
    if i == j {
        return true;
    }
    let blocks = dim / 2;
    i < 2 * blocks && j < 2 * blocks && i / 2 == j / 2
}

/// The grcs(p, q) matrix: C in the top-left r×r, identity middle of size
/// |p-q|, C in the bottom-right, +S top-right, -S bottom-left.
pub(crate) fn cs_matrix(p: usize, q: usize, angles: &[f64]) -> DenseMatrix {
    let r = p.min(q);
    let n = p + q;
    assert_eq!(angles.len(), r);
    let mut m = DenseMatrix::identity_real(n);
    for (j, &a) in angles.iter().enumerate() {
        let (c, s) = (a.cos(), a.sin());
        m.set_re(j, j, c);
        m.set_re(n - r + j, n - r + j, c);
        m.set_re(j, n - r + j, s);
        m.set_re(n - r + j, j, -s);
    }
    m
}

pub(crate) fn schur_matrix(dim: usize, angles: &[f64]) -> DenseMatrix {
    assert_eq!(angles.len(), dim / 2);
    let mut m = DenseMatrix::identity_real(dim);
    for (k, &a) in angles.iter().enumerate() {
        let b = rot(a.cos(), a.sin());
        for i in 0..2 {
            for j in 0..2 {
                m.set_re(2 * k + i, 2 * k + j, b[i][j]);
            }
        }
    }
    m
}
