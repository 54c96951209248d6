//! Dense float64 linear algebra: the matrix carrier used by every
//! decomposition, plus the factorization primitives built on top of it
//! (unitary EVD, real Schur form of orthogonal matrices, cosine-sine
//! decomposition, skew exponentials and CSG square roots).

mod csd;
mod csg;
mod evd;
mod expm;

pub use csd::csd;
pub use csg::{CsgElement, CsgKind};
pub(crate) use evd::ensure_seq;
pub use evd::{evd_unitary, hermitian_eigen, real_schur, skew_schur};
pub use expm::expm_skew;

/// Cluster contiguous runs of a sorted value list (gap tolerance `tol`).
pub fn evd_cluster_ranges(vals: &[f64], tol: f64) -> Vec<(usize, usize)> {
    evd::cluster_sorted(vals, tol)
}

/// Real orthonormal basis of a conjugation-closed complex span.
pub fn realify_basis(basis: &[Vec<C64>]) -> Result<Vec<Vec<f64>>, DlaError> {
    evd::realify_cluster(basis)
}

/// Deterministic phase gauge: largest-magnitude entry made real positive.
pub fn canonical_column_phase(v: &mut [C64]) {
    evd::canonicalize_phase(v)
}

use faer::Mat;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex64;

/// Default base tolerance; membership and reconstruction checks scale it as
/// `tol * sqrt(dim) * norm`. Overridable through `CARTAN_KAK_TOL`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Phase-gap tolerance below which eigenvalues are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

pub fn base_tol() -> f64 {
    match std::env::var("CARTAN_KAK_TOL") {
        Ok(s) => s.parse().unwrap_or(DEFAULT_TOL),
        Err(_) => DEFAULT_TOL,
    }
}

/// Membership/reconstruction tolerance scaled by dimension and norm.
pub fn scaled_tol(tol: f64, dim: usize, norm: f64) -> f64 {
    tol * (dim as f64).sqrt() * norm.max(1.0)
}

#[derive(Debug, thiserror::Error)]
pub enum DlaError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not special orthogonal (residual {0:.3e})")]
    NotSpecialOrthogonal(f64),
    #[error("matrix is not skew (residual {0:.3e})")]
    NotSkew(f64),
    #[error("bad split: p={p} + q={q} != dim {dim}")]
    BadSplit { p: usize, q: usize, dim: usize },
    #[error("degenerate eigenspace could not be re-orthogonalized (cluster of size {cluster}, residual {residual:.3e})")]
    DegenerateBasisFailure { cluster: usize, residual: f64 },
    #[error("decomposition backend failed: {0}")]
    Backend(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scalar {
    #[serde(rename = "real64")]
    Real64,
    #[serde(rename = "complex128")]
    Complex128,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

/// Row-major dense matrix over f64 or Complex<f64>.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Data,
}

impl DenseMatrix {
    pub fn zeros_real(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: Data::Real(vec![0.0; rows * cols]) }
    }

    pub fn zeros_complex(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: Data::Complex(vec![C64::new(0.0, 0.0); rows * cols]) }
    }

    pub fn identity_real(n: usize) -> Self {
        let mut m = Self::zeros_real(n, n);
        for i in 0..n {
            m.set_re(i, i, 1.0);
        }
        m
    }

    pub fn identity_complex(n: usize) -> Self {
        let mut m = Self::zeros_complex(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn_real(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data: Data::Real(data) }
    }

    pub fn from_fn_complex(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data: Data::Complex(data) }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_real(&self) -> bool {
        matches!(self.data, Data::Real(_))
    }

    pub fn scalar(&self) -> Scalar {
        if self.is_real() { Scalar::Real64 } else { Scalar::Complex128 }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        debug_assert!(i < self.rows && j < self.cols);
        match &self.data {
            Data::Real(d) => C64::new(d[i * self.cols + j], 0.0),
            Data::Complex(d) => d[i * self.cols + j],
        }
    }

    #[inline]
    pub fn re(&self, i: usize, j: usize) -> f64 {
        match &self.data {
            Data::Real(d) => d[i * self.cols + j],
            Data::Complex(d) => d[i * self.cols + j].re,
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let idx = i * self.cols + j;
        match &mut self.data {
            Data::Real(d) => {
                if v.im == 0.0 {
                    d[idx] = v.re;
                } else {
                    let mut c: Vec<C64> = d.iter().map(|&x| C64::new(x, 0.0)).collect();
                    c[idx] = v;
                    self.data = Data::Complex(c);
                }
            }
            Data::Complex(d) => d[idx] = v,
        }
    }

    #[inline]
    pub fn set_re(&mut self, i: usize, j: usize, v: f64) {
        let idx = i * self.cols + j;
        match &mut self.data {
            Data::Real(d) => d[idx] = v,
            Data::Complex(d) => d[idx] = C64::new(v, 0.0),
        }
    }

    pub fn to_complex(&self) -> Self {
        match &self.data {
            Data::Real(d) => Self {
                rows: self.rows,
                cols: self.cols,
                data: Data::Complex(d.iter().map(|&x| C64::new(x, 0.0)).collect()),
            },
            Data::Complex(_) => self.clone(),
        }
    }

    /// Largest imaginary magnitude; 0 for real storage.
    pub fn max_imag(&self) -> f64 {
        match &self.data {
            Data::Real(_) => 0.0,
            Data::Complex(d) => d.iter().fold(0.0f64, |m, z| m.max(z.im.abs())),
        }
    }

    /// Drop to real storage if every imaginary part is below `tol`.
    pub fn try_real(&self, tol: f64) -> Option<Self> {
        match &self.data {
            Data::Real(_) => Some(self.clone()),
            Data::Complex(d) => {
                if self.max_imag() <= tol {
                    Some(Self {
                        rows: self.rows,
                        cols: self.cols,
                        data: Data::Real(d.iter().map(|z| z.re).collect()),
                    })
                } else {
                    None
                }
            }
        }
    }

    pub(crate) fn to_faer_real(&self) -> Mat<f64> {
        match &self.data {
            Data::Real(d) => Mat::from_fn(self.rows, self.cols, |i, j| d[i * self.cols + j]),
            Data::Complex(_) => panic!("to_faer_real on complex matrix"),
        }
    }

    pub(crate) fn to_faer_complex(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j))
    }

    pub(crate) fn from_faer_real(m: faer::MatRef<'_, f64>) -> Self {
        Self::from_fn_real(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub(crate) fn from_faer_complex(m: faer::MatRef<'_, C64>) -> Self {
        Self::from_fn_complex(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        match (&self.data, &other.data) {
            (Data::Real(_), Data::Real(_)) => {
                let a = self.to_faer_real();
                let b = other.to_faer_real();
                let c = a * b;
                Self::from_faer_real(c.as_ref())
            }
            _ => {
                let a = self.to_faer_complex();
                let b = other.to_faer_complex();
                let c = a * b;
                Self::from_faer_complex(c.as_ref())
            }
        }
    }

    pub fn transpose(&self) -> Self {
        match &self.data {
            Data::Real(_) => Self::from_fn_real(self.cols, self.rows, |i, j| self.re(j, i)),
            Data::Complex(_) => Self::from_fn_complex(self.cols, self.rows, |i, j| self.at(j, i)),
        }
    }

    pub fn conj(&self) -> Self {
        match &self.data {
            Data::Real(_) => self.clone(),
            Data::Complex(_) => {
                Self::from_fn_complex(self.rows, self.cols, |i, j| self.at(i, j).conj())
            }
        }
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        match (&self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => Self {
                rows: self.rows,
                cols: self.cols,
                data: Data::Real(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            },
            _ => Self::from_fn_complex(self.rows, self.cols, |i, j| self.at(i, j) + other.at(i, j)),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        match (&self.data, &other.data) {
            (Data::Real(a), Data::Real(b)) => Self {
                rows: self.rows,
                cols: self.cols,
                data: Data::Real(a.iter().zip(b).map(|(x, y)| x - y).collect()),
            },
            _ => Self::from_fn_complex(self.rows, self.cols, |i, j| self.at(i, j) - other.at(i, j)),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        match &self.data {
            Data::Real(d) => Self {
                rows: self.rows,
                cols: self.cols,
                data: Data::Real(d.iter().map(|x| x * s).collect()),
            },
            Data::Complex(d) => Self {
                rows: self.rows,
                cols: self.cols,
                data: Data::Complex(d.iter().map(|z| z * s).collect()),
            },
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        if s.im == 0.0 {
            return self.scale_re(s.re);
        }
        Self::from_fn_complex(self.rows, self.cols, |i, j| self.at(i, j) * s)
    }

    pub fn neg(&self) -> Self {
        self.scale_re(-1.0)
    }

    pub fn fro_norm(&self) -> f64 {
        match &self.data {
            Data::Real(d) => d.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Data::Complex(d) => d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.data {
            Data::Real(d) => d.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            Data::Complex(d) => d.iter().fold(0.0f64, |m, z| m.max(z.norm())),
        }
    }

    /// Frobenius norm of `self - other`.
    pub fn residual(&self, other: &Self) -> f64 {
        self.sub(other).fro_norm()
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        let mut t = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            t += self.at(i, i);
        }
        t
    }

    /// Determinant through partial-pivot LU.
    pub fn det(&self) -> C64 {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return C64::new(1.0, 0.0);
        }
        match &self.data {
            Data::Real(_) => {
                let lu = self.to_faer_real().partial_piv_lu();
                let mut d = perm_parity(lu.P().arrays().0);
                let u = lu.U();
                for i in 0..n {
                    d *= u[(i, i)];
                }
                C64::new(d, 0.0)
            }
            Data::Complex(_) => {
                let lu = self.to_faer_complex().partial_piv_lu();
                let mut d = C64::new(perm_parity(lu.P().arrays().0), 0.0);
                let u = lu.U();
                for i in 0..n {
                    d *= u[(i, i)];
                }
                d
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols);
        match &self.data {
            Data::Real(_) => Self::from_fn_real(nr, nc, |i, j| self.re(r0 + i, c0 + j)),
            Data::Complex(_) => Self::from_fn_complex(nr, nc, |i, j| self.at(r0 + i, c0 + j)),
        }
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, m: &Self) {
        assert!(r0 + m.rows <= self.rows && c0 + m.cols <= self.cols);
        for i in 0..m.rows {
            for j in 0..m.cols {
                match (&mut self.data, &m.data) {
                    (Data::Real(d), Data::Real(s)) => {
                        d[(r0 + i) * self.cols + c0 + j] = s[i * m.cols + j]
                    }
                    _ => {
                        let v = m.at(i, j);
                        self.set(r0 + i, c0 + j, v);
                    }
                }
            }
        }
    }

    /// Direct sum `self ⊕ other`.
    pub fn dsum(&self, other: &Self) -> Self {
        let mut out = if self.is_real() && other.is_real() {
            Self::zeros_real(self.rows + other.rows, self.cols + other.cols)
        } else {
            Self::zeros_complex(self.rows + other.rows, self.cols + other.cols)
        };
        out.set_block(0, 0, self);
        out.set_block(self.rows, self.cols, other);
        out
    }

    /// Gather the square submatrix on the given coordinate list.
    pub fn gather(&self, coords: &[usize]) -> Self {
        let k = coords.len();
        match &self.data {
            Data::Real(_) => Self::from_fn_real(k, k, |i, j| self.re(coords[i], coords[j])),
            Data::Complex(_) => Self::from_fn_complex(k, k, |i, j| self.at(coords[i], coords[j])),
        }
    }

    /// Scatter a small square matrix onto the given coordinates of an identity.
    pub fn scatter_into_identity(&self, coords: &[usize], dim: usize) -> Self {
        assert_eq!(self.rows, coords.len());
        let mut out = if self.is_real() {
            Self::identity_real(dim)
        } else {
            Self::identity_complex(dim)
        };
        for i in 0..coords.len() {
            for j in 0..coords.len() {
                out.set(coords[i], coords[j], self.at(i, j));
            }
        }
        out
    }

    /// New matrix with row i = old row perm[i].
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rows);
        match &self.data {
            Data::Real(_) => Self::from_fn_real(self.rows, self.cols, |i, j| self.re(perm[i], j)),
            Data::Complex(_) => {
                Self::from_fn_complex(self.rows, self.cols, |i, j| self.at(perm[i], j))
            }
        }
    }

    /// New matrix with col j = old col perm[j].
    pub fn permute_cols(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.cols);
        match &self.data {
            Data::Real(_) => Self::from_fn_real(self.rows, self.cols, |i, j| self.re(i, perm[j])),
            Data::Complex(_) => {
                Self::from_fn_complex(self.rows, self.cols, |i, j| self.at(i, perm[j]))
            }
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r1, c1, r2, c2) = (self.rows, self.cols, other.rows, other.cols);
        if self.is_real() && other.is_real() {
            Self::from_fn_real(r1 * r2, c1 * c2, |i, j| {
                self.re(i / r2, j / c2) * other.re(i % r2, j % c2)
            })
        } else {
            Self::from_fn_complex(r1 * r2, c1 * c2, |i, j| {
                self.at(i / r2, j / c2) * other.at(i % r2, j % c2)
            })
        }
    }

    /// The symplectic form J_n = [[0, I], [-I, 0]] of dimension 2n.
    pub fn symplectic_form(n: usize) -> Self {
        let mut j = Self::zeros_real(2 * n, 2 * n);
        for i in 0..n {
            j.set_re(i, n + i, 1.0);
            j.set_re(n + i, i, -1.0);
        }
        j
    }

    /// I_{p,q} = diag(I_p, -I_q).
    pub fn ipq(p: usize, q: usize) -> Self {
        Self::from_fn_real(p + q, p + q, |i, j| {
            if i != j {
                0.0
            } else if i < p {
                1.0
            } else {
                -1.0
            }
        })
    }

    /// K_{p,q} = diag(I_p, -I_q, I_p, -I_q).
    pub fn kpq(p: usize, q: usize) -> Self {
        let n = p + q;
        Self::from_fn_real(2 * n, 2 * n, |i, j| {
            if i != j {
                0.0
            } else if (i % n) < p {
                1.0
            } else {
                -1.0
            }
        })
    }

    /// Block swap operator [[0, I_n], [I_n, 0]].
    pub fn block_swap(n: usize) -> Self {
        Self::from_fn_real(2 * n, 2 * n, |i, j| {
            if (i + n) % (2 * n) == j {
                1.0
            } else {
                0.0
            }
        })
    }

    // ---- predicates ----------------------------------------------------

    fn unitary_residual(&self) -> f64 {
        let prod = self.adjoint().matmul(self);
        let id = DenseMatrix::identity_complex(self.cols);
        prod.to_complex().residual(&id)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.unitary_residual() <= scaled_tol(tol, self.rows, 1.0)
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        self.max_imag() <= tol && self.is_unitary(tol)
    }

    pub fn is_special_orthogonal(&self, tol: f64) -> bool {
        self.is_orthogonal(tol) && (self.det().re - 1.0).abs() <= scaled_tol(tol, self.rows, 1.0)
    }

    /// M unitary and Mᵀ J_n M = J_n.
    pub fn is_symplectic_unitary(&self, tol: f64) -> bool {
        if !self.is_square() || self.rows % 2 != 0 || !self.is_unitary(tol) {
            return false;
        }
        let j = Self::symplectic_form(self.rows / 2).to_complex();
        let r = self.transpose().matmul(&j).matmul(self).residual(&j);
        r <= scaled_tol(tol, self.rows, 1.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.residual(&self.adjoint()) <= scaled_tol(tol, self.rows, self.fro_norm())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && self.residual(&self.transpose()) <= scaled_tol(tol, self.rows, self.fro_norm())
    }

    pub fn is_skew_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && self.max_imag() <= tol
            && self.add(&self.transpose()).fro_norm() <= scaled_tol(tol, self.rows, self.fro_norm())
    }

    pub fn is_skew_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.add(&self.adjoint()).fro_norm() <= scaled_tol(tol, self.rows, self.fro_norm())
    }
}

fn perm_parity(fwd: &[usize]) -> f64 {
    let n = fwd.len();
    let mut seen = vec![false; n];
    let mut parity = 0usize;
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0usize;
        while !seen[j] {
            seen[j] = true;
            j = fwd[j];
            len += 1;
        }
        parity += len - 1;
    }
    if parity % 2 == 0 { 1.0 } else { -1.0 }
}

// ---- JSON format -------------------------------------------------------
//
// {"rows": r, "cols": c, "scalar": "real64"|"complex128",
//  "data": [x, ...] or [[re, im], ...]} row-major.

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("DenseMatrix", 4)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("cols", &self.cols)?;
        st.serialize_field("scalar", &self.scalar())?;
        match &self.data {
            Data::Real(d) => st.serialize_field("data", d)?,
            Data::Complex(d) => {
                let pairs: Vec<[f64; 2]> = d.iter().map(|z| [z.re, z.im]).collect();
                st.serialize_field("data", &pairs)?;
            }
        }
        st.end()
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            rows: usize,
            cols: usize,
            scalar: Scalar,
            data: serde_json::Value,
        }
        let raw = Raw::deserialize(de)?;
        let n = raw.rows * raw.cols;
        let data = match raw.scalar {
            Scalar::Real64 => {
                let d: Vec<f64> =
                    serde_json::from_value(raw.data).map_err(D::Error::custom)?;
                if d.len() != n {
                    return Err(D::Error::custom("data length != rows*cols"));
                }
                Data::Real(d)
            }
            Scalar::Complex128 => {
                let d: Vec<[f64; 2]> =
                    serde_json::from_value(raw.data).map_err(D::Error::custom)?;
                if d.len() != n {
                    return Err(D::Error::custom("data length != rows*cols"));
                }
                Data::Complex(d.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            }
        };
        Ok(DenseMatrix { rows: raw.rows, cols: raw.cols, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_real_and_complex_agree() {
        let a = DenseMatrix::from_fn_real(3, 4, |i, j| (i * 4 + j) as f64 * 0.3 - 1.0);
        let b = DenseMatrix::from_fn_real(4, 2, |i, j| (i as f64 - j as f64) * 0.7);
        let c1 = a.matmul(&b);
        let c2 = a.to_complex().matmul(&b.to_complex());
        assert!(c1.to_complex().residual(&c2) < 1e-14);
    }

    #[test]
    fn det_matches_closed_form() {
        let m = DenseMatrix::from_fn_real(2, 2, |i, j| [[3.0, 1.0], [4.0, 2.0]][i][j]);
        assert!((m.det().re - 2.0).abs() < 1e-13);
        let c = DenseMatrix::from_fn_complex(2, 2, |i, j| {
            [[C64::new(0.0, 1.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(0.0, -1.0)]][i][j]
        });
        assert!((c.det() - C64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn symplectic_predicate_accepts_canonical_members() {
        let j = DenseMatrix::symplectic_form(2);
        assert!(j.is_symplectic_unitary(1e-12));
        // diag(i, -i) ∈ Sp(1)
        let m = DenseMatrix::from_fn_complex(2, 2, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if i == 0 {
                C64::new(0.0, 1.0)
            } else {
                C64::new(0.0, -1.0)
            }
        });
        assert!(m.is_symplectic_unitary(1e-12));
        // X = [[0,1],[1,0]] is unitary but not symplectic
        let x = DenseMatrix::from_fn_real(2, 2, |i, j| if i != j { 1.0 } else { 0.0 });
        assert!(!x.is_symplectic_unitary(1e-12));
    }

    #[test]
    fn json_round_trip() {
        let m = DenseMatrix::from_fn_complex(2, 3, |i, j| C64::new(i as f64, j as f64));
        let s = serde_json::to_string(&m).unwrap();
        let back: DenseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let r = DenseMatrix::from_fn_real(2, 2, |i, j| (i + j) as f64);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"scalar\":\"real64\""));
        let back: DenseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn gather_scatter_round_trip() {
        let m = DenseMatrix::from_fn_real(4, 4, |i, j| (i * 4 + j) as f64);
        let sub = m.gather(&[0, 2]);
        assert_eq!(sub.re(1, 0), 8.0);
        let back = sub.scatter_into_identity(&[0, 2], 4);
        assert_eq!(back.re(2, 0), 8.0);
        assert_eq!(back.re(1, 1), 1.0);
    }
}
