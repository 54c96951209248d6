//! The Cartan-involution calculus: canonical involutions for the ten
//! symmetric-space types, application and classification, composition with
//! the commutation criterion, eigensplits, gradings from compatible sets,
//! new decompositions from gradings, and the 2-recursive lift table.

use crate::densela::{C64, DenseMatrix, hermitian_eigen, scaled_tol};
use crate::rep;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum InvolutionError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("not an involution (residual {0:.3e})")]
    NotAnInvolution(f64),
    #[error("unclassifiable: {0}")]
    Unclassifiable(String),
    #[error("involutions do not commute (residual {0:.3e})")]
    NonCommuting(f64),
    #[error("incompatible set: intersections cover {covered} of {total} dimensions")]
    Incompatible { covered: usize, total: usize },
    #[error("not a subgroup of Z2^c")]
    NotSubgroup,
    #[error("phi is not a homomorphism")]
    NotHomomorphism,
    #[error("inhomogeneous recursion step: {0}")]
    Inhomogeneous(String),
    #[error("basis is not preserved by the involution (residual {0:.3e})")]
    NotPreserved(f64),
    #[error(transparent)]
    Dla(#[from] crate::densela::DlaError),
}

type Result<T> = std::result::Result<T, InvolutionError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvolutionType {
    A,
    AI,
    AII,
    AIII { p: usize, q: usize },
    BD,
    BDI { p: usize, q: usize },
    DIII,
    C,
    CI,
    CII { p: usize, q: usize },
    Trivial,
}

impl InvolutionType {
    pub fn base_eq(&self, other: &InvolutionType) -> bool {
        use InvolutionType::*;
        matches!(
            (self, other),
            (A, A)
                | (AI, AI)
                | (AII, AII)
                | (AIII { .. }, AIII { .. })
                | (BD, BD)
                | (BDI { .. }, BDI { .. })
                | (DIII, DIII)
                | (C, C)
                | (CI, CI)
                | (CII { .. }, CII { .. })
                | (Trivial, Trivial)
        )
    }
}

impl std::fmt::Display for InvolutionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use InvolutionType::*;
        match self {
            A => write!(f, "A"),
            AI => write!(f, "AI"),
            AII => write!(f, "AII"),
            AIII { p, q } => write!(f, "AIII({p},{q})"),
            BD => write!(f, "BD"),
            BDI { p, q } => write!(f, "BDI({p},{q})"),
            DIII => write!(f, "DIII"),
            C => write!(f, "C"),
            CI => write!(f, "CI"),
            CII { p, q } => write!(f, "CII({p},{q})"),
            Trivial => write!(f, "Trivial"),
        }
    }
}

/// The algebra an involution acts on, with its carrier dimension implied:
/// U(n) and SO(n) carriers are n×n, Sp(n) is 2n×2n, and block-diagonal sums
/// carry both summands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgebraId {
    U(usize),
    SO(usize),
    Sp(usize),
    UU(usize, usize),
    SOSO(usize, usize),
    SpSp(usize, usize),
}

impl AlgebraId {
    pub fn carrier_dim(&self) -> usize {
        match *self {
            AlgebraId::U(n) | AlgebraId::SO(n) => n,
            AlgebraId::Sp(n) => 2 * n,
            AlgebraId::UU(p, q) | AlgebraId::SOSO(p, q) => p + q,
            AlgebraId::SpSp(p, q) => 2 * (p + q),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            AlgebraId::U(n) => n * n,
            AlgebraId::SO(n) => n * (n.saturating_sub(1)) / 2,
            AlgebraId::Sp(n) => 2 * n * n + n,
            AlgebraId::UU(p, q) => p * p + q * q,
            AlgebraId::SOSO(p, q) => p * (p - 1) / 2 + q * (q - 1) / 2,
            AlgebraId::SpSp(p, q) => 2 * p * p + p + 2 * q * q + q,
        }
    }

    pub fn is_doubled(&self) -> bool {
        matches!(self, AlgebraId::UU(..) | AlgebraId::SOSO(..) | AlgebraId::SpSp(..))
    }

    /// Orthonormal basis of the algebra in its carrier representation
    /// (real span, trace inner product).
    pub fn standard_basis(&self) -> Vec<DenseMatrix> {
        let inv_sqrt2 = 1.0 / f64::sqrt(2.0);
        match *self {
            AlgebraId::U(n) => {
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    let mut m = DenseMatrix::zeros_complex(n, n);
                    m.set(i, i, C64::new(0.0, 1.0));
                    out.push(m);
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut m = DenseMatrix::zeros_complex(n, n);
                        m.set(i, j, C64::new(inv_sqrt2, 0.0));
                        m.set(j, i, C64::new(-inv_sqrt2, 0.0));
                        out.push(m);
                        let mut m = DenseMatrix::zeros_complex(n, n);
                        m.set(i, j, C64::new(0.0, inv_sqrt2));
                        m.set(j, i, C64::new(0.0, inv_sqrt2));
                        out.push(m);
                    }
                }
                out
            }
            AlgebraId::SO(n) => {
                let mut out = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut m = DenseMatrix::zeros_real(n, n);
                        m.set_re(i, j, inv_sqrt2);
                        m.set_re(j, i, -inv_sqrt2);
                        out.push(m);
                    }
                }
                out
            }
            AlgebraId::Sp(n) => {
                // x = [[a, b], [-b*, a*]], a† = -a, bᵀ = b
                let d = 2 * n;
                let mut out = Vec::new();
                for i in 0..n {
                    let mut m = DenseMatrix::zeros_complex(d, d);
                    m.set(i, i, C64::new(0.0, inv_sqrt2));
                    m.set(n + i, n + i, C64::new(0.0, -inv_sqrt2));
                    out.push(m);
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut m = DenseMatrix::zeros_complex(d, d);
                        m.set(i, j, C64::new(0.5, 0.0));
                        m.set(j, i, C64::new(-0.5, 0.0));
                        m.set(n + i, n + j, C64::new(0.5, 0.0));
                        m.set(n + j, n + i, C64::new(-0.5, 0.0));
                        out.push(m);
                        let mut m = DenseMatrix::zeros_complex(d, d);
                        m.set(i, j, C64::new(0.0, 0.5));
                        m.set(j, i, C64::new(0.0, 0.5));
                        m.set(n + i, n + j, C64::new(0.0, -0.5));
                        m.set(n + j, n + i, C64::new(0.0, -0.5));
                        out.push(m);
                    }
                }
                for i in 0..n {
                    let mut m = DenseMatrix::zeros_complex(d, d);
                    m.set(i, n + i, C64::new(inv_sqrt2, 0.0));
                    m.set(n + i, i, C64::new(-inv_sqrt2, 0.0));
                    out.push(m);
                    let mut m = DenseMatrix::zeros_complex(d, d);
                    m.set(i, n + i, C64::new(0.0, inv_sqrt2));
                    m.set(n + i, i, C64::new(0.0, inv_sqrt2));
                    out.push(m);
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut m = DenseMatrix::zeros_complex(d, d);
                        m.set(i, n + j, C64::new(0.5, 0.0));
                        m.set(j, n + i, C64::new(0.5, 0.0));
                        m.set(n + i, j, C64::new(-0.5, 0.0));
                        m.set(n + j, i, C64::new(-0.5, 0.0));
                        out.push(m);
                        let mut m = DenseMatrix::zeros_complex(d, d);
                        m.set(i, n + j, C64::new(0.0, 0.5));
                        m.set(j, n + i, C64::new(0.0, 0.5));
                        m.set(n + i, j, C64::new(0.0, 0.5));
                        m.set(n + j, i, C64::new(0.0, 0.5));
                        out.push(m);
                    }
                }
                out
            }
            AlgebraId::UU(p, q) => embed_blocks(&AlgebraId::U(p), &AlgebraId::U(q)),
            AlgebraId::SOSO(p, q) => embed_blocks(&AlgebraId::SO(p), &AlgebraId::SO(q)),
            AlgebraId::SpSp(p, q) => embed_blocks(&AlgebraId::Sp(p), &AlgebraId::Sp(q)),
        }
    }
}

fn embed_blocks(a: &AlgebraId, b: &AlgebraId) -> Vec<DenseMatrix> {
    let (da, db) = (a.carrier_dim(), b.carrier_dim());
    let mut out = Vec::new();
    for m in a.standard_basis() {
        let mut big = DenseMatrix::zeros_complex(da + db, da + db);
        big.set_block(0, 0, &m.to_complex());
        out.push(big);
    }
    for m in b.standard_basis() {
        let mut big = DenseMatrix::zeros_complex(da + db, da + db);
        big.set_block(da, da, &m.to_complex());
        out.push(big);
    }
    out
}

/// A Cartan involution θ(x) = M x^{*τ} M† on the carrier of `algebra`; for
/// doubled algebras the block swap is folded into M and recorded by `sigma`.
#[derive(Clone, Debug)]
pub struct Involution {
    pub algebra: AlgebraId,
    conj: DenseMatrix,
    pub tau: bool,
    pub sigma: bool,
    pub declared: InvolutionType,
    /// Group element W expressing θ = Ad_{W†} ∘ θ_canonical ∘ Ad_W; consumed
    /// by the generic-basis KAK path.
    pub basis_change: Option<DenseMatrix>,
}

impl Involution {
    pub fn new(
        algebra: AlgebraId,
        g: DenseMatrix,
        tau: bool,
        sigma: bool,
        declared: InvolutionType,
    ) -> Result<Self> {
        let d = algebra.carrier_dim();
        if g.rows() != d || g.cols() != d {
            return Err(InvolutionError::DimMismatch(format!(
                "conjugator is {}x{}, carrier needs {d}",
                g.rows(),
                g.cols()
            )));
        }
        let conj = if sigma {
            if d % 2 != 0 {
                return Err(InvolutionError::BadParams("swap needs an even carrier".into()));
            }
            DenseMatrix::block_swap(d / 2).matmul(&g)
        } else {
            g
        };
        Ok(Self { algebra, conj, tau, sigma, declared, basis_change: None })
    }

    /// The table's G, with the block swap factored back out.
    pub fn g_matrix(&self) -> DenseMatrix {
        if self.sigma {
            let d = self.algebra.carrier_dim();
            DenseMatrix::block_swap(d / 2).matmul(&self.conj)
        } else {
            self.conj.clone()
        }
    }

    /// Full conjugator including the swap.
    pub fn full_conjugator(&self) -> &DenseMatrix {
        &self.conj
    }

    /// θ(x); the same linear formula acts on algebra and group elements.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let d = self.algebra.carrier_dim();
        if x.rows() != d || x.cols() != d {
            return Err(InvolutionError::DimMismatch(format!(
                "element is {}x{}, carrier needs {d}",
                x.rows(),
                x.cols()
            )));
        }
        let xc = if self.tau { x.conj() } else { x.clone() };
        Ok(self.conj.matmul(&xc).matmul(&self.conj.adjoint()))
    }

    /// Residual against θ² = id, via the conjugator identity M·M^{*τ} ∝ 1.
    pub fn involution_residual(&self) -> f64 {
        let d = self.algebra.carrier_dim();
        let m = &self.conj;
        let mm = if self.tau { m.matmul(&m.conj()) } else { m.matmul(m) };
        let tr = mm.trace();
        let phase = if tr.norm() > 1e-12 { tr / tr.norm() } else { C64::new(1.0, 0.0) };
        let id = DenseMatrix::identity_complex(d).scale(phase);
        mm.to_complex().residual(&id)
    }
}

/// The table's generic θ0 for each type. AIII/BDI/CII carry their split in
/// the type; the others take the table's dimension parameter n.
pub fn canonical_involution(ty: InvolutionType, n: usize) -> Result<Involution> {
    use InvolutionType::*;
    match ty {
        A => Involution::new(AlgebraId::UU(n, n), DenseMatrix::identity_real(2 * n), false, true, ty),
        AI => Involution::new(AlgebraId::U(n), DenseMatrix::identity_real(n), true, false, ty),
        AII => {
            Involution::new(AlgebraId::U(2 * n), DenseMatrix::symplectic_form(n), true, false, ty)
        }
        AIII { p, q } => {
            let declared = if p == 0 || q == 0 { Trivial } else { ty };
            Involution::new(AlgebraId::U(p + q), DenseMatrix::ipq(p, q), false, false, declared)
        }
        BD => {
            Involution::new(AlgebraId::SOSO(n, n), DenseMatrix::identity_real(2 * n), false, true, ty)
        }
        BDI { p, q } => {
            let declared = if p == 0 || q == 0 { Trivial } else { ty };
            Involution::new(AlgebraId::SO(p + q), DenseMatrix::ipq(p, q), false, false, declared)
        }
        DIII => {
            Involution::new(AlgebraId::SO(2 * n), DenseMatrix::symplectic_form(n), false, false, ty)
        }
        C => Involution::new(
            AlgebraId::SpSp(n, n),
            DenseMatrix::identity_real(4 * n),
            false,
            true,
            ty,
        ),
        CI => Involution::new(AlgebraId::Sp(n), DenseMatrix::symplectic_form(n), false, false, ty),
        CII { p, q } => {
            let declared = if p == 0 || q == 0 { Trivial } else { ty };
            Involution::new(AlgebraId::Sp(p + q), DenseMatrix::kpq(p, q), false, false, declared)
        }
        Trivial => Err(InvolutionError::BadParams("trivial type has no canonical form".into())),
    }
}

// ---- classification ------------------------------------------------------

/// The phase lattice for Ad-equivalence on each carrier: 2πk/n on u(n),
/// {0, π} on orthogonal/symplectic carriers.
fn snap_phase(phi: f64, algebra: &AlgebraId) -> f64 {
    match algebra {
        AlgebraId::U(n) => {
            let step = 2.0 * PI / (*n as f64);
            (phi / step).round() * step
        }
        AlgebraId::UU(p, q) => {
            let step = 2.0 * PI / ((p + q) as f64);
            (phi / step).round() * step
        }
        _ => {
            if phi.cos() >= 0.0 { 0.0 } else { PI }
        }
    }
}

/// Identify the involution type of (G, τ, σ) on `algebra` per the table of
/// functional forms; (p, q) recovered from eigenvalue multiplicities with
/// ties broken toward p ≥ q.
pub fn classify(
    g: &DenseMatrix,
    tau: bool,
    sigma: bool,
    algebra: AlgebraId,
) -> Result<InvolutionType> {
    let theta = Involution::new(algebra, g.clone(), tau, sigma, InvolutionType::Trivial)?;
    let res = theta.involution_residual();
    let d = algebra.carrier_dim();
    if res > scaled_tol(1e-9, d, 1.0) {
        return Err(InvolutionError::NotAnInvolution(res));
    }
    classify_involution(&theta)
}

pub fn classify_involution(theta: &Involution) -> Result<InvolutionType> {
    use InvolutionType::*;
    let algebra = theta.algebra;
    let d = algebra.carrier_dim();
    let m = theta.conj.clone();

    if algebra.is_doubled() {
        // block-anti-diagonal full conjugator ⇒ swap involution of type A/BD/C
        let h = d / 2;
        let mut diag_mass = 0.0f64;
        let mut anti_mass = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let v = m.at(i, j).norm_sqr();
                if (i < h) == (j < h) {
                    diag_mass += v;
                } else {
                    anti_mass += v;
                }
            }
        }
        if anti_mass > diag_mass * 1e6 {
            return Ok(match algebra {
                AlgebraId::UU(..) => A,
                AlgebraId::SOSO(..) => BD,
                AlgebraId::SpSp(..) => C,
                _ => unreachable!(),
            });
        }
        if diag_mass > anti_mass * 1e6 {
            // per-block classification; homogeneous blocks only
            let (pa, qa) = match algebra {
                AlgebraId::UU(p, q) | AlgebraId::SOSO(p, q) => (p, q),
                AlgebraId::SpSp(p, q) => (2 * p, 2 * q),
                _ => unreachable!(),
            };
            let sub = |alg: AlgebraId, blk: DenseMatrix| -> Result<InvolutionType> {
                classify(&blk, theta.tau, false, alg)
            };
            let (alg_a, alg_b) = match algebra {
                AlgebraId::UU(p, q) => (AlgebraId::U(p), AlgebraId::U(q)),
                AlgebraId::SOSO(p, q) => (AlgebraId::SO(p), AlgebraId::SO(q)),
                AlgebraId::SpSp(p, q) => (AlgebraId::Sp(p), AlgebraId::Sp(q)),
                _ => unreachable!(),
            };
            let ta = sub(alg_a, m.block(0, 0, pa, pa))?;
            let tb = sub(alg_b, m.block(pa, pa, qa, qa))?;
            if ta.base_eq(&tb) || matches!(tb, Trivial) || matches!(ta, Trivial) {
                return Ok(if matches!(ta, Trivial) { tb } else { ta });
            }
            return Err(InvolutionError::Inhomogeneous(format!("{ta} ⊕ {tb}")));
        }
        return Err(InvolutionError::Unclassifiable(
            "conjugator is neither block-diagonal nor block-anti-diagonal".into(),
        ));
    }

    match algebra {
        AlgebraId::U(n) => {
            if theta.tau {
                // M Mᵀ-relation: Mᵀ = ±M
                let overlap = inner(&m.transpose(), &m);
                let psi = snap_phase(overlap.arg(), &AlgebraId::SO(n));
                let target = m.scale(C64::from_polar(1.0, psi));
                if m.transpose().residual(&target) > scaled_tol(1e-8, n, 1.0) {
                    return Err(InvolutionError::Unclassifiable(
                        "conjugator is neither symmetric nor antisymmetric".into(),
                    ));
                }
                if psi.cos() > 0.0 { Ok(AI) } else { Ok(AII) }
            } else {
                let (p, q) = hermitian_signature(&m)?;
                if q == 0 { Ok(Trivial) } else { Ok(AIII { p, q }) }
            }
        }
        AlgebraId::SO(n) => {
            let mr = match m.try_real(1e-9 * m.max_abs().max(1.0)) {
                Some(r) => r,
                None => phase_align_real(&m)?,
            };
            let sym = mr.sub(&mr.transpose()).fro_norm();
            let asym = mr.add(&mr.transpose()).fro_norm();
            if sym <= scaled_tol(1e-8, n, 1.0) {
                let (p, q) = hermitian_signature(&mr)?;
                if q == 0 { Ok(Trivial) } else { Ok(BDI { p, q }) }
            } else if asym <= scaled_tol(1e-8, n, 1.0) {
                Ok(DIII)
            } else {
                Err(InvolutionError::Unclassifiable("orthogonal conjugator not ±symmetric".into()))
            }
        }
        AlgebraId::Sp(n) => {
            // normalize a τ=1 form into a τ=0 conjugator using * = Ad_{Jᵀ}
            let m0 = if theta.tau {
                m.matmul(&DenseMatrix::symplectic_form(n).transpose().to_complex())
            } else {
                m.clone()
            };
            // M² = e^{iψ}: ψ = 0 → CII, ψ = π → CI
            let mm = m0.matmul(&m0);
            let tr = mm.trace();
            let psi = snap_phase(tr.arg(), &AlgebraId::SO(d));
            if psi.cos() > 0.0 {
                let h = m0.scale(C64::from_polar(1.0, -psi / 2.0));
                let (p2, q2) = hermitian_signature(&h)?;
                if p2 % 2 != 0 || q2 % 2 != 0 {
                    return Err(InvolutionError::Unclassifiable(
                        "odd eigenvalue multiplicities on a symplectic carrier".into(),
                    ));
                }
                let (p, q) = (p2 / 2, q2 / 2);
                if q == 0 { Ok(Trivial) } else { Ok(CII { p, q }) }
            } else {
                Ok(CI)
            }
        }
        _ => unreachable!(),
    }
}

fn inner(a: &DenseMatrix, b: &DenseMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += a.at(i, j).conj() * b.at(i, j);
        }
    }
    acc
}

fn phase_align_real(m: &DenseMatrix) -> Result<DenseMatrix> {
    // a complex-stored conjugator on a real carrier may carry a global phase
    let mut best = C64::new(0.0, 0.0);
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m.at(i, j).norm() > best.norm() {
                best = m.at(i, j);
            }
        }
    }
    let ph = best / best.norm();
    m.scale(ph.conj())
        .try_real(1e-8 * m.max_abs().max(1.0))
        .ok_or_else(|| InvolutionError::Unclassifiable("conjugator not real up to phase".into()))
}

/// Phase-normalize M (with M² ∝ 1) to a Hermitian reflection and count the
/// ±1 eigenvalues; ties broken toward p ≥ q.
fn hermitian_signature(m: &DenseMatrix) -> Result<(usize, usize)> {
    let n = m.rows();
    let mm = m.matmul(m);
    let tr = mm.trace();
    let psi = if tr.norm() > 1e-9 { tr.arg() } else { 0.0 };
    let h = m.scale(C64::from_polar(1.0, -psi / 2.0));
    let herm = h.add(&h.adjoint()).scale_re(0.5);
    let (_, evals) = hermitian_eigen(&herm)?;
    let p = evals.iter().filter(|&&e| e > 0.0).count();
    let q = n - p;
    if p >= q { Ok((p, q)) } else { Ok((q, p)) }
}

// ---- composition ---------------------------------------------------------

/// θ₁∘θ₂ with the commutation criterion G₁G₂ = e^{iφ}G₂G₁; the resulting
/// conjugator is phase-corrected and the type classified per the
/// composition table.
pub fn compose(t1: &Involution, t2: &Involution) -> Result<Involution> {
    if t1.algebra != t2.algebra {
        return Err(InvolutionError::DimMismatch(format!(
            "{:?} vs {:?}",
            t1.algebra, t2.algebra
        )));
    }
    let algebra = t1.algebra;
    let d = algebra.carrier_dim();
    let m1 = &t1.conj;
    let m2 = &t2.conj;
    let fwd = m1.matmul(&if t1.tau { m2.conj() } else { m2.clone() });
    let bwd = m2.matmul(&if t2.tau { m1.conj() } else { m1.clone() });
    let overlap = inner(&bwd, &fwd);
    let phi = snap_phase(overlap.arg(), &algebra);
    let residual = fwd.to_complex().residual(&bwd.scale(C64::from_polar(1.0, phi)));
    if residual > scaled_tol(1e-8, d, 1.0) {
        return Err(InvolutionError::NonCommuting(residual));
    }
    let tau3 = t1.tau ^ t2.tau;
    let sigma3 = t1.sigma ^ t2.sigma;
    // phase-corrected conjugator (the table's e^{-iφ/2} choice)
    let m3 = fwd.scale(C64::from_polar(1.0, -phi / 2.0));
    let g3 = if sigma3 {
        DenseMatrix::block_swap(d / 2).to_complex().matmul(&m3)
    } else {
        m3
    };
    let ty = classify(&g3, tau3, sigma3, algebra)?;
    Involution::new(algebra, g3, tau3, sigma3, ty)
}

// ---- eigensplits and gradings ---------------------------------------------

/// Vectorize a carrier matrix into real coordinates for subspace work.
fn vectorize(m: &DenseMatrix) -> Vec<f64> {
    let (r, c) = (m.rows(), m.cols());
    let mut v = Vec::with_capacity(2 * r * c);
    for i in 0..r {
        for j in 0..c {
            let z = m.at(i, j);
            v.push(z.re);
            v.push(z.im);
        }
    }
    v
}

fn devectorize(v: &[f64], r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn_complex(r, c, |i, j| {
        C64::new(v[2 * (i * c + j)], v[2 * (i * c + j) + 1])
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt with pivoting over real vectors; drops directions
/// below `tol`.
fn orthonormalize(vecs: &mut Vec<Vec<f64>>, tol: f64) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vecs.len());
    let mut work: Vec<Vec<f64>> = std::mem::take(vecs);
    loop {
        // pivot on the largest remaining norm
        let Some((idx, norm)) = work
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(v, v).sqrt()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        else {
            break;
        };
        if norm < tol {
            break;
        }
        let mut v = work.swap_remove(idx);
        for x in v.iter_mut() {
            *x /= norm;
        }
        for u in work.iter_mut() {
            let ip = dot(&v, u);
            for (ui, vi) in u.iter_mut().zip(&v) {
                *ui -= ip * vi;
            }
        }
        out.push(v);
    }
    *vecs = out;
}

/// Split the span of `basis` into the ±1 eigenspaces of θ. Returns
/// orthonormal bases (k, p).
pub fn eigensplit(
    theta: &Involution,
    basis: &[DenseMatrix],
) -> Result<(Vec<DenseMatrix>, Vec<DenseMatrix>)> {
    let d = theta.algebra.carrier_dim();
    let mut span: Vec<Vec<f64>> = basis.iter().map(vectorize).collect();
    orthonormalize(&mut span, 1e-9);
    let total = span.len();

    // θ must preserve the span
    for m in basis {
        let tm = vectorize(&theta.apply(m)?);
        let mut resid = tm.clone();
        for u in &span {
            let ip = dot(u, &tm);
            for (ri, ui) in resid.iter_mut().zip(u) {
                *ri -= ip * ui;
            }
        }
        let r = dot(&resid, &resid).sqrt();
        if r > 1e-7 * dot(&tm, &tm).sqrt().max(1.0) {
            return Err(InvolutionError::NotPreserved(r));
        }
    }

    let mut kvecs = Vec::new();
    let mut pvecs = Vec::new();
    for m in basis {
        let tm = theta.apply(m)?;
        kvecs.push(vectorize(&m.add(&tm).scale_re(0.5)));
        pvecs.push(vectorize(&m.sub(&tm).scale_re(0.5)));
    }
    orthonormalize(&mut kvecs, 1e-8);
    orthonormalize(&mut pvecs, 1e-8);
    if kvecs.len() + pvecs.len() != total {
        return Err(InvolutionError::Incompatible {
            covered: kvecs.len() + pvecs.len(),
            total,
        });
    }
    let to_mats =
        |vs: Vec<Vec<f64>>| -> Vec<DenseMatrix> { vs.iter().map(|v| devectorize(v, d, d)).collect() };
    Ok((to_mats(kvecs), to_mats(pvecs)))
}

/// Intersection of two subspaces given by orthonormal real bases, through
/// principal angles (singular values of the cross-Gram matrix ≈ 1).
fn intersect(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    crate::densela::ensure_seq();
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let (ka, kb) = (a.len(), b.len());
    let g = faer::Mat::from_fn(ka, kb, |i, j| dot(&a[i], &b[j]));
    let svd = g.svd().expect("cross-gram svd");
    let mut out = Vec::new();
    for k in 0..ka.min(kb) {
        if svd.S()[k] >= 1.0 - tol {
            let u: Vec<f64> = (0..ka).map(|i| svd.U()[(i, k)]).collect();
            let n = a[0].len();
            let mut v = vec![0.0f64; n];
            for (i, ui) in u.iter().enumerate() {
                for (x, ai) in v.iter_mut().zip(&a[i]) {
                    *x += ui * ai;
                }
            }
            out.push(v);
        }
    }
    out
}

/// A Cartan c-grading: subspace bases indexed by bitstrings s ∈ {0,1}^c,
/// bit j = 1 meaning the p-side of the j-th involution.
#[derive(Clone, Debug)]
pub struct Grading {
    pub c: usize,
    pub carrier_dim: usize,
    pub subspaces: Vec<(u32, Vec<DenseMatrix>)>,
}

impl Grading {
    pub fn subspace(&self, s: u32) -> Option<&[DenseMatrix]> {
        self.subspaces.iter().find(|(t, _)| *t == s).map(|(_, b)| b.as_slice())
    }

    pub fn total_dim(&self) -> usize {
        self.subspaces.iter().map(|(_, b)| b.len()).sum()
    }
}

/// Build the 2^c intersection grading from compatible involutions; reports
/// the covered dimension count when the set is incompatible.
pub fn grading_from_involutions(
    thetas: &[Involution],
    basis: &[DenseMatrix],
) -> Result<Grading> {
    let c = thetas.len();
    assert!(c >= 1 && c <= 20);
    let algebra = thetas[0].algebra;
    for t in thetas {
        if t.algebra != algebra {
            return Err(InvolutionError::DimMismatch("gradings need a common algebra".into()));
        }
    }
    let d = algebra.carrier_dim();

    let mut span: Vec<Vec<f64>> = basis.iter().map(vectorize).collect();
    orthonormalize(&mut span, 1e-9);
    let total = span.len();

    // eigensplit per involution, then intersect per bitstring
    let mut splits: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = Vec::with_capacity(c);
    for t in thetas {
        let (k, p) = eigensplit(t, basis)?;
        splits.push((k.iter().map(vectorize).collect(), p.iter().map(vectorize).collect()));
    }

    let mut subspaces = Vec::new();
    let mut covered = 0usize;
    for s in 0..(1u32 << c) {
        let mut cur: Option<Vec<Vec<f64>>> = None;
        for (j, (k, p)) in splits.iter().enumerate() {
            let side = if (s >> j) & 1 == 0 { k } else { p };
            cur = Some(match cur {
                None => side.clone(),
                Some(prev) => intersect(&prev, side, 1e-7),
            });
        }
        let bas = cur.unwrap_or_default();
        covered += bas.len();
        subspaces.push((s, bas.iter().map(|v| devectorize(v, d, d)).collect()));
    }
    if covered != total {
        return Err(InvolutionError::Incompatible { covered, total });
    }
    Ok(Grading { c, carrier_dim: d, subspaces })
}

/// g_Q = ⊕_{s∈Q} g_s with a CD split from a homomorphism φ: Q → Z2.
/// Returns (subalgebra basis, k basis, p basis, improper flag); `improper`
/// marks φ ≡ 0 (empty horizontal space).
pub fn cd_from_grading(
    g: &Grading,
    q_set: &[u32],
    phi: &dyn Fn(u32) -> bool,
) -> Result<(Vec<DenseMatrix>, Vec<DenseMatrix>, Vec<DenseMatrix>, bool)> {
    use std::collections::BTreeSet;
    let q: BTreeSet<u32> = q_set.iter().copied().collect();
    if !q.contains(&0) {
        return Err(InvolutionError::NotSubgroup);
    }
    for &s in &q {
        if s >= (1u32 << g.c) {
            return Err(InvolutionError::NotSubgroup);
        }
        for &t in &q {
            if !q.contains(&(s ^ t)) {
                return Err(InvolutionError::NotSubgroup);
            }
        }
    }
    for &s in &q {
        for &t in &q {
            if phi(s ^ t) != (phi(s) ^ phi(t)) {
                return Err(InvolutionError::NotHomomorphism);
            }
        }
    }
    let mut sub = Vec::new();
    let mut k = Vec::new();
    let mut p = Vec::new();
    for &s in &q {
        if let Some(b) = g.subspace(s) {
            sub.extend_from_slice(b);
            if phi(s) {
                p.extend_from_slice(b);
            } else {
                k.extend_from_slice(b);
            }
        }
    }
    let improper = p.is_empty();
    Ok((sub, k, p, improper))
}

// ---- 2-recursive lifts -----------------------------------------------------

/// Lift θ₂ (given on the defining representation of θ₁'s vertical algebra)
/// to an involution on θ₁'s full algebra, per the lift table. `basis_g` is
/// the group element expressing θ₁ = Ad_{G†} ∘ θ0 ∘ Ad_G.
pub fn lift_step(t1: &Involution, t2: &Involution, basis_g: &DenseMatrix) -> Result<Involution> {
    use InvolutionType::*;
    let g_alg = t1.algebra;
    let d = g_alg.carrier_dim();
    if basis_g.rows() != d {
        return Err(InvolutionError::DimMismatch("basis element must live on g's carrier".into()));
    }
    let u = basis_g.to_complex();

    // conjugator of θ₂ embedded into g's carrier, and its τ
    let (embedded, tau2): (DenseMatrix, bool) = match (t1.declared, t2.declared) {
        // doubled parents: k ≅ base algebra, embed M ⊕ M
        (A, AI) | (A, AII) | (A, AIII { .. }) | (BD, BDI { .. }) | (BD, DIII) | (C, CI)
        | (C, CII { .. }) => {
            let m2 = t2.conj.to_complex();
            (m2.dsum(&m2), t2.tau)
        }
        // AI parent: k = so(n) on the same carrier
        (AI, BDI { .. }) | (AI, DIII) => (t2.conj.to_complex(), false),
        // AII parent: k = sp(n) on the same carrier
        (AII, CI) => {
            // the table's AI-producing lift uses the Ad_S∘* form, S = M·J
            let n2 = t2.algebra.carrier_dim();
            let j = DenseMatrix::symplectic_form(n2 / 2).to_complex();
            let s = if t2.tau { t2.conj.to_complex() } else { t2.conj.matmul(&j) };
            (s, true)
        }
        (AII, CII { .. }) => {
            let m = if t2.tau {
                let n2 = t2.algebra.carrier_dim();
                let j = DenseMatrix::symplectic_form(n2 / 2).to_complex();
                t2.conj.matmul(&j.transpose())
            } else {
                t2.conj.to_complex()
            };
            (m, false)
        }
        // AIII parent: k = u(p)⊕u(q) block carrier, embed as-is; homogeneity
        // is enforced by classify on the block structure
        (AIII { .. }, A) => (t2.conj.to_complex(), false),
        (AIII { p, q }, t2d) => {
            check_homogeneous(t2, p, q)?;
            match t2d {
                AI | AII => (t2.conj.to_complex(), true),
                AIII { .. } => (t2.conj.to_complex(), false),
                other => {
                    return Err(InvolutionError::Inhomogeneous(format!(
                        "AIII parent cannot host {other}"
                    )));
                }
            }
        }
        (BDI { .. }, BD) => (t2.conj.to_complex(), false),
        (BDI { p, q }, t2d) => {
            check_homogeneous(t2, p, q)?;
            match t2d {
                BDI { .. } | DIII => (t2.conj.to_complex(), false),
                other => {
                    return Err(InvolutionError::Inhomogeneous(format!(
                        "BDI parent cannot host {other}"
                    )));
                }
            }
        }
        // DIII and CI parents: k ≅ u(n) through φ×; embed via φ_τ
        (DIII, AI) | (DIII, AII) | (CI, AI) | (CI, AII) => {
            (rep::varphi_tau(&t2.conj, true).to_complex(), false)
        }
        (DIII, AIII { .. }) | (CI, AIII { .. }) => {
            (rep::varphi_tau(&t2.conj, false).to_complex(), false)
        }
        // CII parent: k = sp(p)⊕sp(q) embedded through the pair permutation
        (CII { p, q }, t2d) => {
            if p < q {
                return Err(InvolutionError::BadParams("CII lift expects p >= q".into()));
            }
            match t2d {
                C | CI | CII { .. } => {}
                other => {
                    return Err(InvolutionError::Inhomogeneous(format!(
                        "CII parent cannot host {other}"
                    )));
                }
            }
            if !matches!(t2d, C) {
                check_homogeneous_sp(t2, p, q)?;
            }
            let perm = rep::sp_pair_embedding(p, q);
            (rep::conjugate_by_perm(&t2.conj.to_complex(), &perm), false)
        }
        (a, b) => {
            return Err(InvolutionError::BadParams(format!(
                "no lift rule for {a} -> {b}"
            )));
        }
    };

    let conj_lifted = if tau2 {
        u.adjoint().matmul(&embedded).matmul(&u.conj())
    } else {
        u.adjoint().matmul(&embedded).matmul(&u)
    };
    let ty = classify(&conj_lifted, tau2, false, g_alg)?;
    let mut out = Involution::new(g_alg, conj_lifted, tau2, false, ty)?;
    out.basis_change = None;
    Ok(out)
}

fn check_homogeneous(t2: &Involution, p: usize, q: usize) -> Result<()> {
    // θ₂ on a block carrier must be block-diagonal with equal-type blocks
    let m = &t2.conj;
    let mut leak = 0.0f64;
    for i in 0..(p + q) {
        for j in 0..(p + q) {
            if (i < p) != (j < p) {
                leak = leak.max(m.at(i, j).norm());
            }
        }
    }
    if leak > 1e-9 {
        return Err(InvolutionError::Inhomogeneous("conjugator mixes the blocks".into()));
    }
    if p == 0 || q == 0 {
        return Ok(());
    }
    let (ba, bb) = (m.block(0, 0, p, p), m.block(p, p, q, q));
    let alg = match t2.algebra {
        AlgebraId::UU(..) => (AlgebraId::U(p), AlgebraId::U(q)),
        AlgebraId::SOSO(..) => (AlgebraId::SO(p), AlgebraId::SO(q)),
        other => {
            return Err(InvolutionError::BadParams(format!(
                "unexpected block algebra {other:?}"
            )));
        }
    };
    let ta = classify(&ba, t2.tau, false, alg.0)?;
    let tb = classify(&bb, t2.tau, false, alg.1)?;
    if ta.base_eq(&tb) || matches!(ta, InvolutionType::Trivial) || matches!(tb, InvolutionType::Trivial)
    {
        Ok(())
    } else {
        Err(InvolutionError::Inhomogeneous(format!("{ta} ⊕ {tb}")))
    }
}

fn check_homogeneous_sp(t2: &Involution, p: usize, q: usize) -> Result<()> {
    let m = &t2.conj;
    let (dp, dq) = (2 * p, 2 * q);
    let mut leak = 0.0f64;
    for i in 0..(dp + dq) {
        for j in 0..(dp + dq) {
            if (i < dp) != (j < dp) {
                leak = leak.max(m.at(i, j).norm());
            }
        }
    }
    if leak > 1e-9 {
        return Err(InvolutionError::Inhomogeneous("conjugator mixes the blocks".into()));
    }
    let ta = classify(&m.block(0, 0, dp, dp), t2.tau, false, AlgebraId::Sp(p))?;
    let tb = classify(&m.block(dp, dp, dq, dq), t2.tau, false, AlgebraId::Sp(q))?;
    if ta.base_eq(&tb) || matches!(ta, InvolutionType::Trivial) || matches!(tb, InvolutionType::Trivial)
    {
        Ok(())
    } else {
        Err(InvolutionError::Inhomogeneous(format!("{ta} ⊕ {tb}")))
    }
}

// ---- dimension table -------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceInfo {
    pub dim_g: usize,
    pub dim_k: usize,
    pub dim_p: usize,
    pub rank: usize,
    pub overparam: usize,
}

/// Closed-form dimension/rank/overparametrization data for each symmetric
/// space; AIII/BDI/CII read (p, q) from the type, the rest take n.
pub fn space_info(ty: InvolutionType, n: usize) -> Result<SpaceInfo> {
    use InvolutionType::*;
    let info = |dim_g: usize, dim_k: usize, rank: usize| SpaceInfo {
        dim_g,
        dim_k,
        dim_p: dim_g - dim_k,
        rank,
        overparam: 2 * dim_k + rank - dim_g,
    };
    Ok(match ty {
        A => info(2 * n * n, n * n, n),
        AI => info(n * n, n * (n - 1) / 2, n),
        AII => info(4 * n * n, 2 * n * n + n, n),
        AIII { p, q } => {
            let n = p + q;
            let r = p.min(q);
            info(n * n, p * p + q * q, r)
        }
        BD => info(n * n - n, n * (n - 1) / 2, n / 2),
        BDI { p, q } => {
            let n = p + q;
            let r = p.min(q);
            info(n * (n - 1) / 2, (p * p - p + q * q - q) / 2, r)
        }
        DIII => info(2 * n * n - n, n * n, n / 2),
        C => info(4 * n * n + 2 * n, 2 * n * n + n, n),
        CI => info(2 * n * n + n, n * n, n),
        CII { p, q } => {
            let n = p + q;
            let r = p.min(q);
            info(2 * n * n + n, 2 * (p * p + q * q) + p + q, r)
        }
        Trivial => return Err(InvolutionError::BadParams("trivial space has no table row".into())),
    })
}

// ---- JSON ------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct InvolutionJson {
    pub algebra: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub tau: u8,
    pub sigma: u8,
    #[serde(rename = "G")]
    pub g: DenseMatrix,
}

impl Involution {
    pub fn to_json(&self) -> InvolutionJson {
        InvolutionJson {
            algebra: format!("{:?}", self.algebra),
            ty: format!("{}", self.declared),
            tau: self.tau as u8,
            sigma: self.sigma as u8,
            g: self.g_matrix(),
        }
    }

    pub fn from_json(j: &InvolutionJson) -> Result<Self> {
        let algebra = parse_algebra(&j.algebra)?;
        let theta = Involution::new(
            algebra,
            j.g.clone(),
            j.tau != 0,
            j.sigma != 0,
            InvolutionType::Trivial,
        )?;
        let ty = classify_involution(&theta)?;
        Involution::new(algebra, j.g.clone(), j.tau != 0, j.sigma != 0, ty)
    }
}

pub fn parse_algebra(s: &str) -> Result<AlgebraId> {
    let s = s.trim();
    let parse_pair = |body: &str| -> Option<(usize, usize)> {
        let body = body.trim_start_matches('(').trim_end_matches(')');
        let mut it = body.split(',');
        let a = it.next()?.trim().parse().ok()?;
        let b = it.next()?.trim().parse().ok()?;
        Some((a, b))
    };
    let lower = s.to_lowercase();
    let take = |prefix: &str| -> Option<String> {
        lower.strip_prefix(prefix).map(|r| r.to_string())
    };
    if let Some(r) = take("uu") {
        let (p, q) = parse_pair(&r).ok_or(InvolutionError::BadParams(s.into()))?;
        return Ok(AlgebraId::UU(p, q));
    }
    if let Some(r) = take("soso") {
        let (p, q) = parse_pair(&r).ok_or(InvolutionError::BadParams(s.into()))?;
        return Ok(AlgebraId::SOSO(p, q));
    }
    if let Some(r) = take("spsp") {
        let (p, q) = parse_pair(&r).ok_or(InvolutionError::BadParams(s.into()))?;
        return Ok(AlgebraId::SpSp(p, q));
    }
    if let Some(r) = take("so") {
        let n = r.trim_start_matches('(').trim_end_matches(')').parse().map_err(|_| InvolutionError::BadParams(s.into()))?;
        return Ok(AlgebraId::SO(n));
    }
    if let Some(r) = take("sp") {
        let n = r.trim_start_matches('(').trim_end_matches(')').parse().map_err(|_| InvolutionError::BadParams(s.into()))?;
        return Ok(AlgebraId::Sp(n));
    }
    if let Some(r) = take("u") {
        let n = r.trim_start_matches('(').trim_end_matches(')').parse().map_err(|_| InvolutionError::BadParams(s.into()))?;
        return Ok(AlgebraId::U(n));
    }
    Err(InvolutionError::BadParams(format!("unknown algebra {s}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{haar_unitary, rng, skew_hermitian};

    fn pauli(n_qubits: usize, s: &str) -> DenseMatrix {
        // tensor product of I, X, Y, Z characters
        assert_eq!(s.len(), n_qubits);
        let mut m = DenseMatrix::identity_complex(1);
        for ch in s.chars() {
            let g = match ch {
                'I' => DenseMatrix::identity_complex(2),
                'X' => DenseMatrix::from_fn_complex(2, 2, |i, j| {
                    if i != j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
                }),
                'Y' => DenseMatrix::from_fn_complex(2, 2, |i, j| match (i, j) {
                    (0, 1) => C64::new(0.0, -1.0),
                    (1, 0) => C64::new(0.0, 1.0),
                    _ => C64::new(0.0, 0.0),
                }),
                'Z' => DenseMatrix::from_fn_complex(2, 2, |i, j| match (i, j) {
                    (0, 0) => C64::new(1.0, 0.0),
                    (1, 1) => C64::new(-1.0, 0.0),
                    _ => C64::new(0.0, 0.0),
                }),
                _ => panic!("bad pauli char"),
            };
            m = m.kron(&g);
        }
        m
    }

    #[test]
    fn canonical_forms_match_table() {
        let ai = canonical_involution(InvolutionType::AI, 3).unwrap();
        assert!(ai.tau && !ai.sigma);
        assert!(ai.g_matrix().residual(&DenseMatrix::identity_real(3)) < 1e-15);

        let aiii = canonical_involution(InvolutionType::AIII { p: 2, q: 1 }, 0).unwrap();
        assert!(!aiii.tau);
        assert!(aiii.g_matrix().residual(&DenseMatrix::ipq(2, 1)) < 1e-15);

        let a = canonical_involution(InvolutionType::A, 2).unwrap();
        assert!(a.sigma && !a.tau);
        assert!(a.g_matrix().residual(&DenseMatrix::identity_real(4)) < 1e-15);

        for (ty, n) in [
            (InvolutionType::AII, 2),
            (InvolutionType::DIII, 2),
            (InvolutionType::CI, 2),
        ] {
            let t = canonical_involution(ty, n).unwrap();
            assert!(t.involution_residual() < 1e-12, "{ty} squares to id");
        }
        let cii = canonical_involution(InvolutionType::CII { p: 1, q: 1 }, 0).unwrap();
        assert!(cii.g_matrix().residual(&DenseMatrix::kpq(1, 1)) < 1e-15);
    }

    #[test]
    fn apply_fixes_real_matrices_under_ai() {
        let mut r = rng(51);
        let g = crate::testing::gaussian_real(4, 4, &mut r);
        let x = g.sub(&g.transpose()).scale_re(0.5).to_complex();
        let ai = canonical_involution(InvolutionType::AI, 4).unwrap();
        assert!(ai.apply(&x).unwrap().residual(&x) < 1e-14);
    }

    #[test]
    fn apply_i11_flips_pauli_x() {
        let theta = canonical_involution(InvolutionType::AIII { p: 1, q: 1 }, 0).unwrap();
        let x = pauli(1, "X");
        assert!(theta.apply(&x).unwrap().residual(&x.neg()) < 1e-14);
    }

    #[test]
    fn double_application_is_identity() {
        let mut r = rng(53);
        for ty in [
            InvolutionType::AI,
            InvolutionType::AII,
            InvolutionType::DIII,
            InvolutionType::CI,
            InvolutionType::A,
        ] {
            let t = canonical_involution(ty, 2).unwrap();
            let d = t.algebra.carrier_dim();
            let x = skew_hermitian(d, &mut r);
            let back = t.apply(&t.apply(&x).unwrap()).unwrap();
            assert!(back.residual(&x.to_complex()) < 1e-12 * x.fro_norm());
        }
    }

    #[test]
    fn classify_recovers_canonical_types() {
        // (G=I_{p,q}, τ=0, u(p+q)) → AIII(p,q)
        let ty = classify(&DenseMatrix::ipq(3, 2), false, false, AlgebraId::U(5)).unwrap();
        assert_eq!(ty, InvolutionType::AIII { p: 3, q: 2 });
        // App C: θ1 = Ad_{X0X1}∘* on su(4) → AI
        let ty = classify(&pauli(2, "XX"), true, false, AlgebraId::U(4)).unwrap();
        assert_eq!(ty, InvolutionType::AI);
        // θ5 = Ad_{Y1}∘* → AII
        let ty = classify(&pauli(2, "IY"), true, false, AlgebraId::U(4)).unwrap();
        assert_eq!(ty, InvolutionType::AII);
        // BDI and DIII on so
        let ty = classify(&DenseMatrix::ipq(2, 2), false, false, AlgebraId::SO(4)).unwrap();
        assert_eq!(ty, InvolutionType::BDI { p: 2, q: 2 });
        let ty = classify(&DenseMatrix::symplectic_form(2), false, false, AlgebraId::SO(4)).unwrap();
        assert_eq!(ty, InvolutionType::DIII);
        // CI and CII on sp
        let ty = classify(&DenseMatrix::symplectic_form(2), false, false, AlgebraId::Sp(2)).unwrap();
        assert_eq!(ty, InvolutionType::CI);
        let ty = classify(&DenseMatrix::kpq(1, 1), false, false, AlgebraId::Sp(2)).unwrap();
        assert_eq!(ty, InvolutionType::CII { p: 1, q: 1 });
        // swap on doubled
        let a = canonical_involution(InvolutionType::A, 3).unwrap();
        let ty = classify(&a.g_matrix(), false, true, AlgebraId::UU(3, 3)).unwrap();
        assert_eq!(ty, InvolutionType::A);
    }

    #[test]
    fn compose_app_c_examples() {
        // θ1 = Ad_{X0X1}∘*, θ2 = Ad_{X0}∘* → θ4 = Ad_{X1}, type AIII
        let t1 = Involution::new(AlgebraId::U(4), pauli(2, "XX"), true, false, InvolutionType::AI)
            .unwrap();
        let t2 = Involution::new(AlgebraId::U(4), pauli(2, "XI"), true, false, InvolutionType::AI)
            .unwrap();
        let t4 = compose(&t1, &t2).unwrap();
        assert!(t4.declared.base_eq(&InvolutionType::AIII { p: 2, q: 2 }));
        assert!(!t4.tau);
        // conjugator ∝ X1
        let overlap = inner(&t4.full_conjugator().to_complex(), &pauli(2, "IX"));
        assert!(overlap.norm() > 0.99 * 4.0);

        // θ3 = Ad_{Z1}∘* composed with θ4 = Ad_{X1} → Ad_{Y1}∘*, type AII
        let t3 = Involution::new(AlgebraId::U(4), pauli(2, "IZ"), true, false, InvolutionType::AI)
            .unwrap();
        let t5 = compose(&t3, &t4).unwrap();
        assert_eq!(t5.declared, InvolutionType::AII);
        let overlap = inner(&t5.full_conjugator().to_complex(), &pauli(2, "IY"));
        assert!(overlap.norm() > 0.99 * 4.0, "conjugator should align with Y1");
    }

    #[test]
    fn compose_su3_counterexample_rejected() {
        let t1 = Involution::new(
            AlgebraId::U(3),
            DenseMatrix::identity_real(3),
            true,
            false,
            InvolutionType::AI,
        )
        .unwrap();
        let w = DenseMatrix::from_fn_complex(3, 3, |i, j| match (i, j) {
            (0, 1) => C64::from_polar(1.0, PI / 4.0),
            (1, 0) => C64::from_polar(1.0, -PI / 4.0),
            (2, 2) => C64::new(1.0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let t2 = Involution::new(AlgebraId::U(3), w, false, false, InvolutionType::Trivial).unwrap();
        assert!(matches!(compose(&t1, &t2), Err(InvolutionError::NonCommuting(_))));
    }

    #[test]
    fn eigensplit_pauli_basis_ai() {
        // θ = AI canonical on u(2): k = {iY}, p = {iI, iX, iZ}
        let theta = canonical_involution(InvolutionType::AI, 2).unwrap();
        let basis: Vec<DenseMatrix> = ["I", "X", "Y", "Z"]
            .iter()
            .map(|s| pauli(1, s).scale(C64::new(0.0, 0.5)))
            .collect();
        let (k, p) = eigensplit(&theta, &basis).unwrap();
        assert_eq!((k.len(), p.len()), (1, 3));
        // k spans iY
        let iy = pauli(1, "Y").scale(C64::new(0.0, 1.0));
        let ip = inner(&k[0], &iy).norm();
        assert!(ip > 0.99 * iy.fro_norm());
    }

    #[test]
    fn eigensplit_aiii_on_u2() {
        let theta = canonical_involution(InvolutionType::AIII { p: 1, q: 1 }, 0).unwrap();
        let basis: Vec<DenseMatrix> = ["I", "X", "Y", "Z"]
            .iter()
            .map(|s| pauli(1, s).scale(C64::new(0.0, 0.5)))
            .collect();
        let (k, p) = eigensplit(&theta, &basis).unwrap();
        assert_eq!((k.len(), p.len()), (2, 2));
    }

    #[test]
    fn eigensplit_dims_match_table_u4() {
        // AI, AII, AIII on u(4): dim k from the table
        let basis = AlgebraId::U(4).standard_basis();
        for (theta, expect_k) in [
            (canonical_involution(InvolutionType::AI, 4).unwrap(), 6),
            (canonical_involution(InvolutionType::AII, 2).unwrap(), 10),
            (canonical_involution(InvolutionType::AIII { p: 2, q: 2 }, 0).unwrap(), 8),
        ] {
            let (k, p) = eigensplit(&theta, &basis).unwrap();
            assert_eq!(k.len(), expect_k);
            assert_eq!(k.len() + p.len(), 16);
        }
    }

    #[test]
    fn grading_from_two_commuting_aiii() {
        let t1 = canonical_involution(InvolutionType::AIII { p: 2, q: 2 }, 0).unwrap();
        // second: conjugation by diag(1,-1,1,-1) (Z on the low qubit)
        let g2 = DenseMatrix::from_fn_real(4, 4, |i, j| {
            if i != j {
                0.0
            } else if i % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        let t2 = Involution::new(
            AlgebraId::U(4),
            g2,
            false,
            false,
            InvolutionType::AIII { p: 2, q: 2 },
        )
        .unwrap();
        let basis = AlgebraId::U(4).standard_basis();
        let g = grading_from_involutions(&[t1, t2], &basis).unwrap();
        assert_eq!(g.total_dim(), 16);
        assert_eq!(g.subspaces.len(), 4);
        // commutator grading property on samples: [g_s, g_t] ⊆ g_{s+t}
        for (s, bs) in &g.subspaces {
            for (t, bt) in &g.subspaces {
                let target = *s ^ *t;
                for a in bs.iter().take(2) {
                    for b in bt.iter().take(2) {
                        let comm = a.matmul(b).sub(&b.matmul(a));
                        if comm.fro_norm() < 1e-12 {
                            continue;
                        }
                        // project onto g_target and compare
                        let basis_t = g.subspace(target).unwrap();
                        let mut resid = comm.clone();
                        for u in basis_t {
                            let ip = inner(u, &comm);
                            resid = resid.sub(&u.scale(ip));
                        }
                        assert!(
                            resid.fro_norm() < 1e-9 * comm.fro_norm().max(1.0),
                            "commutator escaped its graded subspace"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn grading_su3_counterexample_covers_two_dims() {
        let t1 = Involution::new(
            AlgebraId::U(3),
            DenseMatrix::identity_real(3),
            true,
            false,
            InvolutionType::AI,
        )
        .unwrap();
        let w = DenseMatrix::from_fn_complex(3, 3, |i, j| match (i, j) {
            (0, 1) => C64::from_polar(1.0, PI / 4.0),
            (1, 0) => C64::from_polar(1.0, -PI / 4.0),
            (2, 2) => C64::new(1.0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let t2 = Involution::new(AlgebraId::U(3), w, false, false, InvolutionType::Trivial).unwrap();
        // su(3) basis: off-diagonal u(3) elements plus traceless diagonals
        let mut basis: Vec<DenseMatrix> = AlgebraId::U(3)
            .standard_basis()
            .into_iter()
            .skip(3)
            .collect();
        let mut d1 = DenseMatrix::zeros_complex(3, 3);
        d1.set(0, 0, C64::new(0.0, 1.0 / f64::sqrt(2.0)));
        d1.set(1, 1, C64::new(0.0, -1.0 / f64::sqrt(2.0)));
        let mut d2 = DenseMatrix::zeros_complex(3, 3);
        d2.set(0, 0, C64::new(0.0, 1.0 / f64::sqrt(6.0)));
        d2.set(1, 1, C64::new(0.0, 1.0 / f64::sqrt(6.0)));
        d2.set(2, 2, C64::new(0.0, -2.0 / f64::sqrt(6.0)));
        basis.push(d1);
        basis.push(d2);
        assert_eq!(basis.len(), 8);
        match grading_from_involutions(&[t1, t2], &basis) {
            Err(InvolutionError::Incompatible { covered, total }) => {
                assert_eq!(total, 8);
                assert_eq!(covered, 2, "intersections span a two dimensional subspace");
            }
            other => panic!("expected Incompatible, got {other:?}"),
        }
    }

    #[test]
    fn cd_from_grading_parity_readout() {
        let t1 = canonical_involution(InvolutionType::AIII { p: 2, q: 2 }, 0).unwrap();
        let g2 = DenseMatrix::from_fn_real(4, 4, |i, j| {
            if i != j {
                0.0
            } else if i % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        let t2 = Involution::new(
            AlgebraId::U(4),
            g2,
            false,
            false,
            InvolutionType::AIII { p: 2, q: 2 },
        )
        .unwrap();
        let basis = AlgebraId::U(4).standard_basis();
        let g = grading_from_involutions(&[t1.clone(), t2], &basis).unwrap();

        // Q = {0}: subalgebra with empty p, improper
        let (sub, _, p, improper) = cd_from_grading(&g, &[0], &|_| false).unwrap();
        assert!(improper && p.is_empty() && !sub.is_empty());

        // Q = {00, 11} with the bit-readout phi: proper CD, closure on samples
        let (sub, k, p, improper) =
            cd_from_grading(&g, &[0b00, 0b11], &|s| s & 1 == 1).unwrap();
        assert!(!improper);
        assert_eq!(sub.len(), k.len() + p.len());
        // [p,p] ⊆ k sample check
        if p.len() >= 2 {
            let comm = p[0].matmul(&p[1]).sub(&p[1].matmul(&p[0]));
            if comm.fro_norm() > 1e-12 {
                let mut resid = comm.clone();
                for u in &k {
                    let ip = inner(u, &comm);
                    resid = resid.sub(&u.scale(ip));
                }
                assert!(resid.fro_norm() < 1e-9 * comm.fro_norm());
            }
        }

        // Q = Z2^2 with bit readout reproduces the first split's dimensions
        let (_, k0, p0, _) =
            cd_from_grading(&g, &[0, 1, 2, 3], &|s| s & 1 == 1).unwrap();
        let basis4 = AlgebraId::U(4).standard_basis();
        let (k_ref, p_ref) = eigensplit(&t1, &basis4).unwrap();
        assert_eq!((k0.len(), p0.len()), (k_ref.len(), p_ref.len()));

        // bad subgroup and bad homomorphism
        assert!(matches!(
            cd_from_grading(&g, &[1, 2], &|_| false),
            Err(InvolutionError::NotSubgroup)
        ));
        assert!(matches!(
            cd_from_grading(&g, &[0, 1, 2, 3], &|s| s == 0),
            Err(InvolutionError::NotHomomorphism)
        ));
    }

    #[test]
    fn lift_ai_to_diii_gives_aiii() {
        // (AI→DIII) lifts to {AI, AIII} with H = iU†LU, det H = (-1)^n
        let mut r = rng(61);
        let n = 2; // so(2n) with n=2 ⇒ g = u(4)... here g = u(2n) = u(4)
        let t1 = canonical_involution(InvolutionType::AI, 2 * n).unwrap();
        let t2 = canonical_involution(InvolutionType::DIII, n).unwrap();
        let u = haar_unitary(2 * n, &mut r);
        let lifted = lift_step(&t1, &t2, &u).unwrap();
        assert!(lifted.declared.base_eq(&InvolutionType::AIII { p: n, q: n }));
        // commutes with θ1 in the rotated frame: θ1 = Ad_{U†}∘*∘Ad_U
        let t1_rot = Involution::new(
            AlgebraId::U(2 * n),
            u.adjoint().matmul(&u.conj()),
            true,
            false,
            InvolutionType::AI,
        )
        .unwrap();
        assert!(compose(&t1_rot, &lifted).is_ok());
    }

    #[test]
    fn lift_aii_to_ci_gives_ai() {
        let mut r = rng(67);
        let n = 2;
        let t1 = canonical_involution(InvolutionType::AII, n).unwrap();
        let t2 = canonical_involution(InvolutionType::CI, n).unwrap();
        let u = haar_unitary(2 * n, &mut r);
        let lifted = lift_step(&t1, &t2, &u).unwrap();
        assert_eq!(lifted.declared, InvolutionType::AI);
    }

    #[test]
    fn lift_aiii_to_a_gives_aiii() {
        let mut r = rng(71);
        let n = 2;
        let t1 = canonical_involution(InvolutionType::AIII { p: n, q: n }, 0).unwrap();
        let t2 = canonical_involution(InvolutionType::A, n).unwrap();
        let u = haar_unitary(2 * n, &mut r);
        let lifted = lift_step(&t1, &t2, &u).unwrap();
        assert!(lifted.declared.base_eq(&InvolutionType::AIII { p: n, q: n }));
    }

    #[test]
    fn lift_rejects_inhomogeneous_blocks() {
        // AIII → (AI ⊕ AII) cannot be lifted
        let t1 = canonical_involution(InvolutionType::AIII { p: 2, q: 2 }, 0).unwrap();
        let v = DenseMatrix::identity_real(2); // AI block (symmetric)
        let w = DenseMatrix::symplectic_form(1); // AII block (antisymmetric)
        let g2 = v.dsum(&w);
        let t2 = Involution::new(AlgebraId::UU(2, 2), g2, true, false, InvolutionType::Trivial)
            .unwrap();
        let u = DenseMatrix::identity_complex(4);
        assert!(matches!(
            lift_step(&t1, &t2, &u),
            Err(InvolutionError::Inhomogeneous(_))
        ));
    }

    #[test]
    fn space_info_table_rows() {
        let ai = space_info(InvolutionType::AI, 4).unwrap();
        assert_eq!((ai.dim_g, ai.dim_k, ai.dim_p, ai.rank, ai.overparam), (16, 6, 10, 4, 0));
        let aii = space_info(InvolutionType::AII, 3).unwrap();
        assert_eq!(aii.overparam, 9);
        let aiii = space_info(InvolutionType::AIII { p: 2, q: 2 }, 0).unwrap();
        assert_eq!((aiii.dim_p, aiii.rank, aiii.overparam), (8, 2, 2));
        let cii = space_info(InvolutionType::CII { p: 2, q: 1 }, 0).unwrap();
        assert_eq!(cii.dim_p, 8);
        assert_eq!(cii.overparam, 2 * 1 + 3 + 1);
    }

    #[test]
    fn involution_json_round_trip() {
        let t = canonical_involution(InvolutionType::AIII { p: 2, q: 1 }, 0).unwrap();
        let j = t.to_json();
        let s = serde_json::to_string(&j).unwrap();
        let back: InvolutionJson = serde_json::from_str(&s).unwrap();
        let t2 = Involution::from_json(&back).unwrap();
        assert_eq!(t2.declared, InvolutionType::AIII { p: 2, q: 1 });
    }
}
