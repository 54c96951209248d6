//! The ten numerical KAK decompositions, all routed through the relative
//! complex structure Δ = G·Θ(G)⁻¹ and the horizontal-to-KAK closure
//! K₂ = A†K₁†G, plus the horizontal decomposition of canonical BDI algebra
//! elements used by the Hamiltonian compiler.

use crate::densela::{
    C64, CsgElement, CsgKind, DEGENERACY_TOL, DenseMatrix, DlaError, csd, evd_unitary, real_schur,
    scaled_tol,
};
use crate::densela::{canonical_column_phase, evd_cluster_ranges, realify_basis};
use crate::involution::InvolutionType;
use crate::rep;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum KakError {
    #[error("element is not in the group of type {ty} (residual {residual:.3e})")]
    NotInGroup { ty: String, residual: f64 },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("element is not horizontal (residual {0:.3e})")]
    NotHorizontal(f64),
    #[error("degenerate eigenbasis: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Dla(#[from] DlaError),
}

type Result<T> = std::result::Result<T, KakError>;

/// The factor triple K₁ · A · K₂ (times a scalar phase for AI/AII) with the
/// relative complex structure retained for diagnostics.
#[derive(Clone, Debug)]
pub struct KakFactors {
    pub k1: DenseMatrix,
    pub a: CsgElement,
    pub k2: DenseMatrix,
    pub ty: InvolutionType,
    pub delta: Option<DenseMatrix>,
    pub global_phase: C64,
}

impl KakFactors {
    /// K₁ · materialize(A) · K₂ · phase.
    pub fn reconstruct(&self) -> DenseMatrix {
        let m = self.k1.matmul(&self.a.materialize()).matmul(&self.k2);
        if (self.global_phase - C64::new(1.0, 0.0)).norm() < 1e-300 {
            m
        } else {
            m.scale(self.global_phase)
        }
    }
}

/// Group-level involution Θ for the canonical form of each type.
pub fn theta_group(ty: InvolutionType, m: &DenseMatrix) -> DenseMatrix {
    use InvolutionType::*;
    let n = m.rows();
    match ty {
        A | BD | C => {
            let sw = DenseMatrix::block_swap(n / 2);
            sw.matmul(m).matmul(&sw)
        }
        AI => m.conj(),
        AII => {
            let j = DenseMatrix::symplectic_form(n / 2);
            j.matmul(&m.conj()).matmul(&j.transpose())
        }
        AIII { p, q } | BDI { p, q } => {
            let i = DenseMatrix::ipq(p, q);
            i.matmul(m).matmul(&i)
        }
        DIII | CI => {
            let j = DenseMatrix::symplectic_form(n / 2);
            j.matmul(m).matmul(&j.transpose())
        }
        CII { p, q } => {
            let k = DenseMatrix::kpq(p, q);
            k.matmul(m).matmul(&k)
        }
        Trivial => m.clone(),
    }
}

/// Residual of membership in the type's group.
pub fn group_residual(ty: InvolutionType, g: &DenseMatrix) -> f64 {
    use InvolutionType::*;
    let n = g.rows();
    let unit = || {
        g.adjoint()
            .matmul(g)
            .to_complex()
            .residual(&DenseMatrix::identity_complex(n))
    };
    let real_part = || g.max_imag();
    let block_diag_leak = |h: usize| {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if (i < h) != (j < h) {
                    worst = worst.max(g.at(i, j).norm());
                }
            }
        }
        worst
    };
    let sympl = |m: &DenseMatrix| {
        let j = DenseMatrix::symplectic_form(m.rows() / 2).to_complex();
        m.transpose().matmul(&j).matmul(m).residual(&j)
    };
    match ty {
        A => unit().max(block_diag_leak(n / 2)),
        AI => unit(),
        AII => unit(),
        AIII { .. } => unit(),
        BD => unit()
            .max(real_part())
            .max(block_diag_leak(n / 2))
            .max((g.block(0, 0, n / 2, n / 2).det().re - 1.0).abs())
            .max((g.block(n / 2, n / 2, n / 2, n / 2).det().re - 1.0).abs()),
        BDI { .. } => unit().max(real_part()).max((g.det().re - 1.0).abs()),
        DIII => unit().max(real_part()).max((g.det().re - 1.0).abs()),
        C => {
            let h = n / 2;
            unit()
                .max(block_diag_leak(h))
                .max(sympl(&g.block(0, 0, h, h)))
                .max(sympl(&g.block(h, h, h, h)))
        }
        CI | CII { .. } => unit().max(sympl(g)),
        Trivial => unit(),
    }
}

/// The ten generic KAK decompositions of the canonical involutions.
/// AIII/BDI/CII read their (p, q) split from the type.
pub fn kak_decompose(g: &DenseMatrix, ty: InvolutionType, tol: f64) -> Result<KakFactors> {
    use InvolutionType::*;
    let res = group_residual(ty, g);
    let n = g.rows();
    if res > scaled_tol(tol.max(1e-8), n, 1.0) {
        return Err(KakError::NotInGroup { ty: format!("{ty}"), residual: res });
    }
    match ty {
        A => kak_a(g, tol),
        AI => kak_ai(g, tol),
        AII => kak_aii(g, tol),
        AIII { p, q } => kak_aiii(g, p, q, tol),
        BD => kak_bd(g, tol),
        BDI { p, q } => kak_bdi(g, p, q, tol),
        DIII => kak_diii(g, tol),
        C => kak_c(g, tol),
        CI => kak_ci(g, tol),
        CII { p, q } => kak_cii(g, p, q, tol),
        Trivial => Err(KakError::BadParams("trivial type has no decomposition".into())),
    }
}

// ---- type A ---------------------------------------------------------------

fn kak_a(g: &DenseMatrix, tol: f64) -> Result<KakFactors> {
    let n = g.rows() / 2;
    let u = g.block(0, 0, n, n);
    let up = g.block(n, n, n, n);
    let delta = u.matmul(&up.adjoint());
    let (v, phases) = evd_unitary(&delta, tol)?;
    let half: Vec<f64> = phases.iter().map(|p| p / 2.0).collect();
    let d = DenseMatrix::from_fn_complex(n, n, |i, j| {
        if i == j { C64::from_polar(1.0, half[i]) } else { C64::new(0.0, 0.0) }
    });
    let u2 = d.matmul(&v.adjoint()).matmul(&up);
    let mut angles = half.clone();
    angles.extend(half.iter().map(|a| -a));
    Ok(KakFactors {
        k1: v.dsum(&v),
        a: CsgElement::new(CsgKind::UDiag, 2 * n, angles),
        k2: u2.dsum(&u2),
        ty: InvolutionType::A,
        delta: Some(delta.dsum(&delta.adjoint())),
        global_phase: C64::new(1.0, 0.0),
    })
}

// ---- AI ---------------------------------------------------------------------

/// Canonical representative of the root orbit {Ũ·ω : ω^n = 1}: maximizes
/// Re tr, then Im tr, then the branch index. Exactly invariant under global
/// phases of the input.
/// Principal n-th root of the determinant.
fn principal_root(u: &DenseMatrix) -> C64 {
    let n = u.rows();
    let det = u.det();
    C64::from_polar(det.norm().powf(1.0 / n as f64), det.arg() / n as f64)
}

fn wrap_pm_pi(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    if x <= -PI {
        x = PI;
    }
    x
}

/// Pick the root branch omega = e^{2pi i k/n} whose shifted Delta-spectrum
/// has the least total phase mass, tie-broken by the trace of the rescaled
/// input. The branch set is invariant under global phases of the input, so
/// the selected representative - and with it every K factor - is exactly
/// phase-invariant.
fn select_root_branch(n: usize, trace_over_z0: C64, phases0: &[f64]) -> usize {
    let mut best_k = 0usize;
    let mut best = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let shift = 2.0 * (2.0 * PI * k as f64 / n as f64);
        let cost: f64 = phases0.iter().map(|&p| wrap_pm_pi(p - shift).abs()).sum();
        let t = trace_over_z0 * C64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64);
        let better = cost < best.0 - 1e-9
            || ((cost - best.0).abs() <= 1e-9
                && (t.re > best.1 + 1e-9
                    || ((t.re - best.1).abs() <= 1e-9 && t.im > best.2 + 1e-9)));
        if better {
            best = (cost, t.re, t.im);
            best_k = k;
        }
    }
    best_k
}

/// Apply the branch shift to the Delta-spectrum and re-sort the eigenvector
/// columns so phases are ascending again.
fn shift_spectrum(v: &DenseMatrix, phases0: &[f64], shift: f64) -> (DenseMatrix, Vec<f64>) {
    let shifted: Vec<f64> = phases0.iter().map(|&p| wrap_pm_pi(p - shift)).collect();
    let mut order: Vec<usize> = (0..phases0.len()).collect();
    order.sort_by(|&a, &b| shifted[a].partial_cmp(&shifted[b]).unwrap());
    let phases: Vec<f64> = order.iter().map(|&i| shifted[i]).collect();
    let vs = DenseMatrix::from_fn_complex(v.rows(), v.cols(), |i, j| v.at(i, order[j]));
    (vs, phases)
}

/// Realify the eigenvector matrix of a conjugation-closed spectrum, cluster
/// by cluster.
fn realify_by_clusters(v: &DenseMatrix, phases: &[f64]) -> Result<DenseMatrix> {
    let n = v.rows();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (lo, hi) in evd_cluster_ranges(phases, DEGENERACY_TOL) {
        let basis: Vec<Vec<C64>> = (lo..hi).map(|j| (0..n).map(|i| v.at(i, j)).collect()).collect();
        let reals = realify_basis(&basis).map_err(|e| KakError::Degenerate(e.to_string()))?;
        cols.extend(reals);
    }
    Ok(DenseMatrix::from_fn_real(n, n, |i, j| cols[j][i]))
}

fn kak_ai(g: &DenseMatrix, tol: f64) -> Result<KakFactors> {
    let n = g.rows();
    let z0 = principal_root(g);
    let ut0 = g.scale(C64::new(1.0, 0.0) / z0);
    let delta0 = ut0.matmul(&ut0.transpose());
    let (v0, phases0) = evd_unitary(&delta0, tol)?;
    let k = select_root_branch(n, g.trace() / z0, &phases0);
    let omega = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
    let z = z0 * omega;
    let ut = ut0.scale(C64::new(1.0, 0.0) / omega);
    let (v, phases) = shift_spectrum(&v0, &phases0, 2.0 * (2.0 * PI * k as f64 / n as f64));
    let delta = ut.matmul(&ut.transpose());
    let mut o1 = realify_by_clusters(&v, &phases)?;
    if o1.det().re < 0.0 {
        for i in 0..n {
            let x = -o1.re(i, 0);
            o1.set_re(i, 0, x);
        }
    }
    let mut half: Vec<f64> = phases.iter().map(|p| p / 2.0).collect();
    // det of the root must be +1
    let total: f64 = half.iter().sum();
    if ((total / PI).round() as i64).rem_euclid(2) == 1 {
        half[0] += PI;
    }
    let dmat = DenseMatrix::from_fn_complex(n, n, |i, j| {
        if i == j { C64::from_polar(1.0, half[i]) } else { C64::new(0.0, 0.0) }
    });
    let o2c = dmat.adjoint().matmul(&o1.transpose().to_complex()).matmul(&ut);
    let o2 = o2c
        .try_real(scaled_tol(tol.max(1e-9), n, 1.0))
        .ok_or_else(|| KakError::Degenerate(format!(
            "AI second factor not real (imag {:.3e})",
            o2c.max_imag()
        )))?;
    Ok(KakFactors {
        k1: o1,
        a: CsgElement::new(CsgKind::UDiag, n, half),
        k2: o2,
        ty: InvolutionType::AI,
        delta: Some(delta),
        global_phase: z,
    })
}

// ---- AII ---------------------------------------------------------------------

/// Pair a J-closed spectrum into symplectic columns. `partner_same_eigenvalue`
/// distinguishes J-symmetric Δ (partner Jv* shares λ) from J-antisymmetric Δ
/// (partner in the conjugate cluster). Returns (first_half, second_half,
/// per-pair phases).
fn symplectic_pairs(
    v: &DenseMatrix,
    phases: &[f64],
    symmetric: bool,
) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>, Vec<f64>)> {
    let n2 = v.rows();
    let n = n2 / 2;
    let japply = |x: &[C64]| -> Vec<C64> {
        // (J v)_i = v_{n+i} for i < n, = -v_{i-n} otherwise
        let mut out = vec![C64::new(0.0, 0.0); n2];
        for i in 0..n {
            out[i] = x[n + i];
            out[n + i] = -x[i];
        }
        out
    };
    let col = |j: usize| -> Vec<C64> { (0..n2).map(|i| v.at(i, j)).collect() };

    let mut first: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut second: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut out_phases: Vec<f64> = Vec::with_capacity(n);

    let ranges = evd_cluster_ranges(phases, DEGENERACY_TOL);
    for (lo, hi) in &ranges {
        let theta = phases[*lo];
        if symmetric {
            // partner lives in the same cluster; pivots are canonical
            // projections of reference axes so the gauge depends only on
            // the eigenspace, never on the solver's basis choice
            let mut remaining: Vec<Vec<C64>> = (*lo..*hi).map(col).collect();
            renormalize(&mut remaining);
            while !remaining.is_empty() {
                let v0 = subspace_pivot(&remaining);
                let mut u0 = japply(&conj_vec(&v0));
                normalize(&mut u0);
                project_out(&mut remaining, &v0);
                project_out(&mut remaining, &u0);
                renormalize(&mut remaining);
                first.push(u0);
                second.push(v0);
                out_phases.push(theta);
            }
        } else if theta > DEGENERACY_TOL && theta < PI - DEGENERACY_TOL {
            // partner lives in the conjugate cluster, which is skipped
            for j in *lo..*hi {
                let mut v0 = col(j);
                canonical_column_phase(&mut v0);
                let mut u0 = japply(&conj_vec(&v0));
                normalize(&mut u0);
                for x in u0.iter_mut() {
                    *x = -*x;
                }
                first.push(v0);
                second.push(u0);
                out_phases.push(theta);
            }
        } else if theta.abs() <= DEGENERACY_TOL
            || (theta - PI).abs() <= DEGENERACY_TOL
            || (theta + PI).abs() <= DEGENERACY_TOL
        {
            // self-conjugate cluster
            let mut remaining: Vec<Vec<C64>> = (*lo..*hi).map(col).collect();
            while !remaining.is_empty() {
                let v0 = take_pivot(&mut remaining);
                let mut u0 = japply(&conj_vec(&v0));
                normalize(&mut u0);
                for x in u0.iter_mut() {
                    *x = -*x;
                }
                project_out(&mut remaining, &v0);
                project_out(&mut remaining, &u0);
                renormalize(&mut remaining);
                first.push(v0);
                second.push(u0);
                out_phases.push(theta);
            }
        }
        // negative-phase clusters are the conjugates: skipped in the
        // antisymmetric branch
    }
    if first.len() != n {
        return Err(KakError::Degenerate(format!(
            "symplectic pairing found {} of {} pairs",
            first.len(),
            n
        )));
    }
    Ok((first, second, out_phases))
}

/// A pivot that depends only on the span of `basis`: the projection of the
/// first reference axis with enough overlap, phase-canonicalized.
fn subspace_pivot(basis: &[Vec<C64>]) -> Vec<C64> {
    let n = basis[0].len();
    let thresh = 0.5 / (n as f64).sqrt();
    for r in 0..n {
        // projection of e_r onto the span
        let mut w = vec![C64::new(0.0, 0.0); n];
        for b in basis {
            let coef = b[r].conj();
            for (x, bi) in w.iter_mut().zip(b) {
                *x += coef * *bi;
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > thresh {
            for x in w.iter_mut() {
                *x /= norm;
            }
            canonical_column_phase(&mut w);
            return w;
        }
    }
    // every axis projection small: fall back to the largest basis vector
    let mut v = basis[0].clone();
    normalize(&mut v);
    canonical_column_phase(&mut v);
    v
}

fn conj_vec(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

fn normalize(v: &mut [C64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

fn take_pivot(set: &mut Vec<Vec<C64>>) -> Vec<C64> {
    let (idx, _) = set
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.iter().map(|z| z.norm_sqr()).sum::<f64>()))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let mut v = set.swap_remove(idx);
    normalize(&mut v);
    canonical_column_phase(&mut v);
    v
}

fn project_out(set: &mut [Vec<C64>], dir: &[C64]) {
    for u in set.iter_mut() {
        let ip: C64 = dir.iter().zip(u.iter()).map(|(d, x)| d.conj() * *x).sum();
        for (x, d) in u.iter_mut().zip(dir) {
            *x -= ip * *d;
        }
    }
}

fn renormalize(set: &mut Vec<Vec<C64>>) {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(set.len());
    for mut u in set.drain(..) {
        for c in &out {
            let ip: C64 = c.iter().zip(u.iter()).map(|(d, x)| d.conj() * *x).sum();
            for (x, d) in u.iter_mut().zip(c) {
                *x -= ip * *d;
            }
        }
        let nn = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nn > 1e-8 {
            for x in u.iter_mut() {
                *x /= nn;
            }
            out.push(u);
        }
    }
    *set = out;
}

fn cols_to_matrix(first: &[Vec<C64>], second: &[Vec<C64>]) -> DenseMatrix {
    let n2 = first[0].len();
    let n = first.len();
    DenseMatrix::from_fn_complex(n2, 2 * n, |i, j| {
        if j < n { first[j][i] } else { second[j - n][i] }
    })
}

fn kak_aii(g: &DenseMatrix, tol: f64) -> Result<KakFactors> {
    let n2 = g.rows();
    let n = n2 / 2;
    let z0 = principal_root(g);
    let ut0 = g.scale(C64::new(1.0, 0.0) / z0);
    let j = DenseMatrix::symplectic_form(n).to_complex();
    let delta0 = ut0.matmul(&j).matmul(&ut0.transpose()).matmul(&j.transpose());
    let (v0, phases0) = evd_unitary(&delta0, tol)?;
    let k = select_root_branch(n2, g.trace() / z0, &phases0);
    let omega = C64::from_polar(1.0, 2.0 * PI * k as f64 / n2 as f64);
    let z = z0 * omega;
    let ut = ut0.scale(C64::new(1.0, 0.0) / omega);
    let (v, phases) = shift_spectrum(&v0, &phases0, 2.0 * (2.0 * PI * k as f64 / n2 as f64));
    let delta = delta0.scale(C64::new(1.0, 0.0) / (omega * omega));
    let (first, second, pair_phases) = symplectic_pairs(&v, &phases, true)?;
    let s1 = cols_to_matrix(&first, &second);
    let mut half: Vec<f64> = pair_phases.iter().map(|p| p / 2.0).collect();
    let total: f64 = half.iter().sum();
    if ((total / PI).round() as i64).rem_euclid(2) == 1 {
        half[0] += PI;
    }
    let dd = DenseMatrix::from_fn_complex(n2, n2, |i, jx| {
        if i == jx { C64::from_polar(1.0, half[i % n]) } else { C64::new(0.0, 0.0) }
    });
    let s2 = dd.adjoint().matmul(&s1.adjoint()).matmul(&ut);
    let mut angles = half.clone();
    angles.extend(half.iter().copied());
    Ok(KakFactors {
        k1: s1,
        a: CsgElement::new(CsgKind::UDiag, n2, angles),
        k2: s2,
        ty: InvolutionType::AII,
        delta: Some(delta),
        global_phase: z,
    })
}

// ---- AIII / BDI ----------------------------------------------------------

fn kak_aiii(g: &DenseMatrix, p: usize, q: usize, tol: f64) -> Result<KakFactors> {
    let (k1, f, k2) = csd(g, p, q, tol)?;
    let ipq = DenseMatrix::ipq(p, q).to_complex();
    let delta = g
        .to_complex()
        .matmul(&ipq)
        .matmul(&g.adjoint().to_complex())
        .matmul(&ipq);
    Ok(KakFactors {
        k1,
        a: f,
        k2,
        ty: InvolutionType::AIII { p, q },
        delta: Some(delta),
        global_phase: C64::new(1.0, 0.0),
    })
}

fn kak_bdi(g: &DenseMatrix, p: usize, q: usize, tol: f64) -> Result<KakFactors> {
    let gr = g
        .try_real(scaled_tol(tol.max(1e-9), g.rows(), 1.0))
        .ok_or_else(|| KakError::NotInGroup { ty: "BDI".into(), residual: g.max_imag() })?;
    let (mut k1, mut f, mut k2) = csd(&gr, p, q, tol)?;
    let n = p + q;
    let r = p.min(q);

    // determinant repair: make all four sub-blocks special orthogonal by
    // flipping a row/column pair and folding the signs into the first angle
    let d1p = k1.block(0, 0, p, p).det().re.signum();
    let d1q = k1.block(p, p, q, q).det().re.signum();
    let d2p = k2.block(0, 0, p, p).det().re.signum();
    let d2q = k2.block(p, p, q, q).det().re.signum();

    if r == 0 {
        // trivial split: nothing to repair beyond overall det
        return Ok(KakFactors {
            k1,
            a: f,
            k2,
            ty: InvolutionType::BDI { p, q },
            delta: None,
            global_phase: C64::new(1.0, 0.0),
        });
    }

    // positions of the first cosine pair: ℓ0 = 0, ℓ1 = max(p, q)
    let l0 = 0usize;
    let l1 = p.max(q);
    // scale column ℓ of K1 by s, row ℓ of K2 by s
    let mut scale_col = |m: &mut DenseMatrix, l: usize, s: f64| {
        if s < 0.0 {
            for i in 0..n {
                let v = -m.re(i, l);
                m.set_re(i, l, v);
            }
        }
    };
    scale_col(&mut k1, l0, d1p);
    scale_col(&mut k1, l1, d1q);
    let mut scale_row = |m: &mut DenseMatrix, l: usize, s: f64| {
        if s < 0.0 {
            for jx in 0..n {
                let v = -m.re(l, jx);
                m.set_re(l, jx, v);
            }
        }
    };
    scale_row(&mut k2, l0, d2p);
    scale_row(&mut k2, l1, d2q);
    // θ̃₁ = ½(1 - d1p·d2p)π + d1p·d1q·θ₁
    let th = f.angles[0];
    f.angles[0] = 0.5 * (1.0 - d1p * d2p) * PI + d1p * d1q * th;

    Ok(KakFactors {
        k1,
        a: f,
        k2,
        ty: InvolutionType::BDI { p, q },
        delta: None,
        global_phase: C64::new(1.0, 0.0),
    })
}

// ---- BD ---------------------------------------------------------------------

fn kak_bd(g: &DenseMatrix, tol: f64) -> Result<KakFactors> {
    let n = g.rows() / 2;
    let o = g
        .block(0, 0, n, n)
        .try_real(1e-9)
        .ok_or_else(|| KakError::NotInGroup { ty: "BD".into(), residual: g.max_imag() })?;
    let op = g
        .block(n, n, n, n)
        .try_real(1e-9)
        .ok_or_else(|| KakError::NotInGroup { ty: "BD".into(), residual: g.max_imag() })?;
    let delta = o.matmul(&op.transpose());
    let (qmat, mu2) = real_schur(&delta, tol)?;
    let mu = mu2.sqrt();
    let mu_mat = mu.materialize();
    let o2 = mu_mat.matmul(&qmat.transpose()).matmul(&op);
    let mut angles = mu.angles.clone();
    // SchurPair of dimension 2n expects floor(n/2) angles
    angles.truncate(n / 2);
    Ok(KakFactors {
        k1: qmat.dsum(&qmat),
        a: CsgElement::new(CsgKind::SchurPair, 2 * n, angles),
        k2: o2.dsum(&o2),
        ty: InvolutionType::BD,
        delta: Some(delta.dsum(&delta.transpose())),
        global_phase: C64::new(1.0, 0.0),
    })
}

// ---- DIII -------------------------------------------------------------------

fn kak_diii(g: &DenseMatrix, tol: f64) -> Result<KakFactors> {
    let n2 = g.rows();
    let n = n2 / 2;
    let gr = g
        .try_real(1e-9)
        .ok_or_else(|| KakError::NotInGroup { ty: "DIII".into(), residual: g.max_imag() })?;
    let j = DenseMatrix::symplectic_form(n);
    let delta = gr.matmul(&j).matmul(&gr.transpose()).matmul(&j.transpose());
    let (v, phases) = evd_unitary(&delta.to_complex(), tol)?;

    // quadruples for θ ∈ (0, π), pairs for λ = ±1
    let mut first: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut second: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut angles2: Vec<f64> = Vec::new(); // μ² block angles, one per pair
    let mut minus_first: Vec<Vec<f64>> = Vec::new();
    let mut minus_second: Vec<Vec<f64>> = Vec::new();
    let mut plus_first: Vec<Vec<f64>> = Vec::new();
    let mut plus_second: Vec<Vec<f64>> = Vec::new();

    let japply_re = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n2];
        for i in 0..n {
            out[i] = x[n + i];
            out[n + i] = -x[i];
        }
        out
    };

    for (lo, hi) in evd_cluster_ranges(&phases, DEGENERACY_TOL) {
        let theta = phases[lo];
        let cols: Vec<Vec<C64>> = (lo..hi).map(|jx| (0..n2).map(|i| v.at(i, jx)).collect()).collect();
        if theta > DEGENERACY_TOL && theta < PI - DEGENERACY_TOL {
            // quadruple recombination
            let mut remaining = cols;
            while !remaining.is_empty() {
                let v0 = take_pivot(&mut remaining);
                // partner u = J v* in the same cluster
                let jmap = |x: &[C64]| -> Vec<C64> {
                    let mut out = vec![C64::new(0.0, 0.0); n2];
                    for i in 0..n {
                        out[i] = x[n + i].conj();
                        out[n + i] = -x[i].conj();
                    }
                    out
                };
                let mut u0 = jmap(&v0);
                normalize(&mut u0);
                project_out(&mut remaining, &v0);
                project_out(&mut remaining, &u0);
                renormalize(&mut remaining);
                let sq2 = std::f64::consts::SQRT_2;
                let w0: Vec<f64> = u0.iter().map(|z| z.re * sq2).collect();
                let w1: Vec<f64> = u0.iter().map(|z| -z.im * sq2).collect();
                let w2: Vec<f64> = v0.iter().map(|z| z.re * sq2).collect();
                let w3: Vec<f64> = v0.iter().map(|z| -z.im * sq2).collect();
                first.push(w0);
                first.push(w1);
                second.push(w2);
                second.push(w3);
                angles2.push(-theta);
            }
        } else if theta.abs() <= DEGENERACY_TOL
            || (theta - PI).abs() <= DEGENERACY_TOL
            || (theta + PI).abs() <= DEGENERACY_TOL
        {
            let reals = realify_basis(&cols).map_err(|e| KakError::Degenerate(e.to_string()))?;
            let mut remaining = reals;
            while !remaining.is_empty() {
                let (idx, _) = remaining
                    .iter()
                    .enumerate()
                    .map(|(i, vv)| (i, vv.iter().map(|x| x * x).sum::<f64>()))
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                let mut v0 = remaining.swap_remove(idx);
                let nv = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in v0.iter_mut() {
                    *x /= nv;
                }
                let mut u0 = japply_re(&v0);
                let nu = u0.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in u0.iter_mut() {
                    *x /= nu;
                }
                for w in remaining.iter_mut() {
                    for dir in [&v0, &u0] {
                        let ip: f64 = dir.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                        for (x, d) in w.iter_mut().zip(dir.iter()) {
                            *x -= ip * d;
                        }
                    }
                }
                remaining.retain(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6);
                if theta.abs() <= DEGENERACY_TOL {
                    plus_first.push(u0);
                    plus_second.push(v0);
                } else {
                    minus_first.push(u0);
                    minus_second.push(v0);
                }
            }
        }
    }

    let f_count = minus_first.len();
    if f_count % 2 != 0 {
        return Err(KakError::Degenerate(format!(
            "odd count {f_count} of λ = -1 pairs in DIII"
        )));
    }
    // order: rotation pairs, then -1 pairs, then +1 pairs
    for _ in 0..f_count / 2 {
        angles2.push(PI);
    }
    let plus_count = plus_first.len();
    for _ in 0..plus_count / 2 {
        angles2.push(0.0);
    }
    first.extend(minus_first);
    second.extend(minus_second);
    first.extend(plus_first);
    second.extend(plus_second);

    // symplectic sign convention: B(col_k, col_{n+k}) = +1
    for k in 0..n {
        let b: f64 = {
            let x = &first[k];
            let y = &second[k];
            let mut acc = 0.0;
            for i in 0..n {
                acc += x[i] * y[n + i] - x[n + i] * y[i];
            }
            acc
        };
        if b < 0.0 {
            for x in second[k].iter_mut() {
                *x = -*x;
            }
        }
    }

    let u1 = DenseMatrix::from_fn_real(n2, n2, |i, jx| {
        if jx < n { first[jx][i] } else { second[jx - n][i] }
    });
    let mu2 = CsgElement::new(CsgKind::Schur, n, angles2);
    let mu = mu2.sqrt();
    let a = CsgElement::new(CsgKind::SchurPair, n2, mu.angles.clone());
    let a_mat = a.materialize();
    let u2 = a_mat.transpose().matmul(&u1.transpose()).matmul(&gr);
    Ok(KakFactors {
        k1: u1,
        a,
        k2: u2,
        ty: InvolutionType::DIII,
        delta: Some(delta),
        global_phase: C64::new(1.0, 0.0),
    })
}

// ---- C ----------------------------------------------------------------------

fn kak_c(g: &DenseMatrix, tol: f64) -> Result<KakFactors> {
    let half = g.rows() / 2; // each block is 2n×2n
    let n = half / 2;
    let s = g.block(0, 0, half, half);
    let sp = g.block(half, half, half, half);
    let delta = s.matmul(&sp.adjoint());
    let (v, phases) = evd_unitary(&delta, tol)?;
    let (first, second, pair_phases) = symplectic_pairs(&v, &phases, false)?;
    let s1 = cols_to_matrix(&first, &second);
    let half_angles: Vec<f64> = pair_phases.iter().map(|p| p / 2.0).collect();
    let dsl = DenseMatrix::from_fn_complex(half, half, |i, jx| {
        if i != jx {
            C64::new(0.0, 0.0)
        } else if i < n {
            C64::from_polar(1.0, half_angles[i])
        } else {
            C64::from_polar(1.0, -half_angles[i - n])
        }
    });
    let s2 = dsl.matmul(&s1.adjoint()).matmul(&sp);
    // Dsl ⊕ Dsl† as a UDiag pattern [α, -α, -α, α]
    let mut angles = Vec::with_capacity(2 * half);
    angles.extend(half_angles.iter().copied());
    angles.extend(half_angles.iter().map(|a| -a));
    angles.extend(half_angles.iter().map(|a| -a));
    angles.extend(half_angles.iter().copied());
    Ok(KakFactors {
        k1: s1.dsum(&s1),
        a: CsgElement::new(CsgKind::UDiag, 2 * half, angles),
        k2: s2.dsum(&s2),
        ty: InvolutionType::C,
        delta: Some(delta.dsum(&delta.adjoint())),
        global_phase: C64::new(1.0, 0.0),
    })
}

// ---- CI ---------------------------------------------------------------------

fn kak_ci(g: &DenseMatrix, tol: f64) -> Result<KakFactors> {
    let n2 = g.rows();
    let n = n2 / 2;
    let delta = g.to_complex().matmul(&g.transpose().to_complex());
    let (v, phases) = evd_unitary(&delta, tol)?;

    let mut first: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut second: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut alphas: Vec<f64> = Vec::with_capacity(n);
    let japply_re = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n2];
        for i in 0..n {
            out[i] = x[n + i];
            out[n + i] = -x[i];
        }
        out
    };
    for (lo, hi) in evd_cluster_ranges(&phases, DEGENERACY_TOL) {
        let theta = phases[lo];
        if theta < -DEGENERACY_TOL {
            continue; // conjugate clusters handled through J-partners
        }
        let cols: Vec<Vec<C64>> = (lo..hi).map(|jx| (0..n2).map(|i| v.at(i, jx)).collect()).collect();
        let self_conjugate =
            theta.abs() <= DEGENERACY_TOL || (theta - PI).abs() <= DEGENERACY_TOL;
        let reals = realify_basis(&cols).map_err(|e| KakError::Degenerate(e.to_string()))?;
        let mut remaining = reals;
        while !remaining.is_empty() {
            let (idx, _) = remaining
                .iter()
                .enumerate()
                .map(|(i, vv)| (i, vv.iter().map(|x| x * x).sum::<f64>()))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let mut v0 = remaining.swap_remove(idx);
            let nv = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v0.iter_mut() {
                *x /= nv;
            }
            let mut u0 = japply_re(&v0);
            let nu = u0.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in u0.iter_mut() {
                *x /= nu;
            }
            if self_conjugate {
                for w in remaining.iter_mut() {
                    for dir in [&v0, &u0] {
                        let ip: f64 = dir.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                        for (x, d) in w.iter_mut().zip(dir.iter()) {
                            *x -= ip * d;
                        }
                    }
                }
                remaining.retain(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6);
            } else {
                for w in remaining.iter_mut() {
                    let ip: f64 = v0.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                    for (x, d) in w.iter_mut().zip(v0.iter()) {
                        *x -= ip * d;
                    }
                }
                remaining.retain(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6);
            }
            // Jr goes to the first half with eigenvalue λ*: α = -θ
            first.push(u0);
            second.push(v0);
            alphas.push(-theta);
        }
    }
    if first.len() != n {
        return Err(KakError::Degenerate(format!(
            "CI pairing found {} of {n} pairs",
            first.len()
        )));
    }
    let u1 = DenseMatrix::from_fn_real(n2, n2, |i, jx| {
        if jx < n { first[jx][i] } else { second[jx - n][i] }
    });
    let half: Vec<f64> = alphas.iter().map(|a| a / 2.0).collect();
    let a = CsgElement::new(CsgKind::SpDiag, n2, half);
    let a_mat = a.materialize();
    let u2 = a_mat.adjoint().matmul(&u1.transpose().to_complex()).matmul(&g.to_complex());
    Ok(KakFactors {
        k1: u1,
        a,
        k2: u2,
        ty: InvolutionType::CI,
        delta: Some(delta),
        global_phase: C64::new(1.0, 0.0),
    })
}

// ---- CII --------------------------------------------------------------------

fn kak_cii(g: &DenseMatrix, p: usize, q: usize, tol: f64) -> Result<KakFactors> {
    if p < q {
        // reduce to the p ≥ q case through the within-half block swap: pull
        // K1 back to the original frame, then relabel its columns so the
        // CSG planes land on the grcs(p, q) support (sine signs flip)
        let sw = rep::pq_swap(p, q);
        let mut inv = vec![0usize; sw.len()];
        for (t, &s) in sw.iter().enumerate() {
            inv[s] = t;
        }
        let n = p + q;
        let mut rho = vec![0usize; 2 * n];
        for half in 0..2 {
            let base = half * n;
            for t in 0..p {
                rho[base + t] = base + t;
            }
            for t in 0..q {
                rho[base + p + t] = base + p + (t + p) % q;
            }
        }
        let gt = rep::conjugate_by_perm(g, &sw);
        let f = kak_cii_core(&gt, q, p, tol)?;
        let k1 = rep::conjugate_by_perm(&f.k1, &inv).permute_cols(&rho);
        let angles: Vec<f64> = f.a.angles.iter().map(|a| -a).collect();
        let a = CsgElement::new(CsgKind::CsSp { p, q }, 2 * n, angles);
        let k2 = a.materialize().to_complex().adjoint().matmul(&k1.adjoint()).matmul(&g.to_complex());
        let kpq = DenseMatrix::kpq(p, q).to_complex();
        let delta = g
            .to_complex()
            .matmul(&kpq)
            .matmul(&g.adjoint().to_complex())
            .matmul(&kpq);
        return Ok(KakFactors {
            k1,
            a,
            k2,
            ty: InvolutionType::CII { p, q },
            delta: Some(delta),
            global_phase: f.global_phase,
        });
    }
    kak_cii_core(g, p, q, tol)
}

fn kak_cii_core(g: &DenseMatrix, p: usize, q: usize, tol: f64) -> Result<KakFactors> {
    let n = p + q;
    let n2 = 2 * n;
    let r = q;
    if r == 0 {
        return Ok(KakFactors {
            k1: g.clone(),
            a: CsgElement::identity(CsgKind::CsSp { p, q }, n2),
            k2: DenseMatrix::identity_complex(n2),
            ty: InvolutionType::CII { p, q },
            delta: None,
            global_phase: C64::new(1.0, 0.0),
        });
    }

    // CSD in the χη frame
    let perm = rep::chi_eta(p, q); // perm[t] = source coord
    let mut inv = vec![0usize; n2];
    for (t, &s) in perm.iter().enumerate() {
        inv[s] = t;
    }
    let s_src = rep::conjugate_by_perm(g, &inv);
    let (k1s, f0, _k2s) = csd(&s_src, 2 * p, 2 * q, tol)?;
    let v1 = rep::conjugate_by_perm(&k1s, &perm);

    // plane columns in the target frame
    let tgt = |s: usize| inv[s];
    let mut plane_cols: Vec<(f64, Vec<C64>, Vec<C64>)> = Vec::with_capacity(2 * r);
    for i in 0..2 * r {
        let c_t = tgt(i);
        let s_t = tgt(2 * p + i);
        let c_col: Vec<C64> = (0..n2).map(|x| v1.at(x, c_t)).collect();
        let s_col: Vec<C64> = (0..n2).map(|x| v1.at(x, s_t)).collect();
        plane_cols.push((f0.angles[i], c_col, s_col));
    }
    let mut id_cols: Vec<Vec<C64>> = Vec::with_capacity(2 * (p - q));
    for s in 2 * r..2 * p {
        let t = tgt(s);
        id_cols.push((0..n2).map(|x| v1.at(x, t)).collect());
    }

    // eigenvectors of Δ with eigenvalue e^{+2iα}: u₊ = (c + i·s)/√2
    let mut eig: Vec<(f64, Vec<C64>)> = Vec::with_capacity(2 * r);
    for (alpha, c_col, s_col) in &plane_cols {
        let up: Vec<C64> = c_col
            .iter()
            .zip(s_col)
            .map(|(c, s)| (*c + C64::new(0.0, 1.0) * *s) / C64::new(f64::sqrt(2.0), 0.0))
            .collect();
        eig.push((2.0 * alpha, up));
    }
    // sort by doubled angle to make clusters contiguous
    eig.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let kapply = |x: &[C64]| -> Vec<C64> {
        let k = DenseMatrix::kpq(p, q);
        (0..n2).map(|i| x[i] * C64::new(k.re(i, i), 0.0)).collect()
    };
    let japply = |x: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); n2];
        for i in 0..n {
            out[i] = x[n + i];
            out[n + i] = -x[i];
        }
        out
    };

    // slot column stores
    let mut p1: Vec<Option<Vec<C64>>> = vec![None; p];
    let mut q1: Vec<Option<Vec<C64>>> = vec![None; q];
    let mut p2: Vec<Option<Vec<C64>>> = vec![None; p];
    let mut q2: Vec<Option<Vec<C64>>> = vec![None; q];
    let mut betas: Vec<f64> = Vec::with_capacity(r);
    let mut next_pair = 0usize; // next cos/sin slot

    // group "2α" values
    let vals: Vec<f64> = eig.iter().map(|e| e.0).collect();
    let ranges = evd_cluster_ranges(&vals, DEGENERACY_TOL);
    let mut plus_pool: Vec<Vec<C64>> = id_cols; // eigenvalue-1 columns
    let mut minus_pool: Vec<Vec<C64>> = Vec::new();

    for (lo, hi) in &ranges {
        let two_beta = vals[*lo];
        if two_beta <= DEGENERACY_TOL {
            for k in *lo..*hi {
                plus_pool.push(eig[k].1.clone());
            }
        } else if two_beta >= PI - DEGENERACY_TOL {
            for k in *lo..*hi {
                minus_pool.push(eig[k].1.clone());
            }
        } else {
            // generic quadruples
            let mut remaining: Vec<Vec<C64>> = (*lo..*hi).map(|k| eig[k].1.clone()).collect();
            renormalize(&mut remaining);
            while !remaining.is_empty() {
                let v0 = take_pivot(&mut remaining);
                let mut w0 = kapply(&v0);
                normalize(&mut w0);
                let v2 = japply(&conj_vec(&w0));
                project_out(&mut remaining, &v0);
                project_out(&mut remaining, &v2);
                renormalize(&mut remaining);
                let sq2 = C64::new(f64::sqrt(2.0), 0.0);
                let a_col: Vec<C64> =
                    v0.iter().zip(&w0).map(|(x, y)| (*x + *y) / sq2).collect();
                let b_col: Vec<C64> = v0
                    .iter()
                    .zip(&w0)
                    .map(|(x, y)| (*x - *y) / (C64::new(0.0, 1.0) * sq2))
                    .collect();
                let ap: Vec<C64> = japply(&conj_vec(&a_col)).iter().map(|z| -z).collect();
                let bp: Vec<C64> = japply(&conj_vec(&b_col)).iter().map(|z| -z).collect();
                let j = next_pair;
                next_pair += 1;
                p1[j] = Some(a_col);
                q1[j] = Some(b_col);
                p2[j] = Some(ap);
                q2[j] = Some(bp);
                betas.push(two_beta / 2.0);
            }
        }
    }

    // λ = -1 pool: K-split into ± parts, J-pair within each, combine
    let (mplus, mminus) = k_split_pairs(&minus_pool, &kapply, &japply)?;
    if mplus.len() != mminus.len() {
        return Err(KakError::Degenerate(format!(
            "CII λ=-1 sector unbalanced: {} vs {}",
            mplus.len(),
            mminus.len()
        )));
    }
    for ((a_col, ap), (b_col, bp)) in mplus.into_iter().zip(mminus) {
        let j = next_pair;
        next_pair += 1;
        p1[j] = Some(a_col);
        q1[j] = Some(b_col);
        p2[j] = Some(ap);
        q2[j] = Some(bp);
        betas.push(PI / 2.0);
    }

    // λ = +1 pool: q-definite pairs complete the cos/sin slots with β = 0,
    // p-definite pairs fill the remaining cos slots and the middle
    let (pplus, pminus) = k_split_pairs(&plus_pool, &kapply, &japply)?;
    let mut pplus = std::collections::VecDeque::from(pplus);
    for (b_col, bp) in pminus {
        let (a_col, ap) = pplus.pop_front().ok_or_else(|| {
            KakError::Degenerate("CII eigenvalue-1 sector lacks p-definite pairs".into())
        })?;
        let j = next_pair;
        next_pair += 1;
        p1[j] = Some(a_col);
        q1[j] = Some(b_col);
        p2[j] = Some(ap);
        q2[j] = Some(bp);
        betas.push(0.0);
    }
    if next_pair != r {
        return Err(KakError::Degenerate(format!(
            "CII filled {next_pair} of {r} angle slots"
        )));
    }
    // middles
    let mut mid = r;
    for (a_col, ap) in pplus {
        if mid >= p {
            return Err(KakError::Degenerate("CII middle slots overflow".into()));
        }
        p1[mid] = Some(a_col);
        p2[mid] = Some(ap);
        mid += 1;
    }
    if mid != p {
        return Err(KakError::Degenerate(format!("CII middle slots: {mid} of {p}")));
    }

    let unwrap_cols = |v: Vec<Option<Vec<C64>>>| -> Result<Vec<Vec<C64>>> {
        v.into_iter()
            .map(|c| c.ok_or_else(|| KakError::Degenerate("CII slot left empty".into())))
            .collect()
    };
    let p1 = unwrap_cols(p1)?;
    let q1 = unwrap_cols(q1)?;
    let p2 = unwrap_cols(p2)?;
    let q2 = unwrap_cols(q2)?;

    let k1 = DenseMatrix::from_fn_complex(n2, n2, |i, jx| {
        let col = if jx < p {
            &p1[jx]
        } else if jx < p + q {
            &q1[jx - p]
        } else if jx < 2 * p + q {
            &p2[jx - (p + q)]
        } else {
            &q2[jx - (2 * p + q)]
        };
        col[i]
    });

    let a = CsgElement::new(CsgKind::CsSp { p, q }, n2, betas);
    let a_mat = a.materialize().to_complex();
    let k2 = a_mat.adjoint().matmul(&k1.adjoint()).matmul(&g.to_complex());
    let kpq = DenseMatrix::kpq(p, q).to_complex();
    let delta = g
        .to_complex()
        .matmul(&kpq)
        .matmul(&g.adjoint().to_complex())
        .matmul(&kpq);
    Ok(KakFactors {
        k1,
        a,
        k2,
        ty: InvolutionType::CII { p, q },
        delta: Some(delta),
        global_phase: C64::new(1.0, 0.0),
    })
}

/// Split an eigenvalue pool into K-definite J-pairs: returns
/// (plus pairs (x, -Jx*), minus pairs) after projecting with (1 ± K)/2.
#[allow(clippy::type_complexity)]
fn k_split_pairs(
    pool: &[Vec<C64>],
    kapply: &dyn Fn(&[C64]) -> Vec<C64>,
    japply: &dyn Fn(&[C64]) -> Vec<C64>,
) -> Result<(Vec<(Vec<C64>, Vec<C64>)>, Vec<(Vec<C64>, Vec<C64>)>)> {
    let mut plus: Vec<Vec<C64>> = Vec::new();
    let mut minus: Vec<Vec<C64>> = Vec::new();
    for v in pool {
        let kv = kapply(v);
        let pv: Vec<C64> = v.iter().zip(&kv).map(|(a, b)| (*a + *b) * 0.5).collect();
        let mv: Vec<C64> = v.iter().zip(&kv).map(|(a, b)| (*a - *b) * 0.5).collect();
        plus.push(pv);
        minus.push(mv);
    }
    renormalize(&mut plus);
    renormalize(&mut minus);
    let pair_up = |mut set: Vec<Vec<C64>>| -> Vec<(Vec<C64>, Vec<C64>)> {
        let mut out = Vec::new();
        while !set.is_empty() {
            let v0 = take_pivot(&mut set);
            let u0: Vec<C64> = japply(&conj_vec(&v0)).iter().map(|z| -z).collect();
            project_out(&mut set, &v0);
            project_out(&mut set, &u0);
            renormalize(&mut set);
            out.push((v0, u0));
        }
        out
    };
    Ok((pair_up(plus), pair_up(minus)))
}

// ---- horizontal decomposition ----------------------------------------------

/// Horizontal decomposition of a canonical BDI algebra element
/// x = [[0, B], [-Bᵀ, 0]]: x = K a Kᵀ with K ∈ SO(p)×SO(q) and the CSA
/// embedding of B's singular values as a's angle rates.
pub fn horizontal_decompose(
    x: &DenseMatrix,
    p: usize,
    q: usize,
    tol: f64,
) -> Result<(DenseMatrix, CsgElement)> {
    let n = p + q;
    if x.rows() != n || x.cols() != n {
        return Err(KakError::BadParams(format!("expected {n}x{n} element")));
    }
    let xr = x
        .try_real(1e-9 * x.max_abs().max(1.0))
        .ok_or_else(|| KakError::NotHorizontal(x.max_imag()))?;
    let mut horiz_leak = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if (i < p) == (j < p) {
                horiz_leak = horiz_leak.max(xr.re(i, j).abs());
            }
        }
    }
    if horiz_leak > scaled_tol(tol.max(1e-9), n, xr.fro_norm().max(1.0)) {
        return Err(KakError::NotHorizontal(horiz_leak));
    }
    let skew = xr.add(&xr.transpose()).fro_norm();
    if skew > scaled_tol(tol.max(1e-9), n, xr.fro_norm().max(1.0)) {
        return Err(KakError::NotHorizontal(skew));
    }
    let r = p.min(q);
    let b = xr.block(0, p, p, q);

    // fast path: diagonal B needs no SVD
    let mut is_diag = true;
    'outer: for i in 0..p {
        for j in 0..q {
            if i != j && b.re(i, j).abs() > 1e-14 * b.max_abs().max(1.0) {
                is_diag = false;
                break 'outer;
            }
        }
    }
    if is_diag && p >= q {
        let sigmas: Vec<f64> = (0..r).map(|i| b.re(i, i)).collect();
        return Ok((
            DenseMatrix::identity_real(n),
            CsgElement::new(CsgKind::Cs { p, q }, n, sigmas),
        ));
    }

    crate::densela::ensure_seq();
    let svd = b
        .to_faer_real()
        .svd()
        .map_err(|e| KakError::Dla(DlaError::Backend(format!("{e:?}"))))?;
    let mut u = DenseMatrix::from_faer_real(svd.U());
    let mut sigmas: Vec<f64> = (0..r).map(|i| svd.S()[i]).collect();

    // the grcs(p, q) sine slots sit on B's main diagonal for p ≥ q and on
    // the last r columns for p < q: shift V's columns accordingly so that
    // B = U Σ_shifted Ṽᵀ with Σ_shifted on the grcs support
    let mut vm = if p < q {
        let perm: Vec<usize> = (0..q).map(|c| (c + p) % q).collect();
        DenseMatrix::from_faer_real(svd.V()).permute_cols(&perm)
    } else {
        DenseMatrix::from_faer_real(svd.V())
    };
    // after the shift, Ṽ's column c carries σ index c - (q - r) when
    // c ≥ q - r; columns below q - r are free of Σ
    let flip_col = |m: &mut DenseMatrix, col: usize| {
        for i in 0..m.rows() {
            let t = -m.re(i, col);
            m.set_re(i, col, t);
        }
    };
    if u.det().re < 0.0 {
        // U's column c carries σ index c when c < r; higher columns are free
        let col = p - 1;
        flip_col(&mut u, col);
        if col < r {
            sigmas[col] = -sigmas[col];
        }
    }
    if vm.det().re < 0.0 {
        if q > r {
            flip_col(&mut vm, 0);
        } else {
            flip_col(&mut vm, q - 1);
            sigmas[q - 1] = -sigmas[q - 1];
        }
    }

    let k = u.dsum(&vm);
    Ok((k, CsgElement::new(CsgKind::Cs { p, q }, n, sigmas)))
}

// ---- verification ------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorReport {
    pub reconstruction_residual: f64,
    pub k1_theta_residual: f64,
    pub k2_theta_residual: f64,
    pub csg_pattern_residual: f64,
    pub det_flags: Vec<f64>,
}

/// Pure diagnostics comparing the factors against the input.
pub fn verify_factors(g: &DenseMatrix, f: &KakFactors) -> FactorReport {
    let rec = f.reconstruct();
    let reconstruction_residual = rec.to_complex().residual(&g.to_complex());
    let th = |k: &DenseMatrix| theta_group(f.ty, k).to_complex().residual(&k.to_complex());
    let k1_theta_residual = th(&f.k1);
    let k2_theta_residual = th(&f.k2);
    let csg_pattern_residual = f.a.pattern_residual(&f.a.materialize());
    let mut det_flags = Vec::new();
    if let InvolutionType::BDI { p, q } = f.ty {
        for k in [&f.k1, &f.k2] {
            det_flags.push(k.block(0, 0, p, p).det().re);
            det_flags.push(k.block(p, p, q, q).det().re);
        }
    }
    FactorReport {
        reconstruction_residual,
        k1_theta_residual,
        k2_theta_residual,
        csg_pattern_residual,
        det_flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::expm_skew;
    use crate::testing::{
        gaussian_real, haar_unitary, orthogonal_det_minus, rng, special_orthogonal,
        symplectic_unitary,
    };

    fn sample(ty: InvolutionType, r: &mut impl rand::Rng) -> DenseMatrix {
        use InvolutionType::*;
        match ty {
            A => {
                let n = 4;
                haar_unitary(n, r).dsum(&haar_unitary(n, r))
            }
            AI => haar_unitary(6, r),
            AII => haar_unitary(6, r), // 2n with n = 3
            AIII { p, q } => haar_unitary(p + q, r),
            BD => {
                let n = 5;
                special_orthogonal(n, r).dsum(&special_orthogonal(n, r))
            }
            BDI { p, q } => special_orthogonal(p + q, r),
            DIII => special_orthogonal(6, r),
            C => {
                let n = 2;
                symplectic_unitary(n, r).dsum(&symplectic_unitary(n, r))
            }
            CI => symplectic_unitary(3, r),
            CII { p, q } => symplectic_unitary(p + q, r),
            Trivial => unreachable!(),
        }
    }

    fn check_factors(g: &DenseMatrix, ty: InvolutionType, tol_scale: f64) {
        let f = kak_decompose(g, ty, 1e-10).unwrap_or_else(|e| panic!("{ty} failed: {e}"));
        let rep = verify_factors(g, &f);
        let n = g.rows() as f64;
        let bound = tol_scale * 1e-10 * n.sqrt() * g.fro_norm();
        assert!(
            rep.reconstruction_residual <= bound,
            "{ty}: reconstruction {} > {}",
            rep.reconstruction_residual,
            bound
        );
        assert!(
            rep.k1_theta_residual <= 1e-10 * n * g.fro_norm().max(1.0),
            "{ty}: k1 not Θ-fixed ({:.3e})",
            rep.k1_theta_residual
        );
        assert!(
            rep.k2_theta_residual <= 1e-10 * n * g.fro_norm().max(1.0),
            "{ty}: k2 not Θ-fixed ({:.3e})",
            rep.k2_theta_residual
        );
        assert!(f.k1.is_unitary(1e-9), "{ty}: k1 not unitary");
        assert!(f.k2.is_unitary(1e-9), "{ty}: k2 not unitary");
        for d in rep.det_flags {
            assert!((d - 1.0).abs() < 1e-10, "{ty}: block det {d}");
        }
    }

    #[test]
    fn identity_inputs_give_identity_factors() {
        for (ty, dim) in [
            (InvolutionType::A, 8),
            (InvolutionType::AI, 5),
            (InvolutionType::AII, 6),
            (InvolutionType::AIII { p: 2, q: 2 }, 4),
            (InvolutionType::BD, 6),
            (InvolutionType::BDI { p: 3, q: 2 }, 5),
            (InvolutionType::DIII, 6),
            (InvolutionType::C, 8),
            (InvolutionType::CI, 6),
            (InvolutionType::CII { p: 1, q: 1 }, 4),
        ] {
            let g = DenseMatrix::identity_real(dim);
            let f = kak_decompose(&g, ty, 1e-10).unwrap_or_else(|e| panic!("{ty}: {e}"));
            let rec = f.reconstruct();
            assert!(
                rec.to_complex().residual(&g.to_complex()) < 1e-10 * dim as f64,
                "{ty} identity reconstruction"
            );
        }
    }

    #[test]
    fn all_ten_types_reconstruct_random_elements() {
        let mut r = rng(101);
        for ty in [
            InvolutionType::A,
            InvolutionType::AI,
            InvolutionType::AII,
            InvolutionType::AIII { p: 2, q: 2 },
            InvolutionType::AIII { p: 3, q: 1 },
            InvolutionType::AIII { p: 1, q: 3 },
            InvolutionType::BD,
            InvolutionType::BDI { p: 3, q: 2 },
            InvolutionType::BDI { p: 2, q: 3 },
            InvolutionType::DIII,
            InvolutionType::C,
            InvolutionType::CI,
            InvolutionType::CII { p: 1, q: 1 },
            InvolutionType::CII { p: 2, q: 1 },
            InvolutionType::CII { p: 1, q: 2 },
        ] {
            for _ in 0..6 {
                let g = sample(ty, &mut r);
                check_factors(&g, ty, 10.0);
            }
        }
    }

    #[test]
    fn ai_real_orthogonal_input_gives_identity_csg() {
        // U real orthogonal, det 1: Δ = UUᵀ = I, a = identity CSG
        let mut r = rng(103);
        let o = special_orthogonal(5, &mut r);
        let f = kak_decompose(&o.to_complex(), InvolutionType::AI, 1e-10).unwrap();
        for &a in &f.a.angles {
            let w = crate::densela::CsgElement::new(CsgKind::UDiag, 1, vec![a]);
            let m = w.materialize();
            assert!((m.at(0, 0) - C64::new(1.0, 0.0)).norm() < 1e-8, "angle {a} not ~0 mod 2π");
        }
        assert!((f.global_phase - C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn ai_factors_are_real_for_haar_input() {
        let mut r = rng(107);
        for _ in 0..5 {
            let u = haar_unitary(8, &mut r);
            let f = kak_decompose(&u, InvolutionType::AI, 1e-10).unwrap();
            assert!(f.k1.is_real() && f.k2.is_real());
            assert!(f.k1.is_orthogonal(1e-10));
            assert!(f.k2.is_orthogonal(1e-10));
            check_factors(&u, InvolutionType::AI, 10.0);
        }
    }

    #[test]
    fn ai_global_phase_changes_only_csg() {
        let mut r = rng(109);
        let u = haar_unitary(6, &mut r);
        let f0 = kak_decompose(&u, InvolutionType::AI, 1e-10).unwrap();
        for phi in [0.37, 1.9, -2.4] {
            let u2 = u.scale(C64::from_polar(1.0, phi));
            let f1 = kak_decompose(&u2, InvolutionType::AI, 1e-10).unwrap();
            assert!(
                f0.k1.to_complex().residual(&f1.k1.to_complex()) < 1e-9,
                "K1 moved under global phase"
            );
            assert!(
                f0.k2.to_complex().residual(&f1.k2.to_complex()) < 1e-9,
                "K2 moved under global phase"
            );
        }
    }

    #[test]
    fn aii_global_phase_changes_only_csg() {
        let mut r = rng(113);
        let u = haar_unitary(6, &mut r);
        let f0 = kak_decompose(&u, InvolutionType::AII, 1e-10).unwrap();
        let u2 = u.scale(C64::from_polar(1.0, 0.81));
        let f1 = kak_decompose(&u2, InvolutionType::AII, 1e-10).unwrap();
        assert!(f0.k1.residual(&f1.k1) < 1e-9);
        assert!(f0.k2.residual(&f1.k2) < 1e-9);
    }

    #[test]
    fn aii_factors_are_symplectic() {
        let mut r = rng(127);
        let u = haar_unitary(8, &mut r);
        let f = kak_decompose(&u, InvolutionType::AII, 1e-10).unwrap();
        assert!(f.k1.is_symplectic_unitary(1e-9));
        assert!(f.k2.is_symplectic_unitary(1e-9));
        check_factors(&u, InvolutionType::AII, 10.0);
    }

    #[test]
    fn bdi_det_repair_on_det_minus_blocks() {
        // engineered input whose raw CSD factors carry negative block dets
        let mut r = rng(131);
        for _ in 0..10 {
            let (p, q) = (3, 2);
            let k1 = orthogonal_det_minus(p, &mut r).dsum(&orthogonal_det_minus(q, &mut r));
            let f = CsgElement::new(CsgKind::Cs { p, q }, 5, vec![0.4, 1.1]);
            let k2 = orthogonal_det_minus(p, &mut r).dsum(&orthogonal_det_minus(q, &mut r));
            let g = k1.matmul(&f.materialize()).matmul(&k2);
            assert!((g.det().re - 1.0).abs() < 1e-10, "test input must be in SO(5)");
            check_factors(&g, InvolutionType::BDI { p, q }, 10.0);
        }
    }

    #[test]
    fn diii_symplectic_k_and_even_minus_count() {
        let mut r = rng(137);
        for _ in 0..8 {
            let o = special_orthogonal(8, &mut r);
            let f = kak_decompose(&o, InvolutionType::DIII, 1e-10).unwrap();
            assert!(f.k1.is_symplectic_unitary(1e-9), "DIII K1 must be symplectic");
            assert!(f.k1.is_real());
            check_factors(&o, InvolutionType::DIII, 10.0);
        }
    }

    #[test]
    fn cii_factors_commute_with_kpq() {
        let mut r = rng(139);
        for (p, q) in [(1usize, 1usize), (2, 1), (2, 2), (1, 2)] {
            let s = symplectic_unitary(p + q, &mut r);
            let f = kak_decompose(&s, InvolutionType::CII { p, q }, 1e-10).unwrap();
            let k = DenseMatrix::kpq(p, q).to_complex();
            for kk in [&f.k1, &f.k2] {
                let resid = k.matmul(&kk.to_complex()).matmul(&k).residual(&kk.to_complex());
                assert!(resid < 1e-8 * (p + q) as f64, "K factor not K_pq-block ({resid:.2e})");
                assert!(kk.is_symplectic_unitary(1e-8));
            }
            check_factors(&s, InvolutionType::CII { p, q }, 100.0);
        }
    }

    #[test]
    fn horizontal_decompose_zero_block() {
        let x = DenseMatrix::zeros_real(5, 5);
        let (k, a) = horizontal_decompose(&x, 3, 2, 1e-10).unwrap();
        assert!(k.residual(&DenseMatrix::identity_real(5)) < 1e-12);
        assert!(a.angles.iter().all(|s| s.abs() < 1e-14));
    }

    #[test]
    fn horizontal_decompose_matches_expm() {
        let mut r = rng(149);
        for (p, q) in [(3usize, 3usize), (4, 2), (2, 4), (3, 2)] {
            let n = p + q;
            let b = gaussian_real(p, q, &mut r);
            let mut x = DenseMatrix::zeros_real(n, n);
            x.set_block(0, p, &b);
            x.set_block(p, 0, &b.transpose().neg());
            let (k, a) = horizontal_decompose(&x, p, q, 1e-10).unwrap();
            assert!(k.is_orthogonal(1e-10));
            assert!((k.block(0, 0, p, p).det().re - 1.0).abs() < 1e-10);
            assert!((k.block(p, p, q, q).det().re - 1.0).abs() < 1e-10);
            for t in [0.1, 1.0, 10.0] {
                let lhs = expm_skew(&x, t).unwrap();
                let rhs = k.matmul(&a.scale(t).materialize()).matmul(&k.transpose());
                assert!(
                    lhs.residual(&rhs) <= 1e-10 * lhs.fro_norm().max(1.0) * n as f64,
                    "(p,q)=({p},{q}) t={t}: {}",
                    lhs.residual(&rhs)
                );
            }
        }
    }

    #[test]
    fn verify_factors_reports_injected_noise() {
        let mut r = rng(151);
        let u = haar_unitary(4, &mut r);
        let mut f = kak_decompose(&u, InvolutionType::AIII { p: 2, q: 2 }, 1e-10).unwrap();
        let noisy = f.k1.to_complex().add(&crate::testing::gaussian_complex(4, 4, &mut r).scale_re(1e-3 / 4.0));
        f.k1 = noisy;
        let rep = verify_factors(&u, &f);
        assert!(rep.reconstruction_residual > 1e-4);
        assert!(rep.reconstruction_residual < 1e-2);
    }

    #[test]
    fn degenerate_spectra_survive() {
        // repeated CSG angles through every eigen-pairing path
        let mut r = rng(157);
        // AI with degenerate Δ
        let o1 = special_orthogonal(6, &mut r);
        let o2 = special_orthogonal(6, &mut r);
        let d = CsgElement::new(CsgKind::UDiag, 6, vec![0.9, 0.9, 0.9, -0.4, -0.4, 0.1]);
        let u = o1.to_complex().matmul(&d.materialize()).matmul(&o2.to_complex());
        check_factors(&u, InvolutionType::AI, 100.0);
        // BDI with repeated angles
        let (p, q) = (3, 3);
        let k1 = special_orthogonal(p, &mut r).dsum(&special_orthogonal(q, &mut r));
        let k2 = special_orthogonal(p, &mut r).dsum(&special_orthogonal(q, &mut r));
        let f = CsgElement::new(CsgKind::Cs { p, q }, 6, vec![0.7, 0.7, 0.7]);
        let g = k1.matmul(&f.materialize()).matmul(&k2);
        check_factors(&g, InvolutionType::BDI { p, q }, 100.0);
    }

    #[test]
    fn wrong_group_rejected() {
        let mut r = rng(163);
        let u = haar_unitary(6, &mut r);
        assert!(matches!(
            kak_decompose(&u, InvolutionType::BDI { p: 3, q: 3 }, 1e-10),
            Err(KakError::NotInGroup { .. })
        ));
        let x = gaussian_real(5, 5, &mut r);
        assert!(matches!(
            horizontal_decompose(&x, 3, 2, 1e-10),
            Err(KakError::NotHorizontal(_))
        ));
    }
}
