//! Eigendecompositions tailored to the group structure: unitary EVD through
//! commuting Hermitian parts, realification of conjugation-closed eigenbases,
//! the real Schur form of special orthogonal matrices, and the block form of
//! real skew-symmetric matrices.

use super::{C64, DEGENERACY_TOL, DlaError, DenseMatrix};
use faer::Side;
use std::sync::Once;

static SEQ_INIT: Once = Once::new();

/// Deterministic results: run the backend sequentially.
pub(crate) fn ensure_seq() {
    SEQ_INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Eigendecomposition of a Hermitian (or real symmetric) matrix.
/// Eigenvalues ascending; eigenvector matrix matches the input scalar type.
pub fn hermitian_eigen(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>), DlaError> {
    ensure_seq();
    if !m.is_square() {
        return Err(DlaError::DimMismatch("hermitian_eigen needs a square matrix".into()));
    }
    if m.is_real() {
        let evd = m
            .to_faer_real()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| DlaError::Backend(format!("{e:?}")))?;
        let vals: Vec<f64> = (0..m.rows()).map(|i| evd.S()[i]).collect();
        Ok((DenseMatrix::from_faer_real(evd.U()), vals))
    } else {
        let evd = m
            .to_faer_complex()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| DlaError::Backend(format!("{e:?}")))?;
        let vals: Vec<f64> = (0..m.rows()).map(|i| evd.S()[i].re).collect();
        Ok((DenseMatrix::from_faer_complex(evd.U()), vals))
    }
}

/// Group indices of a sorted value list into clusters with gaps below `tol`.
pub(crate) fn cluster_sorted(vals: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || (vals[i] - vals[i - 1]).abs() > tol {
            out.push((start, i));
            start = i;
        }
    }
    out
}

/// EVD of a unitary matrix via the Hermitian EVD of (M+M†)/2 refined on each
/// eigenvalue cluster by (M-M†)/(2i). Phases are returned in (-π, π],
/// ascending, with degenerate phases contiguous (gap tolerance 1e-8).
pub fn evd_unitary(m: &DenseMatrix, tol: f64) -> Result<(DenseMatrix, Vec<f64>), DlaError> {
    let n = m.rows();
    if !m.is_unitary(tol.max(1e-8)) {
        let r = m.adjoint().matmul(m).to_complex().residual(&DenseMatrix::identity_complex(n));
        return Err(DlaError::NotUnitary(r));
    }
    let mc = m.to_complex();
    let hr = mc.add(&mc.adjoint()).scale_re(0.5);
    let ha = mc.sub(&mc.adjoint()).scale(C64::new(0.0, -0.5));
    let (v0, xs) = hermitian_eigen(&hr)?;
    let v0 = v0.to_complex();

    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut phases: Vec<f64> = Vec::with_capacity(n);
    for (lo, hi) in cluster_sorted(&xs, DEGENERACY_TOL) {
        let k = hi - lo;
        let coords: Vec<usize> = (lo..hi).collect();
        if k == 1 {
            let v = col_of(&v0, lo);
            let y = rayleigh(&ha, &v);
            phases.push(wrap_phase(y.atan2(xs[lo].clamp(-1.0, 1.0))));
            cols.push(v);
            continue;
        }
        // refine the cluster with the skew part
        let vc = gather_cols(&v0, &coords);
        let w = sandwich(&ha, &vc); // k×k Hermitian
        let (e, ys) = hermitian_eigen(&w)?;
        let rotated = matmul_cols(&vc, &e.to_complex());
        for (j, &y) in ys.iter().enumerate() {
            phases.push(wrap_phase(y.atan2(xs[lo].clamp(-1.0, 1.0))));
            cols.push(col_of_vec(&rotated, j, n));
        }
    }

    // stable ascending sort by phase
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].partial_cmp(&phases[b]).unwrap());
    let sorted_phases: Vec<f64> = order.iter().map(|&i| phases[i]).collect();
    let v = DenseMatrix::from_fn_complex(n, n, |i, j| cols[order[j]][i]);
    Ok((v, sorted_phases))
}

fn wrap_phase(p: f64) -> f64 {
    if p <= -std::f64::consts::PI { std::f64::consts::PI } else { p }
}

fn col_of(m: &DenseMatrix, j: usize) -> Vec<C64> {
    (0..m.rows()).map(|i| m.at(i, j)).collect()
}

fn gather_cols(m: &DenseMatrix, js: &[usize]) -> Vec<Vec<C64>> {
    js.iter().map(|&j| col_of(m, j)).collect()
}

fn rayleigh(h: &DenseMatrix, v: &[C64]) -> f64 {
    let n = v.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let mut hv = C64::new(0.0, 0.0);
        for j in 0..n {
            hv += h.at(i, j) * v[j];
        }
        acc += v[i].conj() * hv;
    }
    acc.re
}

/// V† H V for a column set.
fn sandwich(h: &DenseMatrix, cols: &[Vec<C64>]) -> DenseMatrix {
    let n = cols[0].len();
    let k = cols.len();
    let hv: Vec<Vec<C64>> = cols
        .iter()
        .map(|v| {
            (0..n)
                .map(|i| (0..n).map(|j| h.at(i, j) * v[j]).sum())
                .collect()
        })
        .collect();
    let mut w = DenseMatrix::zeros_complex(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += cols[a][i].conj() * hv[b][i];
            }
            w.set(a, b, acc);
        }
    }
    // exact Hermitian part
    w.add(&w.adjoint()).scale_re(0.5)
}

fn matmul_cols(cols: &[Vec<C64>], e: &DenseMatrix) -> Vec<C64> {
    let n = cols[0].len();
    let k = cols.len();
    let mut out = vec![C64::new(0.0, 0.0); n * k];
    for j in 0..k {
        for (a, colv) in cols.iter().enumerate() {
            let w = e.at(a, j);
            for i in 0..n {
                out[j * n + i] += colv[i] * w;
            }
        }
    }
    out
}

fn col_of_vec(flat: &[C64], j: usize, n: usize) -> Vec<C64> {
    flat[j * n..(j + 1) * n].to_vec()
}

// ---- realification ------------------------------------------------------

pub(crate) fn dot_c(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn dot_t(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_c(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

/// Flip the sign so the largest-magnitude entry is positive: pins the ±1
/// gauge of a real basis vector deterministically.
pub(crate) fn canonicalize_sign(w: &mut [f64]) {
    let mut idx = 0usize;
    let mut best = 0.0f64;
    for (i, &x) in w.iter().enumerate() {
        if x.abs() > best + 1e-12 {
            best = x.abs();
            idx = i;
        }
    }
    if w[idx] < 0.0 {
        for x in w.iter_mut() {
            *x = -*x;
        }
    }
}

/// Rotate the global phase so the largest-magnitude entry is real positive.
pub(crate) fn canonicalize_phase(v: &mut [C64]) {
    let mut idx = 0usize;
    let mut best = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best + 1e-12 {
            best = z.norm();
            idx = i;
        }
    }
    if best > 0.0 {
        let ph = v[idx].conj() / v[idx].norm();
        for z in v.iter_mut() {
            *z *= ph;
        }
    }
}

/// Turn an orthonormal basis of a conjugation-closed subspace into a real
/// orthonormal basis of the same span. Follows the constructive proof:
/// per vector, the overlap t = vᵀv decides between the v* ∝ v branch and
/// the phase-fixed recombination (v ± v*); remaining vectors are projected
/// and re-orthonormalized with pivoting.
pub(crate) fn realify_cluster(basis: &[Vec<C64>]) -> Result<Vec<Vec<f64>>, DlaError> {
    let m = basis.len();
    if m == 0 {
        return Ok(vec![]);
    }
    let n = basis[0].len();
    let mut remaining: Vec<Vec<C64>> = basis.to_vec();
    let mut reals: Vec<Vec<f64>> = Vec::with_capacity(m);

    while !remaining.is_empty() {
        // pivot: largest norm
        let (pi, _) = remaining
            .iter()
            .enumerate()
            .map(|(i, v)| (i, norm_c(v)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let mut v = remaining.swap_remove(pi);
        let nv = norm_c(&v);
        if nv < 1e-8 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        let t = dot_t(&v, &v);
        let new_reals: Vec<Vec<f64>> = if t.norm() >= 1.0 - 1e-8 {
            // v* ∝ v: a global phase makes it real
            let alpha = -0.5 * t.im.atan2(t.re);
            let ph = C64::from_polar(1.0, alpha);
            let mut w: Vec<f64> = v.iter().map(|x| (ph * x).re).collect();
            let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in w.iter_mut() {
                *x /= nw;
            }
            canonicalize_sign(&mut w);
            vec![w]
        } else {
            let alpha = if t.norm() < 1e-12 { 0.0 } else { -0.5 * t.im.atan2(t.re) };
            let ph = C64::from_polar(1.0, alpha);
            let vt: Vec<C64> = v.iter().map(|x| ph * x).collect();
            let mut wp: Vec<f64> = vt.iter().map(|x| x.re).collect();
            let mut wm: Vec<f64> = vt.iter().map(|x| x.im).collect();
            for w in [&mut wp, &mut wm] {
                let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nw < 1e-8 {
                    return realify_cluster_qr(basis);
                }
                for x in w.iter_mut() {
                    *x /= nw;
                }
            }
            // orthogonalize wm against wp (t made real, so nearly orthogonal)
            let ip: f64 = wp.iter().zip(&wm).map(|(a, b)| a * b).sum();
            for (x, p) in wm.iter_mut().zip(&wp) {
                *x -= ip * p;
            }
            let nw = wm.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nw < 1e-8 {
                return realify_cluster_qr(basis);
            }
            for x in wm.iter_mut() {
                *x /= nw;
            }
            canonicalize_sign(&mut wp);
            canonicalize_sign(&mut wm);
            vec![wp, wm]
        };

        for w in &new_reals {
            let wc: Vec<C64> = w.iter().map(|&x| C64::new(x, 0.0)).collect();
            for u in remaining.iter_mut() {
                let ip = dot_c(&wc, u);
                axpy(u, -ip, &wc);
            }
            reals.push(w.clone());
        }
        // drop exhausted directions
        remaining.retain(|u| norm_c(u) > 1e-8);
        // re-orthonormalize what's left against itself (modified Gram-Schmidt)
        let mut cleaned: Vec<Vec<C64>> = Vec::with_capacity(remaining.len());
        for mut u in remaining.drain(..) {
            for c in &cleaned {
                let ip = dot_c(c, &u);
                axpy(&mut u, -ip, c);
            }
            if norm_c(&u) > 1e-8 {
                let nu = norm_c(&u);
                for x in u.iter_mut() {
                    *x /= nu;
                }
                cleaned.push(u);
            }
        }
        remaining = cleaned;
        if reals.len() > m {
            return realify_cluster_qr(basis);
        }
    }

    if reals.len() != m {
        return realify_cluster_qr(basis);
    }
    // orthonormality check
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            let ip: f64 = reals[a].iter().zip(&reals[b]).map(|(x, y)| x * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((ip - target).abs());
        }
    }
    if worst > 1e-7 {
        return realify_cluster_qr(basis);
    }
    let _ = n;
    Ok(reals)
}

/// Fallback: real orthonormal basis of a conjugation-closed span through a
/// pivoted QR of the stacked real and imaginary parts.
fn realify_cluster_qr(basis: &[Vec<C64>]) -> Result<Vec<Vec<f64>>, DlaError> {
    ensure_seq();
    let m = basis.len();
    let n = basis[0].len();
    let stack = faer::Mat::from_fn(n, 2 * m, |i, j| {
        if j < m { basis[j][i].re } else { basis[j - m][i].im }
    });
    let qr = stack.col_piv_qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let mut reals = Vec::with_capacity(m);
    let rmax = (0..m.min(r.nrows())).fold(0.0f64, |acc, i| acc.max(r[(i, i)].abs()));
    for k in 0..m {
        if k < r.nrows() && r[(k, k)].abs() > 1e-10 * rmax.max(1.0) {
            let mut w: Vec<f64> = (0..n).map(|i| q[(i, k)]).collect();
            canonicalize_sign(&mut w);
            reals.push(w);
        }
    }
    if reals.len() != m {
        return Err(DlaError::DegenerateBasisFailure {
            cluster: m,
            residual: if reals.len() < m { (m - reals.len()) as f64 } else { 0.0 },
        });
    }
    Ok(reals)
}

// ---- real Schur form of SO(n) -------------------------------------------

/// Real Schur decomposition of a special orthogonal matrix:
/// O = Q μ Qᵀ with Q ∈ SO(n) and μ a direct sum of 2×2 rotations (plus a
/// trailing 1 when n is odd). Returns (Q, block angles).
pub fn real_schur(o: &DenseMatrix, tol: f64) -> Result<(DenseMatrix, super::CsgElement), DlaError> {
    use super::{CsgElement, CsgKind};
    let n = o.rows();
    if !o.is_special_orthogonal(tol.max(1e-8)) {
        let d = o.det().re;
        return Err(DlaError::NotSpecialOrthogonal((d - 1.0).abs()));
    }
    let (v, phases) = evd_unitary(o, tol)?;
    let (mut q_cols, mut angles) = pair_conjugate_spectrum(&v, &phases, n, false)?;

    // n odd: put one θ=0 column last as the trailing 1
    if n % 2 == 1 {
        debug_assert_eq!(q_cols.len() % 2, 1);
    }
    // determinant fix
    let q = DenseMatrix::from_fn_real(n, n, |i, j| q_cols[j][i]);
    let detq = q.det().re;
    let q = if detq < 0.0 {
        if n % 2 == 1 {
            let last = q_cols.len() - 1;
            for x in q_cols[last].iter_mut() {
                *x = -*x;
            }
        } else {
            q_cols.swap(0, 1);
            angles[0] = -angles[0];
        }
        DenseMatrix::from_fn_real(n, n, |i, j| q_cols[j][i])
    } else {
        q
    };
    let mu = CsgElement::new(CsgKind::Schur, n, angles);
    Ok((q, mu))
}

/// Shared spectral pairing for orthogonal matrices (`skew=false`, phases of a
/// unitary EVD) and real skew-symmetric matrices (`skew=true`, eigenvalues of
/// i·x). Returns real columns ordered as 2×2 blocks (rotation pairs sorted by
/// descending angle, then ±1/zero realified columns) plus the block angles.
fn pair_conjugate_spectrum(
    v: &DenseMatrix,
    phases: &[f64],
    n: usize,
    skew: bool,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), DlaError> {
    let pi = std::f64::consts::PI;
    let clusters = cluster_sorted(phases, DEGENERACY_TOL);
    let mut rot_cols: Vec<(f64, Vec<Vec<f64>>)> = Vec::new();
    let mut plus_cols: Vec<Vec<f64>> = Vec::new(); // θ≈0
    let mut minus_cols: Vec<Vec<f64>> = Vec::new(); // θ≈π (orthogonal case only)

    for (lo, hi) in &clusters {
        let theta = phases[*lo];
        let coords: Vec<usize> = (*lo..*hi).collect();
        if theta.abs() <= DEGENERACY_TOL {
            let basis = gather_cols(v, &coords);
            plus_cols.extend(realify_cluster(&basis)?);
        } else if !skew && (theta - pi).abs() <= DEGENERACY_TOL {
            let basis = gather_cols(v, &coords);
            minus_cols.extend(realify_cluster(&basis)?);
        } else if theta > 0.0 {
            // pair with the conjugate cluster implicitly via Re/Im
            let mut block = Vec::new();
            for &c in &coords {
                let vc = col_of(v, c);
                let sq2 = std::f64::consts::SQRT_2;
                let re: Vec<f64> = vc.iter().map(|z| z.re * sq2).collect();
                let im: Vec<f64> = vc.iter().map(|z| z.im * sq2).collect();
                if skew {
                    block.push((im, re));
                } else {
                    block.push((re, im));
                }
            }
            rot_cols.push((theta, block.into_iter().flat_map(|(a, b)| [a, b]).collect()));
        }
        // θ < 0 clusters are the conjugates; skipped
    }

    // order: rotation blocks by descending angle, then −1 pairs, then +1
    rot_cols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut angles: Vec<f64> = Vec::new();
    for (theta, block) in rot_cols {
        let pairs = block.len() / 2;
        for _ in 0..pairs {
            angles.push(theta);
        }
        cols.extend(block);
    }
    if minus_cols.len() % 2 != 0 {
        return Err(DlaError::DegenerateBasisFailure {
            cluster: minus_cols.len(),
            residual: 1.0,
        });
    }
    while minus_cols.len() >= 2 {
        let a = minus_cols.remove(0);
        let b = minus_cols.remove(0);
        cols.push(a);
        cols.push(b);
        angles.push(pi);
    }
    // pair up θ=0 columns; odd dimension leaves the last one as trailing 1
    let mut zeros = plus_cols;
    while zeros.len() >= 2 {
        if cols.len() + zeros.len() == n && n % 2 == 1 && zeros.len() == 1 {
            break;
        }
        let a = zeros.remove(0);
        let b = zeros.remove(0);
        cols.push(a);
        cols.push(b);
        angles.push(0.0);
    }
    cols.extend(zeros);
    if cols.len() != n {
        return Err(DlaError::DegenerateBasisFailure { cluster: n - cols.len(), residual: 1.0 });
    }
    Ok((cols, angles))
}

/// Block form of a real skew-symmetric matrix: x = Q g Qᵀ with
/// g = ⊕_k [[0, θ_k], [-θ_k, 0]] ⊕ 0. Returns (Q, thetas); kernel columns
/// fill the tail of Q.
pub fn skew_schur(x: &DenseMatrix, tol: f64) -> Result<(DenseMatrix, Vec<f64>), DlaError> {
    let n = x.rows();
    if !x.is_skew_symmetric(tol.max(1e-8)) {
        return Err(DlaError::NotSkew(x.add(&x.transpose()).fro_norm()));
    }
    // i·x is Hermitian with real eigenvalues ±θ
    let h = x.to_complex().scale(C64::new(0.0, 1.0));
    let (v, evals) = hermitian_eigen(&h)?;
    // reuse the pairing on the "phase" list; scale-insensitive clustering
    let scale = evals.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
    let scaled: Vec<f64> = evals.iter().map(|e| e / scale).collect();
    let (cols, angles) = pair_conjugate_spectrum(&v, &scaled, n, true)?;
    let thetas: Vec<f64> = angles.iter().map(|a| a * scale).collect();
    let q = DenseMatrix::from_fn_real(n, n, |i, j| cols[j][i]);
    Ok((q, thetas))
}
