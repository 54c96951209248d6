//! Cosine-sine decomposition targeting the grcs(p, q) layout: identity block
//! of size |p−q| in the middle, cosines ascending. Built from an SVD of the
//! top-left block and a QR completion of the lower-left block; real input
//! yields real factors.

use super::csg::{CsgElement, CsgKind};
use super::evd::ensure_seq;
use super::{C64, DenseMatrix, DlaError, scaled_tol};

/// U = K1 · F · K2 with K1, K2 block-diagonal over (p, q) and F ∈ grcs(p, q).
pub fn csd(
    u: &DenseMatrix,
    p: usize,
    q: usize,
    tol: f64,
) -> Result<(DenseMatrix, CsgElement, DenseMatrix), DlaError> {
    ensure_seq();
    let n = u.rows();
    if p + q != n || u.cols() != n {
        return Err(DlaError::BadSplit { p, q, dim: n });
    }
    if !u.is_unitary(tol.max(1e-8)) {
        let r = u
            .adjoint()
            .matmul(u)
            .to_complex()
            .residual(&DenseMatrix::identity_complex(n));
        return Err(DlaError::NotUnitary(r));
    }
    let r = p.min(q);
    if r == 0 {
        let f = CsgElement::identity(CsgKind::Cs { p, q }, n);
        let k2 = if u.is_real() {
            DenseMatrix::identity_real(n)
        } else {
            DenseMatrix::identity_complex(n)
        };
        return Ok((u.clone(), f, k2));
    }

    let (l1, mut c, r1) = svd_ascending(&u.block(0, 0, p, p))?;

    // completion of the lower-left block: U21 · R1 = B1 · F21
    let x = u.block(p, 0, q, p).matmul(&r1);
    let xr = if r < p { x.block(0, 0, q, r) } else { x };
    let (qfull, rdiag) = qr_with_phase_fix(&xr);

    // sines from the QR diagonal; cos ascending means sin descending, which
    // is what forces R diagonal
    let mut s = vec![0.0f64; r];
    for j in 0..r {
        s[j] = rdiag[j];
    }
    let angles: Vec<f64> = (0..r)
        .map(|j| {
            let cj = c[j].clamp(0.0, 1.0);
            s[j].atan2(cj)
        })
        .collect();
    for j in 0..r {
        c[j] = angles[j].cos();
    }

    // assemble B1: completion columns first, then the pinned ones negated;
    // columns with vanishing sine are free, keep them unnegated so the
    // identity factors trivially
    let pin_sign =
        |j: usize| -> f64 { if s[j] > 1e-12 { -1.0 } else { 1.0 } };
    let b1 = if u.is_real() {
        DenseMatrix::from_fn_real(q, q, |i, j| {
            if j < q - r {
                qfull.re(i, r + j)
            } else {
                pin_sign(j - (q - r)) * qfull.re(i, j - (q - r))
            }
        })
    } else {
        DenseMatrix::from_fn_complex(q, q, |i, j| {
            if j < q - r {
                qfull.at(i, r + j)
            } else {
                qfull.at(i, j - (q - r)) * pin_sign(j - (q - r))
            }
        })
    };

    let k1 = l1.dsum(&b1);
    let f = CsgElement::new(CsgKind::Cs { p, q }, n, angles);
    let k1f = k1.matmul(&f.materialize());
    let k2 = k1f.adjoint().matmul(u);

    // block-structure sanity
    let leak = off_block_mass(&k2, p);
    if leak > scaled_tol(tol.max(1e-9), n, 1.0) * 10.0 {
        return Err(DlaError::DegenerateBasisFailure { cluster: r, residual: leak });
    }
    Ok((k1, f, k2))
}

/// SVD with singular values reordered ascending; returns (L, σ, R) with
/// A = L diag(σ) R†, R NOT adjointed.
fn svd_ascending(a: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix), DlaError> {
    let m = a.rows();
    if a.is_real() {
        let svd = a
            .to_faer_real()
            .svd()
            .map_err(|e| DlaError::Backend(format!("{e:?}")))?;
        let l = DenseMatrix::from_fn_real(m, m, |i, j| svd.U()[(i, m - 1 - j)]);
        let r = DenseMatrix::from_fn_real(m, m, |i, j| svd.V()[(i, m - 1 - j)]);
        let s: Vec<f64> = (0..m).map(|j| svd.S()[m - 1 - j]).collect();
        Ok((l, s, r))
    } else {
        let svd = a
            .to_faer_complex()
            .svd()
            .map_err(|e| DlaError::Backend(format!("{e:?}")))?;
        let l = DenseMatrix::from_fn_complex(m, m, |i, j| svd.U()[(i, m - 1 - j)]);
        let r = DenseMatrix::from_fn_complex(m, m, |i, j| svd.V()[(i, m - 1 - j)]);
        let s: Vec<f64> = (0..m).map(|j| svd.S()[m - 1 - j].re).collect();
        Ok((l, s, r))
    }
}

/// QR of a tall (or square) matrix; the R diagonal is rotated to be real and
/// non-negative by absorbing phases into the Q columns. Returns the full Q
/// and the |R| diagonal.
fn qr_with_phase_fix(x: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let (rows, cols) = (x.rows(), x.cols());
    if x.is_real() {
        let qr = x.to_faer_real().qr();
        let mut q = DenseMatrix::from_faer_real(qr.compute_Q().as_ref());
        let r = qr.R();
        let mut d = vec![0.0f64; cols];
        for j in 0..cols {
            let v = r[(j, j)];
            if v < 0.0 {
                for i in 0..rows {
                    let t = -q.re(i, j);
                    q.set_re(i, j, t);
                }
            }
            d[j] = v.abs();
        }
        (q, d)
    } else {
        let qr = x.to_faer_complex().qr();
        let mut q = DenseMatrix::from_faer_complex(qr.compute_Q().as_ref());
        let r = qr.R();
        let mut d = vec![0.0f64; cols];
        for j in 0..cols {
            let v: C64 = r[(j, j)];
            let a = v.norm();
            if a > 1e-300 {
                let ph = v / a;
                for i in 0..rows {
                    let t = q.at(i, j) * ph;
                    q.set(i, j, t);
                }
            }
            d[j] = a;
        }
        (q, d)
    }
}

/// Largest magnitude outside the p⊕q diagonal blocks.
pub fn off_block_mass(m: &DenseMatrix, p: usize) -> f64 {
    let n = m.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if (i < p) != (j < p) {
                worst = worst.max(m.at(i, j).norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{haar_unitary, rng, special_orthogonal};

    fn check(u: &DenseMatrix, p: usize, q: usize) {
        let n = p + q;
        let (k1, f, k2) = csd(u, p, q, 1e-10).unwrap();
        let back = k1.matmul(&f.materialize()).matmul(&k2);
        assert!(
            back.residual(u) <= 1e-10 * (n as f64).sqrt() * u.fro_norm(),
            "reconstruction failed p={p} q={q}: {}",
            back.residual(u)
        );
        assert!(off_block_mass(&k1, p) <= 1e-12, "k1 leak {}", off_block_mass(&k1, p));
        assert!(off_block_mass(&k2, p) <= 1e-11, "k2 leak {}", off_block_mass(&k2, p));
        if u.is_real() {
            assert!(k1.is_real() && k2.is_real());
        }
        // cosines ascending, so angles descend
        for w in f.angles.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "angles not sorted");
        }
        for &a in &f.angles {
            assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&a));
        }
    }

    #[test]
    fn identity_factors_trivially() {
        let u = DenseMatrix::identity_complex(5);
        let (k1, f, k2) = csd(&u, 2, 3, 1e-10).unwrap();
        assert!(f.angles.iter().all(|a| a.abs() < 1e-8));
        assert!(k1.matmul(&f.materialize()).matmul(&k2).residual(&u) < 1e-12);
    }

    #[test]
    fn single_angle_rotation() {
        // exp(θ(E_{0,1} - E_{1,0})) with p = q = 1
        let th = 0.6f64;
        let u = DenseMatrix::from_fn_real(2, 2, |i, j| {
            [[th.cos(), th.sin()], [-th.sin(), th.cos()]][i][j]
        });
        let (_, f, _) = csd(&u, 1, 1, 1e-10).unwrap();
        assert!((f.angles[0] - th).abs() < 1e-12);
        check(&u, 1, 1);
    }

    #[test]
    fn haar_u4_even_split() {
        let mut r = rng(11);
        for _ in 0..20 {
            let u = haar_unitary(4, &mut r);
            check(&u, 2, 2);
        }
    }

    #[test]
    fn real_o5_uneven_split() {
        let mut r = rng(17);
        for _ in 0..20 {
            let o = special_orthogonal(5, &mut r);
            check(&o, 3, 2);
            check(&o, 2, 3);
        }
    }

    #[test]
    fn assorted_shapes() {
        let mut r = rng(23);
        for (p, q) in [(1, 5), (5, 1), (4, 3), (3, 4), (6, 6), (2, 7)] {
            let u = haar_unitary(p + q, &mut r);
            check(&u, p, q);
            let o = special_orthogonal(p + q, &mut r);
            check(&o, p, q);
        }
    }

    #[test]
    fn degenerate_input_with_clustered_cosines() {
        // a CSG element with repeated angles, dressed by block unitaries
        let mut r = rng(29);
        let p = 4;
        let q = 4;
        let f = CsgElement::new(
            CsgKind::Cs { p, q },
            8,
            vec![0.3, 0.3, 0.3, 1.2],
        );
        let a = haar_unitary(p, &mut r).dsum(&haar_unitary(q, &mut r));
        let b = haar_unitary(p, &mut r).dsum(&haar_unitary(q, &mut r));
        let u = a.matmul(&f.materialize().to_complex()).matmul(&b);
        check(&u, p, q);
    }

    #[test]
    fn bad_split_rejected() {
        let u = DenseMatrix::identity_complex(4);
        assert!(matches!(csd(&u, 3, 2, 1e-10), Err(DlaError::BadSplit { .. })));
    }
}
