//! Seeded sampling of group elements, used by tests, the benchmark harness
//! and the CLI's --seed paths. Haar sampling is QR of a Gaussian matrix with
//! the R diagonal phase-fixed.

use crate::densela::{C64, DenseMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_real(rows: usize, cols: usize, r: &mut impl Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros_real(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set_re(i, j, StandardNormal.sample(r));
        }
    }
    m
}

pub fn gaussian_complex(rows: usize, cols: usize, r: &mut impl Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros_complex(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = StandardNormal.sample(r);
            let im: f64 = StandardNormal.sample(r);
            m.set(i, j, C64::new(re, im));
        }
    }
    m
}

/// Haar-distributed U(n): QR of a complex Gaussian with R's diagonal phases
/// absorbed into Q.
pub fn haar_unitary(n: usize, r: &mut impl Rng) -> DenseMatrix {
    crate::densela::ensure_seq();
    let g = gaussian_complex(n, n, r).to_faer_complex();
    let qr = g.qr();
    let q = qr.compute_Q();
    let rr = qr.R();
    DenseMatrix::from_fn_complex(n, n, |i, j| {
        let d: C64 = rr[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q[(i, j)] * ph
    })
}

/// Haar-distributed SO(n): QR of a real Gaussian, signs fixed, det corrected.
pub fn special_orthogonal(n: usize, r: &mut impl Rng) -> DenseMatrix {
    crate::densela::ensure_seq();
    let g = gaussian_real(n, n, r).to_faer_real();
    let qr = g.qr();
    let q = qr.compute_Q();
    let rr = qr.R();
    let mut m = DenseMatrix::from_fn_real(n, n, |i, j| {
        let s = if rr[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * s
    });
    if m.det().re < 0.0 {
        for i in 0..n {
            let v = -m.re(i, 0);
            m.set_re(i, 0, v);
        }
    }
    m
}

/// Orthogonal with determinant -1.
pub fn orthogonal_det_minus(n: usize, r: &mut impl Rng) -> DenseMatrix {
    let mut m = special_orthogonal(n, r);
    for i in 0..n {
        let v = -m.re(i, 0);
        m.set_re(i, 0, v);
    }
    m
}

/// Random element of Sp(n) ⊂ U(2n): exponential of a random element of the
/// symplectic algebra (x skew-Hermitian with x = -J xᵀ Jᵀ).
pub fn symplectic_unitary(n: usize, r: &mut impl Rng) -> DenseMatrix {
    let g = gaussian_complex(2 * n, 2 * n, r);
    let skew = g.sub(&g.adjoint()).scale_re(0.5);
    let j = DenseMatrix::symplectic_form(n).to_complex();
    let proj = skew
        .sub(&j.matmul(&skew.transpose()).matmul(&j.transpose()))
        .scale_re(0.5);
    crate::densela::expm_skew(&proj.scale_re(1.0 / (n as f64).sqrt()), 1.0)
        .expect("symplectic algebra exponential")
}

/// Random skew-Hermitian algebra element of u(n).
pub fn skew_hermitian(n: usize, r: &mut impl Rng) -> DenseMatrix {
    let g = gaussian_complex(n, n, r);
    g.sub(&g.adjoint()).scale_re(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samplers_land_in_their_groups() {
        let mut r = rng(1);
        assert!(haar_unitary(5, &mut r).is_unitary(1e-12));
        let o = special_orthogonal(5, &mut r);
        assert!(o.is_special_orthogonal(1e-12));
        let s = symplectic_unitary(3, &mut r);
        assert!(s.is_symplectic_unitary(1e-10), "sp sample off");
        let neg = orthogonal_det_minus(4, &mut r);
        assert!(neg.is_orthogonal(1e-12) && neg.det().re < 0.0);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = haar_unitary(4, &mut rng(99));
        let b = haar_unitary(4, &mut rng(99));
        assert_eq!(a, b);
    }
}
