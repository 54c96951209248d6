//! Exponentials of skew matrices: the real Schur route for real
//! skew-symmetric inputs, the Hermitian EVD route for complex
//! skew-Hermitian ones. Outputs are orthogonal/unitary by construction.

use super::evd::{hermitian_eigen, skew_schur};
use super::{C64, DenseMatrix, DlaError};

/// exp(x·t) for skew-Hermitian (complex) or skew-symmetric (real) x.
pub fn expm_skew(x: &DenseMatrix, t: f64) -> Result<DenseMatrix, DlaError> {
    let n = x.rows();
    if !x.is_square() {
        return Err(DlaError::DimMismatch("expm_skew needs a square matrix".into()));
    }
    if t == 0.0 {
        return Ok(if x.is_real() {
            DenseMatrix::identity_real(n)
        } else {
            DenseMatrix::identity_complex(n)
        });
    }
    if x.is_real() {
        if !x.is_skew_symmetric(1e-8) {
            return Err(DlaError::NotSkew(x.add(&x.transpose()).fro_norm()));
        }
        let (q, thetas) = skew_schur(x, 1e-10)?;
        let mut b = DenseMatrix::identity_real(n);
        for (k, &th) in thetas.iter().enumerate() {
            let (c, s) = ((th * t).cos(), (th * t).sin());
            b.set_re(2 * k, 2 * k, c);
            b.set_re(2 * k, 2 * k + 1, s);
            b.set_re(2 * k + 1, 2 * k, -s);
            b.set_re(2 * k + 1, 2 * k + 1, c);
        }
        Ok(q.matmul(&b).matmul(&q.transpose()))
    } else {
        if !x.is_skew_hermitian(1e-8) {
            return Err(DlaError::NotSkew(x.add(&x.adjoint()).fro_norm()));
        }
        // i·x is Hermitian: x = V (-iΛ) V†, exp(xt) = V e^{-iΛt} V†
        let h = x.scale(C64::new(0.0, 1.0));
        let (v, lam) = hermitian_eigen(&h)?;
        let v = v.to_complex();
        let d = DenseMatrix::from_fn_complex(n, n, |i, j| {
            if i == j { C64::from_polar(1.0, -lam[i] * t) } else { C64::new(0.0, 0.0) }
        });
        Ok(v.matmul(&d).matmul(&v.adjoint()))
    }
}
