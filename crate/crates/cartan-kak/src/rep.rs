//! Representation plumbing shared by the involution calculus and the KAK
//! constructions: the u(n) ↔ so(2n)∩sp(n) realification map, the φ_τ
//! conjugator embedding, and the permutation aligning sp(p)⊕sp(q) with its
//! block-structured image inside sp(p+q).

use crate::densela::{C64, DenseMatrix};

/// x + iy ↦ [[x, y], [-y, x]] — the inverse of the φ_× isomorphism, taking a
/// complex n×n matrix to its real 2n×2n image.
pub fn phi_times_inv(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    DenseMatrix::from_fn_real(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let v = m.at(i % n, j % n);
        match (bi, bj) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => v.im,
            _ => -v.im,
        }
    })
}

/// [[x, y], [-y, x]] ↦ x + iy.
pub fn phi_times(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows() / 2;
    DenseMatrix::from_fn_complex(n, n, |i, j| {
        C64::new(m.re(i, j), m.re(i, n + j))
    })
}

/// φ_τ(G) = [[Re G, (-1)^τ Im G], [-Im G, (-1)^τ Re G]]: the real conjugator
/// implementing Ad_G ∘ *^τ through φ_×.
pub fn varphi_tau(g: &DenseMatrix, tau: bool) -> DenseMatrix {
    let n = g.rows();
    let s = if tau { -1.0 } else { 1.0 };
    DenseMatrix::from_fn_real(2 * n, 2 * n, |i, j| {
        let v = g.at(i % n, j % n);
        match (i / n, j / n) {
            (0, 0) => v.re,
            (0, 1) => s * v.im,
            (1, 0) => -v.im,
            _ => s * v.re,
        }
    })
}

/// Coordinate map embedding block-diag(S1 ∈ U(2p), S2 ∈ U(2q)) into the
/// (p, q, p, q)-partitioned carrier of Sp(p+q): target coordinate t draws
/// from source coordinate `perm[t]`. Requires p ≥ q.
///
/// The source layout is [p₁ p₂ | q₁ q₂] (the two halves of each factor), the
/// target layout is [P₁ Q₁ P₂ Q₂].
pub fn sp_pair_embedding(p: usize, q: usize) -> Vec<usize> {
    assert!(p >= q);
    let mut perm = vec![0usize; 2 * (p + q)];
    for t in 0..2 * (p + q) {
        perm[t] = if t < p {
            t // P₁ ← S1 first half
        } else if t < p + q {
            2 * p + (t - p) // Q₁ ← S2 first half
        } else if t < 2 * p + q {
            p + (t - (p + q)) // P₂ ← S1 second half
        } else {
            2 * p + q + (t - (2 * p + q)) // Q₂ ← S2 second half
        };
    }
    perm
}

/// The χη coordinate map used by the CII construction: conjugating an
/// Sp(p+q) element by this permutation groups it into a (2p)⊕(2q)
/// block-diagonal frame whose CSD planes land pairwise in the two copies.
/// `perm[t]` = source coordinate feeding target coordinate t, where "source"
/// is the CSD frame [U(2p) | U(2q)] and "target" is the canonical
/// (p, q, p, q) frame. Requires p ≥ q.
pub fn chi_eta(p: usize, q: usize) -> Vec<usize> {
    assert!(p >= q);
    let n2 = 2 * (p + q);
    let mut tau = vec![0usize; n2];
    // source slots: s1=[0,q) s2=[q,2q) s3=[2q,q+p) s4=[q+p,2p) s5=[2p,2p+q) s6=[2p+q,2p+2q)
    for s in 0..n2 {
        let t = if s < q {
            s // s1 → t1 (start of P₁)
        } else if s < 2 * q {
            (p + q) + (s - q) // s2 → t4 (start of P₂)
        } else if s < q + p {
            q + (s - 2 * q) // s3 → t2 (rest of P₁)
        } else if s < 2 * p {
            (p + q) + q + (s - (q + p)) // s4 → t5 (rest of P₂)
        } else if s < 2 * p + q {
            p + (s - 2 * p) // s5 → t3 (Q₁)
        } else {
            (2 * p + q) + (s - (2 * p + q)) // s6 → t6 (Q₂)
        };
        tau[s] = t;
    }
    // invert: perm[t] = s
    let mut perm = vec![0usize; n2];
    for (s, &t) in tau.iter().enumerate() {
        perm[t] = s;
    }
    perm
}

/// Apply a coordinate map: out[t1, t2] = m[perm[t1], perm[t2]].
pub fn conjugate_by_perm(m: &DenseMatrix, perm: &[usize]) -> DenseMatrix {
    m.permute_rows(perm).permute_cols(perm)
}

/// The within-half p ↔ q block swap on the (p, q, p, q) carrier, used to
/// reduce CII with p < q to the p ≥ q case.
pub fn pq_swap(p: usize, q: usize) -> Vec<usize> {
    let n = p + q;
    let mut perm = vec![0usize; 2 * n];
    for half in 0..2 {
        let base = half * n;
        for t in 0..n {
            // target layout (q, p): first q coords draw from the old q block
            perm[base + t] = if t < q { base + p + t } else { base + (t - q) };
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{haar_unitary, rng, symplectic_unitary};

    #[test]
    fn phi_times_round_trip_and_homomorphism() {
        let mut r = rng(2);
        let a = haar_unitary(3, &mut r);
        let b = haar_unitary(3, &mut r);
        let ra = phi_times_inv(&a);
        let rb = phi_times_inv(&b);
        assert!(phi_times(&ra).residual(&a) < 1e-14);
        // multiplicative: φ×⁻¹(ab) = φ×⁻¹(a)·φ×⁻¹(b)
        let ab = phi_times_inv(&a.matmul(&b));
        assert!(ra.matmul(&rb).residual(&ab) < 1e-13);
        // lands in SO(2n) ∩ Sp(n)
        assert!(ra.is_orthogonal(1e-12));
        assert!(ra.is_symplectic_unitary(1e-12));
    }

    #[test]
    fn sp_pair_embedding_commutes_with_kpq() {
        let (p, q) = (2, 1);
        let mut r = rng(3);
        let s1 = symplectic_unitary(p, &mut r);
        let s2 = symplectic_unitary(q, &mut r);
        let block = s1.dsum(&s2);
        let perm = sp_pair_embedding(p, q);
        let emb = conjugate_by_perm(&block, &perm);
        let k = DenseMatrix::kpq(p, q).to_complex();
        let lhs = k.matmul(&emb).matmul(&k);
        assert!(lhs.residual(&emb) < 1e-12, "embedded pair must commute with K_pq");
        // embedded element is symplectic for J_{p+q}
        assert!(emb.is_symplectic_unitary(1e-10));
    }

    #[test]
    fn chi_eta_carries_block_pairs_into_kpq_form() {
        let (p, q) = (2, 1);
        let n2 = 2 * (p + q);
        let mut r = rng(4);
        let u1 = haar_unitary(2 * p, &mut r);
        let u2 = haar_unitary(2 * q, &mut r);
        let block = u1.dsum(&u2);
        let perm = chi_eta(p, q);
        let emb = conjugate_by_perm(&block, &perm);
        let k = DenseMatrix::kpq(p, q).to_complex();
        let lhs = k.matmul(&emb).matmul(&k);
        assert!(lhs.residual(&emb) < 1e-12, "χη image must commute with K_pq");
        assert_eq!(emb.rows(), n2);
    }

    #[test]
    fn chi_eta_sends_cs_planes_into_both_copies() {
        // grcs(2p, 2q) in the source frame must land as F(α₁..α_q) ⊕ F(α_{q+1}..)
        use crate::densela::{CsgElement, CsgKind};
        let (p, q) = (3, 2);
        let f0 = CsgElement::new(
            CsgKind::Cs { p: 2 * p, q: 2 * q },
            2 * (p + q),
            vec![0.1, 0.2, 0.3, 0.4],
        );
        let perm = chi_eta(p, q);
        let emb = conjugate_by_perm(&f0.materialize(), &perm);
        // copy 1 on coords 0..p+q gets the first q angles
        let c1 = CsgElement::new(CsgKind::Cs { p, q }, p + q, vec![0.1, 0.2]);
        let c2 = CsgElement::new(CsgKind::Cs { p, q }, p + q, vec![0.3, 0.4]);
        let expect = c1.materialize().dsum(&c2.materialize());
        assert!(emb.residual(&expect) < 1e-14);
    }

    #[test]
    fn pq_swap_conjugates_kpq() {
        let (p, q) = (1, 3);
        let perm = pq_swap(p, q);
        let k = DenseMatrix::kpq(p, q);
        let swapped = conjugate_by_perm(&k, &perm);
        assert!(swapped.residual(&DenseMatrix::kpq(q, p).neg()) < 1e-15);
    }
}
