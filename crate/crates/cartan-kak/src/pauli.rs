//! Pauli words in the symplectic bitstring encoding, DLA closure, the
//! even/odd-commutator Cartan split, frustration graphs, Jordan-Wigner
//! Majoranas, and the rook-graph embedding that places a free-fermionic
//! Hamiltonian into the canonical BDI horizontal space.

use crate::densela::{C64, DenseMatrix};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum PauliError {
    #[error("qubit counts differ: {0} vs {1}")]
    MixedSizes(usize, usize),
    #[error("DLA closure exceeded the cap of {0} words")]
    ClosureTooLarge(usize),
    #[error("generating set is not minimal: {word} reachable at both parities")]
    NotDisjoint { word: String },
    #[error("word is not a product of two Majoranas: {0}")]
    NotQuadratic(String),
    #[error("frustration graph does not embed into the {p}x{q} rook graph")]
    NotEmbeddable { p: usize, q: usize },
    #[error("embedding search exceeded the node budget of {0}")]
    Budget(u64),
    #[error("{0}")]
    Bad(String),
}

type Result<T> = std::result::Result<T, PauliError>;

/// A Pauli word i^{phase} · Π_q X_q^{x_q} Z_q^{z_q}. Canonical (Hermitian)
/// words keep phase = |x ∧ z| mod 2, making the operator self-adjoint.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8, // power of i, mod 4
}

fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

fn parity_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum::<u32>() & 1
}

fn count_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum::<u32>()
}

impl PauliWord {
    pub fn identity(n: usize) -> Self {
        Self { n, x: vec![0; words_for(n)], z: vec![0; words_for(n)], phase: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn phase_power(&self) -> u8 {
        self.phase
    }

    pub fn set_x(&mut self, q: usize, v: bool) {
        let (w, b) = (q / 64, q % 64);
        if v {
            self.x[w] |= 1 << b;
        } else {
            self.x[w] &= !(1 << b);
        }
    }

    pub fn set_z(&mut self, q: usize, v: bool) {
        let (w, b) = (q / 64, q % 64);
        if v {
            self.z[w] |= 1 << b;
        } else {
            self.z[w] &= !(1 << b);
        }
    }

    pub fn x_bit(&self, q: usize) -> bool {
        (self.x[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        (self.z[q / 64] >> (q % 64)) & 1 == 1
    }

    pub fn is_identity_word(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        (0..self.n).filter(|&q| self.letter(q) != 'I').count()
    }

    /// Letter (I, X, Y, Z) at qubit q.
    pub fn letter(&self, q: usize) -> char {
        match (self.x_bit(q), self.z_bit(q)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (false, true) => 'Z',
            (true, true) => 'Y',
        }
    }

    /// Parse e.g. "XZY" or "-iXZY"; letters over {I, X, Y, Z}.
    pub fn parse(s: &str) -> Result<Self> {
        let mut phase = 0u8;
        let mut rest = s.trim();
        loop {
            if let Some(r) = rest.strip_prefix('+') {
                rest = r;
            } else if let Some(r) = rest.strip_prefix('-') {
                phase = (phase + 2) % 4;
                rest = r;
            } else if let Some(r) = rest.strip_prefix('i') {
                phase = (phase + 1) % 4;
                rest = r;
            } else {
                break;
            }
        }
        let n = rest.len();
        let mut w = Self::identity(n);
        for (q, ch) in rest.chars().enumerate() {
            match ch {
                'I' => {}
                'X' => w.set_x(q, true),
                'Z' => w.set_z(q, true),
                'Y' => {
                    w.set_x(q, true);
                    w.set_z(q, true);
                    phase = (phase + 1) % 4; // Y = i·XZ
                }
                other => return Err(PauliError::Bad(format!("bad Pauli letter {other}"))),
            }
        }
        w.phase = phase;
        Ok(w)
    }

    /// The canonical Hermitian representative with the same bits: the
    /// natural product of per-site letters, i.e. i-power #Y mod 4.
    pub fn hermitian_canonical(&self) -> Self {
        let mut out = self.clone();
        out.phase = (count_and(&self.x, &self.z) % 4) as u8;
        out
    }

    /// True iff the words commute (symplectic form even).
    pub fn commutes_with(&self, other: &Self) -> bool {
        (parity_and(&self.x, &other.z) + parity_and(&other.x, &self.z)) & 1 == 0
    }

    /// Operator product with tracked i-power.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(PauliError::MixedSizes(self.n, other.n));
        }
        let mut out = Self::identity(self.n);
        for i in 0..self.x.len() {
            out.x[i] = self.x[i] ^ other.x[i];
            out.z[i] = self.z[i] ^ other.z[i];
        }
        // Z^{z1} X^{x2} = (-1)^{z1·x2} X^{x2} Z^{z1}
        let swap_parity = parity_and(&self.z, &other.x) as u8;
        out.phase = (self.phase + other.phase + 2 * swap_parity) % 4;
        Ok(out)
    }

    /// Dense 2^n matrix; qubit 0 is the most significant bit.
    pub fn materialize(&self) -> DenseMatrix {
        assert!(self.n <= 12, "dense Pauli materialization capped at 12 qubits");
        let dim = 1usize << self.n;
        let mut m = DenseMatrix::zeros_complex(dim, dim);
        let phase = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, -1.0),
        ][self.phase as usize];
        for col in 0..dim {
            let mut row = col;
            let mut sign = 1.0f64;
            for q in 0..self.n {
                let bit = (col >> (self.n - 1 - q)) & 1;
                if self.z_bit(q) && bit == 1 {
                    sign = -sign;
                }
                if self.x_bit(q) {
                    row ^= 1 << (self.n - 1 - q);
                }
            }
            m.set(row, col, phase * sign);
        }
        m
    }

    fn key(&self) -> (Vec<u64>, Vec<u64>) {
        (self.x.clone(), self.z.clone())
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let canon_phase = (count_and(&self.x, &self.z) % 4) as u8;
        let lead = (4 + self.phase - canon_phase) % 4;
        match lead {
            1 => write!(f, "i")?,
            2 => write!(f, "-")?,
            3 => write!(f, "-i")?,
            _ => {}
        }
        for q in 0..self.n {
            write!(f, "{}", self.letter(q))?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// [iP, iQ] = 2·sign·i·R for anticommuting canonical words; None when they
/// commute.
pub fn bracket(p: &PauliWord, q: &PauliWord) -> Result<Option<(PauliWord, f64)>> {
    if p.n != q.n {
        return Err(PauliError::MixedSizes(p.n, q.n));
    }
    if p.commutes_with(q) {
        return Ok(None);
    }
    let raw = p.hermitian_canonical().mul(&q.hermitian_canonical())?;
    let canon = raw.hermitian_canonical();
    // [iP, iQ] = -2·P·Q = -2·i^{k}·R with k = raw - canon phase; presenting
    // it as 2·sign·i·R forces k odd and sign = -i^{k-1}
    let k = (4 + raw.phase - canon.phase) % 4;
    let sign = match k {
        1 => -1.0,
        3 => 1.0,
        _ => return Err(PauliError::Bad("bracket phase inconsistency".into())),
    };
    Ok(Some((canon, sign)))
}

/// A real-linear combination of Pauli words in text form.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PauliSentence {
    pub terms: Vec<PauliTerm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PauliTerm {
    pub pauli: String,
    pub coeff: f64,
}

impl PauliSentence {
    pub fn words(&self) -> Result<Vec<(PauliWord, f64)>> {
        self.terms
            .iter()
            .map(|t| PauliWord::parse(&t.pauli).map(|w| (w.hermitian_canonical(), t.coeff)))
            .collect()
    }
}

/// Fixed-point Lie closure of a set of Pauli words; Pauli DLAs close as
/// word sets. Output sorted lexicographically on the bitstrings.
pub fn dla_closure(generators: &[PauliWord], cap: usize) -> Result<Vec<PauliWord>> {
    let mut seen: BTreeSet<(Vec<u64>, Vec<u64>)> = BTreeSet::new();
    let mut order: Vec<PauliWord> = Vec::new();
    let mut next = 0usize;
    for g in generators {
        let c = g.hermitian_canonical();
        if !c.is_identity_word() && seen.insert(c.key()) {
            order.push(c);
        }
    }
    while next < order.len() {
        let w = order[next].clone();
        next += 1;
        let mut fresh = Vec::new();
        for other in &order {
            if let Some((r, _)) = bracket(&w, other)? {
                if !seen.contains(&r.key()) && !fresh.iter().any(|f: &PauliWord| f.key() == r.key())
                {
                    fresh.push(r);
                }
            }
        }
        for r in fresh {
            if seen.insert(r.key()) {
                order.push(r);
                if order.len() > cap {
                    return Err(PauliError::ClosureTooLarge(cap));
                }
            }
        }
    }
    order.sort();
    Ok(order)
}

/// Split the DLA of a minimal generating set by commutator parity:
/// even-order words into p, odd-order into k. A word reachable at both
/// parities means the set was not minimal.
pub fn even_odd_cd(generators: &[PauliWord]) -> Result<(Vec<PauliWord>, Vec<PauliWord>)> {
    let gens: Vec<PauliWord> = generators.iter().map(|g| g.hermitian_canonical()).collect();
    let mut parity: BTreeMap<(Vec<u64>, Vec<u64>), (u8, PauliWord)> = BTreeMap::new();
    let mut queue: VecDeque<PauliWord> = VecDeque::new();
    for g in &gens {
        if g.is_identity_word() {
            continue;
        }
        parity.insert(g.key(), (0, g.clone()));
        queue.push_back(g.clone());
    }
    while let Some(w) = queue.pop_front() {
        let wp = parity.get(&w.key()).expect("queued word has parity").0;
        for g in &gens {
            if let Some((r, _)) = bracket(g, &w)? {
                let rp = (wp + 1) & 1;
                match parity.get(&r.key()) {
                    None => {
                        parity.insert(r.key(), (rp, r.clone()));
                        queue.push_back(r);
                    }
                    Some((old, _)) if *old != rp => {
                        return Err(PauliError::NotDisjoint { word: format!("{r}") });
                    }
                    _ => {}
                }
            }
        }
    }
    let mut k = Vec::new();
    let mut p = Vec::new();
    for (_, (par, w)) in parity {
        if par == 0 { p.push(w) } else { k.push(w) }
    }
    k.sort();
    p.sort();
    Ok((k, p))
}

/// Adjacency on anticommutation; symmetric, no self-loops.
#[derive(Clone, Debug)]
pub struct FrustrationGraph {
    pub vertices: Vec<PauliWord>,
    adj: Vec<Vec<u64>>,
}

impl FrustrationGraph {
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        (self.adj[i][j / 64] >> (j % 64)) & 1 == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.len()).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Connected with all degrees ≤ 2 and exactly two endpoints (or a
    /// single vertex): a path graph.
    pub fn is_path(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        if n == 1 {
            return true;
        }
        let mut ends = 0;
        for i in 0..n {
            match self.degree(i) {
                1 => ends += 1,
                2 => {}
                _ => return false,
            }
        }
        if ends != 2 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if !seen[u] && self.adjacent(v, u) {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }
}

pub fn frustration_graph(words: &[PauliWord]) -> FrustrationGraph {
    let n = words.len();
    let stride = words_for(n.max(1));
    let mut adj = vec![vec![0u64; stride]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if !words[i].commutes_with(&words[j]) {
                adj[i][j / 64] |= 1 << (j % 64);
                adj[j][i / 64] |= 1 << (i % 64);
            }
        }
    }
    FrustrationGraph { vertices: words.to_vec(), adj }
}

/// The Jordan-Wigner Majorana set, 0-based: c_μ = Z^{⊗μ} Y I… for μ < n and
/// c_{n+μ} = Z^{⊗μ} X I…; pairwise anticommuting, each squares to identity.
pub fn jw_majoranas(n: usize) -> Vec<PauliWord> {
    let mut out = Vec::with_capacity(2 * n);
    for mu in 0..n {
        let mut w = PauliWord::identity(n);
        for q in 0..mu {
            w.set_z(q, true);
        }
        w.set_x(mu, true);
        w.set_z(mu, true);
        out.push(w.hermitian_canonical());
    }
    for mu in 0..n {
        let mut w = PauliWord::identity(n);
        for q in 0..mu {
            w.set_z(q, true);
        }
        w.set_x(mu, true);
        out.push(w.hermitian_canonical());
    }
    out
}

/// Recognize i·word = sign · c_μ c_ν under the identity Jordan-Wigner
/// ordering (0-based, μ < ν).
pub fn majorana_indices(word: &PauliWord, n: usize) -> Result<(usize, usize, f64)> {
    let w = word.hermitian_canonical();
    if w.n != n {
        return Err(PauliError::MixedSizes(w.n, n));
    }
    let support: Vec<usize> = (0..n).filter(|&q| w.letter(q) != 'I').collect();
    if support.is_empty() {
        return Err(PauliError::NotQuadratic(format!("{w}")));
    }
    let first = support[0];
    let last = *support.last().unwrap();
    let (mu, nu);
    if first == last {
        if w.letter(first) != 'Z' {
            return Err(PauliError::NotQuadratic(format!("{w}")));
        }
        mu = first;
        nu = n + first;
    } else {
        if support.len() != last - first + 1 {
            return Err(PauliError::NotQuadratic(format!("{w}")));
        }
        for &q in &support[1..support.len() - 1] {
            if w.letter(q) != 'Z' {
                return Err(PauliError::NotQuadratic(format!("{w}")));
            }
        }
        (mu, nu) = match (w.letter(first), w.letter(last)) {
            ('X', 'Y') => (first, last),
            ('X', 'X') => (first, n + last),
            ('Y', 'Y') => (last, n + first),
            ('Y', 'X') => (n + first, n + last),
            _ => return Err(PauliError::NotQuadratic(format!("{w}"))),
        };
    }
    let (mu, nu) = if mu <= nu { (mu, nu) } else { (nu, mu) };
    let majos = jw_majoranas(n);
    let prod = majos[mu].mul(&majos[nu])?;
    let canon = prod.hermitian_canonical();
    if canon.key() != w.key() {
        return Err(PauliError::NotQuadratic(format!("{w}")));
    }
    // i·w = i^{1+cw}·H, product = i^{kp}·H ⇒ sign = i^{1+cw-kp} ∈ {±1}
    let k = (4 + 1 + canon.phase - prod.phase) % 4;
    let sign = match k {
        0 => 1.0,
        2 => -1.0,
        _ => return Err(PauliError::Bad("majorana phase inconsistency".into())),
    };
    Ok((mu, nu, sign))
}

/// ρ(i·word) = factor · (E_{μν} - E_{νμ}) after the slot permutation;
/// factor = ±2.
pub fn rho_forward(word: &PauliWord, perm: &[usize], n: usize) -> Result<(usize, usize, f64)> {
    let (mu0, nu0, mut sign) = majorana_indices(word, n)?;
    let (mut mu, mut nu) = (perm[mu0], perm[nu0]);
    if mu > nu {
        std::mem::swap(&mut mu, &mut nu);
        sign = -sign;
    }
    Ok((mu, nu, 2.0 * sign))
}

/// Inverse of `rho_forward`: the word and ±2 factor at slot (μ, ν), μ < ν,
/// so that ρ(i·word) = factor · (E_{μν} - E_{νμ}).
pub fn rho_inverse(mu: usize, nu: usize, perm: &[usize], n: usize) -> Result<(PauliWord, f64)> {
    let mut inv = vec![0usize; 2 * n];
    for (a, &b) in perm.iter().enumerate() {
        inv[b] = a;
    }
    let (mut a, mut b) = (inv[mu], inv[nu]);
    let mut flip = 1.0;
    if a > b {
        std::mem::swap(&mut a, &mut b);
        flip = -1.0;
    }
    let majos = jw_majoranas(n);
    let prod = majos[a].mul(&majos[b])?;
    let canon = prod.hermitian_canonical();
    let k = (4 + 1 + canon.phase - prod.phase) % 4;
    let sign = match k {
        0 => 1.0,
        2 => -1.0,
        _ => return Err(PauliError::Bad("majorana phase inconsistency".into())),
    };
    Ok((canon, 2.0 * sign * flip))
}

// ---- horizontal placement ------------------------------------------------

/// Find a permutation π of the 2n Majorana slots so that every term (μ, ν)
/// lands row-side/column-side of the canonical BDI(p, q) split: π maps one
/// index below p and the other at or above p. The term frustration graph is
/// embedded into the p×q rook graph by backtracking (degree-descending
/// order, fresh-row/column canonicalization), then the three row/column
/// assignment passes fix the Majorana slots; leftovers fill ascending.
pub fn horizontal_order(
    terms: &[(usize, usize)],
    p: usize,
    q: usize,
    n_slots: usize,
    budget: u64,
) -> Result<Vec<usize>> {
    if terms.is_empty() {
        return Ok((0..n_slots).collect());
    }
    let mut uniq: Vec<(usize, usize)> = Vec::new();
    let mut seen = BTreeSet::new();
    for &(a, b) in terms {
        let t = if a <= b { (a, b) } else { (b, a) };
        if seen.insert(t) {
            uniq.push(t);
        }
    }
    let m = uniq.len();
    let shared = |a: (usize, usize), b: (usize, usize)| -> usize {
        (a.0 == b.0) as usize + (a.0 == b.1) as usize + (a.1 == b.0) as usize + (a.1 == b.1) as usize
    };
    let mut adj = vec![vec![false; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            if shared(uniq[i], uniq[j]) == 1 {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }

    // connectivity-aware vertex order: highest degree first, then prefer
    // vertices adjacent to the placed prefix (keeps candidates constrained)
    let deg: Vec<usize> = (0..m).map(|i| adj[i].iter().filter(|&&b| b).count()).collect();
    let mut order: Vec<usize> = Vec::with_capacity(m);
    let mut in_order = vec![false; m];
    while order.len() < m {
        let mut best: Option<usize> = None;
        for v in 0..m {
            if in_order[v] {
                continue;
            }
            let attached = order.iter().any(|&u| adj[u][v]);
            let key = (attached, deg[v], std::cmp::Reverse(v));
            let better = match best {
                None => true,
                Some(b) => {
                    let bk = (order.iter().any(|&u| adj[u][b]), deg[b], std::cmp::Reverse(b));
                    key > bk
                }
            };
            if better {
                best = Some(v);
            }
        }
        let v = best.unwrap();
        in_order[v] = true;
        order.push(v);
    }

    let mut cell: Vec<Option<(usize, usize)>> = vec![None; m];
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut expansions: u64 = 0;
    let found = embed(&order, &adj, p, q, 0, &mut cell, &mut used, &mut expansions, budget)?;
    if !found {
        return Err(PauliError::NotEmbeddable { p, q });
    }

    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); p];
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); q];
    for (t, c) in cell.iter().enumerate() {
        let (r, ccol) = c.expect("complete embedding");
        by_row[r].push(t);
        by_col[ccol].push(t);
    }
    let mut row_major: Vec<Option<usize>> = vec![None; p];
    let mut col_major: Vec<Option<usize>> = vec![None; q];
    let mut assigned: BTreeSet<usize> = BTreeSet::new();
    let common = |ts: &[usize]| -> Option<usize> {
        if ts.len() < 2 {
            return None;
        }
        let first = uniq[ts[0]];
        for cand in [first.0, first.1] {
            if ts.iter().all(|&t| uniq[t].0 == cand || uniq[t].1 == cand) {
                return Some(cand);
            }
        }
        None
    };
    // pass 1: rows/columns with two or more occupied cells own the shared
    // Majorana
    for r in 0..p {
        if let Some(c) = common(&by_row[r]) {
            row_major[r] = Some(c);
            assigned.insert(c);
        }
    }
    for c in 0..q {
        if let Some(v) = common(&by_col[c]) {
            col_major[c] = Some(v);
            assigned.insert(v);
        }
    }
    // pass 2: singly-occupied lines where one factor is already assigned
    for r in 0..p {
        if row_major[r].is_none() && by_row[r].len() == 1 {
            let (a, b) = uniq[by_row[r][0]];
            if assigned.contains(&a) && !assigned.contains(&b) {
                row_major[r] = Some(b);
                assigned.insert(b);
            } else if assigned.contains(&b) && !assigned.contains(&a) {
                row_major[r] = Some(a);
                assigned.insert(a);
            }
        }
    }
    for c in 0..q {
        if col_major[c].is_none() && by_col[c].len() == 1 {
            let (a, b) = uniq[by_col[c][0]];
            if assigned.contains(&a) && !assigned.contains(&b) {
                col_major[c] = Some(b);
                assigned.insert(b);
            } else if assigned.contains(&b) && !assigned.contains(&a) {
                col_major[c] = Some(a);
                assigned.insert(a);
            }
        }
    }
    // pass 3: remaining singletons, first factor to the row, second to the
    // column
    for r in 0..p {
        if row_major[r].is_none() && by_row[r].len() == 1 {
            let (a, _) = uniq[by_row[r][0]];
            if !assigned.contains(&a) {
                row_major[r] = Some(a);
                assigned.insert(a);
            }
        }
    }
    for c in 0..q {
        if col_major[c].is_none() && by_col[c].len() == 1 {
            let (_, b) = uniq[by_col[c][0]];
            if !assigned.contains(&b) {
                col_major[c] = Some(b);
                assigned.insert(b);
            }
        }
    }

    let mut perm = vec![usize::MAX; n_slots];
    for (r, mj) in row_major.iter().enumerate() {
        if let Some(mj) = mj {
            perm[*mj] = r;
        }
    }
    for (c, mj) in col_major.iter().enumerate() {
        if let Some(mj) = mj {
            perm[*mj] = p + c;
        }
    }
    let taken: BTreeSet<usize> = perm.iter().copied().filter(|&v| v != usize::MAX).collect();
    let mut free_slots: VecDeque<usize> = (0..n_slots).filter(|s| !taken.contains(s)).collect();
    for v in perm.iter_mut() {
        if *v == usize::MAX {
            *v = free_slots.pop_front().expect("slot bookkeeping");
        }
    }
    for &(a, b) in &uniq {
        let (ra, rb) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
        if !(ra < p && rb >= p) {
            return Err(PauliError::NotEmbeddable { p, q });
        }
    }
    Ok(perm)
}

#[allow(clippy::too_many_arguments)]
fn embed(
    order: &[usize],
    adj: &[Vec<bool>],
    p: usize,
    q: usize,
    depth: usize,
    cell: &mut Vec<Option<(usize, usize)>>,
    used: &mut BTreeSet<(usize, usize)>,
    expansions: &mut u64,
    budget: u64,
) -> Result<bool> {
    if depth == order.len() {
        return Ok(true);
    }
    let t = order[depth];
    let placed: Vec<usize> = order[..depth].to_vec();
    let used_rows: BTreeSet<usize> = used.iter().map(|&(r, _)| r).collect();
    let used_cols: BTreeSet<usize> = used.iter().map(|&(_, c)| c).collect();
    let fresh_row = (0..p).find(|r| !used_rows.contains(r));
    let fresh_col = (0..q).find(|c| !used_cols.contains(c));

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    if depth == 0 {
        candidates.push((0, 0));
    } else {
        // rook adjacency: candidates share a row or column with a placed
        // neighbor, or open a canonical fresh row and column
        let neighbor_rows: BTreeSet<usize> = placed
            .iter()
            .filter(|&&s| adj[t][s])
            .map(|&s| cell[s].unwrap().0)
            .collect();
        let neighbor_cols: BTreeSet<usize> = placed
            .iter()
            .filter(|&&s| adj[t][s])
            .map(|&s| cell[s].unwrap().1)
            .collect();
        let mut row_opts: Vec<usize> = neighbor_rows.into_iter().collect();
        if let Some(r) = fresh_row {
            row_opts.push(r);
        }
        let mut col_opts: Vec<usize> = neighbor_cols.into_iter().collect();
        if let Some(c) = fresh_col {
            col_opts.push(c);
        }
        for &r in &row_opts {
            for &c in &col_opts {
                candidates.push((r, c));
            }
        }
    }

    'cand: for cand in candidates {
        if used.contains(&cand) {
            continue;
        }
        *expansions += 1;
        if *expansions > budget {
            return Err(PauliError::Budget(budget));
        }
        for &s in &placed {
            let (sr, sc) = cell[s].unwrap();
            let touches = sr == cand.0 || sc == cand.1;
            if touches != adj[t][s] {
                continue 'cand;
            }
        }
        cell[t] = Some(cand);
        used.insert(cand);
        if embed(order, adj, p, q, depth + 1, cell, used, expansions, budget)? {
            return Ok(true);
        }
        cell[t] = None;
        used.remove(&cand);
    }
    Ok(false)
}
