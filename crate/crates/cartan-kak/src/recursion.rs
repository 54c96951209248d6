//! Recursive decomposition plans and the engine that executes them:
//! parameter-optimal chains, repeated canonical BDI, QSD/Block-ZXZ style
//! AIII+A alternation, and the completely orthogonal/symplectic recursions.

use crate::densela::{C64, CsgElement, CsgKind, DenseMatrix, scaled_tol};
use crate::involution::{InvolutionType, space_info};
use crate::kak::{KakError, KakFactors, kak_decompose};
use crate::rep;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum RecursionError {
    #[error("bad plan parameters: {0}")]
    BadParams(String),
    #[error("decomposition failed at node {path}: {source}")]
    AtNode {
        path: String,
        #[source]
        source: KakError,
    },
}

type Result<T> = std::result::Result<T, RecursionError>;

/// How the children of a node extract their carriers from its K factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChildRep {
    /// No conversion: the child consumes the whole K factor.
    Whole,
    /// The two diagonal blocks of a (p, q) split.
    BlockDiag,
    /// Demote a complex K factor with negligible imaginary part to real.
    RealDemote,
    /// φ×⁻¹: a real orthogonal-symplectic K factor becomes a complex
    /// unitary of half the dimension.
    PhiTimes,
    /// The Sp(p)⊕Sp(q) pair of a CII K factor assembled on its gathered
    /// (P₁P₂|Q₁Q₂) coordinates, consumed whole by a type-C step.
    CiiPair,
    /// The repeated block of a doubled-type K factor (A/BD/C).
    DoubledHalf,
}

/// The CSA basis recorded for circuit emission; the matrix factors always
/// stay in the canonical CSG form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsaBasis {
    Canonical,
    /// Block-ZXZ: X-axis cosine-sine planes on the split qubit.
    XAxis,
    /// Completely orthogonal/symplectic: the Rx(π/2)-rotated pair basis of
    /// the Schur planes.
    VPairs,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanNode {
    pub ty: InvolutionType,
    /// Carrier dimension of the group element this node decomposes.
    pub dim: usize,
    /// Which classical group the carrier element belongs to at this stage.
    pub group: GroupKind,
    pub csa: CsaBasis,
    pub child_rep: ChildRep,
    /// Plans for the sub-blocks of each K factor (one per extracted block).
    pub children: Vec<PlanNode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    Unitary,
    SpecialOrthogonal,
    Symplectic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Plan {
    pub group: GroupKind,
    pub dim: usize,
    pub root: Option<PlanNode>,
    pub name: String,
}

/// A decomposed node: the factor triple with recursively decomposed (or
/// leaf) K branches.
#[derive(Clone, Debug)]
pub struct FactorTree {
    pub ty: InvolutionType,
    pub a: CsgElement,
    pub global_phase: C64,
    pub csa: CsaBasis,
    pub k1: Vec<KBranch>,
    pub k2: Vec<KBranch>,
    /// Coordinate lists embedding each K-branch carrier into this node's
    /// carrier; parallel to `k1`/`k2`.
    pub coords: Vec<Vec<usize>>,
    /// How the branch carriers map back into this node's coordinates.
    pub child_rep: ChildRep,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub enum KBranch {
    Leaf(DenseMatrix),
    Node(Box<FactorTree>),
}

// ---- plan templates ---------------------------------------------------------

/// Repeated canonical BDI with |p - q| ≤ 1 down to blocks of dimension ≤ 2.
pub fn canonical_bdi(dim: usize) -> Plan {
    Plan {
        group: GroupKind::SpecialOrthogonal,
        dim,
        root: bdi_node(dim),
        name: format!("canonical_bdi({dim})"),
    }
}

fn bdi_node(d: usize) -> Option<PlanNode> {
    if d <= 2 {
        return None;
    }
    let p = d / 2 + d % 2;
    let q = d / 2;
    let children: Vec<PlanNode> = [p, q].iter().filter_map(|&b| bdi_node(b)).collect();
    // children must line up with blocks positionally: pad with explicit
    // leaves by keeping an entry per block
    let mut kids = Vec::new();
    for &b in [p, q].iter() {
        match bdi_node(b) {
            Some(nodep) => kids.push(nodep),
            None => kids.push(PlanNode {
                ty: InvolutionType::Trivial,
                dim: b,
                group: GroupKind::SpecialOrthogonal,
                csa: CsaBasis::Canonical,
                child_rep: ChildRep::Whole,
                children: vec![],
            }),
        }
    }
    let _ = children;
    Some(PlanNode {
        ty: InvolutionType::BDI { p, q },
        dim: d,
        group: GroupKind::SpecialOrthogonal,
        csa: CsaBasis::Canonical,
        child_rep: ChildRep::BlockDiag,
        children: kids,
    })
}

/// The parameter-optimal chain: Sp(n) → CI → U(n) → AI → SO(n) → BDI…,
/// entered at the group's own stage.
pub fn param_optimal(group: GroupKind, n: usize) -> Plan {
    let (root, dim) = match group {
        GroupKind::Symplectic => (
            Some(PlanNode {
                ty: InvolutionType::CI,
                dim: 2 * n,
                group: GroupKind::Symplectic,
                csa: CsaBasis::Canonical,
                child_rep: ChildRep::PhiTimes,
                children: vec![ai_chain_node(n)],
            }),
            2 * n,
        ),
        GroupKind::Unitary => (Some(ai_chain_node(n)), n),
        GroupKind::SpecialOrthogonal => (bdi_node(n), n),
    };
    Plan { group, dim, root, name: format!("param_optimal({group:?},{n})") }
}

fn ai_chain_node(n: usize) -> PlanNode {
    let child = bdi_node(n).unwrap_or(PlanNode {
        ty: InvolutionType::Trivial,
        dim: n,
        group: GroupKind::SpecialOrthogonal,
        csa: CsaBasis::Canonical,
        child_rep: ChildRep::Whole,
        children: vec![],
    });
    PlanNode {
        ty: InvolutionType::AI,
        dim: n,
        group: GroupKind::Unitary,
        csa: CsaBasis::Canonical,
        child_rep: ChildRep::RealDemote,
        children: vec![child],
    }
}

/// Quantum Shannon recursion: AIII(2^{N-1}, 2^{N-1}) alternating with type A
/// demultiplexing, down to single-qubit blocks. `x_axis` records the
/// Block-ZXZ cosine-sine basis.
pub fn qsd(n_qubits: usize, x_axis: bool) -> Plan {
    let dim = 1usize << n_qubits;
    Plan {
        group: GroupKind::Unitary,
        dim,
        root: qsd_node(n_qubits, x_axis),
        name: if x_axis { format!("block_zxz({n_qubits})") } else { format!("qsd({n_qubits})") },
    }
}

fn qsd_node(n_qubits: usize, x_axis: bool) -> Option<PlanNode> {
    if n_qubits <= 1 {
        return None;
    }
    let h = 1usize << (n_qubits - 1);
    let a_child = PlanNode {
        ty: InvolutionType::A,
        dim: 2 * h,
        group: GroupKind::Unitary,
        csa: CsaBasis::Canonical,
        child_rep: ChildRep::DoubledHalf,
        children: vec![qsd_node(n_qubits - 1, x_axis).unwrap_or(PlanNode {
            ty: InvolutionType::Trivial,
            dim: h,
            group: GroupKind::Unitary,
            csa: CsaBasis::Canonical,
            child_rep: ChildRep::Whole,
            children: vec![],
        })],
    };
    Some(PlanNode {
        ty: InvolutionType::AIII { p: h, q: h },
        dim: 2 * h,
        group: GroupKind::Unitary,
        csa: if x_axis { CsaBasis::XAxis } else { CsaBasis::Canonical },
        child_rep: ChildRep::Whole,
        children: vec![a_child],
    })
}

/// Completely orthogonal decomposition: AI, then alternating BDI and BD.
pub fn completely_orthogonal(n_qubits: usize) -> Plan {
    let dim = 1usize << n_qubits;
    Plan {
        group: GroupKind::Unitary,
        dim,
        root: Some(PlanNode {
            ty: InvolutionType::AI,
            dim,
            group: GroupKind::Unitary,
            csa: CsaBasis::Canonical,
            child_rep: ChildRep::RealDemote,
            children: vec![cod_so_node(dim)],
        }),
        name: format!("completely_orthogonal({n_qubits})"),
    }
}

fn cod_so_node(d: usize) -> PlanNode {
    if d <= 2 {
        return PlanNode {
            ty: InvolutionType::Trivial,
            dim: d,
            group: GroupKind::SpecialOrthogonal,
            csa: CsaBasis::Canonical,
            child_rep: ChildRep::Whole,
            children: vec![],
        };
    }
    let h = d / 2;
    // BDI splits SO(d) into SO(h)×SO(h); the BD child consumes the pair
    let bd_child = PlanNode {
        ty: InvolutionType::BD,
        dim: d,
        group: GroupKind::SpecialOrthogonal,
        csa: CsaBasis::VPairs,
        child_rep: ChildRep::DoubledHalf,
        children: vec![cod_so_node(h)],
    };
    PlanNode {
        ty: InvolutionType::BDI { p: h, q: h },
        dim: d,
        group: GroupKind::SpecialOrthogonal,
        csa: CsaBasis::Canonical,
        child_rep: ChildRep::Whole,
        children: vec![bd_child],
    }
}

/// Completely symplectic decomposition: AII, then alternating CII and C with
/// canonical K_{p,q} involutions at every level.
pub fn completely_symplectic(n_qubits: usize) -> Plan {
    let dim = 1usize << n_qubits;
    Plan {
        group: GroupKind::Unitary,
        dim,
        root: Some(PlanNode {
            ty: InvolutionType::AII,
            dim,
            group: GroupKind::Unitary,
            csa: CsaBasis::Canonical,
            child_rep: ChildRep::Whole,
            children: vec![csd_sp_node(dim / 2)],
        }),
        name: format!("completely_symplectic({n_qubits})"),
    }
}

fn csd_sp_node(n: usize) -> PlanNode {
    // node acts on Sp(n) with carrier 2n
    if n <= 1 {
        return PlanNode {
            ty: InvolutionType::Trivial,
            dim: 2 * n,
            group: GroupKind::Symplectic,
            csa: CsaBasis::Canonical,
            child_rep: ChildRep::Whole,
            children: vec![],
        };
    }
    let h = n / 2;
    let p_big = n - h;
    let c_child = PlanNode {
        ty: InvolutionType::C,
        dim: 4 * h,
        group: GroupKind::Symplectic,
        csa: CsaBasis::VPairs,
        child_rep: ChildRep::DoubledHalf,
        children: vec![csd_sp_node(h)],
    };
    PlanNode {
        ty: InvolutionType::CII { p: p_big, q: h },
        dim: 2 * n,
        group: GroupKind::Symplectic,
        csa: CsaBasis::Canonical,
        child_rep: ChildRep::CiiPair,
        children: vec![c_child],
    }
}

/// Named plan templates.
pub fn build_plan(template: &str, n: usize) -> Result<Plan> {
    match template {
        "param_optimal_u" => Ok(param_optimal(GroupKind::Unitary, n)),
        "param_optimal_so" => Ok(param_optimal(GroupKind::SpecialOrthogonal, n)),
        "param_optimal_sp" => Ok(param_optimal(GroupKind::Symplectic, n)),
        "canonical_bdi" => Ok(canonical_bdi(n)),
        "qsd" => Ok(qsd(n, false)),
        "block_zxz" => Ok(qsd(n, true)),
        "completely_orthogonal" => Ok(completely_orthogonal(n)),
        "completely_symplectic" => Ok(completely_symplectic(n)),
        other => Err(RecursionError::BadParams(format!("unknown template {other}"))),
    }
}

// ---- the engine --------------------------------------------------------------

/// Recursively decompose `g` following `plan`. Deterministic; sibling
/// sub-decompositions are data-independent and can fan out across threads.
pub fn recursive_decompose(g: &DenseMatrix, plan: &Plan, tol: f64) -> Result<FactorTree> {
    recursive_decompose_threaded(g, plan, tol, 1)
}

pub fn recursive_decompose_threaded(
    g: &DenseMatrix,
    plan: &Plan,
    tol: f64,
    threads: usize,
) -> Result<FactorTree> {
    match plan.root.as_ref() {
        Some(node) => decompose_node(g, node, tol, "root", threads),
        // blocks at or below the leaf size pass through whole
        None => {
            let leaf = PlanNode {
                ty: InvolutionType::Trivial,
                dim: g.rows(),
                group: plan.group,
                csa: CsaBasis::Canonical,
                child_rep: ChildRep::Whole,
                children: vec![],
            };
            Ok(trivial_tree(g, &leaf))
        }
    }
}

fn trivial_tree(g: &DenseMatrix, node: &PlanNode) -> FactorTree {
    FactorTree {
        ty: InvolutionType::Trivial,
        a: CsgElement::identity(CsgKind::UDiag, 0),
        global_phase: C64::new(1.0, 0.0),
        csa: node.csa,
        k1: vec![KBranch::Leaf(g.clone())],
        k2: vec![],
        coords: vec![(0..g.rows()).collect()],
        child_rep: ChildRep::Whole,
        dim: g.rows(),
    }
}

fn decompose_node(
    g: &DenseMatrix,
    node: &PlanNode,
    tol: f64,
    path: &str,
    threads: usize,
) -> Result<FactorTree> {
    if matches!(node.ty, InvolutionType::Trivial) {
        return Ok(trivial_tree(g, node));
    }
    let mut f = kak_decompose(g, node.ty, tol)
        .map_err(|e| RecursionError::AtNode { path: path.into(), source: e })?;
    if node.csa == CsaBasis::XAxis {
        apply_x_axis_twist(&mut f);
    }
    let (blocks1, blocks2, coords) = extract_blocks(&f, node)?;

    let make_branch = |mats: Vec<DenseMatrix>,
                       which: &str,
                       threads: usize|
     -> Result<Vec<KBranch>> {
        let jobs: Vec<(usize, &PlanNode, DenseMatrix)> = mats
            .into_iter()
            .enumerate()
            .map(|(i, m)| (i, &node.children[i.min(node.children.len() - 1)], m))
            .collect();
        let run = |(i, child, m): (usize, &PlanNode, DenseMatrix)| -> Result<KBranch> {
            if matches!(child.ty, InvolutionType::Trivial) {
                return Ok(KBranch::Leaf(m));
            }
            let sub_path = format!("{path}.{which}{i}");
            Ok(KBranch::Node(Box::new(decompose_node(&m, child, tol, &sub_path, 1)?)))
        };
        if threads > 1 && jobs.len() > 1 {
            std::thread::scope(|scope| {
                let handles: Vec<_> = jobs
                    .into_iter()
                    .map(|job| scope.spawn(move || run(job)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("decomposition thread panicked"))
                    .collect()
            })
        } else {
            jobs.into_iter().map(run).collect()
        }
    };

    let child_threads = if threads > 1 { threads / 2 } else { 1 };
    let _ = child_threads;
    let k1 = make_branch(blocks1, "k1.", threads)?;
    let k2 = make_branch(blocks2, "k2.", threads)?;
    Ok(FactorTree {
        ty: node.ty,
        a: f.a,
        global_phase: f.global_phase,
        csa: node.csa,
        k1,
        k2,
        coords,
        child_rep: node.child_rep,
        dim: g.rows(),
    })
}

/// The Block-ZXZ X-axis CSA: conjugate the cosine-sine planes by the local
/// phase twist M = 1_p ⊕ i·1_q, which stays inside K.
fn apply_x_axis_twist(f: &mut KakFactors) {
    if let InvolutionType::AIII { p, q } = f.ty {
        let n = p + q;
        let m = DenseMatrix::from_fn_complex(n, n, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if i < p {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 1.0)
            }
        });
        f.k1 = f.k1.matmul(&m.adjoint());
        f.k2 = m.matmul(&f.k2);
        f.a = CsgElement::new(CsgKind::CsX { p, q }, n, f.a.angles.clone());
    }
}

/// Extract the sub-blocks of both K factors plus the coordinate lists that
/// re-embed them.
#[allow(clippy::type_complexity)]
fn extract_blocks(
    f: &KakFactors,
    node: &PlanNode,
) -> Result<(Vec<DenseMatrix>, Vec<DenseMatrix>, Vec<Vec<usize>>)> {
    let n = f.k1.rows();
    let demote = |m: &DenseMatrix, what: &str| -> Result<DenseMatrix> {
        m.try_real(scaled_tol(1e-8, n, 1.0)).ok_or_else(|| RecursionError::BadParams(format!(
            "{what} expected a real K factor (imag {:.3e})",
            m.max_imag()
        )))
    };
    match node.child_rep {
        ChildRep::Whole => {
            let coords: Vec<usize> = (0..n).collect();
            Ok((vec![f.k1.clone()], vec![f.k2.clone()], vec![coords]))
        }
        ChildRep::RealDemote => {
            let coords: Vec<usize> = (0..n).collect();
            Ok((
                vec![demote(&f.k1, "AI child")?],
                vec![demote(&f.k2, "AI child")?],
                vec![coords],
            ))
        }
        ChildRep::BlockDiag => {
            let (p, q) = match f.ty {
                InvolutionType::AIII { p, q } | InvolutionType::BDI { p, q } => (p, q),
                _ => return Err(RecursionError::BadParams("BlockDiag needs a split type".into())),
            };
            let b = |m: &DenseMatrix| vec![m.block(0, 0, p, p), m.block(p, p, q, q)];
            Ok((
                b(&f.k1),
                b(&f.k2),
                vec![(0..p).collect(), (p..p + q).collect()],
            ))
        }
        ChildRep::DoubledHalf => {
            let h = n / 2;
            Ok((
                vec![f.k1.block(0, 0, h, h)],
                vec![f.k2.block(0, 0, h, h)],
                vec![(0..n).collect()],
            ))
        }
        ChildRep::PhiTimes => {
            let k1r = demote(&f.k1, "CI child")?;
            let k2r = demote(&f.k2, "CI child")?;
            let coords: Vec<usize> = (0..n).collect();
            Ok((
                vec![rep::phi_times(&k1r)],
                vec![rep::phi_times(&k2r)],
                vec![coords],
            ))
        }
        ChildRep::CiiPair => {
            let (p, q) = match f.ty {
                InvolutionType::CII { p, q } => (p, q),
                _ => return Err(RecursionError::BadParams("CiiPair needs CII".into())),
            };
            let m = p + q;
            let all: Vec<usize> = (0..p)
                .chain(m..m + p)
                .chain(p..m)
                .chain(m + p..2 * m)
                .collect();
            Ok((vec![f.k1.gather(&all)], vec![f.k2.gather(&all)], vec![all]))
        }
    }
}

// ---- flattening ----------------------------------------------------------------

/// One step of the embedding chain from a factor's own representation back
/// into its parent carrier.
#[derive(Clone, Debug)]
pub enum FrameOp {
    /// Scatter onto a coordinate subset of a parent of the given dimension.
    Coords { coords: Vec<usize>, parent_dim: usize },
    /// m ↦ m ⊕ m (doubled-type K factors).
    Doubled,
    /// m ↦ φ×⁻¹(m) (CI's unitary subgroup in its real carrier).
    PhiTimes,
}

/// A factor embedded into the root carrier through a chain of frame ops,
/// ordered outermost first.
#[derive(Clone, Debug)]
pub enum FlatPayload {
    K(DenseMatrix),
    Csg { a: CsgElement, csa: CsaBasis },
    Phase(C64, usize),
}

#[derive(Clone, Debug)]
pub struct FlatFactor {
    pub payload: FlatPayload,
    pub frame: Vec<FrameOp>,
}

impl FlatFactor {
    /// Materialize into the root carrier dimension.
    pub fn materialize(&self, dim: usize) -> DenseMatrix {
        let mut m = match &self.payload {
            FlatPayload::K(m) => m.clone(),
            FlatPayload::Csg { a, .. } => a.materialize(),
            FlatPayload::Phase(z, d) => DenseMatrix::identity_complex(*d).scale(*z),
        };
        for op in self.frame.iter().rev() {
            m = match op {
                FrameOp::Doubled => m.dsum(&m),
                FrameOp::PhiTimes => rep::phi_times_inv(&m),
                FrameOp::Coords { coords, parent_dim } => {
                    m.scatter_into_identity(coords, *parent_dim)
                }
            };
        }
        assert_eq!(m.rows(), dim, "frame chain must land on the root carrier");
        m
    }

    /// When the frame is pure coordinate scatters, the composed coordinate
    /// list into the root carrier.
    pub fn plain_coords(&self) -> Option<Vec<usize>> {
        let mut coords: Option<Vec<usize>> = None;
        for op in self.frame.iter() {
            match op {
                FrameOp::Coords { coords: c, .. } => {
                    coords = Some(match coords {
                        None => c.clone(),
                        Some(outer) => c.iter().map(|&i| outer[i]).collect(),
                    });
                }
                _ => return None,
            }
        }
        coords
    }
}

/// Left-to-right factor list whose product reconstructs the input.
pub fn flatten(t: &FactorTree) -> Vec<(FlatFactor, String)> {
    let root_frame = vec![FrameOp::Coords { coords: (0..t.dim).collect(), parent_dim: t.dim }];
    let mut out = Vec::new();
    flatten_into(t, &root_frame, "root", &mut out);
    out
}

fn flatten_into(
    t: &FactorTree,
    frame: &[FrameOp],
    path: &str,
    out: &mut Vec<(FlatFactor, String)>,
) {
    if (t.global_phase - C64::new(1.0, 0.0)).norm() > 1e-300 {
        out.push((
            FlatFactor {
                payload: FlatPayload::Phase(t.global_phase, t.dim),
                frame: frame.to_vec(),
            },
            format!("{path}.phase"),
        ));
    }
    let child_frame = |i: usize| -> Vec<FrameOp> {
        let mut f = frame.to_vec();
        f.push(FrameOp::Coords {
            coords: t.coords[i.min(t.coords.len() - 1)].clone(),
            parent_dim: t.dim,
        });
        match t.child_rep {
            ChildRep::DoubledHalf => f.push(FrameOp::Doubled),
            ChildRep::PhiTimes => f.push(FrameOp::PhiTimes),
            _ => {}
        }
        f
    };
    let emit_branch =
        |branches: &[KBranch], which: &str, out: &mut Vec<(FlatFactor, String)>| {
            for (i, b) in branches.iter().enumerate() {
                let f = child_frame(i);
                match b {
                    KBranch::Leaf(m) => {
                        out.push((
                            FlatFactor { payload: FlatPayload::K(m.clone()), frame: f },
                            format!("{path}.{which}{i}"),
                        ));
                    }
                    KBranch::Node(sub_tree) => {
                        flatten_into(sub_tree, &f, &format!("{path}.{which}{i}"), out);
                    }
                }
            }
        };
    emit_branch(&t.k1, "k1.", out);
    if !matches!(t.ty, InvolutionType::Trivial) {
        out.push((
            FlatFactor {
                payload: FlatPayload::Csg { a: t.a.clone(), csa: t.csa },
                frame: frame.to_vec(),
            },
            format!("{path}.a"),
        ));
    }
    emit_branch(&t.k2, "k2.", out);
}

/// Multiply a flattened factor list back together (complex, full dimension).
pub fn product_of_flat(flat: &[(FlatFactor, String)], dim: usize) -> DenseMatrix {
    let mut acc = DenseMatrix::identity_complex(dim);
    for (f, _) in flat {
        acc = acc.matmul(&f.materialize(dim).to_complex());
    }
    acc
}

// ---- parameter counting -----------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub total_params: usize,
    pub overparam: i64,
}

/// Sum CSG ranks over all nodes plus the leaf group dimensions; the
/// overparametrization compares against the root group dimension.
pub fn count_parameters(plan: &Plan) -> ParamCount {
    let root_dim = group_dim(plan.group, plan.dim);
    let total = match &plan.root {
        None => root_dim,
        Some(node) => node_params(node, plan.group),
    };
    ParamCount { total_params: total, overparam: total as i64 - root_dim as i64 }
}

fn group_dim(kind: GroupKind, carrier: usize) -> usize {
    match kind {
        GroupKind::Unitary => carrier * carrier,
        GroupKind::SpecialOrthogonal => carrier * (carrier - 1) / 2,
        GroupKind::Symplectic => {
            let n = carrier / 2;
            2 * n * n + n
        }
    }
}

fn node_params(node: &PlanNode, _group: GroupKind) -> usize {
    use InvolutionType::*;
    if matches!(node.ty, Trivial) {
        return group_dim(node.group, node.dim);
    }
    let rank = match node.ty {
        A => node.dim / 2,
        AI => node.dim,
        AII => node.dim / 2,
        AIII { p, q } | BDI { p, q } | CII { p, q } => p.min(q),
        BD => (node.dim / 2) / 2,
        DIII => (node.dim / 2) / 2,
        C => node.dim / 4,
        CI => node.dim / 2,
        Trivial => 0,
    };
    // each K factor spawns the children once; two K factors per node
    let child_sum: usize = node.children.iter().map(|c| node_params(c, _group)).sum();
    rank + 2 * child_sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{haar_unitary, rng, special_orthogonal, symplectic_unitary};

    fn reconstruct_check(g: &DenseMatrix, plan: &Plan) {
        let t = recursive_decompose(g, plan, 1e-10).unwrap();
        let flat = flatten(&t);
        let back = product_of_flat(&flat, g.rows());
        let bound = 1e-9 * (g.rows() as f64).sqrt() * g.fro_norm();
        let resid = back.residual(&g.to_complex());
        assert!(resid <= bound, "{}: {resid:.3e} > {bound:.3e}", plan.name);
    }

    #[test]
    fn canonical_bdi_reconstructs_so8() {
        let mut r = rng(201);
        let g = special_orthogonal(8, &mut r);
        reconstruct_check(&g, &canonical_bdi(8));
    }

    #[test]
    fn canonical_bdi_odd_and_uneven() {
        let mut r = rng(203);
        for n in [5usize, 6, 7, 12] {
            let g = special_orthogonal(n, &mut r);
            reconstruct_check(&g, &canonical_bdi(n));
        }
    }

    #[test]
    fn identity_input_gives_identity_product() {
        let g = DenseMatrix::identity_real(8);
        let t = recursive_decompose(&g, &canonical_bdi(8), 1e-10).unwrap();
        let flat = flatten(&t);
        let back = product_of_flat(&flat, 8);
        assert!(back.residual(&g.to_complex()) < 1e-12 * 8.0);
    }

    #[test]
    fn param_optimal_u_reconstructs_and_counts() {
        let mut r = rng(207);
        for n in [4usize, 6] {
            let g = haar_unitary(n, &mut r);
            let plan = param_optimal(GroupKind::Unitary, n);
            reconstruct_check(&g, &plan);
            let pc = count_parameters(&plan);
            assert_eq!(pc.overparam, 0, "param_optimal(U,{n}) overparam");
            assert_eq!(pc.total_params, n * n);
        }
    }

    #[test]
    fn param_optimal_so_counts() {
        for n in [4usize, 6, 8, 10, 16, 64] {
            let pc = count_parameters(&param_optimal(GroupKind::SpecialOrthogonal, n));
            assert_eq!(pc.overparam, 0, "param_optimal(SO,{n})");
        }
    }

    #[test]
    fn param_optimal_sp_reconstructs_and_counts() {
        let mut r = rng(209);
        let n = 2;
        let g = symplectic_unitary(n, &mut r);
        let plan = param_optimal(GroupKind::Symplectic, n);
        reconstruct_check(&g, &plan);
        let pc = count_parameters(&plan);
        assert_eq!(pc.overparam, 0, "param_optimal(Sp,{n})");
    }

    #[test]
    fn givens_count_matches_so6_dimension() {
        // param_optimal(SO, 6): 15 = 2·3² - 3 parameters total
        let pc = count_parameters(&param_optimal(GroupKind::SpecialOrthogonal, 6));
        assert_eq!(pc.total_params, 15);
    }

    #[test]
    fn qsd_plan_reconstructs_u4() {
        let mut r = rng(211);
        let g = haar_unitary(4, &mut r);
        reconstruct_check(&g, &qsd(2, false));
        reconstruct_check(&g, &qsd(2, true));
        let g8 = haar_unitary(8, &mut r);
        reconstruct_check(&g8, &qsd(3, false));
        reconstruct_check(&g8, &qsd(3, true));
    }

    #[test]
    fn qsd_overparam_matches_table_sums() {
        // qsd(2): AIII(2,2) overparam 2, A(2) overparam 2 per node (×2 nodes)
        let pc = count_parameters(&qsd(2, false));
        let expected_over = {
            let aiii = space_info(InvolutionType::AIII { p: 2, q: 2 }, 0).unwrap().overparam;
            let a = space_info(InvolutionType::A, 2).unwrap().overparam;
            aiii as i64 + 2 * a as i64
        };
        assert_eq!(pc.overparam, expected_over);
    }

    #[test]
    fn completely_orthogonal_reconstructs() {
        let mut r = rng(213);
        let g = haar_unitary(8, &mut r);
        reconstruct_check(&g, &completely_orthogonal(3));
    }

    #[test]
    fn completely_symplectic_reconstructs() {
        let mut r = rng(217);
        let g = haar_unitary(8, &mut r);
        reconstruct_check(&g, &completely_symplectic(3));
    }

    #[test]
    fn leaf_dims_do_not_exceed_two() {
        fn walk(n: &PlanNode) {
            if matches!(n.ty, InvolutionType::Trivial) {
                assert!(n.dim <= 2, "matrix-plan leaf of dim {}", n.dim);
            }
            for c in &n.children {
                walk(c);
            }
        }
        if let Some(root) = &canonical_bdi(16).root {
            walk(root);
        }
        if let Some(root) = &param_optimal(GroupKind::SpecialOrthogonal, 13).root {
            walk(root);
        }
    }

    #[test]
    fn recursion_depth_is_log2() {
        fn depth(n: &PlanNode) -> usize {
            1 + n.children.iter().map(depth).max().unwrap_or(0)
        }
        // BDI nodes halve; depth (counting only BDI levels) is ceil(log2 n) - 1
        let plan = canonical_bdi(8);
        let d = depth(plan.root.as_ref().unwrap());
        assert_eq!(d, 3); // BDI(4,4) -> BDI(2,2) -> leaves
    }

    #[test]
    fn determinism_bit_identical_across_runs() {
        let mut r1 = rng(219);
        let g = special_orthogonal(12, &mut r1);
        let plan = canonical_bdi(12);
        let t1 = recursive_decompose(&g, &plan, 1e-10).unwrap();
        let t2 = recursive_decompose(&g, &plan, 1e-10).unwrap();
        let f1 = flatten(&t1);
        let f2 = flatten(&t2);
        assert_eq!(f1.len(), f2.len());
        for ((a, _), (b, _)) in f1.iter().zip(&f2) {
            match (&a.payload, &b.payload) {
                (FlatPayload::K(ma), FlatPayload::K(mb)) => {
                    assert_eq!(ma, mb, "K factors must be bit-identical");
                }
                (FlatPayload::Csg { a: ca, .. }, FlatPayload::Csg { a: cb, .. }) => {
                    assert_eq!(ca.angles, cb.angles);
                }
                (FlatPayload::Phase(za, _), FlatPayload::Phase(zb, _)) => assert_eq!(za, zb),
                _ => panic!("factor kinds diverged"),
            }
        }
    }

    #[test]
    fn threaded_fanout_matches_sequential() {
        let mut r = rng(223);
        let g = special_orthogonal(12, &mut r);
        let plan = canonical_bdi(12);
        let t1 = recursive_decompose(&g, &plan, 1e-10).unwrap();
        let t2 = recursive_decompose_threaded(&g, &plan, 1e-10, 4).unwrap();
        let f1 = flatten(&t1);
        let f2 = flatten(&t2);
        for ((a, _), (b, _)) in f1.iter().zip(&f2) {
            if let (FlatPayload::K(ma), FlatPayload::K(mb)) = (&a.payload, &b.payload) {
                assert_eq!(ma, mb);
            }
        }
    }
}
