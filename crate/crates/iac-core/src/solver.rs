//! Closed-form transceiver recovery from a validated alignment graph.
//!
//! Tree subgraphs get an arbitrary seeded unit vector at their lowest vertex
//! and propagate it edge by edge; one-loop subgraphs anchor on an
//! eigenvector of the loop's transfer-matrix product. User 1 never appears
//! in the graph, so its precoder comes straight from the orthogonal
//! complement of the aligned interference at receiver 1, and every receiver
//! is a zero-forcing basis for the complement of what it still hears.

use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{IacError, Result};
use crate::graph::{classify_subgraphs, CycleStep, Edge, IacGraph, Subgraph, SubgraphKind};
use crate::linalg::{
    checked_inverse, condition_ratio, eigenpairs, orthogonal_complement, random_unit_vector,
    CMatrix, CVector, RANK_REL_TOL,
};
use crate::seeding::derive_seed;
use crate::system::{post_cancellation_interferers, ChannelSet, StreamId, SystemConfig};

/// Per-user transmit precoding matrices `V_j` of shape `M x d_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    matrices: Vec<CMatrix>,
}

impl PrecoderSet {
    /// Wraps and validates: unit-norm columns and full column rank each.
    pub fn new(matrices: Vec<CMatrix>, config: &SystemConfig) -> Result<Self> {
        if matrices.len() != config.num_users {
            return Err(IacError::InvalidConfig(format!(
                "{} precoders for {} users",
                matrices.len(),
                config.num_users
            )));
        }
        for (idx, v) in matrices.iter().enumerate() {
            let user = idx + 1;
            if v.nrows() != config.num_antennas || v.ncols() != config.dof_of(user) {
                return Err(IacError::RankDeficientPrecoder {
                    user,
                    detail: format!("shape {}x{}", v.nrows(), v.ncols()),
                });
            }
            for c in 0..v.ncols() {
                let norm = v.column(c).norm();
                if (norm - 1.0).abs() >= 1e-12 {
                    return Err(IacError::RankDeficientPrecoder {
                        user,
                        detail: format!("column {} has norm {norm}", c + 1),
                    });
                }
            }
            let cond = condition_ratio(v);
            if cond <= 1e-8 {
                return Err(IacError::RankDeficientPrecoder {
                    user,
                    detail: format!("relative sigma_min {cond:.3e}"),
                });
            }
        }
        Ok(Self { matrices })
    }

    /// Precoder of user `j` (1-based).
    pub fn v(&self, j: usize) -> &CMatrix {
        &self.matrices[j - 1]
    }

    /// Single precoding vector for stream `(j, l)`.
    pub fn column(&self, s: StreamId) -> CVector {
        self.matrices[s.j - 1].column(s.l - 1).into_owned()
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }
}

/// Per-receiver zero-forcing matrices `U_k` of shape `M x d_k` with
/// orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSet {
    matrices: Vec<CMatrix>,
}

impl ReceiverSet {
    pub fn new(matrices: Vec<CMatrix>, config: &SystemConfig) -> Result<Self> {
        if matrices.len() != config.num_users {
            return Err(IacError::InvalidConfig(format!(
                "{} receivers for {} users",
                matrices.len(),
                config.num_users
            )));
        }
        for (idx, u) in matrices.iter().enumerate() {
            let k = idx + 1;
            if u.nrows() != config.num_antennas || u.ncols() != config.dof_of(k) {
                return Err(IacError::DimensionOverflow {
                    receiver: k,
                    needed: config.dof_of(k),
                    available: u.ncols(),
                });
            }
            let gram = u.adjoint() * u;
            let eye = CMatrix::identity(u.ncols(), u.ncols());
            if (gram - eye).norm() >= 1e-10 {
                return Err(IacError::InvalidConfig(format!(
                    "receiver {k} columns are not orthonormal"
                )));
            }
        }
        Ok(Self { matrices })
    }

    pub fn u(&self, k: usize) -> &CMatrix {
        &self.matrices[k - 1]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }
}

/// Which eigenpair anchors a loop subgraph. Pairs are ordered by descending
/// eigenvalue modulus (ties by real, then imaginary part).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSelection {
    /// First pair in the ordering whose residual passes the tolerance.
    #[default]
    LargestModulus,
    /// The `n`-th pair (0-based) in the ordering, which must pass.
    Nth(usize),
}

/// The transfer map of one alignment edge: the matrix sending the reference
/// stream's precoding direction to the aligned stream's direction.
pub fn edge_transfer(edge: &Edge, channels: &ChannelSet) -> Result<CMatrix> {
    directed_transfer(channels, edge.label, edge.reference.j, edge.aligned.j)
}

/// `H[k][to]^-1 H[k][from]`: maps the direction of a stream of user `from`
/// onto the aligned direction for user `to`, both observed at receiver `k`.
fn directed_transfer(channels: &ChannelSet, k: usize, from_j: usize, to_j: usize) -> Result<CMatrix> {
    let inv = checked_inverse(channels.h(k, to_j), &format!("H[{k}][{to_j}]"))?;
    Ok(inv * channels.h(k, from_j))
}

/// Ordered product of edge transfers around a one-loop subgraph's cycle.
#[derive(Debug, Clone)]
pub struct LoopMatrix {
    pub matrix: CMatrix,
    pub anchor: StreamId,
    pub cycle: Vec<CycleStep>,
}

/// Composes the per-edge transfers around `cycle` so that the anchor vertex
/// must satisfy `span(F v) = span(v)`.
pub fn build_loop_matrix(
    cycle: &[CycleStep],
    graph: &IacGraph,
    channels: &ChannelSet,
) -> Result<LoopMatrix> {
    let m = channels.num_antennas;
    let first = cycle
        .first()
        .ok_or_else(|| IacError::MalformedGraph("empty cycle".into()))?;
    let first_edge = &graph.edges()[first.edge_index];
    let anchor = if first.forward {
        first_edge.reference
    } else {
        first_edge.aligned
    };

    let mut f = CMatrix::identity(m, m);
    let mut current = anchor;
    for step in cycle {
        let e = &graph.edges()[step.edge_index];
        let (from, to) = if step.forward {
            (e.reference, e.aligned)
        } else {
            (e.aligned, e.reference)
        };
        debug_assert_eq!(from, current, "cycle walk must be contiguous");
        let t = directed_transfer(channels, e.label, from.j, to.j)?;
        f = t * f;
        current = to;
    }
    if current != anchor {
        return Err(IacError::MalformedGraph("cycle does not close".into()));
    }
    Ok(LoopMatrix {
        matrix: f,
        anchor,
        cycle: cycle.to_vec(),
    })
}

/// Breadth-first propagation of an anchored direction across a subgraph.
fn propagate(
    sub: &Subgraph,
    graph: &IacGraph,
    channels: &ChannelSet,
    anchor: StreamId,
    anchor_vec: CVector,
) -> Result<BTreeMap<StreamId, CVector>> {
    let mut adj: BTreeMap<StreamId, Vec<(usize, StreamId)>> = BTreeMap::new();
    for &ei in &sub.edge_indices {
        let e = &graph.edges()[ei];
        adj.entry(e.reference).or_default().push((ei, e.aligned));
        adj.entry(e.aligned).or_default().push((ei, e.reference));
    }

    let mut solved = BTreeMap::new();
    solved.insert(anchor, anchor_vec);
    let mut queue = VecDeque::from([anchor]);
    while let Some(u) = queue.pop_front() {
        let Some(neighbors) = adj.get(&u) else {
            continue;
        };
        for &(ei, w) in neighbors {
            if solved.contains_key(&w) {
                continue;
            }
            let e = &graph.edges()[ei];
            let t = directed_transfer(channels, e.label, u.j, w.j)?;
            let mut v = &t * &solved[&u];
            let norm = v.norm();
            if norm < 1e-12 {
                return Err(IacError::SingularChannel {
                    context: format!("propagation onto {w}"),
                    cond: norm,
                });
            }
            v /= Complex64::new(norm, 0.0);
            solved.insert(w, v);
            queue.push_back(w);
        }
    }

    for &v in &sub.vertices {
        if !solved.contains_key(&v) {
            return Err(IacError::MalformedGraph(format!(
                "vertex {v} unreachable within its subgraph"
            )));
        }
    }
    Ok(solved)
}

/// Solves a tree subgraph: seeded unit vector at the lowest vertex, then
/// direction-aware propagation along every edge.
pub fn solve_tree_subgraph(
    sub: &Subgraph,
    graph: &IacGraph,
    channels: &ChannelSet,
    seed: u64,
) -> Result<BTreeMap<StreamId, CVector>> {
    let root = *sub
        .vertices
        .iter()
        .min()
        .ok_or_else(|| IacError::MalformedGraph("empty subgraph".into()))?;
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, &[root.j as u64, root.l as u64]));
    let root_vec = random_unit_vector(&mut rng, channels.num_antennas);
    propagate(sub, graph, channels, root, root_vec)
}

/// Solves a one-loop subgraph: the cycle anchor takes a unit eigenvector of
/// the loop matrix, everything else follows by propagation.
pub fn solve_loop_subgraph(
    sub: &Subgraph,
    graph: &IacGraph,
    channels: &ChannelSet,
    selection: EigenSelection,
) -> Result<BTreeMap<StreamId, CVector>> {
    let cycle = sub
        .cycle
        .as_ref()
        .ok_or_else(|| IacError::MalformedGraph("loop subgraph without cycle".into()))?;
    let loop_matrix = build_loop_matrix(cycle, graph, channels)?;
    let tol = 1e-8 * loop_matrix.matrix.norm();
    let pairs = eigenpairs(&loop_matrix.matrix)?;

    let chosen = match selection {
        EigenSelection::LargestModulus => pairs.iter().find(|p| p.residual <= tol),
        EigenSelection::Nth(n) => pairs.get(n).filter(|p| p.residual <= tol),
    };
    let Some(pair) = chosen else {
        let best = pairs
            .iter()
            .map(|p| p.residual)
            .fold(f64::INFINITY, f64::min);
        return Err(IacError::DegenerateEigenproblem { residual: best });
    };
    propagate(sub, graph, channels, loop_matrix.anchor, pair.vector.clone())
}

/// Merges per-subgraph solutions, rejecting duplicate stream assignments.
pub fn merge_solutions(
    parts: Vec<BTreeMap<StreamId, CVector>>,
) -> Result<BTreeMap<StreamId, CVector>> {
    let mut merged = BTreeMap::new();
    for part in parts {
        for (stream, vector) in part {
            if merged.insert(stream, vector).is_some() {
                return Err(IacError::RankDeficientPrecoder {
                    user: stream.j,
                    detail: format!("stream {stream} assigned twice"),
                });
            }
        }
    }
    Ok(merged)
}

/// First-user precoder: `d_1` directions that land orthogonally to the
/// aligned interference at receiver 1, pre-compensated through `H_11`.
pub fn solve_first_user(
    channels: &ChannelSet,
    interference_at_rx1: &CMatrix,
    d1: usize,
) -> Result<CMatrix> {
    let m = channels.num_antennas;
    let (basis, rank) = orthogonal_complement(interference_at_rx1, RANK_REL_TOL);
    if rank > m - d1 {
        return Err(IacError::DimensionOverflow {
            receiver: 1,
            needed: d1,
            available: m - rank,
        });
    }
    let picked = basis.columns(0, d1).into_owned();
    let h11_inv = checked_inverse(channels.h(1, 1), "H[1][1]")?;
    let mut v1 = h11_inv * picked;
    for c in 0..v1.ncols() {
        let norm = v1.column(c).norm();
        v1.column_mut(c).unscale_mut(norm);
    }
    Ok(v1)
}

/// Stacks solved streams into validated per-user precoding matrices.
pub fn assemble_precoders(
    solutions: &BTreeMap<StreamId, CVector>,
    first_user: CMatrix,
    config: &SystemConfig,
) -> Result<PrecoderSet> {
    let m = config.num_antennas;
    let mut matrices = vec![first_user];
    for j in 2..=config.num_users {
        let d = config.dof_of(j);
        let mut v = CMatrix::zeros(m, d);
        for l in 1..=d {
            let stream = StreamId::new(j, l);
            let col = solutions
                .get(&stream)
                .ok_or_else(|| IacError::RankDeficientPrecoder {
                    user: j,
                    detail: format!("stream {stream} never solved"),
                })?;
            v.set_column(l - 1, col);
        }
        matrices.push(v);
    }
    PrecoderSet::new(matrices, config)
}

/// Zero-forcing receivers: each `U_k` spans the orthogonal complement of
/// the interference still present at receiver `k` after cancellation.
pub fn design_receivers(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    config: &SystemConfig,
) -> Result<ReceiverSet> {
    let m = config.num_antennas;
    let mut matrices = Vec::with_capacity(config.num_users);
    for k in 1..=config.num_users {
        let d_k = config.dof_of(k);
        let stack = interference_stack(channels, precoders, config, k);
        let (basis, rank) = orthogonal_complement(&stack, RANK_REL_TOL);
        if basis.ncols() < d_k {
            return Err(IacError::DimensionOverflow {
                receiver: k,
                needed: d_k,
                available: m - rank,
            });
        }
        matrices.push(basis.columns(0, d_k).into_owned());
    }
    ReceiverSet::new(matrices, config)
}

/// Received directions of every interference stream that survives
/// cancellation at receiver `k` (the set the alignment was built around).
pub fn interference_stack(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    config: &SystemConfig,
    k: usize,
) -> CMatrix {
    let m = config.num_antennas;
    let interferers = post_cancellation_interferers(config, k);
    let total: usize = interferers.iter().map(|&j| config.dof_of(j)).sum();
    let mut stack = CMatrix::zeros(m, total);
    let mut col = 0;
    for &j in &interferers {
        let hv = channels.h(k, j) * precoders.v(j);
        for l in 0..config.dof_of(j) {
            stack.set_column(col, &hv.column(l));
            col += 1;
        }
    }
    stack
}

/// Full precoder recovery for a constructed graph: classify, solve each
/// subgraph, then derive the first user from the resulting interference.
pub fn solve_precoders(
    graph: &IacGraph,
    channels: &ChannelSet,
    config: &SystemConfig,
    seed: u64,
    selection: EigenSelection,
) -> Result<PrecoderSet> {
    let subgraphs = classify_subgraphs(graph)?;
    let mut parts = Vec::with_capacity(subgraphs.len());
    for sub in &subgraphs {
        let solved = match sub.kind {
            SubgraphKind::Tree => solve_tree_subgraph(sub, graph, channels, seed)?,
            SubgraphKind::OneLoop => solve_loop_subgraph(sub, graph, channels, selection)?,
        };
        parts.push(solved);
    }
    let solutions = merge_solutions(parts)?;

    let m = config.num_antennas;
    let mut dirs = CMatrix::zeros(m, solutions.len());
    for (col, (stream, v)) in solutions.iter().enumerate() {
        dirs.set_column(col, &(channels.h(1, stream.j) * v));
    }
    let v1 = solve_first_user(channels, &dirs, config.dof_of(1))?;
    assemble_precoders(&solutions, v1, config)
}
