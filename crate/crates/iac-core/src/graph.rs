//! The IAC graph: vertices are the precoded streams of users `2..K`, edges
//! are span-equality constraints labeled by the receiver that enforces them.
//!
//! Two constructions are provided. The general one follows the randomized
//! reference-selection procedure and works for every feasible DoF tuple; the
//! specialized one wires the `2M`-DoF tuples deterministically (round-robin
//! onto user 2's streams, then one loop-closing or merging edge per
//! subgraph). Both guarantee the structural facts the closed-form solver
//! relies on: at most one loop per connected subgraph, and no two streams of
//! one transmitter connected through edges of a single label.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IacError, Result};
use crate::feasibility::{check_feasibility, is_optimal_tuple};
use crate::system::{compute_k_iac, StreamId, SystemConfig};
use crate::union_find::{EdgeOutcome, UnionFind};

/// Default number of whole-receiver restarts before the randomized
/// construction gives up.
pub const DEFAULT_RETRY_BUDGET: u32 = 64;

/// One alignment edge: the stream `aligned` is forced onto the received
/// direction of the `reference` stream at receiver `label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(rename = "a")]
    pub reference: StreamId,
    #[serde(rename = "b")]
    pub aligned: StreamId,
    pub label: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    vertices: Vec<StreamId>,
    edges: Vec<Edge>,
}

/// The alignment graph, with a cached partition into connected subgraphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GraphRepr", from = "GraphRepr")]
pub struct IacGraph {
    vertices: Vec<StreamId>,
    edges: Vec<Edge>,
    /// Subgraph id per vertex, indices normalized in vertex order.
    partition: Vec<usize>,
}

impl From<IacGraph> for GraphRepr {
    fn from(g: IacGraph) -> Self {
        GraphRepr {
            vertices: g.vertices,
            edges: g.edges,
        }
    }
}

impl From<GraphRepr> for IacGraph {
    fn from(r: GraphRepr) -> Self {
        IacGraph::from_parts(r.vertices, r.edges)
    }
}

impl IacGraph {
    /// Builds a graph from raw parts, sorting vertices and recomputing the
    /// subgraph partition. Structural invariants are *not* checked here;
    /// that is [`validate_graph`]'s job.
    pub fn from_parts(mut vertices: Vec<StreamId>, edges: Vec<Edge>) -> Self {
        vertices.sort();
        vertices.dedup();
        let index: BTreeMap<StreamId, usize> =
            vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut uf = UnionFind::new(vertices.len());
        for e in &edges {
            if let (Some(&a), Some(&b)) = (index.get(&e.reference), index.get(&e.aligned)) {
                uf.add_edge(a, b);
            }
        }
        let mut ids = HashMap::new();
        let partition = (0..vertices.len())
            .map(|i| {
                let root = uf.find(i);
                let next = ids.len();
                *ids.entry(root).or_insert(next)
            })
            .collect();
        Self {
            vertices,
            edges,
            partition,
        }
    }

    pub fn vertices(&self) -> &[StreamId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Subgraph id of each vertex, parallel to [`Self::vertices`].
    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn subgraph_count(&self) -> usize {
        self.partition.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn vertex_index(&self, v: StreamId) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Graphviz export: undirected, vertex `v_j_l`, edge label `rx k`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph iac {\n");
        for v in &self.vertices {
            out.push_str(&format!("  \"{v}\";\n"));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -- \"{}\" [label=\"rx {}\"];\n",
                e.reference, e.aligned, e.label
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// One span-equality constraint, the equation form of an [`Edge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentEquation {
    pub receiver: usize,
    pub reference: StreamId,
    pub aligned: StreamId,
}

/// All alignment equations of a design, in edge order (one per edge).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlignmentEquationSet {
    pub equations: Vec<AlignmentEquation>,
}

impl AlignmentEquationSet {
    pub fn from_graph(graph: &IacGraph) -> Self {
        Self {
            equations: graph
                .edges()
                .iter()
                .map(|e| AlignmentEquation {
                    receiver: e.label,
                    reference: e.reference,
                    aligned: e.aligned,
                })
                .collect(),
        }
    }

    /// Number of equations per receiver `1..=k_iac`.
    pub fn phi_counts(&self, k_iac: usize) -> Vec<usize> {
        let mut counts = vec![0usize; k_iac];
        for eq in &self.equations {
            if eq.receiver >= 1 && eq.receiver <= k_iac {
                counts[eq.receiver - 1] += 1;
            }
        }
        counts
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }
}

/// Diagnostics for one receiver's edge-addition stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverTrace {
    pub receiver: usize,
    pub reference_set: Vec<StreamId>,
    pub restarts: u32,
    pub edges_added: usize,
    pub merges: usize,
    pub loops_closed: usize,
    /// Connected subgraphs once this receiver's edges are in.
    pub subgraphs_after: usize,
}

/// Per-receiver record of what the randomized construction actually did.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConstructionTrace {
    pub receivers: Vec<ReceiverTrace>,
    /// Whole-construction restarts spent before this trace succeeded.
    #[serde(default)]
    pub full_restarts: u32,
}

impl ConstructionTrace {
    pub fn total_restarts(&self) -> u32 {
        self.full_restarts + self.receivers.iter().map(|r| r.restarts).sum::<u32>()
    }
}

fn graph_vertices(config: &SystemConfig) -> Vec<StreamId> {
    let mut vertices = Vec::new();
    for j in 2..=config.num_users {
        for l in 1..=config.dof_of(j) {
            vertices.push(StreamId::new(j, l));
        }
    }
    vertices
}

fn require_feasible(config: &SystemConfig) -> Result<usize> {
    config.validate()?;
    let verdict = check_feasibility(config);
    if !verdict.feasible {
        return Err(IacError::Infeasible { verdict });
    }
    Ok(verdict.k_iac)
}

struct BuilderState {
    vertices: Vec<StreamId>,
    index: BTreeMap<StreamId, usize>,
    uf: UnionFind,
    edges: Vec<Edge>,
}

impl BuilderState {
    fn new(vertices: Vec<StreamId>) -> Self {
        let index = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let n = vertices.len();
        Self {
            vertices,
            index,
            uf: UnionFind::new(n),
            edges: Vec::new(),
        }
    }

    fn idx(&self, v: StreamId) -> usize {
        self.index[&v]
    }

    fn finish(self, trace: ConstructionTrace) -> (IacGraph, AlignmentEquationSet, ConstructionTrace) {
        let graph = IacGraph::from_parts(self.vertices, self.edges);
        let equations = AlignmentEquationSet::from_graph(&graph);
        (graph, equations, trace)
    }
}

/// Reference redraws tried at one receiver before the whole construction
/// restarts. A receiver can be unsalvageable no matter which references it
/// draws — earlier receivers may have spent the loop budget of components
/// its vertex pool never touches — so redraws stay cheap and bounded.
const RECEIVER_REDRAWS: u32 = 16;

/// Randomized construction for any feasible tuple.
///
/// For each receiver `k` in decode order, a reference set of size `M - d_k`
/// is drawn among the not-yet-decoded streams, and every remaining stream is
/// attached to an admissible reference: one not already used by the same
/// transmitter at this receiver, and one whose edge keeps the merged
/// subgraph inside the one-loop bound. A dead end first redraws the
/// receiver's references, then restarts the whole construction with fresh
/// randomness, up to `retry_budget` full restarts.
pub fn build_graph_general(
    config: &SystemConfig,
    seed: u64,
    retry_budget: u32,
) -> Result<(IacGraph, AlignmentEquationSet, ConstructionTrace)> {
    let k_iac = require_feasible(config)?;
    if k_iac == 0 {
        let state = BuilderState::new(graph_vertices(config));
        return Ok(state.finish(ConstructionTrace::default()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut full_restarts = 0u32;
    loop {
        match try_build_general(config, k_iac, &mut rng) {
            Ok((state, mut trace)) => {
                trace.full_restarts = full_restarts;
                return Ok(state.finish(trace));
            }
            Err(stuck_receiver) => {
                full_restarts += 1;
                if full_restarts > retry_budget {
                    return Err(IacError::ConstructionExhausted {
                        receiver: stuck_receiver,
                        restarts: retry_budget,
                    });
                }
            }
        }
    }
}

/// One full pass over receivers `1..=k_iac`; `Err` carries the receiver
/// that could not be completed within its reference redraws.
fn try_build_general(
    config: &SystemConfig,
    k_iac: usize,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(BuilderState, ConstructionTrace), usize> {
    let mut state = BuilderState::new(graph_vertices(config));
    let mut trace = ConstructionTrace::default();

    for k in 1..=k_iac {
        let eta: Vec<StreamId> = state
            .vertices
            .iter()
            .copied()
            .filter(|v| v.j > k)
            .collect();
        let z = config.num_antennas - config.dof_of(k);
        if eta.len() <= z {
            // No equation needed at this receiver; nothing to wire.
            trace.receivers.push(ReceiverTrace {
                receiver: k,
                reference_set: eta.clone(),
                restarts: 0,
                edges_added: 0,
                merges: 0,
                loops_closed: 0,
                subgraphs_after: state.uf.component_count(),
            });
            continue;
        }

        let mut done = false;
        for restart in 0..RECEIVER_REDRAWS {
            let mut pool = eta.clone();
            pool.shuffle(rng);
            let mut refs: Vec<StreamId> = pool[..z].to_vec();
            refs.sort();
            let ref_set: BTreeSet<StreamId> = refs.iter().copied().collect();

            // A[j'] = references already serving transmitter j' at this
            // receiver, seeded with j''s own streams in the reference set.
            let mut used: HashMap<usize, BTreeSet<StreamId>> = HashMap::new();
            for j in (k + 1)..=config.num_users {
                used.insert(
                    j,
                    ref_set.iter().copied().filter(|r| r.j == j).collect(),
                );
            }

            let uf_snapshot = state.uf.clone();
            let edges_before = state.edges.len();
            let mut merges = 0usize;
            let mut loops_closed = 0usize;
            let mut ok = true;

            for &v in eta.iter().filter(|v| !ref_set.contains(v)) {
                let taken = &used[&v.j];
                let mut candidates: Vec<StreamId> =
                    refs.iter().copied().filter(|r| !taken.contains(r)).collect();
                candidates.shuffle(rng);
                let mut connected = false;
                for r in candidates {
                    let (ri, vi) = (state.idx(r), state.idx(v));
                    if state.uf.edge_keeps_loop_bound(ri, vi) {
                        match state.uf.add_edge(ri, vi) {
                            EdgeOutcome::Merged => merges += 1,
                            EdgeOutcome::ClosedLoop => loops_closed += 1,
                        }
                        state.edges.push(Edge {
                            reference: r,
                            aligned: v,
                            label: k,
                        });
                        used.get_mut(&v.j).unwrap().insert(r);
                        connected = true;
                        break;
                    }
                }
                if !connected {
                    ok = false;
                    break;
                }
            }

            if ok {
                trace.receivers.push(ReceiverTrace {
                    receiver: k,
                    reference_set: refs,
                    restarts: restart,
                    edges_added: state.edges.len() - edges_before,
                    merges,
                    loops_closed,
                    subgraphs_after: state.uf.component_count(),
                });
                done = true;
                break;
            }
            state.uf = uf_snapshot;
            state.edges.truncate(edges_before);
        }
        if !done {
            return Err(k);
        }
    }
    Ok((state, trace))
}

/// Deterministic construction for the `2M`-DoF tuples (`k_iac = 2`).
///
/// Receiver 1 takes user 2's streams as references and attaches every later
/// stream round-robin by its cumulative position; receiver 2 picks one
/// stream per subgraph to align, closing a loop inside its own subgraph when
/// an admissible reference is present there, otherwise merging into a
/// subgraph that already carries its loop.
pub fn build_graph_optimal(
    config: &SystemConfig,
    seed: u64,
) -> Result<(IacGraph, AlignmentEquationSet, ConstructionTrace)> {
    if !is_optimal_tuple(config) {
        let verdict = check_feasibility(config);
        if !verdict.feasible {
            return Err(IacError::Infeasible { verdict });
        }
        return Err(IacError::InvalidConfig(
            "DoF tuple does not meet the 2M optimality constraints".into(),
        ));
    }
    require_feasible(config)?;

    let d2 = config.dof_of(2);
    let mut state = BuilderState::new(graph_vertices(config));
    let mut trace = ConstructionTrace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Receiver 1: round-robin the streams of users 3..K onto user 2.
    let mut merges1 = 0usize;
    let mut cursor = 0usize;
    for j in 3..=config.num_users {
        for l in 1..=config.dof_of(j) {
            cursor += 1;
            let l2 = (cursor - 1) % d2 + 1;
            let r = StreamId::new(2, l2);
            let v = StreamId::new(j, l);
            let (ri, vi) = (state.idx(r), state.idx(v));
            debug_assert!(state.uf.edge_keeps_loop_bound(ri, vi));
            match state.uf.add_edge(ri, vi) {
                EdgeOutcome::Merged => merges1 += 1,
                EdgeOutcome::ClosedLoop => unreachable!("round-robin keeps trees"),
            }
            state.edges.push(Edge {
                reference: r,
                aligned: v,
                label: 1,
            });
        }
    }
    trace.receivers.push(ReceiverTrace {
        receiver: 1,
        reference_set: (1..=d2).map(|l| StreamId::new(2, l)).collect(),
        restarts: 0,
        edges_added: state.edges.len(),
        merges: merges1,
        loops_closed: 0,
        subgraphs_after: state.uf.component_count(),
    });

    // Receiver 2: per subgraph, the lowest stream of users 3..K becomes the
    // vertex to align; everything else of users 3..K is a reference.
    let eta2: Vec<StreamId> = state.vertices.iter().copied().filter(|v| v.j > 2).collect();
    let mut by_root: BTreeMap<usize, Vec<StreamId>> = BTreeMap::new();
    for &v in &eta2 {
        let idx = state.idx(v);
        let root = state.uf.find(idx);
        by_root.entry(root).or_default().push(v);
    }
    // Order subgraphs by their user-2 reference index for reproducibility.
    let mut subgraphs: Vec<(usize, Vec<StreamId>)> = (1..=d2)
        .map(|l2| {
            let root = state.uf.find(state.idx(StreamId::new(2, l2)));
            (root, by_root.get(&root).cloned().unwrap_or_default())
        })
        .collect();
    subgraphs.dedup_by_key(|(root, _)| *root);

    let chosen: Vec<StreamId> = subgraphs
        .iter()
        .map(|(_, members)| *members.iter().min().expect("every subgraph holds streams of users 3..K"))
        .collect();
    let chosen_set: BTreeSet<StreamId> = chosen.iter().copied().collect();
    let ref_set: Vec<StreamId> = eta2
        .iter()
        .copied()
        .filter(|v| !chosen_set.contains(v))
        .collect();

    let mut used: HashMap<usize, BTreeSet<StreamId>> = HashMap::new();
    for j in 3..=config.num_users {
        used.insert(j, ref_set.iter().copied().filter(|r| r.j == j).collect());
    }

    let edges_before = state.edges.len();
    let mut loops_closed = 0usize;
    let mut merges2 = 0usize;
    let mut has_loop: HashMap<usize, bool> = HashMap::new();
    let mut deferred: Vec<StreamId> = Vec::new();

    // First pass: close a loop inside each subgraph that holds an
    // admissible reference for its chosen vertex.
    for &v in &chosen {
        let vi = state.idx(v);
        let own_root = state.uf.find(vi);
        let taken = &used[&v.j];
        let mut local: Vec<StreamId> = ref_set
            .iter()
            .copied()
            .filter(|r| !taken.contains(r))
            .filter(|r| {
                let ri = state.idx(*r);
                state.uf.find(ri) == own_root
            })
            .collect();
        if local.is_empty() {
            deferred.push(v);
            continue;
        }
        local.shuffle(&mut rng);
        let r = local[0];
        state.uf.add_edge(state.idx(r), vi);
        state.edges.push(Edge {
            reference: r,
            aligned: v,
            label: 2,
        });
        used.get_mut(&v.j).unwrap().insert(r);
        loops_closed += 1;
        has_loop.insert(state.uf.find(vi), true);
    }

    // Second pass: merge the leftover trees into loop-carrying subgraphs.
    for v in deferred {
        let vi = state.idx(v);
        let own_root = state.uf.find(vi);
        let taken = &used[&v.j];
        let mut remote: Vec<StreamId> = ref_set
            .iter()
            .copied()
            .filter(|r| !taken.contains(r))
            .filter(|r| {
                let root = state.uf.find(state.idx(*r));
                root != own_root && has_loop.get(&root).copied().unwrap_or(false)
            })
            .collect();
        if remote.is_empty() {
            return Err(IacError::ConstructionExhausted {
                receiver: 2,
                restarts: 0,
            });
        }
        remote.shuffle(&mut rng);
        let r = remote[0];
        state.uf.add_edge(state.idx(r), vi);
        state.edges.push(Edge {
            reference: r,
            aligned: v,
            label: 2,
        });
        used.get_mut(&v.j).unwrap().insert(r);
        merges2 += 1;
        has_loop.insert(state.uf.find(vi), true);
    }

    trace.receivers.push(ReceiverTrace {
        receiver: 2,
        reference_set: ref_set,
        restarts: 0,
        edges_added: state.edges.len() - edges_before,
        merges: merges2,
        loops_closed,
        subgraphs_after: state.uf.component_count(),
    });
    Ok(state.finish(trace))
}

/// A structural defect found by [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Vertex set differs from the streams of users `2..K`.
    VertexSetMismatch,
    /// An edge endpoint, label, or transmitter pairing is out of range.
    BadEndpoint,
    /// A stream is aligned more than once at one receiver, or serves as
    /// both reference and aligned vertex there.
    DuplicateAlignment,
    /// Two streams of one transmitter are connected through edges of a
    /// single label.
    SameLabelTransmitterClash,
    /// A connected subgraph carries more than one loop.
    SecondLoop,
    /// The per-receiver equation count deviates from
    /// `sum_{j>k} d_j - (M - d_k)`.
    EquationCountMismatch,
}

/// Checks every structural invariant; an empty list means the graph is a
/// valid alignment structure for `config`.
pub fn validate_graph(graph: &IacGraph, config: &SystemConfig) -> Vec<Violation> {
    let mut violations = Vec::new();
    let k_iac = compute_k_iac(config);

    let expected: BTreeSet<StreamId> = graph_vertices(config).into_iter().collect();
    let actual: BTreeSet<StreamId> = graph.vertices().iter().copied().collect();
    if expected != actual {
        violations.push(Violation {
            kind: ViolationKind::VertexSetMismatch,
            detail: format!(
                "expected {} stream vertices of users 2..{}, found {}",
                expected.len(),
                config.num_users,
                actual.len()
            ),
        });
    }

    for (i, e) in graph.edges().iter().enumerate() {
        let mut bad = Vec::new();
        if !actual.contains(&e.reference) || !actual.contains(&e.aligned) {
            bad.push("endpoint outside vertex set");
        }
        if e.reference.j == e.aligned.j {
            bad.push("endpoints share a transmitter");
        }
        if e.label < 1 || e.label > k_iac {
            bad.push("label outside [1, k_iac]");
        } else {
            if e.reference.j <= e.label {
                bad.push("reference user already decoded at this receiver");
            }
            if e.aligned.j <= e.label {
                bad.push("aligned user already decoded at this receiver");
            }
        }
        for msg in bad {
            violations.push(Violation {
                kind: ViolationKind::BadEndpoint,
                detail: format!("edge {i}: {msg}"),
            });
        }
    }

    // Per-label checks: single use of each aligned vertex, disjoint
    // reference/aligned roles, and no same-transmitter pair inside one
    // label's connected components.
    let labels: BTreeSet<usize> = graph.edges().iter().map(|e| e.label).collect();
    for &label in &labels {
        let label_edges: Vec<&Edge> = graph.edges().iter().filter(|e| e.label == label).collect();
        let mut aligned_seen = BTreeSet::new();
        let mut reference_seen = BTreeSet::new();
        for e in &label_edges {
            if !aligned_seen.insert(e.aligned) {
                violations.push(Violation {
                    kind: ViolationKind::DuplicateAlignment,
                    detail: format!("{} aligned twice at receiver {label}", e.aligned),
                });
            }
            reference_seen.insert(e.reference);
        }
        for v in aligned_seen.intersection(&reference_seen) {
            violations.push(Violation {
                kind: ViolationKind::DuplicateAlignment,
                detail: format!("{v} is both reference and aligned at receiver {label}"),
            });
        }

        let mut uf = UnionFind::new(graph.vertices().len());
        for e in &label_edges {
            if let (Some(a), Some(b)) = (
                graph.vertex_index(e.reference),
                graph.vertex_index(e.aligned),
            ) {
                uf.add_edge(a, b);
            }
        }
        let mut tx_by_component: HashMap<usize, BTreeSet<usize>> = HashMap::new();
        for (i, v) in graph.vertices().iter().enumerate() {
            let root = uf.find(i);
            if uf.component_size(root) < 2 {
                continue;
            }
            if !tx_by_component.entry(root).or_default().insert(v.j) {
                violations.push(Violation {
                    kind: ViolationKind::SameLabelTransmitterClash,
                    detail: format!(
                        "two streams of transmitter {} share a label-{label} component",
                        v.j
                    ),
                });
            }
        }
    }

    // Loop bound per subgraph.
    let mut uf = UnionFind::new(graph.vertices().len());
    for e in graph.edges() {
        if let (Some(a), Some(b)) = (
            graph.vertex_index(e.reference),
            graph.vertex_index(e.aligned),
        ) {
            uf.add_edge(a, b);
        }
    }
    let mut seen_roots = BTreeSet::new();
    for i in 0..graph.vertices().len() {
        let root = uf.find(i);
        if !seen_roots.insert(root) {
            continue;
        }
        let p = uf.component_size(root);
        let e = uf.component_edges(root);
        if e > p {
            violations.push(Violation {
                kind: ViolationKind::SecondLoop,
                detail: format!("subgraph with {p} vertices carries {e} edges"),
            });
        }
    }

    // Equation counts per receiver.
    for k in 1..=k_iac {
        let expected_phi = {
            let later: usize = (k + 1..=config.num_users).map(|j| config.dof_of(j)).sum();
            let basis = config.num_antennas - config.dof_of(k);
            later.saturating_sub(basis)
        };
        let actual_phi = graph.edges().iter().filter(|e| e.label == k).count();
        if actual_phi != expected_phi {
            violations.push(Violation {
                kind: ViolationKind::EquationCountMismatch,
                detail: format!("receiver {k}: {actual_phi} equations, expected {expected_phi}"),
            });
        }
    }

    violations
}

/// Tree or one-loop: the only two shapes a solvable subgraph can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubgraphKind {
    Tree,
    OneLoop,
}

/// One step of a cycle walk: which edge, and whether it is traversed in its
/// stored reference-to-aligned direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleStep {
    pub edge_index: usize,
    pub forward: bool,
}

#[derive(Debug, Clone)]
pub struct Subgraph {
    pub id: usize,
    pub vertices: Vec<StreamId>,
    pub edge_indices: Vec<usize>,
    pub kind: SubgraphKind,
    /// The unique cycle, walked from its lowest vertex back to itself.
    /// `None` for trees.
    pub cycle: Option<Vec<CycleStep>>,
}

/// Splits the graph into connected subgraphs and classifies each as a tree
/// or a one-loop component, extracting the cycle in the latter case.
pub fn classify_subgraphs(graph: &IacGraph) -> Result<Vec<Subgraph>> {
    let n = graph.vertices().len();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &sg) in graph.partition().iter().enumerate() {
        members.entry(sg).or_default().push(i);
    }
    let mut edges_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (ei, e) in graph.edges().iter().enumerate() {
        let vi = graph
            .vertex_index(e.reference)
            .ok_or_else(|| IacError::MalformedGraph(format!("edge {ei} references unknown vertex")))?;
        graph
            .vertex_index(e.aligned)
            .ok_or_else(|| IacError::MalformedGraph(format!("edge {ei} aligns unknown vertex")))?;
        edges_of.entry(graph.partition()[vi]).or_default().push(ei);
    }

    let mut out = Vec::new();
    for (&sg, verts) in &members {
        let edge_indices = edges_of.get(&sg).cloned().unwrap_or_default();
        let p = verts.len();
        let e = edge_indices.len();
        let kind = if e + 1 == p {
            SubgraphKind::Tree
        } else if e == p {
            SubgraphKind::OneLoop
        } else {
            return Err(IacError::MalformedGraph(format!(
                "subgraph {sg} has {p} vertices and {e} edges"
            )));
        };
        let cycle = match kind {
            SubgraphKind::Tree => None,
            SubgraphKind::OneLoop => Some(extract_cycle(graph, n, &edge_indices)?),
        };
        out.push(Subgraph {
            id: sg,
            vertices: verts.iter().map(|&i| graph.vertices()[i]).collect(),
            edge_indices,
            kind,
            cycle,
        });
    }
    Ok(out)
}

/// Finds the unique cycle by pruning degree-1 vertices, then walks it from
/// its lowest vertex with a deterministic neighbor order.
fn extract_cycle(graph: &IacGraph, n: usize, edge_indices: &[usize]) -> Result<Vec<CycleStep>> {
    let mut degree = vec![0usize; n];
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (edge, other)
    for &ei in edge_indices {
        let e = &graph.edges()[ei];
        let a = graph.vertex_index(e.reference).unwrap();
        let b = graph.vertex_index(e.aligned).unwrap();
        degree[a] += 1;
        degree[b] += 1;
        adj[a].push((ei, b));
        adj[b].push((ei, a));
    }

    let mut removed_edge = vec![false; graph.edges().len()];
    let mut alive: Vec<usize> = edge_indices
        .iter()
        .flat_map(|&ei| {
            let e = &graph.edges()[ei];
            [
                graph.vertex_index(e.reference).unwrap(),
                graph.vertex_index(e.aligned).unwrap(),
            ]
        })
        .collect();
    alive.sort_unstable();
    alive.dedup();
    let mut in_cycle: Vec<bool> = vec![false; n];
    for &v in &alive {
        in_cycle[v] = true;
    }
    let mut queue: Vec<usize> = alive.iter().copied().filter(|&v| degree[v] == 1).collect();
    while let Some(v) = queue.pop() {
        in_cycle[v] = false;
        for &(ei, other) in &adj[v] {
            if removed_edge[ei] || !in_cycle[other] {
                continue;
            }
            removed_edge[ei] = true;
            degree[other] -= 1;
            if degree[other] == 1 {
                queue.push(other);
            }
        }
    }

    let cycle_vertices: Vec<usize> = alive.into_iter().filter(|&v| in_cycle[v]).collect();
    let start = *cycle_vertices
        .iter()
        .min_by_key(|&&v| graph.vertices()[v])
        .ok_or_else(|| IacError::MalformedGraph("one-loop subgraph has no cycle".into()))?;

    let mut steps = Vec::new();
    let mut used = vec![false; graph.edges().len()];
    let mut current = start;
    loop {
        // Deterministic choice among the unused cycle edges at `current`.
        let mut options: Vec<(StreamId, usize, usize)> = adj[current]
            .iter()
            .filter(|&&(ei, other)| {
                !removed_edge[ei] && !used[ei] && in_cycle[other]
            })
            .map(|&(ei, other)| (graph.vertices()[other], graph.edges()[ei].label, ei))
            .collect();
        if options.is_empty() {
            break;
        }
        options.sort();
        let (_, _, ei) = options[0];
        let e = &graph.edges()[ei];
        let a = graph.vertex_index(e.reference).unwrap();
        let forward = a == current;
        used[ei] = true;
        steps.push(CycleStep {
            edge_index: ei,
            forward,
        });
        current = if forward {
            graph.vertex_index(e.aligned).unwrap()
        } else {
            a
        };
        if current == start {
            break;
        }
    }
    if current != start || steps.is_empty() {
        return Err(IacError::MalformedGraph(
            "cycle walk failed to close".into(),
        ));
    }
    Ok(steps)
}
