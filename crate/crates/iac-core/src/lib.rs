//! Closed-form transceiver design for interference alignment and
//! cancellation (IAC) in K-user MIMO interference channels.
//!
//! The crate covers the full path from a DoF tuple to a certified link:
//!
//! - [`system`]: problem configuration, seeded Rayleigh channels, the
//!   cancellation cutoff `k_iac` and the backhaul overhead count;
//! - [`feasibility`]: the three-inequality existence test and enumeration
//!   of the tuples that reach the maximum total DoF of `2M`;
//! - [`graph`]: construction and validation of the alignment graph whose
//!   edges are span-equality constraints (at most one loop per subgraph);
//! - [`solver`]: closed-form precoders (tree propagation and loop
//!   eigenproblems) plus zero-forcing receivers;
//! - [`verify`]: numerical certification — residuals, ranks, conditioning;
//! - [`simulate`]: link-level Monte-Carlo with successive backhaul
//!   cancellation, SNR sweeps, and the DoF slope estimator;
//! - [`pipeline`] and [`bundle`]: one-call orchestration and a portable
//!   JSON artifact for reproducible runs.
//!
//! Monte-Carlo trials run on rayon when the default `parallel` feature is
//! enabled; disabling it yields a fully sequential build with identical
//! numerical output.

pub mod bundle;
pub mod error;
pub mod feasibility;
pub mod graph;
pub mod linalg;
pub mod pipeline;
mod seeding;
pub mod simulate;
pub mod solver;
pub mod system;
pub mod union_find;
pub mod verify;

pub use bundle::{DesignBundle, MatrixData, RunManifest, BUNDLE_VERSION};
pub use error::{IacError, Result};
pub use feasibility::{
    check_feasibility, enumerate_optimal_tuples, is_optimal_tuple, FeasibilityVerdict,
};
pub use graph::{
    build_graph_general, build_graph_optimal, classify_subgraphs, validate_graph,
    AlignmentEquationSet, ConstructionTrace, Edge, IacGraph, SubgraphKind, DEFAULT_RETRY_BUDGET,
};
pub use pipeline::{run_design, DesignArtifacts, DesignOptions};
pub use simulate::{
    estimate_dof_slope, simulate_trial, snr_sweep, snr_sweep_sequential, Cancellation, SimParams,
    SweepResult, SymbolModel,
};
pub use solver::{
    design_receivers, solve_precoders, EigenSelection, PrecoderSet, ReceiverSet,
};
pub use system::{
    compute_k_iac, compute_overhead, generate_channels, ChannelSet, StreamId, SystemConfig,
};
pub use verify::{check_dimension_condition, span_residual, verify_design, DesignReport, Tolerances};
