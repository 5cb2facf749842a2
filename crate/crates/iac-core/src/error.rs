//! Error types shared across the crate.

use thiserror::Error;

use crate::feasibility::FeasibilityVerdict;

/// Unified error type for configuration, construction, solving and simulation.
#[derive(Debug, Error)]
pub enum IacError {
    /// A `SystemConfig` (or another input) violates its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The DoF tuple fails the closed-form existence conditions.
    #[error("infeasible DoF tuple: {} inequality violation(s)", verdict.failed_inequalities.len())]
    Infeasible { verdict: FeasibilityVerdict },

    /// Channel generation could not produce a well-conditioned matrix
    /// within its re-draw budget. Practically unreachable with a sane RNG.
    #[error("channel re-draw budget exhausted for link rx={rx}, tx={tx}")]
    ChannelRedrawExhausted { rx: usize, tx: usize },

    /// The randomized graph construction ran out of whole-receiver restarts.
    #[error("graph construction exhausted {restarts} restart(s) at receiver {receiver}")]
    ConstructionExhausted { receiver: usize, restarts: u32 },

    /// A graph failed a structural precondition (e.g. a subgraph with an
    /// edge count outside the tree/one-loop range).
    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    /// A matrix inversion fell below the conditioning floor.
    #[error("singular channel matrix in {context} (sigma_min/sigma_max = {cond:.3e})")]
    SingularChannel { context: String, cond: f64 },

    /// No eigenpair of a loop matrix met the residual tolerance.
    #[error("degenerate eigenproblem: best residual {residual:.3e} exceeds tolerance")]
    DegenerateEigenproblem { residual: f64 },

    /// An interference subspace is too large for the requested signal space.
    #[error("dimension overflow at receiver {receiver}: need {needed} free dimensions, have {available}")]
    DimensionOverflow {
        receiver: usize,
        needed: usize,
        available: usize,
    },

    /// An assembled precoding matrix lost column rank, or a stream was
    /// assigned twice / left unassigned during assembly.
    #[error("rank-deficient or inconsistent precoder for user {user}: {detail}")]
    RankDeficientPrecoder { user: usize, detail: String },

    /// The effective channel `U_k^H H_kk V_k` could not be equalized.
    #[error("singular effective channel at receiver {receiver}")]
    SingularEffectiveChannel { receiver: usize },

    /// A requested SNR point is not present in a sweep result.
    #[error("SNR point {snr_db} dB missing from sweep")]
    MissingPoint { snr_db: f64 },

    /// `span_residual` was asked to compare a zero vector.
    #[error("zero vector has no direction")]
    ZeroVector,

    /// Simulation parameters are inconsistent.
    #[error("invalid simulation parameters: {0}")]
    InvalidSimParams(String),

    /// A design bundle or channel export failed to parse.
    #[error("malformed bundle: {0}")]
    BundleFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IacError>;
