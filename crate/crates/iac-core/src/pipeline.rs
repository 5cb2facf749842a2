//! End-to-end design orchestration: feasibility gate, channel generation,
//! graph construction (optimal wiring with fallback to the general one),
//! closed-form solving, receiver design, and verification.

use crate::error::{IacError, Result};
use crate::feasibility::{check_feasibility, is_optimal_tuple};
use crate::graph::{
    build_graph_general, build_graph_optimal, AlignmentEquationSet, ConstructionTrace, IacGraph,
    DEFAULT_RETRY_BUDGET,
};
use crate::solver::{design_receivers, solve_precoders, EigenSelection, PrecoderSet, ReceiverSet};
use crate::system::{generate_channels, ChannelSet, SystemConfig};
use crate::verify::{verify_design, DesignReport, Tolerances};

/// Knobs for one design run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub channel_seed: u64,
    pub graph_seed: u64,
    pub retry_budget: u32,
    /// Use the specialized 2M construction when the tuple qualifies.
    pub prefer_optimal: bool,
    pub eigen: EigenSelection,
    pub tolerances: Tolerances,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            channel_seed: 1,
            graph_seed: 1,
            retry_budget: DEFAULT_RETRY_BUDGET,
            prefer_optimal: false,
            eigen: EigenSelection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct DesignArtifacts {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub graph: IacGraph,
    pub equations: AlignmentEquationSet,
    pub trace: ConstructionTrace,
    pub precoders: PrecoderSet,
    pub receivers: ReceiverSet,
    pub report: DesignReport,
    pub graph_seed: u64,
    pub used_optimal_construction: bool,
}

/// Runs the whole pipeline. Infeasible tuples are rejected before any
/// construction; if the specialized optimal wiring dead-ends, the general
/// randomized construction takes over.
pub fn run_design(config: &SystemConfig, options: &DesignOptions) -> Result<DesignArtifacts> {
    config.validate()?;
    let verdict = check_feasibility(config);
    if !verdict.feasible {
        return Err(IacError::Infeasible { verdict });
    }

    let channels = generate_channels(config, options.channel_seed)?;

    let use_optimal = options.prefer_optimal && is_optimal_tuple(config);
    let (graph, equations, trace, used_optimal_construction) = if use_optimal {
        match build_graph_optimal(config, options.graph_seed) {
            Ok((g, e, t)) => (g, e, t, true),
            Err(IacError::ConstructionExhausted { .. }) => {
                let (g, e, t) =
                    build_graph_general(config, options.graph_seed, options.retry_budget)?;
                (g, e, t, false)
            }
            Err(other) => return Err(other),
        }
    } else {
        let (g, e, t) = build_graph_general(config, options.graph_seed, options.retry_budget)?;
        (g, e, t, false)
    };

    let precoders = solve_precoders(&graph, &channels, config, options.graph_seed, options.eigen)?;
    let receivers = design_receivers(&channels, &precoders, config)?;
    let report = verify_design(
        &channels,
        &precoders,
        &receivers,
        &equations,
        config,
        &options.tolerances,
    );

    Ok(DesignArtifacts {
        config: config.clone(),
        channels,
        graph,
        equations,
        trace,
        precoders,
        receivers,
        report,
        graph_seed: options.graph_seed,
        used_optimal_construction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, d: &[usize]) -> SystemConfig {
        SystemConfig::new(d.len(), m, d.to_vec()).unwrap()
    }

    #[test]
    fn infeasible_rejected_before_construction() {
        let config = cfg(2, &[2, 2, 2]);
        match run_design(&config, &DesignOptions::default()) {
            Err(IacError::Infeasible { verdict }) => assert!(!verdict.feasible),
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn optimal_flag_engages_specialized_construction() {
        let config = cfg(6, &[3, 3, 2, 2, 2]);
        let options = DesignOptions {
            prefer_optimal: true,
            ..DesignOptions::default()
        };
        let artifacts = run_design(&config, &options).unwrap();
        assert!(artifacts.used_optimal_construction);
        assert!(artifacts.report.pass);
        assert_eq!(artifacts.report.total_dof_claimed, 12);
    }

    #[test]
    fn optimal_flag_is_ignored_for_non_optimal_tuples() {
        let config = cfg(6, &[3, 1, 3, 2, 2]);
        let options = DesignOptions {
            prefer_optimal: true,
            ..DesignOptions::default()
        };
        let artifacts = run_design(&config, &options).unwrap();
        assert!(!artifacts.used_optimal_construction);
        assert!(artifacts.report.pass);
        assert_eq!(artifacts.equations.len(), 8);
    }

    #[test]
    fn design_is_deterministic() {
        let config = cfg(6, &[3, 1, 3, 2, 2]);
        let options = DesignOptions {
            channel_seed: 12,
            graph_seed: 34,
            ..DesignOptions::default()
        };
        let a = run_design(&config, &options).unwrap();
        let b = run_design(&config, &options).unwrap();
        assert_eq!(a.precoders, b.precoders);
        assert_eq!(a.receivers, b.receivers);
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.report, b.report);
    }
}
