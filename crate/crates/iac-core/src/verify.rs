//! Numerical certification of a completed design: span residuals for every
//! alignment equation, zero-forcing leakage and effective-channel
//! conditioning per receiver, and the dimension bookkeeping that makes the
//! signal and interference subspaces complementary.

use serde::{Deserialize, Serialize};

use crate::error::{IacError, Result};
use crate::graph::AlignmentEquationSet;
use crate::linalg::{numerical_rank, CMatrix, CVector};
use crate::solver::{interference_stack, PrecoderSet, ReceiverSet};
use crate::system::{
    compute_k_iac, compute_overhead, post_cancellation_interferers, ChannelSet, StreamId,
    SystemConfig,
};

/// Residual and rank tolerances. Defaults suit double precision with a
/// handful of chained inversions; every field can be overridden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum sine of the principal angle for an alignment equation.
    pub align_sin: f64,
    /// Maximum per-stream zero-forcing leakage, relative to the stream norm.
    pub zf_residual: f64,
    /// Minimum singular value of the effective channel `U_k^H H_kk V_k`.
    pub sigma_min: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            align_sin: 1e-8,
            zf_residual: 1e-8,
            sigma_min: 1e-6,
            rank_rel: 1e-8,
        }
    }
}

impl Tolerances {
    /// Applies `IAC_TOL_ALIGN_SIN`, `IAC_TOL_ZF_RESIDUAL`,
    /// `IAC_TOL_SIGMA_MIN` and `IAC_TOL_RANK_REL` on top of `self`.
    /// Unset or unparsable variables leave the field untouched.
    pub fn with_env_overrides(mut self) -> Self {
        let read = |name: &str| std::env::var(name).ok().and_then(|v| v.parse::<f64>().ok());
        if let Some(v) = read("IAC_TOL_ALIGN_SIN") {
            self.align_sin = v;
        }
        if let Some(v) = read("IAC_TOL_ZF_RESIDUAL") {
            self.zf_residual = v;
        }
        if let Some(v) = read("IAC_TOL_SIGMA_MIN") {
            self.sigma_min = v;
        }
        if let Some(v) = read("IAC_TOL_RANK_REL") {
            self.rank_rel = v;
        }
        self
    }
}

/// Sine of the principal angle between two complex lines.
///
/// Zero iff the vectors are collinear up to a complex scale; one iff they
/// are orthogonal. Symmetric and invariant to scaling either argument.
///
/// Evaluated as the norm of the orthogonal rejection between the normalized
/// vectors rather than `sqrt(1 - cos^2)`: the latter bottoms out near
/// `sqrt(eps) ~ 1.5e-8` for collinear inputs, which would drown the
/// residuals this function exists to measure.
pub fn span_residual(a: &CVector, b: &CVector) -> Result<f64> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(IacError::ZeroVector);
    }
    let ua = a.unscale(na);
    let ub = b.unscale(nb);
    let rejection = |x: &CVector, y: &CVector| {
        let c = (x.adjoint() * y)[(0, 0)];
        (y - x * c).norm().min(1.0)
    };
    // Taking both orders keeps the result exactly symmetric in (a, b).
    Ok(rejection(&ua, &ub).max(rejection(&ub, &ua)))
}

/// Residual of one alignment equation in a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    pub receiver: usize,
    pub reference: StreamId,
    pub aligned: StreamId,
    pub sin_angle: f64,
}

/// Per-receiver health figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverCheck {
    pub k: usize,
    /// Largest relative leakage `|U_k^H H_kj v| / |H_kj v|` over the
    /// post-cancellation interference streams.
    pub max_zf_residual: f64,
    /// Same maximum taken over *all* interfering streams, cancelled ones
    /// included; informational only.
    pub raw_interference_residual: f64,
    pub sigma_min_effective: f64,
    pub signal_rank: usize,
    pub interference_rank: usize,
    pub dimension_ok: bool,
}

/// Machine-readable verification summary for a complete design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub k_iac: usize,
    pub overhead_packets: usize,
    pub total_dof_claimed: usize,
    pub per_equation_residuals: Vec<EquationResidual>,
    pub per_receiver: Vec<ReceiverCheck>,
    pub tolerances: Tolerances,
    pub pass: bool,
}

/// Rank bookkeeping at one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionCheck {
    pub signal_rank: usize,
    pub interference_rank: usize,
    pub ok: bool,
}

/// Ranks of the signal block, the surviving interference block, and their
/// concatenation at receiver `k`. `ok` demands a full-rank signal block,
/// a combined dimension within `M`, and linear independence of the two.
pub fn check_dimension_condition(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    config: &SystemConfig,
    k: usize,
    rank_rel: f64,
) -> DimensionCheck {
    let m = config.num_antennas;
    let d_k = config.dof_of(k);
    let signal = channels.h(k, k) * precoders.v(k);
    let interference = interference_stack(channels, precoders, config, k);
    let signal_rank = numerical_rank(&signal, rank_rel);
    let interference_rank = numerical_rank(&interference, rank_rel);

    let mut combined = CMatrix::zeros(m, signal.ncols() + interference.ncols());
    combined
        .view_mut((0, 0), (m, signal.ncols()))
        .copy_from(&signal);
    combined
        .view_mut((0, signal.ncols()), (m, interference.ncols()))
        .copy_from(&interference);
    let combined_rank = numerical_rank(&combined, rank_rel);

    let ok = signal_rank == d_k
        && signal_rank + interference_rank <= m
        && combined_rank == signal_rank + interference_rank;
    DimensionCheck {
        signal_rank,
        interference_rank,
        ok,
    }
}

/// Evaluates every alignment equation and every receiver against the
/// tolerances. Failures are reported in the result, never thrown.
pub fn verify_design(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    receivers: &ReceiverSet,
    equations: &AlignmentEquationSet,
    config: &SystemConfig,
    tolerances: &Tolerances,
) -> DesignReport {
    let k_iac = compute_k_iac(config);
    let mut pass = true;

    let mut per_equation = Vec::with_capacity(equations.len());
    for eq in &equations.equations {
        let lhs = channels.h(eq.receiver, eq.reference.j) * precoders.column(eq.reference);
        let rhs = channels.h(eq.receiver, eq.aligned.j) * precoders.column(eq.aligned);
        let sin_angle = span_residual(&lhs, &rhs).unwrap_or(1.0);
        if sin_angle >= tolerances.align_sin {
            pass = false;
        }
        per_equation.push(EquationResidual {
            receiver: eq.receiver,
            reference: eq.reference,
            aligned: eq.aligned,
            sin_angle,
        });
    }

    let mut per_receiver = Vec::with_capacity(config.num_users);
    for k in 1..=config.num_users {
        let u = receivers.u(k);

        let mut max_zf = 0.0f64;
        for j in post_cancellation_interferers(config, k) {
            let hv = channels.h(k, j) * precoders.v(j);
            for c in 0..hv.ncols() {
                let col = hv.column(c);
                let leak = (u.adjoint() * col).norm() / col.norm();
                max_zf = max_zf.max(leak);
            }
        }

        let mut raw = 0.0f64;
        for j in (1..=config.num_users).filter(|&j| j != k) {
            let hv = channels.h(k, j) * precoders.v(j);
            for c in 0..hv.ncols() {
                let col = hv.column(c);
                raw = raw.max((u.adjoint() * col).norm() / col.norm());
            }
        }

        let effective = u.adjoint() * channels.h(k, k) * precoders.v(k);
        let sigma_min_effective = smallest_singular_value(&effective);
        let dims = check_dimension_condition(channels, precoders, config, k, tolerances.rank_rel);

        if max_zf >= tolerances.zf_residual
            || sigma_min_effective <= tolerances.sigma_min
            || !dims.ok
        {
            pass = false;
        }
        per_receiver.push(ReceiverCheck {
            k,
            max_zf_residual: max_zf,
            raw_interference_residual: raw,
            sigma_min_effective,
            signal_rank: dims.signal_rank,
            interference_rank: dims.interference_rank,
            dimension_ok: dims.ok,
        });
    }

    DesignReport {
        k_iac,
        overhead_packets: compute_overhead(config),
        total_dof_claimed: config.total_dof(),
        per_equation_residuals: per_equation,
        per_receiver,
        tolerances: *tolerances,
        pass,
    }
}

fn smallest_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph_general, build_graph_optimal, DEFAULT_RETRY_BUDGET};
    use crate::linalg::random_unit_vector;
    use crate::solver::{design_receivers, solve_precoders, EigenSelection};
    use crate::system::generate_channels;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, d: &[usize]) -> SystemConfig {
        SystemConfig::new(d.len(), m, d.to_vec()).unwrap()
    }

    #[test]
    fn span_residual_scaling_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_unit_vector(&mut rng, 5);
        let scaled = &v * Complex64::new(0.0, 3.0);
        assert!(span_residual(&v, &scaled).unwrap() < 1e-15);

        let e0 = CVector::from_fn(2, |i, _| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        let e1 = CVector::from_fn(2, |i, _| Complex64::new(if i == 1 { 1.0 } else { 0.0 }, 0.0));
        assert!((span_residual(&e0, &e1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn span_residual_forty_five_degrees() {
        let a = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = CVector::from_vec(vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)]);
        let r = span_residual(&a, &b).unwrap();
        assert!((r - 0.7071067811865476).abs() < 1e-12);
    }

    #[test]
    fn span_residual_rejects_zero() {
        let z = CVector::zeros(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_unit_vector(&mut rng, 3);
        assert!(matches!(span_residual(&z, &v), Err(IacError::ZeroVector)));
        assert!(matches!(span_residual(&v, &z), Err(IacError::ZeroVector)));
    }

    #[test]
    fn verified_pipeline_passes() {
        let config = cfg(6, &[3, 3, 2, 2, 2]);
        let channels = generate_channels(&config, 40).unwrap();
        let (graph, equations, _) = build_graph_optimal(&config, 4).unwrap();
        let precoders =
            solve_precoders(&graph, &channels, &config, 11, EigenSelection::default()).unwrap();
        let receivers = design_receivers(&channels, &precoders, &config).unwrap();
        let report = verify_design(
            &channels,
            &precoders,
            &receivers,
            &equations,
            &config,
            &Tolerances::default(),
        );
        assert!(report.pass, "{report:?}");
        assert_eq!(report.k_iac, 2);
        assert_eq!(report.overhead_packets, 21);
        assert_eq!(report.total_dof_claimed, 12);
        assert_eq!(report.per_equation_residuals.len(), 9);
        for eq in &report.per_equation_residuals {
            assert!(eq.sin_angle < 1e-8);
        }
        for rc in &report.per_receiver {
            assert_eq!(rc.signal_rank, config.dof_of(rc.k));
            assert!(rc.sigma_min_effective > 1e-6);
        }
    }

    #[test]
    fn random_precoders_fail_loudly() {
        let config = cfg(6, &[3, 1, 3, 2, 2]);
        let channels = generate_channels(&config, 50).unwrap();
        let (graph, equations, _) =
            build_graph_general(&config, 50, DEFAULT_RETRY_BUDGET).unwrap();
        let good =
            solve_precoders(&graph, &channels, &config, 50, EigenSelection::default()).unwrap();
        let receivers = design_receivers(&channels, &good, &config).unwrap();

        // Swap in random unit columns: alignment collapses.
        let mut rng = ChaCha8Rng::seed_from_u64(999);
        let mats: Vec<CMatrix> = (1..=5)
            .map(|j| {
                let mut v = CMatrix::zeros(6, config.dof_of(j));
                for c in 0..config.dof_of(j) {
                    v.set_column(c, &random_unit_vector(&mut rng, 6));
                }
                v
            })
            .collect();
        let random_precoders = PrecoderSet::new(mats, &config).unwrap();
        let report = verify_design(
            &channels,
            &random_precoders,
            &receivers,
            &equations,
            &config,
            &Tolerances::default(),
        );
        assert!(!report.pass);
        let worst = report
            .per_receiver
            .iter()
            .map(|r| r.max_zf_residual)
            .fold(0.0, f64::max);
        assert!(worst > 1e-2, "expected O(1) leakage, got {worst}");
    }

    #[test]
    fn zero_k_iac_design_verifies_with_no_equations() {
        let config = cfg(6, &[2, 2, 2]);
        let channels = generate_channels(&config, 60).unwrap();
        let (graph, equations, _) = build_graph_general(&config, 0, 4).unwrap();
        assert!(equations.is_empty());
        let precoders =
            solve_precoders(&graph, &channels, &config, 1, EigenSelection::default()).unwrap();
        let receivers = design_receivers(&channels, &precoders, &config).unwrap();
        let report = verify_design(
            &channels,
            &precoders,
            &receivers,
            &equations,
            &config,
            &Tolerances::default(),
        );
        assert!(report.pass, "{report:?}");
        assert_eq!(report.per_equation_residuals.len(), 0);
        assert_eq!(report.overhead_packets, 0);
    }

    #[test]
    fn dimension_check_on_worked_example() {
        let config = cfg(6, &[3, 1, 3, 2, 2]);
        let channels = generate_channels(&config, 70).unwrap();
        let (graph, _, _) = build_graph_general(&config, 70, DEFAULT_RETRY_BUDGET).unwrap();
        let precoders =
            solve_precoders(&graph, &channels, &config, 70, EigenSelection::default()).unwrap();
        let check = check_dimension_condition(&channels, &precoders, &config, 1, 1e-8);
        assert_eq!(check.signal_rank, 3);
        assert_eq!(check.interference_rank, 3);
        assert!(check.ok);
    }

    #[test]
    fn dimension_check_single_user() {
        let config = cfg(4, &[4]);
        let channels = generate_channels(&config, 80).unwrap();
        let graph = crate::graph::IacGraph::from_parts(Vec::new(), Vec::new());
        let precoders =
            solve_precoders(&graph, &channels, &config, 0, EigenSelection::default()).unwrap();
        let check = check_dimension_condition(&channels, &precoders, &config, 1, 1e-8);
        assert_eq!(check.interference_rank, 0);
        assert_eq!(check.signal_rank, 4);
        assert!(check.ok);
    }

    #[test]
    fn rank_thresholding_matches_elimination_oracle() {
        // Gaussian elimination over rationals is exact for integer inputs.
        fn elimination_rank(rows: Vec<Vec<i64>>) -> usize {
            let mut m: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().map(|&x| x as f64).collect())
                .collect();
            let (nr, nc) = (m.len(), m[0].len());
            let mut rank = 0;
            for col in 0..nc {
                let pivot = (rank..nr).find(|&r| m[r][col].abs() > 1e-9);
                let Some(p) = pivot else { continue };
                m.swap(rank, p);
                let scale = m[rank][col];
                for c in 0..nc {
                    m[rank][c] /= scale;
                }
                for r in 0..nr {
                    if r != rank && m[r][col].abs() > 0.0 {
                        let factor = m[r][col];
                        for c in 0..nc {
                            m[r][c] -= factor * m[rank][c];
                        }
                    }
                }
                rank += 1;
            }
            rank
        }

        let cases: Vec<Vec<Vec<i64>>> = vec![
            vec![vec![1, 2], vec![2, 4]],
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
            vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]],
            vec![vec![0, 0], vec![0, 0]],
            vec![vec![3, 1, 4], vec![1, 5, 9], vec![2, 6, 5], vec![3, 5, 8]],
        ];
        for rows in cases {
            let nr = rows.len();
            let nc = rows[0].len();
            let m = CMatrix::from_fn(nr, nc, |r, c| Complex64::new(rows[r][c] as f64, 0.0));
            assert_eq!(
                numerical_rank(&m, 1e-8),
                elimination_rank(rows.clone()),
                "{rows:?}"
            );
        }
    }
}
