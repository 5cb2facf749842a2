//! Link-level Monte-Carlo simulation: received-signal assembly, the
//! two-step decode with backhaul cancellation, per-stream SINR, sum-rate
//! sweeps over SNR, and the DoF slope estimator.
//!
//! SINR is computed from the exact linear model (second-order statistics of
//! the equalized output), so the high-SNR slope carries no Monte-Carlo
//! noise; the per-trial symbol and noise draws still exercise the actual
//! decode-and-cancel path.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{IacError, Result};
use crate::linalg::{condition_ratio, CVector, COND_FLOOR};
use crate::seeding::derive_seed;
use crate::solver::{PrecoderSet, ReceiverSet};
use crate::system::{compute_k_iac, post_cancellation_interferers, ChannelSet, SystemConfig};

/// Per-stream symbol constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolModel {
    /// Unit-power complex Gaussian symbols.
    #[default]
    Gaussian,
    /// Unit-power QPSK points `(+-1 +- i)/sqrt(2)`.
    Qpsk,
}

/// What gets subtracted during successive cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cancellation {
    /// Subtract with the true transmitted symbols (ideal backhaul).
    #[default]
    Genie,
    /// Subtract with hard decisions; requires QPSK symbols.
    Detected,
}

/// Simulation controls shared by a whole sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub snr_db_points: Vec<f64>,
    pub trials: u32,
    #[serde(default)]
    pub symbols: SymbolModel,
    #[serde(default)]
    pub cancellation: Cancellation,
    pub seed: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(IacError::InvalidSimParams("trials must be >= 1".into()));
        }
        if self.snr_db_points.is_empty() {
            return Err(IacError::InvalidSimParams(
                "at least one SNR point required".into(),
            ));
        }
        if self.cancellation == Cancellation::Detected && self.symbols != SymbolModel::Qpsk {
            return Err(IacError::InvalidSimParams(
                "detected cancellation requires QPSK symbols".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one decode pass at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Linear SINR per stream, users in order, streams within user.
    pub per_stream_sinr: Vec<f64>,
    /// Residual interference power per stream relative to unit signal power.
    pub per_stream_interference_power: Vec<f64>,
    pub per_user_rate_bits: Vec<f64>,
    pub sum_rate_bits: f64,
    /// Backhaul packets counted while the decode actually ran.
    pub packets_shared: usize,
    /// Worst relative decode error over all streams in this trial.
    pub max_decode_error: f64,
    /// Hard-decision symbol errors; present only for QPSK.
    pub symbol_errors: Option<usize>,
}

fn draw_symbols<R: Rng>(rng: &mut R, config: &SystemConfig, model: SymbolModel) -> Vec<CVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (1..=config.num_users)
        .map(|j| {
            CVector::from_fn(config.dof_of(j), |_, _| match model {
                SymbolModel::Gaussian => {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * s, im * s)
                }
                SymbolModel::Qpsk => {
                    let re = if rng.random::<bool>() { s } else { -s };
                    let im = if rng.random::<bool>() { s } else { -s };
                    Complex64::new(re, im)
                }
            })
        })
        .collect()
}

fn qpsk_slice(v: &CVector) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    v.map(|z| Complex64::new(if z.re >= 0.0 { s } else { -s }, if z.im >= 0.0 { s } else { -s }))
}

/// One Monte-Carlo trial at `snr_db` (use `f64::INFINITY` for the noiseless
/// limit). Draws symbols and noise, runs the two decoding steps with
/// backhaul cancellation, and reports the model-exact SINR per stream.
pub fn simulate_trial(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    receivers: &ReceiverSet,
    config: &SystemConfig,
    params: &SimParams,
    snr_db: f64,
    trial_seed: u64,
) -> Result<TrialResult> {
    let k_users = config.num_users;
    let m = config.num_antennas;
    let k_iac = compute_k_iac(config);
    let noise_var = 10f64.powf(-snr_db / 10.0);

    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let symbols = draw_symbols(&mut rng, config, params.symbols);
    let noise_scale = (noise_var / 2.0).sqrt();
    let noise: Vec<CVector> = (0..k_users)
        .map(|_| {
            CVector::from_fn(m, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * noise_scale, im * noise_scale)
            })
        })
        .collect();

    // Raw received signals, Eq-style: sum of all precoded streams plus noise.
    let transmitted: Vec<CVector> = (1..=k_users)
        .map(|j| precoders.v(j) * &symbols[j - 1])
        .collect();
    let received: Vec<CVector> = (1..=k_users)
        .map(|k| {
            let mut y = noise[k - 1].clone();
            for j in 1..=k_users {
                y += channels.h(k, j) * &transmitted[j - 1];
            }
            y
        })
        .collect();

    // Equalizers and exact second-order statistics.
    let mut equalizers = Vec::with_capacity(k_users);
    for k in 1..=k_users {
        let effective = receivers.u(k).adjoint() * channels.h(k, k) * precoders.v(k);
        if condition_ratio(&effective) < COND_FLOOR {
            return Err(IacError::SingularEffectiveChannel { receiver: k });
        }
        let g = effective
            .try_inverse()
            .ok_or(IacError::SingularEffectiveChannel { receiver: k })?;
        equalizers.push(g * receivers.u(k).adjoint());
    }

    let mut per_stream_sinr = Vec::with_capacity(config.total_dof());
    let mut per_stream_interference = Vec::with_capacity(config.total_dof());
    let mut per_user_rate = Vec::with_capacity(k_users);
    for k in 1..=k_users {
        let w = &equalizers[k - 1];
        let d_k = config.dof_of(k);
        let mut interference = vec![0.0f64; d_k];
        for j in post_cancellation_interferers(config, k) {
            let b = w * channels.h(k, j) * precoders.v(j);
            for l in 0..d_k {
                interference[l] += b.row(l).iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        let mut user_rate = 0.0;
        for l in 0..d_k {
            let noise_power =
                noise_var * w.row(l).iter().map(|z| z.norm_sqr()).sum::<f64>();
            let denom = interference[l] + noise_power;
            let sinr = if denom > 0.0 { 1.0 / denom } else { f64::INFINITY };
            per_stream_sinr.push(sinr);
            per_stream_interference.push(interference[l]);
            user_rate += (1.0 + sinr).log2();
        }
        per_user_rate.push(user_rate);
    }
    let sum_rate_bits = per_user_rate.iter().sum();

    // Decode pass. Step one walks the cancellation schedule in order; step
    // two lets everyone else decode after subtracting the shared packets.
    let mut shared_estimates: Vec<Option<CVector>> = vec![None; k_users];
    let mut packets_shared = 0usize;
    let mut max_decode_error = 0.0f64;
    let mut symbol_errors = 0usize;

    let decode_at = |k: usize,
                         cancel_up_to: usize,
                         shared: &[Option<CVector>],
                         max_err: &mut f64,
                         errors: &mut usize|
     -> Result<CVector> {
        let mut y = received[k - 1].clone();
        for j in 1..=cancel_up_to {
            if j == k {
                continue;
            }
            let x_hat = match params.cancellation {
                Cancellation::Genie => symbols[j - 1].clone(),
                Cancellation::Detected => shared[j - 1]
                    .clone()
                    .expect("decode order guarantees shared estimates"),
            };
            y -= channels.h(k, j) * precoders.v(j) * x_hat;
        }
        let estimate = &equalizers[k - 1] * y;
        let err = (&estimate - &symbols[k - 1]).norm() / symbols[k - 1].norm();
        *max_err = max_err.max(err);
        if params.symbols == SymbolModel::Qpsk {
            let sliced = qpsk_slice(&estimate);
            *errors += sliced
                .iter()
                .zip(symbols[k - 1].iter())
                .filter(|(a, b)| (*a - *b).norm() > 1e-9)
                .count();
            Ok(sliced)
        } else {
            Ok(estimate)
        }
    };

    for k in 1..=k_iac {
        let est = decode_at(
            k,
            k - 1,
            &shared_estimates,
            &mut max_decode_error,
            &mut symbol_errors,
        )?;
        shared_estimates[k - 1] = Some(est);
        packets_shared += config.dof_of(k) * (k_users - k);
    }
    for k in (k_iac + 1)..=k_users {
        decode_at(
            k,
            k_iac,
            &shared_estimates,
            &mut max_decode_error,
            &mut symbol_errors,
        )?;
    }

    Ok(TrialResult {
        per_stream_sinr,
        per_stream_interference_power: per_stream_interference,
        per_user_rate_bits: per_user_rate,
        sum_rate_bits,
        packets_shared,
        max_decode_error,
        symbol_errors: (params.symbols == SymbolModel::Qpsk).then_some(symbol_errors),
    })
}

/// One aggregated sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mean_sum_rate_bits: f64,
    pub per_user_rate: Vec<f64>,
    pub per_stream_sinr_db: Vec<f64>,
    pub packets_shared: usize,
}

/// Sweep rows ordered by SNR.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Plain-text CSV with a constant reference-slope column.
    pub fn to_csv(&self, slope_ref: f64) -> String {
        let mut out = String::from("snr_db,sum_rate_bits,slope_ref\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.snr_db, row.mean_sum_rate_bits, slope_ref
            ));
        }
        out
    }
}

fn sweep_impl(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    receivers: &ReceiverSet,
    config: &SystemConfig,
    params: &SimParams,
    parallel: bool,
) -> Result<SweepResult> {
    params.validate()?;
    let mut points = params.snr_db_points.clone();
    points.sort_by(|a, b| a.partial_cmp(b).expect("SNR points must not be NaN"));

    let mut rows = Vec::with_capacity(points.len());
    for (si, &snr_db) in points.iter().enumerate() {
        let run = |t: u32| -> Result<TrialResult> {
            let trial_seed = derive_seed(params.seed, &[si as u64, t as u64]);
            simulate_trial(
                channels, precoders, receivers, config, params, snr_db, trial_seed,
            )
        };

        #[cfg(feature = "parallel")]
        let trials: Vec<TrialResult> = if parallel {
            (0..params.trials)
                .into_par_iter()
                .map(run)
                .collect::<Result<_>>()?
        } else {
            (0..params.trials).map(run).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let trials: Vec<TrialResult> = {
            let _ = parallel;
            (0..params.trials).map(run).collect::<Result<_>>()?
        };

        let n = trials.len() as f64;
        let mean_sum_rate_bits = trials.iter().map(|t| t.sum_rate_bits).sum::<f64>() / n;
        let users = config.num_users;
        let per_user_rate: Vec<f64> = (0..users)
            .map(|u| trials.iter().map(|t| t.per_user_rate_bits[u]).sum::<f64>() / n)
            .collect();
        let streams = config.total_dof();
        let per_stream_sinr_db: Vec<f64> = (0..streams)
            .map(|s| {
                let mean_db = trials
                    .iter()
                    .map(|t| 10.0 * t.per_stream_sinr[s].log10())
                    .sum::<f64>()
                    / n;
                mean_db
            })
            .collect();
        let packets_shared = trials[0].packets_shared;
        debug_assert!(trials.iter().all(|t| t.packets_shared == packets_shared));

        rows.push(SweepRow {
            snr_db,
            mean_sum_rate_bits,
            per_user_rate,
            per_stream_sinr_db,
            packets_shared,
        });
    }
    Ok(SweepResult { rows })
}

/// Averages [`simulate_trial`] over the configured trials per SNR point.
/// Trial seeds derive from `(seed, snr index, trial index)`, so the result
/// is identical whether trials run in parallel or not.
pub fn snr_sweep(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    receivers: &ReceiverSet,
    config: &SystemConfig,
    params: &SimParams,
) -> Result<SweepResult> {
    sweep_impl(channels, precoders, receivers, config, params, true)
}

/// Same computation with trials forced onto the current thread; used by the
/// benchmarks and by determinism checks.
pub fn snr_sweep_sequential(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    receivers: &ReceiverSet,
    config: &SystemConfig,
    params: &SimParams,
) -> Result<SweepResult> {
    sweep_impl(channels, precoders, receivers, config, params, false)
}

/// High-SNR slope of the sum rate between two sweep points, in
/// bits per `log2(SNR)`: the empirical DoF.
pub fn estimate_dof_slope(sweep: &SweepResult, lo_db: f64, hi_db: f64) -> Result<f64> {
    if hi_db <= lo_db {
        return Err(IacError::InvalidSimParams(
            "slope needs hi_db > lo_db".into(),
        ));
    }
    let find = |target: f64| -> Result<&SweepRow> {
        sweep
            .rows
            .iter()
            .find(|r| (r.snr_db - target).abs() < 1e-9)
            .ok_or(IacError::MissingPoint { snr_db: target })
    };
    let lo = find(lo_db)?;
    let hi = find(hi_db)?;
    let denom = 10f64.powf((hi_db - lo_db) / 10.0).log2();
    Ok((hi.mean_sum_rate_bits - lo.mean_sum_rate_bits) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph_general, build_graph_optimal, IacGraph, DEFAULT_RETRY_BUDGET};
    use crate::linalg::CMatrix;
    use crate::solver::{design_receivers, solve_precoders, EigenSelection};
    use crate::system::generate_channels;

    fn cfg(m: usize, d: &[usize]) -> SystemConfig {
        SystemConfig::new(d.len(), m, d.to_vec()).unwrap()
    }

    fn params(points: &[f64], trials: u32, seed: u64) -> SimParams {
        SimParams {
            snr_db_points: points.to_vec(),
            trials,
            symbols: SymbolModel::Gaussian,
            cancellation: Cancellation::Genie,
            seed,
        }
    }

    struct Link {
        config: SystemConfig,
        channels: ChannelSet,
        precoders: PrecoderSet,
        receivers: ReceiverSet,
    }

    fn optimal_link(channel_seed: u64, graph_seed: u64) -> Link {
        let config = cfg(6, &[3, 3, 2, 2, 2]);
        let channels = generate_channels(&config, channel_seed).unwrap();
        let (graph, _, _) = build_graph_optimal(&config, graph_seed).unwrap();
        let precoders =
            solve_precoders(&graph, &channels, &config, graph_seed, EigenSelection::default())
                .unwrap();
        let receivers = design_receivers(&channels, &precoders, &config).unwrap();
        Link {
            config,
            channels,
            precoders,
            receivers,
        }
    }

    #[test]
    fn params_validation() {
        let mut p = params(&[20.0], 0, 1);
        assert!(p.validate().is_err());
        p.trials = 1;
        assert!(p.validate().is_ok());
        p.cancellation = Cancellation::Detected;
        assert!(p.validate().is_err());
        p.symbols = SymbolModel::Qpsk;
        assert!(p.validate().is_ok());
        p.snr_db_points.clear();
        assert!(p.validate().is_err());
    }

    #[test]
    fn single_user_matches_zero_forcing_oracle() {
        // K = 1, d = M: the pipeline reduces to a plain ZF MIMO link whose
        // per-stream SINR is 1 / (sigma^2 [((HV)^H HV)^-1]_{ll}).
        let config = cfg(4, &[4]);
        let channels = generate_channels(&config, 90).unwrap();
        let graph = IacGraph::from_parts(Vec::new(), Vec::new());
        let precoders =
            solve_precoders(&graph, &channels, &config, 0, EigenSelection::default()).unwrap();
        let receivers = design_receivers(&channels, &precoders, &config).unwrap();
        let p = params(&[17.0], 1, 5);
        let trial = simulate_trial(
            &channels, &precoders, &receivers, &config, &p, 17.0, 123,
        )
        .unwrap();

        let hv = channels.h(1, 1) * precoders.v(1);
        let gram_inv = (hv.adjoint() * &hv).try_inverse().unwrap();
        let sigma2 = 10f64.powf(-1.7);
        let oracle_rate: f64 = (0..4)
            .map(|l| (1.0 + 1.0 / (sigma2 * gram_inv[(l, l)].re)).log2())
            .sum();
        assert!(
            (trial.sum_rate_bits - oracle_rate).abs() < 1e-9,
            "{} vs {}",
            trial.sum_rate_bits,
            oracle_rate
        );
    }

    #[test]
    fn packets_counted_match_overhead_formula() {
        let config = cfg(6, &[3, 1, 3, 2, 2]);
        let channels = generate_channels(&config, 91).unwrap();
        let (graph, _, _) = build_graph_general(&config, 91, DEFAULT_RETRY_BUDGET).unwrap();
        let precoders =
            solve_precoders(&graph, &channels, &config, 91, EigenSelection::default()).unwrap();
        let receivers = design_receivers(&channels, &precoders, &config).unwrap();
        let p = params(&[10.0, 30.0], 4, 7);
        for (si, &snr) in p.snr_db_points.iter().enumerate() {
            for t in 0..p.trials {
                let seed = derive_seed(p.seed, &[si as u64, t as u64]);
                let trial =
                    simulate_trial(&channels, &precoders, &receivers, &config, &p, snr, seed)
                        .unwrap();
                assert_eq!(trial.packets_shared, 21);
            }
        }
    }

    #[test]
    fn noiseless_genie_leaves_no_residual() {
        let link = optimal_link(92, 2);
        let p = params(&[f64::INFINITY], 1, 3);
        let trial = simulate_trial(
            &link.channels,
            &link.precoders,
            &link.receivers,
            &link.config,
            &p,
            f64::INFINITY,
            77,
        )
        .unwrap();
        for (s, power) in trial.per_stream_interference_power.iter().enumerate() {
            assert!(*power < 1e-12, "stream {s}: residual power {power}");
        }
        assert!(trial.max_decode_error < 1e-6, "{}", trial.max_decode_error);
    }

    #[test]
    fn sinr_scales_linearly_with_snr() {
        let link = optimal_link(93, 3);
        let p = params(&[40.0, 60.0], 1, 11);
        let t40 = simulate_trial(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p, 40.0, 1,
        )
        .unwrap();
        let t60 = simulate_trial(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p, 60.0, 1,
        )
        .unwrap();
        for (a, b) in t40.per_stream_sinr.iter().zip(&t60.per_stream_sinr) {
            let ratio = b / a;
            assert!((ratio - 100.0).abs() / 100.0 < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn sweep_is_deterministic_and_mode_independent() {
        let link = optimal_link(94, 4);
        let p = params(&[20.0, 30.0, 40.0], 8, 13);
        let a = snr_sweep(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p,
        )
        .unwrap();
        let b = snr_sweep(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p,
        )
        .unwrap();
        let c = snr_sweep_sequential(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p,
        )
        .unwrap();
        let ser = |s: &SweepResult| serde_json::to_vec(s).unwrap();
        assert_eq!(ser(&a), ser(&b));
        assert_eq!(ser(&a), ser(&c));
    }

    #[test]
    fn sweep_rate_is_monotone_in_snr() {
        let link = optimal_link(95, 5);
        let p = params(&[0.0, 10.0, 20.0, 30.0, 40.0], 6, 17);
        let sweep = snr_sweep(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p,
        )
        .unwrap();
        for w in sweep.rows.windows(2) {
            assert!(w[1].mean_sum_rate_bits >= w[0].mean_sum_rate_bits);
        }
    }

    #[test]
    fn one_point_one_trial_equals_single_trial() {
        let link = optimal_link(96, 6);
        let p = params(&[25.0], 1, 19);
        let sweep = snr_sweep(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p,
        )
        .unwrap();
        let trial_seed = derive_seed(19, &[0, 0]);
        let trial = simulate_trial(
            &link.channels,
            &link.precoders,
            &link.receivers,
            &link.config,
            &p,
            25.0,
            trial_seed,
        )
        .unwrap();
        assert_eq!(sweep.rows.len(), 1);
        assert_eq!(sweep.rows[0].mean_sum_rate_bits, trial.sum_rate_bits);
        assert_eq!(sweep.rows[0].packets_shared, trial.packets_shared);
    }

    #[test]
    fn slope_recovers_synthetic_dof() {
        // R = D log2(SNR) exactly, for D = 7.
        let rows: Vec<SweepRow> = [20.0, 40.0, 60.0]
            .iter()
            .map(|&snr_db| SweepRow {
                snr_db,
                mean_sum_rate_bits: 7.0 * 10f64.powf(snr_db / 10.0).log2(),
                per_user_rate: vec![],
                per_stream_sinr_db: vec![],
                packets_shared: 0,
            })
            .collect();
        let sweep = SweepResult { rows };
        let slope = estimate_dof_slope(&sweep, 40.0, 60.0).unwrap();
        assert!((slope - 7.0).abs() < 1e-12);
        assert!(matches!(
            estimate_dof_slope(&sweep, 40.0, 50.0),
            Err(IacError::MissingPoint { .. })
        ));
    }

    #[test]
    fn detected_qpsk_matches_genie_at_high_snr() {
        let link = optimal_link(97, 7);
        let mut p = params(&[45.0], 6, 23);
        p.symbols = SymbolModel::Qpsk;
        p.cancellation = Cancellation::Detected;
        for t in 0..p.trials {
            let seed = derive_seed(p.seed, &[0, t as u64]);
            let trial = simulate_trial(
                &link.channels,
                &link.precoders,
                &link.receivers,
                &link.config,
                &p,
                45.0,
                seed,
            )
            .unwrap();
            assert_eq!(trial.symbol_errors, Some(0), "trial {t}");
        }
    }

    #[test]
    fn rate_is_invariant_to_per_column_phase_rotation() {
        use rand::Rng;
        let link = optimal_link(98, 8);
        let p = params(&[30.0], 2, 29);
        let base = snr_sweep(
            &link.channels, &link.precoders, &link.receivers, &link.config, &p,
        )
        .unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let rotated_mats: Vec<CMatrix> = (1..=link.config.num_users)
            .map(|j| {
                let mut v = link.precoders.v(j).clone();
                for c in 0..v.ncols() {
                    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let phase = Complex64::new(theta.cos(), theta.sin());
                    let col = v.column(c) * phase;
                    v.set_column(c, &col);
                }
                v
            })
            .collect();
        let rotated = PrecoderSet::new(rotated_mats, &link.config).unwrap();
        let receivers = design_receivers(&link.channels, &rotated, &link.config).unwrap();
        let moved = snr_sweep(
            &link.channels, &rotated, &receivers, &link.config, &p,
        )
        .unwrap();
        for (a, b) in base.rows.iter().zip(&moved.rows) {
            assert!(
                (a.mean_sum_rate_bits - b.mean_sum_rate_bits).abs() < 1e-9,
                "{} vs {}",
                a.mean_sum_rate_bits,
                b.mean_sum_rate_bits
            );
        }
    }

    #[test]
    fn csv_has_expected_header_and_rows() {
        let sweep = SweepResult {
            rows: vec![SweepRow {
                snr_db: 40.0,
                mean_sum_rate_bits: 80.5,
                per_user_rate: vec![],
                per_stream_sinr_db: vec![],
                packets_shared: 21,
            }],
        };
        let csv = sweep.to_csv(12.0);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("snr_db,sum_rate_bits,slope_ref"));
        assert_eq!(lines.next(), Some("40,80.5,12"));
    }
}
