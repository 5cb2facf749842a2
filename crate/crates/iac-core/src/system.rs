//! System model: problem configuration, deterministic Rayleigh channel
//! generation, and the closed-form scalar quantities of the cancellation
//! schedule (`k_iac` and the backhaul overhead).
//!
//! Conventions used across the crate:
//! - user and stream indices are 1-based, matching the external formats;
//! - `H[k][j]` is the channel from transmitter `j` to receiver `k`;
//! - all channel entries are i.i.d. circularly-symmetric complex Gaussian
//!   with zero mean and unit variance (Rayleigh fading, no extensions).

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{IacError, Result};
use crate::linalg::{condition_ratio, CMatrix, COND_FLOOR};

/// Problem statement: `K` transceiver pairs, `M` antennas each, and the
/// per-user stream counts `d_1..d_K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "K")]
    pub num_users: usize,
    #[serde(rename = "M")]
    pub num_antennas: usize,
    #[serde(rename = "d")]
    pub dof_tuple: Vec<usize>,
}

impl SystemConfig {
    pub fn new(num_users: usize, num_antennas: usize, dof_tuple: Vec<usize>) -> Result<Self> {
        let cfg = Self {
            num_users,
            num_antennas,
            dof_tuple,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the structural invariants. Single-user systems are accepted so
    /// the simulator can degrade to a plain ZF MIMO link.
    pub fn validate(&self) -> Result<()> {
        if self.num_users < 1 {
            return Err(IacError::InvalidConfig("K must be at least 1".into()));
        }
        if self.num_antennas < 1 {
            return Err(IacError::InvalidConfig("M must be at least 1".into()));
        }
        if self.dof_tuple.len() != self.num_users {
            return Err(IacError::InvalidConfig(format!(
                "d has {} entries but K = {}",
                self.dof_tuple.len(),
                self.num_users
            )));
        }
        for (j, &d) in self.dof_tuple.iter().enumerate() {
            if d < 1 || d > self.num_antennas {
                return Err(IacError::InvalidConfig(format!(
                    "d_{} = {} outside [1, M = {}]",
                    j + 1,
                    d,
                    self.num_antennas
                )));
            }
        }
        Ok(())
    }

    /// Streams requested by user `j` (1-based).
    pub fn dof_of(&self, j: usize) -> usize {
        self.dof_tuple[j - 1]
    }

    /// Total DoF claimed by the tuple, `sum_j d_j`.
    pub fn total_dof(&self) -> usize {
        self.dof_tuple.iter().sum()
    }

    /// `sum_{j=from}^{K} d_j` (1-based, inclusive).
    pub fn dof_suffix_sum(&self, from: usize) -> usize {
        self.dof_tuple[from - 1..].iter().sum()
    }
}

/// One precoded stream: transmitter `j`, stream index `l` within user `j`.
/// Both indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub j: usize,
    pub l: usize,
}

impl StreamId {
    pub fn new(j: usize, l: usize) -> Self {
        Self { j, l }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v_{}_{}", self.j, self.l)
    }
}

/// The `K x K` grid of `M x M` channel matrices, plus the seed it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `matrices[k-1][j-1]` is the channel from transmitter `j` to receiver `k`.
    matrices: Vec<Vec<CMatrix>>,
    pub seed: u64,
    pub num_users: usize,
    pub num_antennas: usize,
}

impl ChannelSet {
    /// Channel from transmitter `j` to receiver `k` (both 1-based).
    pub fn h(&self, k: usize, j: usize) -> &CMatrix {
        &self.matrices[k - 1][j - 1]
    }

    pub fn from_parts(matrices: Vec<Vec<CMatrix>>, seed: u64) -> Result<Self> {
        let num_users = matrices.len();
        if num_users == 0 {
            return Err(IacError::BundleFormat("empty channel grid".into()));
        }
        let num_antennas = matrices[0][0].nrows();
        for row in &matrices {
            if row.len() != num_users {
                return Err(IacError::BundleFormat("channel grid is not K x K".into()));
            }
            for m in row {
                if m.nrows() != num_antennas || m.ncols() != num_antennas {
                    return Err(IacError::BundleFormat("channel matrix is not M x M".into()));
                }
                if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(IacError::BundleFormat(
                        "channel matrix has non-finite entries".into(),
                    ));
                }
                let cond = condition_ratio(m);
                if cond < COND_FLOOR {
                    return Err(IacError::SingularChannel {
                        context: "imported channel matrix".into(),
                        cond,
                    });
                }
            }
        }
        Ok(Self {
            matrices,
            seed,
            num_users,
            num_antennas,
        })
    }

    /// Row-major JSON export (`h[k][j]` as nested arrays of `[re, im]` pairs).
    pub fn to_json(&self) -> serde_json::Value {
        let h: Vec<Vec<Vec<Vec<[f64; 2]>>>> = self
            .matrices
            .iter()
            .map(|row| {
                row.iter()
                    .map(|m| {
                        (0..m.nrows())
                            .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "seed": self.seed,
            "K": self.num_users,
            "M": self.num_antennas,
            "h": h,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let seed = value
            .get("seed")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| IacError::BundleFormat("channel export missing seed".into()))?;
        let h = value
            .get("h")
            .and_then(|v| v.as_array())
            .ok_or_else(|| IacError::BundleFormat("channel export missing h".into()))?;
        let mut matrices = Vec::with_capacity(h.len());
        for row in h {
            let row = row
                .as_array()
                .ok_or_else(|| IacError::BundleFormat("h row is not an array".into()))?;
            let mut out_row = Vec::with_capacity(row.len());
            for mat in row {
                let rows = mat
                    .as_array()
                    .ok_or_else(|| IacError::BundleFormat("h entry is not a matrix".into()))?;
                let m = rows.len();
                let mut data = Vec::with_capacity(m * m);
                for r in rows {
                    let r = r
                        .as_array()
                        .ok_or_else(|| IacError::BundleFormat("matrix row malformed".into()))?;
                    for z in r {
                        let pair = z
                            .as_array()
                            .filter(|p| p.len() == 2)
                            .ok_or_else(|| IacError::BundleFormat("complex pair malformed".into()))?;
                        let re = pair[0].as_f64().ok_or_else(|| {
                            IacError::BundleFormat("complex component not a number".into())
                        })?;
                        let im = pair[1].as_f64().ok_or_else(|| {
                            IacError::BundleFormat("complex component not a number".into())
                        })?;
                        data.push(Complex64::new(re, im));
                    }
                }
                if data.len() != m * m {
                    return Err(IacError::BundleFormat("matrix is not square".into()));
                }
                out_row.push(CMatrix::from_row_slice(m, m, &data));
            }
            matrices.push(out_row);
        }
        Self::from_parts(matrices, seed)
    }
}

const REDRAW_BUDGET: usize = 64;

/// Draws the full `K x K` grid of Rayleigh channel matrices.
///
/// Deterministic in `(config, seed)`. Each matrix is re-drawn (continuing
/// the same stream) if it fails the conditioning floor, which for continuous
/// entries is a probability-zero event.
pub fn generate_channels(config: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let k = config.num_users;
    let m = config.num_antennas;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrices = Vec::with_capacity(k);
    for rx in 1..=k {
        let mut row = Vec::with_capacity(k);
        for tx in 1..=k {
            let mut drawn = None;
            for _ in 0..REDRAW_BUDGET {
                let h = draw_matrix(&mut rng, m);
                if condition_ratio(&h) >= COND_FLOOR {
                    drawn = Some(h);
                    break;
                }
            }
            match drawn {
                Some(h) => row.push(h),
                None => return Err(IacError::ChannelRedrawExhausted { rx, tx }),
            }
        }
        matrices.push(row);
    }
    Ok(ChannelSet {
        matrices,
        seed,
        num_users: k,
        num_antennas: m,
    })
}

/// One `M x M` matrix of CN(0, 1) entries, drawn row-major.
fn draw_matrix<R: Rng>(rng: &mut R, m: usize) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let entries: Vec<Complex64> = (0..m * m)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    CMatrix::from_row_slice(m, m, &entries)
}

/// Index of the last receiver whose interference must be aligned.
///
/// Receiver `k_iac + 1` is the first one where the streams still on the air
/// (its own plus all not-yet-decoded interferers) fit within `M` antennas;
/// zero means plain zero-forcing suffices everywhere.
pub fn compute_k_iac(config: &SystemConfig) -> usize {
    let k = config.num_users;
    for first_free in 1..=k {
        if config.dof_suffix_sum(first_free) <= config.num_antennas {
            return first_free - 1;
        }
    }
    // d_K <= M guarantees the loop returns by first_free = K.
    unreachable!("suffix sum at K is d_K <= M")
}

/// Total backhaul overhead in packets: each stream decoded at receiver `j`
/// in the cancellation stage is forwarded to the `K - j` receivers after it.
pub fn compute_overhead(config: &SystemConfig) -> usize {
    let k_iac = compute_k_iac(config);
    (1..=k_iac)
        .map(|j| (config.num_users - j) * config.dof_of(j))
        .sum()
}

/// Transmitters whose interference survives at receiver `k` after the
/// cancellation stage has run its course.
///
/// A receiver inside the cancellation schedule has subtracted users
/// `1..k-1` and still faces everyone after it; a receiver past the schedule
/// has subtracted users `1..k_iac` and faces the remaining peers.
pub fn post_cancellation_interferers(config: &SystemConfig, k: usize) -> Vec<usize> {
    let k_iac = compute_k_iac(config);
    if k <= k_iac {
        (k + 1..=config.num_users).collect()
    } else {
        (k_iac + 1..=config.num_users).filter(|&j| j != k).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, d: &[usize]) -> SystemConfig {
        SystemConfig::new(d.len(), m, d.to_vec()).unwrap()
    }

    #[test]
    fn config_rejects_bad_shapes() {
        assert!(SystemConfig::new(3, 4, vec![1, 2]).is_err());
        assert!(SystemConfig::new(2, 4, vec![1, 5]).is_err());
        assert!(SystemConfig::new(2, 4, vec![0, 1]).is_err());
        assert!(SystemConfig::new(0, 4, vec![]).is_err());
        assert!(SystemConfig::new(1, 4, vec![4]).is_ok());
    }

    #[test]
    fn config_json_uses_paper_keys() {
        let c = cfg(6, &[3, 1, 3, 2, 2]);
        let json = serde_json::to_value(&c).unwrap();
        assert_eq!(json["K"], 5);
        assert_eq!(json["M"], 6);
        assert_eq!(json["d"], serde_json::json!([3, 1, 3, 2, 2]));
        let back: SystemConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn k_iac_worked_examples() {
        assert_eq!(compute_k_iac(&cfg(6, &[3, 1, 3, 2, 2])), 3);
        assert_eq!(compute_k_iac(&cfg(6, &[3, 3, 2, 2, 2])), 2);
        assert_eq!(compute_k_iac(&cfg(6, &[1, 1, 1, 1])), 0);
    }

    #[test]
    fn k_iac_definition_holds_on_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let k = rng.random_range(1..=7usize);
            let m = rng.random_range(1..=8usize);
            let d: Vec<usize> = (0..k).map(|_| rng.random_range(1..=m)).collect();
            let config = SystemConfig::new(k, m, d).unwrap();
            let k_iac = compute_k_iac(&config);
            assert!(config.dof_suffix_sum(k_iac + 1) <= m);
            if k_iac > 0 {
                assert!(config.dof_suffix_sum(k_iac) > m);
            }
        }
    }

    #[test]
    fn overhead_worked_examples() {
        // 4*3 + 3*1 + 2*3 per the cancellation schedule.
        assert_eq!(compute_overhead(&cfg(6, &[3, 1, 3, 2, 2])), 21);
        // 4*3 + 3*3.
        assert_eq!(compute_overhead(&cfg(6, &[3, 3, 2, 2, 2])), 21);
        // Everything fits in M antennas: no backhaul at all.
        assert_eq!(compute_overhead(&cfg(6, &[2, 2, 2])), 0);
    }

    #[test]
    fn overhead_monotone_in_early_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let k = rng.random_range(2..=6usize);
            let m = rng.random_range(2..=8usize);
            let d: Vec<usize> = (0..k).map(|_| rng.random_range(1..=m)).collect();
            let config = SystemConfig::new(k, m, d.clone()).unwrap();
            let k_iac = compute_k_iac(&config);
            if k_iac == 0 {
                continue;
            }
            let j = rng.random_range(1..=k_iac);
            if d[j - 1] >= m {
                continue;
            }
            let mut bumped = d.clone();
            bumped[j - 1] += 1;
            let config2 = SystemConfig::new(k, m, bumped).unwrap();
            if compute_k_iac(&config2) != k_iac {
                continue; // monotonicity is stated for fixed k_iac
            }
            assert!(compute_overhead(&config2) >= compute_overhead(&config));
            checked += 1;
        }
    }

    #[test]
    fn channels_are_deterministic() {
        let config = cfg(2, &[1, 1]);
        let a = generate_channels(&config, 7).unwrap();
        let b = generate_channels(&config, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_channels(&config, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn channels_have_expected_shape() {
        let config = cfg(6, &[1, 1, 1, 1, 1]);
        let ch = generate_channels(&config, 1).unwrap();
        assert_eq!(ch.num_users, 5);
        for k in 1..=5 {
            for j in 1..=5 {
                assert_eq!(ch.h(k, j).shape(), (6, 6));
            }
        }
    }

    #[test]
    fn channel_entries_have_unit_mean_square() {
        let config = cfg(4, &[1, 1, 1]);
        let ch = generate_channels(&config, 3).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for k in 1..=3 {
            for j in 1..=3 {
                for z in ch.h(k, j).iter() {
                    sum += z.norm_sqr();
                    count += 1;
                }
            }
        }
        assert_eq!(count, 144);
        let mean = sum / count as f64;
        assert!((0.7..=1.3).contains(&mean), "mean |entry|^2 = {mean}");
    }

    #[test]
    fn channel_json_roundtrip() {
        let config = cfg(3, &[2, 1]);
        let ch = generate_channels(&config, 19).unwrap();
        let json = ch.to_json();
        let back = ChannelSet::from_json(&json).unwrap();
        assert_eq!(ch, back);
        assert_eq!(back.seed, 19);
    }
}
