//! Existence test for closed-form IAC transceivers and enumeration of the
//! DoF tuples that reach the maximum total of `2M`.

use serde::{Deserialize, Serialize};

use crate::system::{compute_k_iac, SystemConfig};

/// Which of the three inequality families failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "which", content = "k")]
pub enum Inequality {
    /// `d_k + max{d_{k+1}..d_K} <= M`, one instance per aligned receiver `k`.
    Eq9(usize),
    /// `sum_{k > k_iac} d_k <= M`.
    Eq10,
    /// `d_1 + sum_{k <= k_iac} (k-1) d_k + sum_{k > k_iac} (k_iac - 1) d_k <= k_iac * M`.
    Eq11,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedInequality {
    #[serde(flatten)]
    pub which: Inequality,
    pub lhs: usize,
    pub rhs: usize,
}

/// Outcome of the existence test, with every violated inequality spelled out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub k_iac: usize,
    pub failed_inequalities: Vec<FailedInequality>,
}

/// Evaluates the three closed-form existence conditions for the given tuple.
///
/// With `k_iac = 0` every stream fits under plain zero-forcing and the
/// verdict is feasible with no inequalities to check.
pub fn check_feasibility(config: &SystemConfig) -> FeasibilityVerdict {
    let k_iac = compute_k_iac(config);
    let m = config.num_antennas;
    let k = config.num_users;
    let mut failed = Vec::new();

    if k_iac > 0 {
        for rx in 1..=k_iac {
            let tail_max = (rx + 1..=k).map(|j| config.dof_of(j)).max().unwrap_or(0);
            let lhs = config.dof_of(rx) + tail_max;
            if lhs > m {
                failed.push(FailedInequality {
                    which: Inequality::Eq9(rx),
                    lhs,
                    rhs: m,
                });
            }
        }

        let lhs10 = config.dof_suffix_sum(k_iac + 1);
        if lhs10 > m {
            failed.push(FailedInequality {
                which: Inequality::Eq10,
                lhs: lhs10,
                rhs: m,
            });
        }

        let lhs11 = config.dof_of(1)
            + (1..=k_iac).map(|j| (j - 1) * config.dof_of(j)).sum::<usize>()
            + (k_iac + 1..=k)
                .map(|j| (k_iac - 1) * config.dof_of(j))
                .sum::<usize>();
        let rhs11 = k_iac * m;
        if lhs11 > rhs11 {
            failed.push(FailedInequality {
                which: Inequality::Eq11,
                lhs: lhs11,
                rhs: rhs11,
            });
        }
    }

    FeasibilityVerdict {
        feasible: failed.is_empty(),
        k_iac,
        failed_inequalities: failed,
    }
}

/// Largest stream count among users `3..=K`.
fn tail_max(d: &[usize]) -> usize {
    d[2..].iter().copied().max().unwrap_or(0)
}

/// True iff the tuple reaches the maximum total DoF of `2M` through the
/// two-receiver cancellation schedule: `d_1 + d_2 = M`, the remaining users
/// contribute exactly `M` more streams, and no late user exceeds `M/2`.
pub fn is_optimal_tuple(config: &SystemConfig) -> bool {
    let m = config.num_antennas;
    let d = &config.dof_tuple;
    if config.num_users < 4 || m < 2 {
        return false;
    }
    let max_tail = tail_max(d);
    d[0] + d[1] == m
        && d[2..].iter().sum::<usize>() == m
        && max_tail <= m / 2
        && d[0] <= m - max_tail
        && d[1] <= m - max_tail
}

/// All DoF tuples achieving total `2M` for the given `M` and `K`, in
/// lexicographic order. Empty for `K < 4` or `M < 2`, where no such tuple
/// exists.
pub fn enumerate_optimal_tuples(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k < 4 || m < 2 {
        return out;
    }
    let mut tuple = vec![0usize; k];
    enumerate_rec(m, k, 0, &mut tuple, &mut out);
    out
}

fn enumerate_rec(m: usize, k: usize, pos: usize, tuple: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos == k {
        let cfg = SystemConfig {
            num_users: k,
            num_antennas: m,
            dof_tuple: tuple.clone(),
        };
        if is_optimal_tuple(&cfg) {
            out.push(tuple.clone());
        }
        return;
    }
    // Prune on the two running sums; the remaining constraints are cheap
    // enough to leave to the leaf check.
    for d in 1..=m {
        tuple[pos] = d;
        let head: usize = tuple[..2.min(pos + 1)].iter().sum();
        let tail: usize = if pos >= 2 { tuple[2..=pos].iter().sum() } else { 0 };
        if head > m || tail > m {
            continue;
        }
        enumerate_rec(m, k, pos + 1, tuple, out);
    }
    tuple[pos] = 0;
}
