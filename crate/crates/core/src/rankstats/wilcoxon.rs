//! Two-sided Wilcoxon signed-rank test with an exact null distribution for
//! small samples and a continuity-corrected normal approximation above.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rankstats::midranks;

/// Largest sample size using the exact distribution.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroHandling {
    /// Zeros are ranked with everything else and their ranks are split
    /// equally between the positive and negative sums.
    ZSplit,
    /// Zeros are discarded before ranking.
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WilcoxonOutcome {
    ASignificant,
    BSignificant,
    NotSignificant,
}

/// Signed-rank sums and the two-sided p-value for a difference vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRankStat {
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    /// Pairs that entered the ranking.
    pub n_used: usize,
}

/// Compute the test statistic and exact or approximate two-sided p-value.
pub fn signed_rank_stat(diffs: &[f64], zero_handling: ZeroHandling) -> SignedRankStat {
    let used: Vec<f64> = match zero_handling {
        ZeroHandling::ZSplit => diffs.to_vec(),
        ZeroHandling::Discard => diffs.iter().copied().filter(|d| *d != 0.0).collect(),
    };
    let nonzero_count = used.iter().filter(|d| **d != 0.0).count();
    if nonzero_count == 0 {
        return SignedRankStat {
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            n_used: used.len(),
        };
    }

    let abs: Vec<f64> = used.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (d, r) in used.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else if *d < 0.0 {
            w_minus += r;
        } else {
            w_plus += r / 2.0;
            w_minus += r / 2.0;
        }
    }

    let p_value = if used.len() <= EXACT_LIMIT {
        exact_p(&used, &ranks, w_plus, w_minus)
    } else {
        normal_approx_p(&used, &ranks, w_plus)
    };
    SignedRankStat {
        w_plus,
        w_minus,
        p_value,
        n_used: used.len(),
    }
}

/// Exact two-sided p-value by dynamic programming over the distribution of
/// the positive rank sum under random sign assignment of the nonzero
/// differences. Ranks are multiples of 0.25 after zero-splitting, so
/// quarter-units make every sum an integer.
fn exact_p(diffs: &[f64], ranks: &[f64], w_plus: f64, w_minus: f64) -> f64 {
    let mut fixed_quarters = 0u64;
    let mut nonzero_quarters: Vec<u64> = Vec::new();
    for (d, r) in diffs.iter().zip(ranks) {
        let quarters = (r * 4.0).round() as u64;
        if *d == 0.0 {
            fixed_quarters += quarters / 2;
        } else {
            nonzero_quarters.push(quarters);
        }
    }
    let m = nonzero_quarters.len() as u32;
    let total: u64 = nonzero_quarters.iter().sum();
    let mut dist = vec![0u64; total as usize + 1];
    dist[0] = 1;
    for &q in &nonzero_quarters {
        for s in (q as usize..dist.len()).rev() {
            dist[s] += dist[s - q as usize];
        }
    }

    let w_min_quarters = (w_plus.min(w_minus) * 4.0).round() as u64;
    let w_max_quarters = (w_plus.max(w_minus) * 4.0).round() as u64;
    let mut count = 0u64;
    for (s, c) in dist.iter().enumerate() {
        let w = fixed_quarters + s as u64;
        if w <= w_min_quarters || w >= w_max_quarters {
            count += c;
        }
    }
    (count as f64 / 2f64.powi(m as i32)).min(1.0)
}

/// Normal approximation with continuity correction. The variance comes from
/// the rank values themselves, which absorbs tie and zero corrections.
fn normal_approx_p(diffs: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let total: f64 = ranks.iter().sum();
    let mean = total / 2.0;
    let variance: f64 = diffs
        .iter()
        .zip(ranks)
        .filter(|(d, _)| **d != 0.0)
        .map(|(_, r)| r * r / 4.0)
        .sum();
    if variance <= 0.0 {
        return 1.0;
    }
    let delta = w_plus - mean;
    let corrected = delta.abs() - 0.5;
    if corrected <= 0.0 {
        return 1.0;
    }
    let z = corrected / variance.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Complementary error function (Chebyshev fit; ~1e-7 relative error).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t * (-z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Two-sided signed-rank test on paired scores at level `alpha`. When
/// significant, the winner is the side with the larger rank sum.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    zero_handling: ZeroHandling,
    min_pairs: usize,
) -> Result<WilcoxonOutcome> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "paired vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min_pairs {
        return Err(Error::InsufficientData(format!(
            "{} pairs < minimum {min_pairs}",
            a.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let stat = signed_rank_stat(&diffs, zero_handling);
    if stat.p_value < alpha && stat.w_plus != stat.w_minus {
        if stat.w_plus > stat.w_minus {
            Ok(WilcoxonOutcome::ASignificant)
        } else {
            Ok(WilcoxonOutcome::BSignificant)
        }
    } else {
        Ok(WilcoxonOutcome::NotSignificant)
    }
}
