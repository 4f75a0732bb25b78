//! Criterion 1: tau, weighted tau, and exact Wilcoxon p-values match
//! independent brute-force oracles on 200 random score-vector fixtures
//! (n <= 10), within 1e-12.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nuggetbank_core::rankstats::wilcoxon::{signed_rank_stat, ZeroHandling};
use nuggetbank_core::rankstats::{kendall_tau, weighted_kendall_tau};

const TOLERANCE: f64 = 1e-12;

/// Oracle A: tau-b by classifying every pair as concordant, discordant, or
/// tied in x / y / both.
fn tau_pair_count_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut con, mut dis, mut tie_x, mut tie_y) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1.0;
            } else if dy == 0.0 {
                tie_y += 1.0;
            } else if dx * dy > 0.0 {
                con += 1.0;
            } else {
                dis += 1.0;
            }
        }
    }
    let denominator = ((con + dis + tie_x) * (con + dis + tie_y)).sqrt();
    if denominator == 0.0 {
        None
    } else {
        Some((con - dis) / denominator)
    }
}

/// Oracle B: weighted tau by explicit weighted pair sums, with descending
/// mid-ranks of the reference vector recomputed per element.
fn weighted_tau_pair_sum_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let rank_desc = |i: usize| -> f64 {
        let greater = x.iter().filter(|v| **v > x[i]).count() as f64;
        let equal = x.iter().filter(|v| **v == x[i]).count() as f64;
        greater + (equal - 1.0) / 2.0
    };
    let sgn = |v: f64| -> f64 {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let weight = 1.0 / (rank_desc(i) + 1.0) + 1.0 / (rank_desc(j) + 1.0);
            numerator += weight * sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
            denominator += weight;
        }
    }
    numerator / denominator
}

/// Oracle C: exact two-sided Wilcoxon p by exhaustive 2^n enumeration of
/// sign assignments over the nonzero ranked magnitudes.
fn wilcoxon_sign_flip_oracle(diffs: &[f64]) -> f64 {
    // Ascending 1-based mid-ranks of |d|, written out directly.
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|value| {
            let less = abs.iter().filter(|o| **o < *value).count() as f64;
            let equal = abs.iter().filter(|o| **o == *value).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    let mut fixed = 0.0;
    let mut flippable: Vec<f64> = Vec::new();
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
            flippable.push(*r);
        } else if *d < 0.0 {
            w_minus += r;
            flippable.push(*r);
        } else {
            w_plus += r / 2.0;
            w_minus += r / 2.0;
            fixed += r / 2.0;
        }
    }
    if flippable.is_empty() {
        return 1.0;
    }
    let (lo, hi) = (w_plus.min(w_minus), w_plus.max(w_minus));
    let mut tail = 0u64;
    let total = 1u64 << flippable.len();
    for mask in 0..total {
        let mut t = fixed;
        for (bit, r) in flippable.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                t += r;
            }
        }
        // Rank sums are multiples of 0.25, exactly representable; the
        // comparisons are exact.
        if t <= lo || t >= hi {
            tail += 1;
        }
    }
    (tail as f64 / total as f64).min(1.0)
}

#[test]
fn criterion_1_statistics_oracles() {
    super::gate(1, "statistics oracle suite", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
        let mut checked_tau = 0;
        let mut checked_wilcoxon = 0;
        for case in 0..200 {
            let n = rng.gen_range(2..=10);
            // A mix of continuous and quantized vectors so ties and zero
            // differences occur.
            let quantized = case % 3 == 0;
            let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..n)
                    .map(|_| {
                        if quantized {
                            (rng.gen_range(0..6) as f64) / 6.0
                        } else {
                            rng.gen::<f64>()
                        }
                    })
                    .collect()
            };
            let x = draw(&mut rng);
            let y = draw(&mut rng);

            let constant =
                x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]);
            match (kendall_tau(&x, &y), tau_pair_count_oracle(&x, &y)) {
                (Ok(got), Some(want)) => {
                    assert!((got - want).abs() < TOLERANCE, "tau {got} vs oracle {want}");
                    checked_tau += 1;
                }
                (Err(_), _) => assert!(constant, "tau errored on non-constant input"),
                (Ok(_), None) => panic!("implementation produced tau where oracle is undefined"),
            }
            if !constant {
                let got = weighted_kendall_tau(&x, &y).unwrap();
                let want = weighted_tau_pair_sum_oracle(&x, &y);
                assert!(
                    (got - want).abs() < TOLERANCE,
                    "weighted tau {got} vs oracle {want}"
                );
            }

            let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let got = signed_rank_stat(&diffs, ZeroHandling::ZSplit).p_value;
            let want = wilcoxon_sign_flip_oracle(&diffs);
            assert!(
                (got - want).abs() < TOLERANCE,
                "wilcoxon p {got} vs oracle {want} for diffs {diffs:?}"
            );
            checked_wilcoxon += 1;
        }
        assert!(checked_tau >= 190, "too few tau comparisons ran: {checked_tau}");
        assert_eq!(checked_wilcoxon, 200);
    });
}
