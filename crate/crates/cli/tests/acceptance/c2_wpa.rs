//! Criterion 2: WPA(M, M) = 1.0 exactly on 50 random matrices, the
//! hand-built 4-run fixture yields 4/6 against enumerated outcomes, and WPA
//! is invariant under common positive scaling.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nuggetbank_core::model::ScoreMatrix;
use nuggetbank_core::rankstats::wilcoxon::{signed_rank_stat, ZeroHandling};
use nuggetbank_core::rankstats::{wpa, WpaConfig};

fn random_matrix(rng: &mut ChaCha8Rng, label: &str) -> ScoreMatrix {
    let runs = rng.gen_range(2..=6);
    let topics = rng.gen_range(5..=9);
    ScoreMatrix {
        run_ids: (0..runs).map(|i| format!("run{i:02}")).collect(),
        topic_ids: (0..topics).map(|i| format!("topic{i:02}")).collect(),
        scores: (0..runs)
            .map(|_| (0..topics).map(|_| Some(rng.gen::<f64>())).collect())
            .collect(),
        label: label.to_string(),
    }
}

/// The hand-built 4-run fixture: the reference matrix orders a > b > c > d
/// with uniform within-topic jitter; the candidate swaps a and b (flipping
/// that pair's direction) and makes c vs d perfectly balanced (killing its
/// significance). Exactly 2 of the 6 pair outcomes change.
fn four_run_fixture() -> (ScoreMatrix, ScoreMatrix) {
    let topics = 8usize;
    let jitter: Vec<f64> = (0..topics).map(|t| 0.01 * t as f64).collect();
    let row = |base: f64| -> Vec<Option<f64>> {
        jitter.iter().map(|j| Some(base + j)).collect()
    };
    let reference = ScoreMatrix {
        run_ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        topic_ids: (0..topics).map(|t| format!("t{t}")).collect(),
        scores: vec![row(0.8), row(0.6), row(0.4), row(0.2)],
        label: "reference".into(),
    };
    // Candidate: a and b trade places; c and d split 4 topics each way by
    // the same margin, so their signed-rank sums tie.
    let c_row: Vec<Option<f64>> = (0..topics)
        .map(|t| Some(0.3 + if t % 2 == 0 { 0.01 } else { -0.01 }))
        .collect();
    let d_row: Vec<Option<f64>> = (0..topics)
        .map(|t| Some(0.3 + if t % 2 == 0 { -0.01 } else { 0.01 }))
        .collect();
    let candidate = ScoreMatrix {
        run_ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        topic_ids: (0..topics).map(|t| format!("t{t}")).collect(),
        scores: vec![row(0.6), row(0.8), c_row, d_row],
        label: "candidate".into(),
    };
    (reference, candidate)
}

/// Oracle: enumerate all 6 run pairs, decide each side's outcome with the
/// exact signed-rank test directly, and count agreements.
fn wpa_enumeration_oracle(reference: &ScoreMatrix, candidate: &ScoreMatrix, alpha: f64) -> f64 {
    let runs = &reference.run_ids;
    let outcome = |matrix: &ScoreMatrix, i: usize, j: usize| -> i8 {
        let diffs: Vec<f64> = (0..matrix.topic_ids.len())
            .map(|t| matrix.scores[i][t].unwrap() - matrix.scores[j][t].unwrap())
            .collect();
        let stat = signed_rank_stat(&diffs, ZeroHandling::ZSplit);
        if stat.p_value < alpha && stat.w_plus > stat.w_minus {
            1
        } else if stat.p_value < alpha && stat.w_plus < stat.w_minus {
            -1
        } else {
            0
        }
    };
    let mut agree = 0;
    let mut pairs = 0;
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            pairs += 1;
            if outcome(reference, i, j) == outcome(candidate, i, j) {
                agree += 1;
            }
        }
    }
    agree as f64 / pairs as f64
}

#[test]
fn criterion_2_wpa_contract() {
    super::gate(2, "WPA contract", Duration::from_secs(5), || {
        let config = WpaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
        for _ in 0..50 {
            let matrix = random_matrix(&mut rng, "m");
            assert_eq!(wpa(&matrix, &matrix, &config).unwrap(), 1.0);
        }

        let (reference, candidate) = four_run_fixture();
        let oracle = wpa_enumeration_oracle(&reference, &candidate, config.alpha);
        assert_eq!(oracle, 4.0 / 6.0, "fixture construction drifted");
        let got = wpa(&reference, &candidate, &config).unwrap();
        assert_eq!(got, 4.0 / 6.0);

        // Positive common scaling of both matrices changes nothing.
        let scale = |matrix: &ScoreMatrix, factor: f64| -> ScoreMatrix {
            let mut out = matrix.clone();
            for row in &mut out.scores {
                for cell in row.iter_mut() {
                    *cell = cell.map(|v| v * factor);
                }
            }
            out
        };
        let got_scaled = wpa(&scale(&reference, 0.5), &scale(&candidate, 0.5), &config).unwrap();
        assert_eq!(got_scaled, got);
        let mut rng = ChaCha8Rng::seed_from_u64(0xC2C2);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, "a");
            let b = random_matrix(&mut rng, "b");
            // Share run/topic ids so the comparison is defined.
            let b = ScoreMatrix {
                run_ids: a.run_ids.clone(),
                topic_ids: a.topic_ids.clone(),
                scores: b
                    .scores
                    .iter()
                    .cycle()
                    .take(a.run_ids.len())
                    .map(|row| row.iter().cycle().take(a.topic_ids.len()).cloned().collect())
                    .collect(),
                label: b.label.clone(),
            };
            b.validate().unwrap();
            let plain = wpa(&a, &b, &config).unwrap();
            let scaled = wpa(&scale(&a, 0.25), &scale(&b, 0.25), &config).unwrap();
            assert_eq!(plain, scaled);
        }
    });
}
