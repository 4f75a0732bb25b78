//! Criterion 4: the SVM suite. Separable toy sets train to 100% accuracy,
//! ranking is invariant under positive scaling of (weights, bias),
//! standardization is exact, and small-instance accuracy is within 5% of a
//! brute-force grid-search linear classifier.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nuggetbank_core::model::{
    Aggregator, Answer, Provenance, QANugget, QualityVector, CRITERIA_COUNT,
};
use nuggetbank_core::selectstage::svm::training_accuracy;
use nuggetbank_core::selectstage::{rank_dogmatiq, train_svm, SvmHyperparams};

/// A quality vector that varies only in fluency (index 9) and clarity
/// (index 10); all other criteria sit at fixed in-scale values.
fn two_informative(fluency: f64, clarity: f64) -> QualityVector {
    let mut values = [0.5; CRITERIA_COUNT];
    values[0] = 8.0;
    values[1] = 3.0;
    values[2] = 1.0;
    for slot in values.iter_mut().take(CRITERIA_COUNT).skip(9) {
        *slot = 3.0;
    }
    values[9] = fluency;
    values[10] = clarity;
    QualityVector::from_array_clamped(values)
}

fn probe_nugget(id: &str) -> QANugget {
    QANugget {
        nugget_id: id.to_string(),
        topic_id: "t".into(),
        question: format!("Q {id}?"),
        aggregator: Aggregator::Or,
        answers: vec![Answer::new("a", "d1")],
        provenance: Provenance {
            member_question_texts: vec![format!("Q {id}?")],
            cluster_size: 1,
            grounding_doc_count: 1,
            criteria: None,
            selection_method: None,
            selection_rank: None,
        },
    }
}

/// Brute-force grid oracle over the two informative dimensions: sweep the
/// weight direction over 720 angles and the intercept over 200 cut points,
/// returning the best training accuracy achieved.
fn grid_search_accuracy(points: &[(f64, f64, bool)]) -> f64 {
    let mut best = 0.0f64;
    for step in 0..720 {
        let theta = step as f64 * std::f64::consts::PI * 2.0 / 720.0;
        let (wx, wy) = (theta.cos(), theta.sin());
        let mut projections: Vec<f64> = points.iter().map(|(x, y, _)| wx * x + wy * y).collect();
        projections.sort_by(f64::total_cmp);
        let lo = projections[0] - 0.1;
        let hi = projections[projections.len() - 1] + 0.1;
        for cut in 0..=200 {
            let bias = lo + (hi - lo) * cut as f64 / 200.0;
            let correct = points
                .iter()
                .filter(|(x, y, label)| (wx * x + wy * y - bias >= 0.0) == *label)
                .count();
            best = best.max(correct as f64 / points.len() as f64);
        }
    }
    best
}

#[test]
fn criterion_4_svm_suite() {
    super::gate(4, "SVM suite", Duration::from_secs(30), || {
        let hp = SvmHyperparams::default();

        // Separable clusters reach 100% training accuracy at defaults.
        let positives: Vec<QualityVector> = (0..10)
            .map(|i| two_informative(4.0 + 0.05 * (i % 5) as f64, 4.2 + 0.04 * (i % 7) as f64))
            .collect();
        let negatives: Vec<QualityVector> = (0..10)
            .map(|i| two_informative(1.5 + 0.05 * (i % 5) as f64, 1.8 + 0.04 * (i % 7) as f64))
            .collect();
        let model = train_svm(&positives, &negatives, &hp).unwrap();
        assert_eq!(training_accuracy(&model, &positives, &negatives), 1.0);

        // Standardization: z-scored training features have mean 0 +- 1e-9
        // and variance 1 +- 1e-6 on non-degenerate dimensions.
        let all: Vec<[f64; CRITERIA_COUNT]> = positives
            .iter()
            .chain(negatives.iter())
            .map(|v| v.to_array())
            .collect();
        for dim in 0..CRITERIA_COUNT {
            let z: Vec<f64> = all
                .iter()
                .map(|s| (s[dim] - model.feature_means[dim]) / model.feature_scales[dim])
                .collect();
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            let variance = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() <= 1e-9, "dim {dim} mean {mean}");
            if variance != 0.0 {
                assert!((variance - 1.0).abs() <= 1e-6, "dim {dim} variance {variance}");
            }
        }

        // Ranking invariance under positive scaling: argsort equality.
        let nuggets: Vec<QANugget> = (0..30).map(|i| probe_nugget(&format!("n{i:02}"))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
        let mut vectors = BTreeMap::new();
        for nugget in &nuggets {
            vectors.insert(
                nugget.nugget_id.clone(),
                two_informative(rng.gen_range(1.0..5.0), rng.gen_range(1.0..5.0)),
            );
        }
        let base_ranking = rank_dogmatiq(&nuggets, &vectors, &model).unwrap();
        for factor in [0.001, 0.5, 3.0, 1e6] {
            let mut scaled = model.clone();
            for w in &mut scaled.weights {
                *w *= factor;
            }
            scaled.bias *= factor;
            assert_eq!(
                rank_dogmatiq(&nuggets, &vectors, &scaled).unwrap(),
                base_ranking,
                "ranking changed under scale {factor}"
            );
        }

        // Small noisy instances: accuracy within 5% of the grid oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(0xC4C4);
        for case in 0..6 {
            let per_class = 4 + case; // 8..=18 points total
            let overlap = 0.3 + 0.2 * (case % 3) as f64;
            let pos: Vec<(f64, f64)> = (0..per_class)
                .map(|_| {
                    (
                        3.6 + rng.gen_range(-overlap..overlap),
                        3.8 + rng.gen_range(-overlap..overlap),
                    )
                })
                .collect();
            let neg: Vec<(f64, f64)> = (0..per_class)
                .map(|_| {
                    (
                        2.8 + rng.gen_range(-overlap..overlap),
                        2.9 + rng.gen_range(-overlap..overlap),
                    )
                })
                .collect();
            let pos_vectors: Vec<QualityVector> =
                pos.iter().map(|(a, b)| two_informative(*a, *b)).collect();
            let neg_vectors: Vec<QualityVector> =
                neg.iter().map(|(a, b)| two_informative(*a, *b)).collect();
            let model = train_svm(&pos_vectors, &neg_vectors, &hp).unwrap();
            let accuracy = training_accuracy(&model, &pos_vectors, &neg_vectors);

            let points: Vec<(f64, f64, bool)> = pos
                .iter()
                .map(|(a, b)| (*a, *b, true))
                .chain(neg.iter().map(|(a, b)| (*a, *b, false)))
                .collect();
            let oracle = grid_search_accuracy(&points);
            assert!(
                accuracy >= oracle - 0.05,
                "case {case}: svm {accuracy} below grid oracle {oracle} - 5%"
            );
        }
    });
}
