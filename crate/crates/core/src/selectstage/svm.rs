//! Linear soft-margin SVM trained by deterministic stochastic subgradient
//! descent on the hinge loss, with z-score feature standardization baked
//! into the model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QualityVector, CRITERIA_COUNT};
use crate::util::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub training_fingerprint: String,
}

impl SvmModel {
    /// Signed decision value `w . x_hat + b` on the standardized features.
    pub fn decision(&self, vector: &QualityVector) -> f64 {
        let x = vector.to_array();
        let mut total = self.bias;
        for (i, value) in x.iter().enumerate() {
            let standardized = (value - self.feature_means[i]) / self.feature_scales[i];
            total += self.weights[i] * standardized;
        }
        total
    }

    pub fn predict_positive(&self, vector: &QualityVector) -> bool {
        self.decision(vector) >= 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != CRITERIA_COUNT
            || self.feature_means.len() != CRITERIA_COUNT
            || self.feature_scales.len() != CRITERIA_COUNT
        {
            return Err(Error::contract("model vectors must have length 19"));
        }
        if self.feature_scales.iter().any(|s| *s <= 0.0) {
            return Err(Error::contract("feature_scales must be strictly positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmHyperparams {
    /// Soft-margin penalty.
    pub c: f64,
    /// Full passes over the shuffled training set.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmHyperparams {
    fn default() -> Self {
        SvmHyperparams {
            c: 1.0,
            epochs: 100_000,
            seed: 0,
        }
    }
}

/// Per-dimension mean and population standard deviation; constant dimensions
/// get scale 1.0 so standardization stays well-defined.
fn standardization(samples: &[[f64; CRITERIA_COUNT]]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mut means = vec![0.0; CRITERIA_COUNT];
    for sample in samples {
        for (i, v) in sample.iter().enumerate() {
            means[i] += v;
        }
    }
    for mean in &mut means {
        *mean /= n;
    }
    let mut scales = vec![0.0; CRITERIA_COUNT];
    for sample in samples {
        for (i, v) in sample.iter().enumerate() {
            scales[i] += (v - means[i]) * (v - means[i]);
        }
    }
    for scale in &mut scales {
        *scale = (*scale / n).sqrt();
        if *scale < 1e-12 {
            *scale = 1.0;
        }
    }
    (means, scales)
}

/// Train on labeled quality vectors. Features are standardized with training
/// statistics stored in the model; optimization is Pegasos-style stochastic
/// subgradient descent with fixed-seed shuffling, so the result is
/// bit-for-bit reproducible for the same inputs and hyperparameters.
pub fn train_svm(
    positives: &[QualityVector],
    negatives: &[QualityVector],
    hyperparams: &SvmHyperparams,
) -> Result<SvmModel> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Training(
            "need at least one example per class".to_string(),
        ));
    }
    if hyperparams.c <= 0.0 {
        return Err(Error::Training("C must be positive".to_string()));
    }

    let mut samples: Vec<[f64; CRITERIA_COUNT]> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for v in positives {
        samples.push(v.to_array());
        labels.push(1.0);
    }
    for v in negatives {
        samples.push(v.to_array());
        labels.push(-1.0);
    }
    // Canonical sample order, independent of which class was passed first:
    // swapping the class arguments then yields an exactly mirrored
    // optimization trajectory (decision values negate).
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |s: &[f64; CRITERIA_COUNT]| s.map(f64::to_bits);
        key(&samples[a]).cmp(&key(&samples[b]))
    });
    let samples: Vec<[f64; CRITERIA_COUNT]> = order.iter().map(|&i| samples[i]).collect();
    let labels: Vec<f64> = order.iter().map(|&i| labels[i]).collect();

    let first = samples[0];
    if samples.iter().all(|s| *s == first) {
        return Err(Error::Training(
            "degenerate training set: all feature vectors identical".to_string(),
        ));
    }

    let (means, scales) = standardization(&samples);
    let standardized: Vec<[f64; CRITERIA_COUNT]> = samples
        .iter()
        .map(|s| {
            let mut z = [0.0; CRITERIA_COUNT];
            for i in 0..CRITERIA_COUNT {
                z[i] = (s[i] - means[i]) / scales[i];
            }
            z
        })
        .collect();

    let n = standardized.len();
    let lambda = 1.0 / (hyperparams.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut weights = [0.0; CRITERIA_COUNT];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let mut t = 0u64;

    for _ in 0..hyperparams.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &standardized[idx];
            let y = labels[idx];
            let margin = y * (dot(&weights, x) + bias);
            let shrink = 1.0 - eta * lambda;
            for w in &mut weights {
                *w *= shrink;
            }
            if margin < 1.0 {
                for i in 0..CRITERIA_COUNT {
                    weights[i] += eta * y * x[i];
                }
                bias += eta * y;
            }
            let norm = dot(&weights, &weights).sqrt();
            if norm > radius {
                let factor = radius / norm;
                for w in &mut weights {
                    *w *= factor;
                }
            }
        }
    }

    let fingerprint = training_fingerprint(&samples, &labels, hyperparams);
    let model = SvmModel {
        weights: weights.to_vec(),
        bias,
        feature_means: means,
        feature_scales: scales,
        training_fingerprint: fingerprint,
    };
    model.validate()?;
    Ok(model)
}

fn dot(a: &[f64; CRITERIA_COUNT], b: &[f64; CRITERIA_COUNT]) -> f64 {
    let mut total = 0.0;
    for i in 0..CRITERIA_COUNT {
        total += a[i] * b[i];
    }
    total
}

fn training_fingerprint(
    samples: &[[f64; CRITERIA_COUNT]],
    labels: &[f64],
    hp: &SvmHyperparams,
) -> String {
    let mut bytes = Vec::new();
    for (sample, label) in samples.iter().zip(labels) {
        for v in sample {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        bytes.extend_from_slice(&label.to_bits().to_le_bytes());
    }
    bytes.extend_from_slice(&hp.c.to_bits().to_le_bytes());
    bytes.extend_from_slice(&(hp.epochs as u64).to_le_bytes());
    bytes.extend_from_slice(&hp.seed.to_le_bytes());
    sha256_hex(&[&bytes])
}

/// Training-set accuracy of a model.
pub fn training_accuracy(
    model: &SvmModel,
    positives: &[QualityVector],
    negatives: &[QualityVector],
) -> f64 {
    let mut correct = 0usize;
    for v in positives {
        if model.predict_positive(v) {
            correct += 1;
        }
    }
    for v in negatives {
        if !model.predict_positive(v) {
            correct += 1;
        }
    }
    correct as f64 / (positives.len() + negatives.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A vector with the given values in dimensions 9 and 10 (fluency and
    /// clarity), everything else midscale.
    pub(crate) fn two_dim_vector(a: f64, b: f64) -> QualityVector {
        let mut values = [0.5; CRITERIA_COUNT];
        values[0] = 8.0;
        values[1] = 3.0;
        values[2] = 1.0;
        for v in values.iter_mut().take(19).skip(9) {
            *v = 3.0;
        }
        values[9] = a;
        values[10] = b;
        QualityVector::from_array_clamped(values)
    }

    fn toy_set(n_per_class: usize) -> (Vec<QualityVector>, Vec<QualityVector>) {
        // Two clusters separated along fluency+clarity.
        let positives: Vec<QualityVector> = (0..n_per_class)
            .map(|i| two_dim_vector(4.0 + 0.05 * (i % 5) as f64, 4.2 + 0.04 * (i % 7) as f64))
            .collect();
        let negatives: Vec<QualityVector> = (0..n_per_class)
            .map(|i| two_dim_vector(1.5 + 0.05 * (i % 5) as f64, 1.8 + 0.04 * (i % 7) as f64))
            .collect();
        (positives, negatives)
    }

    fn fast_hp() -> SvmHyperparams {
        SvmHyperparams {
            epochs: 2_000,
            ..SvmHyperparams::default()
        }
    }

    #[test]
    fn separable_set_reaches_full_accuracy() {
        let (pos, neg) = toy_set(10);
        let model = train_svm(&pos, &neg, &fast_hp()).unwrap();
        assert_eq!(training_accuracy(&model, &pos, &neg), 1.0);
    }

    #[test]
    fn swapped_labels_negate_decisions() {
        let (pos, neg) = toy_set(8);
        let forward = train_svm(&pos, &neg, &fast_hp()).unwrap();
        let swapped = train_svm(&neg, &pos, &fast_hp()).unwrap();
        let probes: Vec<QualityVector> = (0..10)
            .map(|i| two_dim_vector(1.0 + 0.4 * i as f64, 4.5 - 0.3 * i as f64))
            .collect();
        for probe in &probes {
            let d1 = forward.decision(probe);
            let d2 = swapped.decision(probe);
            assert!(
                (d1 + d2).abs() <= 1e-6,
                "decisions not negated: {d1} vs {d2}"
            );
        }
    }

    #[test]
    fn training_is_reproducible_bit_for_bit() {
        let (pos, neg) = toy_set(6);
        let a = train_svm(&pos, &neg, &fast_hp()).unwrap();
        let b = train_svm(&pos, &neg, &fast_hp()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn standardization_is_zero_mean_unit_variance() {
        let (pos, neg) = toy_set(9);
        let model = train_svm(&pos, &neg, &fast_hp()).unwrap();
        let all: Vec<[f64; CRITERIA_COUNT]> = pos
            .iter()
            .chain(neg.iter())
            .map(|v| v.to_array())
            .collect();
        for dim in 0..CRITERIA_COUNT {
            let z: Vec<f64> = all
                .iter()
                .map(|s| (s[dim] - model.feature_means[dim]) / model.feature_scales[dim])
                .collect();
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-9, "dim {dim} mean {mean}");
            if var != 0.0 {
                assert!((var - 1.0).abs() < 1e-6, "dim {dim} variance {var}");
            }
        }
    }

    #[test]
    fn degenerate_training_set_is_an_error() {
        let v = two_dim_vector(3.0, 3.0);
        let err = train_svm(&[v.clone(), v.clone()], std::slice::from_ref(&v), &fast_hp()).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
        assert!(train_svm(&[], &[v], &fast_hp()).is_err());
    }
}
