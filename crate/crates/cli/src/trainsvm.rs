//! SVM training from labeled criteria files, with a single holdout accuracy
//! report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use nuggetbank_core::error::{Error, Result};
use nuggetbank_core::formats::{read_jsonl, write_atomic};
use nuggetbank_core::model::QualityVector;
use nuggetbank_core::selectstage::svm::training_accuracy;
use nuggetbank_core::selectstage::{train_svm, SvmHyperparams, SvmModel};

/// One criteria.jsonl row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub nugget_id: String,
    pub criteria: QualityVector,
}

pub fn read_criteria(path: &Path) -> Result<Vec<QualityVector>> {
    let rows: Vec<CriteriaRow> = read_jsonl(path)?;
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: no criteria rows", path.display())));
    }
    Ok(rows.into_iter().map(|r| r.criteria).collect())
}

pub struct TrainOutcome {
    pub model: SvmModel,
    pub train_accuracy: f64,
    pub holdout_accuracy: Option<f64>,
}

/// Train on the labeled vectors; with `holdout` in (0,1), every k-th sample
/// of each class is held out (deterministic split) and scored.
pub fn run_train(
    positives_path: &Path,
    negatives_path: &Path,
    hyperparams: &SvmHyperparams,
    holdout: Option<f64>,
    out: &Path,
) -> Result<TrainOutcome> {
    let positives = read_criteria(positives_path)?;
    let negatives = read_criteria(negatives_path)?;

    let (train_pos, held_pos, train_neg, held_neg) = match holdout {
        Some(fraction) if fraction > 0.0 && fraction < 1.0 => {
            let stride = (1.0 / fraction).round().max(2.0) as usize;
            let split = |v: &[QualityVector]| {
                let mut train = Vec::new();
                let mut held = Vec::new();
                for (i, item) in v.iter().enumerate() {
                    if i % stride == stride - 1 {
                        held.push(item.clone());
                    } else {
                        train.push(item.clone());
                    }
                }
                (train, held)
            };
            let (tp, hp) = split(&positives);
            let (tn, hn) = split(&negatives);
            (tp, hp, tn, hn)
        }
        Some(bad) => {
            return Err(Error::Config(format!("holdout fraction {bad} outside (0,1)")));
        }
        None => (positives.clone(), Vec::new(), negatives.clone(), Vec::new()),
    };

    let model = train_svm(&train_pos, &train_neg, hyperparams)?;
    let train_accuracy = training_accuracy(&model, &train_pos, &train_neg);
    let holdout_accuracy = if held_pos.is_empty() && held_neg.is_empty() {
        None
    } else {
        Some(training_accuracy(&model, &held_pos, &held_neg))
    };

    let mut json = serde_json::to_string_pretty(&model)?;
    json.push('\n');
    write_atomic(out, json.as_bytes())?;
    Ok(TrainOutcome {
        model,
        train_accuracy,
        holdout_accuracy,
    })
}
