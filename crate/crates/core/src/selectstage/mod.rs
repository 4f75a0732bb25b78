//! Stage 3: score refined nuggets on 19 quality criteria, rank by trained
//! SVM decision value, cluster frequency, or seeded sampling, and emit the
//! capped nugget bank.

pub mod criteria;
pub mod svm;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genstage::diag_code;
use crate::model::{
    Diagnostics, NuggetBank, Persona, QANugget, QualityVector, SelectionMethod, Topic,
    CRITERIA_COUNT, CRITERION_SCALES,
};
use crate::providers::parse::ParsedResponse;
use crate::providers::templates::{vars, CriterionId, TemplateId};
use crate::providers::{ChatProvider, ChatRequest, Embedder, EmbeddingRequest};
use crate::util::parallel_map;
pub use svm::{train_svm, SvmHyperparams, SvmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    pub cap: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            method: SelectionMethod::Dogmatiq,
            cap: 20,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cap == 0 {
            return Err(Error::Config("selection cap must be >= 1".into()));
        }
        Ok(())
    }
}

fn persona_text(persona: Option<&Persona>) -> String {
    match persona {
        None => "none provided".to_string(),
        Some(p) => format!(
            "goal: {}; background: {}; role: {}; communication: {}; scope: {}",
            p.goal, p.background, p.role, p.communication, p.scope
        ),
    }
}

/// Score all 19 criteria for one nugget. Criteria 1-2 (reading level,
/// complexity) are computed programmatically; the rest are prompted
/// per-criterion and clamped to their scales. A failed criterion falls back
/// to its scale midpoint with a diagnostic (vitality, being binary, falls
/// back to 0).
pub fn score_criteria(
    nugget: &QANugget,
    topic: &Topic,
    provider: &ChatProvider,
    diagnostics: &mut Diagnostics,
) -> QualityVector {
    const STAGE: &str = "stage3";
    let answer_texts: Vec<String> = nugget.answers.iter().map(|a| a.text.clone()).collect();
    let numbered: String = answer_texts
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {a}\n", i + 1))
        .collect();
    let persona = persona_text(topic.persona.as_ref());

    let mut values = [0.0; CRITERIA_COUNT];
    values[0] = criteria::reading_level(&nugget.question, &answer_texts);
    values[1] = criteria::complexity(&nugget.question, &answer_texts);

    for criterion in CriterionId::all() {
        let request = ChatRequest::new(
            TemplateId::Criterion(criterion),
            vars(&[
                ("title", &topic.title),
                ("request_text", &topic.request_text),
                ("persona", &persona),
                ("question", &nugget.question),
                ("answers", numbered.trim_end()),
            ]),
        );
        values[criterion.0] = match provider.chat_parsed(&request) {
            Ok(ParsedResponse::Score { value, clamped }) => {
                if clamped {
                    diagnostics.record(
                        STAGE,
                        "clamped",
                        &nugget.nugget_id,
                        format!("criterion {} clamped to {value}", criterion.name()),
                    );
                }
                value
            }
            Ok(other) => {
                let fallback = criterion_fallback(criterion);
                diagnostics.record(
                    STAGE,
                    "unparseable",
                    &nugget.nugget_id,
                    format!("criterion {} returned {other:?}; using {fallback}", criterion.name()),
                );
                fallback
            }
            Err(e) => {
                let fallback = criterion_fallback(criterion);
                diagnostics.record(
                    STAGE,
                    diag_code(&e),
                    &nugget.nugget_id,
                    format!("criterion {} failed ({e}); using {fallback}", criterion.name()),
                );
                fallback
            }
        };
    }
    QualityVector::from_array_clamped(values)
}

/// Scale midpoint, except vitality: a failed binary criterion defaults to 0
/// (not vital) rather than rounding the 0.5 midpoint up.
fn criterion_fallback(criterion: CriterionId) -> f64 {
    if criterion.name() == "vitality" {
        return 0.0;
    }
    let (lo, hi) = CRITERION_SCALES[criterion.0];
    (lo + hi) / 2.0
}

/// Score criteria for a batch of nuggets, concurrently per nugget.
pub fn score_criteria_batch(
    nuggets: &[QANugget],
    topic: &Topic,
    provider: &ChatProvider,
    parallelism: usize,
) -> (BTreeMap<String, QualityVector>, Diagnostics) {
    let results: Vec<(String, QualityVector, Diagnostics)> =
        parallel_map(nuggets.to_vec(), parallelism, |nugget| {
            let mut diags = Diagnostics::new();
            let vector = score_criteria(nugget, topic, provider, &mut diags);
            (nugget.nugget_id.clone(), vector, diags)
        });
    let mut vectors = BTreeMap::new();
    let mut diagnostics = Diagnostics::new();
    for (id, vector, diags) in results {
        vectors.insert(id, vector);
        diagnostics.extend(diags);
    }
    (vectors, diagnostics)
}

/// Method B: descending SVM decision value, ties by nugget id.
pub fn rank_dogmatiq(
    nuggets: &[QANugget],
    vectors: &BTreeMap<String, QualityVector>,
    model: &SvmModel,
) -> Result<Vec<String>> {
    model.validate()?;
    let mut scored: Vec<(f64, &str)> = Vec::with_capacity(nuggets.len());
    for nugget in nuggets {
        let vector = vectors.get(&nugget.nugget_id).ok_or_else(|| {
            Error::contract(format!("no quality vector for nugget {:?}", nugget.nugget_id))
        })?;
        scored.push((model.decision(vector), &nugget.nugget_id));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().map(|(_, id)| id.to_string()).collect())
}

/// Method A: descending cluster size, then grounding-document count, then
/// ascending nugget id.
pub fn rank_common(nuggets: &[QANugget]) -> Vec<String> {
    let mut items: Vec<&QANugget> = nuggets.iter().collect();
    items.sort_by(|a, b| {
        b.provenance
            .cluster_size
            .cmp(&a.provenance.cluster_size)
            .then(b.provenance.grounding_doc_count.cmp(&a.provenance.grounding_doc_count))
            .then(a.nugget_id.cmp(&b.nugget_id))
    });
    items.into_iter().map(|n| n.nugget_id.clone()).collect()
}

/// Method C: a uniform seeded shuffle of the candidate ids.
pub fn rank_sample(nuggets: &[QANugget], seed: u64) -> Vec<String> {
    let mut ids: Vec<String> = nuggets.iter().map(|n| n.nugget_id.clone()).collect();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids
}

/// Rank by the configured method and keep the top `cap` as the bank's
/// selected list. Quality vectors are read from nugget provenance for the
/// dogmatiq method.
pub fn select(
    nuggets: &[QANugget],
    config: &SelectionConfig,
    model: Option<&SvmModel>,
    config_fingerprint: &str,
) -> Result<NuggetBank> {
    config.validate()?;
    if nuggets.is_empty() {
        return Err(Error::contract("select requires at least one nugget"));
    }
    let topic_id = nuggets[0].topic_id.clone();
    if nuggets.iter().any(|n| n.topic_id != topic_id) {
        return Err(Error::contract("select called with mixed topics"));
    }

    let ranking = match config.method {
        SelectionMethod::Dogmatiq => {
            let model =
                model.ok_or_else(|| Error::contract("dogmatiq selection requires an SVM model"))?;
            let mut vectors = BTreeMap::new();
            for nugget in nuggets {
                let vector = nugget.provenance.criteria.clone().ok_or_else(|| {
                    Error::contract(format!(
                        "nugget {:?} has no scored criteria",
                        nugget.nugget_id
                    ))
                })?;
                vectors.insert(nugget.nugget_id.clone(), vector);
            }
            rank_dogmatiq(nuggets, &vectors, model)?
        }
        SelectionMethod::Common => rank_common(nuggets),
        SelectionMethod::Sample => rank_sample(nuggets, config.seed),
    };

    let mut candidates: Vec<QANugget> = nuggets.to_vec();
    for nugget in &mut candidates {
        nugget.provenance.selection_method = Some(config.method);
        nugget.provenance.selection_rank = None;
    }
    candidates.sort_by(|a, b| a.nugget_id.cmp(&b.nugget_id));

    let take = config.cap.min(ranking.len());
    let mut selected = Vec::with_capacity(take);
    for (i, id) in ranking.iter().take(take).enumerate() {
        let slot = candidates
            .iter_mut()
            .find(|n| &n.nugget_id == id)
            .expect("ranking is a permutation of candidate ids");
        slot.provenance.selection_rank = Some(i as u32 + 1);
        selected.push(slot.clone());
    }

    Ok(NuggetBank {
        topic_id,
        selected,
        candidates,
        method: config.method,
        config_fingerprint: config_fingerprint.to_string(),
    })
}

/// Mine SVM negatives: candidate nuggets verified NOT to be paraphrases of
/// any positive question. The embedding cosine prefilter gates LLM
/// verification exactly as in clustering; the result is capped at
/// `max_ratio` negatives per positive.
pub fn mine_negatives(
    positive_questions: &[String],
    candidates: &[QANugget],
    embedder: &Embedder,
    provider: &ChatProvider,
    cosine_threshold: f64,
    max_ratio: usize,
) -> Result<Vec<String>> {
    if positive_questions.is_empty() {
        return Err(Error::contract("mine_negatives requires positive questions"));
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut texts: Vec<String> = positive_questions.to_vec();
    texts.extend(candidates.iter().map(|c| c.question.clone()));
    let vectors = embedder.embed(&EmbeddingRequest::new(texts))?;
    let (pos_vecs, cand_vecs) = vectors.split_at(positive_questions.len());

    let cap = max_ratio.saturating_mul(positive_questions.len());
    let mut kept = Vec::new();
    'candidates: for (candidate, cand_vec) in candidates.iter().zip(cand_vecs) {
        if kept.len() >= cap {
            break;
        }
        for (positive, pos_vec) in positive_questions.iter().zip(pos_vecs) {
            if crate::providers::cosine(cand_vec, pos_vec) <= cosine_threshold {
                continue;
            }
            let request = ChatRequest::new(
                TemplateId::VerifyParaphrase,
                vars(&[
                    ("question_a", positive.as_str()),
                    ("question_b", candidate.question.as_str()),
                ]),
            );
            match provider.chat_parsed(&request) {
                Ok(ParsedResponse::YesNo(true)) => continue 'candidates,
                Ok(_) => {}
                // Conservative: an unverifiable near-duplicate is excluded.
                Err(_) => continue 'candidates,
            }
        }
        kept.push(candidate.nugget_id.clone());
    }
    Ok(kept)
}
