//! Shared domain types for nugget banks, reports, judgments, and score
//! matrices, plus the pure operations that police their invariants.
//!
//! All types here are immutable value objects: cloneable, serializable, and
//! safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A report request: what the user wants a report about, optionally with a
/// persona describing who is asking and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub title: String,
    pub request_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<Persona>,
}

/// User persona attached to a topic; drives the personalization criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub goal: String,
    pub background: String,
    pub role: String,
    pub communication: String,
    pub scope: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    /// BCP-47 language code.
    pub lang: String,
    pub text: String,
}

/// A precomputed retrieval ranking for one topic (stage-0 input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRanking {
    pub topic_id: String,
    pub entries: Vec<RankingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// An answer with its document grounding. `doc_ids` is a set: merging
/// duplicate answers unions the documents that attest them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub doc_ids: BTreeSet<String>,
}

impl Answer {
    pub fn new(text: impl Into<String>, doc_id: impl Into<String>) -> Self {
        Answer {
            text: text.into(),
            doc_ids: BTreeSet::from([doc_id.into()]),
        }
    }
}

/// A freshly generated QA pair, grounded in exactly one source document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateNugget {
    pub nugget_id: String,
    pub topic_id: String,
    pub question: String,
    pub answers: Vec<Answer>,
    pub source_doc_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregator {
    #[serde(rename = "AND")]
    And,
    #[serde(rename = "OR")]
    Or,
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Aggregator::And => write!(f, "AND"),
            Aggregator::Or => write!(f, "OR"),
        }
    }
}

/// How a nugget set was selected in stage 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    /// Quality-criteria SVM ranking (method B).
    Dogmatiq,
    /// Cluster-frequency ranking (method A).
    Common,
    /// Seeded random sampling (method C).
    Sample,
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionMethod::Dogmatiq => write!(f, "dogmatiq"),
            SelectionMethod::Common => write!(f, "common"),
            SelectionMethod::Sample => write!(f, "sample"),
        }
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dogmatiq" => Ok(SelectionMethod::Dogmatiq),
            "common" => Ok(SelectionMethod::Common),
            "sample" => Ok(SelectionMethod::Sample),
            other => Err(Error::Config(format!("unknown selection method {other:?}"))),
        }
    }
}

/// Provenance carried by a merged nugget through refinement and selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub member_question_texts: Vec<String>,
    pub cluster_size: u32,
    pub grounding_doc_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<QualityVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_method: Option<SelectionMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_rank: Option<u32>,
}

/// A merged, refined QA nugget: one canonical question, one or more grounded
/// answers, and the AND/OR aggregator deciding when it counts as addressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QANugget {
    pub nugget_id: String,
    pub topic_id: String,
    pub question: String,
    pub aggregator: Aggregator,
    pub answers: Vec<Answer>,
    pub provenance: Provenance,
}

impl QANugget {
    /// Union of all answers' grounding documents.
    pub fn grounding_docs(&self) -> BTreeSet<String> {
        self.answers
            .iter()
            .flat_map(|a| a.doc_ids.iter().cloned())
            .collect()
    }

    /// Recompute `grounding_doc_count` from the current answer set.
    pub fn refresh_grounding_count(&mut self) {
        self.provenance.grounding_doc_count = self.grounding_docs().len() as u32;
    }
}

/// The 19 quality criteria, stored in fixed order so the feature-vector
/// layout is part of the format contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityVector {
    pub reading_level: f64,
    pub complexity: f64,
    pub vitality: f64,
    pub goal_match: f64,
    pub background_match: f64,
    pub role_match: f64,
    pub communication_match: f64,
    pub scope_match: f64,
    pub personalization_overall: f64,
    pub fluency: f64,
    pub clarity: f64,
    pub ambiguity: f64,
    pub relevance: f64,
    pub incompleteness: f64,
    pub assumptiveness: f64,
    pub multifaceted: f64,
    pub knowledge_intensiveness: f64,
    pub subjectiveness: f64,
    pub reasoning_intensiveness: f64,
}

pub const CRITERIA_COUNT: usize = 19;

/// Criterion names in vector order.
pub const CRITERION_NAMES: [&str; CRITERIA_COUNT] = [
    "reading_level",
    "complexity",
    "vitality",
    "goal_match",
    "background_match",
    "role_match",
    "communication_match",
    "scope_match",
    "personalization_overall",
    "fluency",
    "clarity",
    "ambiguity",
    "relevance",
    "incompleteness",
    "assumptiveness",
    "multifaceted",
    "knowledge_intensiveness",
    "subjectiveness",
    "reasoning_intensiveness",
];

/// (min, max) scale per criterion, in vector order. Vitality is binary.
pub const CRITERION_SCALES: [(f64, f64); CRITERIA_COUNT] = [
    (4.0, 13.0),
    (1.0, 6.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
    (1.0, 5.0),
];

impl QualityVector {
    /// Build from an array in canonical order, clamping every value to its
    /// scale. Vitality snaps to {0, 1}.
    pub fn from_array_clamped(values: [f64; CRITERIA_COUNT]) -> Self {
        let mut clamped = [0.0; CRITERIA_COUNT];
        for (i, v) in values.iter().enumerate() {
            clamped[i] = clamp_criterion(i, *v);
        }
        QualityVector {
            reading_level: clamped[0],
            complexity: clamped[1],
            vitality: clamped[2],
            goal_match: clamped[3],
            background_match: clamped[4],
            role_match: clamped[5],
            communication_match: clamped[6],
            scope_match: clamped[7],
            personalization_overall: clamped[8],
            fluency: clamped[9],
            clarity: clamped[10],
            ambiguity: clamped[11],
            relevance: clamped[12],
            incompleteness: clamped[13],
            assumptiveness: clamped[14],
            multifaceted: clamped[15],
            knowledge_intensiveness: clamped[16],
            subjectiveness: clamped[17],
            reasoning_intensiveness: clamped[18],
        }
    }

    pub fn to_array(&self) -> [f64; CRITERIA_COUNT] {
        [
            self.reading_level,
            self.complexity,
            self.vitality,
            self.goal_match,
            self.background_match,
            self.role_match,
            self.communication_match,
            self.scope_match,
            self.personalization_overall,
            self.fluency,
            self.clarity,
            self.ambiguity,
            self.relevance,
            self.incompleteness,
            self.assumptiveness,
            self.multifaceted,
            self.knowledge_intensiveness,
            self.subjectiveness,
            self.reasoning_intensiveness,
        ]
    }
}

/// Clamp a raw criterion value to its scale; vitality rounds to {0, 1}.
pub fn clamp_criterion(index: usize, value: f64) -> f64 {
    let (lo, hi) = CRITERION_SCALES[index];
    let v = value.clamp(lo, hi);
    if index == 2 {
        v.round()
    } else {
        v
    }
}

/// A finalized per-topic nugget set plus the full candidate pool it was
/// selected from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuggetBank {
    pub topic_id: String,
    pub selected: Vec<QANugget>,
    pub candidates: Vec<QANugget>,
    pub method: SelectionMethod,
    pub config_fingerprint: String,
}

/// A run's response for one topic, as cited sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub topic_id: String,
    pub sentences: Vec<ReportSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSentence {
    pub text: String,
    pub citations: Vec<String>,
}

impl Report {
    /// Full report text, sentences joined by single spaces.
    pub fn full_text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Key addressing one judged (run, topic, nugget) triple.
pub type JudgmentKey = (String, String, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    /// One verdict per answer of the judged nugget, in answer order. May be
    /// empty when only an overall `addressed` flag was imported.
    pub answer_verdicts: Vec<bool>,
    pub addressed: bool,
}

/// A set of nugget judgments from one judge (a provider or "manual").
///
/// Serialized as a flat row list, matching the judgments.jsonl record shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "JudgmentSetRepr", from = "JudgmentSetRepr")]
pub struct JudgmentSet {
    pub judge_label: String,
    pub entries: BTreeMap<JudgmentKey, Judgment>,
}

/// One judgments.jsonl data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRow {
    pub run_id: String,
    pub topic_id: String,
    pub nugget_id: String,
    pub answer_verdicts: Vec<bool>,
    pub addressed: bool,
}

#[derive(Serialize, Deserialize)]
struct JudgmentSetRepr {
    judge_label: String,
    entries: Vec<JudgmentRow>,
}

impl From<JudgmentSet> for JudgmentSetRepr {
    fn from(set: JudgmentSet) -> Self {
        JudgmentSetRepr {
            judge_label: set.judge_label,
            entries: set
                .entries
                .into_iter()
                .map(|((run_id, topic_id, nugget_id), j)| JudgmentRow {
                    run_id,
                    topic_id,
                    nugget_id,
                    answer_verdicts: j.answer_verdicts,
                    addressed: j.addressed,
                })
                .collect(),
        }
    }
}

impl From<JudgmentSetRepr> for JudgmentSet {
    fn from(repr: JudgmentSetRepr) -> Self {
        let mut entries = BTreeMap::new();
        for row in repr.entries {
            entries.insert(
                (row.run_id, row.topic_id, row.nugget_id),
                Judgment {
                    answer_verdicts: row.answer_verdicts,
                    addressed: row.addressed,
                },
            );
        }
        JudgmentSet {
            judge_label: repr.judge_label,
            entries,
        }
    }
}

impl JudgmentSet {
    pub fn new(judge_label: impl Into<String>) -> Self {
        JudgmentSet {
            judge_label: judge_label.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, run_id: &str, topic_id: &str, nugget_id: &str) -> Option<&Judgment> {
        self.entries
            .get(&(run_id.to_string(), topic_id.to_string(), nugget_id.to_string()))
    }
}

/// Dense runs x topics score matrix with explicit missing markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub run_ids: Vec<String>,
    pub topic_ids: Vec<String>,
    /// Row-major: `scores[run][topic]`; `None` marks a missing score.
    pub scores: Vec<Vec<Option<f64>>>,
    pub label: String,
}

impl ScoreMatrix {
    pub fn get(&self, run_id: &str, topic_id: &str) -> Option<f64> {
        let r = self.run_ids.iter().position(|x| x == run_id)?;
        let t = self.topic_ids.iter().position(|x| x == topic_id)?;
        self.scores[r][t]
    }

    /// All present scores for one run, keyed by topic.
    pub fn run_scores(&self, run_id: &str) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let Some(r) = self.run_ids.iter().position(|x| x == run_id) {
            for (t, topic) in self.topic_ids.iter().enumerate() {
                if let Some(v) = self.scores[r][t] {
                    out.insert(topic.clone(), v);
                }
            }
        }
        out
    }

    /// Check shape and score-range invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in &self.run_ids {
            if !seen.insert(id.clone()) {
                return Err(Error::contract(format!("duplicate run_id {id:?}")));
            }
        }
        let mut seen = BTreeSet::new();
        for id in &self.topic_ids {
            if !seen.insert(id.clone()) {
                return Err(Error::contract(format!("duplicate topic_id {id:?}")));
            }
        }
        if self.scores.len() != self.run_ids.len() {
            return Err(Error::contract("score row count != run count".to_string()));
        }
        for row in &self.scores {
            if row.len() != self.topic_ids.len() {
                return Err(Error::contract("score column count != topic count".to_string()));
            }
            for v in row.iter().flatten() {
                if !(0.0..=1.0).contains(v) {
                    return Err(Error::contract(format!("score {v} outside [0,1]")));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// A non-fatal issue observed while processing one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Pipeline stage or operation that raised the diagnostic.
    pub stage: String,
    /// Stable machine-readable code, e.g. "provider_failure" or "truncated".
    pub code: String,
    /// Identifier of the affected item (doc, nugget, row, ...).
    pub item: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(stage: &str, code: &str, item: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            stage: stage.to_string(),
            code: code.to_string(),
            item: item.into(),
            message: message.into(),
        }
    }
}

/// Ordered diagnostic collector shared by pipeline stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub items: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, d: Diagnostic) {
        self.items.push(d);
    }

    pub fn record(&mut self, stage: &str, code: &str, item: impl Into<String>, message: impl Into<String>) {
        self.items.push(Diagnostic::new(stage, code, item, message));
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.items.extend(other.items);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count_code(&self, code: &str) -> usize {
        self.items.iter().filter(|d| d.code == code).count()
    }

    /// Counts grouped by (stage, code), for manifests.
    pub fn summary(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for d in &self.items {
            *out.entry(format!("{}/{}", d.stage, d.code)).or_insert(0) += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Fold per-answer verdicts under a nugget's aggregator: OR means any single
/// answer suffices, AND means all must be present.
pub fn fold_aggregator(aggregator: Aggregator, answer_verdicts: &[bool]) -> Result<bool> {
    if answer_verdicts.is_empty() {
        return Err(Error::contract("fold_aggregator requires at least one verdict"));
    }
    Ok(match aggregator {
        Aggregator::Or => answer_verdicts.iter().any(|v| *v),
        Aggregator::And => answer_verdicts.iter().all(|v| *v),
    })
}

/// Result of `validate_collection`: pass/fail plus item-level diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub diagnostics: Vec<Diagnostic>,
}

/// Cross-check a collection for dangling references, duplicate identifiers,
/// and empty texts. Never mutates its inputs; problems are data, not errors.
pub fn validate_collection(
    topics: &[Topic],
    documents: &[Document],
    rankings: &[RetrievalRanking],
) -> ValidationReport {
    const STAGE: &str = "validate";
    let mut diags = Vec::new();

    let mut topic_ids = BTreeSet::new();
    for topic in topics {
        if topic.topic_id.is_empty() {
            diags.push(Diagnostic::new(STAGE, "empty_id", "", "topic with empty topic_id"));
        } else if !topic_ids.insert(topic.topic_id.clone()) {
            diags.push(Diagnostic::new(
                STAGE,
                "duplicate_id",
                &topic.topic_id,
                format!("duplicate topic_id {:?}", topic.topic_id),
            ));
        }
        if topic.request_text.trim().is_empty() {
            diags.push(Diagnostic::new(
                STAGE,
                "empty_text",
                &topic.topic_id,
                "topic request_text is empty",
            ));
        }
    }

    let mut doc_ids = BTreeSet::new();
    for doc in documents {
        if doc.doc_id.is_empty() {
            diags.push(Diagnostic::new(STAGE, "empty_id", "", "document with empty doc_id"));
        } else if !doc_ids.insert(doc.doc_id.clone()) {
            diags.push(Diagnostic::new(
                STAGE,
                "duplicate_id",
                &doc.doc_id,
                format!("duplicate doc_id {:?}", doc.doc_id),
            ));
        }
        if doc.text.trim().is_empty() {
            diags.push(Diagnostic::new(STAGE, "empty_text", &doc.doc_id, "document text is empty"));
        }
        if doc.lang.trim().is_empty() {
            diags.push(Diagnostic::new(STAGE, "empty_text", &doc.doc_id, "document lang is empty"));
        }
    }

    let mut ranking_topics = BTreeSet::new();
    for ranking in rankings {
        if !topic_ids.contains(&ranking.topic_id) {
            diags.push(Diagnostic::new(
                STAGE,
                "dangling_reference",
                &ranking.topic_id,
                format!("ranking references unknown topic_id {:?}", ranking.topic_id),
            ));
        }
        if !ranking_topics.insert(ranking.topic_id.clone()) {
            diags.push(Diagnostic::new(
                STAGE,
                "duplicate_id",
                &ranking.topic_id,
                format!("multiple rankings for topic_id {:?}", ranking.topic_id),
            ));
        }
        let mut seen_docs = BTreeSet::new();
        let mut prev_rank = 0u32;
        for entry in &ranking.entries {
            if !doc_ids.contains(&entry.doc_id) {
                diags.push(Diagnostic::new(
                    STAGE,
                    "dangling_reference",
                    &entry.doc_id,
                    format!(
                        "ranking for topic {:?} references unknown doc_id {:?}",
                        ranking.topic_id, entry.doc_id
                    ),
                ));
            }
            if !seen_docs.insert(entry.doc_id.clone()) {
                diags.push(Diagnostic::new(
                    STAGE,
                    "duplicate_id",
                    &entry.doc_id,
                    format!(
                        "doc_id {:?} listed twice in ranking for topic {:?}",
                        entry.doc_id, ranking.topic_id
                    ),
                ));
            }
            if (prev_rank == 0 && entry.rank != 1) || (prev_rank > 0 && entry.rank <= prev_rank) {
                diags.push(Diagnostic::new(
                    STAGE,
                    "bad_rank_sequence",
                    &entry.doc_id,
                    format!(
                        "rank {} out of sequence in ranking for topic {:?}",
                        entry.rank, ranking.topic_id
                    ),
                ));
            }
            prev_rank = entry.rank;
        }
    }

    ValidationReport {
        pass: diags.is_empty(),
        diagnostics: diags,
    }
}

/// Pure audit of the NuggetBank invariants. Returns one message per
/// violation; an empty vector means the bank is well-formed.
pub fn audit_bank(bank: &NuggetBank, cap: usize) -> Vec<String> {
    let mut violations = Vec::new();

    if bank.selected.len() > cap {
        violations.push(format!(
            "selected count {} exceeds cap {cap}",
            bank.selected.len()
        ));
    }

    let candidate_ids: BTreeSet<&str> =
        bank.candidates.iter().map(|n| n.nugget_id.as_str()).collect();
    for nugget in &bank.selected {
        if !candidate_ids.contains(nugget.nugget_id.as_str()) {
            violations.push(format!(
                "selected nugget {:?} is not in the candidate pool",
                nugget.nugget_id
            ));
        }
    }

    for (i, nugget) in bank.selected.iter().enumerate() {
        match nugget.provenance.selection_rank {
            Some(rank) if rank as usize == i + 1 => {}
            other => violations.push(format!(
                "selected nugget {:?} has selection_rank {:?}, expected {}",
                nugget.nugget_id,
                other,
                i + 1
            )),
        }
    }

    for nugget in bank.selected.iter().chain(bank.candidates.iter()) {
        if nugget.answers.is_empty() {
            violations.push(format!("nugget {:?} has no answers", nugget.nugget_id));
        }
        for answer in &nugget.answers {
            if answer.text.trim().is_empty() {
                violations.push(format!("nugget {:?} has an empty answer", nugget.nugget_id));
            }
            if answer.doc_ids.is_empty() {
                violations.push(format!(
                    "nugget {:?} has an answer with no grounding documents",
                    nugget.nugget_id
                ));
            }
        }
        let expect_grounding = nugget.grounding_docs().len() as u32;
        if nugget.provenance.grounding_doc_count != expect_grounding {
            violations.push(format!(
                "nugget {:?} grounding_doc_count {} != union size {}",
                nugget.nugget_id, nugget.provenance.grounding_doc_count, expect_grounding
            ));
        }
        let expect_cluster = nugget.provenance.member_question_texts.len() as u32;
        if nugget.provenance.cluster_size != expect_cluster || expect_cluster == 0 {
            violations.push(format!(
                "nugget {:?} cluster_size {} != member question count {}",
                nugget.nugget_id, nugget.provenance.cluster_size, expect_cluster
            ));
        }
        if nugget.topic_id != bank.topic_id {
            violations.push(format!(
                "nugget {:?} topic_id {:?} != bank topic_id {:?}",
                nugget.nugget_id, nugget.topic_id, bank.topic_id
            ));
        }
    }

    violations
}
