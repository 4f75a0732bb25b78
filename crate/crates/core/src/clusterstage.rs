//! Stage 2A: find paraphrase question pairs by embedding cosine threshold,
//! verify them with an LLM, cluster as connected components, and merge each
//! cluster's answers under a single nugget.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genstage::diag_code;
use crate::model::{Aggregator, Answer, CandidateNugget, Diagnostics, Provenance, QANugget};
use crate::providers::templates::{vars, TemplateId};
use crate::providers::{cosine, ChatProvider, ChatRequest, Embedder, EmbeddingRequest};
use crate::util::normalize_ws_lower;

/// An undirected paraphrase edge in canonical form (`nugget_id_a` is the
/// lexicographically smaller endpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseEdge {
    pub nugget_id_a: String,
    pub nugget_id_b: String,
    pub cosine: f64,
    pub verified: bool,
}

impl ParaphraseEdge {
    fn canonical(id_x: &str, id_y: &str, cosine: f64) -> Self {
        let (a, b) = if id_x <= id_y { (id_x, id_y) } else { (id_y, id_x) };
        ParaphraseEdge {
            nugget_id_a: a.to_string(),
            nugget_id_b: b.to_string(),
            cosine,
            verified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub cosine_threshold: f64,
    pub verify_with_llm: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            cosine_threshold: 0.9,
            verify_with_llm: true,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cosine_threshold <= 0.0 || self.cosine_threshold > 1.0 {
            return Err(Error::Config(format!(
                "cosine_threshold {} outside (0,1]",
                self.cosine_threshold
            )));
        }
        Ok(())
    }
}

/// All-pairs candidate edges: exactly the pairs whose question-embedding
/// cosine exceeds the threshold, canonicalized and sorted.
pub fn candidate_pairs(
    questions: &[(String, String)],
    embedder: &Embedder,
    config: &ClusterConfig,
) -> Result<Vec<ParaphraseEdge>> {
    config.validate()?;
    if questions.is_empty() {
        return Err(Error::contract("candidate_pairs requires at least one question"));
    }
    let texts: Vec<String> = questions.iter().map(|(_, q)| q.clone()).collect();
    let vectors = embedder.embed(&EmbeddingRequest::new(texts))?;
    let mut edges = Vec::new();
    for i in 0..questions.len() {
        for j in (i + 1)..questions.len() {
            let sim = cosine(&vectors[i], &vectors[j]);
            if sim > config.cosine_threshold {
                edges.push(ParaphraseEdge::canonical(&questions[i].0, &questions[j].0, sim));
            }
        }
    }
    edges.sort_by(|x, y| {
        (&x.nugget_id_a, &x.nugget_id_b).cmp(&(&y.nugget_id_a, &y.nugget_id_b))
    });
    Ok(edges)
}

/// Keep exactly the edges an LLM judges to be paraphrases. Unparseable
/// verdicts and provider failures drop the edge: merging is
/// structure-creating, so errors fail closed.
pub fn verify_pairs(
    edges: &[ParaphraseEdge],
    questions_by_id: &BTreeMap<String, String>,
    provider: &ChatProvider,
) -> (Vec<ParaphraseEdge>, Diagnostics) {
    const STAGE: &str = "stage2a";
    let mut verified = Vec::new();
    let mut diagnostics = Diagnostics::new();
    for edge in edges {
        let (Some(qa), Some(qb)) = (
            questions_by_id.get(&edge.nugget_id_a),
            questions_by_id.get(&edge.nugget_id_b),
        ) else {
            diagnostics.record(
                STAGE,
                "unknown_id",
                format!("{}|{}", edge.nugget_id_a, edge.nugget_id_b),
                "edge references an unknown nugget id",
            );
            continue;
        };
        let request = ChatRequest::new(
            TemplateId::VerifyParaphrase,
            vars(&[("question_a", qa), ("question_b", qb)]),
        );
        match provider.chat_parsed(&request) {
            Ok(crate::providers::parse::ParsedResponse::YesNo(true)) => {
                let mut edge = edge.clone();
                edge.verified = true;
                verified.push(edge);
            }
            Ok(_) => {}
            Err(e) => diagnostics.record(
                STAGE,
                diag_code(&e),
                format!("{}|{}", edge.nugget_id_a, edge.nugget_id_b),
                format!("edge dropped: {e}"),
            ),
        }
    }
    (verified, diagnostics)
}

/// Partition nugget ids into connected components of the verified-edge
/// graph. Singletons are included; members and clusters are sorted.
pub fn connected_components(
    nugget_ids: &[String],
    verified_edges: &[ParaphraseEdge],
) -> Result<Vec<Vec<String>>> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, id) in nugget_ids.iter().enumerate() {
        if index.insert(id.as_str(), i).is_some() {
            return Err(Error::contract(format!("duplicate nugget id {id:?}")));
        }
    }

    let mut uf = UnionFind::new(nugget_ids.len());
    for edge in verified_edges {
        let a = *index
            .get(edge.nugget_id_a.as_str())
            .ok_or_else(|| Error::contract(format!("edge references unknown id {:?}", edge.nugget_id_a)))?;
        let b = *index
            .get(edge.nugget_id_b.as_str())
            .ok_or_else(|| Error::contract(format!("edge references unknown id {:?}", edge.nugget_id_b)))?;
        uf.union(a, b);
    }

    let mut by_root: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, id) in nugget_ids.iter().enumerate() {
        by_root.entry(uf.find(i)).or_default().push(id.clone());
    }
    let mut clusters: Vec<Vec<String>> = by_root.into_values().collect();
    for cluster in &mut clusters {
        cluster.sort();
    }
    clusters.sort();
    Ok(clusters)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            self.parent[root] = self.parent[self.parent[root]];
            root = self.parent[root];
        }
        root
    }

    fn union(&mut self, x: usize, y: usize) {
        let (mut a, mut b) = (self.find(x), self.find(y));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Merge one cluster of candidates into a single pre-canonical nugget.
///
/// Answers are concatenated in member order; answers whose normalized text
/// is identical merge by unioning their grounding documents. The question is
/// provisionally the first member's (replaced during refinement), and the
/// merged nugget keeps the smallest member id.
pub fn merge_cluster(cluster: &[CandidateNugget]) -> Result<QANugget> {
    if cluster.is_empty() {
        return Err(Error::contract("merge_cluster requires a non-empty cluster"));
    }
    let mut members: Vec<&CandidateNugget> = cluster.iter().collect();
    members.sort_by(|a, b| a.nugget_id.cmp(&b.nugget_id));

    let mut answers: Vec<Answer> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for member in &members {
        for answer in &member.answers {
            let key = normalize_ws_lower(&answer.text);
            match seen.get(&key) {
                Some(&slot) => {
                    answers[slot].doc_ids.extend(answer.doc_ids.iter().cloned());
                }
                None => {
                    seen.insert(key, answers.len());
                    answers.push(answer.clone());
                }
            }
        }
    }

    let member_question_texts: Vec<String> =
        members.iter().map(|m| m.question.clone()).collect();
    let grounding_count = answers
        .iter()
        .flat_map(|a| a.doc_ids.iter())
        .collect::<BTreeSet<&String>>()
        .len() as u32;

    Ok(QANugget {
        nugget_id: members[0].nugget_id.clone(),
        topic_id: members[0].topic_id.clone(),
        question: members[0].question.clone(),
        aggregator: Aggregator::Or,
        answers,
        provenance: Provenance {
            cluster_size: member_question_texts.len() as u32,
            grounding_doc_count: grounding_count,
            member_question_texts,
            criteria: None,
            selection_method: None,
            selection_rank: None,
        },
    })
}

/// Stage-2A output: merged nuggets plus the edge audit trail.
pub struct Stage2aOutput {
    pub merged: Vec<QANugget>,
    pub edges: Vec<ParaphraseEdge>,
    pub diagnostics: Diagnostics,
}

/// Full stage 2A: candidate pairs, optional LLM verification, components,
/// merge. With verification disabled, every candidate edge is kept.
pub fn run_stage2a(
    candidates: &[CandidateNugget],
    embedder: &Embedder,
    provider: &ChatProvider,
    config: &ClusterConfig,
) -> Result<Stage2aOutput> {
    if candidates.is_empty() {
        return Ok(Stage2aOutput {
            merged: Vec::new(),
            edges: Vec::new(),
            diagnostics: Diagnostics::new(),
        });
    }
    let questions: Vec<(String, String)> = candidates
        .iter()
        .map(|c| (c.nugget_id.clone(), c.question.clone()))
        .collect();
    let unverified = candidate_pairs(&questions, embedder, config)?;

    let (kept, diagnostics) = if config.verify_with_llm {
        let by_id: BTreeMap<String, String> = questions.iter().cloned().collect();
        verify_pairs(&unverified, &by_id, provider)
    } else {
        let kept = unverified
            .iter()
            .map(|e| {
                let mut e = e.clone();
                e.verified = true;
                e
            })
            .collect();
        (kept, Diagnostics::new())
    };

    let ids: Vec<String> = candidates.iter().map(|c| c.nugget_id.clone()).collect();
    let clusters = connected_components(&ids, &kept)?;

    let by_id: BTreeMap<&str, &CandidateNugget> =
        candidates.iter().map(|c| (c.nugget_id.as_str(), c)).collect();
    let mut merged = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let members: Vec<CandidateNugget> =
            cluster.iter().map(|id| by_id[id.as_str()].clone()).collect();
        merged.push(merge_cluster(&members)?);
    }

    // Audit trail keeps every candidate edge, with its verification verdict.
    let mut edges = unverified;
    let kept_keys: BTreeSet<(String, String)> = kept
        .iter()
        .map(|e| (e.nugget_id_a.clone(), e.nugget_id_b.clone()))
        .collect();
    for edge in &mut edges {
        edge.verified = kept_keys.contains(&(edge.nugget_id_a.clone(), edge.nugget_id_b.clone()));
    }

    Ok(Stage2aOutput {
        merged,
        edges,
        diagnostics,
    })
}

/// Check grounding conservation across a merge: the union of grounding doc
/// ids before merging equals the union after. Returns violations.
pub fn check_grounding_conservation(
    candidates: &[CandidateNugget],
    merged: &[QANugget],
) -> Vec<String> {
    let before: BTreeSet<String> = candidates
        .iter()
        .flat_map(|c| c.answers.iter().flat_map(|a| a.doc_ids.iter().cloned()))
        .collect();
    let after: BTreeSet<String> = merged
        .iter()
        .flat_map(|n| n.answers.iter().flat_map(|a| a.doc_ids.iter().cloned()))
        .collect();
    let mut violations = Vec::new();
    for lost in before.difference(&after) {
        violations.push(format!("grounding doc {lost:?} lost in merge"));
    }
    for invented in after.difference(&before) {
        violations.push(format!("grounding doc {invented:?} invented in merge"));
    }
    violations
}
