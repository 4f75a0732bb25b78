//! Stage 1: summarize each retrieved document in its own language, then
//! generate 1-6 grounded English QA pairs per document.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Answer, CandidateNugget, Diagnostics, Document, RetrievalRanking, Topic};
use crate::providers::parse::ParsedResponse;
use crate::providers::templates::{vars, TemplateId};
use crate::providers::{ChatProvider, ChatRequest};
use crate::util::parallel_map;

/// Maximum QA pairs kept per document; surplus is truncated.
pub const MAX_PAIRS_PER_DOC: usize = 6;

/// A per-document summary in the document's own language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocSummary {
    pub doc_id: String,
    pub lang: String,
    pub summary_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Config {
    /// Documents taken from the top of the ranking, per topic.
    pub top_k_docs: usize,
    /// Documents longer than this are split into chunks summarized
    /// independently, with the summaries concatenated.
    pub max_doc_chars: usize,
    pub parallelism: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            top_k_docs: 50,
            max_doc_chars: 24_000,
            parallelism: 1,
        }
    }
}

/// Summarize one document in its source language.
pub fn summarize(topic: &Topic, document: &Document, provider: &ChatProvider) -> Result<DocSummary> {
    summarize_with_limit(topic, document, provider, Stage1Config::default().max_doc_chars)
}

fn summarize_with_limit(
    topic: &Topic,
    document: &Document,
    provider: &ChatProvider,
    max_doc_chars: usize,
) -> Result<DocSummary> {
    if document.text.trim().is_empty() {
        return Err(Error::contract(format!(
            "document {:?} has empty text",
            document.doc_id
        )));
    }
    let mut parts = Vec::new();
    for chunk in chunk_text(&document.text, max_doc_chars.max(1)) {
        let request = ChatRequest::new(
            TemplateId::Summarize,
            vars(&[
                ("request_text", &topic.request_text),
                ("title", &topic.title),
                ("lang", &document.lang),
                ("document_text", chunk),
            ]),
        );
        match provider.chat_parsed(&request)? {
            ParsedResponse::Text(text) => parts.push(text),
            other => {
                return Err(Error::contract(format!(
                    "summarize parse produced {other:?}"
                )))
            }
        }
    }
    Ok(DocSummary {
        doc_id: document.doc_id.clone(),
        lang: document.lang.clone(),
        summary_text: parts.join("\n"),
    })
}

/// Split into contiguous chunks of at most `max_chars`, on char boundaries.
fn chunk_text(text: &str, max_chars: usize) -> Vec<&str> {
    let mut chunks = Vec::new();
    let mut rest = text;
    while rest.chars().count() > max_chars {
        let split_at = rest
            .char_indices()
            .nth(max_chars)
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        chunks.push(&rest[..split_at]);
        rest = &rest[split_at..];
    }
    chunks.push(rest);
    chunks
}

/// Generate grounded QA candidates from one summary. Every answer is
/// grounded in the summarized document. Returns the kept nuggets and any
/// truncation note; parse failure is an error for the caller's policy.
pub fn generate_qa(
    topic: &Topic,
    summary: &DocSummary,
    provider: &ChatProvider,
) -> Result<(Vec<CandidateNugget>, Option<String>)> {
    let request = ChatRequest::new(
        TemplateId::GenerateQa,
        vars(&[
            ("request_text", &topic.request_text),
            ("title", &topic.title),
            ("summary", &summary.summary_text),
        ]),
    );
    let pairs = match provider.chat_parsed(&request)? {
        ParsedResponse::QaPairs(pairs) => pairs,
        other => return Err(Error::contract(format!("generate_qa parse produced {other:?}"))),
    };
    let truncated = if pairs.len() > MAX_PAIRS_PER_DOC {
        Some(format!(
            "doc {:?} produced {} QA pairs; kept {MAX_PAIRS_PER_DOC}",
            summary.doc_id,
            pairs.len()
        ))
    } else {
        None
    };
    let nuggets = pairs
        .into_iter()
        .take(MAX_PAIRS_PER_DOC)
        .enumerate()
        .map(|(i, pair)| CandidateNugget {
            nugget_id: format!("{}/{}/{}", topic.topic_id, summary.doc_id, i + 1),
            topic_id: topic.topic_id.clone(),
            question: pair.question,
            answers: vec![Answer::new(pair.answer, summary.doc_id.clone())],
            source_doc_id: summary.doc_id.clone(),
        })
        .collect();
    Ok((nuggets, truncated))
}

/// Stage-1 output: candidates in (doc rank, within-doc) order, summaries for
/// the intermediate dump, and per-document diagnostics.
pub struct Stage1Output {
    pub candidates: Vec<CandidateNugget>,
    pub summaries: Vec<DocSummary>,
    pub diagnostics: Diagnostics,
}

/// Run summarize + generate_qa over the top-k ranked documents of a topic.
/// Nugget ids are `topic_id/doc_id/index`, a pure function of the inputs.
pub fn run_stage1(
    topic: &Topic,
    ranking: &RetrievalRanking,
    documents: &[Document],
    config: &Stage1Config,
    provider: &ChatProvider,
) -> Stage1Output {
    const STAGE: &str = "stage1";
    let mut diagnostics = Diagnostics::new();

    let mut ranked_docs: Vec<&Document> = Vec::new();
    for entry in ranking.entries.iter().take(config.top_k_docs) {
        match documents.iter().find(|d| d.doc_id == entry.doc_id) {
            Some(doc) => ranked_docs.push(doc),
            None => diagnostics.record(
                STAGE,
                "dangling_reference",
                &entry.doc_id,
                format!("ranked doc {:?} not in collection", entry.doc_id),
            ),
        }
    }

    type DocResult = (Vec<CandidateNugget>, Option<DocSummary>, Vec<(String, String, String)>);
    let per_doc: Vec<DocResult> = parallel_map(ranked_docs, config.parallelism, |doc| {
        let mut notes: Vec<(String, String, String)> = Vec::new();
        let summary = match summarize_with_limit(topic, doc, provider, config.max_doc_chars) {
            Ok(s) => s,
            Err(e) => {
                notes.push((
                    diag_code(&e).to_string(),
                    doc.doc_id.clone(),
                    format!("summarize failed, document skipped: {e}"),
                ));
                return (Vec::new(), None, notes);
            }
        };
        match generate_qa(topic, &summary, provider) {
            Ok((nuggets, truncated)) => {
                if let Some(message) = truncated {
                    notes.push(("truncated".to_string(), doc.doc_id.clone(), message));
                }
                (nuggets, Some(summary), notes)
            }
            Err(e) => {
                notes.push((
                    diag_code(&e).to_string(),
                    doc.doc_id.clone(),
                    format!("generate_qa failed, no pairs kept: {e}"),
                ));
                (Vec::new(), Some(summary), notes)
            }
        }
    });

    let mut candidates = Vec::new();
    let mut summaries = Vec::new();
    for (nuggets, summary, notes) in per_doc {
        candidates.extend(nuggets);
        summaries.extend(summary);
        for (code, item, message) in notes {
            diagnostics.record(STAGE, &code, item, message);
        }
    }

    Stage1Output {
        candidates,
        summaries,
        diagnostics,
    }
}

/// Diagnostic code for a stage error: provider failures are distinguished
/// from unparseable output so failure-injection counts stay exact.
pub fn diag_code(e: &Error) -> &'static str {
    match e {
        Error::Provider { .. } => "provider_failure",
        Error::Parse { .. } => "unparseable",
        _ => "error",
    }
}
