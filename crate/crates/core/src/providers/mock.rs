//! Deterministic offline providers.
//!
//! `RuleMockChat` synthesizes well-formed responses from the structured
//! request so the whole pipeline runs as a pure function of its inputs and
//! seed. `ScriptedChat` replays canned responses keyed by rendered prompt.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::providers::templates::TemplateId;
use crate::providers::{ChatBackend, ChatRequest, EmbedBackend};
use crate::util::{normalize_ws_lower, sha256_seed, split_sentences};

// ---------------------------------------------------------------------------
// Rule-based mock chat
// ---------------------------------------------------------------------------

pub struct RuleMockChat {
    seed: u64,
    failure_rate: f64,
}

impl RuleMockChat {
    pub fn new(seed: u64, failure_rate: f64) -> Self {
        RuleMockChat { seed, failure_rate }
    }

    fn injected_failure(&self, rendered: &str) -> bool {
        if self.failure_rate <= 0.0 {
            return false;
        }
        let draw = sha256_seed(&[b"inject", rendered.as_bytes(), &self.seed.to_le_bytes()]);
        ((draw % 1_000_000) as f64) < self.failure_rate * 1_000_000.0
    }

    fn var<'a>(&self, request: &'a ChatRequest, name: &str) -> &'a str {
        request.variables.get(name).map(|s| s.as_str()).unwrap_or("")
    }
}

impl ChatBackend for RuleMockChat {
    fn call(&self, request: &ChatRequest, rendered: &str) -> Result<String, String> {
        if self.injected_failure(rendered) {
            return Err("injected mock provider failure".to_string());
        }
        Ok(match request.template_id {
            TemplateId::Summarize => {
                let sentences = split_sentences(self.var(request, "document_text"));
                let take = sentences.len().min(3);
                if take == 0 {
                    String::new()
                } else {
                    format!("{}.", sentences[..take].join(". "))
                }
            }
            TemplateId::GenerateQa => {
                let mut out = String::new();
                for sentence in split_sentences(self.var(request, "summary")) {
                    let words: Vec<&str> = sentence.split_whitespace().collect();
                    if words.len() < 4 {
                        continue;
                    }
                    let subject = normalize_ws_lower(&words[..3].join(" "))
                        .trim_matches(|c: char| c.is_ascii_punctuation())
                        .to_string();
                    // The answer is the clause after the last comma when one
                    // exists, otherwise the last three words.
                    let raw_answer = match sentence.rfind(',') {
                        Some(pos) => sentence[pos + 1..].trim().to_string(),
                        None => words[words.len() - 3..].join(" "),
                    };
                    let answer = raw_answer
                        .trim_end_matches(|c: char| c.is_ascii_punctuation() && c != ')' && c != '/')
                        .to_string();
                    if subject.is_empty() || answer.is_empty() {
                        continue;
                    }
                    out.push_str(&format!(
                        "A: {answer}\nQ: What is reported regarding {subject}?\n\n"
                    ));
                }
                out
            }
            TemplateId::VerifyParaphrase => {
                let a = normalize_ws_lower(self.var(request, "question_a"));
                let b = normalize_ws_lower(self.var(request, "question_b"));
                if a == b { "YES".to_string() } else { "NO".to_string() }
            }
            TemplateId::CanonicalQuestion => {
                let members = parse_numbered_list(self.var(request, "members"));
                members
                    .iter()
                    .max_by(|a, b| a.len().cmp(&b.len()).then(b.cmp(a)))
                    .cloned()
                    .unwrap_or_default()
            }
            TemplateId::ValidateAnswers => {
                let answers = parse_numbered_list(self.var(request, "answers"));
                let flagged: Vec<String> = answers
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.contains("(disputed)"))
                    .map(|(i, _)| (i + 1).to_string())
                    .collect();
                if flagged.is_empty() {
                    "REMOVE: none".to_string()
                } else {
                    format!("REMOVE: {}", flagged.join(", "))
                }
            }
            TemplateId::AssignAggregator => {
                let question = self.var(request, "question");
                let draw = sha256_seed(&[b"agg", question.as_bytes(), &self.seed.to_le_bytes()]);
                if draw.is_multiple_of(4) { "AND".to_string() } else { "OR".to_string() }
            }
            TemplateId::JudgeNugget => {
                let report = normalize_ws_lower(self.var(request, "report"));
                let answer = normalize_ws_lower(self.var(request, "answer"));
                if !answer.is_empty() && report.contains(&answer) {
                    "YES".to_string()
                } else {
                    "NO".to_string()
                }
            }
            TemplateId::Criterion(c) => {
                let question = self.var(request, "question");
                let draw = sha256_seed(&[
                    b"crit",
                    c.name().as_bytes(),
                    question.as_bytes(),
                    &self.seed.to_le_bytes(),
                ]);
                let (lo, hi) = c.scale();
                let value = if c.name() == "vitality" {
                    (draw % 2) as f64
                } else {
                    let frac = (draw % 1000) as f64 / 999.0;
                    // Two decimals keeps the text form short and stable.
                    ((lo + frac * (hi - lo)) * 100.0).round() / 100.0
                };
                format!("score: {value}")
            }
        })
    }
}

fn parse_numbered_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| {
            let line = line.trim();
            let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
            if digits > 0 {
                let rest = &line[digits..];
                if let Some(stripped) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                    return stripped.trim().to_string();
                }
            }
            line.to_string()
        })
        .filter(|line| !line.is_empty())
        .collect()
}

// ---------------------------------------------------------------------------
// Scripted mock chat
// ---------------------------------------------------------------------------

/// Replays canned responses keyed by the exact rendered prompt. Calls for
/// unknown prompts return the default response, or an error if none is set.
pub struct ScriptedChat {
    responses: Mutex<BTreeMap<String, ScriptEntry>>,
    default: Option<String>,
    fail_all: Option<String>,
    calls: Option<Arc<AtomicU64>>,
}

enum ScriptEntry {
    Respond(String),
    Fail(String),
}

impl ScriptedChat {
    pub fn new() -> Self {
        ScriptedChat {
            responses: Mutex::new(BTreeMap::new()),
            default: None,
            fail_all: None,
            calls: None,
        }
    }

    pub fn with_response(self, rendered_prompt: &str, response: &str) -> Self {
        self.responses.lock().unwrap().insert(
            rendered_prompt.to_string(),
            ScriptEntry::Respond(response.to_string()),
        );
        self
    }

    /// Make every call for this prompt fail at the transport level.
    pub fn with_prompt_failure(self, rendered_prompt: &str, message: &str) -> Self {
        self.responses.lock().unwrap().insert(
            rendered_prompt.to_string(),
            ScriptEntry::Fail(message.to_string()),
        );
        self
    }

    pub fn with_default(mut self, response: &str) -> Self {
        self.default = Some(response.to_string());
        self
    }

    pub fn always_fail(mut self, message: &str) -> Self {
        self.fail_all = Some(message.to_string());
        self
    }

    pub fn with_call_counter(mut self, counter: Arc<AtomicU64>) -> Self {
        self.calls = Some(counter);
        self
    }
}

impl Default for ScriptedChat {
    fn default() -> Self {
        Self::new()
    }
}

impl ChatBackend for ScriptedChat {
    fn call(&self, _request: &ChatRequest, rendered: &str) -> Result<String, String> {
        if let Some(counter) = &self.calls {
            counter.fetch_add(1, Ordering::SeqCst);
        }
        if let Some(message) = &self.fail_all {
            return Err(message.clone());
        }
        match self.responses.lock().unwrap().get(rendered) {
            Some(ScriptEntry::Respond(text)) => Ok(text.clone()),
            Some(ScriptEntry::Fail(message)) => Err(message.clone()),
            None => match &self.default {
                Some(text) => Ok(text.clone()),
                None => Err(format!("no scripted response for prompt: {:.60}...", rendered)),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Mock embedders
// ---------------------------------------------------------------------------

pub const HASH_EMBED_DIM: usize = 64;

/// Deterministic embedder: the vector is a seeded pseudo-random function of
/// the exact text, so identical texts embed identically and distinct texts
/// land nearly orthogonal at this dimension.
pub struct HashEmbedder {
    seed: u64,
}

impl HashEmbedder {
    pub fn new(seed: u64) -> Self {
        HashEmbedder { seed }
    }
}

impl EmbedBackend for HashEmbedder {
    fn call(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        Ok(texts
            .iter()
            .map(|text| {
                let seed = sha256_seed(&[b"embed", text.as_bytes(), &self.seed.to_le_bytes()]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..HASH_EMBED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
            })
            .collect())
    }
}

/// Embedder with explicit per-text vectors, for tests that need exact
/// cosines. Unknown texts are an error.
pub struct CannedEmbedder {
    vectors: BTreeMap<String, Vec<f64>>,
}

impl CannedEmbedder {
    pub fn new(vectors: BTreeMap<String, Vec<f64>>) -> Self {
        CannedEmbedder { vectors }
    }
}

impl EmbedBackend for CannedEmbedder {
    fn call(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        texts
            .iter()
            .map(|t| {
                self.vectors
                    .get(t)
                    .cloned()
                    .ok_or_else(|| format!("no canned vector for text {t:?}"))
            })
            .collect()
    }
}

/// An embed backend that always fails; for error-path tests.
pub struct FailingEmbedder;

impl EmbedBackend for FailingEmbedder {
    fn call(&self, _texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        Err("embedding backend unavailable".to_string())
    }
}
