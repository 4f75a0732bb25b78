//! Stage 2B: choose a canonical question per cluster, validate answer sets
//! (pattern filter then LLM consistency check), cull empty nuggets, and
//! assign each survivor an AND/OR aggregator.

use regex::Regex;

use crate::error::{Error, Result};
use crate::genstage::diag_code;
use crate::model::{Aggregator, Diagnostics, QANugget, Topic};
use crate::providers::parse::ParsedResponse;
use crate::providers::templates::{vars, TemplateId};
use crate::providers::{ChatProvider, ChatRequest};
use crate::util::{normalize_question, parallel_map, strip_outer_punct};

/// Case-insensitive pattern matching whole uninformative answers, applied
/// after trimming and outer punctuation stripping.
#[derive(Debug, Clone)]
pub struct UninformativePattern {
    regex: Regex,
    source: String,
}

pub const DEFAULT_UNINFORMATIVE: &str =
    "none|null|no answer|unknown|n/a|not specified|not mentioned";

impl UninformativePattern {
    /// Compile from an alternation body; anchoring and case-insensitivity
    /// are applied here.
    pub fn new(alternation: &str) -> Result<Self> {
        let source = alternation.trim().to_string();
        let regex = Regex::new(&format!("(?i)^(?:{source})$"))
            .map_err(|e| Error::Config(format!("bad uninformative pattern: {e}")))?;
        Ok(UninformativePattern { regex, source })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn matches(&self, answer_text: &str) -> bool {
        self.regex.is_match(&strip_outer_punct(answer_text))
    }
}

impl Default for UninformativePattern {
    fn default() -> Self {
        UninformativePattern::new(DEFAULT_UNINFORMATIVE).unwrap()
    }
}

/// Replace the provisional question with the provider's choice among the
/// cluster's member questions. Singletons keep their question with no
/// provider call. A choice that matches no member (fuzzily) falls back to
/// the longest member, as does a provider failure.
pub fn select_canonical_question(
    nugget: &QANugget,
    topic: &Topic,
    provider: &ChatProvider,
    diagnostics: &mut Diagnostics,
) -> QANugget {
    const STAGE: &str = "stage2b";
    let mut out = nugget.clone();
    let members = &nugget.provenance.member_question_texts;
    if members.len() <= 1 {
        return out;
    }
    let numbered: String = members
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. {q}\n", i + 1))
        .collect();
    let request = ChatRequest::new(
        TemplateId::CanonicalQuestion,
        vars(&[
            ("request_text", &topic.request_text),
            ("members", numbered.trim_end()),
        ]),
    );
    match provider.chat_parsed(&request) {
        Ok(ParsedResponse::Text(choice)) => {
            let normalized = normalize_question(&choice);
            match members.iter().find(|m| normalize_question(m) == normalized) {
                Some(member) => out.question = member.clone(),
                None => {
                    out.question = longest_member(members);
                    diagnostics.record(
                        STAGE,
                        "canonical_mismatch",
                        &nugget.nugget_id,
                        format!("provider chose non-member text {choice:?}; using longest member"),
                    );
                }
            }
        }
        Ok(other) => {
            out.question = longest_member(members);
            diagnostics.record(
                STAGE,
                "canonical_mismatch",
                &nugget.nugget_id,
                format!("unexpected parse {other:?}; using longest member"),
            );
        }
        Err(e) => {
            out.question = longest_member(members);
            diagnostics.record(
                STAGE,
                diag_code(&e),
                &nugget.nugget_id,
                format!("canonical selection failed, using longest member: {e}"),
            );
        }
    }
    out
}

fn longest_member(members: &[String]) -> String {
    members
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b.cmp(a)))
        .cloned()
        .unwrap_or_default()
}

/// Drop answers matching the uninformative pattern.
pub fn filter_uninformative(nugget: &QANugget, pattern: &UninformativePattern) -> QANugget {
    let mut out = nugget.clone();
    out.answers.retain(|a| !pattern.matches(&a.text));
    out.refresh_grounding_count();
    out
}

/// Ask the provider which answers are implausible or contradictory and
/// remove exactly those. Errors fail open: the nugget passes through
/// unmodified with a diagnostic.
pub fn validate_consistency(
    nugget: &QANugget,
    provider: &ChatProvider,
    diagnostics: &mut Diagnostics,
) -> QANugget {
    const STAGE: &str = "stage2b";
    if nugget.answers.is_empty() {
        return nugget.clone();
    }
    let numbered: String = nugget
        .answers
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {}\n", i + 1, a.text))
        .collect();
    let request = ChatRequest::new(
        TemplateId::ValidateAnswers,
        vars(&[("question", &nugget.question), ("answers", numbered.trim_end())]),
    );
    match provider.chat_parsed(&request) {
        Ok(ParsedResponse::RemoveIndices(indices)) => {
            let mut out = nugget.clone();
            out.answers = nugget
                .answers
                .iter()
                .enumerate()
                .filter(|(i, _)| !indices.contains(i))
                .map(|(_, a)| a.clone())
                .collect();
            out.refresh_grounding_count();
            out
        }
        Ok(other) => {
            diagnostics.record(
                STAGE,
                "unparseable",
                &nugget.nugget_id,
                format!("consistency check returned {other:?}; nugget unchanged"),
            );
            nugget.clone()
        }
        Err(e) => {
            diagnostics.record(
                STAGE,
                diag_code(&e),
                &nugget.nugget_id,
                format!("consistency check failed open: {e}"),
            );
            nugget.clone()
        }
    }
}

/// Assign AND or OR. Single-answer nuggets are OR without a provider call
/// (the two folds coincide); unparseable verdicts default to OR.
pub fn assign_aggregator(
    nugget: &QANugget,
    provider: &ChatProvider,
    diagnostics: &mut Diagnostics,
) -> QANugget {
    const STAGE: &str = "stage2b";
    let mut out = nugget.clone();
    if nugget.answers.len() <= 1 {
        out.aggregator = Aggregator::Or;
        return out;
    }
    let numbered: String = nugget
        .answers
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {}\n", i + 1, a.text))
        .collect();
    let request = ChatRequest::new(
        TemplateId::AssignAggregator,
        vars(&[("question", &nugget.question), ("answers", numbered.trim_end())]),
    );
    out.aggregator = match provider.chat_parsed(&request) {
        Ok(ParsedResponse::AndAggregator(true)) => Aggregator::And,
        Ok(ParsedResponse::AndAggregator(false)) => Aggregator::Or,
        Ok(other) => {
            diagnostics.record(
                STAGE,
                "unparseable",
                &nugget.nugget_id,
                format!("aggregator verdict {other:?}; defaulting to OR"),
            );
            Aggregator::Or
        }
        Err(e) => {
            diagnostics.record(
                STAGE,
                diag_code(&e),
                &nugget.nugget_id,
                format!("aggregator call failed, defaulting to OR: {e}"),
            );
            Aggregator::Or
        }
    };
    out
}

#[derive(Debug, Clone)]
pub struct Stage2bConfig {
    pub pattern: UninformativePattern,
    pub parallelism: usize,
}

impl Default for Stage2bConfig {
    fn default() -> Self {
        Stage2bConfig {
            pattern: UninformativePattern::default(),
            parallelism: 1,
        }
    }
}

pub struct Stage2bOutput {
    pub refined: Vec<QANugget>,
    pub diagnostics: Diagnostics,
}

/// Apply canonical -> pattern filter -> consistency -> cull -> aggregator,
/// in that order. Output is sorted by nugget id.
pub fn run_stage2b(
    merged_nuggets: &[QANugget],
    topic: &Topic,
    config: &Stage2bConfig,
    provider: &ChatProvider,
) -> Stage2bOutput {
    let per_nugget: Vec<(Option<QANugget>, Diagnostics)> =
        parallel_map(merged_nuggets.to_vec(), config.parallelism, |nugget| {
            let mut diags = Diagnostics::new();
            let step = select_canonical_question(nugget, topic, provider, &mut diags);
            let step = filter_uninformative(&step, &config.pattern);
            let step = validate_consistency(&step, provider, &mut diags);
            if step.answers.is_empty() {
                diags.record(
                    "stage2b",
                    "culled",
                    &nugget.nugget_id,
                    "no answers remained after validation",
                );
                return (None, diags);
            }
            let step = assign_aggregator(&step, provider, &mut diags);
            (Some(step), diags)
        });

    let mut refined = Vec::new();
    let mut diagnostics = Diagnostics::new();
    for (nugget, diags) in per_nugget {
        refined.extend(nugget);
        diagnostics.extend(diags);
    }
    refined.sort_by(|a, b| a.nugget_id.cmp(&b.nugget_id));
    Stage2bOutput {
        refined,
        diagnostics,
    }
}

/// Answer monotonicity across refinement: every output answer must appear
/// (by normalized text) in the corresponding input nugget, and the question
/// must come from the member list. Returns violations.
pub fn check_answer_monotonicity(merged: &[QANugget], refined: &[QANugget]) -> Vec<String> {
    use crate::util::normalize_ws_lower;
    let mut violations = Vec::new();
    for out in refined {
        let Some(input) = merged.iter().find(|m| m.nugget_id == out.nugget_id) else {
            violations.push(format!("refined nugget {:?} has no input", out.nugget_id));
            continue;
        };
        let input_answers: Vec<String> = input
            .answers
            .iter()
            .map(|a| normalize_ws_lower(&a.text))
            .collect();
        for answer in &out.answers {
            if !input_answers.contains(&normalize_ws_lower(&answer.text)) {
                violations.push(format!(
                    "nugget {:?} answer {:?} not present in input",
                    out.nugget_id, answer.text
                ));
            }
        }
        if !input
            .provenance
            .member_question_texts
            .iter()
            .any(|m| m == &out.question)
        {
            violations.push(format!(
                "nugget {:?} question {:?} is not a member question",
                out.nugget_id, out.question
            ));
        }
    }
    violations
}
