//! Extraction of structured fields from raw model output, tolerant of
//! surrounding prose. Criterion scores are clamped to their scales here.

use crate::error::{Error, Result};
use crate::model::clamp_criterion;
use crate::providers::templates::TemplateId;

/// A generated answer/question pair, answer first as elicited.
#[derive(Debug, Clone, PartialEq)]
pub struct QaPair {
    pub answer: String,
    pub question: String,
}

/// Parsed form of one template's output.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedResponse {
    /// summarize, canonical_question: trimmed free text.
    Text(String),
    /// generate_qa: pairs in output order.
    QaPairs(Vec<QaPair>),
    /// verify_paraphrase, judge_nugget: a YES/NO verdict.
    YesNo(bool),
    /// validate_answers: 0-based indices of answers to remove.
    RemoveIndices(Vec<usize>),
    /// assign_aggregator: true = AND, false = OR.
    AndAggregator(bool),
    /// criterion_*: clamped score plus whether clamping changed the value.
    Score { value: f64, clamped: bool },
}

/// Parse raw model text according to its template's output contract.
pub fn parse_structured(template: TemplateId, raw: &str) -> Result<ParsedResponse> {
    match template {
        TemplateId::Summarize | TemplateId::CanonicalQuestion => {
            let text = strip_label(raw).trim().to_string();
            if text.is_empty() {
                Err(parse_err(template, raw, "empty response"))
            } else {
                Ok(ParsedResponse::Text(text))
            }
        }
        TemplateId::GenerateQa => {
            let pairs = parse_qa_pairs(raw);
            if pairs.is_empty() {
                Err(parse_err(template, raw, "no A:/Q: blocks found"))
            } else {
                Ok(ParsedResponse::QaPairs(pairs))
            }
        }
        TemplateId::VerifyParaphrase | TemplateId::JudgeNugget => match parse_yes_no(raw) {
            Some(v) => Ok(ParsedResponse::YesNo(v)),
            None => Err(parse_err(template, raw, "no YES/NO verdict found")),
        },
        TemplateId::ValidateAnswers => match parse_remove_list(raw) {
            Some(indices) => Ok(ParsedResponse::RemoveIndices(indices)),
            None => Err(parse_err(template, raw, "no REMOVE line found")),
        },
        TemplateId::AssignAggregator => match parse_aggregator_token(raw) {
            Some(is_and) => Ok(ParsedResponse::AndAggregator(is_and)),
            None => Err(parse_err(template, raw, "no AND/OR token found")),
        },
        TemplateId::Criterion(c) => match first_number(raw) {
            Some(value) => {
                let clamped_value = clamp_criterion(c.0, value);
                Ok(ParsedResponse::Score {
                    value: clamped_value,
                    clamped: clamped_value != value,
                })
            }
            None => Err(parse_err(template, raw, "no numeric score found")),
        },
    }
}

fn parse_err(template: TemplateId, raw: &str, message: &str) -> Error {
    Error::Parse {
        template,
        message: message.to_string(),
        raw: raw.to_string(),
    }
}

fn strip_label(raw: &str) -> &str {
    let trimmed = raw.trim();
    for label in ["Answer:", "Summary:", "Chosen question:", "Question:"] {
        if let Some(rest) = trimmed.strip_prefix(label) {
            return rest.trim();
        }
    }
    trimmed
}

/// Scan for "A: ..." lines each followed (possibly after blank lines) by a
/// "Q: ..." line. Leading list numbering like "1." or "2)" is tolerated.
fn parse_qa_pairs(raw: &str) -> Vec<QaPair> {
    let mut pairs = Vec::new();
    let mut pending_answer: Option<String> = None;
    for line in raw.lines() {
        let line = strip_numbering(line.trim());
        if let Some(rest) = marker_payload(line, &["A:", "Answer:"]) {
            pending_answer = Some(rest.to_string());
        } else if let Some(rest) = marker_payload(line, &["Q:", "Question:"]) {
            if let Some(answer) = pending_answer.take() {
                if !answer.is_empty() && !rest.is_empty() {
                    pairs.push(QaPair {
                        answer,
                        question: rest.to_string(),
                    });
                }
            }
        }
    }
    pairs
}

fn strip_numbering(line: &str) -> &str {
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(stripped) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return stripped.trim_start();
        }
    }
    line
}

fn marker_payload<'a>(line: &'a str, markers: &[&str]) -> Option<&'a str> {
    for marker in markers {
        if line.len() >= marker.len() && line[..marker.len()].eq_ignore_ascii_case(marker) {
            return Some(line[marker.len()..].trim());
        }
    }
    None
}

/// Uppercase YES/NO tokens win (last occurrence). If none, fall back to a
/// case-insensitive match only when the text is unambiguous, since lowercase
/// "no" appears freely in prose.
fn parse_yes_no(raw: &str) -> Option<bool> {
    let tokens: Vec<&str> = raw
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| !t.is_empty())
        .collect();
    let mut last_upper = None;
    for t in &tokens {
        match *t {
            "YES" => last_upper = Some(true),
            "NO" => last_upper = Some(false),
            _ => {}
        }
    }
    if last_upper.is_some() {
        return last_upper;
    }
    let yes = tokens.iter().filter(|t| t.eq_ignore_ascii_case("yes")).count();
    let no = tokens.iter().filter(|t| t.eq_ignore_ascii_case("no")).count();
    match (yes, no) {
        (1.., 0) => Some(true),
        (0, 1..) => Some(false),
        _ => None,
    }
}

/// Uppercase AND/OR tokens only; prose is full of lowercase "and"/"or".
fn parse_aggregator_token(raw: &str) -> Option<bool> {
    let mut last = None;
    for token in raw.split(|c: char| !c.is_ascii_alphabetic()) {
        match token {
            "AND" => last = Some(true),
            "OR" => last = Some(false),
            _ => {}
        }
    }
    last
}

fn parse_remove_list(raw: &str) -> Option<Vec<usize>> {
    for line in raw.lines() {
        let lower = line.to_lowercase();
        let Some(pos) = lower.find("remove") else {
            continue;
        };
        let rest = &line[pos + "remove".len()..];
        let rest = rest.trim_start_matches([':', ' ', '\t']);
        if rest.to_lowercase().starts_with("none") {
            return Some(Vec::new());
        }
        let mut indices = Vec::new();
        let mut current = String::new();
        for c in rest.chars() {
            if c.is_ascii_digit() {
                current.push(c);
            } else {
                if !current.is_empty() {
                    let n: usize = current.parse().ok()?;
                    if n >= 1 {
                        indices.push(n - 1);
                    }
                    current.clear();
                }
                // Stop at prose after the list, e.g. a parenthetical remark.
                if c == '(' {
                    break;
                }
            }
        }
        if !current.is_empty() {
            let n: usize = current.parse().ok()?;
            if n >= 1 {
                indices.push(n - 1);
            }
        }
        if indices.is_empty() {
            return None;
        }
        indices.sort_unstable();
        indices.dedup();
        return Some(indices);
    }
    None
}

/// First decimal number in the text, preferring one labeled "score".
fn first_number(raw: &str) -> Option<f64> {
    let lower = raw.to_lowercase();
    let search = match lower.find("score") {
        Some(pos) => &lower[pos..],
        None => lower.as_str(),
    };
    let bytes = search.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit()
            || (bytes[i] == b'-' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            i += 1;
            let mut seen_dot = false;
            while i < bytes.len()
                && (bytes[i].is_ascii_digit() || (bytes[i] == b'.' && !seen_dot))
            {
                if bytes[i] == b'.' {
                    seen_dot = true;
                }
                i += 1;
            }
            let token = &search[start..i];
            let token = token.trim_end_matches('.');
            if let Ok(v) = token.parse::<f64>() {
                return Some(v);
            }
        } else {
            i += 1;
        }
    }
    None
}
