//! Prompt templates as versioned text assets with named `{{placeholder}}`
//! slots. Rendering fails if any placeholder is left unbound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CRITERION_NAMES, CRITERION_SCALES};

/// Bump when any template text changes; folded into config fingerprints.
pub const TEMPLATE_VERSION: &str = "v1";

/// The 17 LLM-assessed quality criteria (vector indices 2..=18). Reading
/// level and complexity are computed programmatically and have no template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CriterionId(pub usize);

impl CriterionId {
    pub const FIRST_PROMPTED: usize = 2;

    pub fn all() -> impl Iterator<Item = CriterionId> {
        (Self::FIRST_PROMPTED..CRITERION_NAMES.len()).map(CriterionId)
    }

    pub fn name(&self) -> &'static str {
        CRITERION_NAMES[self.0]
    }

    pub fn scale(&self) -> (f64, f64) {
        CRITERION_SCALES[self.0]
    }

    pub fn from_name(name: &str) -> Option<CriterionId> {
        CRITERION_NAMES
            .iter()
            .position(|n| *n == name)
            .filter(|i| *i >= Self::FIRST_PROMPTED)
            .map(CriterionId)
    }

    pub fn definition(&self) -> &'static str {
        match self.name() {
            "vitality" => {
                "Whether any acceptable report on this topic must cover this nugget. \
                 1 means essential, 0 means optional detail."
            }
            "goal_match" => "How directly the nugget serves the user's stated goal.",
            "background_match" => {
                "How well the nugget suits the user's stated background knowledge."
            }
            "role_match" => "How relevant the nugget is to the user's professional role.",
            "communication_match" => {
                "How well the nugget fits the user's preferred communication style."
            }
            "scope_match" => "How well the nugget falls inside the user's stated scope.",
            "personalization_overall" => {
                "Overall fit between the nugget and the user persona as a whole."
            }
            "fluency" => "Grammatical quality and naturalness of the question text.",
            "clarity" => "How unambiguous and easy to understand the question is.",
            "ambiguity" => {
                "Degree to which the question admits multiple readings. \
                 5 means highly ambiguous (high presence of the property)."
            }
            "relevance" => "How relevant the nugget is to the report request.",
            "incompleteness" => {
                "Degree to which the question depends on missing context. \
                 5 means highly incomplete (high presence of the property)."
            }
            "assumptiveness" => {
                "Degree to which the question presupposes unstated facts. \
                 5 means highly assumptive (high presence of the property)."
            }
            "multifaceted" => "Whether the question spans multiple related sub-questions.",
            "knowledge_intensiveness" => {
                "How much domain knowledge is needed to answer the question."
            }
            "subjectiveness" => {
                "Degree to which the answer depends on opinion rather than fact. \
                 5 means highly subjective (high presence of the property)."
            }
            "reasoning_intensiveness" => {
                "How much multi-step reasoning is needed to answer the question."
            }
            other => unreachable!("no definition for criterion {other}"),
        }
    }
}

/// Identifies one prompt template (and thereby one LLM step).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateId {
    Summarize,
    GenerateQa,
    VerifyParaphrase,
    CanonicalQuestion,
    ValidateAnswers,
    AssignAggregator,
    JudgeNugget,
    Criterion(CriterionId),
}

impl TemplateId {
    pub fn as_str(&self) -> String {
        match self {
            TemplateId::Summarize => "summarize".to_string(),
            TemplateId::GenerateQa => "generate_qa".to_string(),
            TemplateId::VerifyParaphrase => "verify_paraphrase".to_string(),
            TemplateId::CanonicalQuestion => "canonical_question".to_string(),
            TemplateId::ValidateAnswers => "validate_answers".to_string(),
            TemplateId::AssignAggregator => "assign_aggregator".to_string(),
            TemplateId::JudgeNugget => "judge_nugget".to_string(),
            TemplateId::Criterion(c) => format!("criterion_{}", c.name()),
        }
    }

    pub fn parse(s: &str) -> Result<TemplateId> {
        match s {
            "summarize" => Ok(TemplateId::Summarize),
            "generate_qa" => Ok(TemplateId::GenerateQa),
            "verify_paraphrase" => Ok(TemplateId::VerifyParaphrase),
            "canonical_question" => Ok(TemplateId::CanonicalQuestion),
            "validate_answers" => Ok(TemplateId::ValidateAnswers),
            "assign_aggregator" => Ok(TemplateId::AssignAggregator),
            "judge_nugget" => Ok(TemplateId::JudgeNugget),
            other => {
                if let Some(name) = other.strip_prefix("criterion_") {
                    if let Some(c) = CriterionId::from_name(name) {
                        return Ok(TemplateId::Criterion(c));
                    }
                }
                Err(Error::Config(format!("unknown template_id {other:?}")))
            }
        }
    }

    /// Raw template text. Criterion templates share one scaffold; the
    /// criterion name, definition, and scale are bound as variables.
    pub fn asset(&self) -> &'static str {
        match self {
            TemplateId::Summarize => include_str!("../../templates/summarize.txt"),
            TemplateId::GenerateQa => include_str!("../../templates/generate_qa.txt"),
            TemplateId::VerifyParaphrase => include_str!("../../templates/verify_paraphrase.txt"),
            TemplateId::CanonicalQuestion => include_str!("../../templates/canonical_question.txt"),
            TemplateId::ValidateAnswers => include_str!("../../templates/validate_answers.txt"),
            TemplateId::AssignAggregator => include_str!("../../templates/assign_aggregator.txt"),
            TemplateId::JudgeNugget => include_str!("../../templates/judge_nugget.txt"),
            TemplateId::Criterion(_) => include_str!("../../templates/criterion.txt"),
        }
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl Serialize for TemplateId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for TemplateId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        TemplateId::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Substitute `{{name}}` placeholders. Every placeholder in the template
/// must be bound; unused variables are an error too, to catch typos.
pub fn render(template: TemplateId, variables: &BTreeMap<String, String>) -> Result<String> {
    let mut vars = variables.clone();
    if let TemplateId::Criterion(c) = template {
        let (lo, hi) = c.scale();
        vars.insert("criterion_name".into(), c.name().to_string());
        vars.insert("criterion_definition".into(), c.definition().to_string());
        vars.insert("scale_min".into(), format!("{lo}"));
        vars.insert("scale_max".into(), format!("{hi}"));
        let note = if c.name() == "vitality" {
            "Answer with 0 or 1 only.".to_string()
        } else {
            "Decimals are allowed.".to_string()
        };
        vars.insert("scale_note".into(), note);
    }

    let mut out = String::with_capacity(template.asset().len());
    let mut rest = template.asset();
    let mut used: Vec<&str> = Vec::new();
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| {
            Error::Config(format!("unclosed placeholder in template {template}"))
        })?;
        let name = &after[..end];
        match vars.get(name) {
            Some(value) => out.push_str(value),
            None => {
                return Err(Error::Config(format!(
                    "template {template} placeholder {name:?} is unbound"
                )))
            }
        }
        if !used.contains(&name) {
            used.push(name);
        }
        rest = &after[end + 2..];
    }
    out.push_str(rest);

    for name in vars.keys() {
        if !used.iter().any(|u| u == name) {
            return Err(Error::Config(format!(
                "variable {name:?} does not appear in template {template}"
            )));
        }
    }
    Ok(out)
}

/// Convenience constructor for template variable maps.
pub fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
