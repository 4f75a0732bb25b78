//! Scores reports against nugget banks: per-answer judging, aggregator
//! folding, per-topic nugget recall, and macro-averaged leaderboards.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::genstage::diag_code;
use crate::model::{
    fold_aggregator, Diagnostics, Judgment, JudgmentSet, NuggetBank, QANugget, Report, ScoreMatrix,
};
use crate::providers::parse::ParsedResponse;
use crate::providers::templates::{vars, TemplateId};
use crate::providers::{ChatProvider, ChatRequest};
use crate::util::sha256_hex;

/// Runs ordered by macro nugget recall under one nugget set and judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub label: String,
    pub rows: Vec<LeaderboardRow>,
    pub judged_with: String,
    pub bank_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub run_id: String,
    pub macro_recall: f64,
    pub per_topic: BTreeMap<String, f64>,
}

/// How a run's missing topics enter its macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// A missing topic scores 0 (recorded explicitly in per_topic).
    Zero,
    /// Missing topics are left out of the average.
    Skip,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(MissingPolicy::Zero),
            "skip" => Ok(MissingPolicy::Skip),
            other => Err(Error::Config(format!("unknown missing policy {other:?}"))),
        }
    }
}

impl Leaderboard {
    /// Macro scores keyed by run.
    pub fn macro_scores(&self) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .map(|r| (r.run_id.clone(), r.macro_recall))
            .collect()
    }

    pub fn run_ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.run_id.clone()).collect()
    }

    /// Per-topic scores as a ScoreMatrix (absent topics become missing).
    pub fn to_score_matrix(&self) -> ScoreMatrix {
        let mut topic_ids: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.per_topic.keys().cloned())
            .collect();
        topic_ids.sort();
        topic_ids.dedup();
        let run_ids: Vec<String> = self.rows.iter().map(|r| r.run_id.clone()).collect();
        let scores = self
            .rows
            .iter()
            .map(|row| {
                topic_ids
                    .iter()
                    .map(|t| row.per_topic.get(t).copied())
                    .collect()
            })
            .collect();
        ScoreMatrix {
            run_ids,
            topic_ids,
            scores,
            label: self.label.clone(),
        }
    }

    /// Self-consistency audit: every row's macro must equal the mean of its
    /// present per-topic values.
    pub fn audit_macro_consistency(&self) -> Vec<String> {
        let mut violations = Vec::new();
        for row in &self.rows {
            if row.per_topic.is_empty() {
                violations.push(format!("run {:?} has no per-topic scores", row.run_id));
                continue;
            }
            let mean = row.per_topic.values().sum::<f64>() / row.per_topic.len() as f64;
            if (mean - row.macro_recall).abs() > 1e-12 {
                violations.push(format!(
                    "run {:?} macro {} != per-topic mean {mean}",
                    row.run_id, row.macro_recall
                ));
            }
        }
        violations
    }

    /// Header `run_id,macro,<topic_id...>`; rows in leaderboard order.
    pub fn to_csv(&self) -> String {
        let mut topic_ids: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.per_topic.keys().cloned())
            .collect();
        topic_ids.sort();
        topic_ids.dedup();
        let mut out = String::from("run_id,macro");
        for t in &topic_ids {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.run_id);
            out.push(',');
            out.push_str(&formats::fmt_score(row.macro_recall));
            for t in &topic_ids {
                out.push(',');
                if let Some(v) = row.per_topic.get(t) {
                    out.push_str(&formats::fmt_score(*v));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Fingerprint of the bank set a leaderboard was scored against.
pub fn banks_fingerprint(banks: &[NuggetBank]) -> String {
    let mut chunks: Vec<String> = banks
        .iter()
        .map(|b| {
            let ids: Vec<&str> = b.selected.iter().map(|n| n.nugget_id.as_str()).collect();
            format!("{}|{}|{}", b.topic_id, b.config_fingerprint, ids.join(","))
        })
        .collect();
    chunks.sort();
    let bytes: Vec<&[u8]> = chunks.iter().map(|c| c.as_bytes()).collect();
    sha256_hex(&bytes)
}

/// Judge one nugget against one report: one verdict per answer, folded by
/// the nugget's aggregator. Provider failure is conservative: the answer
/// counts as not addressed, with a diagnostic.
pub fn judge_nugget(
    report: &Report,
    nugget: &QANugget,
    provider: &ChatProvider,
    diagnostics: &mut Diagnostics,
) -> Result<Judgment> {
    const STAGE: &str = "judge";
    if report.topic_id != nugget.topic_id {
        return Err(Error::contract(format!(
            "report topic {:?} does not match nugget topic {:?}",
            report.topic_id, nugget.topic_id
        )));
    }
    let report_text = report.full_text();
    let mut answer_verdicts = Vec::with_capacity(nugget.answers.len());
    for answer in &nugget.answers {
        let request = ChatRequest::new(
            TemplateId::JudgeNugget,
            vars(&[
                ("report", &report_text),
                ("question", &nugget.question),
                ("answer", &answer.text),
            ]),
        );
        let verdict = match provider.chat_parsed(&request) {
            Ok(ParsedResponse::YesNo(v)) => v,
            Ok(other) => {
                diagnostics.record(
                    STAGE,
                    "unparseable",
                    &nugget.nugget_id,
                    format!("judge verdict {other:?}; counting as not addressed"),
                );
                false
            }
            Err(e) => {
                diagnostics.record(
                    STAGE,
                    diag_code(&e),
                    &nugget.nugget_id,
                    format!("judge call failed; counting as not addressed: {e}"),
                );
                false
            }
        };
        answer_verdicts.push(verdict);
    }
    let addressed = fold_aggregator(nugget.aggregator, &answer_verdicts)?;
    Ok(Judgment {
        answer_verdicts,
        addressed,
    })
}

/// Whether a judgment counts as addressed for a given nugget: recomputed
/// from per-answer verdicts when they are present, trusted otherwise.
pub fn judgment_addressed(nugget: &QANugget, judgment: &Judgment) -> Result<bool> {
    if judgment.answer_verdicts.is_empty() {
        return Ok(judgment.addressed);
    }
    if judgment.answer_verdicts.len() != nugget.answers.len() {
        return Err(Error::contract(format!(
            "judgment for {:?} has {} verdicts for {} answers",
            nugget.nugget_id,
            judgment.answer_verdicts.len(),
            nugget.answers.len()
        )));
    }
    fold_aggregator(nugget.aggregator, &judgment.answer_verdicts)
}

/// Proportion of the bank's selected nuggets addressed by this report.
/// Judgments for non-selected nuggets are ignored; a missing judgment for a
/// selected nugget is a contract violation.
pub fn nugget_recall(report: &Report, bank: &NuggetBank, judgments: &JudgmentSet) -> Result<f64> {
    if bank.selected.is_empty() {
        return Err(Error::contract(format!(
            "bank for topic {:?} has no selected nuggets",
            bank.topic_id
        )));
    }
    let mut addressed = 0usize;
    for nugget in &bank.selected {
        let judgment = judgments
            .get(&report.run_id, &report.topic_id, &nugget.nugget_id)
            .ok_or_else(|| {
                Error::contract(format!(
                    "missing judgment for run {:?}, topic {:?}, nugget {:?}",
                    report.run_id, report.topic_id, nugget.nugget_id
                ))
            })?;
        if judgment_addressed(nugget, judgment)? {
            addressed += 1;
        }
    }
    Ok(addressed as f64 / bank.selected.len() as f64)
}

/// Build the leaderboard over all runs found in `reports`. Topics come from
/// the banks; a run with no judged topics is excluded with a diagnostic.
pub fn build_leaderboard(
    reports: &[Report],
    banks: &[NuggetBank],
    judgments: &JudgmentSet,
    missing_policy: MissingPolicy,
    label: &str,
) -> (Leaderboard, Diagnostics) {
    const STAGE: &str = "leaderboard";
    let mut diagnostics = Diagnostics::new();
    let mut run_ids: Vec<String> = reports.iter().map(|r| r.run_id.clone()).collect();
    run_ids.sort();
    run_ids.dedup();

    let mut rows = Vec::new();
    for run_id in &run_ids {
        let mut per_topic = BTreeMap::new();
        let mut judged_any = false;
        for bank in banks {
            let report = reports
                .iter()
                .find(|r| &r.run_id == run_id && r.topic_id == bank.topic_id);
            match report {
                Some(report) => match nugget_recall(report, bank, judgments) {
                    Ok(recall) => {
                        per_topic.insert(bank.topic_id.clone(), recall);
                        judged_any = true;
                    }
                    Err(e) => {
                        diagnostics.record(
                            STAGE,
                            "missing_judgment",
                            format!("{run_id}/{}", bank.topic_id),
                            e.to_string(),
                        );
                        if missing_policy == MissingPolicy::Zero {
                            per_topic.insert(bank.topic_id.clone(), 0.0);
                        }
                    }
                },
                None => {
                    if missing_policy == MissingPolicy::Zero {
                        per_topic.insert(bank.topic_id.clone(), 0.0);
                    }
                }
            }
        }
        if !judged_any {
            diagnostics.record(
                STAGE,
                "excluded_run",
                run_id,
                "run has no judged topics; excluded from leaderboard",
            );
            continue;
        }
        let macro_recall = per_topic.values().sum::<f64>() / per_topic.len() as f64;
        rows.push(LeaderboardRow {
            run_id: run_id.clone(),
            macro_recall,
            per_topic,
        });
    }
    rows.sort_by(|a, b| {
        b.macro_recall
            .total_cmp(&a.macro_recall)
            .then_with(|| a.run_id.cmp(&b.run_id))
    });

    let leaderboard = Leaderboard {
        label: label.to_string(),
        rows,
        judged_with: judgments.judge_label.clone(),
        bank_fingerprint: banks_fingerprint(banks),
    };
    (leaderboard, diagnostics)
}

/// Judge every (report, selected nugget) pair into a JudgmentSet.
pub fn judge_all(
    reports: &[Report],
    banks: &[NuggetBank],
    provider: &ChatProvider,
    judge_label: &str,
) -> Result<(JudgmentSet, Diagnostics)> {
    let mut set = JudgmentSet::new(judge_label);
    let mut diagnostics = Diagnostics::new();
    for report in reports {
        let Some(bank) = banks.iter().find(|b| b.topic_id == report.topic_id) else {
            continue;
        };
        for nugget in &bank.selected {
            let judgment = judge_nugget(report, nugget, provider, &mut diagnostics)?;
            set.entries.insert(
                (report.run_id.clone(), report.topic_id.clone(), nugget.nugget_id.clone()),
                judgment,
            );
        }
    }
    Ok((set, diagnostics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgmentFormat {
    Native,
    ArgueExport,
}

/// Share of malformed rows above which an import is rejected outright.
pub const MALFORMED_HARD_LIMIT: f64 = 0.10;

/// Import judgments from a file, tolerating malformed rows up to the hard
/// limit. Addressed flags are trusted as stored; scoring recomputes them
/// from per-answer verdicts where those exist.
pub fn import_judgments(
    path: &Path,
    format: JudgmentFormat,
) -> Result<(JudgmentSet, Diagnostics)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let parse = match format {
        JudgmentFormat::Native => formats::judgments_from_jsonl(&text)?,
        JudgmentFormat::ArgueExport => formats::argue_export_from_jsonl(&text, "external")?,
    };
    let mut diagnostics = Diagnostics::new();
    for (lineno, message) in &parse.malformed {
        diagnostics.record(
            "import",
            "malformed_row",
            format!("line {lineno}"),
            message.clone(),
        );
    }
    if parse.total_rows > 0 {
        let ratio = parse.malformed.len() as f64 / parse.total_rows as f64;
        if ratio > MALFORMED_HARD_LIMIT {
            return Err(Error::format(format!(
                "{} of {} judgment rows malformed ({:.0}% > {:.0}% limit)",
                parse.malformed.len(),
                parse.total_rows,
                ratio * 100.0,
                MALFORMED_HARD_LIMIT * 100.0
            )));
        }
    }
    Ok((parse.set, diagnostics))
}
