//! Evaluation-side orchestration: judge reports against banks, emit the
//! score matrix, and build leaderboards.

use std::path::Path;

use nuggetbank_core::error::{Error, Result};
use nuggetbank_core::evalharness::{self, JudgmentFormat, Leaderboard, MissingPolicy};
use nuggetbank_core::formats;
use nuggetbank_core::model::{Diagnostics, JudgmentSet, NuggetBank, Report, ScoreMatrix};
use nuggetbank_core::providers::ChatProvider;

use crate::config::PipelineConfig;

pub fn load_banks(dir: &Path) -> Result<Vec<NuggetBank>> {
    let mut banks = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("banks dir {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".nuggets.jsonl")))
        .collect();
    entries.sort();
    for path in entries {
        banks.push(formats::read_bank(&path)?);
    }
    if banks.is_empty() {
        return Err(Error::Config(format!(
            "no *.nuggets.jsonl bank files in {}",
            dir.display()
        )));
    }
    Ok(banks)
}

pub fn load_reports(path: &Path) -> Result<Vec<Report>> {
    formats::read_jsonl(path)
}

/// Judge every report against its topic's bank with the configured judge
/// provider; write judgments.jsonl.
pub fn run_judge(
    config: &PipelineConfig,
    banks: &[NuggetBank],
    reports: &[Report],
    out: &Path,
) -> Result<(JudgmentSet, Diagnostics)> {
    let provider = ChatProvider::from_config(config.provider("judge")?)?;
    let judge_label = config.provider("judge")?.model_name;
    let (set, diagnostics) = evalharness::judge_all(reports, banks, &provider, &judge_label)?;
    formats::write_atomic(out, formats::judgments_to_jsonl(&set)?.as_bytes())?;
    Ok((set, diagnostics))
}

/// Per-run, per-topic recall matrix from a judgment set.
pub fn score_matrix(
    banks: &[NuggetBank],
    reports: &[Report],
    judgments: &JudgmentSet,
    label: &str,
) -> Result<ScoreMatrix> {
    let mut run_ids: Vec<String> = reports.iter().map(|r| r.run_id.clone()).collect();
    run_ids.sort();
    run_ids.dedup();
    let mut topic_ids: Vec<String> = banks.iter().map(|b| b.topic_id.clone()).collect();
    topic_ids.sort();

    let mut scores = Vec::with_capacity(run_ids.len());
    for run_id in &run_ids {
        let mut row = Vec::with_capacity(topic_ids.len());
        for topic_id in &topic_ids {
            let bank = banks.iter().find(|b| &b.topic_id == topic_id).unwrap();
            let report = reports
                .iter()
                .find(|r| &r.run_id == run_id && &r.topic_id == topic_id);
            match report {
                Some(report) => row.push(Some(evalharness::nugget_recall(report, bank, judgments)?)),
                None => row.push(None),
            }
        }
        scores.push(row);
    }
    let matrix = ScoreMatrix {
        run_ids,
        topic_ids,
        scores,
        label: label.to_string(),
    };
    matrix.validate()?;
    Ok(matrix)
}

/// Build and write the leaderboard (CSV and JSON forms).
pub fn run_leaderboard(
    banks: &[NuggetBank],
    reports: &[Report],
    judgments: &JudgmentSet,
    missing_policy: MissingPolicy,
    label: &str,
    out_csv: &Path,
    out_json: &Path,
) -> Result<(Leaderboard, Diagnostics)> {
    let (board, diagnostics) =
        evalharness::build_leaderboard(reports, banks, judgments, missing_policy, label);
    let consistency = board.audit_macro_consistency();
    if !consistency.is_empty() {
        return Err(Error::contract(format!(
            "leaderboard macro consistency violated: {consistency:?}"
        )));
    }
    formats::write_atomic(out_csv, board.to_csv().as_bytes())?;
    let mut json = serde_json::to_string_pretty(&board)?;
    json.push('\n');
    formats::write_atomic(out_json, json.as_bytes())?;
    Ok((board, diagnostics))
}

pub fn read_leaderboard(path: &Path) -> Result<Leaderboard> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// The composed evaluate flow: judge (or import), score, leaderboard.
pub struct EvaluateOutcome {
    pub leaderboard: Leaderboard,
    pub matrix: ScoreMatrix,
    pub diagnostics: Diagnostics,
}

pub fn run_evaluate(
    config: &PipelineConfig,
    banks_dir: &Path,
    reports_path: &Path,
    imported_judgments: Option<(&Path, JudgmentFormat)>,
    missing_policy: MissingPolicy,
    out_dir: &Path,
) -> Result<EvaluateOutcome> {
    let banks = load_banks(banks_dir)?;
    let reports = load_reports(reports_path)?;
    let mut diagnostics = Diagnostics::new();

    let judgments = match imported_judgments {
        Some((path, format)) => {
            let (set, import_diags) = evalharness::import_judgments(path, format)?;
            diagnostics.extend(import_diags);
            set
        }
        None => {
            let (set, judge_diags) =
                run_judge(config, &banks, &reports, &out_dir.join("judgments.jsonl"))?;
            diagnostics.extend(judge_diags);
            set
        }
    };

    let matrix = score_matrix(&banks, &reports, &judgments, &config.label)?;
    formats::write_score_matrix(&out_dir.join("scores.csv"), &matrix)?;

    let (leaderboard, board_diags) = run_leaderboard(
        &banks,
        &reports,
        &judgments,
        missing_policy,
        &config.label,
        &out_dir.join("leaderboard.csv"),
        &out_dir.join("leaderboard.json"),
    )?;
    diagnostics.extend(board_diags);

    Ok(EvaluateOutcome {
        leaderboard,
        matrix,
        diagnostics,
    })
}
