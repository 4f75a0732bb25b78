//! Readers and writers for the line-delimited record files and CSV formats.
//!
//! Every JSONL file holds one UTF-8 JSON object per line. Column layouts for
//! the CSV formats are documented in FORMATS.md at the repository root and
//! are covered by byte-level tests.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Judgment, JudgmentRow, JudgmentSet, NuggetBank, QANugget, ScoreMatrix, SelectionMethod};

// ---------------------------------------------------------------------------
// Generic JSONL
// ---------------------------------------------------------------------------

pub fn to_jsonl_string<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl_str<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line)
            .map_err(|e| Error::format(format!("line {}: {e}", lineno + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_atomic(path, to_jsonl_string(items)?.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    from_jsonl_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

/// Write via a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Nugget bank files (nuggets.jsonl shape)
// ---------------------------------------------------------------------------

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct BankHeader {
    topic_id: String,
    method: SelectionMethod,
    config_fingerprint: String,
    selected: Vec<String>,
}

/// Serialize a bank as a header line followed by one line per candidate
/// nugget. Selected nuggets are listed by id, in rank order, in the header.
pub fn bank_to_jsonl(bank: &NuggetBank) -> Result<String> {
    let header = BankHeader {
        topic_id: bank.topic_id.clone(),
        method: bank.method,
        config_fingerprint: bank.config_fingerprint.clone(),
        selected: bank.selected.iter().map(|n| n.nugget_id.clone()).collect(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for nugget in &bank.candidates {
        out.push_str(&serde_json::to_string(nugget)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn bank_from_jsonl(text: &str) -> Result<NuggetBank> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines
        .next()
        .ok_or_else(|| Error::format("empty bank file"))?;
    let header: BankHeader =
        serde_json::from_str(header_line).map_err(|e| Error::format(format!("bank header: {e}")))?;
    let mut candidates: Vec<QANugget> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let nugget: QANugget = serde_json::from_str(line)
            .map_err(|e| Error::format(format!("bank line {}: {e}", lineno + 2)))?;
        candidates.push(nugget);
    }
    let mut selected = Vec::with_capacity(header.selected.len());
    for id in &header.selected {
        let nugget = candidates
            .iter()
            .find(|n| &n.nugget_id == id)
            .ok_or_else(|| Error::format(format!("selected nugget {id:?} missing from pool")))?;
        selected.push(nugget.clone());
    }
    Ok(NuggetBank {
        topic_id: header.topic_id,
        selected,
        candidates,
        method: header.method,
        config_fingerprint: header.config_fingerprint,
    })
}

pub fn write_bank(path: &Path, bank: &NuggetBank) -> Result<()> {
    write_atomic(path, bank_to_jsonl(bank)?.as_bytes())
}

pub fn read_bank(path: &Path) -> Result<NuggetBank> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    bank_from_jsonl(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Judgment files
// ---------------------------------------------------------------------------

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct JudgmentHeader {
    judge_label: String,
}

/// Native judgments.jsonl: a header line with the judge label, then one row
/// per (run, topic, nugget).
pub fn judgments_to_jsonl(set: &JudgmentSet) -> Result<String> {
    let mut out = serde_json::to_string(&JudgmentHeader {
        judge_label: set.judge_label.clone(),
    })?;
    out.push('\n');
    for ((run_id, topic_id, nugget_id), judgment) in &set.entries {
        let row = JudgmentRow {
            run_id: run_id.clone(),
            topic_id: topic_id.clone(),
            nugget_id: nugget_id.clone(),
            answer_verdicts: judgment.answer_verdicts.clone(),
            addressed: judgment.addressed,
        };
        out.push_str(&serde_json::to_string(&row)?);
        out.push('\n');
    }
    Ok(out)
}

/// Row-level parse outcome for judgment imports: Ok rows plus diagnostics for
/// malformed ones. The >10% malformed hard-error policy lives in evalharness.
pub struct JudgmentParse {
    pub set: JudgmentSet,
    pub malformed: Vec<(usize, String)>,
    pub total_rows: usize,
}

pub fn judgments_from_jsonl(text: &str) -> Result<JudgmentParse> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines
        .next()
        .ok_or_else(|| Error::format("empty judgments file"))?;
    let header: JudgmentHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::format(format!("judgments header: {e}")))?;
    let mut set = JudgmentSet::new(header.judge_label);
    let mut malformed = Vec::new();
    let mut total_rows = 0usize;
    for (idx, line) in lines.enumerate() {
        total_rows += 1;
        match serde_json::from_str::<JudgmentRow>(line) {
            Ok(row) => {
                set.entries.insert(
                    (row.run_id, row.topic_id, row.nugget_id),
                    Judgment {
                        answer_verdicts: row.answer_verdicts,
                        addressed: row.addressed,
                    },
                );
            }
            Err(e) => malformed.push((idx + 2, e.to_string())),
        }
    }
    Ok(JudgmentParse {
        set,
        malformed,
        total_rows,
    })
}

/// External judgment export row: overall verdict only, no per-answer detail.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct ArgueExportRow {
    pub run_id: String,
    pub topic_id: String,
    pub nugget_id: String,
    pub addressed: bool,
}

pub fn argue_export_from_jsonl(text: &str, judge_label: &str) -> Result<JudgmentParse> {
    let mut set = JudgmentSet::new(judge_label);
    let mut malformed = Vec::new();
    let mut total_rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total_rows += 1;
        match serde_json::from_str::<ArgueExportRow>(line) {
            Ok(row) => {
                set.entries.insert(
                    (row.run_id, row.topic_id, row.nugget_id),
                    Judgment {
                        answer_verdicts: Vec::new(),
                        addressed: row.addressed,
                    },
                );
            }
            Err(e) => malformed.push((idx + 1, e.to_string())),
        }
    }
    Ok(JudgmentParse {
        set,
        malformed,
        total_rows,
    })
}

// ---------------------------------------------------------------------------
// scores.csv
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form of a score.
pub fn fmt_score(v: f64) -> String {
    format!("{v}")
}

/// Header: `run_id,<topic_id...>,macro`. Missing scores are empty cells; the
/// macro column is the mean of the row's present scores (blank if none).
pub fn score_matrix_to_csv(matrix: &ScoreMatrix) -> String {
    let mut out = String::from("run_id");
    for topic in &matrix.topic_ids {
        out.push(',');
        out.push_str(topic);
    }
    out.push_str(",macro\n");
    for (r, run) in matrix.run_ids.iter().enumerate() {
        out.push_str(run);
        let mut present = Vec::new();
        for cell in &matrix.scores[r] {
            out.push(',');
            if let Some(v) = cell {
                out.push_str(&fmt_score(*v));
                present.push(*v);
            }
        }
        out.push(',');
        if !present.is_empty() {
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            out.push_str(&fmt_score(mean));
        }
        out.push('\n');
    }
    out
}

/// Inverse of `score_matrix_to_csv`. The macro column is recomputable and is
/// ignored; `label` is not carried by the CSV and is supplied by the caller.
pub fn score_matrix_from_csv(text: &str, label: &str) -> Result<ScoreMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("empty scores csv"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"run_id") || cols.last() != Some(&"macro") || cols.len() < 2 {
        return Err(Error::format(format!("bad scores.csv header: {header:?}")));
    }
    let topic_ids: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let mut run_ids = Vec::new();
    let mut scores = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::format(format!(
                "scores.csv line {}: {} cells, expected {}",
                lineno + 2,
                cells.len(),
                cols.len()
            )));
        }
        run_ids.push(cells[0].to_string());
        let mut row = Vec::with_capacity(topic_ids.len());
        for cell in &cells[1..cells.len() - 1] {
            if cell.is_empty() {
                row.push(None);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|e| Error::format(format!("scores.csv line {}: {e}", lineno + 2)))?;
                row.push(Some(v));
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

pub fn write_score_matrix(path: &Path, matrix: &ScoreMatrix) -> Result<()> {
    write_atomic(path, score_matrix_to_csv(matrix).as_bytes())
}

pub fn read_score_matrix(path: &Path, label: &str) -> Result<ScoreMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    score_matrix_from_csv(&text, label)
}

/// Identifiers embedded in CSV files must not contain the delimiter.
pub fn check_csv_safe(ids: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.contains(',') || id.contains('\n') {
            return Err(Error::contract(format!(
                "identifier {id:?} contains a CSV delimiter"
            )));
        }
        if !seen.insert(id) {
            return Err(Error::contract(format!("duplicate identifier {id:?}")));
        }
    }
    Ok(())
}
