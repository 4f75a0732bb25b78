//! Qualitative alignment between a generated bank and a gold bank.

use std::collections::BTreeMap;
use std::path::Path;

use nuggetbank_core::alignment::{alignment_report, stable_match, AlignmentResult};
use nuggetbank_core::error::Result;
use nuggetbank_core::formats::{read_bank, write_atomic, to_jsonl_string};
use nuggetbank_core::model::NuggetBank;
use nuggetbank_core::providers::Embedder;

/// The question set a bank contributes to alignment: its selected nuggets,
/// or the full candidate pool when nothing was selected.
fn question_set(bank: &NuggetBank) -> Vec<(String, String)> {
    let source = if bank.selected.is_empty() {
        &bank.candidates
    } else {
        &bank.selected
    };
    source
        .iter()
        .map(|n| (n.nugget_id.clone(), n.question.clone()))
        .collect()
}

pub struct AlignOutcome {
    pub result: AlignmentResult,
    pub report: String,
}

pub fn run_align(
    gold_bank_path: &Path,
    gen_bank_path: &Path,
    embedder: &Embedder,
    threshold_clear: f64,
    out_text: &Path,
    out_jsonl: &Path,
) -> Result<AlignOutcome> {
    let gold_bank = read_bank(gold_bank_path)?;
    let gen_bank = read_bank(gen_bank_path)?;
    let gold = question_set(&gold_bank);
    let gen = question_set(&gen_bank);

    let result = stable_match(&gold, &gen, embedder)?;

    let gold_texts: BTreeMap<String, String> = gold.into_iter().collect();
    let gen_texts: BTreeMap<String, String> = gen.into_iter().collect();
    let mut report = alignment_report(&result.pairs, &gold_texts, &gen_texts, threshold_clear);
    if !result.unmatched_gold.is_empty() {
        report.push_str(&format!(
            "Unmatched gold nuggets: {}\n",
            result.unmatched_gold.join(", ")
        ));
    }
    write_atomic(out_text, report.as_bytes())?;
    write_atomic(out_jsonl, to_jsonl_string(&result.pairs)?.as_bytes())?;
    Ok(AlignOutcome { result, report })
}
