//! One-to-one stable matching between a generated nugget set and a gold
//! nugget set by question-embedding similarity, plus a human-readable
//! alignment report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{cosine, Embedder, EmbeddingRequest};

/// Advisory threshold above which a matched pair is marked provisionally
/// clear; final clear/unclear labels are a human judgment.
pub const DEFAULT_CLEAR_THRESHOLD: f64 = 0.72;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub gold_id: String,
    pub gen_id: String,
    pub cosine: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judged: Option<MatchJudgment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchJudgment {
    Clear,
    Unclear,
}

/// Matching output: matched pairs plus any gold nuggets left unmatched when
/// the generated side is smaller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_gold: Vec<String>,
}

/// Gold-proposing deferred acceptance on a cosine matrix. Both sides rank
/// partners by descending cosine with ties broken by id, so the result is
/// deterministic and has no blocking pair.
pub fn stable_match_from_scores(
    gold_ids: &[String],
    gen_ids: &[String],
    scores: &[Vec<f64>],
) -> Result<AlignmentResult> {
    if gold_ids.is_empty() || gen_ids.is_empty() {
        return Err(Error::contract("stable matching requires non-empty sides"));
    }
    if scores.len() != gold_ids.len() || scores.iter().any(|row| row.len() != gen_ids.len()) {
        return Err(Error::contract("score matrix shape mismatch"));
    }

    // Preference lists: for each gold, generated indices best-first.
    let preferences: Vec<Vec<usize>> = (0..gold_ids.len())
        .map(|g| {
            let mut order: Vec<usize> = (0..gen_ids.len()).collect();
            order.sort_by(|&a, &b| {
                scores[g][b]
                    .total_cmp(&scores[g][a])
                    .then_with(|| gen_ids[a].cmp(&gen_ids[b]))
            });
            order
        })
        .collect();

    // Generated side's ranking of golds, as a comparator.
    let gen_prefers = |n: usize, challenger: usize, incumbent: usize| -> bool {
        match scores[challenger][n].total_cmp(&scores[incumbent][n]) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => gold_ids[challenger] < gold_ids[incumbent],
        }
    };

    let mut matched_gen: Vec<Option<usize>> = vec![None; gen_ids.len()];
    let mut next_choice: Vec<usize> = vec![0; gold_ids.len()];
    // Process proposers in sorted-id order for determinism.
    let mut free: Vec<usize> = {
        let mut order: Vec<usize> = (0..gold_ids.len()).collect();
        order.sort_by(|&a, &b| gold_ids[b].cmp(&gold_ids[a]));
        order
    };

    while let Some(gold) = free.pop() {
        let mut proposer = gold;
        loop {
            if next_choice[proposer] >= gen_ids.len() {
                break; // exhausted list; stays unmatched
            }
            let target = preferences[proposer][next_choice[proposer]];
            next_choice[proposer] += 1;
            match matched_gen[target] {
                None => {
                    matched_gen[target] = Some(proposer);
                    break;
                }
                Some(incumbent) => {
                    if gen_prefers(target, proposer, incumbent) {
                        matched_gen[target] = Some(proposer);
                        proposer = incumbent;
                    }
                }
            }
        }
    }

    let mut pairs = Vec::new();
    let mut matched_gold = vec![false; gold_ids.len()];
    for (n, slot) in matched_gen.iter().enumerate() {
        if let Some(g) = slot {
            matched_gold[*g] = true;
            pairs.push(MatchPair {
                gold_id: gold_ids[*g].clone(),
                gen_id: gen_ids[n].clone(),
                cosine: scores[*g][n],
                judged: None,
            });
        }
    }
    pairs.sort_by(|a, b| a.gold_id.cmp(&b.gold_id));
    let unmatched_gold: Vec<String> = gold_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| !matched_gold[*i])
        .map(|(_, id)| id.clone())
        .collect();
    Ok(AlignmentResult {
        pairs,
        unmatched_gold,
    })
}

/// Stable matching over question texts via an embedding provider.
pub fn stable_match(
    gold_questions: &[(String, String)],
    gen_questions: &[(String, String)],
    embedder: &Embedder,
) -> Result<AlignmentResult> {
    if gold_questions.is_empty() || gen_questions.is_empty() {
        return Err(Error::contract("stable matching requires non-empty sides"));
    }
    let mut texts: Vec<String> = gold_questions.iter().map(|(_, q)| q.clone()).collect();
    texts.extend(gen_questions.iter().map(|(_, q)| q.clone()));
    let vectors = embedder.embed(&EmbeddingRequest::new(texts))?;
    let (gold_vecs, gen_vecs) = vectors.split_at(gold_questions.len());
    let scores: Vec<Vec<f64>> = gold_vecs
        .iter()
        .map(|g| gen_vecs.iter().map(|n| cosine(g, n)).collect())
        .collect();
    let gold_ids: Vec<String> = gold_questions.iter().map(|(id, _)| id.clone()).collect();
    let gen_ids: Vec<String> = gen_questions.iter().map(|(id, _)| id.clone()).collect();
    stable_match_from_scores(&gold_ids, &gen_ids, &scores)
}

/// Blocking-pair check: returns every (gold, gen) pair that strictly
/// prefers each other over their assignments. Empty means stable.
pub fn blocking_pairs(
    gold_ids: &[String],
    gen_ids: &[String],
    scores: &[Vec<f64>],
    result: &AlignmentResult,
) -> Vec<(String, String)> {
    let gold_index: std::collections::BTreeMap<&str, usize> = gold_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let gen_index: std::collections::BTreeMap<&str, usize> = gen_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut gold_partner: Vec<Option<usize>> = vec![None; gold_ids.len()];
    let mut gen_partner: Vec<Option<usize>> = vec![None; gen_ids.len()];
    for pair in &result.pairs {
        let g = gold_index[pair.gold_id.as_str()];
        let n = gen_index[pair.gen_id.as_str()];
        gold_partner[g] = Some(n);
        gen_partner[n] = Some(g);
    }

    // Preference comparators with id tie-breaks; an unmatched agent prefers
    // any partner.
    let gold_prefers = |g: usize, challenger: usize| -> bool {
        match gold_partner[g] {
            None => true,
            Some(current) => match scores[g][challenger].total_cmp(&scores[g][current]) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => gen_ids[challenger] < gen_ids[current],
            },
        }
    };
    let gen_prefers = |n: usize, challenger: usize| -> bool {
        match gen_partner[n] {
            None => true,
            Some(current) => match scores[challenger][n].total_cmp(&scores[current][n]) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => gold_ids[challenger] < gold_ids[current],
            },
        }
    };

    let mut blocking = Vec::new();
    for (g, gold_id) in gold_ids.iter().enumerate() {
        for (n, gen_id) in gen_ids.iter().enumerate() {
            if gold_partner[g] == Some(n) {
                continue;
            }
            if gold_prefers(g, n) && gen_prefers(n, g) {
                blocking.push((gold_id.clone(), gen_id.clone()));
            }
        }
    }
    blocking
}

/// Human-readable alignment listing: provisional-clear pairs first, each
/// group sorted by descending cosine, with GEN/GOLD question texts and the
/// similarity value.
pub fn alignment_report(
    pairs: &[MatchPair],
    gold_texts: &std::collections::BTreeMap<String, String>,
    gen_texts: &std::collections::BTreeMap<String, String>,
    threshold_clear: f64,
) -> String {
    let mut clear: Vec<&MatchPair> = pairs.iter().filter(|p| p.cosine >= threshold_clear).collect();
    let mut unclear: Vec<&MatchPair> = pairs.iter().filter(|p| p.cosine < threshold_clear).collect();
    let by_cosine_desc = |a: &&MatchPair, b: &&MatchPair| {
        b.cosine
            .total_cmp(&a.cosine)
            .then_with(|| a.gold_id.cmp(&b.gold_id))
    };
    clear.sort_by(by_cosine_desc);
    unclear.sort_by(by_cosine_desc);

    let mut out = String::new();
    out.push_str(&format!("Provisionally clear:  {}\n", clear.len()));
    let mut index = 0usize;
    let emit = |pair: &MatchPair, out: &mut String, index: &mut usize| {
        *index += 1;
        let gen_text = gen_texts.get(&pair.gen_id).map(|s| s.as_str()).unwrap_or("?");
        let gold_text = gold_texts.get(&pair.gold_id).map(|s| s.as_str()).unwrap_or("?");
        out.push_str(&format!("  {index})  GEN: {gen_text}\n"));
        out.push_str(&format!("     GOLD: {gold_text}     SIM: {:.3}\n", pair.cosine));
    };
    for pair in &clear {
        emit(pair, &mut out, &mut index);
    }
    out.push_str(&format!("Provisionally unclear: {}\n", unclear.len()));
    for pair in &unclear {
        emit(pair, &mut out, &mut index);
    }
    out
}
