//! Leaderboard-agreement statistics: Spearman's rho, Kendall's tau-b,
//! top-weighted tau, Wilcoxon paired accuracy, subset-robustness deltas,
//! cross-set correlation matrices, and scatter-table emission.

pub mod wilcoxon;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalharness::Leaderboard;
use crate::formats::fmt_score;
use crate::model::ScoreMatrix;
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonOutcome, ZeroHandling};

/// Ascending 1-based mid-ranks (ties share the average of their positions).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Descending 0-based mid-ranks: the largest value gets rank 0.
fn descending_midranks(values: &[f64]) -> Vec<f64> {
    let ascending = midranks(values);
    let n = values.len() as f64;
    ascending.into_iter().map(|r| n - r).collect()
}

/// Sign with sgn(0) = 0, unlike `f64::signum` which maps 0.0 to 1.0.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::contract(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "correlation needs at least 2 observations".to_string(),
        ));
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::UndefinedCorrelation(
            "constant score vector".to_string(),
        ));
    }
    Ok(())
}

/// Spearman's rho: Pearson correlation of mid-ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let rx = midranks(x);
    let ry = midranks(y);
    let n = x.len() as f64;
    let mean_x = rx.iter().sum::<f64>() / n;
    let mean_y = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean_x) * (b - mean_y);
        var_x += (a - mean_x) * (a - mean_x);
        var_y += (b - mean_y) * (b - mean_y);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Kendall's tau-b with tie correction.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let mut concordant_minus_discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let sx = sign(x[i] - x[j]);
            let sy = sign(y[i] - y[j]);
            concordant_minus_discordant += (sx * sy) as i64;
        }
    }
    let tie_pairs = |v: &[f64]| -> f64 {
        let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
        for value in v {
            *counts.entry(value.to_bits()).or_insert(0.0) += 1.0;
        }
        counts.values().map(|t| t * (t - 1.0) / 2.0).sum()
    };
    let n0 = (n * (n - 1)) as f64 / 2.0;
    let n1 = tie_pairs(x);
    let n2 = tie_pairs(y);
    let denominator = ((n0 - n1) * (n0 - n2)).sqrt();
    if denominator == 0.0 {
        return Err(Error::UndefinedCorrelation("all pairs tied".to_string()));
    }
    Ok(concordant_minus_discordant as f64 / denominator)
}

/// Top-weighted Kendall's tau: pair (i, j) carries weight w(r_i) + w(r_j)
/// with the hyperbolic weigher w(r) = 1/(r+1) over descending mid-ranks of
/// the reference vector `x`, normalized by total pair weight.
pub fn weighted_kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let ranks = descending_midranks(x);
    let weights: Vec<f64> = ranks.iter().map(|r| 1.0 / (r + 1.0)).collect();
    let n = x.len();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let w = weights[i] + weights[j];
            let sx = sign(x[i] - x[j]);
            let sy = sign(y[i] - y[j]);
            numerator += w * sx * sy;
            denominator += w;
        }
    }
    Ok(numerator / denominator)
}

/// Configuration for Wilcoxon-based comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WpaConfig {
    pub alpha: f64,
    pub zero_handling: ZeroHandling,
    pub min_topics: usize,
}

impl Default for WpaConfig {
    fn default() -> Self {
        WpaConfig {
            alpha: 0.05,
            zero_handling: ZeroHandling::ZSplit,
            min_topics: 5,
        }
    }
}

impl WpaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0,1)", self.alpha)));
        }
        Ok(())
    }
}

/// Outcome category of a pairwise test, oriented to a (first, second) run
/// pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairOutcome {
    FirstWins,
    SecondWins,
    NotSignificant,
}

fn pair_outcome(
    matrix: &ScoreMatrix,
    run_a: &str,
    run_b: &str,
    topics: &[String],
    config: &WpaConfig,
) -> Result<PairOutcome> {
    let scores_a = matrix.run_scores(run_a);
    let scores_b = matrix.run_scores(run_b);
    let mut paired_a = Vec::new();
    let mut paired_b = Vec::new();
    for topic in topics {
        if let (Some(a), Some(b)) = (scores_a.get(topic), scores_b.get(topic)) {
            paired_a.push(*a);
            paired_b.push(*b);
        }
    }
    if paired_a.len() < config.min_topics {
        return Err(Error::InsufficientData(format!(
            "runs {run_a:?} and {run_b:?} share {} topics in {:?}; need {}",
            paired_a.len(),
            matrix.label,
            config.min_topics
        )));
    }
    let outcome = wilcoxon_signed_rank(
        &paired_a,
        &paired_b,
        config.alpha,
        config.zero_handling,
        config.min_topics,
    )?;
    Ok(match outcome {
        WilcoxonOutcome::ASignificant => PairOutcome::FirstWins,
        WilcoxonOutcome::BSignificant => PairOutcome::SecondWins,
        WilcoxonOutcome::NotSignificant => PairOutcome::NotSignificant,
    })
}

/// Wilcoxon paired accuracy: over all shared run pairs, the fraction whose
/// per-topic significance test outcome is the same category under both score
/// matrices.
pub fn wpa(reference: &ScoreMatrix, candidate: &ScoreMatrix, config: &WpaConfig) -> Result<f64> {
    config.validate()?;
    let shared_runs: Vec<String> = reference
        .run_ids
        .iter()
        .filter(|r| candidate.run_ids.contains(r))
        .cloned()
        .collect();
    if shared_runs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} shared runs; need at least 2",
            shared_runs.len()
        )));
    }
    let shared_topics: Vec<String> = reference
        .topic_ids
        .iter()
        .filter(|t| candidate.topic_ids.contains(t))
        .cloned()
        .collect();
    if shared_topics.len() < config.min_topics {
        return Err(Error::InsufficientData(format!(
            "{} shared topics; need at least {}",
            shared_topics.len(),
            config.min_topics
        )));
    }

    let mut runs = shared_runs;
    runs.sort();
    let mut agreements = 0usize;
    let mut pairs = 0usize;
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            let ref_outcome = pair_outcome(reference, &runs[i], &runs[j], &shared_topics, config)?;
            let cand_outcome = pair_outcome(candidate, &runs[i], &runs[j], &shared_topics, config)?;
            pairs += 1;
            if ref_outcome == cand_outcome {
                agreements += 1;
            }
        }
    }
    Ok(agreements as f64 / pairs as f64)
}

/// Agreement statistics between two leaderboards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub reference_label: String,
    pub candidate_label: String,
    pub rho: f64,
    pub tau: f64,
    pub weighted_tau: f64,
    pub wpa: f64,
    pub n_runs: usize,
}

impl CorrelationReport {
    pub fn csv_header() -> &'static str {
        "reference,candidate,n_runs,rho,tau,weighted_tau,wpa"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.reference_label,
            self.candidate_label,
            self.n_runs,
            fmt_score(self.rho),
            fmt_score(self.tau),
            fmt_score(self.weighted_tau),
            fmt_score(self.wpa)
        )
    }
}

/// Macro-score vectors over the shared runs, reference first.
fn shared_macro_vectors(
    reference: &Leaderboard,
    candidate: &Leaderboard,
) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let ref_scores = reference.macro_scores();
    let cand_scores = candidate.macro_scores();
    let mut shared: Vec<String> = ref_scores
        .keys()
        .filter(|r| cand_scores.contains_key(*r))
        .cloned()
        .collect();
    shared.sort();
    if shared.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} shared runs between {:?} and {:?}",
            shared.len(),
            reference.label,
            candidate.label
        )));
    }
    let x: Vec<f64> = shared.iter().map(|r| ref_scores[r]).collect();
    let y: Vec<f64> = shared.iter().map(|r| cand_scores[r]).collect();
    Ok((shared, x, y))
}

/// All four agreement statistics: rho, tau, and weighted tau on macro
/// scores; WPA on the per-topic matrices.
pub fn correlation_report(
    reference: &Leaderboard,
    candidate: &Leaderboard,
    config: &WpaConfig,
) -> Result<CorrelationReport> {
    let (shared, x, y) = shared_macro_vectors(reference, candidate)?;
    let rho = spearman_rho(&x, &y)?;
    let tau = kendall_tau(&x, &y)?;
    let weighted_tau = weighted_kendall_tau(&x, &y)?;
    let wpa_value = wpa(
        &reference.to_score_matrix(),
        &candidate.to_score_matrix(),
        config,
    )?;
    Ok(CorrelationReport {
        reference_label: reference.label.clone(),
        candidate_label: candidate.label.clone(),
        rho,
        tau,
        weighted_tau,
        wpa: wpa_value,
        n_runs: shared.len(),
    })
}

/// A correlation report restricted to a run subset, next to the full-set
/// report and the per-metric (subset - full) deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: CorrelationReport,
    pub full: CorrelationReport,
    /// (rho, tau, weighted tau, wpa) deltas, subset minus full.
    pub deltas: [f64; 4],
}

fn restrict(board: &Leaderboard, runs: &[String]) -> Leaderboard {
    let mut out = board.clone();
    out.rows.retain(|row| runs.contains(&row.run_id));
    out
}

pub fn subset_report(
    reference: &Leaderboard,
    candidate: &Leaderboard,
    run_filter: &[String],
    config: &WpaConfig,
) -> Result<SubsetReport> {
    if run_filter.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "run filter has {} runs; need at least 2",
            run_filter.len()
        )));
    }
    let full = correlation_report(reference, candidate, config)?;
    let subset = correlation_report(
        &restrict(reference, run_filter),
        &restrict(candidate, run_filter),
        config,
    )?;
    let deltas = [
        subset.rho - full.rho,
        subset.tau - full.tau,
        subset.weighted_tau - full.weighted_tau,
        subset.wpa - full.wpa,
    ];
    Ok(SubsetReport {
        subset,
        full,
        deltas,
    })
}

/// Pairwise (rho, tau) over a set of leaderboards; diagonal is 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSetMatrix {
    pub labels: Vec<String>,
    pub rho: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
}

impl CrossSetMatrix {
    fn grid_csv(labels: &[String], grid: &[Vec<f64>]) -> String {
        let mut out = String::from("label");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in labels.iter().zip(grid) {
            out.push_str(label);
            for v in row {
                out.push(',');
                out.push_str(&fmt_score(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn rho_csv(&self) -> String {
        Self::grid_csv(&self.labels, &self.rho)
    }

    pub fn tau_csv(&self) -> String {
        Self::grid_csv(&self.labels, &self.tau)
    }
}

pub fn cross_set_matrix(leaderboards: &[Leaderboard]) -> Result<CrossSetMatrix> {
    if leaderboards.len() < 2 {
        return Err(Error::InsufficientData(
            "cross-set matrix needs at least 2 leaderboards".to_string(),
        ));
    }
    let n = leaderboards.len();
    let mut rho = vec![vec![1.0; n]; n];
    let mut tau = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (_, x, y) = shared_macro_vectors(&leaderboards[i], &leaderboards[j])?;
            let r = spearman_rho(&x, &y)?;
            let t = kendall_tau(&x, &y)?;
            rho[i][j] = r;
            rho[j][i] = r;
            tau[i][j] = t;
            tau[j][i] = t;
        }
    }
    Ok(CrossSetMatrix {
        labels: leaderboards.iter().map(|l| l.label.clone()).collect(),
        rho,
        tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScatterLevel {
    System,
    Topic,
}

impl std::str::FromStr for ScatterLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "system" => Ok(ScatterLevel::System),
            "topic" => Ok(ScatterLevel::Topic),
            other => Err(Error::Config(format!("unknown scatter level {other:?}"))),
        }
    }
}

/// One plot-ready point: candidate score on x, reference score on y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub run_id: String,
    pub topic_id: Option<String>,
    pub x: f64,
    pub y: f64,
}

/// Plot data for score scatter comparisons. System level yields one row per
/// shared run; topic level one row per (run, topic) present in both.
pub fn scatter_data(
    reference: &Leaderboard,
    candidate: &Leaderboard,
    level: ScatterLevel,
) -> Vec<ScatterRow> {
    let mut rows = Vec::new();
    for cand_row in &candidate.rows {
        let Some(ref_row) = reference.rows.iter().find(|r| r.run_id == cand_row.run_id) else {
            continue;
        };
        match level {
            ScatterLevel::System => rows.push(ScatterRow {
                run_id: cand_row.run_id.clone(),
                topic_id: None,
                x: cand_row.macro_recall,
                y: ref_row.macro_recall,
            }),
            ScatterLevel::Topic => {
                for (topic, x) in &cand_row.per_topic {
                    if let Some(y) = ref_row.per_topic.get(topic) {
                        rows.push(ScatterRow {
                            run_id: cand_row.run_id.clone(),
                            topic_id: Some(topic.clone()),
                            x: *x,
                            y: *y,
                        });
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| (&a.run_id, &a.topic_id).cmp(&(&b.run_id, &b.topic_id)));
    rows
}

pub fn scatter_csv(rows: &[ScatterRow], level: ScatterLevel) -> String {
    let mut out = match level {
        ScatterLevel::System => String::from("run_id,x,y\n"),
        ScatterLevel::Topic => String::from("run_id,topic_id,x,y\n"),
    };
    for row in rows {
        match level {
            ScatterLevel::System => {
                out.push_str(&format!(
                    "{},{},{}\n",
                    row.run_id,
                    fmt_score(row.x),
                    fmt_score(row.y)
                ));
            }
            ScatterLevel::Topic => {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.run_id,
                    row.topic_id.as_deref().unwrap_or(""),
                    fmt_score(row.x),
                    fmt_score(row.y)
                ));
            }
        }
    }
    out
}
