//! Leaderboard comparison outputs: correlation reports, subset deltas,
//! cross-set heatmap matrices, and scatter tables.

use std::path::Path;

use nuggetbank_core::error::Result;
use nuggetbank_core::evalharness::Leaderboard;
use nuggetbank_core::formats::{fmt_score, write_atomic};
use nuggetbank_core::rankstats::{
    correlation_report, cross_set_matrix, scatter_csv, scatter_data, subset_report,
    CorrelationReport, ScatterLevel, SubsetReport, WpaConfig,
};

pub fn write_correlation(report: &CorrelationReport, out: &Path) -> Result<()> {
    let csv = format!(
        "{}\n{}\n",
        CorrelationReport::csv_header(),
        report.to_csv_row()
    );
    write_atomic(out, csv.as_bytes())
}

pub fn correlation_summary(report: &CorrelationReport) -> String {
    format!(
        "{} vs {} over {} shared runs: rho={:.3} tau={:.3} weighted_tau={:.3} wpa={:.3}\n",
        report.reference_label,
        report.candidate_label,
        report.n_runs,
        report.rho,
        report.tau,
        report.weighted_tau,
        report.wpa
    )
}

pub fn run_correlate(
    reference: &Leaderboard,
    candidate: &Leaderboard,
    config: &WpaConfig,
    out: &Path,
) -> Result<CorrelationReport> {
    let report = correlation_report(reference, candidate, config)?;
    write_correlation(&report, out)?;
    Ok(report)
}

/// Subset CSV: one row per scope (subset, full, delta) and metric columns.
pub fn run_subset(
    reference: &Leaderboard,
    candidate: &Leaderboard,
    run_filter: &[String],
    config: &WpaConfig,
    out: &Path,
) -> Result<SubsetReport> {
    let report = subset_report(reference, candidate, run_filter, config)?;
    let mut csv = String::from("scope,n_runs,rho,tau,weighted_tau,wpa\n");
    let mut push_row = |scope: &str, n: usize, values: [f64; 4]| {
        csv.push_str(&format!(
            "{scope},{n},{},{},{},{}\n",
            fmt_score(values[0]),
            fmt_score(values[1]),
            fmt_score(values[2]),
            fmt_score(values[3])
        ));
    };
    push_row(
        "subset",
        report.subset.n_runs,
        [
            report.subset.rho,
            report.subset.tau,
            report.subset.weighted_tau,
            report.subset.wpa,
        ],
    );
    push_row(
        "full",
        report.full.n_runs,
        [
            report.full.rho,
            report.full.tau,
            report.full.weighted_tau,
            report.full.wpa,
        ],
    );
    push_row("delta", report.subset.n_runs, report.deltas);
    write_atomic(out, csv.as_bytes())?;
    Ok(report)
}

pub fn run_heatmap(leaderboards: &[Leaderboard], out_dir: &Path) -> Result<()> {
    let matrix = cross_set_matrix(leaderboards)?;
    write_atomic(&out_dir.join("heatmap_rho.csv"), matrix.rho_csv().as_bytes())?;
    write_atomic(&out_dir.join("heatmap_tau.csv"), matrix.tau_csv().as_bytes())?;
    Ok(())
}

pub fn run_scatter(
    reference: &Leaderboard,
    candidate: &Leaderboard,
    level: ScatterLevel,
    out: &Path,
) -> Result<usize> {
    let rows = scatter_data(reference, candidate, level);
    write_atomic(out, scatter_csv(&rows, level).as_bytes())?;
    Ok(rows.len())
}
