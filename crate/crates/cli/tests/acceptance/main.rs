//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS line with its measured runtime and asserting its runtime budget.
//!
//! Run with `cargo test -p nuggetbank-cli --test acceptance -- --nocapture`.

mod c1_statistics;
mod c2_wpa;
mod c3_clustering;
mod c4_svm;
mod c5_aggregation;
mod c6_matching;
mod c7_end_to_end;
mod c8_formats;
mod c9_failure_injection;

#[path = "../common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

/// Run a criterion body, then print and enforce its runtime budget.
pub fn gate(number: u32, name: &str, budget: Duration, body: impl FnOnce()) {
    let start = Instant::now();
    body();
    let elapsed = start.elapsed();
    println!("acceptance criterion {number} ({name}): PASS in {elapsed:.2?} (budget {budget:?})");
    assert!(
        elapsed <= budget,
        "criterion {number} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
}
