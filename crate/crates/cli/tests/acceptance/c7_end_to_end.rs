//! Criterion 7: the shipped 2-topic, 6-document, 3-run fixture runs
//! generate (all three selection methods), evaluate, and correlate with
//! deterministic mocks, producing byte-identical outputs across repeated
//! runs and across single- vs multi-threaded execution. Every emitted bank
//! passes the invariant audits. Zero network.

use std::path::Path;
use std::time::Duration;

use crate::common::{assert_ok, assert_trees_identical, nuggetbank, write_config, ConfigSpec};

use nuggetbank_cli::manifest::RunManifest;
use nuggetbank_core::clusterstage::check_grounding_conservation;
use nuggetbank_core::formats;
use nuggetbank_core::model::{audit_bank, CandidateNugget, QANugget};
use nuggetbank_core::refinestage::check_answer_monotonicity;

const CAP: usize = 20;

/// One full cycle: generate -> judge -> score -> leaderboard. Returns the
/// out dir.
fn run_cycle(root: &Path, method: &str, parallelism: usize, model_path: Option<&str>) {
    let config = write_config(
        root,
        &ConfigSpec {
            method,
            parallelism,
            label: method,
            model_path,
            ..ConfigSpec::default()
        },
    );
    let config = config.to_str().unwrap().to_string();
    assert_ok(&nuggetbank(&["generate", "--config", &config]));
    assert_ok(&nuggetbank(&["judge", "--config", &config]));
    let judgments = root.join("out/judgments.jsonl");
    assert_ok(&nuggetbank(&[
        "score",
        "--config",
        &config,
        "--judgments",
        judgments.to_str().unwrap(),
    ]));
    assert_ok(&nuggetbank(&[
        "leaderboard",
        "--config",
        &config,
        "--judgments",
        judgments.to_str().unwrap(),
    ]));
}

/// Invariant audits over one run's outputs: bank structure, cull rule,
/// answer monotonicity, and grounding conservation, straight from the
/// emitted files.
fn audit_outputs(root: &Path) {
    let out = root.join("out");
    let manifest = RunManifest::read(&out.join("run_manifest.json")).unwrap();
    assert_eq!(manifest.total_network_calls(), 0, "mock run must not touch the network");
    assert!(manifest.topics_failed.is_empty());
    assert!(manifest.totals.audit().is_empty());

    for topic in manifest.per_topic.keys() {
        let bank = formats::read_bank(&out.join(format!("banks/{topic}.nuggets.jsonl"))).unwrap();
        let violations = audit_bank(&bank, CAP);
        assert!(violations.is_empty(), "bank audit failed for {topic}: {violations:?}");
        // Cull rule: every emitted nugget retains at least one answer.
        assert!(bank.candidates.iter().all(|n| !n.answers.is_empty()));

        let dir = out.join("intermediate").join(topic);
        let candidates: Vec<CandidateNugget> =
            formats::read_jsonl(&dir.join("candidates.jsonl")).unwrap();
        let merged: Vec<QANugget> = formats::read_jsonl(&dir.join("merged.jsonl")).unwrap();
        let refined: Vec<QANugget> = formats::read_jsonl(&dir.join("refined.jsonl")).unwrap();

        let conservation = check_grounding_conservation(&candidates, &merged);
        assert!(conservation.is_empty(), "{topic}: {conservation:?}");
        let monotonicity = check_answer_monotonicity(&merged, &refined);
        assert!(monotonicity.is_empty(), "{topic}: {monotonicity:?}");
        let cluster_total: u32 = merged.iter().map(|m| m.provenance.cluster_size).sum();
        assert_eq!(cluster_total as usize, candidates.len());
        // The fixture is built to exercise merging and culling.
        assert!(merged.len() < candidates.len(), "{topic}: no merge happened");
        assert!(refined.len() < merged.len(), "{topic}: nothing was culled");
    }
}

#[test]
fn criterion_7_end_to_end_reproduction() {
    super::gate(7, "end-to-end mock reproduction", Duration::from_secs(30), || {
        // Train the selection model once; training is deterministic, and
        // the same file serves every dogmatiq cycle.
        let scratch = tempfile::tempdir().unwrap();
        let model_path = scratch.path().join("svm_model.json");
        let fixtures = crate::common::fixtures_dir();
        assert_ok(&nuggetbank(&[
            "train-svm",
            "--positives",
            fixtures.join("pos_criteria.jsonl").to_str().unwrap(),
            "--negatives",
            fixtures.join("neg_criteria.jsonl").to_str().unwrap(),
            "--out",
            model_path.to_str().unwrap(),
        ]));
        let model_arg = model_path.to_str().unwrap().to_string();

        let mut leaderboards = Vec::new();
        for method in ["common", "sample", "dogmatiq"] {
            let model = (method == "dogmatiq").then_some(model_arg.as_str());

            // Clean run, repeated clean run, and a 4-thread clean run.
            let run_a = tempfile::tempdir().unwrap();
            let run_b = tempfile::tempdir().unwrap();
            let run_par = tempfile::tempdir().unwrap();
            run_cycle(run_a.path(), method, 1, model);
            run_cycle(run_b.path(), method, 1, model);
            run_cycle(run_par.path(), method, 4, model);

            assert_trees_identical(&run_a.path().join("out"), &run_b.path().join("out"));
            assert_trees_identical(&run_a.path().join("out"), &run_par.path().join("out"));
            audit_outputs(run_a.path());

            // Keep the leaderboard for the correlate step.
            let kept = scratch.path().join(format!("leaderboard-{method}.json"));
            std::fs::copy(run_a.path().join("out/leaderboard.json"), &kept).unwrap();
            leaderboards.push(kept);
        }

        // Correlate dogmatiq and sample leaderboards against common, twice,
        // and require byte-identical reports.
        let config = write_config(scratch.path(), &ConfigSpec::default());
        let reference = leaderboards[0].to_str().unwrap().to_string();
        for candidate in [&leaderboards[1], &leaderboards[2]] {
            let out_a = scratch.path().join("corr_a.csv");
            let out_b = scratch.path().join("corr_b.csv");
            for out in [&out_a, &out_b] {
                assert_ok(&nuggetbank(&[
                    "correlate",
                    "--config",
                    config.to_str().unwrap(),
                    "--reference",
                    &reference,
                    "--candidate",
                    candidate.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ]));
            }
            let bytes_a = std::fs::read(&out_a).unwrap();
            let bytes_b = std::fs::read(&out_b).unwrap();
            assert_eq!(bytes_a, bytes_b);
            let text = String::from_utf8(bytes_a).unwrap();
            assert!(text.starts_with("reference,candidate,n_runs,rho,tau,weighted_tau,wpa\n"));
            assert!(text.lines().nth(1).unwrap().starts_with("common,"));
        }

        // Self-correlation of the common leaderboard is exactly all ones.
        let self_out = scratch.path().join("self.csv");
        assert_ok(&nuggetbank(&[
            "correlate",
            "--config",
            config.to_str().unwrap(),
            "--reference",
            &reference,
            "--candidate",
            &reference,
            "--out",
            self_out.to_str().unwrap(),
        ]));
        let self_row = std::fs::read_to_string(&self_out).unwrap();
        assert!(self_row.lines().nth(1).unwrap().ends_with(",1,1,1,1"));
    });
}
