//! Criterion 9: with provider failures injected at a 10% rate the pipeline
//! still yields valid banks passing every audit, reruns are byte-identical,
//! and diagnostics counts match the injected failures exactly.

use std::time::Duration;

use crate::common::{assert_ok, assert_trees_identical, nuggetbank, write_config, ConfigSpec};

use nuggetbank_cli::manifest::RunManifest;
use nuggetbank_core::formats;
use nuggetbank_core::model::audit_bank;

#[test]
fn criterion_9_failure_injection() {
    super::gate(9, "pipeline determinism under dropped items", Duration::from_secs(30), || {
        let spec = ConfigSpec {
            method: "dogmatiq",
            failure_rate: 0.1,
            seed: 2024,
            label: "faulty",
            ..ConfigSpec::default()
        };

        // Train the model for the dogmatiq path.
        let scratch = tempfile::tempdir().unwrap();
        let fixtures = crate::common::fixtures_dir();
        let model_path = scratch.path().join("svm_model.json");
        assert_ok(&nuggetbank(&[
            "train-svm",
            "--positives",
            fixtures.join("pos_criteria.jsonl").to_str().unwrap(),
            "--negatives",
            fixtures.join("neg_criteria.jsonl").to_str().unwrap(),
            "--epochs",
            "5000",
            "--out",
            model_path.to_str().unwrap(),
        ]));
        let spec = ConfigSpec {
            model_path: Some(model_path.to_str().unwrap()),
            ..spec
        };

        let run_a = tempfile::tempdir().unwrap();
        let run_b = tempfile::tempdir().unwrap();
        for dir in [&run_a, &run_b] {
            let config = write_config(dir.path(), &spec);
            assert_ok(&nuggetbank(&["generate", "--config", config.to_str().unwrap()]));
        }
        // Deterministic injection: two clean runs are byte-identical.
        assert_trees_identical(&run_a.path().join("out"), &run_b.path().join("out"));

        let manifest = RunManifest::read(&run_a.path().join("out/run_manifest.json")).unwrap();
        assert!(manifest.topics_failed.is_empty(), "topics failed under injection");

        // Every injected failure is a logical provider call that exhausted
        // its retries; each must surface as exactly one provider_failure
        // diagnostic.
        let injected = manifest.total_provider_failures();
        assert!(injected > 0, "the 10% rate must actually inject failures");
        let diagnosed: usize = manifest
            .diagnostics_summary
            .iter()
            .filter(|(key, _)| key.ends_with("/provider_failure"))
            .map(|(_, count)| *count)
            .sum();
        assert_eq!(
            diagnosed, injected as usize,
            "diagnostics must match injected failures exactly: {:?}",
            manifest.diagnostics_summary
        );

        // Banks remain valid under dropped items.
        for topic in manifest.per_topic.keys() {
            let bank = formats::read_bank(
                &run_a.path().join(format!("out/banks/{topic}.nuggets.jsonl")),
            )
            .unwrap();
            let violations = audit_bank(&bank, 20);
            assert!(violations.is_empty(), "{topic}: {violations:?}");
            assert!(!bank.selected.is_empty());
        }

        // And the judge path degrades conservatively too: judging under
        // injection completes with diagnostics, never errors.
        let config = write_config(run_a.path(), &spec);
        assert_ok(&nuggetbank(&["judge", "--config", config.to_str().unwrap()]));
    });
}
