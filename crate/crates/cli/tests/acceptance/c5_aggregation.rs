//! Criterion 5: aggregator fold table, De Morgan duality on 1000 random
//! verdict vectors, recall arithmetic fixtures, and missing-topic zero-fill.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nuggetbank_core::evalharness::{build_leaderboard, nugget_recall, MissingPolicy};
use nuggetbank_core::model::{
    fold_aggregator, Aggregator, Answer, Judgment, JudgmentSet, NuggetBank, Provenance, QANugget,
    Report, ReportSentence, SelectionMethod,
};

fn nugget(id: &str, topic: &str) -> QANugget {
    QANugget {
        nugget_id: id.to_string(),
        topic_id: topic.to_string(),
        question: format!("Q {id}?"),
        aggregator: Aggregator::Or,
        answers: vec![Answer::new("a", "d1")],
        provenance: Provenance {
            member_question_texts: vec![format!("Q {id}?")],
            cluster_size: 1,
            grounding_doc_count: 1,
            criteria: None,
            selection_method: Some(SelectionMethod::Common),
            selection_rank: None,
        },
    }
}

fn bank(topic: &str, size: usize) -> NuggetBank {
    let mut selected: Vec<QANugget> = (0..size)
        .map(|i| nugget(&format!("{topic}-n{i:02}"), topic))
        .collect();
    for (i, n) in selected.iter_mut().enumerate() {
        n.provenance.selection_rank = Some(i as u32 + 1);
    }
    NuggetBank {
        topic_id: topic.to_string(),
        candidates: selected.clone(),
        selected,
        method: SelectionMethod::Common,
        config_fingerprint: "fp".into(),
    }
}

fn report(run: &str, topic: &str) -> Report {
    Report {
        run_id: run.to_string(),
        topic_id: topic.to_string(),
        sentences: vec![ReportSentence {
            text: "body".into(),
            citations: vec![],
        }],
    }
}

fn judgments_for(bank: &NuggetBank, run: &str, addressed: usize) -> Vec<((String, String, String), Judgment)> {
    bank.selected
        .iter()
        .enumerate()
        .map(|(i, n)| {
            (
                (run.to_string(), bank.topic_id.clone(), n.nugget_id.clone()),
                Judgment {
                    answer_verdicts: vec![i < addressed],
                    addressed: i < addressed,
                },
            )
        })
        .collect()
}

#[test]
fn criterion_5_aggregation_and_recall() {
    super::gate(5, "aggregation and recall semantics", Duration::from_secs(2), || {
        // Exhaustive fold table up to length 3.
        for length in 1..=3usize {
            for mask in 0..(1u32 << length) {
                let verdicts: Vec<bool> = (0..length).map(|b| mask & (1 << b) != 0).collect();
                let any = verdicts.iter().any(|v| *v);
                let all = verdicts.iter().all(|v| *v);
                assert_eq!(fold_aggregator(Aggregator::Or, &verdicts).unwrap(), any);
                assert_eq!(fold_aggregator(Aggregator::And, &verdicts).unwrap(), all);
            }
        }
        assert!(fold_aggregator(Aggregator::Or, &[]).is_err());

        // De Morgan on 1000 random vectors.
        let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
        for _ in 0..1000 {
            let length = rng.gen_range(1..=12);
            let verdicts: Vec<bool> = (0..length).map(|_| rng.gen()).collect();
            let negated: Vec<bool> = verdicts.iter().map(|v| !v).collect();
            assert_eq!(
                fold_aggregator(Aggregator::Or, &verdicts).unwrap(),
                !fold_aggregator(Aggregator::And, &negated).unwrap()
            );
        }

        // Recall arithmetic: 3 of 20 addressed -> 0.15; bounds 0 and 1.
        let bank20 = bank("t1", 20);
        let report1 = report("r1", "t1");
        for (addressed, expected) in [(3usize, 0.15f64), (0, 0.0), (20, 1.0)] {
            let mut set = JudgmentSet::new("manual");
            set.entries.extend(judgments_for(&bank20, "r1", addressed));
            assert_eq!(nugget_recall(&report1, &bank20, &set).unwrap(), expected);
        }

        // Missing-topic zero-fill: a run that skipped 1 of 4 topics earns 0
        // there, and its macro is the mean over all 4 topics.
        let banks: Vec<NuggetBank> = (0..4).map(|t| bank(&format!("t{t}"), 4)).collect();
        let mut reports = Vec::new();
        let mut set = JudgmentSet::new("manual");
        for bank in &banks {
            if bank.topic_id != "t3" {
                reports.push(report("r1", &bank.topic_id));
                set.entries.extend(judgments_for(bank, "r1", 2)); // 0.5 each
            }
        }
        let (board, _) = build_leaderboard(&reports, &banks, &set, MissingPolicy::Zero, "zero");
        assert_eq!(board.rows.len(), 1);
        let row = &board.rows[0];
        assert_eq!(row.per_topic.len(), 4);
        assert_eq!(row.per_topic["t3"], 0.0);
        assert_eq!(row.macro_recall, (0.5 * 3.0) / 4.0);

        let (skip_board, _) = build_leaderboard(&reports, &banks, &set, MissingPolicy::Skip, "skip");
        assert_eq!(skip_board.rows[0].per_topic.len(), 3);
        assert_eq!(skip_board.rows[0].macro_recall, 0.5);
    });
}
