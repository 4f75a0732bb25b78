//! Criterion 8: lossless round-trips over all record formats (1000
//! generated instances each) and byte-level column contracts for scores.csv
//! and the leaderboard CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};

use nuggetbank_core::evalharness::{Leaderboard, LeaderboardRow};
use nuggetbank_core::formats;
use nuggetbank_core::model::*;

fn arb_id() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,9}"
}

fn arb_text() -> impl Strategy<Value = String> {
    "[ -~]{1,24}"
        .prop_map(|s| s.trim().to_string())
        .prop_filter("non-empty", |s| !s.is_empty())
}

fn arb_answer() -> impl Strategy<Value = Answer> {
    (arb_text(), proptest::collection::btree_set(arb_id(), 1..3))
        .prop_map(|(text, doc_ids)| Answer { text, doc_ids })
}

prop_compose! {
    fn arb_topic()(topic_id in arb_id(), title in arb_text(), request_text in arb_text(),
                   goal in proptest::option::of(arb_text())) -> Topic {
        Topic {
            topic_id,
            title,
            request_text,
            persona: goal.map(|g| Persona {
                goal: g,
                background: "b".into(),
                role: "r".into(),
                communication: "c".into(),
                scope: "s".into(),
            }),
        }
    }
}

prop_compose! {
    fn arb_document()(doc_id in arb_id(), lang in "[a-z]{2}", text in arb_text()) -> Document {
        Document { doc_id, lang, text }
    }
}

prop_compose! {
    fn arb_ranking()(topic_id in arb_id(),
                     scores in proptest::collection::vec(0.0f64..50.0, 0..6)) -> RetrievalRanking {
        RetrievalRanking {
            topic_id,
            entries: scores.into_iter().enumerate().map(|(i, score)| RankingEntry {
                doc_id: format!("d{i}"),
                rank: i as u32 + 1,
                score,
            }).collect(),
        }
    }
}

prop_compose! {
    fn arb_candidate()(nugget_id in arb_id(), topic_id in arb_id(), question in arb_text(),
                       answers in proptest::collection::vec(arb_answer(), 1..3),
                       source_doc_id in arb_id()) -> CandidateNugget {
        CandidateNugget { nugget_id, topic_id, question, answers, source_doc_id }
    }
}

fn arb_quality() -> impl Strategy<Value = QualityVector> {
    proptest::collection::vec(0.0f64..1.0, CRITERIA_COUNT).prop_map(|fracs| {
        let mut values = [0.0; CRITERIA_COUNT];
        for (i, frac) in fracs.iter().enumerate() {
            let (lo, hi) = CRITERION_SCALES[i];
            values[i] = lo + frac * (hi - lo);
        }
        QualityVector::from_array_clamped(values)
    })
}

prop_compose! {
    fn arb_qanugget()(nugget_id in arb_id(), topic_id in arb_id(), question in arb_text(),
                      and_agg in any::<bool>(),
                      answers in proptest::collection::vec(arb_answer(), 1..3),
                      members in proptest::collection::vec(arb_text(), 1..3),
                      criteria in proptest::option::of(arb_quality())) -> QANugget {
        let grounding: BTreeSet<String> =
            answers.iter().flat_map(|a| a.doc_ids.iter().cloned()).collect();
        QANugget {
            nugget_id,
            topic_id,
            question,
            aggregator: if and_agg { Aggregator::And } else { Aggregator::Or },
            answers,
            provenance: Provenance {
                cluster_size: members.len() as u32,
                grounding_doc_count: grounding.len() as u32,
                member_question_texts: members,
                criteria,
                selection_method: Some(SelectionMethod::Common),
                selection_rank: None,
            },
        }
    }
}

prop_compose! {
    fn arb_bank()(topic_id in arb_id(),
                  mut nuggets in proptest::collection::vec(arb_qanugget(), 1..5),
                  select_count in 0usize..5) -> NuggetBank {
        for (i, n) in nuggets.iter_mut().enumerate() {
            n.nugget_id = format!("{topic_id}/n{i}");
            n.topic_id = topic_id.clone();
        }
        let take = select_count.min(nuggets.len());
        let mut selected = Vec::new();
        for (rank, nugget) in nuggets.iter_mut().take(take).enumerate() {
            nugget.provenance.selection_rank = Some(rank as u32 + 1);
            selected.push(nugget.clone());
        }
        NuggetBank {
            topic_id,
            selected,
            candidates: nuggets,
            method: SelectionMethod::Common,
            config_fingerprint: "fp".into(),
        }
    }
}

prop_compose! {
    fn arb_report()(run_id in arb_id(), topic_id in arb_id(),
                    sentences in proptest::collection::vec(
                        (arb_text(), proptest::collection::vec(arb_id(), 0..3)), 1..4)) -> Report {
        Report {
            run_id,
            topic_id,
            sentences: sentences.into_iter().map(|(text, citations)| ReportSentence {
                text, citations,
            }).collect(),
        }
    }
}

prop_compose! {
    fn arb_judgment_set()(judge_label in arb_id(),
                          rows in proptest::collection::btree_map(
                              (arb_id(), arb_id(), arb_id()),
                              (proptest::collection::vec(any::<bool>(), 0..3), any::<bool>()),
                              0..6)) -> JudgmentSet {
        let mut set = JudgmentSet::new(judge_label);
        for ((run, topic, nugget), (verdicts, addressed)) in rows {
            set.entries.insert((run, topic, nugget), Judgment {
                answer_verdicts: verdicts,
                addressed,
            });
        }
        set
    }
}

prop_compose! {
    fn arb_matrix()(n_runs in 1usize..5, n_topics in 1usize..5)
                   (runs in Just(n_runs), topics in Just(n_topics),
                    cells in proptest::collection::vec(
                        proptest::option::of(0.0f64..=1.0), n_runs * n_topics)) -> ScoreMatrix {
        ScoreMatrix {
            run_ids: (0..runs).map(|i| format!("run{i}")).collect(),
            topic_ids: (0..topics).map(|i| format!("topic{i}")).collect(),
            scores: cells.chunks(topics).map(|c| c.to_vec()).collect(),
            label: "m".into(),
        }
    }
}

/// Run 1000 generated cases of a round-trip property.
fn run_cases<T: std::fmt::Debug>(
    name: &str,
    strategy: impl Strategy<Value = T>,
    check: impl Fn(&T),
) {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 1000,
        ..ProptestConfig::default()
    });
    for case in 0..1000 {
        let value = strategy
            .new_tree(&mut runner)
            .unwrap_or_else(|e| panic!("{name} case {case}: generation failed: {e}"))
            .current();
        check(&value);
    }
}

fn json_identity<T>(value: &T)
where
    T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug,
{
    let json = serde_json::to_string(value).unwrap();
    let back: T = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, value, "lossy round trip; json was {json}");
}

#[test]
fn criterion_8_format_conformance() {
    super::gate(8, "format conformance", Duration::from_secs(10), || {
        run_cases("topics.jsonl", arb_topic(), json_identity);
        run_cases("documents.jsonl", arb_document(), json_identity);
        run_cases("ranking.jsonl", arb_ranking(), json_identity);
        run_cases("candidates.jsonl", arb_candidate(), json_identity);
        run_cases("refined.jsonl", arb_qanugget(), json_identity);
        run_cases("reports.jsonl", arb_report(), json_identity);
        run_cases("nuggets.jsonl", arb_bank(), |bank| {
            let text = formats::bank_to_jsonl(bank).unwrap();
            let back = formats::bank_from_jsonl(&text).unwrap();
            assert_eq!(&back, bank);
        });
        run_cases("judgments.jsonl", arb_judgment_set(), |set| {
            json_identity(set);
            let text = formats::judgments_to_jsonl(set).unwrap();
            let parse = formats::judgments_from_jsonl(&text).unwrap();
            assert!(parse.malformed.is_empty());
            assert_eq!(&parse.set, set);
        });
        run_cases("scores.csv", arb_matrix(), |matrix| {
            json_identity(matrix);
            let csv = formats::score_matrix_to_csv(matrix);
            let back = formats::score_matrix_from_csv(&csv, &matrix.label).unwrap();
            assert_eq!(&back, matrix);
        });

        // Byte contract: scores.csv column order run_id,<topics...>,macro
        // with shortest round-trip decimals and blank missing cells.
        let matrix = ScoreMatrix {
            run_ids: vec!["run-b".into(), "run-a".into()],
            topic_ids: vec!["t1".into(), "t2".into(), "t3".into()],
            scores: vec![
                vec![Some(0.5), Some(0.25), Some(0.75)],
                vec![Some(1.0), None, Some(0.5)],
            ],
            label: "fixture".into(),
        };
        assert_eq!(
            formats::score_matrix_to_csv(&matrix),
            "run_id,t1,t2,t3,macro\nrun-b,0.5,0.25,0.75,0.5\nrun-a,1,,0.5,0.75\n"
        );

        // Byte contract: leaderboard CSV column order run_id,macro,<topics>,
        // rows sorted by descending macro then run id.
        let board = Leaderboard {
            label: "fixture".into(),
            rows: vec![
                LeaderboardRow {
                    run_id: "run-a".into(),
                    macro_recall: 0.75,
                    per_topic: BTreeMap::from([("t1".into(), 0.5), ("t2".into(), 1.0)]),
                },
                LeaderboardRow {
                    run_id: "run-b".into(),
                    macro_recall: 0.25,
                    per_topic: BTreeMap::from([("t1".into(), 0.25)]),
                },
            ],
            judged_with: "judge".into(),
            bank_fingerprint: "fp".into(),
        };
        assert_eq!(
            board.to_csv(),
            "run_id,macro,t1,t2\nrun-a,0.75,0.5,1\nrun-b,0.25,0.25,\n"
        );
    });
}
