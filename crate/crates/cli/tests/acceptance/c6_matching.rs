//! Criterion 6: stable matching has no blocking pair on 500 random
//! preference profiles (sizes <= 6), and matches the stable set found by
//! full matching enumeration for n <= 4.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nuggetbank_core::alignment::{blocking_pairs, stable_match_from_scores, AlignmentResult, MatchPair};

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// All one-to-one matchings of golds to distinct gens (partial when sides
/// differ in size: every gold is matched when |gold| <= |gen|).
fn enumerate_matchings(golds: usize, gens: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    let mut assignment: Vec<Option<usize>> = vec![None; golds];
    let mut used = vec![false; gens];
    fn recurse(
        g: usize,
        golds: usize,
        gens: usize,
        assignment: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        if g == golds {
            // Complete matchings only: exactly min(golds, gens) pairs.
            let matched = assignment.iter().flatten().count();
            if matched == golds.min(gens) {
                out.push(assignment.clone());
            }
            return;
        }
        for n in 0..gens {
            if !used[n] {
                used[n] = true;
                assignment[g] = Some(n);
                recurse(g + 1, golds, gens, assignment, used, out);
                assignment[g] = None;
                used[n] = false;
            }
        }
        // The unmatched branch (only viable when golds exceed gens).
        recurse(g + 1, golds, gens, assignment, used, out);
    }
    recurse(0, golds, gens, &mut assignment, &mut used, &mut out);
    out.sort();
    out.dedup();
    out
}

fn as_result(gold_ids: &[String], gen_ids: &[String], scores: &[Vec<f64>], assignment: &[Option<usize>]) -> AlignmentResult {
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (g, slot) in assignment.iter().enumerate() {
        match slot {
            Some(n) => pairs.push(MatchPair {
                gold_id: gold_ids[g].clone(),
                gen_id: gen_ids[*n].clone(),
                cosine: scores[g][*n],
                judged: None,
            }),
            None => unmatched.push(gold_ids[g].clone()),
        }
    }
    AlignmentResult {
        pairs,
        unmatched_gold: unmatched,
    }
}

#[test]
fn criterion_6_stable_matching() {
    super::gate(6, "stable matching", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC6);

        // 500 random profiles, sizes up to 6: the output never has a
        // blocking pair and matches min(|gold|, |gen|) pairs.
        for _ in 0..500 {
            let golds = rng.gen_range(1..=6);
            let gens = rng.gen_range(1..=6);
            let gold_ids = ids("g", golds);
            let gen_ids = ids("n", gens);
            let scores: Vec<Vec<f64>> = (0..golds)
                .map(|_| (0..gens).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let result = stable_match_from_scores(&gold_ids, &gen_ids, &scores).unwrap();
            let blocking = blocking_pairs(&gold_ids, &gen_ids, &scores, &result);
            assert!(blocking.is_empty(), "blocking pairs {blocking:?}");
            assert_eq!(result.pairs.len(), golds.min(gens));
        }

        // n <= 4: verify against full enumeration. The deferred-acceptance
        // output must be exactly a stable matching, and gold-optimal among
        // the stable set (each gold does at least as well as in any other
        // stable matching).
        for _ in 0..120 {
            let golds = rng.gen_range(1..=4);
            let gens = rng.gen_range(1..=4);
            let gold_ids = ids("g", golds);
            let gen_ids = ids("n", gens);
            let scores: Vec<Vec<f64>> = (0..golds)
                .map(|_| (0..gens).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let result = stable_match_from_scores(&gold_ids, &gen_ids, &scores).unwrap();

            let stable_set: Vec<AlignmentResult> = enumerate_matchings(golds, gens)
                .into_iter()
                .map(|assignment| as_result(&gold_ids, &gen_ids, &scores, &assignment))
                .filter(|candidate| blocking_pairs(&gold_ids, &gen_ids, &scores, candidate).is_empty())
                .collect();
            assert!(!stable_set.is_empty(), "enumeration found no stable matching");
            assert!(
                stable_set.iter().any(|s| s.pairs == result.pairs),
                "output is not in the enumerated stable set"
            );

            // Gold-optimality against every enumerated stable matching.
            for other in &stable_set {
                for pair in &result.pairs {
                    if let Some(other_pair) = other.pairs.iter().find(|p| p.gold_id == pair.gold_id) {
                        assert!(
                            pair.cosine >= other_pair.cosine,
                            "gold {} does worse than in another stable matching",
                            pair.gold_id
                        );
                    }
                }
            }
        }
    });
}
