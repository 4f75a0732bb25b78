//! Criterion 3: connected components match an O(n^3) transitive-closure
//! oracle on 300 random graphs (n <= 12), and candidate-edge counts are
//! monotone in the cosine threshold on mock embeddings.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nuggetbank_core::clusterstage::{candidate_pairs, connected_components, ClusterConfig, ParaphraseEdge};
use nuggetbank_core::providers::{Embedder, ProviderConfig};

/// O(n^3) reachability closure oracle.
fn closure_oracle(ids: &[String], edges: &[(usize, usize)]) -> Vec<Vec<String>> {
    let n = ids.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for (a, b) in edges {
        reach[*a][*b] = true;
        reach[*b][*a] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut clusters = Vec::new();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut cluster = Vec::new();
        for j in 0..n {
            if reach[i][j] {
                assigned[j] = true;
                cluster.push(ids[j].clone());
            }
        }
        cluster.sort();
        clusters.push(cluster);
    }
    clusters.sort();
    clusters
}

#[test]
fn criterion_3_clustering_equivalence() {
    super::gate(3, "clustering equivalence", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
        for _ in 0..300 {
            let n = rng.gen_range(1..=12);
            let ids: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
            let mut index_edges = Vec::new();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.25) {
                        index_edges.push((i, j));
                        edges.push(ParaphraseEdge {
                            nugget_id_a: ids[i].clone(),
                            nugget_id_b: ids[j].clone(),
                            cosine: 0.95,
                            verified: true,
                        });
                    }
                }
            }
            let got = connected_components(&ids, &edges).unwrap();
            let want = closure_oracle(&ids, &index_edges);
            assert_eq!(got, want);
        }

        // Threshold monotonicity on mock embeddings: duplicate groups give
        // cosine-1 pairs, everything else lands near zero, and raising the
        // threshold can only remove candidate edges.
        let embedder = Embedder::from_config(ProviderConfig::mock("accept-embed", 13)).unwrap();
        let questions: Vec<(String, String)> = (0..24)
            .map(|i| (format!("n{i:02}"), format!("What is fact group {}?", i % 7)))
            .collect();
        let mut previous = usize::MAX;
        for threshold in [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95] {
            let config = ClusterConfig {
                cosine_threshold: threshold,
                verify_with_llm: false,
            };
            let edges = candidate_pairs(&questions, &embedder, &config).unwrap();
            assert!(
                edges.len() <= previous,
                "edge count increased from {previous} at threshold {threshold}"
            );
            previous = edges.len();
        }
        // Sanity on the sweep endpoints: identical questions always pair.
        assert!(previous >= 24 / 7 * 2, "duplicate groups must survive at 0.95");
    });
}
