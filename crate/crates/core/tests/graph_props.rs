mod common;

use clustersync::graph::{ClusterClass, ClusteredGraph, CoexistenceReport, GraphSpec};
use clustersync::spectral::{check_weighted_invariance, EdgeWeights};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_from_seed(seed: u64) -> ClusteredGraph {
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 8)
}

fn relabel(g: &ClusteredGraph, perm: &[usize]) -> ClusteredGraph {
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    let clusters = g
        .clusters()
        .iter()
        .map(|c| c.iter().map(|&v| perm[v]).collect())
        .collect();
    ClusteredGraph::new(g.m(), &edges, clusters).unwrap()
}

#[test]
fn fixtures_have_expected_structure() {
    use ClusterClass::*;
    let expected = [
        [Driven, Mixed, Driven],
        [Driven, Hybrid, Driven],
        [SelfOrganized, Driven, Driven],
    ];
    for (name, classes) in FIXTURES.iter().zip(expected) {
        let g = fixture(name);
        assert_eq!(g.m(), 12, "{name}");
        assert!(g.check_common_inter_cluster().holds, "{name}");
        assert!(g.check_same_component().holds, "{name}");
        assert!(g.is_connected(), "{name}");
        assert_eq!(g.classify_all(), classes.to_vec(), "{name}");
        match g.check_coexistence(&g.classify_all()) {
            CoexistenceReport::Checked { flagged } => assert!(flagged.is_empty(), "{name}"),
            CoexistenceReport::NotApplicable => panic!("{name} should be connected"),
        }
    }
}

#[test]
fn classification_agrees_with_pairwise_bfs() {
    for seed in 0..2_000 {
        let g = graph_from_seed(seed);
        for k in 0..g.n_clusters() {
            let (intra, inter) = oracle_communicability(&g, k);
            assert_eq!(
                g.communicability(k).unwrap(),
                (intra, inter),
                "seed {seed} cluster {k}"
            );
        }
    }
}

#[test]
fn components_agree_with_bfs() {
    for seed in 0..2_000 {
        let g = graph_from_seed(seed);
        let oracle = oracle_components(&g);
        let labels = g.component_labels();
        for a in 0..g.m() {
            for b in 0..g.m() {
                assert_eq!(
                    oracle[a] == oracle[b],
                    labels[a] == labels[b],
                    "seed {seed}"
                );
            }
        }
        assert_eq!(g.check_same_component().holds, oracle_same_component(&g));
    }
}

#[test]
fn json_round_trip_on_random_graphs() {
    for seed in 0..1_000 {
        let g = graph_from_seed(seed);
        let text = g.to_spec().to_json_string();
        let back = ClusteredGraph::from_json_str(&text).unwrap();
        assert_eq!(back, g, "seed {seed}");
    }
    for name in FIXTURES {
        let g = fixture(name);
        assert_eq!(
            ClusteredGraph::from_json_str(&g.to_spec().to_json_string()).unwrap(),
            g
        );
    }
}

#[test]
fn malformed_files_name_the_field() {
    let err = GraphSpec::from_json_str(r#"{"m": 3, "edges": [[1, 2]], "clusters": [[1, 2]]}"#)
        .unwrap()
        .validate();
    assert!(!err.is_ok());
    assert!(err
        .violations
        .iter()
        .any(|v| v.to_string().contains("clusters")));

    let err = GraphSpec::from_json_str(r#"{"m": 3, "edges": [[1, 9]], "clusters": [[1, 2, 3]]}"#)
        .unwrap()
        .validate();
    assert!(err
        .violations
        .iter()
        .any(|v| v.to_string().starts_with("edges[0]")));
}

#[test]
fn normalized_weights_invariant_iff_common_condition() {
    for seed in 0..2_000 {
        let g = graph_from_seed(seed);
        let w = EdgeWeights::normalized(&g, 1.0);
        assert_eq!(
            check_weighted_invariance(&g, &w).holds,
            g.check_common_inter_cluster().holds,
            "seed {seed}"
        );
    }
}

#[test]
fn generator_for_common_condition_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1_000 {
        assert!(
            random_common_graph(&mut rng, 4, 3)
                .check_common_inter_cluster()
                .holds
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn relabeling_preserves_verdicts(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let g = graph_from_seed(seed);
        let mut perm: Vec<usize> = (0..g.m()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let h = relabel(&g, &perm);
        prop_assert_eq!(g.check_common_inter_cluster().holds, h.check_common_inter_cluster().holds);
        prop_assert_eq!(g.check_same_component().holds, h.check_same_component().holds);
        prop_assert_eq!(g.connected_components().len(), h.connected_components().len());
        // clusters are renumbered by smallest vertex, so compare as multisets
        let mut a: Vec<String> = g.classify_all().iter().map(|c| c.to_string()).collect();
        let mut b: Vec<String> = h.classify_all().iter().map(|c| c.to_string()).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn adding_edges_never_splits_components(seed in any::<u64>(), a in 0usize..8, b in 0usize..8) {
        let g = graph_from_seed(seed);
        let (a, b) = (a % g.m(), b % g.m());
        prop_assume!(a != b && !g.has_edge(a, b));
        let mut edges = g.edges().to_vec();
        edges.push((a, b));
        let h = ClusteredGraph::new(g.m(), &edges, g.clusters().to_vec()).unwrap();
        prop_assert!(h.connected_components().len() <= g.connected_components().len());
        if g.check_same_component().holds {
            prop_assert!(h.check_same_component().holds);
        }
    }
}
