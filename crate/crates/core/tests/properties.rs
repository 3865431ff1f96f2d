mod common;

use std::collections::HashMap;

use lookout_core::features::col;
use lookout_core::metrics::{budget_sweep, ideal_incrimination, incrimination};
use lookout_core::rng::SplitMix64;
use lookout_core::tgraph::EdgeRecord;
use lookout_core::{
    extract_features, greedy_select, marginal_gain, objective, parse_edges, partition_owners, score_anomalies,
    AnomalyOrigin, AnomalySet, FeatureMatrix, ForestParams, GraphMode, IsolationForest, ParseOptions, Points,
    ScalingMode, TGraph, FEATURE_NAMES,
};
use proptest::prelude::*;
use proptest::sample::subsequence;

use common::*;

fn score_rows(max_k: usize, max_l: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_k, 1..=max_l, any::<bool>()).prop_flat_map(|(k, l, coarse)| {
        let entry = if coarse {
            (0u8..=4).prop_map(|q| q as f64 / 4.0).boxed()
        } else {
            (0.0..=1.0f64).boxed()
        };
        prop::collection::vec(prop::collection::vec(entry, l), k)
    })
}

fn edge_records() -> impl Strategy<Value = Vec<EdgeRecord>> {
    prop::collection::vec((0u8..12, 0u8..12, 0i64..50, 0u8..8), 1..80).prop_map(|rows| {
        rows.into_iter()
            .map(|(s, d, ts, v)| EdgeRecord {
                source: format!("n{s}"),
                destination: format!("n{d}"),
                timestamp: ts,
                value: v as f64 * 0.5,
            })
            .collect()
    })
}

fn features_by_id(graph: &TGraph) -> HashMap<String, Vec<f64>> {
    let f = extract_features(graph);
    graph
        .node_ids()
        .enumerate()
        .map(|(v, id)| (id.to_string(), f.row(v).to_vec()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn submodular_monotone_nonnegative(
        (rows, order, t_len, s_len) in score_rows(8, 10)
            .prop_filter("need two plots", |r| r[0].len() >= 2)
            .prop_flat_map(|rows| {
                let l = rows[0].len();
                (Just(rows), Just((0..l).collect::<Vec<_>>()).prop_shuffle(), 0..l)
                    .prop_flat_map(|(rows, order, t_len)| (Just(rows), Just(order), Just(t_len), 0..=t_len))
            })
    ) {
        let m = matrix(&rows);
        let p = order[0];
        let t = &order[1..1 + t_len];
        let s = &t[..s_len];
        prop_assert!(objective(&m, s).unwrap() >= 0.0);
        prop_assert!(objective(&m, s).unwrap() <= objective(&m, t).unwrap());
        prop_assert!(marginal_gain(&m, p, s).unwrap() >= marginal_gain(&m, p, t).unwrap());
    }

    #[test]
    fn lazy_matches_eager(rows in score_rows(10, 16), b in 1usize..16) {
        let m = matrix(&rows);
        let b = b.min(m.plot_count());
        prop_assert_eq!(greedy_select(&m, b, 0).unwrap().selected, eager_greedy(&rows, b));
    }

    #[test]
    fn greedy_is_nested_and_saturates(rows in score_rows(8, 12)) {
        let m = matrix(&rows);
        let l = m.plot_count();
        let full = greedy_select(&m, l, 0).unwrap();
        let all: Vec<usize> = (0..l).collect();
        prop_assert_eq!(full.objective, objective(&m, &all).unwrap());
        let mut previous = 0.0;
        for b in 1..=l {
            let sel = greedy_select(&m, b, 0).unwrap();
            prop_assert_eq!(&sel.selected[..], &full.selected[..b]);
            prop_assert!(sel.objective >= previous);
            previous = sel.objective;
        }
        let sweep = budget_sweep(&m, l).unwrap();
        prop_assert!(sweep.windows(2).all(|w| w[1].incrimination >= w[0].incrimination));
        prop_assert_eq!(sweep[l - 1].incrimination, ideal_incrimination(&m));
    }

    #[test]
    fn greedy_within_bound_of_optimum(rows in score_rows(6, 9), b in 1usize..5) {
        let m = matrix(&rows);
        let greedy = greedy_select(&m, b, 0).unwrap();
        let optimum = exhaustive_optimum(&rows, b);
        prop_assert!(greedy.objective >= (1.0 - (-1.0f64).exp()) * optimum);
        let inc = incrimination(&m, &greedy.selected).unwrap();
        prop_assert!(0.0 <= inc && inc <= ideal_incrimination(&m) && ideal_incrimination(&m) <= 1.0);
    }

    #[test]
    fn owners_partition_anomalies_by_best_plot(rows in score_rows(10, 8), seed in any::<u64>()) {
        let m = matrix(&rows);
        let l = m.plot_count();
        let selected: Vec<usize> = (0..l).step_by(2).collect();
        let owners = partition_owners(&m, &selected, seed).unwrap();
        prop_assert_eq!(owners.len(), selected.len());
        let mut seen = vec![0; m.anomaly_count()];
        for (slot, members) in owners.iter().enumerate() {
            for &i in members {
                seen[i] += 1;
                let best = selected.iter().map(|&j| rows[i][j]).fold(0.0, f64::max);
                prop_assert_eq!(rows[i][selected[slot]], best);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(owners, partition_owners(&m, &selected, seed).unwrap());
    }

    #[test]
    fn feature_invariants(records in edge_records()) {
        let graph = TGraph::from_records(records, GraphMode::Unipartite).unwrap();
        let f = extract_features(&graph);
        let m = graph.edge_count() as f64;
        prop_assert_eq!(f.column(col::INWEIGHT_R).sum::<f64>(), m);
        prop_assert_eq!(f.column(col::OUTWEIGHT_R).sum::<f64>(), m);
        for v in 0..f.rows() {
            let r = f.row(v);
            prop_assert!(r.iter().all(|x| x.is_finite() && *x >= 0.0));
            prop_assert!(r[col::INDEGREE] <= r[col::INWEIGHT_R]);
            prop_assert!(r[col::OUTDEGREE] <= r[col::OUTWEIGHT_R]);
            prop_assert!(r[col::IAT_MIN] <= r[col::IAT_MEDIAN] && r[col::IAT_MEDIAN] <= r[col::IAT_MAX]);
            prop_assert!(r[col::IAT_MIN] <= r[col::IAT_AVG] && r[col::IAT_AVG] <= r[col::IAT_MAX]);
            prop_assert!(r[col::LIFETIME] >= r[col::IAT_MAX]);
        }
        let oracle = brute_force_features(&graph);
        for (v, row) in oracle.iter().enumerate() {
            for c in 0..12 {
                let got = f.get(v, c);
                prop_assert!((got - row[c]).abs() <= 1e-12 * row[c].abs().max(1.0), "node {} {}", v, FEATURE_NAMES[c]);
            }
        }
    }

    #[test]
    fn features_ignore_input_order(records in edge_records().prop_flat_map(|r| {
        let shuffled = Just(r.clone()).prop_shuffle();
        (Just(r), shuffled)
    })) {
        let (original, shuffled) = records;
        let a = features_by_id(&TGraph::from_records(original, GraphMode::Unipartite).unwrap());
        let b = features_by_id(&TGraph::from_records(shuffled, GraphMode::Unipartite).unwrap());
        prop_assert_eq!(a.len(), b.len());
        for (id, row) in &a {
            let other = &b[id];
            for c in 0..12 {
                prop_assert!((row[c] - other[c]).abs() <= 1e-9 * row[c].abs().max(1.0));
            }
        }
    }

    #[test]
    fn parsing_is_deterministic_and_stable(records in edge_records()) {
        let text: String = records
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{},{},{},{}\n", r.source, r.destination, r.timestamp, i))
            .collect();
        let a = parse_edges(text.as_bytes(), &ParseOptions::default()).unwrap();
        let b = parse_edges(text.as_bytes(), &ParseOptions::default()).unwrap();
        prop_assert_eq!(a.edges(), b.edges());
        prop_assert!(a.node_ids().eq(b.node_ids()));
        for w in a.edges().windows(2) {
            prop_assert!(w[0].timestamp < w[1].timestamp || (w[0].timestamp == w[1].timestamp && w[0].value < w[1].value));
        }
    }

    #[test]
    fn forest_scores_are_deterministic_and_open_unit(
        data in prop::collection::vec(-100.0..100.0f64, 2..200),
        trees in 1usize..20,
        subsample in 2usize..64,
        seed in any::<u64>(),
    ) {
        let data = &data[..data.len() / 2 * 2];
        let points = Points::new(data, 2).unwrap();
        let params = ForestParams { trees, subsample, seed };
        let forest = IsolationForest::fit(&points, &params).unwrap();
        let again = IsolationForest::fit(&points, &params).unwrap();
        prop_assert_eq!(forest.trees().len(), trees);
        for t in forest.trees() {
            prop_assert!(t.depth() <= t.height_limit());
            prop_assert_eq!(t.leaf_sizes().iter().sum::<usize>(), forest.sample_size());
        }
        for i in 0..data.len() / 2 {
            let s = forest.score_row(&points, i).unwrap();
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert_eq!(s, again.score_row(&points, i).unwrap());
        }
    }

    #[test]
    fn longer_paths_score_lower(a in 0.0..40.0f64, b in 0.0..40.0f64) {
        let data = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let forest = IsolationForest::fit(&Points::new(&data, 1).unwrap(), &ForestParams::default()).unwrap();
        let (sa, sb) = (forest.score_from_path(a), forest.score_from_path(b));
        if a < b {
            prop_assert!(sa > sb);
        } else if a > b {
            prop_assert!(sa < sb);
        }
    }

    #[test]
    fn splitmix_below_stays_in_range(seed in any::<u64>(), n in 1usize..1_000_000) {
        let mut rng = SplitMix64::new(seed);
        for _ in 0..32 {
            prop_assert!(rng.below(n) < n);
            let x = rng.next_f64();
            prop_assert!((0.0..1.0).contains(&x));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Perturbing one feature column only changes plots that use it.
    #[test]
    fn scoring_is_column_local(
        seed in any::<u64>(),
        column in 0usize..12,
        members in subsequence((0..40).collect::<Vec<usize>>(), 1..5),
    ) {
        let mut rng = SplitMix64::new(seed);
        let n = 40;
        let mut values: Vec<f64> = (0..n * 12).map(|_| (rng.next_f64() * 50.0).floor()).collect();
        let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        let before = FeatureMatrix::new(values.clone(), names.clone()).unwrap();
        for v in 0..n {
            values[v * 12 + column] = (rng.next_f64() * 1000.0).floor();
        }
        let after = FeatureMatrix::new(values, names).unwrap();
        let anomalies = AnomalySet::new(members, AnomalyOrigin::Dictated, n).unwrap();
        let params = ForestParams { trees: 10, subsample: 16, seed: 3 };
        let a = score_anomalies(&before, &anomalies, &params, 9, ScalingMode::Log1p).unwrap();
        let b = score_anomalies(&after, &anomalies, &params, 9, ScalingMode::Log1p).unwrap();
        for (j, plot) in a.plots().iter().enumerate() {
            if plot.feature_x != column && plot.feature_y != column {
                prop_assert!(a.column(j).eq(b.column(j)));
            }
        }
    }
}
