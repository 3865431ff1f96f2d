//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library code paths it is compared against.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashSet;

use lookout_core::tgraph::{EdgeRecord, TGraph};
use lookout_core::ScoreMatrix;
use rand::Rng;

pub fn random_rows<R: Rng>(rng: &mut R, k: usize, l: usize) -> Vec<Vec<f64>> {
    (0..k).map(|_| (0..l).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Scores restricted to multiples of 1/4, so exact ties are common.
pub fn quantized_rows<R: Rng>(rng: &mut R, k: usize, l: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| (0..l).map(|_| rng.random_range(0..=4) as f64 / 4.0).collect())
        .collect()
}

/// Σ_i max_{j∈S} rows[i][j] by explicit loops.
pub fn naive_objective(rows: &[Vec<f64>], plots: &[usize]) -> f64 {
    let mut total = 0.0;
    for row in rows {
        let mut best = 0.0;
        for &j in plots {
            if row[j] > best {
                best = row[j];
            }
        }
        total += best;
    }
    total
}

/// Best objective over all subsets of size at most `budget`.
pub fn exhaustive_optimum(rows: &[Vec<f64>], budget: usize) -> f64 {
    let l = rows[0].len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << l) {
        if mask.count_ones() as usize > budget {
            continue;
        }
        let plots: Vec<usize> = (0..l).filter(|j| mask & (1 << j) != 0).collect();
        best = best.max(naive_objective(rows, &plots));
    }
    best
}

/// Plain greedy: rescan every remaining plot each round, largest gain wins,
/// lower index on ties.
pub fn eager_greedy(rows: &[Vec<f64>], budget: usize) -> Vec<usize> {
    let k = rows.len();
    let l = rows[0].len();
    let mut best = vec![0.0f64; k];
    let mut chosen = Vec::new();
    while chosen.len() < budget.min(l) {
        let mut pick: Option<(f64, usize)> = None;
        for j in 0..l {
            if chosen.contains(&j) {
                continue;
            }
            let mut gain = 0.0;
            for i in 0..k {
                gain += (rows[i][j] - best[i]).max(0.0);
            }
            match pick {
                Some((g, _)) if g >= gain => {}
                _ => pick = Some((gain, j)),
            }
        }
        let (_, j) = pick.unwrap();
        for i in 0..k {
            best[i] = best[i].max(rows[i][j]);
        }
        chosen.push(j);
    }
    chosen
}

pub fn matrix(rows: &[Vec<f64>]) -> ScoreMatrix {
    ScoreMatrix::from_rows(rows).unwrap()
}

/// Features recomputed per node by scanning the full edge list.
pub fn brute_force_features(graph: &TGraph) -> Vec<[f64; 12]> {
    let edges = graph.edges();
    (0..graph.node_count())
        .map(|v| {
            let mut in_neighbors = HashSet::new();
            let mut out_neighbors = HashSet::new();
            let (mut in_value, mut out_value) = (0.0, 0.0);
            let (mut in_count, mut out_count) = (0usize, 0usize);
            let mut times = Vec::new();
            for e in edges {
                if e.destination == v {
                    in_neighbors.insert(e.source);
                    in_value += e.value;
                    in_count += 1;
                }
                if e.source == v {
                    out_neighbors.insert(e.destination);
                    out_value += e.value;
                    out_count += 1;
                }
                if e.source == v || e.destination == v {
                    times.push(e.timestamp);
                }
            }
            times.sort();
            let mut row = [0.0; 12];
            row[0] = in_neighbors.len() as f64;
            row[1] = out_neighbors.len() as f64;
            row[2] = in_value;
            row[3] = out_value;
            row[4] = in_count as f64;
            row[5] = out_count as f64;
            if times.len() >= 2 {
                let mut gaps: Vec<f64> = Vec::new();
                for w in 1..times.len() {
                    gaps.push((times[w] - times[w - 1]) as f64);
                }
                let c = gaps.len() as f64;
                let mean = gaps.iter().sum::<f64>() / c;
                let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / c;
                let mut sorted = gaps.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = if sorted.len() % 2 == 1 {
                    sorted[sorted.len() / 2]
                } else {
                    0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
                };
                row[6] = mean;
                row[7] = var;
                row[8] = sorted[0];
                row[9] = median;
                row[10] = *sorted.last().unwrap();
                row[11] = (times[times.len() - 1] - times[0]) as f64;
            }
            row
        })
        .collect()
}

/// A random multigraph on exactly `n` nodes with repeated edges, self-loops
/// and timestamp ties.
pub fn random_records<R: Rng>(rng: &mut R, n: usize, extra_edges: usize) -> Vec<EdgeRecord> {
    let mut records = Vec::with_capacity(n + extra_edges);
    let mut push = |rng: &mut R, s: usize, d: usize| {
        records.push(EdgeRecord {
            source: format!("n{s}"),
            destination: format!("n{d}"),
            timestamp: rng.random_range(0..400),
            value: rng.random_range(0..50) as f64 * 0.5,
        })
    };
    for v in 0..n {
        let d = rng.random_range(0..n);
        push(rng, v, d);
    }
    for _ in 0..extra_edges {
        // a few busy senders so some nodes have long incident lists
        let s = if rng.random_bool(0.3) {
            rng.random_range(0..n / 10 + 1)
        } else {
            rng.random_range(0..n)
        };
        let d = rng.random_range(0..n);
        push(rng, s, d);
    }
    records
}
