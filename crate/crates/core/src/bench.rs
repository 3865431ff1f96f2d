//! Timing harness for the three pipeline stages on synthetic graphs.
//!
//! Feature extraction should grow linearly with the edge count while scoring
//! and selection stay flat: they touch only the subsampled points and the k
//! anomalies. Cases are measured round-robin for `repeats` rounds and the
//! fastest time of each stage kept.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::iforest::ForestParams;
use crate::scoring::{score_anomalies, ScalingMode};
use crate::selection::greedy_select;
use crate::synth::{generate_synthetic, SyntheticSpec};
use crate::tgraph::{AnomalyOrigin, AnomalySet, GraphMode, TGraph};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub anomalies: usize,
    pub budget: usize,
    pub params: ForestParams,
    pub scaling: ScalingMode,
    /// Edges per node in the generated graphs.
    pub edges_per_node: usize,
    pub repeats: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            anomalies: 50,
            budget: 5,
            params: ForestParams::default(),
            scaling: ScalingMode::Log1p,
            edges_per_node: 10,
            repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub edges: usize,
    pub nodes: usize,
    pub anomalies: usize,
    pub extract_secs: f64,
    pub scoring_secs: f64,
    pub selection_secs: f64,
}

impl BenchRow {
    pub fn total_secs(&self) -> f64 {
        self.extract_secs + self.scoring_secs + self.selection_secs
    }
}

fn graph_for(edges: usize, plants: usize, options: &BenchOptions) -> Result<(TGraph, Vec<usize>)> {
    let nodes = (edges / options.edges_per_node.max(1)).max(plants + 2);
    let spec = SyntheticSpec {
        intensity: (nodes / 10).clamp(20, 200),
        ..SyntheticSpec::new(nodes, edges, options.params.seed)
    }
    .with_cycled_plants(plants);
    let synthetic = generate_synthetic(&spec)?;
    let graph = TGraph::from_records(synthetic.records, GraphMode::Unipartite)?;
    let members = synthetic
        .planted
        .iter()
        .map(|id| graph.node_index(id).ok_or_else(|| Error::UnknownNode(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok((graph, members))
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let value = f()?;
    Ok((value, start.elapsed().as_secs_f64()))
}

fn measure_once(graph: &TGraph, members: &[usize], options: &BenchOptions) -> Result<BenchRow> {
    let (features, extract_secs) = timed(|| Ok(extract_features(graph)))?;
    let anomalies = AnomalySet::new(members.to_vec(), AnomalyOrigin::Dictated, graph.node_count())?;
    let (scores, scoring_secs) = timed(|| {
        score_anomalies(
            &features,
            &anomalies,
            &options.params,
            options.params.seed,
            options.scaling,
        )
    })?;
    let (_, selection_secs) = timed(|| greedy_select(&scores, options.budget, options.params.seed))?;
    Ok(BenchRow {
        edges: graph.edge_count(),
        nodes: graph.node_count(),
        anomalies: members.len(),
        extract_secs,
        scoring_secs,
        selection_secs,
    })
}

/// Measures every case once per round, round-robin, keeping each stage's
/// fastest time. Interleaving spreads transient machine load over all cases
/// instead of one.
fn measure_all(cases: &[(&TGraph, &[usize])], options: &BenchOptions) -> Result<Vec<BenchRow>> {
    let mut best: Vec<Option<BenchRow>> = vec![None; cases.len()];
    for _ in 0..options.repeats.max(1) {
        for (slot, &(graph, members)) in best.iter_mut().zip(cases) {
            let row = measure_once(graph, members, options)?;
            *slot = Some(match slot.take() {
                None => row,
                Some(b) => BenchRow {
                    extract_secs: b.extract_secs.min(row.extract_secs),
                    scoring_secs: b.scoring_secs.min(row.scoring_secs),
                    selection_secs: b.selection_secs.min(row.selection_secs),
                    ..b
                },
            });
        }
    }
    Ok(best.into_iter().flatten().collect())
}

/// One row per edge count, each with `options.anomalies` planted anomalies.
pub fn bench_sizes(sizes: &[usize], options: &BenchOptions) -> Result<Vec<BenchRow>> {
    let graphs = sizes
        .iter()
        .map(|&edges| graph_for(edges, options.anomalies, options))
        .collect::<Result<Vec<_>>>()?;
    let cases: Vec<(&TGraph, &[usize])> = graphs.iter().map(|(g, m)| (g, m.as_slice())).collect();
    measure_all(&cases, options)
}

/// One row per anomaly count on a single graph of `edges` edges. The
/// anomalies of a smaller count are a prefix of those of a larger one.
pub fn bench_anomaly_counts(edges: usize, counts: &[usize], options: &BenchOptions) -> Result<Vec<BenchRow>> {
    let most = counts.iter().copied().max().unwrap_or(0);
    let (graph, members) = graph_for(edges, most, options)?;
    let cases: Vec<(&TGraph, &[usize])> = counts.iter().map(|&k| (&graph, &members[..k])).collect();
    measure_all(&cases, options)
}
pub fn write_bench<W: Write>(out: W, rows: &[BenchRow], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record([
        "edges",
        "nodes",
        "anomalies",
        "extract_secs",
        "scoring_secs",
        "selection_secs",
    ])?;
    for r in rows {
        w.write_record([
            r.edges.to_string(),
            r.nodes.to_string(),
            r.anomalies.to_string(),
            format!("{:.6}", r.extract_secs),
            format!("{:.6}", r.scoring_secs),
            format!("{:.6}", r.selection_secs),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<bench>", e))?;
    Ok(())
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}
