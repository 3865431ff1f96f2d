//! Per-node features of a time-evolving graph.
//!
//! Degrees count distinct neighbours, `*weight_v` sums edge values and
//! `*weight_r` counts edges (multi-edge repetitions). Inter-arrival times are
//! the consecutive gaps of the node's incident edges (incoming and outgoing
//! merged, a self-loop counted once) in time order; equal timestamps give
//! zero gaps. Nodes with fewer than two incident edges get zero for the five
//! IAT statistics and for `lifetime`. In a bipartite graph the absent
//! direction of a pure source or pure destination is simply zero.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tgraph::TGraph;

pub const FEATURE_NAMES: [&str; 12] = [
    "indegree",
    "outdegree",
    "inweight_v",
    "outweight_v",
    "inweight_r",
    "outweight_r",
    "iat_avg",
    "iat_var",
    "iat_min",
    "iat_median",
    "iat_max",
    "lifetime",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

/// Column positions in [`FEATURE_NAMES`].
pub mod col {
    pub const INDEGREE: usize = 0;
    pub const OUTDEGREE: usize = 1;
    pub const INWEIGHT_V: usize = 2;
    pub const OUTWEIGHT_V: usize = 3;
    pub const INWEIGHT_R: usize = 4;
    pub const OUTWEIGHT_R: usize = 5;
    pub const IAT_AVG: usize = 6;
    pub const IAT_VAR: usize = 7;
    pub const IAT_MIN: usize = 8;
    pub const IAT_MEDIAN: usize = 9;
    pub const IAT_MAX: usize = 10;
    pub const LIFETIME: usize = 11;
}

/// Row-major n×d table of non-negative finite feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    names: Vec<String>,
    rows: usize,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let d = names.len();
        if d == 0 || !values.len().is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill rows of {d} features",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "feature value {bad} is not finite and non-negative"
            )));
        }
        Ok(Self {
            rows: values.len() / d,
            values,
            names,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, row: usize, column: usize) -> f64 {
        self.values[row * self.dims() + column]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let d = self.dims();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn column(&self, column: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values.iter().skip(column).step_by(self.dims()).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Writes a header of `node` plus the feature names and one row per node.
    pub fn write_delimited<W: Write>(&self, out: W, node_ids: &[&str], delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        let mut header = vec!["node"];
        header.extend(self.names.iter().map(String::as_str));
        w.write_record(&header)?;
        for (i, id) in node_ids.iter().enumerate().take(self.rows) {
            let mut record = vec![id.to_string()];
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<features>", e))?;
        Ok(())
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
struct IatStats {
    avg: f64,
    var: f64,
    min: f64,
    median: f64,
    max: f64,
    lifetime: f64,
}

fn iat_stats(timestamps: &[i64]) -> IatStats {
    if timestamps.len() < 2 {
        return IatStats::default();
    }
    let mut gaps: Vec<f64> = timestamps.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let count = gaps.len() as f64;
    let avg = gaps.iter().sum::<f64>() / count;
    let var = gaps.iter().map(|g| (g - avg) * (g - avg)).sum::<f64>() / count;
    gaps.sort_unstable_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    let median = if gaps.len() % 2 == 1 {
        gaps[mid]
    } else {
        (gaps[mid - 1] + gaps[mid]) / 2.0
    };
    IatStats {
        avg,
        var,
        min: gaps[0],
        median,
        max: gaps[gaps.len() - 1],
        lifetime: (timestamps[timestamps.len() - 1] - timestamps[0]) as f64,
    }
}

fn distinct(mut ids: Vec<usize>) -> usize {
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

fn node_row(graph: &TGraph, v: usize, row: &mut [f64]) {
    let edges = graph.edges();
    let incoming = graph.incoming(v);
    let outgoing = graph.outgoing(v);

    row[col::INDEGREE] = distinct(incoming.iter().map(|&e| edges[e].source).collect()) as f64;
    row[col::OUTDEGREE] = distinct(outgoing.iter().map(|&e| edges[e].destination).collect()) as f64;
    row[col::INWEIGHT_V] = incoming.iter().fold(0.0, |acc, &e| acc + edges[e].value);
    row[col::OUTWEIGHT_V] = outgoing.iter().fold(0.0, |acc, &e| acc + edges[e].value);
    row[col::INWEIGHT_R] = incoming.len() as f64;
    row[col::OUTWEIGHT_R] = outgoing.len() as f64;

    // Both lists ascend by edge index, hence by time; merge them, dropping
    // the second copy of a self-loop.
    let mut timestamps = Vec::with_capacity(incoming.len() + outgoing.len());
    let (mut i, mut o) = (0, 0);
    while i < incoming.len() || o < outgoing.len() {
        let next = match (incoming.get(i), outgoing.get(o)) {
            (Some(&a), Some(&b)) if a == b => {
                i += 1;
                o += 1;
                a
            }
            (Some(&a), Some(&b)) if a < b => {
                i += 1;
                a
            }
            (Some(&a), None) => {
                i += 1;
                a
            }
            (_, Some(&b)) => {
                o += 1;
                b
            }
            (None, None) => unreachable!(),
        };
        timestamps.push(edges[next].timestamp);
    }

    let s = iat_stats(&timestamps);
    row[col::IAT_AVG] = s.avg;
    row[col::IAT_VAR] = s.var;
    row[col::IAT_MIN] = s.min;
    row[col::IAT_MEDIAN] = s.median;
    row[col::IAT_MAX] = s.max;
    row[col::LIFETIME] = s.lifetime;
}

/// Computes the 12 features for every node, in node-index order.
pub fn extract_features(graph: &TGraph) -> FeatureMatrix {
    let n = graph.node_count();
    let mut values = vec![0.0; n * FEATURE_COUNT];
    values
        .par_chunks_mut(FEATURE_COUNT)
        .with_min_len(256)
        .enumerate()
        .for_each(|(v, row)| node_row(graph, v, row));
    FeatureMatrix {
        values,
        names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows: n,
    }
}
