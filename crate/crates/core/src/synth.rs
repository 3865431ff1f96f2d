//! Synthetic edge streams for tests, demos and benchmarks.
//!
//! Background traffic runs between `v*` nodes. Receivers follow a Zipf-like
//! popularity law, senders are uniform, and every background node sends at
//! least one edge.
//! Planted `a*` nodes only send, and each kind stands out on a target
//! feature:
//!
//! | kind          | behaviour                                         | target        |
//! |---------------|---------------------------------------------------|---------------|
//! | `FanOut`      | one edge to each of many distinct receivers        | `outdegree`   |
//! | `Burst`       | many edges to one receiver at a single timestamp  | `outweight_r` |
//! | `Sleeper`     | a few edges spread far beyond the usual horizon   | `iat_median`  |
//! | `HeavyWeight` | a few edges with very large values                | `outweight_v` |

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::col;
use crate::tgraph::EdgeRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    FanOut,
    Burst,
    Sleeper,
    HeavyWeight,
}

impl PlantKind {
    pub const ALL: [PlantKind; 4] = [
        PlantKind::FanOut,
        PlantKind::Burst,
        PlantKind::Sleeper,
        PlantKind::HeavyWeight,
    ];

    /// Feature column the kind is built to dominate.
    pub fn target_feature(self) -> usize {
        match self {
            PlantKind::FanOut => col::OUTDEGREE,
            PlantKind::Burst => col::OUTWEIGHT_R,
            PlantKind::Sleeper => col::IAT_MEDIAN,
            PlantKind::HeavyWeight => col::OUTWEIGHT_V,
        }
    }

    fn edge_count(self, intensity: usize) -> usize {
        match self {
            PlantKind::FanOut | PlantKind::Burst => intensity,
            PlantKind::Sleeper => 3,
            PlantKind::HeavyWeight => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Total node count, planted nodes included.
    pub nodes: usize,
    /// Exact number of edges to emit.
    pub edges: usize,
    /// One planted node per entry.
    pub plants: Vec<PlantKind>,
    /// Edge count of `FanOut` and `Burst` plants.
    pub intensity: usize,
    /// Background timestamps fall in `[0, horizon)`.
    pub horizon: i64,
    /// Popularity exponent of background receivers.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(nodes: usize, edges: usize, seed: u64) -> Self {
        Self {
            nodes,
            edges,
            plants: Vec::new(),
            intensity: 200,
            horizon: 1_000_000,
            zipf_exponent: 0.6,
            seed,
        }
    }

    /// Plants `count` nodes cycling through every [`PlantKind`].
    pub fn with_cycled_plants(mut self, count: usize) -> Self {
        self.plants = (0..count).map(|i| PlantKind::ALL[i % PlantKind::ALL.len()]).collect();
        self
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticGraph {
    pub records: Vec<EdgeRecord>,
    /// Ids of planted nodes, in `plants` order.
    pub planted: Vec<String>,
}

impl SyntheticGraph {
    pub fn write_delimited<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .has_headers(false)
            .from_writer(out);
        for r in &self.records {
            w.write_record([
                r.source.as_str(),
                r.destination.as_str(),
                &r.timestamp.to_string(),
                &r.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<synthetic>", e))?;
        Ok(())
    }

    pub fn write_anomalies<W: Write>(&self, mut out: W) -> Result<()> {
        for id in &self.planted {
            writeln!(out, "{id}").map_err(|e| Error::io("<anomalies>", e))?;
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticGraph> {
    let planted = spec.plants.len();
    if spec.nodes < 2 || spec.edges < spec.nodes {
        return Err(Error::InvalidArgument(format!(
            "need edges >= nodes >= 2, got {} nodes and {} edges",
            spec.nodes, spec.edges
        )));
    }
    if planted + 2 > spec.nodes {
        return Err(Error::InvalidArgument(
            "too many planted nodes for the node count".into(),
        ));
    }
    if spec.horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let background = spec.nodes - planted;
    let planted_edges: usize = spec.plants.iter().map(|k| k.edge_count(spec.intensity)).sum();
    if background + planted_edges > spec.edges {
        return Err(Error::InvalidArgument(format!(
            "{} edges cannot cover {background} background nodes and {planted_edges} planted edges",
            spec.edges
        )));
    }
    if spec.plants.contains(&PlantKind::FanOut) && spec.intensity > background {
        return Err(Error::InvalidArgument(
            "fan-out intensity exceeds the background node count".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let popularity = WeightedIndex::new((0..background).map(|i| ((i + 1) as f64).powf(-spec.zipf_exponent)))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let name = |i: usize| format!("v{i}");
    let value = |rng: &mut ChaCha8Rng| rng.random_range(1..=10) as f64;
    let mut records = Vec::with_capacity(spec.edges);

    let receiver = |rng: &mut ChaCha8Rng, not: usize| loop {
        let d = popularity.sample(rng);
        if d != not {
            return d;
        }
    };

    for i in 0..background {
        let d = receiver(&mut rng, i);
        records.push(EdgeRecord {
            source: name(i),
            destination: name(d),
            timestamp: rng.random_range(0..spec.horizon),
            value: value(&mut rng),
        });
    }
    for _ in background + planted_edges..spec.edges {
        let s = rng.random_range(0..background);
        let d = receiver(&mut rng, s);
        records.push(EdgeRecord {
            source: name(s),
            destination: name(d),
            timestamp: rng.random_range(0..spec.horizon),
            value: value(&mut rng),
        });
    }

    let mut ids = Vec::with_capacity(planted);
    for (p, &kind) in spec.plants.iter().enumerate() {
        let id = format!("a{p}");
        let count = kind.edge_count(spec.intensity);
        let push = |records: &mut Vec<EdgeRecord>, d: usize, timestamp: i64, value: f64| {
            records.push(EdgeRecord {
                source: id.clone(),
                destination: name(d),
                timestamp,
                value,
            })
        };
        match kind {
            PlantKind::FanOut => {
                let start = rng.random_range(0..spec.horizon);
                for d in sample(&mut rng, background, count) {
                    let ts = start + rng.random_range(0..spec.horizon / 100 + 1);
                    let v = value(&mut rng);
                    push(&mut records, d, ts, v);
                }
            }
            PlantKind::Burst => {
                let ts = rng.random_range(0..spec.horizon);
                let d = rng.random_range(0..background);
                for _ in 0..count {
                    let v = value(&mut rng);
                    push(&mut records, d, ts, v);
                }
            }
            PlantKind::Sleeper => {
                // The busiest receivers absorb the late edges; their own
                // median gap stays small.
                let gap = spec.horizon * 10;
                for step in 0..count {
                    let d = step % background.min(3);
                    let v = value(&mut rng);
                    push(
                        &mut records,
                        d,
                        step as i64 * gap + rng.random_range(0..spec.horizon / 100 + 1),
                        v,
                    );
                }
            }
            PlantKind::HeavyWeight => {
                for _ in 0..count {
                    let d = rng.random_range(0..background);
                    let ts = rng.random_range(0..spec.horizon);
                    push(&mut records, d, ts, 1.0e6 * rng.random_range(1.0..2.0));
                }
            }
        }
        ids.push(id);
    }
    debug_assert_eq!(records.len(), spec.edges);

    Ok(SyntheticGraph { records, planted: ids })
}
