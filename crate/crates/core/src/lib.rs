//! Explains anomalous nodes of a time-evolving graph with a small budget of
//! two-feature scatter plots.
//!
//! The pipeline extracts twelve per-node features from a timestamped edge
//! list ([`features`]), scores every anomaly in each of the 66 feature-pair
//! subspaces with an isolation forest ([`scoring`], [`iforest`]), and picks
//! the plots that maximise the summed best score per anomaly with lazy greedy
//! submodular selection ([`selection`]). Selected plots are rendered as SVG
//! and summarised in a JSON report ([`export`]).

pub mod bench;
pub mod error;
pub mod export;
pub mod features;
pub mod iforest;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scoring;
pub mod selection;
pub mod synth;
pub mod tgraph;

pub use error::{Error, Result};
pub use features::{extract_features, FeatureMatrix, FEATURE_NAMES};
pub use iforest::{Dataset, Detector, ForestParams, IsolationForest, Points};
pub use scoring::{enumerate_pairs, score_anomalies, PairPlotId, ScalingMode, ScoreMatrix};
pub use selection::{greedy_select, marginal_gain, objective, partition_owners, PlotSelection};
pub use tgraph::{load_anomalies, parse_edges, AnomalyOrigin, AnomalySet, GraphMode, ParseOptions, TGraph};
