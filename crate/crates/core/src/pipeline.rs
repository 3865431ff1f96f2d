//! End-to-end runs: anomaly detection and plot-based explanation.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::{plot_file_name, render_plot, ExplanationReport, RenderOptions};
use crate::features::{extract_features, FeatureMatrix};
use crate::iforest::{ForestParams, IsolationForest};
use crate::metrics;
use crate::scoring::{score_anomalies, ScaledFeatures, ScalingMode, ScoreMatrix};
use crate::selection::{greedy_select, PlotSelection};
use crate::tgraph::{load_anomalies, parse_edges, AnomalyOrigin, AnomalySet, GraphMode, ParseOptions, TGraph};

pub const DEFAULT_BUDGET: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyMode {
    Detected,
    Dictated,
}

impl std::str::FromStr for AnomalyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detected" => Ok(AnomalyMode::Detected),
            "dictated" => Ok(AnomalyMode::Dictated),
            other => Err(Error::InvalidArgument(format!("unknown anomaly mode {other}"))),
        }
    }
}

/// Everything a run depends on. The output directory is not part of the
/// echoed configuration, so moving a run elsewhere does not change its
/// report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub graph: PathBuf,
    pub anomalies: Option<PathBuf>,
    pub mode: AnomalyMode,
    pub top_k: usize,
    pub budget: usize,
    pub trees: usize,
    pub sample: usize,
    pub seed: u64,
    #[serde(serialize_with = "as_display")]
    pub scale: ScalingMode,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(serialize_with = "delimiter_str")]
    pub delimiter: u8,
    pub has_header: bool,
    #[serde(serialize_with = "graph_mode_str")]
    pub graph_mode: GraphMode,
    #[serde(skip)]
    pub dump_scores: bool,
}

fn as_display<S: serde::Serializer>(v: &ScalingMode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(v.as_str())
}

fn delimiter_str<S: serde::Serializer>(v: &u8, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&(*v as char).to_string())
}

fn graph_mode_str<S: serde::Serializer>(v: &GraphMode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match v {
        GraphMode::Unipartite => "unipartite",
        GraphMode::Bipartite => "bipartite",
    })
}

impl RunConfig {
    pub fn new(graph: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        let params = ForestParams::default();
        Self {
            graph: graph.into(),
            anomalies: None,
            mode: AnomalyMode::Detected,
            top_k: 5,
            budget: DEFAULT_BUDGET,
            trees: params.trees,
            sample: params.subsample,
            seed: params.seed,
            scale: ScalingMode::Log1p,
            out: out.into(),
            delimiter: b',',
            has_header: false,
            graph_mode: GraphMode::Unipartite,
            dump_scores: false,
        }
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            trees: self.trees,
            subsample: self.sample,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::InvalidArgument("budget must be at least 1".into()));
        }
        match self.mode {
            AnomalyMode::Dictated if self.anomalies.is_none() => {
                Err(Error::InvalidArgument("dictated mode needs an anomaly list".into()))
            }
            AnomalyMode::Detected if self.top_k < 1 => {
                Err(Error::InvalidArgument("detected mode needs top-k of at least 1".into()))
            }
            _ => self.forest_params().validate(),
        }
    }

    fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            delimiter: self.delimiter,
            has_header: self.has_header,
            mode: self.graph_mode,
        }
    }
}

pub fn load_graph(path: &Path, options: &ParseOptions) -> Result<TGraph> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edges(BufReader::new(file), options)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedNode {
    pub index: usize,
    pub score: f64,
}

/// Fits a forest on all scaled features and returns the `top_k` nodes by
/// score, ties broken by lower node index.
pub fn detect(
    features: &FeatureMatrix,
    params: &ForestParams,
    scaling: ScalingMode,
    top_k: usize,
) -> Result<Vec<RankedNode>> {
    let n = features.rows();
    if top_k < 1 || top_k > n {
        return Err(Error::InvalidArgument(format!(
            "top-k {top_k} must be between 1 and the node count {n}"
        )));
    }
    let data = ScaledFeatures::new(features, scaling);
    let forest = IsolationForest::fit(&data, params)?;
    let mut ranked: Vec<RankedNode> = (0..n)
        .map(|index| {
            Ok(RankedNode {
                index,
                score: forest.score_row(&data, index)?,
            })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    ranked.truncate(top_k);
    Ok(ranked)
}

pub fn ranking_to_anomalies(ranking: &[RankedNode], n: usize) -> Result<AnomalySet> {
    AnomalySet::new(ranking.iter().map(|r| r.index).collect(), AnomalyOrigin::Detected, n)
}

pub fn write_ranking<W: std::io::Write>(out: W, graph: &TGraph, ranking: &[RankedNode], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record(["rank", "node", "score"])?;
    for (r, node) in ranking.iter().enumerate() {
        w.write_record([
            (r + 1).to_string(),
            graph.node_id(node.index).unwrap_or("?").to_string(),
            node.score.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<ranking>", e))?;
    Ok(())
}

/// Loads the graph and ranks its nodes.
pub fn run_detect(config: &RunConfig) -> Result<(TGraph, Vec<RankedNode>)> {
    config.forest_params().validate()?;
    let graph = load_graph(&config.graph, &config.parse_options())?;
    let features = extract_features(&graph);
    let ranking = detect(&features, &config.forest_params(), config.scale, config.top_k)?;
    Ok((graph, ranking))
}

#[derive(Debug, Clone)]
pub struct Explanation {
    pub graph: TGraph,
    pub features: FeatureMatrix,
    pub anomalies: AnomalySet,
    pub scores: ScoreMatrix,
    pub selection: PlotSelection,
}

/// Features, anomalies, scoring and selection, without touching the
/// filesystem beyond reading inputs.
pub fn explain_in_memory(config: &RunConfig) -> Result<(Explanation, Option<Vec<RankedNode>>)> {
    config.validate()?;
    let graph = load_graph(&config.graph, &config.parse_options())?;
    let features = extract_features(&graph);
    let params = config.forest_params();
    let (anomalies, ranking) = match config.mode {
        AnomalyMode::Dictated => {
            let path = config.anomalies.as_deref().expect("validated");
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            (load_anomalies(BufReader::new(file), &graph)?, None)
        }
        AnomalyMode::Detected => {
            let ranking = detect(&features, &params, config.scale, config.top_k)?;
            (ranking_to_anomalies(&ranking, graph.node_count())?, Some(ranking))
        }
    };
    let scores = score_anomalies(&features, &anomalies, &params, config.seed, config.scale)?;
    let selection = greedy_select(&scores, config.budget, config.seed)?;
    Ok((
        Explanation {
            graph,
            features,
            anomalies,
            scores,
            selection,
        },
        ranking,
    ))
}

#[derive(Debug, Clone)]
pub struct ExplainOutput {
    pub explanation: Explanation,
    pub report: ExplanationReport,
    pub files: Vec<PathBuf>,
}

/// Full run: writes one SVG per selected plot, `report.json`,
/// `budget_sweep.csv`, and in detected mode `ranking.csv`.
pub fn run_explain(config: &RunConfig) -> Result<ExplainOutput> {
    let (explanation, ranking) = explain_in_memory(config)?;
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let Explanation {
        graph,
        features,
        anomalies,
        scores,
        selection,
    } = &explanation;
    let node_ids: Vec<&str> = graph.node_ids().collect();
    let names = features.names();
    let mut files = Vec::new();

    let rendered: Vec<(String, String)> = selection
        .selected
        .par_iter()
        .zip(&selection.owners)
        .enumerate()
        .map(|(r, (&j, owners))| {
            let plot = scores.plots()[j];
            let owned: Vec<usize> = owners.iter().map(|&i| scores.anomalies()[i]).collect();
            let options = RenderOptions {
                scaling: config.scale,
                rank: r + 1,
                ..RenderOptions::default()
            };
            let svg = render_plot(features, &node_ids, anomalies.members(), plot, &owned, &options);
            (plot_file_name(r + 1, plot, names), svg)
        })
        .collect();
    for (name, svg) in rendered {
        let path = config.out.join(name);
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }

    let report = ExplanationReport::build(scores, selection, names, &node_ids, config)?;
    let path = config.out.join("report.json");
    report.write(&path)?;
    files.push(path);

    let path = config.out.join("budget_sweep.csv");
    let sweep = metrics::budget_sweep(scores, scores.plot_count())?;
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    metrics::write_sweep(file, &sweep, config.delimiter)?;
    files.push(path);

    if let Some(ranking) = &ranking {
        let path = config.out.join("ranking.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_ranking(file, graph, ranking, config.delimiter)?;
        files.push(path);
    }
    if config.dump_scores {
        let path = config.out.join("scores.csv");
        let ids: Vec<&str> = scores.anomalies().iter().map(|&a| node_ids[a]).collect();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        scores.write_delimited(file, &ids, names, config.delimiter)?;
        files.push(path);
    }

    Ok(ExplainOutput {
        explanation,
        report,
        files,
    })
}
