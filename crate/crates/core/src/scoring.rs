//! Scoring of anomalies in every two-feature subspace.
//!
//! Plot `j` is the `j`-th pair `(x, y)`, `x < y`, in lexicographic order. Its
//! detector is fit on all nodes restricted to those two (scaled) columns and
//! seeded with stream `j` of the base seed, so each plot depends only on its
//! own two columns.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::iforest::{Dataset, Detector};
use crate::rng::SplitMix64;
use crate::tgraph::AnomalySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalingMode {
    #[default]
    Log1p,
    None,
}

impl ScalingMode {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ScalingMode::Log1p => x.ln_1p(),
            ScalingMode::None => x,
        }
    }

    pub fn invert(self, x: f64) -> f64 {
        match self {
            ScalingMode::Log1p => x.exp_m1(),
            ScalingMode::None => x,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScalingMode::Log1p => "log1p",
            ScalingMode::None => "none",
        }
    }
}

impl std::fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log1p" => Ok(ScalingMode::Log1p),
            "none" => Ok(ScalingMode::None),
            other => Err(Error::InvalidArgument(format!("unknown scaling mode {other}"))),
        }
    }
}

/// Every column of a feature matrix, scaled on read.
#[derive(Debug, Clone, Copy)]
pub struct ScaledFeatures<'a> {
    features: &'a FeatureMatrix,
    scaling: ScalingMode,
}

impl<'a> ScaledFeatures<'a> {
    pub fn new(features: &'a FeatureMatrix, scaling: ScalingMode) -> Self {
        Self { features, scaling }
    }
}

impl Dataset for ScaledFeatures<'_> {
    fn len(&self) -> usize {
        self.features.rows()
    }

    fn dims(&self) -> usize {
        self.features.dims()
    }

    fn value(&self, row: usize, dim: usize) -> f64 {
        self.scaling.apply(self.features.get(row, dim))
    }
}

/// Two columns of a feature matrix, scaled on read.
#[derive(Debug, Clone, Copy)]
pub struct PairView<'a> {
    features: &'a FeatureMatrix,
    columns: [usize; 2],
    scaling: ScalingMode,
}

impl<'a> PairView<'a> {
    pub fn new(features: &'a FeatureMatrix, plot: PairPlotId, scaling: ScalingMode) -> Self {
        Self {
            features,
            columns: [plot.feature_x, plot.feature_y],
            scaling,
        }
    }
}

impl Dataset for PairView<'_> {
    fn len(&self) -> usize {
        self.features.rows()
    }

    fn dims(&self) -> usize {
        2
    }

    fn value(&self, row: usize, dim: usize) -> f64 {
        self.scaling.apply(self.features.get(row, self.columns[dim]))
    }

    // Raw loads first, scaling second: the loads are independent and can
    // overlap their cache misses.
    fn gather(&self, rows: &[usize], out: &mut [f64]) {
        let [x, y] = self.columns;
        for (pair, &row) in out.chunks_exact_mut(2).zip(rows) {
            pair[0] = self.features.get(row, x);
            pair[1] = self.features.get(row, y);
        }
        for v in out.iter_mut() {
            *v = self.scaling.apply(*v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairPlotId {
    pub index: usize,
    pub feature_x: usize,
    pub feature_y: usize,
}

/// All `d(d-1)/2` feature pairs in lexicographic order.
pub fn enumerate_pairs(d: usize) -> Result<Vec<PairPlotId>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 features for pair plots, got {d}"
        )));
    }
    let mut pairs = Vec::with_capacity(d * (d - 1) / 2);
    for x in 0..d {
        for y in x + 1..d {
            pairs.push(PairPlotId {
                index: pairs.len(),
                feature_x: x,
                feature_y: y,
            });
        }
    }
    Ok(pairs)
}

/// Row-major k×l scores in `[0, 1]`; row `i` is the `i`-th anomaly, column
/// `j` the `j`-th plot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    values: Vec<f64>,
    k: usize,
    l: usize,
    anomalies: Vec<usize>,
    plots: Vec<PairPlotId>,
}

impl ScoreMatrix {
    /// A bare matrix with no anomaly or plot metadata.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::EmptyAnomalies);
        }
        let l = rows[0].len();
        if l == 0 || rows.iter().any(|r| r.len() != l) {
            return Err(Error::InvalidArgument(
                "score rows must be non-empty and equally long".into(),
            ));
        }
        Self::new(rows.concat(), k, l, (0..k).collect(), Vec::new())
    }

    /// `plots` may be empty; otherwise it must describe all `l` columns.
    pub fn new(values: Vec<f64>, k: usize, l: usize, anomalies: Vec<usize>, plots: Vec<PairPlotId>) -> Result<Self> {
        if k == 0 || l == 0 || values.len() != k * l {
            return Err(Error::InvalidArgument(format!(
                "{} scores do not form a {k}x{l} matrix",
                values.len()
            )));
        }
        if anomalies.len() != k || !(plots.is_empty() || plots.len() == l) {
            return Err(Error::InvalidArgument(
                "score matrix metadata does not match its shape".into(),
            ));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("score {bad} outside [0, 1]")));
        }
        Ok(Self {
            values,
            k,
            l,
            anomalies,
            plots,
        })
    }

    pub fn anomaly_count(&self) -> usize {
        self.k
    }

    pub fn plot_count(&self) -> usize {
        self.l
    }

    #[inline]
    pub fn get(&self, anomaly: usize, plot: usize) -> f64 {
        self.values[anomaly * self.l + plot]
    }

    pub fn row(&self, anomaly: usize) -> &[f64] {
        &self.values[anomaly * self.l..(anomaly + 1) * self.l]
    }

    pub fn column(&self, plot: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.values.iter().skip(plot).step_by(self.l).copied()
    }

    /// Node indices of the anomalies, in row order.
    pub fn anomalies(&self) -> &[usize] {
        &self.anomalies
    }

    pub fn plots(&self) -> &[PairPlotId] {
        &self.plots
    }

    pub fn plot(&self, j: usize) -> Option<&PairPlotId> {
        self.plots.get(j)
    }

    /// Rows are anomaly ids, columns are `fx|fy` plot names.
    pub fn write_delimited<W: Write>(
        &self,
        out: W,
        anomaly_ids: &[&str],
        feature_names: &[String],
        delimiter: u8,
    ) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        let mut header = vec!["anomaly".to_string()];
        for j in 0..self.l {
            header.push(match self.plot(j) {
                Some(p) => format!("{}|{}", feature_names[p.feature_x], feature_names[p.feature_y]),
                None => format!("p{j}"),
            });
        }
        w.write_record(&header)?;
        for i in 0..self.k {
            let mut record = vec![anomaly_ids.get(i).copied().unwrap_or("?").to_string()];
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<scores>", e))?;
        Ok(())
    }
}

/// Scores each anomaly in every pair plot with `detector`.
pub fn score_anomalies<D: Detector>(
    features: &FeatureMatrix,
    anomalies: &AnomalySet,
    detector: &D,
    base_seed: u64,
    scaling: ScalingMode,
) -> Result<ScoreMatrix> {
    if let Some(&bad) = anomalies.members().iter().find(|&&m| m >= features.rows()) {
        return Err(Error::Validation(format!(
            "anomaly index {bad} out of range for {} nodes",
            features.rows()
        )));
    }
    let plots = enumerate_pairs(features.dims())?;
    let columns: Vec<Vec<f64>> = plots
        .par_iter()
        .map(|&plot| {
            let view = PairView::new(features, plot, scaling);
            let seed = SplitMix64::stream(base_seed, plot.index as u64).next_u64();
            detector.fit_score(&view, anomalies.members(), seed)
        })
        .collect::<Result<_>>()?;

    let (k, l) = (anomalies.len(), plots.len());
    let mut values = vec![0.0; k * l];
    for (j, column) in columns.iter().enumerate() {
        for (i, &s) in column.iter().enumerate() {
            values[i * l + j] = s;
        }
    }
    ScoreMatrix::new(values, k, l, anomalies.members().to_vec(), plots)
}
