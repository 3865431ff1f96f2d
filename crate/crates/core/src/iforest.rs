//! Isolation forest detector.
//!
//! Each tree is grown on `min(ψ, n)` points drawn without replacement. A
//! split picks a dimension uniformly among those with a nonzero range in the
//! current subset, then a threshold uniformly inside that range; points below
//! the threshold go left. Growth stops at the height limit `ceil(log2 ψ)`, at
//! a single point, or when every dimension is constant.
//!
//! The anomaly score of `x` is `2^(-E[h(x)] / c(ψ))`, where a path ending in
//! a leaf of size `z` at depth `d` has length `d + c(z)` and
//! `c(z) = 2 H(z - 1) - 2 (z - 1) / z`, with `H(1) = 1` and
//! `H(i) = ln i + γ` otherwise.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// A read-only table of `len() × dims()` finite coordinates.
pub trait Dataset {
    fn len(&self) -> usize;
    fn dims(&self) -> usize;
    fn value(&self, row: usize, dim: usize) -> f64;

    /// Copies the listed rows into `out`, row-major.
    fn gather(&self, rows: &[usize], out: &mut [f64]) {
        let dims = self.dims();
        for (i, &row) in rows.iter().enumerate() {
            for d in 0..dims {
                out[i * dims + d] = self.value(row, d);
            }
        }
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major points.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dims: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dims: usize) -> Result<Self> {
        if dims == 0 || !data.len().is_multiple_of(dims) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not fill rows of {dims}",
                data.len()
            )));
        }
        Ok(Self { data, dims })
    }
}

impl Dataset for Points<'_> {
    fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn value(&self, row: usize, dim: usize) -> f64 {
        self.data[row * self.dims + dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            subsample: 256,
            seed: 42,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees < 1 {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        if self.subsample < 2 {
            return Err(Error::InvalidArgument("subsample size must be at least 2".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

fn harmonic(i: usize) -> f64 {
    if i <= 1 {
        1.0
    } else {
        (i as f64).ln() + EULER_GAMMA
    }
}

/// Average path length of an unsuccessful search in a binary search tree of
/// `z` points.
pub fn average_path_length(z: usize) -> f64 {
    match z {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(z - 1) - 2.0 * (z - 1) as f64 / z as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        dim: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// One isolation tree stored as an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
    height_limit: usize,
}

impl IsolationTree {
    fn grow(sample: &mut [f64], dims: usize, height_limit: usize, rng: &mut SplitMix64) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            height_limit,
        };
        tree.build(sample, dims, 0, rng);
        tree
    }

    /// `rows` is a row-major block of the points reaching this node; it is
    /// partitioned in place.
    fn build(&mut self, rows: &mut [f64], dims: usize, depth: usize, rng: &mut SplitMix64) -> usize {
        let id = self.nodes.len();
        let size = rows.len() / dims;
        self.nodes.push(Node::Leaf { size });
        if depth >= self.height_limit || size <= 1 {
            return id;
        }

        let mut candidates = Vec::with_capacity(dims);
        for d in 0..dims {
            let (lo, hi) = range(rows, dims, d);
            if hi > lo {
                candidates.push((d, lo, hi));
            }
        }
        if candidates.is_empty() {
            return id;
        }
        let (dim, lo, hi) = candidates[rng.below(candidates.len())];
        let mut threshold = lo + rng.next_f64() * (hi - lo);
        if threshold <= lo {
            // rounding on a tiny range; `hi` still separates lo from hi
            threshold = hi;
        }

        let split = partition(rows, dims, dim, threshold);
        let (left_rows, right_rows) = rows.split_at_mut(split * dims);
        let left = self.build(left_rows, dims, depth + 1, rng);
        let right = self.build(right_rows, dims, depth + 1, rng);
        self.nodes[id] = Node::Split {
            dim,
            threshold,
            left,
            right,
        };
        id
    }

    fn path_length<D: Dataset + ?Sized>(&self, data: &D, row: usize) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match self.nodes[node] {
                Node::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => {
                    node = if data.value(row, dim) < threshold { left } else { right };
                    depth += 1;
                }
                Node::Leaf { size } => return depth as f64 + average_path_length(size),
            }
        }
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { size } => Some(*size),
                Node::Split { .. } => None,
            })
            .collect()
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }
}

fn range(rows: &[f64], dims: usize, dim: usize) -> (f64, f64) {
    rows.chunks_exact(dims)
        .map(|r| r[dim])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Moves rows with `row[dim] < threshold` to the front; returns their count.
fn partition(rows: &mut [f64], dims: usize, dim: usize, threshold: f64) -> usize {
    let size = rows.len() / dims;
    let mut front = 0;
    for i in 0..size {
        if rows[i * dims + dim] < threshold {
            if i != front {
                for d in 0..dims {
                    rows.swap(i * dims + d, front * dims + d);
                }
            }
            front += 1;
        }
    }
    front
}

/// First `k` entries of a Fisher-Yates shuffle of `0..n`, tracking only the
/// displaced positions so the cost is O(k) regardless of `n`.
fn sample_without_replacement(n: usize, k: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut displaced: HashMap<usize, usize> = HashMap::with_capacity(2 * k);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = i + rng.below(n - i);
        let at_j = displaced.get(&j).copied().unwrap_or(j);
        let at_i = displaced.get(&i).copied().unwrap_or(i);
        displaced.insert(j, at_i);
        out.push(at_j);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    params: ForestParams,
    trees: Vec<IsolationTree>,
    dims: usize,
    sample_size: usize,
}

impl IsolationForest {
    pub fn fit<D: Dataset + ?Sized>(data: &D, params: &ForestParams) -> Result<Self> {
        params.validate()?;
        let n = data.len();
        let dims = data.dims();
        if n == 0 {
            return Err(Error::EmptyPoints);
        }
        if dims == 0 {
            return Err(Error::InvalidArgument("points have no dimensions".into()));
        }
        let sample_size = params.subsample.min(n);
        let height_limit = (sample_size as f64).log2().ceil() as usize;

        let mut buffer = vec![0.0; sample_size * dims];
        let mut trees = Vec::with_capacity(params.trees);
        for t in 0..params.trees {
            let mut rng = SplitMix64::stream(params.seed, t as u64);
            data.gather(&sample_without_replacement(n, sample_size, &mut rng), &mut buffer);
            trees.push(IsolationTree::grow(&mut buffer, dims, height_limit, &mut rng));
        }
        Ok(Self {
            params: *params,
            trees,
            dims,
            sample_size,
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Per-tree subsample size actually used, `min(ψ, n)`.
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    /// Mean path length of `row` of `data` across trees.
    pub fn mean_path_length<D: Dataset + ?Sized>(&self, data: &D, row: usize) -> f64 {
        self.trees.iter().map(|t| t.path_length(data, row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Score of one row of an arbitrary dataset with matching dimensionality.
    pub fn score_row<D: Dataset + ?Sized>(&self, data: &D, row: usize) -> Result<f64> {
        if data.dims() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                actual: data.dims(),
            });
        }
        Ok(self.score_from_path(self.mean_path_length(data, row)))
    }

    pub fn score(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                actual: point.len(),
            });
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("point has non-finite coordinates".into()));
        }
        let view = Points::new(point, self.dims)?;
        self.score_row(&view, 0)
    }

    /// A forest fit on a single point carries no information; it scores 0.5.
    pub fn score_from_path(&self, mean_path: f64) -> f64 {
        let norm = average_path_length(self.sample_size);
        if norm == 0.0 {
            0.5
        } else {
            (-mean_path / norm).exp2()
        }
    }
}

/// Pluggable scorer: fit on every row of `data`, then score the rows listed
/// in `queries`. Scores must lie in `[0, 1]`, higher meaning more anomalous.
pub trait Detector: Sync {
    fn fit_score<D: Dataset + Sync + ?Sized>(&self, data: &D, queries: &[usize], seed: u64) -> Result<Vec<f64>>;
}

impl Detector for ForestParams {
    fn fit_score<D: Dataset + Sync + ?Sized>(&self, data: &D, queries: &[usize], seed: u64) -> Result<Vec<f64>> {
        let forest = IsolationForest::fit(data, &self.with_seed(seed))?;
        queries.iter().map(|&q| forest.score_row(data, q)).collect()
    }
}
