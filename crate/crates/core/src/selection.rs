//! Budgeted plot selection.
//!
//! The objective of a plot set `S` is `f(S) = Σ_i max_{j ∈ S} s[i][j]`, the
//! total best score each anomaly receives. It is non-negative, monotone and
//! submodular, so greedy selection is within `1 - 1/e` of the optimum.
//! [`greedy_select`] evaluates it lazily: stale gains are upper bounds on
//! current gains, so a refreshed plot that still outranks the best stale
//! entry is the true greedy choice.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::warn;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scoring::ScoreMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSelection {
    /// Plot indices in selection order.
    pub selected: Vec<usize>,
    pub objective: f64,
    /// `owners[r]` holds the anomaly rows explained by `selected[r]`.
    pub owners: Vec<Vec<usize>>,
    pub budget: usize,
}

impl PlotSelection {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

fn check_plots(scores: &ScoreMatrix, plots: &[usize]) -> Result<()> {
    match plots.iter().find(|&&j| j >= scores.plot_count()) {
        Some(j) => Err(Error::InvalidArgument(format!(
            "plot index {j} out of range for {} plots",
            scores.plot_count()
        ))),
        None => Ok(()),
    }
}

/// Best score of each anomaly over `plots`; zero when `plots` is empty.
fn best_scores(scores: &ScoreMatrix, plots: &[usize]) -> Vec<f64> {
    (0..scores.anomaly_count())
        .map(|i| plots.iter().map(|&j| scores.get(i, j)).fold(0.0, f64::max))
        .collect()
}

#[inline]
fn gain_over(scores: &ScoreMatrix, plot: usize, best: &[f64]) -> f64 {
    best.iter()
        .enumerate()
        .map(|(i, &b)| (scores.get(i, plot) - b).max(0.0))
        .sum()
}

pub fn objective(scores: &ScoreMatrix, plots: &[usize]) -> Result<f64> {
    check_plots(scores, plots)?;
    Ok(best_scores(scores, plots).iter().sum())
}

/// `f(S ∪ {p}) − f(S)`.
pub fn marginal_gain(scores: &ScoreMatrix, plot: usize, selected: &[usize]) -> Result<f64> {
    check_plots(scores, &[plot])?;
    check_plots(scores, selected)?;
    if selected.contains(&plot) {
        return Err(Error::InvalidArgument(format!("plot {plot} is already selected")));
    }
    Ok(gain_over(scores, plot, &best_scores(scores, selected)))
}

/// Max-heap entry: larger gain first, then lower plot index.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub(crate) gain: f64,
    pub(crate) plot: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.plot.cmp(&self.plot))
    }
}

pub(crate) fn effective_budget(scores: &ScoreMatrix, budget: usize) -> Result<usize> {
    if budget < 1 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let l = scores.plot_count();
    if budget > l {
        warn!("budget {budget} exceeds the {l} available plots; selecting all of them");
    }
    Ok(budget.min(l))
}

/// Lazy greedy maximisation of the objective under `|S| ≤ budget`. Ties in
/// gain go to the lower plot index, so the result equals plain greedy with
/// the same rule. Owners are assigned with [`partition_owners`] using
/// `owner_seed`.
pub fn greedy_select(scores: &ScoreMatrix, budget: usize, owner_seed: u64) -> Result<PlotSelection> {
    let target = effective_budget(scores, budget)?;
    let selected = lazy_greedy_order(scores, target);
    finish(scores, selected, budget, owner_seed)
}

/// Selection order of the first `target` lazy-greedy picks.
pub(crate) fn lazy_greedy_order(scores: &ScoreMatrix, target: usize) -> Vec<usize> {
    let k = scores.anomaly_count();
    let mut best = vec![0.0; k];
    let mut queue: BinaryHeap<Candidate> = (0..scores.plot_count())
        .map(|plot| Candidate {
            gain: scores.column(plot).sum(),
            plot,
        })
        .collect();

    let mut selected = Vec::with_capacity(target);
    while selected.len() < target {
        let Some(top) = queue.pop() else { break };
        let refreshed = Candidate {
            gain: gain_over(scores, top.plot, &best),
            plot: top.plot,
        };
        let ranks_top = match queue.peek() {
            Some(next) => refreshed >= *next,
            None => true,
        };
        if ranks_top {
            for (i, b) in best.iter_mut().enumerate() {
                *b = b.max(scores.get(i, refreshed.plot));
            }
            selected.push(refreshed.plot);
        } else {
            queue.push(refreshed);
        }
    }
    selected
}

pub(crate) fn finish(
    scores: &ScoreMatrix,
    selected: Vec<usize>,
    budget: usize,
    owner_seed: u64,
) -> Result<PlotSelection> {
    let objective = objective(scores, &selected)?;
    let owners = partition_owners(scores, &selected, owner_seed)?;
    Ok(PlotSelection {
        selected,
        objective,
        owners,
        budget,
    })
}

/// Assigns each anomaly to the selected plot where it scores highest. Exact
/// ties are broken by a draw from stream `i` of `seed` for anomaly row `i`.
/// Returns one owner list per entry of `selected`, in the same order.
pub fn partition_owners(scores: &ScoreMatrix, selected: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot partition anomalies over an empty plot set".into(),
        ));
    }
    check_plots(scores, selected)?;
    let mut owners = vec![Vec::new(); selected.len()];
    let mut tied = Vec::with_capacity(selected.len());
    for i in 0..scores.anomaly_count() {
        let top = selected
            .iter()
            .map(|&j| scores.get(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
        tied.clear();
        tied.extend((0..selected.len()).filter(|&r| scores.get(i, selected[r]) == top));
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            tied[SplitMix64::stream(seed, i as u64).below(tied.len())]
        };
        owners[winner].push(i);
    }
    Ok(owners)
}
