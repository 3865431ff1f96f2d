//! Explanation quality: incrimination, the redundancy-blind baseline, and
//! budget sweeps.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scoring::ScoreMatrix;
use crate::selection::{self, Candidate, PlotSelection};

/// Average best score per anomaly, `f(S) / k`.
pub fn incrimination(scores: &ScoreMatrix, plots: &[usize]) -> Result<f64> {
    Ok(selection::objective(scores, plots)? / scores.anomaly_count() as f64)
}

/// Highest achievable incrimination, reached by selecting every plot.
pub fn ideal_incrimination(scores: &ScoreMatrix) -> f64 {
    let all: Vec<usize> = (0..scores.plot_count()).collect();
    let total: f64 = (0..scores.anomaly_count())
        .map(|i| all.iter().map(|&j| scores.get(i, j)).fold(0.0, f64::max))
        .sum();
    total / scores.anomaly_count() as f64
}

/// Picks the `budget` plots with the largest column sums (ties to the lower
/// index) without regard to which anomalies they explain.
pub fn naive_select(scores: &ScoreMatrix, budget: usize, owner_seed: u64) -> Result<PlotSelection> {
    let target = selection::effective_budget(scores, budget)?;
    let mut ranked: Vec<Candidate> = (0..scores.plot_count())
        .map(|plot| Candidate {
            gain: scores.column(plot).sum(),
            plot,
        })
        .collect();
    ranked.sort_by(|a, b| b.cmp(a));
    let selected = ranked.iter().take(target).map(|c| c.plot).collect();
    selection::finish(scores, selected, budget, owner_seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncriminationReport {
    pub budget: usize,
    pub objective: f64,
    pub incrimination: f64,
    pub ideal: f64,
    /// Incrimination of [`naive_select`] at the same budget.
    pub naive_incrimination: f64,
}

/// Reports for budgets `1..=max_budget` (capped at the plot count). Greedy
/// selections are nested, so one greedy pass over the largest budget gives
/// every prefix.
pub fn budget_sweep(scores: &ScoreMatrix, max_budget: usize) -> Result<Vec<IncriminationReport>> {
    if max_budget < 1 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let top = max_budget.min(scores.plot_count());
    let order = selection::lazy_greedy_order(scores, top);
    let ideal = ideal_incrimination(scores);
    let mut naive_order: Vec<Candidate> = (0..scores.plot_count())
        .map(|plot| Candidate {
            gain: scores.column(plot).sum(),
            plot,
        })
        .collect();
    naive_order.sort_by(|a, b| b.cmp(a));
    let naive_order: Vec<usize> = naive_order.iter().map(|c| c.plot).collect();

    (1..=top)
        .map(|b| {
            let objective = selection::objective(scores, &order[..b])?;
            Ok(IncriminationReport {
                budget: b,
                objective,
                incrimination: objective / scores.anomaly_count() as f64,
                ideal,
                naive_incrimination: incrimination(scores, &naive_order[..b])?,
            })
        })
        .collect()
}

pub fn write_sweep<W: Write>(out: W, reports: &[IncriminationReport], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record(["budget", "objective", "incrimination", "ideal", "naive_incrimination"])?;
    for r in reports {
        w.write_record([
            r.budget.to_string(),
            r.objective.to_string(),
            r.incrimination.to_string(),
            r.ideal.to_string(),
            r.naive_incrimination.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::greedy_select;

    fn matrix(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn incrimination_extremes() {
        let m = matrix(&[&[0.2, 0.6], &[0.8, 0.4]]);
        assert_eq!(incrimination(&m, &[]).unwrap(), 0.0);
        assert_eq!(incrimination(&m, &[0, 1]).unwrap(), ideal_incrimination(&m));
        assert_eq!(ideal_incrimination(&m), (0.6 + 0.8) / 2.0);
        assert_eq!(incrimination(&m, &[1]).unwrap(), (0.6 + 0.4) / 2.0);
    }

    #[test]
    fn naive_first_pick_matches_greedy() {
        let m = matrix(&[&[0.2, 0.6, 0.5], &[0.8, 0.4, 0.45]]);
        assert_eq!(
            naive_select(&m, 1, 0).unwrap().selected,
            greedy_select(&m, 1, 0).unwrap().selected
        );
    }

    #[test]
    fn duplicate_columns_split_greedy_and_naive() {
        // plots 0 and 1 identical and dominant; plot 2 covers the second anomaly
        let m = matrix(&[&[0.9, 0.9, 0.1], &[0.3, 0.3, 0.8]]);
        let g = greedy_select(&m, 2, 0).unwrap();
        let n = naive_select(&m, 2, 0).unwrap();
        assert_eq!(g.selected, vec![0, 2]);
        assert_eq!(n.selected, vec![0, 1]);
        assert_eq!(selection::marginal_gain(&m, 1, &[0]).unwrap(), 0.0);
        assert!(g.objective > n.objective);
    }

    #[test]
    fn sweep_is_monotone_and_hits_ideal() {
        let m = matrix(&[&[0.9, 0.9, 0.1, 0.3], &[0.3, 0.3, 0.8, 0.2], &[0.1, 0.2, 0.3, 0.7]]);
        let sweep = budget_sweep(&m, 10).unwrap();
        assert_eq!(sweep.len(), 4);
        assert!(sweep.windows(2).all(|w| w[0].incrimination <= w[1].incrimination));
        assert_eq!(sweep[3].incrimination, sweep[3].ideal);
        for r in &sweep {
            let g = greedy_select(&m, r.budget, 0).unwrap();
            assert_eq!(r.objective, g.objective);
            assert!(r.incrimination <= r.ideal);
        }
        let mut out = Vec::new();
        write_sweep(&mut out, &sweep, b',').unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 5);
    }
}
