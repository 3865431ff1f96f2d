//! SVG pair plots and the JSON explanation report.
//!
//! In a plot, ordinary nodes are gray, anomalies explained by that plot are
//! red and labelled, and the remaining anomalies are blue. Markers are drawn
//! gray, then blue, then red so anomalies stay visible. Axes live in the
//! scaled space the detector saw; tick labels show raw feature values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::metrics;
use crate::scoring::{PairPlotId, ScalingMode, ScoreMatrix};
use crate::selection::PlotSelection;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub width: f64,
    pub height: f64,
    pub scaling: ScalingMode,
    pub rank: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 480.0,
            scaling: ScalingMode::Log1p,
            rank: 1,
        }
    }
}

const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    start: f64,
    end: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, start: f64, end: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, start, end }
    }

    fn map(&self, v: f64) -> f64 {
        self.start + (v - self.lo) / (self.hi - self.lo) * (self.end - self.start)
    }
}

/// Renders one pair plot. `anomalies` and `owned` are node indices; `owned`
/// must be a subset of `anomalies`.
pub fn render_plot(
    features: &FeatureMatrix,
    node_ids: &[&str],
    anomalies: &[usize],
    plot: PairPlotId,
    owned: &[usize],
    options: &RenderOptions,
) -> String {
    let scale = options.scaling;
    let px = |row: usize| scale.apply(features.get(row, plot.feature_x));
    let py = |row: usize| scale.apply(features.get(row, plot.feature_y));
    let (w, h) = (options.width, options.height);
    let x_axis = Axis::new((0..features.rows()).map(px), MARGIN_LEFT, w - MARGIN_RIGHT);
    let y_axis = Axis::new((0..features.rows()).map(py), h - MARGIN_BOTTOM, MARGIN_TOP);

    let names = features.names();
    let suffix = match scale {
        ScalingMode::Log1p => " (log1p scale)",
        ScalingMode::None => "",
    };
    let x_name = escape(&names[plot.feature_x]);
    let y_name = escape(&names[plot.feature_y]);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">#{}: {x_name} vs {y_name}</text>"#,
        w / 2.0,
        options.rank
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="36" text-anchor="middle" fill="dimgray">red: explained by this plot, blue: other anomalies</text>"#,
        w / 2.0
    );

    // frame, ticks, labels
    let _ = writeln!(
        svg,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP,
        w - MARGIN_LEFT - MARGIN_RIGHT,
        h - MARGIN_TOP - MARGIN_BOTTOM
    );
    for t in 0..TICKS {
        let frac = t as f64 / (TICKS - 1) as f64;
        let xv = x_axis.lo + frac * (x_axis.hi - x_axis.lo);
        let xp = x_axis.map(xv);
        let base = h - MARGIN_BOTTOM;
        let _ = writeln!(
            svg,
            r#"<line x1="{xp:.2}" y1="{base:.2}" x2="{xp:.2}" y2="{:.2}" stroke="black"/><text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            base + 5.0,
            base + 18.0,
            tick_label(scale.invert(xv))
        );
        let yv = y_axis.lo + frac * (y_axis.hi - y_axis.lo);
        let yp = y_axis.map(yv);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{yp:.2}" x2="{:.2}" y2="{yp:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT,
            MARGIN_LEFT - 8.0,
            yp + 4.0,
            tick_label(scale.invert(yv))
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{x_name}{suffix}</text>"#,
        (MARGIN_LEFT + w - MARGIN_RIGHT) / 2.0,
        h - 16.0
    );
    let ymid = (MARGIN_TOP + h - MARGIN_BOTTOM) / 2.0;
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{ymid:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {ymid:.1})">{y_name}{suffix}</text>"#
    );

    let is_anomaly = {
        let mut flags = vec![false; features.rows()];
        for &a in anomalies {
            flags[a] = true;
        }
        flags
    };
    let is_owned = {
        let mut flags = vec![false; features.rows()];
        for &a in owned {
            flags[a] = true;
        }
        flags
    };

    let _ = writeln!(svg, r#"<g class="normal" fill="gray" fill-opacity="0.5">"#);
    for row in (0..features.rows()).filter(|&r| !is_anomaly[r]) {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#,
            x_axis.map(px(row)),
            y_axis.map(py(row))
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="other-anomalies" fill="blue">"#);
    for &row in anomalies.iter().filter(|&&r| !is_owned[r]) {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4"/>"#,
            x_axis.map(px(row)),
            y_axis.map(py(row))
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="explained-anomalies" fill="red">"#);
    for &row in owned {
        let (cx, cy) = (x_axis.map(px(row)), y_axis.map(py(row)));
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4.5"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            cx + 6.0,
            cy - 6.0,
            escape(node_ids.get(row).copied().unwrap_or("?"))
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

/// File name of the plot at 1-based `rank`.
pub fn plot_file_name(rank: usize, plot: PairPlotId, feature_names: &[String]) -> String {
    format!(
        "plot_{rank}_{}_{}.svg",
        feature_names[plot.feature_x], feature_names[plot.feature_y]
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNode {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotEntry {
    pub rank: usize,
    pub plot_index: usize,
    pub feature_x: String,
    pub feature_y: String,
    pub file: String,
    /// Anomalies explained by this plot, with their score in it.
    pub owned: Vec<ScoredNode>,
    /// Every anomaly's score in this plot, in anomaly order.
    pub scores: Vec<ScoredNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub anomalies: Vec<String>,
    pub budget: usize,
    pub config: Value,
    pub ideal_incrimination: f64,
    pub incrimination: f64,
    pub objective: f64,
    pub plots: Vec<PlotEntry>,
}

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

impl ExplanationReport {
    /// `scores` must carry plot metadata.
    pub fn build<C: Serialize>(
        scores: &ScoreMatrix,
        selection: &PlotSelection,
        feature_names: &[String],
        node_ids: &[&str],
        config: &C,
    ) -> Result<Self> {
        let id = |row: usize| node_ids[scores.anomalies()[row]].to_string();
        let mut plots = Vec::with_capacity(selection.len());
        for (r, (&j, owners)) in selection.selected.iter().zip(&selection.owners).enumerate() {
            let plot = *scores
                .plot(j)
                .ok_or_else(|| Error::InvalidArgument(format!("score matrix has no metadata for plot {j}")))?;
            plots.push(PlotEntry {
                rank: r + 1,
                plot_index: j,
                feature_x: feature_names[plot.feature_x].clone(),
                feature_y: feature_names[plot.feature_y].clone(),
                file: plot_file_name(r + 1, plot, feature_names),
                owned: owners
                    .iter()
                    .map(|&i| ScoredNode {
                        id: id(i),
                        score: round_sig9(scores.get(i, j)),
                    })
                    .collect(),
                scores: (0..scores.anomaly_count())
                    .map(|i| ScoredNode {
                        id: id(i),
                        score: round_sig9(scores.get(i, j)),
                    })
                    .collect(),
            });
        }
        let k = scores.anomaly_count() as f64;
        Ok(Self {
            anomalies: (0..scores.anomaly_count()).map(id).collect(),
            budget: selection.budget,
            config: round_floats(serde_json::to_value(config)?),
            ideal_incrimination: round_sig9(metrics::ideal_incrimination(scores)),
            incrimination: round_sig9(selection.objective / k),
            objective: round_sig9(selection.objective),
            plots,
        })
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let value = sort_keys(serde_json::to_value(self)?);
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

fn round_floats(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|f| serde_json::Number::from_f64(round_sig9(f)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::enumerate_pairs;
    use crate::selection::greedy_select;

    fn small_features() -> FeatureMatrix {
        FeatureMatrix::new(vec![1.0, 2.0, 3.0, 4.0, 50.0, 60.0], vec!["a".into(), "b".into()]).unwrap()
    }

    fn count(svg: &str, class: &str) -> usize {
        let start = svg.find(&format!(r#"<g class="{class}""#)).unwrap();
        let end = start + svg[start..].find("</g>").unwrap();
        svg[start..end].matches("<circle").count()
    }

    #[test]
    fn one_owned_anomaly() {
        let f = small_features();
        let plot = enumerate_pairs(2).unwrap()[0];
        let svg = render_plot(&f, &["x", "y", "z"], &[2], plot, &[2], &RenderOptions::default());
        assert_eq!(count(&svg, "explained-anomalies"), 1);
        assert_eq!(count(&svg, "other-anomalies"), 0);
        assert_eq!(count(&svg, "normal"), 2);
        assert!(svg.contains(">z</text>"));
    }

    #[test]
    fn owned_and_other_anomaly() {
        let f = small_features();
        let plot = enumerate_pairs(2).unwrap()[0];
        let svg = render_plot(&f, &["x", "y", "z"], &[0, 2], plot, &[0], &RenderOptions::default());
        assert_eq!(count(&svg, "explained-anomalies"), 1);
        assert_eq!(count(&svg, "other-anomalies"), 1);
        assert_eq!(count(&svg, "normal"), 1);
        // red after blue after gray
        let (g, b, r) = (
            svg.find("class=\"normal\"").unwrap(),
            svg.find("class=\"other-anomalies\"").unwrap(),
            svg.find("class=\"explained-anomalies\"").unwrap(),
        );
        assert!(g < b && b < r);
    }

    #[test]
    fn labels_escaped_and_constant_axes() {
        let f = FeatureMatrix::new(vec![1.0, 1.0, 1.0, 1.0], vec!["a".into(), "b".into()]).unwrap();
        let plot = enumerate_pairs(2).unwrap()[0];
        let svg = render_plot(&f, &["<x>", "y&"], &[0], plot, &[0], &RenderOptions::default());
        assert!(svg.contains("&lt;x&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(12.5), "12.5");
        assert_eq!(tick_label(3.0), "3");
        assert_eq!(tick_label(250000.0), "2.50e5");
    }

    #[test]
    fn sig9_rounding() {
        assert_eq!(round_sig9(0.123456789123), 0.123456789);
        assert_eq!(round_sig9(2.9000000000000004), 2.9);
        assert_eq!(round_sig9(0.0), 0.0);
    }

    fn report_fixture() -> (ScoreMatrix, PlotSelection, Vec<String>) {
        let plots = enumerate_pairs(3).unwrap();
        let scores = ScoreMatrix::new(vec![0.9, 0.2, 0.1, 0.3, 0.8, 0.2], 2, 3, vec![1, 0], plots).unwrap();
        let selection = greedy_select(&scores, 2, 0).unwrap();
        (scores, selection, vec!["f0".into(), "f1".into(), "f2".into()])
    }

    #[test]
    fn report_shape_and_sorted_keys() {
        let (scores, selection, names) = report_fixture();
        let report = ExplanationReport::build(
            &scores,
            &selection,
            &names,
            &["n0", "n1"],
            &serde_json::json!({"seed": 1}),
        )
        .unwrap();
        assert_eq!(report.plots.len(), 2);
        assert_eq!(report.plots.iter().map(|p| p.owned.len()).sum::<usize>(), 2);
        assert_eq!(report.anomalies, vec!["n1", "n0"]);
        assert_eq!(report.objective, round_sig9(selection.objective));
        assert_eq!(report.plots[0].file, "plot_1_f0_f1.svg");

        let json = report.to_json().unwrap();
        let top: Vec<&str> = json
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        let mut sorted = top.clone();
        sorted.sort_unstable();
        assert_eq!(top, sorted);
    }

    #[test]
    fn empty_owner_list_still_listed() {
        // both anomalies peak in plot 0; plot 1 owns nothing
        let plots = enumerate_pairs(3).unwrap()[..2].to_vec();
        let scores = ScoreMatrix::new(vec![0.9, 0.1, 0.8, 0.2], 2, 2, vec![0, 1], plots).unwrap();
        let selection = greedy_select(&scores, 2, 0).unwrap();
        let names = vec!["f0".to_string(), "f1".to_string(), "f2".to_string()];
        let report = ExplanationReport::build(&scores, &selection, &names, &["a", "b"], &()).unwrap();
        assert_eq!(report.plots.len(), 2);
        assert!(report.plots[1].owned.is_empty());
    }

    #[test]
    fn report_round_trip_recomputes_objective() {
        let (scores, selection, names) = report_fixture();
        let report = ExplanationReport::build(&scores, &selection, &names, &["n0", "n1"], &()).unwrap();
        let parsed: ExplanationReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        let k = parsed.anomalies.len();
        let recomputed: f64 = (0..k)
            .map(|i| parsed.plots.iter().map(|p| p.scores[i].score).fold(0.0, f64::max))
            .sum();
        assert!((recomputed - parsed.objective).abs() <= 1e-8 * parsed.objective.abs());
    }
}
