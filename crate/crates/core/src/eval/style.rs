//! Per-style, per-label score summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repository::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub style: String,
    pub label: Label,
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; 0 for a single value.
    pub std: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    /// Fewer than two values.
    pub degenerate: bool,
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(style: &str, label: Label, values: &[f64]) -> CellSummary {
    let n = values.len();
    if n == 0 {
        return CellSummary {
            style: style.to_owned(),
            label,
            n,
            mean: None,
            std: None,
            q1: None,
            median: None,
            q3: None,
            degenerate: true,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    CellSummary {
        style: style.to_owned(),
        label,
        n,
        mean: Some(mean),
        std: Some(std),
        q1: Some(quantile(&sorted, 0.25)),
        median: Some(quantile(&sorted, 0.5)),
        q3: Some(quantile(&sorted, 0.75)),
        degenerate: n < 2,
    }
}

/// One row per (style, label) for every style seen, human first.
pub fn style_report<'a, I>(items: I) -> Vec<CellSummary>
where
    I: IntoIterator<Item = (&'a str, Label, f64)>,
{
    let mut cells: BTreeMap<&str, [Vec<f64>; 2]> = BTreeMap::new();
    for (style, label, score) in items {
        cells.entry(style).or_default()[usize::from(label.bit())].push(score);
    }
    cells
        .into_iter()
        .flat_map(|(style, [ai, human])| {
            [
                summarize(style, Label::Human, &human),
                summarize(style, Label::Ai, &ai),
            ]
        })
        .collect()
}

const NA: &str = "n/a";

pub fn style_report_csv(cells: &[CellSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |v: Option<f64>| v.map_or_else(|| NA.to_owned(), |x| format!("{x:.6}"));
    w.write_record(["style", "label", "n", "mean", "std", "q1", "median", "q3", "degenerate"])
        .map_err(|e| Error::Parse(e.to_string()))?;
    for c in cells {
        w.write_record([
            c.style.clone(),
            c.label.bit().to_string(),
            c.n.to_string(),
            fmt(c.mean),
            fmt(c.std),
            fmt(c.q1),
            fmt(c.median),
            fmt(c.q3),
            c.degenerate.to_string(),
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_value_cell() {
        let rows = style_report([("news", Label::Human, -0.9), ("news", Label::Human, -0.2), ("news", Label::Human, 0.5)]);
        let human = &rows[0];
        assert_eq!(human.label, Label::Human);
        assert!((human.mean.unwrap() + 0.2).abs() < 1e-12);
        assert!((human.std.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(human.median, Some(-0.2));
        assert!((human.q1.unwrap() + 0.55).abs() < 1e-12);
        assert!(!human.degenerate);
    }

    #[test]
    fn single_and_empty_cells() {
        let rows = style_report([("a", Label::Ai, 1.5)]);
        assert_eq!(rows.len(), 2);
        let (human, ai) = (&rows[0], &rows[1]);
        assert_eq!(human.n, 0);
        assert!(human.mean.is_none() && human.degenerate);
        assert_eq!(ai.std, Some(0.0));
        assert!(ai.degenerate);
        let csv = style_report_csv(&rows).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "style,label,n,mean,std,q1,median,q3,degenerate");
        assert_eq!(lines[1], "a,1,0,n/a,n/a,n/a,n/a,n/a,true");
        assert_eq!(lines[2], "a,0,1,1.500000,0.000000,1.500000,1.500000,1.500000,true");
    }
}
