use serde::{Deserialize, Serialize};

use super::sweep::{Algorithm, CloudSize, SweepRow};

/// Min, max, mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        })
    }
}

/// One line per algorithm and cloud size. Statistics cover converged rows
/// only; `failed` counts the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub size: CloudSize,
    pub rows: usize,
    pub converged: usize,
    pub failed: usize,
    pub min_mm: Option<f64>,
    pub max_mm: Option<f64>,
    pub mean_mm: Option<f64>,
    pub std_mm: Option<f64>,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Algorithm, CloudSize)> = Vec::new();
    for r in rows {
        if !groups.contains(&(r.algorithm, r.size)) {
            groups.push((r.algorithm, r.size));
        }
    }
    groups
        .into_iter()
        .map(|(algorithm, size)| {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.algorithm == algorithm && r.size == size)
                .collect();
            let ok: Vec<f64> = group
                .iter()
                .filter(|r| r.converged)
                .filter_map(|r| r.rms_mm)
                .collect();
            let s = Stats::of(&ok);
            SummaryRow {
                algorithm,
                size,
                rows: group.len(),
                converged: ok.len(),
                failed: group.len() - ok.len(),
                min_mm: s.map(|s| s.min),
                max_mm: s.map(|s| s.max),
                mean_mm: s.map(|s| s.mean),
                std_mm: s.map(|s| s.std),
            }
        })
        .collect()
}
