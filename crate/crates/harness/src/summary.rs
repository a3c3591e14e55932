//! Per-method aggregation across seeds.

use serde::Serialize;

use crate::run::RunOutput;

/// Band used for settling time, relative to the final value.
pub const SETTLING_BAND: f64 = 0.05;
/// Fraction of the final value for the first-crossing time.
pub const CROSSING_FRACTION: f64 = 0.95;

/// Mean and standard deviation of entropy over completed seeds, indexed by update.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCurve {
    pub label: String,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub completed: usize,
    pub failures: Vec<String>,
}

impl MethodCurve {
    pub fn iterations(&self) -> impl Iterator<Item = usize> + '_ {
        1..=self.mean.len()
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }

    pub fn final_sd(&self) -> Option<f64> {
        self.sd.last().copied()
    }
}

/// Groups runs by label in the given order. Shorter runs hold their last value.
pub fn curves(runs: &[RunOutput], labels: &[String]) -> Vec<MethodCurve> {
    labels
        .iter()
        .map(|label| {
            let mine: Vec<&RunOutput> = runs.iter().filter(|r| &r.method == label).collect();
            let failures = mine
                .iter()
                .filter_map(|r| r.error.as_ref().map(|e| format!("seed {}: {e}", r.seed)))
                .collect();
            let series: Vec<Vec<f64>> = mine
                .iter()
                .filter(|r| r.completed() && !r.rows.is_empty())
                .map(|r| r.rows.iter().map(|x| x.entropy_nats).collect())
                .collect();
            let len = series.iter().map(Vec::len).max().unwrap_or(0);
            let mut mean = Vec::with_capacity(len);
            let mut sd = Vec::with_capacity(len);
            for k in 0..len {
                let vals: Vec<f64> = series.iter().map(|s| s[k.min(s.len() - 1)]).collect();
                let n = vals.len() as f64;
                let m = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                mean.push(m);
                sd.push(var.sqrt());
            }
            MethodCurve {
                label: label.clone(),
                mean,
                sd,
                completed: series.len(),
                failures,
            }
        })
        .collect()
}

/// First 1-based update after which the curve stays within `band·|final|` of its final value.
pub fn settling_time(curve: &[f64], band: f64) -> Option<usize> {
    let last = *curve.last()?;
    let tol = band * last.abs();
    let outside = curve.iter().rposition(|&x| (x - last).abs() > tol);
    Some(outside.map_or(1, |k| k + 2))
}

/// First 1-based update at which the curve reaches `fraction·final`.
pub fn crossing_time(curve: &[f64], fraction: f64) -> Option<usize> {
    let target = fraction * *curve.last()?;
    curve.iter().position(|&x| x >= target).map(|k| k + 1)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub completed_runs: usize,
    pub failures: Vec<String>,
    pub updates: usize,
    pub final_mean_entropy: Option<f64>,
    pub final_sd_entropy: Option<f64>,
    pub settling_time: Option<usize>,
    pub crossing_time: Option<usize>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub n_states: usize,
    pub n_actions: usize,
    /// `ln(|S||A|)`, the largest attainable entropy.
    pub max_entropy: f64,
    pub seeds: Vec<u64>,
    pub settling_band: f64,
    pub crossing_fraction: f64,
    pub methods: Vec<MethodSummary>,
}

pub fn summarize(curves: &[MethodCurve]) -> Vec<MethodSummary> {
    curves
        .iter()
        .map(|c| MethodSummary {
            method: c.label.clone(),
            completed_runs: c.completed,
            failures: c.failures.clone(),
            updates: c.mean.len(),
            final_mean_entropy: c.final_mean(),
            final_sd_entropy: c.final_sd(),
            settling_time: settling_time(&c.mean, SETTLING_BAND),
            crossing_time: crossing_time(&c.mean, CROSSING_FRACTION),
        })
        .collect()
}
