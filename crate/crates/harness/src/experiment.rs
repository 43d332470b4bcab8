//! Multi-arm, multi-seed experiment runs with CSV and SVG output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use rbo_core::optimizer::{run, Trace};
use rbo_core::linalg::median;

use crate::config::{Arm, ExperimentConfig};
use crate::svg;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub trace: Option<Trace>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    /// `gap` when the optimum is known, otherwise `f_true`.
    pub metric: &'static str,
    pub seeds: Vec<SeedOutcome>,
    pub median: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ArmSummary {
    pub fn final_values(&self) -> Vec<(u64, Option<f64>)> {
        self.seeds
            .iter()
            .map(|s| (s.seed, s.trace.as_ref().and_then(|t| t.records.last()).map(|r| metric_value(self.metric, r))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub arms: Vec<ArmSummary>,
    pub files: Vec<PathBuf>,
}

fn metric_value(metric: &str, r: &rbo_core::TraceRecord) -> f64 {
    if metric == "gap" {
        r.gap.unwrap_or(f64::NAN)
    } else {
        r.f_true
    }
}

/// Per-epoch median, min and max of `metric` over the given traces.
pub fn envelope(traces: &[&Trace], metric: &str) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let epochs = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let mut med = Vec::with_capacity(epochs);
    let mut lo = Vec::with_capacity(epochs);
    let mut hi = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let mut values: Vec<f64> = traces.iter().map(|t| metric_value(metric, &t.records[e])).collect();
        med.push(median(&mut values));
        lo.push(values[0]);
        hi.push(values[values.len() - 1]);
    }
    (med, lo, hi)
}

pub fn trace_file_name(arm: &str, seed: u64) -> String {
    format!("{arm}_seed{seed}.csv")
}

fn run_one(cfg: &ExperimentConfig, arm: &Arm, seed: u64) -> Result<Trace> {
    // A fresh objective per run keeps evaluation counters independent.
    let f = cfg.objective()?;
    let opt = cfg.optimizer(&f, arm, seed)?;
    let start = cfg.start_point(&f)?;
    let (_, trace) = run(&f, &start, &opt)?;
    Ok(trace)
}

/// Runs every (arm, seed) pair and writes one trace CSV per successful run,
/// `summary.csv`, `finals.csv` and optionally `summary.svg` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let arms = if cfg.arms.is_empty() { vec![cfg.default_arm()?] } else { cfg.arms.clone() };
    let metric = if cfg.objective()?.optimum().is_some() { "gap" } else { "f_true" };
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;

    let jobs: Vec<(usize, u64)> = (0..arms.len())
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let results: Vec<Result<Trace>> = jobs
        .par_iter()
        .map(|&(a, seed)| run_one(cfg, &arms[a], seed))
        .collect();

    let mut files = Vec::new();
    let mut summaries = Vec::new();
    let mut results = results.into_iter();
    for arm in &arms {
        let mut seeds = Vec::new();
        for &seed in &cfg.seeds {
            let outcome = match results.next().expect("one result per job") {
                Ok(trace) => {
                    let path = cfg.out.join(trace_file_name(&arm.name, seed));
                    trace
                        .write_csv(fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?)?;
                    files.push(path);
                    SeedOutcome { seed, trace: Some(trace), error: None }
                }
                Err(e) => SeedOutcome { seed, trace: None, error: Some(format!("{e:#}")) },
            };
            seeds.push(outcome);
        }
        let ok: Vec<&Trace> = seeds.iter().filter_map(|s| s.trace.as_ref()).collect();
        let (median, min, max) = envelope(&ok, metric);
        summaries.push(ArmSummary { arm: arm.name.clone(), metric, seeds, median, min, max });
    }

    let summary_path = cfg.out.join("summary.csv");
    write_summary(&summary_path, &summaries)?;
    files.push(summary_path);
    let finals_path = cfg.out.join("finals.csv");
    write_finals(&finals_path, &summaries)?;
    files.push(finals_path);
    if cfg.svg {
        let path = cfg.out.join("summary.svg");
        let series: Vec<(String, Vec<f64>)> = summaries.iter().map(|s| (s.arm.clone(), s.median.clone())).collect();
        fs::write(&path, svg::line_chart(&format!("median {metric} vs epoch"), metric == "gap", &series))?;
        files.push(path);
    }
    Ok(RunSummary { arms: summaries, files })
}

pub fn write_summary(path: &Path, arms: &[ArmSummary]) -> Result<()> {
    let mut out = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(out, "arm,epoch,metric,median,min,max")?;
    for a in arms {
        for e in 0..a.median.len() {
            writeln!(out, "{},{},{},{},{},{}", a.arm, e, a.metric, a.median[e], a.min[e], a.max[e])?;
        }
    }
    Ok(())
}

pub fn write_finals(path: &Path, arms: &[ArmSummary]) -> Result<()> {
    let mut out = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(out, "arm,seed,metric,final,fresh_evals,reused_evals,status")?;
    for a in arms {
        for s in &a.seeds {
            match &s.trace {
                Some(t) => {
                    let last = t.records.last().map(|r| metric_value(a.metric, r)).unwrap_or(f64::NAN);
                    let reused: usize = t.records.iter().map(|r| r.reused_evals).sum();
                    writeln!(out, "{},{},{},{},{},{},ok", a.arm, s.seed, a.metric, last, t.total_fresh_evals(), reused)?;
                }
                None => {
                    let msg = s.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
                    writeln!(out, "{},{},{},,,,failed: {}", a.arm, s.seed, a.metric, msg)?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rbo_core::TraceRecord;
    use nalgebra::DVector;

    fn trace(gaps: &[f64]) -> Trace {
        Trace {
            records: gaps
                .iter()
                .enumerate()
                .map(|(e, g)| TraceRecord {
                    epoch: e,
                    theta: DVector::zeros(1),
                    f_true: -g,
                    f_observed: -g,
                    grad_norm: 0.0,
                    fresh_evals: 1,
                    reused_evals: 0,
                    gap: Some(*g),
                })
                .collect(),
        }
    }

    #[test]
    fn envelope_over_three_seeds() {
        let (a, b, c) = (trace(&[3.0, 1.0]), trace(&[1.0, 2.0]), trace(&[2.0, 3.0]));
        let (med, lo, hi) = envelope(&[&a, &b, &c], "gap");
        assert_eq!(med, vec![2.0, 2.0]);
        assert_eq!(lo, vec![1.0, 1.0]);
        assert_eq!(hi, vec![3.0, 3.0]);
    }
}
