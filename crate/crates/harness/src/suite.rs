//! The `suite` driver: acceptance criteria, the corruption robustness grid
//! and the rerun determinism check.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use rbo_core::linalg::median;
use rbo_core::objectives::objective_by_name;
use rbo_core::optimizer::{run, OptimizerConfig, Schedules};
use rbo_core::{CorruptionMode, NoiseModel, RegressionSpec, TrustRegionPolicy};

use crate::acceptance::{run_criteria, CriterionReport};

pub const ROBUSTNESS_RHOS: [f64; 5] = [0.0, 0.1, 0.2, 0.239, 0.3];
const ROBUSTNESS_SEEDS: [u64; 3] = [1, 2, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub rho: f64,
    pub spec: &'static str,
    pub median_final_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
    pub checks: Vec<Check>,
}

fn robustness_spec(name: &str) -> RegressionSpec {
    match name {
        "ridge" => RegressionSpec::ridge(1e-4).expect("positive α"),
        _ => RegressionSpec::lp(),
    }
}

/// Final optimality gap of ridge- and LP-based RBO on `quadratic-d10` across
/// corruption fractions, median over three seeds.
pub fn noise_robustness_suite(dir: &Path) -> Result<RobustnessReport> {
    let f = objective_by_name("quadratic-d10")?;
    let opt = f.optimum().expect("quadratic has an optimum").point.clone();
    let start = -&opt / opt.norm();
    let mut jobs = Vec::new();
    for rho in ROBUSTNESS_RHOS {
        for spec in ["ridge", "lp"] {
            for seed in ROBUSTNESS_SEEDS {
                jobs.push((rho, spec, seed));
            }
        }
    }
    let gaps: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(rho, spec, seed)| {
            let mut cfg = OptimizerConfig::new(200, 100, seed);
            cfg.spec = robustness_spec(spec);
            cfg.policy = TrustRegionPolicy::None;
            cfg.schedules = Schedules::constant(0.1, 0.05)?;
            let mode = if rho > 0.0 { CorruptionMode::HugeConstant(1e6) } else { CorruptionMode::None };
            cfg.noise = NoiseModel::new(rho, mode, 0.0, 500 + seed)?.with_protect_center(true);
            let (_, trace) = run(&f, &start, &cfg)?;
            Ok(trace.final_gap().unwrap_or(f64::NAN))
        })
        .collect();
    let gaps: Vec<f64> = gaps.into_iter().collect::<Result<_>>()?;

    let mut csv = String::from("rho,spec,seed,final_gap\n");
    for ((rho, spec, seed), g) in jobs.iter().zip(&gaps) {
        csv.push_str(&format!("{rho},{spec},{seed},{g:e}\n"));
    }
    fs::write(dir.join("robustness.csv"), csv).context("writing robustness.csv")?;

    let mut rows = Vec::new();
    for (chunk, job) in gaps.chunks(ROBUSTNESS_SEEDS.len()).zip(jobs.chunks(ROBUSTNESS_SEEDS.len())) {
        let mut values = chunk.to_vec();
        rows.push(RobustnessRow {
            rho: job[0].0,
            spec: job[0].1,
            median_final_gap: median(&mut values),
        });
    }
    let gap_of = |rho: f64, spec: &str| {
        rows.iter()
            .find(|r| r.rho == rho && r.spec == spec)
            .map(|r| r.median_final_gap)
            .unwrap_or(f64::NAN)
    };
    let (r0, l0) = (gap_of(0.0, "ridge"), gap_of(0.0, "lp"));
    let (r2, l2) = (gap_of(0.2, "ridge"), gap_of(0.2, "lp"));
    let clean_ratio = r0.max(l0) / r0.min(l0);
    let checks = vec![
        Check {
            name: "robustness rho=0".into(),
            passed: clean_ratio <= 2.0,
            detail: format!("ridge {r0:.3e} vs lp {l0:.3e} (ratio {clean_ratio:.3}, at most 2)"),
        },
        Check {
            name: "robustness rho=0.2".into(),
            passed: l2 <= 0.1 * r2,
            detail: format!("lp {l2:.3e} vs ridge {r2:.3e} (lp must be at most 0.1x ridge)"),
        },
    ];
    Ok(RobustnessReport { rows, checks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub criteria: Vec<CriterionReport>,
    pub robustness: Option<RobustnessReport>,
    pub robustness_error: Option<String>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
            && self.robustness_error.is_none()
            && self.robustness.as_ref().is_some_and(|r| r.checks.iter().all(|c| c.passed))
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.criteria.iter().map(|c| c.to_string()).collect();
        if let Some(r) = &self.robustness {
            for row in &r.rows {
                out.push(format!("robustness rho={:<5} {:<5} median final gap {:.3e}", row.rho, row.spec, row.median_final_gap));
            }
            for c in &r.checks {
                out.push(format!("{} [{}]: {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail));
            }
        }
        if let Some(e) = &self.robustness_error {
            out.push(format!("robustness [FAIL]: {e}"));
        }
        out
    }
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Byte-compares the CSV files of two output directories.
pub fn compare_outputs(a: &Path, b: &Path) -> Result<(usize, Vec<String>)> {
    let fa = csv_files(a)?;
    let fb = csv_files(b)?;
    let mut mismatches = Vec::new();
    let names = |v: &[PathBuf]| v.iter().filter_map(|p| p.file_name().map(|n| n.to_owned())).collect::<Vec<_>>();
    if names(&fa) != names(&fb) {
        mismatches.push("different file sets".to_string());
    }
    for p in &fa {
        let name = p.file_name().expect("file name");
        let other = b.join(name);
        if fs::read(p)? != fs::read(&other).unwrap_or_default() {
            mismatches.push(name.to_string_lossy().into_owned());
        }
    }
    Ok((fa.len(), mismatches))
}

fn run_pass(dir: &Path) -> Result<(Vec<CriterionReport>, Result<RobustnessReport>)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let criteria = run_criteria(dir);
    let robustness = noise_robustness_suite(dir);
    Ok((criteria, robustness))
}

/// Runs everything into `out/run1`, again into `out/run2`, and reports the
/// first pass plus the determinism comparison as criterion 10.
pub fn run_suite(out: &Path) -> Result<SuiteReport> {
    let first = out.join("run1");
    let second = out.join("run2");
    let (mut criteria, robustness) = run_pass(&first)?;
    let started = Instant::now();
    let _ = run_pass(&second)?;
    let (files, mismatches) = compare_outputs(&first, &second)?;
    criteria.push(CriterionReport {
        id: 10,
        title: "determinism",
        passed: files > 0 && mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("{files} CSV files byte-identical across two runs")
        } else {
            format!("{} of {files} CSV files differ: {}", mismatches.len(), mismatches.join(" "))
        },
        seconds: started.elapsed().as_secs_f64(),
        limit_seconds: f64::INFINITY,
    });
    let (robustness, robustness_error) = match robustness {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(format!("{e:#}"))),
    };
    Ok(SuiteReport { criteria, robustness, robustness_error })
}
