//! The robust blackbox optimization epoch loop.
//!
//! Each epoch selects archive points to reuse, samples the remaining
//! perturbation directions, evaluates the objective (through the noise model)
//! at the iterate and its perturbations, regresses a gradient, takes a
//! projected ascent step and stores everything it evaluated in the archive.
//!
//! Directions for epoch `t` are drawn from sampling stream `t` and noise for
//! epoch `t` from noise stream `t`, so a run is a pure function of its config.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimators::{build_rbo_problem, evaluate_perturbed, mc_from_values, measure, McKind};
use crate::gradient_field::{
    default_gamma, fit_kernel_field, flow_update, reconstruct_field, DEFAULT_KERNEL_REG,
};
use crate::noise::NoiseModel;
use crate::objectives::{DomainSpec, Objective};
use crate::regression::{solve, RegressionSpec};
use crate::sampling::{sample, SamplerKind};
use crate::trust_region::{record_epoch, select_reuse, Archive, TrustRegionPolicy};

/// Default step size outside theorem mode.
pub const DEFAULT_ETA: f64 = 0.01;
/// Default smoothing scale outside theorem mode.
pub const DEFAULT_SIGMA: f64 = 0.1;
/// Archive capacity as a multiple of `k` when none is configured.
pub const DEFAULT_ARCHIVE_FACTOR: usize = 10;

/// A positive scalar sequence indexed by the 0-based epoch `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `base / √(t + 1)`
    InverseSqrt { base: f64 },
    /// `base / (t + 1)`
    Harmonic { base: f64 },
}

impl Schedule {
    pub fn value(&self, t: usize) -> f64 {
        let n = (t + 1) as f64;
        match *self {
            Schedule::Constant(v) => v,
            Schedule::InverseSqrt { base } => base / n.sqrt(),
            Schedule::Harmonic { base } => base / n,
        }
    }

    fn base(&self) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::InverseSqrt { base } | Schedule::Harmonic { base } => base,
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant(v) => write!(f, "{v}"),
            Schedule::InverseSqrt { base } => write!(f, "{base}/sqrt(t+1)"),
            Schedule::Harmonic { base } => write!(f, "{base}/(t+1)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub sigma: Schedule,
    pub eta: Schedule,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules {
            sigma: Schedule::Constant(DEFAULT_SIGMA),
            eta: Schedule::Constant(DEFAULT_ETA),
        }
    }
}

impl Schedules {
    pub fn constant(sigma: f64, eta: f64) -> Result<Self> {
        let s = Schedules {
            sigma: Schedule::Constant(sigma),
            eta: Schedule::Constant(eta),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("σ", &self.sigma), ("η", &self.eta)] {
            let b = s.base();
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid(format!("{name} schedule must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

fn certified(name: &str, v: f64) -> Result<()> {
    if v.is_nan() {
        return Err(Error::invalid(format!("{name} is not certified for this objective")));
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn smoothness_for_sigma(lambda: f64) -> Result<()> {
    if lambda == 0.0 {
        return Err(Error::invalid(
            "λ = 0 leaves the σ schedule undefined; use a constant σ instead",
        ));
    }
    certified("λ", lambda)
}

/// `σ_t = L/(dλ√(t+1))`, `η_t = B/(L√(t+1))`.
pub fn schedules_theorem1(lipschitz: f64, smoothness: f64, diameter: f64, dim: usize) -> Result<Schedules> {
    certified("L", lipschitz)?;
    certified("B", diameter)?;
    smoothness_for_sigma(smoothness)?;
    if dim == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    Ok(Schedules {
        sigma: Schedule::InverseSqrt {
            base: lipschitz / (dim as f64 * smoothness),
        },
        eta: Schedule::InverseSqrt {
            base: diameter / lipschitz,
        },
    })
}

/// `σ_t = L²/(dBμλ(t+1))`, `η_t = 1/(μ(t+1))`.
pub fn schedules_theorem2(
    lipschitz: f64,
    smoothness: f64,
    strong_concavity: f64,
    diameter: f64,
    dim: usize,
) -> Result<Schedules> {
    certified("L", lipschitz)?;
    certified("μ", strong_concavity)?;
    certified("B", diameter)?;
    smoothness_for_sigma(smoothness)?;
    if dim == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    Ok(Schedules {
        sigma: Schedule::Harmonic {
            base: lipschitz * lipschitz / (dim as f64 * diameter * strong_concavity * smoothness),
        },
        eta: Schedule::Harmonic {
            base: 1.0 / strong_concavity,
        },
    })
}

/// Replaces the single ascent step by an Euler-integrated gradient flow
/// through a kernel-interpolated field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub n_steps: usize,
    /// Euler step; `None` uses `η_t / n_steps`.
    pub step: Option<f64>,
    /// RBF bandwidth; `None` uses the median heuristic.
    pub gamma: Option<f64>,
    pub kernel_reg: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            n_steps: 10,
            step: None,
            gamma: None,
            kernel_reg: DEFAULT_KERNEL_REG,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub epochs: usize,
    pub k: usize,
    pub schedules: Schedules,
    pub spec: RegressionSpec,
    pub policy: TrustRegionPolicy,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub noise: NoiseModel,
    /// `None` keeps `10·k` entries.
    pub archive_capacity: Option<usize>,
    pub flow: Option<FlowConfig>,
    /// Replaces the RBO step by a Monte-Carlo baseline; `spec`, `policy` and
    /// `flow` are then unused.
    pub mc_baseline: Option<McKind>,
}

impl OptimizerConfig {
    pub fn new(epochs: usize, k: usize, seed: u64) -> Self {
        OptimizerConfig {
            epochs,
            k,
            schedules: Schedules::default(),
            spec: RegressionSpec::lp(),
            policy: TrustRegionPolicy::default(),
            sampler: SamplerKind::IidGaussian,
            seed,
            noise: NoiseModel::none(),
            archive_capacity: None,
            flow: None,
            mc_baseline: None,
        }
    }

    /// Theorem runs use LP decoding and no reuse.
    pub fn theorem_mode(mut self, schedules: Schedules) -> Self {
        self.schedules = schedules;
        self.spec = RegressionSpec::lp();
        self.policy = TrustRegionPolicy::None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("T must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.schedules.validate()?;
        if let Some(flow) = &self.flow {
            if flow.n_steps == 0 {
                return Err(Error::invalid("flow needs at least one Euler step"));
            }
            if flow.step.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
                return Err(Error::invalid("flow step h must be positive"));
            }
            if flow.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
                return Err(Error::invalid("kernel γ must be positive"));
            }
            if !(flow.kernel_reg >= 0.0 && flow.kernel_reg.is_finite()) {
                return Err(Error::invalid("kernel_reg must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    /// The iterate `θ_t` evaluated during this epoch.
    pub theta: DVector<f64>,
    pub f_true: f64,
    pub f_observed: f64,
    pub grad_norm: f64,
    pub fresh_evals: usize,
    pub reused_evals: usize,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "epoch,f_true,f_observed,grad_norm,fresh_evals,reused_evals,gap";

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_fresh_evals(&self) -> usize {
        self.records.iter().map(|r| r.fresh_evals).sum()
    }

    /// `(1/T) Σ_t gap_t` over the recorded epochs.
    pub fn average_gap(&self) -> Option<f64> {
        let gaps: Option<Vec<f64>> = self.records.iter().map(|r| r.gap).collect();
        let gaps = gaps?;
        if gaps.is_empty() {
            return None;
        }
        Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.gap)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            let gap = r.gap.map(|g| g.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch, r.f_true, r.f_observed, r.grad_norm, r.fresh_evals, r.reused_evals, gap
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Euclidean projection onto the domain.
pub fn project(u: &DVector<f64>, domain: &DomainSpec) -> DVector<f64> {
    domain.project(u)
}

/// Runs `config.epochs` epochs from `theta0` and returns `θ_T` and the trace.
/// `θ_T` is the projected point after the last update and does not appear in
/// the trace.
pub fn run(f: &Objective, theta0: &DVector<f64>, config: &OptimizerConfig) -> Result<(DVector<f64>, Trace)> {
    config.validate()?;
    if theta0.len() != f.dim() {
        return Err(Error::DimensionMismatch(format!(
            "θ₀ has length {}, objective has d={}",
            theta0.len(),
            f.dim()
        )));
    }
    if !f.domain().contains(theta0, 1e-9) {
        return Err(Error::invalid("θ₀ lies outside the domain"));
    }
    let capacity = config.archive_capacity.unwrap_or(DEFAULT_ARCHIVE_FACTOR * config.k);
    let mut archive = Archive::new(capacity);
    let mut theta = theta0.clone();
    // Reuse is ranked by distance to the unprojected target u_t.
    let mut target = theta0.clone();
    let mut trace = Trace::default();
    for t in 0..config.epochs {
        let (next_target, record) =
            epoch(f, &theta, &target, t, config, &mut archive).map_err(|e| e.at_epoch(t))?;
        trace.records.push(record);
        theta = project(&next_target, f.domain());
        target = next_target;
    }
    Ok((theta, trace))
}

fn epoch(
    f: &Objective,
    theta: &DVector<f64>,
    target: &DVector<f64>,
    t: usize,
    config: &OptimizerConfig,
    archive: &mut Archive,
) -> Result<(DVector<f64>, TraceRecord)> {
    let sigma = config.schedules.sigma.value(t);
    let eta = config.schedules.eta.value(t);
    if let Some(kind) = config.mc_baseline {
        return mc_epoch(f, theta, t, config, kind, sigma, eta);
    }

    let reused = select_reuse(archive, target, config.k, &config.policy);
    let fresh_count = config.k - reused.len();
    let ensemble = sample(config.sampler, fresh_count, f.dim(), config.seed, t as u64)?;
    let m = measure(f, theta, sigma, &ensemble, &config.noise, t as u64)?;

    let fresh_rows: Vec<(DVector<f64>, f64)> = (0..fresh_count)
        .map(|i| (ensemble.direction(i) * sigma, m.perturbed_observed[i]))
        .collect();
    let reused_rows: Vec<(DVector<f64>, f64)> = reused.iter().map(|(p, r)| (p - theta, *r)).collect();
    let problem = build_rbo_problem(m.center_observed, &fresh_rows, &reused_rows)?;
    let grad = solve(&problem, &config.spec)?;
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite("recovered gradient".into()));
    }

    let next_target = match &config.flow {
        None => theta + &grad * eta,
        Some(flow) => {
            let mut points = Vec::with_capacity(fresh_count + 1);
            let mut values = Vec::with_capacity(fresh_count + 1);
            points.push(theta.clone());
            values.push(m.center_observed);
            for (disp, value) in &fresh_rows {
                points.push(theta + disp);
                values.push(*value);
            }
            let field = reconstruct_field(&points, &values, &config.spec)?;
            let gamma = flow.gamma.unwrap_or_else(|| default_gamma(field.anchors()));
            let kf = fit_kernel_field(&field, gamma, flow.kernel_reg)?;
            let h = flow.step.unwrap_or(eta / flow.n_steps as f64);
            flow_update(&kf, theta, h, flow.n_steps)?
        }
    };
    let mut rows = fresh_rows;
    rows.extend(reused_rows);
    record_epoch(archive, theta, m.center_observed, &rows)?;

    let record = TraceRecord {
        epoch: t,
        theta: theta.clone(),
        f_true: m.center_true,
        f_observed: m.center_observed,
        grad_norm: grad.norm(),
        fresh_evals: fresh_count + 1,
        reused_evals: reused.len(),
        gap: f.gap(m.center_true),
    };
    Ok((next_target, record))
}

/// Noise stream offset for the second (negated) batch of an antithetic epoch.
const MINUS_STREAM: u64 = 1 << 40;

fn mc_epoch(
    f: &Objective,
    theta: &DVector<f64>,
    t: usize,
    config: &OptimizerConfig,
    kind: McKind,
    sigma: f64,
    eta: f64,
) -> Result<(DVector<f64>, TraceRecord)> {
    let ensemble = sample(config.sampler, config.k, f.dim(), config.seed, t as u64)?;
    // The center is evaluated for every kind; vanilla MC only uses it for logging.
    let m = measure(f, theta, sigma, &ensemble, &config.noise, t as u64)?;
    let mut fresh = config.k + 1;
    let minus = if kind == McKind::Antithetic {
        let raw = evaluate_perturbed(f, theta, -sigma, &ensemble);
        if !raw.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("objective value".into()));
        }
        fresh += config.k;
        config.noise.corrupt_batch(&raw, t as u64 + MINUS_STREAM).0
    } else {
        Vec::new()
    };
    let grad = mc_from_values(kind, &ensemble, sigma, m.center_observed, &m.perturbed_observed, &minus)?;
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite("estimated gradient".into()));
    }
    let record = TraceRecord {
        epoch: t,
        theta: theta.clone(),
        f_true: m.center_true,
        f_observed: m.center_observed,
        grad_norm: grad.norm(),
        fresh_evals: fresh,
        reused_evals: 0,
        gap: f.gap(m.center_true),
    };
    Ok((theta + grad * eta, record))
}
