//! Experiment configuration: a flat `key = value` format with `[section]`
//! headers. Every key can also be set from the command line as
//! `section.key=value`.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use rbo_core::estimators::McKind;
use rbo_core::objectives::{objective_by_name, Objective};
use rbo_core::optimizer::{schedules_theorem1, schedules_theorem2, FlowConfig, OptimizerConfig, Schedules};
use rbo_core::{CorruptionMode, NoiseModel, RegressionSpec, SamplerKind, TrustRegionPolicy};

/// Estimator used by one comparison arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmKind {
    Rbo(RegressionSpec),
    Mc(McKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub name: String,
    pub kind: ArmKind,
}

impl FromStr for ArmKind {
    type Err = anyhow::Error;

    /// `rbo:<regressor>[:alpha]`, `vanilla`, `fd` or `antithetic`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match parts.next() {
            Some("rbo") => {
                let name = parts.next().unwrap_or("lp");
                let alpha = match parts.next() {
                    Some(a) => a.parse().with_context(|| format!("alpha `{a}` in arm `{s}`"))?,
                    None => default_alpha(name),
                };
                Ok(ArmKind::Rbo(RegressionSpec::from_name(name, alpha)?))
            }
            Some(other) => Ok(ArmKind::Mc(other.parse()?)),
            None => bail!("empty arm"),
        }
    }
}

fn default_alpha(regressor: &str) -> f64 {
    if regressor == "lp" { 0.0 } else { 0.01 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleChoice {
    Constant,
    Theorem1,
    Theorem2,
}

impl FromStr for ScheduleChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleChoice::Constant),
            "theorem1" => Ok(ScheduleChoice::Theorem1),
            "theorem2" => Ok(ScheduleChoice::Theorem2),
            other => bail!("unknown schedule `{other}` (expected constant, theorem1 or theorem2)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    Zero,
    /// Boundary point of the ball opposite the known optimum.
    Opposite,
    Explicit(Vec<f64>),
}

impl FromStr for StartPoint {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(StartPoint::Zero),
            "opposite" => Ok(StartPoint::Opposite),
            list => Ok(StartPoint::Explicit(
                list.split(',')
                    .map(|x| x.trim().parse::<f64>().with_context(|| format!("start coordinate `{x}`")))
                    .collect::<Result<_>>()?,
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub objective: String,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub svg: bool,
    pub start: StartPoint,

    pub epochs: usize,
    pub k: usize,
    pub sampler: SamplerKind,
    pub sigma: f64,
    pub eta: f64,
    pub schedule: ScheduleChoice,
    pub regressor: String,
    pub alpha: Option<f64>,
    pub estimator: String,
    pub trust_region: TrustRegionPolicy,
    pub archive_capacity: Option<usize>,

    pub rho: f64,
    pub mode: Option<CorruptionMode>,
    pub eps: f64,
    pub protect_center: bool,

    pub flow: bool,
    pub flow_steps: usize,
    pub flow_h: Option<f64>,
    pub kernel_gamma: Option<f64>,
    pub kernel_reg: f64,

    pub arms: Vec<Arm>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let flow = FlowConfig::default();
        ExperimentConfig {
            objective: "quadratic-d10".into(),
            seeds: vec![0],
            out: PathBuf::from("rbo-out"),
            svg: false,
            start: StartPoint::Zero,
            epochs: 100,
            k: 20,
            sampler: SamplerKind::IidGaussian,
            sigma: rbo_core::optimizer::DEFAULT_SIGMA,
            eta: rbo_core::optimizer::DEFAULT_ETA,
            schedule: ScheduleChoice::Constant,
            regressor: "lp".into(),
            alpha: None,
            estimator: "rbo".into(),
            trust_region: TrustRegionPolicy::default(),
            archive_capacity: None,
            rho: 0.0,
            mode: None,
            eps: 0.0,
            protect_center: false,
            flow: false,
            flow_steps: flow.n_steps,
            flow_h: None,
            kernel_gamma: None,
            kernel_reg: flow.kernel_reg,
            arms: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("`{key}` = `{value}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => bail!("`{key}` expects on/off, got `{value}`"),
    }
}

impl ExperimentConfig {
    pub fn from_ini(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            cfg.set(&section, key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(cfg)
    }

    /// Applies `section.key=value`.
    pub fn set_dotted(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{assignment}` is not section.key=value"))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| anyhow!("override key `{path}` is not section.key"))?;
        self.set(section.trim(), key.trim(), value.trim())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("run", "objective") => self.objective = value.to_string(),
            ("run", "seeds") => {
                self.seeds = value
                    .split(',')
                    .map(|s| parse::<u64>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            ("run", "out") => self.out = PathBuf::from(value),
            ("run", "svg") => self.svg = parse_bool(key, value)?,
            ("run", "start") => self.start = value.parse()?,

            ("optimizer", "epochs") => self.epochs = parse(key, value)?,
            ("optimizer", "k") => self.k = parse(key, value)?,
            ("optimizer", "sampler") => self.sampler = parse(key, value)?,
            ("optimizer", "sigma") => self.sigma = parse(key, value)?,
            ("optimizer", "eta") => self.eta = parse(key, value)?,
            ("optimizer", "schedule") => self.schedule = value.parse()?,
            ("optimizer", "regressor") => self.regressor = value.to_string(),
            ("optimizer", "alpha") => self.alpha = Some(parse(key, value)?),
            ("optimizer", "estimator") => self.estimator = value.to_string(),
            ("optimizer", "trust_region") => self.trust_region = parse(key, value)?,
            ("optimizer", "archive_capacity") => self.archive_capacity = Some(parse(key, value)?),

            ("noise", "rho") => self.rho = parse(key, value)?,
            ("noise", "mode") => self.mode = Some(parse(key, value)?),
            ("noise", "eps") => self.eps = parse(key, value)?,
            ("noise", "protect_center") => self.protect_center = parse_bool(key, value)?,

            ("flow", "enabled") => self.flow = parse_bool(key, value)?,
            ("flow", "steps") => self.flow_steps = parse(key, value)?,
            ("flow", "h") => self.flow_h = Some(parse(key, value)?),
            ("flow", "gamma") => self.kernel_gamma = Some(parse(key, value)?),
            ("flow", "kernel_reg") => self.kernel_reg = parse(key, value)?,

            ("arms", name) => {
                if self.arms.iter().any(|a| a.name == name) {
                    bail!("arm `{name}` defined twice");
                }
                self.arms.push(Arm {
                    name: name.to_string(),
                    kind: value.parse()?,
                })
            }
            (s, k) => bail!("unknown setting `{s}.{k}`"),
        }
        Ok(())
    }

    pub fn objective(&self) -> Result<Objective> {
        Ok(objective_by_name(&self.objective)?)
    }

    pub fn noise(&self, seed: u64) -> Result<NoiseModel> {
        let mode = match self.mode {
            Some(m) => m,
            None if self.rho > 0.0 => CorruptionMode::HugeConstant(1e6),
            None => CorruptionMode::None,
        };
        Ok(NoiseModel::new(self.rho, mode, self.eps, seed)?.with_protect_center(self.protect_center))
    }

    /// The single arm used by `optimize`, built from the optimizer section.
    pub fn default_arm(&self) -> Result<Arm> {
        let kind = if self.estimator == "rbo" {
            let alpha = self.alpha.unwrap_or_else(|| default_alpha(&self.regressor));
            ArmKind::Rbo(RegressionSpec::from_name(&self.regressor, alpha)?)
        } else {
            ArmKind::Mc(self.estimator.parse()?)
        };
        Ok(Arm {
            name: match kind {
                ArmKind::Rbo(spec) => format!("rbo-{}", spec.name()),
                ArmKind::Mc(kind) => kind.to_string(),
            },
            kind,
        })
    }

    pub fn schedules(&self, f: &Objective) -> Result<Schedules> {
        let c = f.constants();
        Ok(match self.schedule {
            ScheduleChoice::Constant => Schedules::constant(self.sigma, self.eta)?,
            ScheduleChoice::Theorem1 => schedules_theorem1(c.lipschitz, c.smoothness, c.diameter, f.dim())?,
            ScheduleChoice::Theorem2 => {
                schedules_theorem2(c.lipschitz, c.smoothness, c.strong_concavity, c.diameter, f.dim())?
            }
        })
    }

    /// Optimizer config for one (arm, seed) pair.
    pub fn optimizer(&self, f: &Objective, arm: &Arm, seed: u64) -> Result<OptimizerConfig> {
        let mut cfg = OptimizerConfig::new(self.epochs, self.k, seed);
        cfg.sampler = self.sampler;
        cfg.policy = self.trust_region;
        cfg.archive_capacity = self.archive_capacity;
        cfg.noise = self.noise(seed)?;
        match arm.kind {
            ArmKind::Rbo(spec) => cfg.spec = spec,
            ArmKind::Mc(kind) => cfg.mc_baseline = Some(kind),
        }
        let schedules = self.schedules(f)?;
        if self.schedule == ScheduleChoice::Constant {
            cfg.schedules = schedules;
        } else {
            cfg = cfg.theorem_mode(schedules);
        }
        if self.flow {
            cfg.flow = Some(FlowConfig {
                n_steps: self.flow_steps,
                step: self.flow_h,
                gamma: self.kernel_gamma,
                kernel_reg: self.kernel_reg,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn start_point(&self, f: &Objective) -> Result<DVector<f64>> {
        match &self.start {
            StartPoint::Zero => Ok(DVector::zeros(f.dim())),
            StartPoint::Opposite => {
                let opt = f
                    .optimum()
                    .ok_or_else(|| anyhow!("start = opposite needs a known optimum"))?;
                let norm = opt.point.norm();
                if norm == 0.0 {
                    bail!("start = opposite is undefined when the optimum is the origin");
                }
                let radius = 0.5 * f.domain().diameter();
                Ok(&opt.point * (-radius / norm))
            }
            StartPoint::Explicit(v) => {
                if v.len() != f.dim() {
                    bail!("start has {} coordinates, objective has d={}", v.len(), f.dim());
                }
                Ok(DVector::from_column_slice(v))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        Ok(())
    }
}
