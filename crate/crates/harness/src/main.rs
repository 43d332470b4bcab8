use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rbo_core::estimators::{build_rbo_problem, measure};
use rbo_core::objectives::objective_by_name;
use rbo_core::regression::{solve, RegressionSpec};
use rbo_core::sampling::sample;
use rbo_core::theory::compute_rho_star;
use rbo_core::{NoiseModel, SamplerKind};
use rbo_harness::config::ExperimentConfig;
use rbo_harness::experiment::run_experiment;
use rbo_harness::suite::run_suite;

#[derive(Parser)]
#[command(name = "rbo", version, about = "Robust blackbox optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer configuration over one or more seeds.
    Optimize(RunArgs),
    /// Run several estimator arms on the same objective and noise.
    Compare(RunArgs),
    /// Recover one gradient and compare it with the analytic gradient.
    RecoverGradient(RecoverArgs),
    /// Print the critical corruption fraction.
    RhoStar,
    /// Run the acceptance suite; exits non-zero if any check fails.
    Suite {
        #[arg(long, default_value = "rbo-suite")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<String>,
    /// Estimator for `optimize`: vanilla, fd, antithetic or rbo.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    regressor: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// none, dynamic:<tau> or static:<R>.
    #[arg(long = "trust-region")]
    trust_region: Option<String>,
    /// rho=<f>,mode=<none|huge[:M]|flip|blowup[:s]>,eps=<f>
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    protect_center: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// constant, theorem1 or theorem2.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    sampler: Option<String>,
    /// Single seed; use --seeds for several.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// zero, opposite or comma separated coordinates.
    #[arg(long)]
    start: Option<String>,
    /// Comparison arm `name=kind`, e.g. `lp=rbo:lp` or `es=fd`; repeatable.
    #[arg(long = "arm")]
    arms: Vec<String>,
    /// on or off.
    #[arg(long)]
    flow: Option<String>,
    #[arg(long = "flow-steps")]
    flow_steps: Option<usize>,
    #[arg(long = "flow-h")]
    flow_h: Option<f64>,
    #[arg(long = "kernel-gamma")]
    kernel_gamma: Option<f64>,
    #[arg(long = "kernel-reg")]
    kernel_reg: Option<f64>,
    /// Output directory for `compare`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write summary.svg next to the CSVs.
    #[arg(long)]
    svg: bool,
    /// Raw `section.key=value` override; repeatable.
    #[arg(long = "set")]
    sets: Vec<String>,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long, default_value = "quadratic-d10")]
    objective: String,
    #[arg(long, default_value = "lp")]
    regressor: String,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value = "iid")]
    sampler: String,
    #[arg(long, default_value = "rho=0.2,mode=huge:1e6")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RunArgs {
    fn into_config(self, optimize: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_ini(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        let mut set = |section: &str, key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                cfg.set(section, key, &v)?;
            }
            Ok(())
        };
        set("run", "objective", self.objective)?;
        set("run", "seeds", self.seeds.or(self.seed.map(|s| s.to_string())))?;
        set("run", "start", self.start)?;
        set("optimizer", "estimator", self.estimator)?;
        set("optimizer", "regressor", self.regressor)?;
        set("optimizer", "alpha", self.alpha.map(|a| a.to_string()))?;
        set("optimizer", "trust_region", self.trust_region)?;
        set("optimizer", "epochs", self.epochs.map(|v| v.to_string()))?;
        set("optimizer", "k", self.k.map(|v| v.to_string()))?;
        set("optimizer", "sigma", self.sigma.map(|v| v.to_string()))?;
        set("optimizer", "eta", self.eta.map(|v| v.to_string()))?;
        set("optimizer", "schedule", self.schedule)?;
        set("optimizer", "sampler", self.sampler)?;
        set("flow", "enabled", self.flow)?;
        set("flow", "steps", self.flow_steps.map(|v| v.to_string()))?;
        set("flow", "h", self.flow_h.map(|v| v.to_string()))?;
        set("flow", "gamma", self.kernel_gamma.map(|v| v.to_string()))?;
        set("flow", "kernel_reg", self.kernel_reg.map(|v| v.to_string()))?;
        if let Some(noise) = self.noise {
            let parsed = NoiseModel::parse(&noise, 0)?;
            cfg.rho = parsed.rho;
            cfg.mode = Some(parsed.mode);
            cfg.eps = parsed.epsilon;
        }
        if self.protect_center {
            cfg.protect_center = true;
        }
        if self.svg {
            cfg.svg = true;
        }
        if let Some(out) = self.out {
            cfg.out = out;
        }
        for arm in self.arms {
            let (name, kind) = arm
                .split_once('=')
                .with_context(|| format!("arm `{arm}` is not name=kind"))?;
            cfg.set("arms", name, kind)?;
        }
        for s in &self.sets {
            cfg.set_dotted(s)?;
        }
        if optimize && !cfg.arms.is_empty() {
            anyhow::bail!("`optimize` runs a single estimator; use `compare` for arms");
        }
        if !optimize && cfg.arms.is_empty() {
            anyhow::bail!("`compare` needs at least one arm (--arm name=kind or an [arms] section)");
        }
        Ok(cfg)
    }
}

fn optimize(args: RunArgs) -> Result<()> {
    let cfg = args.into_config(true)?;
    let summary = run_experiment(&cfg)?;
    for arm in &summary.arms {
        for (seed, value) in arm.final_values() {
            match value {
                Some(v) => println!("{} seed {seed}: final {} {v:.6e}", arm.arm, arm.metric),
                None => println!("{} seed {seed}: failed", arm.arm),
            }
        }
        for s in &arm.seeds {
            if let Some(e) = &s.error {
                eprintln!("{} seed {}: {e}", arm.arm, s.seed);
            }
        }
    }
    println!("wrote {} files to {}", summary.files.len(), cfg.out.display());
    Ok(())
}

fn compare(args: RunArgs) -> Result<()> {
    let cfg = args.into_config(false)?;
    let summary = run_experiment(&cfg)?;
    for arm in &summary.arms {
        let finals: Vec<String> = arm
            .final_values()
            .into_iter()
            .map(|(_, v)| v.map_or("failed".to_string(), |v| format!("{v:.3e}")))
            .collect();
        let med = arm.median.last().copied().unwrap_or(f64::NAN);
        println!("{:<16} median final {} {med:.3e}  per seed [{}]", arm.arm, arm.metric, finals.join(", "));
    }
    println!("wrote {} files to {}", summary.files.len(), cfg.out.display());
    Ok(())
}

fn recover_gradient(args: RecoverArgs) -> Result<()> {
    let f = objective_by_name(&args.objective)?;
    let spec = RegressionSpec::from_name(&args.regressor, args.alpha)?;
    let sampler: SamplerKind = args.sampler.parse()?;
    let noise = NoiseModel::parse(&args.noise, args.seed)?.with_protect_center(true);
    let theta = DVector::zeros(f.dim());
    let ens = sample(sampler, args.k, f.dim(), args.seed, 0)?;
    let m = measure(&f, &theta, args.sigma, &ens, &noise, 0)?;
    let fresh: Vec<(DVector<f64>, f64)> = (0..args.k)
        .map(|i| (ens.direction(i) * args.sigma, m.perturbed_observed[i]))
        .collect();
    let grad = solve(&build_rbo_problem(m.center_observed, &fresh, &[])?, &spec)?;
    let corrupted = m
        .perturbed_true
        .iter()
        .zip(&m.perturbed_observed)
        .filter(|(a, b)| a != b)
        .count();
    println!("objective {} (d={}), {spec}, k={}, sigma={}", f.name(), f.dim(), args.k, args.sigma);
    println!("noise {noise}: {corrupted} of {} perturbed measurements altered", args.k);
    println!("recovered gradient norm {:.6e}", grad.norm());
    match f.gradient(&theta) {
        Some(g) => {
            let err = (&grad - &g).norm();
            println!("analytic gradient norm  {:.6e}", g.norm());
            println!("l2 error {err:.6e} (relative {:.6e})", err / g.norm().max(f64::MIN_POSITIVE));
        }
        None => println!("no analytic gradient available for comparison"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rbo_harness::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Optimize(args) => optimize(args),
        Command::Compare(args) => compare(args),
        Command::RecoverGradient(args) => recover_gradient(args),
        Command::RhoStar => {
            let r = compute_rho_star();
            println!("x_star = {:.16}", r.x_star);
            println!("rho_star = {:.16}", r.rho_star);
            println!("numeric x_star = {:.16}", r.numeric_x_star);
            println!("numeric rho_star = {:.16}", r.numeric_rho_star);
            println!("pipeline gap = {:.3e}", r.pipeline_gap());
            Ok(())
        }
        Command::Suite { out } => match run_suite(&out) {
            Ok(report) => {
                for line in report.lines() {
                    println!("{line}");
                }
                return if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE };
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

