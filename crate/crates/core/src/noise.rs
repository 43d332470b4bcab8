//! Measurement corruption between the true objective and the optimizer.
//!
//! Each batch has exactly `⌊ρ·n⌋` of its entries replaced according to the
//! corruption mode; the remaining entries receive additive uniform noise in
//! `[-ε, ε]`. Draws are keyed by `(seed, batch counter)`, so a batch is
//! corrupted identically no matter when or where it is processed.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::fraction_count;
use crate::rng::{stream_rng, StreamTag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionMode {
    None,
    /// Replace with `±M`, sign drawn uniformly.
    HugeConstant(f64),
    /// Replace `v` with `-v`.
    SignFlip,
    /// Replace with a uniform draw from `[-scale, scale]`.
    UniformBlowup(f64),
}

impl fmt::Display for CorruptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorruptionMode::None => f.write_str("none"),
            CorruptionMode::HugeConstant(m) => write!(f, "huge:{m}"),
            CorruptionMode::SignFlip => f.write_str("flip"),
            CorruptionMode::UniformBlowup(s) => write!(f, "blowup:{s}"),
        }
    }
}

impl FromStr for CorruptionMode {
    type Err = Error;

    /// `none`, `huge[:M]`, `flip`, `blowup[:scale]`; magnitudes default to 1e6.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let magnitude = || -> Result<f64> {
            match arg {
                None => Ok(1e6),
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .ok_or_else(|| Error::invalid(format!("bad corruption magnitude `{a}`"))),
            }
        };
        match name {
            "none" => Ok(CorruptionMode::None),
            "huge" | "huge_constant" => Ok(CorruptionMode::HugeConstant(magnitude()?)),
            "flip" | "sign_flip" => Ok(CorruptionMode::SignFlip),
            "blowup" | "uniform_blowup" => Ok(CorruptionMode::UniformBlowup(magnitude()?)),
            other => Err(Error::invalid(format!(
                "unknown corruption mode `{other}` (expected none, huge[:M], flip, blowup[:scale])"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Corrupted fraction `ρ ∈ [0, 1)`.
    pub rho: f64,
    pub mode: CorruptionMode,
    /// Bounded-noise level `ε ≥ 0`.
    pub epsilon: f64,
    pub seed: u64,
    /// Exempt the center value `F(θ_t)` from corruption (ablation switch).
    pub protect_center: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::none()
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            rho: 0.0,
            mode: CorruptionMode::None,
            epsilon: 0.0,
            seed: 0,
            protect_center: false,
        }
    }

    pub fn new(rho: f64, mode: CorruptionMode, epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::invalid(format!("corruption fraction must be in [0, 1), got {rho}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("noise level ε must be finite and non-negative"));
        }
        Ok(NoiseModel {
            rho,
            mode,
            epsilon,
            seed,
            protect_center: false,
        })
    }

    pub fn with_protect_center(mut self, protect: bool) -> Self {
        self.protect_center = protect;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_noiseless(&self) -> bool {
        (self.rho == 0.0 || self.mode == CorruptionMode::None) && self.epsilon == 0.0
    }

    /// Parses `rho=<f>,mode=<m>,eps=<f>`; omitted keys keep their defaults.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let mut model = NoiseModel::none().with_seed(seed);
        let mut mode_given = false;
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("noise entry `{part}` is not key=value")))?;
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("noise `{key}` expects a number, got `{value}`")))
            };
            match key {
                "rho" => model.rho = number()?,
                "eps" => model.epsilon = number()?,
                "mode" => {
                    model.mode = value.parse()?;
                    mode_given = true;
                }
                other => return Err(Error::invalid(format!("unknown noise key `{other}`"))),
            }
        }
        if !mode_given && model.rho > 0.0 {
            model.mode = CorruptionMode::HugeConstant(1e6);
        }
        let protect = model.protect_center;
        Ok(NoiseModel::new(model.rho, model.mode, model.epsilon, seed)?.with_protect_center(protect))
    }

    /// Number of entries corrupted in a batch of `n` values.
    pub fn corrupted_count(&self, n: usize) -> usize {
        if self.mode == CorruptionMode::None {
            0
        } else {
            fraction_count(self.rho, n)
        }
    }

    /// Corrupts a batch; `counter` identifies the batch (e.g. the epoch).
    /// Returns the observed values and the sorted corrupted indices.
    pub fn corrupt_batch(&self, values: &[f64], counter: u64) -> (Vec<f64>, Vec<usize>) {
        let n = values.len();
        let mut out = values.to_vec();
        let mut rng = stream_rng(self.seed, StreamTag::Noise, counter);
        let count = self.corrupted_count(n);
        let mut corrupted: Vec<usize> = if count > 0 {
            index::sample(&mut rng, n, count).into_vec()
        } else {
            Vec::new()
        };
        corrupted.sort_unstable();
        let mut flags = vec![false; n];
        for &i in &corrupted {
            flags[i] = true;
            out[i] = match self.mode {
                CorruptionMode::None => out[i],
                CorruptionMode::HugeConstant(m) => {
                    if rng.random::<bool>() { m } else { -m }
                }
                CorruptionMode::SignFlip => -out[i],
                CorruptionMode::UniformBlowup(s) => rng.random_range(-s..=s),
            };
        }
        if self.epsilon > 0.0 {
            for (v, hit) in out.iter_mut().zip(&flags) {
                let e: f64 = rng.random_range(-self.epsilon..=self.epsilon);
                if !hit {
                    *v += e;
                }
            }
        }
        (out, corrupted)
    }

    /// Corrupts an epoch's measurements where index 0 is the center value.
    /// With `protect_center` only the perturbed values are eligible.
    pub fn corrupt_epoch(&self, values: &[f64], counter: u64) -> Vec<f64> {
        if self.protect_center && !values.is_empty() {
            let (tail, _) = self.corrupt_batch(&values[1..], counter);
            let mut out = Vec::with_capacity(values.len());
            out.push(values[0]);
            out.extend(tail);
            out
        } else {
            self.corrupt_batch(values, counter).0
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rho={},mode={},eps={}", self.rho, self.mode, self.epsilon)
    }
}

/// Error-optimal smoothing scale `σ = √(ε / (dλ))`.
pub fn epsilon_sigma_schedule(epsilon: f64, dim: usize, smoothness: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("ε must be positive"));
    }
    if !(smoothness > 0.0) || dim == 0 {
        return Err(Error::invalid("σ(ε) needs λ > 0 and d >= 1"));
    }
    Ok((epsilon / (dim as f64 * smoothness)).sqrt())
}
