//! Robust blackbox optimization through regression-based gradient recovery.
//!
//! Gradients of a blackbox objective are recovered by regressing value
//! differences on perturbation displacements. Depending on the regression
//! loss the estimator reduces to ridge regression, the Lasso, or exact L1
//! (LP) decoding, the last of which tolerates a constant fraction of
//! arbitrarily corrupted measurements. Past evaluations are reused through a
//! sliding trust region, and an optional extension interpolates a local
//! gradient field with a separable matrix-valued RBF kernel and follows its
//! Euler-integrated flow.
//!
//! The objective is always **maximized**.

pub mod error;
pub mod estimators;
pub mod gradient_field;
pub mod linalg;
pub mod lp_core;
pub mod noise;
pub mod objectives;
pub mod optimizer;
pub mod regression;
pub mod rng;
pub mod sampling;
pub mod theory;
pub mod trust_region;

pub use error::{Error, Result};
pub use estimators::{EstimatorMethod, GradientEstimate, McKind};
pub use noise::{CorruptionMode, NoiseModel};
pub use objectives::{Constants, DomainSpec, Objective};
pub use optimizer::{FlowConfig, OptimizerConfig, Schedule, Schedules, Trace, TraceRecord};
pub use regression::{RegressionMode, RegressionProblem, RegressionSpec, SolverControls};
pub use sampling::{PerturbationEnsemble, SamplerKind};
pub use trust_region::{Archive, TrustRegionPolicy};
