//! Numerical laboratory for testing the global null in the Gaussian
//! sequence model `y = θ + ε`, `ε ~ N(0, I_d)`.
//!
//! * [`model`]: alternatives, observations, consistency criteria.
//! * [`hypothesis`]: p-norm, Higher Criticism and combined tests, critical
//!   values, Monte-Carlo power and the exact LR power curve.
//! * [`geometry`]: p-ball volumes, uniform sphere/ball sampling and
//!   relative-volume estimates.
//! * [`superconsistency`]: excess-power regions, the concentration bound
//!   on their spherical measure, weighted average power and Lipschitz checks.
//!
//! All randomness flows through [`RngStream`]; results are bit-identical for
//! identical streams regardless of the rayon worker count.

pub mod error;
pub mod estimate;
pub mod geometry;
pub mod hypothesis;
pub mod mc;
pub mod model;
pub mod rng;
pub mod serde_ext;
pub mod special;
pub mod superconsistency;

pub use error::{Error, Result};

/// Crate version, recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use estimate::{wilson_interval, Proportion};
pub use geometry::{BallSpec, VolumeEstimate};
pub use hypothesis::{
    calibrate_critical_value, combine, estimate_power, evaluate, higher_criticism_statistic, lr_power_beta,
    p_norm, Calibration, CalibrationMethod, LrPowerQuery, PowerEstimate, Statistic, TestKind, TestSpec,
};
pub use model::{
    consistency_diagnostics, draw_observation, realize_alternative, AlternativeRule, Amplitude,
    ConsistencyDiagnostics, ParameterPoint,
};
pub use rng::{RngStream, StreamRng};
pub use superconsistency::{BoundReport, ExcessPowerQuery};
