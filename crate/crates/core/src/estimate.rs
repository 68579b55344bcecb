//! Binomial proportion estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    // clamp so that lower <= p <= upper survives rounding at p = 0 or 1
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Monte-Carlo estimate of a probability from a success count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub n: u64,
    pub estimate: f64,
    /// Plug-in binomial standard error `sqrt(p(1-p)/n)`.
    pub standard_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl Proportion {
    pub fn from_counts(successes: u64, n: u64) -> Self {
        assert!(successes <= n, "successes exceed trials");
        let estimate = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
        let standard_error = if n == 0 {
            0.0
        } else {
            (estimate * (1.0 - estimate) / n as f64).sqrt()
        };
        let (ci_lower, ci_upper) = wilson_interval(successes, n, Z95);
        Self {
            successes,
            n,
            estimate,
            standard_error,
            ci_lower,
            ci_upper,
        }
    }

    /// A probability known to be exactly zero without sampling (`n = 0`,
    /// degenerate interval).
    pub fn exact_zero() -> Self {
        Self {
            successes: 0,
            n: 0,
            estimate: 0.0,
            standard_error: 0.0,
            ci_lower: 0.0,
            ci_upper: 0.0,
        }
    }

    /// `true` if `value` lies inside the 95% Wilson interval.
    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}
