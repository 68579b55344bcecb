//! The Gaussian sequence model `y = θ + ε`, alternative families, and the
//! consistency criteria of the LR and p-norm tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::{RngStream, StreamRng};

/// Mean vector θ of the sequence model. Non-empty with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParameterPoint {
    values: Vec<f64>,
}

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure(!values.is_empty(), || "parameter point must have dimension >= 1".into())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "parameter point entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm2_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_squared().sqrt()
    }

    /// `‖θ‖_p^p` for finite `p > 0`.
    pub fn pnorm_pow(&self, p: f64) -> f64 {
        self.values.iter().map(|v| v.abs().powf(p)).sum()
    }
}

impl TryFrom<Vec<f64>> for ParameterPoint {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ParameterPoint> for Vec<f64> {
    fn from(p: ParameterPoint) -> Self {
        p.values
    }
}

/// `scale · d^d_exponent · (ln d)^log_exponent`, a signal amplitude as a function of dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitude {
    pub scale: f64,
    #[serde(default)]
    pub d_exponent: f64,
    #[serde(default)]
    pub log_exponent: f64,
}

impl Amplitude {
    pub const fn constant(scale: f64) -> Self {
        Self {
            scale,
            d_exponent: 0.0,
            log_exponent: 0.0,
        }
    }

    pub const fn new(scale: f64, d_exponent: f64, log_exponent: f64) -> Self {
        Self {
            scale,
            d_exponent,
            log_exponent,
        }
    }

    pub fn at(&self, d: usize) -> f64 {
        let d = d as f64;
        let log_factor = if self.log_exponent == 0.0 {
            1.0
        } else {
            d.ln().powf(self.log_exponent)
        };
        self.scale * d.powf(self.d_exponent) * log_factor
    }

    fn validate(&self) -> Result<()> {
        ensure(
            self.scale.is_finite() && self.d_exponent.is_finite() && self.log_exponent.is_finite(),
            || format!("amplitude parameters must be finite: {self:?}"),
        )
    }
}

/// A rule assigning a mean vector to every dimension `d`.
///
/// Signal always sits in the leading coordinates; every statistic in this
/// crate is permutation invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlternativeRule {
    Zero,
    /// Every coordinate equals `amplitude(d)`.
    Dense { amplitude: Amplitude },
    /// The first `k` coordinates equal `amplitude(d)`, the rest are zero.
    SparseSpike { k: usize, amplitude: Amplitude },
    /// Explicit vectors keyed by dimension.
    Custom { vectors: BTreeMap<usize, Vec<f64>> },
}

impl AlternativeRule {
    /// Dense rule with coordinates `c · d^γ`.
    pub fn dense(c: f64, gamma: f64) -> Self {
        AlternativeRule::Dense {
            amplitude: Amplitude::new(c, gamma, 0.0),
        }
    }

    pub fn spike(k: usize, amplitude: Amplitude) -> Self {
        AlternativeRule::SparseSpike { k, amplitude }
    }

    /// Dense rule with `‖θ_d‖₂² = c · d^{1/2} · (ln d)^log_power`.
    pub fn dense_with_energy(c: f64, log_power: f64) -> Self {
        AlternativeRule::Dense {
            amplitude: Amplitude::new(c.sqrt(), -0.25, 0.5 * log_power),
        }
    }

    pub fn realize(&self, d: usize) -> Result<ParameterPoint> {
        realize_alternative(self, d)
    }
}

/// Evaluates an alternative rule at dimension `d`.
pub fn realize_alternative(rule: &AlternativeRule, d: usize) -> Result<ParameterPoint> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    let values = match rule {
        AlternativeRule::Zero => vec![0.0; d],
        AlternativeRule::Dense { amplitude } => {
            amplitude.validate()?;
            ensure(amplitude.scale >= 0.0, || {
                format!("dense amplitude scale must be >= 0, got {}", amplitude.scale)
            })?;
            vec![amplitude.at(d); d]
        }
        AlternativeRule::SparseSpike { k, amplitude } => {
            amplitude.validate()?;
            ensure(*k >= 1, || "sparse spike count k must be >= 1".into())?;
            ensure(*k <= d, || format!("sparse spike count k = {k} exceeds dimension d = {d}"))?;
            let mut v = vec![0.0; d];
            v[..*k].fill(amplitude.at(d));
            v
        }
        AlternativeRule::Custom { vectors } => {
            let v = vectors
                .get(&d)
                .ok_or_else(|| Error::invalid(format!("custom rule has no vector for d = {d}")))?;
            ensure(v.len() == d, || {
                format!("custom vector for d = {d} has length {}", v.len())
            })?;
            v.clone()
        }
    };
    ParameterPoint::new(values)
}

/// Writes `θ + z` into `out`, with `z` standard normal from `rng`.
pub fn draw_observation_into(theta: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
    debug_assert_eq!(theta.len(), out.len());
    for (o, t) in out.iter_mut().zip(theta) {
        *o = t + rng.standard_normal();
    }
}

/// One observation `y = θ + ε` drawn from the start of `stream`.
pub fn draw_observation(theta: &ParameterPoint, stream: RngStream) -> Vec<f64> {
    let mut out = vec![0.0; theta.dim()];
    draw_observation_into(theta.values(), &mut stream.generator(), &mut out);
    out
}

/// Powers of two from 16 to 4096.
pub fn default_d_grid() -> Vec<usize> {
    (4..=12).map(|k| 1usize << k).collect()
}

/// Both consistency criteria tabulated along a grid of dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyDiagnostics {
    pub p: f64,
    pub d_grid: Vec<usize>,
    /// `d^{-1/2} ‖θ_d‖₂²`; the LR test is consistent iff this diverges.
    pub lr_criterion: Vec<f64>,
    /// `d^{-1/2} max(‖θ_d‖₂², ‖θ_d‖_p^p)`.
    pub p_criterion: Vec<f64>,
}

impl ConsistencyDiagnostics {
    /// Grid surrogate for divergence: strictly increasing along the grid.
    pub fn lr_diverges(&self) -> bool {
        strictly_increasing(&self.lr_criterion)
    }

    pub fn p_diverges(&self) -> bool {
        strictly_increasing(&self.p_criterion)
    }
}

// increases smaller than the relative rounding noise of the criteria do not count
fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0] + 1e-9 * w[0].abs())
}

pub fn consistency_diagnostics(
    rule: &AlternativeRule,
    p: f64,
    d_grid: &[usize],
) -> Result<ConsistencyDiagnostics> {
    ensure(p > 0.0 && p.is_finite(), || format!("exponent p must lie in (0, inf), got {p}"))?;
    ensure(d_grid.windows(2).all(|w| w[1] > w[0]), || {
        "d_grid must be strictly increasing".into()
    })?;
    let mut lr_criterion = Vec::with_capacity(d_grid.len());
    let mut p_criterion = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let theta = realize_alternative(rule, d)?;
        let scale = (d as f64).sqrt();
        let l2 = theta.norm2_squared();
        lr_criterion.push(l2 / scale);
        p_criterion.push(l2.max(theta.pnorm_pow(p)) / scale);
    }
    Ok(ConsistencyDiagnostics {
        p,
        d_grid: d_grid.to_vec(),
        lr_criterion,
        p_criterion,
    })
}
