//! Test statistics, critical values, rejection decisions and power.
//!
//! A [`TestSpec`] is either a single statistic with a critical value
//! (rejecting on `T(y) >= κ`) or the OR-combination of two specs of the
//! same dimension. Power is estimated by block-parallel Monte Carlo; the
//! exact power of the LR (Euclidean norm) test is available in closed form
//! through the noncentral chi-square series in [`lr_power_beta`].

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::estimate::Proportion;
use crate::mc;
use crate::model::{draw_observation_into, ParameterPoint};
use crate::rng::RngStream;
use crate::special::{
    chi_square_upper_quantile, gamma_q, ln_gamma, normal_abs_moment, normal_upper_quantile,
    two_sided_p_value,
};

/// `(Σ|x_i|^p)^{1/p}` for `p < ∞` (a quasi-norm when `p < 1`), `max|x_i|` for `p = ∞`.
pub fn p_norm(x: &[f64], p: f64) -> Result<f64> {
    ensure(p > 0.0, || format!("exponent p must be > 0, got {p}"))?;
    ensure(x.iter().all(|v| v.is_finite()), || "p_norm input must be finite".into())?;
    Ok(p_norm_unchecked(x, p))
}

pub(crate) fn p_norm_unchecked(x: &[f64], p: f64) -> f64 {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    // factor out the largest entry so large p cannot overflow
    let inv = 1.0 / max;
    let sum: f64 = if p == 2.0 {
        x.iter().map(|v| (v * inv) * (v * inv)).sum()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs() * inv).sum()
    } else if p == 4.0 {
        x.iter().map(|v| (v * inv).powi(4)).sum()
    } else {
        x.iter().map(|v| (v.abs() * inv).powf(p)).sum()
    };
    max * sum.powf(1.0 / p)
}

/// Normalized Higher Criticism over the smallest `⌊fraction·d⌋` two-sided p-values,
/// floored at zero.
///
/// `scratch` is overwritten.
pub fn higher_criticism_with(y: &[f64], fraction: f64, scratch: &mut Vec<f64>) -> f64 {
    let d = y.len();
    let m = ((d as f64 * fraction).floor() as usize).clamp(1, d);
    scratch.clear();
    scratch.extend(y.iter().map(|v| v.abs()));
    // largest |y| first: those carry the smallest p-values
    let desc = |a: &f64, b: &f64| b.total_cmp(a);
    if m < d {
        scratch.select_nth_unstable_by(m - 1, desc);
    }
    scratch[..m].sort_unstable_by(desc);
    let d_f = d as f64;
    let sqrt_d = d_f.sqrt();
    let mut best = 0.0f64;
    for (idx, &a) in scratch[..m].iter().enumerate() {
        let p = two_sided_p_value(a);
        let num = sqrt_d * ((idx + 1) as f64 / d_f - p);
        let den = (p * (1.0 - p)).sqrt();
        let term = if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        best = best.max(term);
    }
    best
}

/// Higher Criticism with the default lower-half restriction.
pub fn higher_criticism_statistic(y: &[f64]) -> Result<f64> {
    ensure(y.len() >= 2, || "higher criticism needs d >= 2".into())?;
    ensure(y.iter().all(|v| v.is_finite()), || "higher criticism input must be finite".into())?;
    Ok(higher_criticism_with(y, DEFAULT_HC_FRACTION, &mut Vec::with_capacity(y.len())))
}

pub const DEFAULT_HC_FRACTION: f64 = 0.5;

fn default_hc_fraction() -> f64 {
    DEFAULT_HC_FRACTION
}

/// A scalar test statistic; large values are evidence against the global null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    PNorm {
        #[serde(with = "crate::serde_ext")]
        p: f64,
    },
    HigherCriticism {
        #[serde(default = "default_hc_fraction")]
        fraction: f64,
    },
    /// `w'y`, i.e. a half-space test.
    Linear { weights: Vec<f64> },
}

impl Statistic {
    pub fn p_norm(p: f64) -> Self {
        Statistic::PNorm { p }
    }

    pub fn lr() -> Self {
        Statistic::PNorm { p: 2.0 }
    }

    pub fn higher_criticism() -> Self {
        Statistic::HigherCriticism {
            fraction: DEFAULT_HC_FRACTION,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Statistic::PNorm { p } if p.is_infinite() => "p=inf".into(),
            Statistic::PNorm { p } => format!("p={p}"),
            Statistic::HigherCriticism { fraction } if *fraction == DEFAULT_HC_FRACTION => "hc".into(),
            Statistic::HigherCriticism { fraction } => format!("hc({fraction})"),
            Statistic::Linear { .. } => "linear".into(),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Statistic::PNorm { p } => ensure(*p > 0.0, || format!("exponent p must be > 0, got {p}")),
            Statistic::HigherCriticism { fraction } => {
                ensure(d >= 2, || "higher criticism needs d >= 2".into())?;
                ensure(*fraction > 0.0 && *fraction <= 1.0, || {
                    format!("higher criticism fraction must lie in (0, 1], got {fraction}")
                })
            }
            Statistic::Linear { weights } => {
                ensure(weights.len() == d, || {
                    format!("linear weights have length {} but d = {d}", weights.len())
                })?;
                ensure(weights.iter().all(|w| w.is_finite()), || "linear weights must be finite".into())?;
                ensure(weights.iter().any(|&w| w != 0.0), || "linear weights must not all be zero".into())
            }
        }
    }

    /// Evaluates the statistic; `scratch` is working memory of any length.
    pub fn value_with(&self, y: &[f64], scratch: &mut Vec<f64>) -> f64 {
        match self {
            Statistic::PNorm { p } => p_norm_unchecked(y, *p),
            Statistic::HigherCriticism { fraction } => higher_criticism_with(y, *fraction, scratch),
            Statistic::Linear { weights } => weights.iter().zip(y).map(|(w, v)| w * v).sum(),
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.value_with(y, &mut Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationMethod {
    Exact,
    MonteCarlo { n: u64 },
    CltApprox,
}

/// A calibrated critical value with its reported error.
///
/// `error` is zero for exact calibration, the half-width of the
/// order-statistic band around the empirical quantile for Monte Carlo, and
/// the gap between the normal and second-order Cornish–Fisher quantiles for
/// the CLT approximation. All errors are on the scale of the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub critical_value: f64,
    pub error: f64,
    pub method: CalibrationMethod,
}

/// Critical value `κ` with null rejection probability `alpha` for `T(y) >= κ`.
pub fn calibrate_critical_value(
    statistic: &Statistic,
    d: usize,
    alpha: f64,
    method: CalibrationMethod,
    stream: RngStream,
) -> Result<Calibration> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    ensure(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0,1), got {alpha}"))?;
    statistic.validate(d)?;
    let (critical_value, error) = match method {
        CalibrationMethod::Exact => (exact_critical_value(statistic, d, alpha)?, 0.0),
        CalibrationMethod::MonteCarlo { n } => monte_carlo_critical_value(statistic, d, alpha, n, stream)?,
        CalibrationMethod::CltApprox => clt_critical_value(statistic, d, alpha)?,
    };
    Ok(Calibration {
        critical_value,
        error,
        method,
    })
}

fn exact_critical_value(statistic: &Statistic, d: usize, alpha: f64) -> Result<f64> {
    match statistic {
        Statistic::PNorm { p } if p.is_infinite() => {
            // P(max|ε_i| >= κ) = α  <=>  2(1 - Φ(κ)) = 1 - (1-α)^{1/d}
            let tail = -(f64::ln_1p(-alpha) / d as f64).exp_m1() / 2.0;
            Ok(normal_upper_quantile(tail))
        }
        Statistic::PNorm { p } if *p == 2.0 => Ok(chi_square_upper_quantile(d as f64, alpha)?.sqrt()),
        Statistic::Linear { weights } => {
            let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            Ok(norm * normal_upper_quantile(alpha))
        }
        other => Err(Error::invalid(format!(
            "exact calibration is only available for p = 2, p = inf and linear statistics, not {}",
            other.label()
        ))),
    }
}

/// Type-7 (linear interpolation) quantile of sorted data at probability `prob`.
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn monte_carlo_critical_value(
    statistic: &Statistic,
    d: usize,
    alpha: f64,
    n: u64,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if (n as f64) * alpha < 20.0 {
        return Err(Error::CalibrationInsufficient { n, alpha });
    }
    let mut values = mc::sample_values(
        n,
        stream,
        || (vec![0.0; d], Vec::with_capacity(d)),
        |rng, (y, scratch)| {
            rng.fill_standard_normal(y);
            statistic.value_with(y, scratch)
        },
    );
    values.sort_unstable_by(f64::total_cmp);
    let kappa = quantile_type7(&values, 1.0 - alpha);
    // distribution-free band: ranks n(1-α) ± sqrt(nα(1-α))
    let n_f = n as f64;
    let center = n_f * (1.0 - alpha);
    let spread = (n_f * alpha * (1.0 - alpha)).sqrt();
    let lo = ((center - spread).floor().max(1.0) as usize).min(values.len()) - 1;
    let hi = ((center + spread).ceil().max(1.0) as usize).min(values.len()) - 1;
    let error = 0.5 * (values[hi] - values[lo]);
    Ok((kappa, error))
}

fn clt_critical_value(statistic: &Statistic, d: usize, alpha: f64) -> Result<(f64, f64)> {
    let p = match statistic {
        Statistic::PNorm { p } if p.is_finite() => *p,
        other => {
            return Err(Error::invalid(format!(
                "CLT calibration is only available for finite-p norms, not {}",
                other.label()
            )))
        }
    };
    // ‖ε‖_p^p = Σ|ε_i|^p with per-term raw moments m_k = E|Z|^{kp}
    let m1 = normal_abs_moment(p);
    let m2 = normal_abs_moment(2.0 * p);
    let m3 = normal_abs_moment(3.0 * p);
    let m4 = normal_abs_moment(4.0 * p);
    let var = m2 - m1 * m1;
    let c3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
    let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    let d_f = d as f64;
    let mean = d_f * m1;
    let sd = (d_f * var).sqrt();
    let skew = c3 / var.powf(1.5) / d_f.sqrt();
    let ex_kurt = (c4 / (var * var) - 3.0) / d_f;

    let z = normal_upper_quantile(alpha);
    let z_cf = z + skew * (z * z - 1.0) / 6.0 + ex_kurt * (z.powi(3) - 3.0 * z) / 24.0
        - skew * skew * (2.0 * z.powi(3) - 5.0 * z) / 36.0;
    let to_kappa = |zq: f64| (mean + zq * sd).max(0.0).powf(1.0 / p);
    let kappa = to_kappa(z);
    Ok((kappa, (to_kappa(z_cf) - kappa).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestKind {
    Single {
        statistic: Statistic,
        #[serde(with = "crate::serde_ext")]
        critical_value: f64,
        calibration: CalibrationMethod,
    },
    /// Rejects when either component rejects.
    Combined {
        primary: Box<TestSpec>,
        enhancement: Box<TestSpec>,
    },
}

/// A concrete test of the global null in dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub d: usize,
    /// Nominal size; for combinations the union bound on the component sizes.
    pub nominal_size: f64,
    pub kind: TestKind,
}

impl TestSpec {
    /// A single-statistic test with a given critical value.
    pub fn single(
        statistic: Statistic,
        d: usize,
        critical_value: f64,
        nominal_size: f64,
        calibration: CalibrationMethod,
    ) -> Result<Self> {
        ensure(d >= 1, || "dimension must be >= 1".into())?;
        statistic.validate(d)?;
        ensure(!critical_value.is_nan(), || "critical value must not be NaN".into())?;
        ensure((0.0..=1.0).contains(&nominal_size), || {
            format!("nominal size must lie in [0,1], got {nominal_size}")
        })?;
        Ok(Self {
            d,
            nominal_size,
            kind: TestKind::Single {
                statistic,
                critical_value,
                calibration,
            },
        })
    }

    /// Calibrates `statistic` to size `alpha` and wraps it in a spec.
    pub fn calibrated(
        statistic: Statistic,
        d: usize,
        alpha: f64,
        method: CalibrationMethod,
        stream: RngStream,
    ) -> Result<(Self, Calibration)> {
        let cal = calibrate_critical_value(&statistic, d, alpha, method, stream)?;
        let spec = Self::single(statistic, d, cal.critical_value, alpha, method)?;
        Ok((spec, cal))
    }

    /// Exactly calibrated LR test.
    pub fn lr(d: usize, alpha: f64) -> Result<Self> {
        Ok(Self::calibrated(Statistic::lr(), d, alpha, CalibrationMethod::Exact, RngStream::root(0))?.0)
    }

    /// A test that never rejects (`κ = +∞`).
    pub fn never_rejects(statistic: Statistic, d: usize) -> Result<Self> {
        Self::single(statistic, d, f64::INFINITY, 0.0, CalibrationMethod::Exact)
    }

    pub fn label(&self) -> String {
        match &self.kind {
            TestKind::Single { statistic, .. } => statistic.label(),
            TestKind::Combined { primary, enhancement } => {
                format!("{}|{}", primary.label(), enhancement.label())
            }
        }
    }

    /// The size when it is known without simulation: exact single tests.
    pub fn exact_size(&self) -> Option<f64> {
        match &self.kind {
            TestKind::Single {
                calibration: CalibrationMethod::Exact,
                ..
            } => Some(self.nominal_size),
            _ => None,
        }
    }

    pub fn is_lr(&self) -> bool {
        matches!(&self.kind, TestKind::Single { statistic: Statistic::PNorm { p }, .. } if *p == 2.0)
    }

    /// Rejection decision on a vector of the right length.
    pub fn rejects_with(&self, y: &[f64], scratch: &mut Vec<f64>) -> bool {
        match &self.kind {
            TestKind::Single {
                statistic,
                critical_value,
                ..
            } => statistic.value_with(y, scratch) >= *critical_value,
            TestKind::Combined { primary, enhancement } => {
                primary.rejects_with(y, scratch) || enhancement.rejects_with(y, scratch)
            }
        }
    }
}

/// Rejection indicator of `spec` at observation `y`.
pub fn evaluate(spec: &TestSpec, y: &[f64]) -> Result<bool> {
    ensure(y.len() == spec.d, || {
        format!("observation has length {} but the test has d = {}", y.len(), spec.d)
    })?;
    Ok(spec.rejects_with(y, &mut Vec::with_capacity(y.len())))
}

/// OR-combination of two tests of the same dimension.
pub fn combine(primary: TestSpec, enhancement: TestSpec) -> Result<TestSpec> {
    ensure(primary.d == enhancement.d, || {
        format!(
            "combined tests must share d (primary d = {}, enhancement d = {})",
            primary.d, enhancement.d
        )
    })?;
    Ok(TestSpec {
        d: primary.d,
        nominal_size: (primary.nominal_size + enhancement.nominal_size).min(1.0),
        kind: TestKind::Combined {
            primary: Box::new(primary),
            enhancement: Box::new(enhancement),
        },
    })
}

/// Monte-Carlo rejection probability with its Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub estimate: f64,
    pub replications: u64,
    pub rejections: u64,
    pub standard_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub stream: RngStream,
}

impl PowerEstimate {
    fn from_counts(rejections: u64, replications: u64, stream: RngStream) -> Self {
        let p = Proportion::from_counts(rejections, replications);
        Self {
            estimate: p.estimate,
            replications,
            rejections,
            standard_error: p.standard_error,
            ci_lower: p.ci_lower,
            ci_upper: p.ci_upper,
            stream,
        }
    }

    pub fn proportion(&self) -> Proportion {
        Proportion::from_counts(self.rejections, self.replications)
    }
}

pub const MIN_POWER_REPLICATIONS: u64 = 100;

/// Estimates `E ψ(θ + ε)` from `n` independent observations.
pub fn estimate_power(spec: &TestSpec, theta: &ParameterPoint, n: u64, stream: RngStream) -> Result<PowerEstimate> {
    ensure(n >= MIN_POWER_REPLICATIONS, || {
        format!("power estimation needs n >= {MIN_POWER_REPLICATIONS}, got {n}")
    })?;
    ensure(theta.dim() == spec.d, || {
        format!("theta has dimension {} but the test has d = {}", theta.dim(), spec.d)
    })?;
    Ok(estimate_power_unchecked(spec, theta.values(), n, stream))
}

pub(crate) fn estimate_power_unchecked(spec: &TestSpec, theta: &[f64], n: u64, stream: RngStream) -> PowerEstimate {
    let d = theta.len();
    let hits = mc::count_hits(
        n,
        stream,
        || (vec![0.0; d], Vec::with_capacity(d)),
        |rng, (y, scratch)| {
            draw_observation_into(theta, rng, y);
            spec.rejects_with(y, scratch)
        },
    );
    PowerEstimate::from_counts(hits, n, stream)
}

/// Sequential single-stream power estimate, for use inside an already
/// parallel outer loop.
pub(crate) fn estimate_power_serial(spec: &TestSpec, theta: &[f64], n: u64, stream: RngStream) -> PowerEstimate {
    let d = theta.len();
    let mut rng = stream.generator();
    let mut y = vec![0.0; d];
    let mut scratch = Vec::with_capacity(d);
    let mut hits = 0u64;
    for _ in 0..n {
        draw_observation_into(theta, &mut rng, &mut y);
        hits += u64::from(spec.rejects_with(&y, &mut scratch));
    }
    PowerEstimate::from_counts(hits, n, stream)
}

/// Query for the exact power `β_{d,α}(r)` of the size-α LR test at `‖θ‖₂ = r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrPowerQuery {
    pub d: usize,
    pub alpha: f64,
    pub r: f64,
}

const SERIES_TAIL_TOLERANCE: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 10_000_000;

/// `P(χ²_d(r²) > c)` with `c` the upper-α quantile of the central `χ²_d`.
///
/// Poisson mixture of central chi-square tails, summed outward from the
/// modal Poisson index. Each direction stops once a geometric bound on the
/// remaining Poisson mass falls below 1e-12, so the truncation error is at
/// most 2e-12.
pub fn lr_power_beta(q: &LrPowerQuery) -> Result<f64> {
    ensure(q.d >= 1, || "dimension must be >= 1".into())?;
    ensure(q.alpha > 0.0 && q.alpha < 1.0, || format!("alpha must lie in (0,1), got {}", q.alpha))?;
    ensure(q.r >= 0.0 && q.r.is_finite(), || format!("r must be finite and >= 0, got {}", q.r))?;
    let c = chi_square_upper_quantile(q.d as f64, q.alpha)?;
    if q.r == 0.0 {
        return Ok(q.alpha);
    }
    noncentral_chi_square_sf(q.d as f64, q.r * q.r, c)
}

/// Upper tail `P(χ²_df(λ) > x)` of the noncentral chi-square.
pub fn noncentral_chi_square_sf(df: f64, lambda: f64, x: f64) -> Result<f64> {
    let mu = 0.5 * lambda;
    if mu == 0.0 {
        return Ok(gamma_q(0.5 * df, 0.5 * x));
    }
    let half_x = 0.5 * x;
    let log_weight = |j: f64| -mu + j * mu.ln() - ln_gamma(j + 1.0);
    let term = |j: f64| log_weight(j).exp() * gamma_q(0.5 * df + j, half_x);

    let mode = mu.floor();
    let mut total = term(mode);
    let mut terms = 1usize;

    // upward: w_{j+1}/w_j = μ/(j+1), decreasing in j
    let mut j = mode;
    loop {
        let ratio = mu / (j + 1.0);
        if ratio < 1.0 && log_weight(j).exp() * ratio / (1.0 - ratio) < SERIES_TAIL_TOLERANCE {
            break;
        }
        j += 1.0;
        total += term(j);
        terms += 1;
        if terms > SERIES_MAX_TERMS {
            return Err(series_failure(df, lambda, x, terms, total));
        }
    }

    // downward: w_{j-1}/w_j = j/μ, decreasing as j decreases
    let mut j = mode;
    while j > 0.0 {
        let ratio = j / mu;
        if ratio < 1.0 && log_weight(j).exp() * ratio / (1.0 - ratio) < SERIES_TAIL_TOLERANCE {
            break;
        }
        j -= 1.0;
        total += term(j);
        terms += 1;
        if terms > SERIES_MAX_TERMS {
            return Err(series_failure(df, lambda, x, terms, total));
        }
    }
    if !total.is_finite() {
        return Err(series_failure(df, lambda, x, terms, total));
    }
    Ok(total.clamp(0.0, 1.0))
}

fn series_failure(df: f64, lambda: f64, x: f64, terms: usize, partial: f64) -> Error {
    Error::NumericFailure {
        routine: "noncentral_chi_square_sf",
        detail: format!("df={df}, lambda={lambda}, x={x}: {terms} terms, partial sum {partial}"),
    }
}
