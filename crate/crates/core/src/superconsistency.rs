//! Excess-power regions and the concentration bound on their size.
//!
//! For a test ψ of size α, the excess-power region at margin ε is the set of
//! alternatives where ψ beats the LR test of the same size by more than ε.
//! On the sphere of radius `r` its uniform measure is at most
//! `2 exp(-ε²(d-1)/(2r²))`. This module measures such regions by nested
//! Monte Carlo (sphere points outside, power replications inside) and
//! reports them next to the bound, together with the supporting facts:
//! the LR test maximizes sphere-averaged power, and power functions are
//! 1/2-Lipschitz in θ.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::estimate::Proportion;
use crate::geometry::{fill_uniform_sphere, pnorm_threshold_fraction, VolumeEstimate};
use crate::hypothesis::{
    calibrate_critical_value, estimate_power_serial, lr_power_beta, CalibrationMethod,
    LrPowerQuery, PowerEstimate, Statistic, TestSpec,
};
use crate::mc;
use crate::model::{consistency_diagnostics, AlternativeRule, Amplitude, ParameterPoint};
use crate::rng::RngStream;

/// `2 exp(-ε²(d-1)/(2r²))` without capping.
pub fn concentration_bound_raw(d: usize, r: f64, epsilon: f64) -> f64 {
    2.0 * (-(epsilon * epsilon) * (d as f64 - 1.0) / (2.0 * r * r)).exp()
}

/// The concentration bound capped at 1.
pub fn concentration_bound(d: usize, r: f64, epsilon: f64) -> Result<f64> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    ensure(r > 0.0 && r.is_finite(), || format!("radius must be positive and finite, got {r}"))?;
    ensure(epsilon > 0.0, || format!("epsilon must be > 0, got {epsilon}"))?;
    Ok(concentration_bound_raw(d, r, epsilon).min(1.0))
}

/// A measured probability set against an analytic upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub estimate: Proportion,
    pub analytic_bound: f64,
    /// Tolerance added to the bound before comparing.
    pub slack: f64,
    /// `estimate.ci_upper <= analytic_bound + slack`.
    pub pass: bool,
}

impl BoundReport {
    pub fn new(estimate: Proportion, analytic_bound: f64, slack: f64) -> Self {
        Self {
            estimate,
            analytic_bound,
            slack,
            pass: estimate.ci_upper <= analytic_bound + slack,
        }
    }
}

/// Size of a test: exact where known, simulated under the null otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub exact: bool,
}

pub fn achieved_size(test: &TestSpec, n: u64, stream: RngStream) -> Result<SizeEstimate> {
    if let Some(alpha) = test.exact_size() {
        return Ok(SizeEstimate {
            value: alpha,
            standard_error: 0.0,
            exact: true,
        });
    }
    let null = ParameterPoint::zeros(test.d)?;
    let est = crate::hypothesis::estimate_power(test, &null, n, stream)?;
    Ok(SizeEstimate {
        value: est.estimate,
        standard_error: est.standard_error,
        exact: false,
    })
}

/// Inputs of an excess-power region measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessPowerQuery {
    pub d: usize,
    /// Radius of the sphere of alternatives.
    pub r: f64,
    pub epsilon: f64,
    pub test: TestSpec,
    /// Size `α` of `test`, used for the LR comparison power `β_{d,α}(r)`.
    pub size: f64,
    pub outer_n: u64,
    pub inner_n: u64,
    /// Extra margin, in inner standard errors, a point must clear to count.
    pub decision_margin: f64,
}

impl ExcessPowerQuery {
    pub fn validate(&self) -> Result<()> {
        ensure(self.d >= 1, || "dimension must be >= 1".into())?;
        ensure(self.test.d == self.d, || {
            format!("test has d = {} but the query has d = {}", self.test.d, self.d)
        })?;
        ensure(self.r > 0.0 && self.r.is_finite(), || format!("radius must be positive, got {}", self.r))?;
        ensure(self.epsilon > 0.0 && self.epsilon < 1.0, || {
            format!("epsilon must lie in (0,1), got {}", self.epsilon)
        })?;
        ensure(self.size > 0.0 && self.size < 1.0, || format!("size must lie in (0,1), got {}", self.size))?;
        ensure(self.outer_n >= 1, || "outer_n must be >= 1".into())?;
        ensure(self.decision_margin >= 0.0, || "decision_margin must be >= 0".into())?;
        ensure(3.0 / (self.inner_n as f64).sqrt() <= self.epsilon / 4.0, || {
            format!(
                "inner_n = {} too small for epsilon = {}: need 3/sqrt(inner_n) <= epsilon/4, i.e. inner_n >= {}",
                self.inner_n,
                self.epsilon,
                (12.0 / self.epsilon).powi(2).ceil()
            )
        })
    }
}

/// Measured spherical size of an excess-power region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMeasure {
    /// Fraction of sphere points counted inside the region. The decision
    /// margin biases this count downward.
    pub estimate: Proportion,
    /// `β_{d,α}(r)` at the query's size.
    pub lr_power: f64,
    pub size: f64,
    pub decision_margin: f64,
    /// `β_{d,α}(r) + ε >= 1`: the region is empty and nothing was sampled.
    pub empty_by_power_ceiling: bool,
}

/// Monte-Carlo power of `test` at `outer_n` uniform points of the sphere of radius `r`.
///
/// Point `i` uses `stream.substream(i)`: its `substream(0)` places the
/// point, its `substream(1)` drives the `inner_n` power replications.
pub fn sphere_point_powers(test: &TestSpec, r: f64, outer_n: u64, inner_n: u64, stream: RngStream) -> Vec<PowerEstimate> {
    let d = test.d;
    mc::map_items(outer_n, stream, |_, sub| {
        let mut theta = vec![0.0; d];
        fill_uniform_sphere(&mut theta, r, &mut sub.substream(0).generator());
        estimate_power_serial(test, &theta, inner_n, sub.substream(1))
    })
}

/// Counts sphere points whose power clears `lr_power + ε + margin·se`.
pub fn count_excess(powers: &[PowerEstimate], lr_power: f64, epsilon: f64, decision_margin: f64) -> Proportion {
    let hits = powers
        .iter()
        .filter(|p| p.estimate > lr_power + epsilon + decision_margin * p.standard_error)
        .count() as u64;
    Proportion::from_counts(hits, powers.len() as u64)
}

pub fn excess_power_region_measure(q: &ExcessPowerQuery, stream: RngStream) -> Result<RegionMeasure> {
    q.validate()?;
    let lr_power = lr_power_beta(&LrPowerQuery {
        d: q.d,
        alpha: q.size,
        r: q.r,
    })?;
    if lr_power + q.epsilon >= 1.0 {
        return Ok(RegionMeasure {
            estimate: Proportion::exact_zero(),
            lr_power,
            size: q.size,
            decision_margin: q.decision_margin,
            empty_by_power_ceiling: true,
        });
    }
    let powers = sphere_point_powers(&q.test, q.r, q.outer_n, q.inner_n, stream);
    Ok(RegionMeasure {
        estimate: count_excess(&powers, lr_power, q.epsilon, q.decision_margin),
        lr_power,
        size: q.size,
        decision_margin: q.decision_margin,
        empty_by_power_ceiling: false,
    })
}

/// Region measure compared against the concentration bound.
pub fn verify_concentration(q: &ExcessPowerQuery, stream: RngStream) -> Result<(RegionMeasure, BoundReport)> {
    let measure = excess_power_region_measure(q, stream)?;
    let bound = concentration_bound(q.d, q.r, q.epsilon)?;
    let report = BoundReport::new(measure.estimate, bound, 0.0);
    Ok((measure, report))
}

/// Threshold `s_d` of a p-norm region `{θ ∈ B_2^d(r_d) : ‖θ‖_p >= s_d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum RegionThreshold {
    /// `s_d = ∞`: the empty region.
    Empty,
    /// `s_d = 0`: the whole ball.
    Full,
    Threshold { amplitude: Amplitude },
}

/// Relative-volume decay experiment for a p-norm test on a grid of dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeVolumeConfig {
    pub statistic: Statistic,
    pub alpha: f64,
    pub calibration: CalibrationMethod,
    /// Null replications for the achieved size of non-exact tests.
    pub size_n: u64,
    pub d_grid: Vec<usize>,
    /// Ball radius `r_d`.
    pub radius: Amplitude,
    pub region: RegionThreshold,
    /// Uniform ball samples per grid point.
    pub n: u64,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeVolumeRow {
    pub d: usize,
    pub r: f64,
    /// `s_d`, `+∞` for the empty region.
    #[serde(with = "crate::serde_ext")]
    pub threshold: f64,
    pub size: f64,
    pub lr_power: f64,
    pub volume: VolumeEstimate,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeVolumeReport {
    /// `(1 - max_d β_{d,α_d}(r_d)) / 2`, the grid maximum standing in for the limsup.
    pub epsilon: f64,
    pub max_lr_power: f64,
    pub rows: Vec<RelativeVolumeRow>,
}

impl RelativeVolumeReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.report.pass)
    }
}

/// Measures `vol(D_d)/vol(B_2^d(r_d))` for a p-norm superconsistency region
/// and compares it with `2 exp(-ε²(d-1)/(2r_d²))`, `ε` from the LR power
/// along the grid.
pub fn verify_theorem3(cfg: &RelativeVolumeConfig, stream: RngStream) -> Result<RelativeVolumeReport> {
    ensure(!cfg.d_grid.is_empty(), || "d_grid must not be empty".into())?;
    ensure(cfg.d_grid.windows(2).all(|w| w[1] > w[0]), || "d_grid must be strictly increasing".into())?;
    let p = match cfg.statistic {
        Statistic::PNorm { p } if p.is_finite() => p,
        ref other => {
            return Err(Error::invalid(format!(
                "relative-volume regions are defined for finite p-norm tests, not {}",
                other.label()
            )))
        }
    };
    let radius_growth = cfg.radius.d_exponent - 0.25;
    if radius_growth > 0.0 || (radius_growth == 0.0 && cfg.radius.log_exponent > 0.0) {
        return Err(Error::ConfigurationInvalid(format!(
            "r_d / d^(1/4) must stay bounded, but the radius rule {:?} grows faster",
            cfg.radius
        )));
    }
    // inclusion in the consistency set: the smallest p-criterion over the
    // region is attained by the single spike of height s_d
    if let RegionThreshold::Threshold { amplitude } = cfg.region {
        let diag = consistency_diagnostics(&AlternativeRule::spike(1, amplitude), p, &cfg.d_grid)?;
        if !diag.p_diverges() {
            return Err(Error::ConfigurationInvalid(format!(
                "region threshold {amplitude:?} does not lie in the consistency set of the p = {p} test \
                 (p-criterion {:?} does not grow along the grid)",
                diag.p_criterion
            )));
        }
    } else if cfg.region == RegionThreshold::Full {
        return Err(Error::ConfigurationInvalid(
            "the full ball is not contained in the consistency set of any test with nontrivial size".into(),
        ));
    }

    let mut sizes = Vec::with_capacity(cfg.d_grid.len());
    let mut lr_powers = Vec::with_capacity(cfg.d_grid.len());
    for (i, &d) in cfg.d_grid.iter().enumerate() {
        let sub = stream.substream(i as u64);
        let cal = calibrate_critical_value(&cfg.statistic, d, cfg.alpha, cfg.calibration, sub.substream(0))?;
        let test = TestSpec::single(cfg.statistic.clone(), d, cal.critical_value, cfg.alpha, cfg.calibration)?;
        let size = achieved_size(&test, cfg.size_n, sub.substream(1))?.value;
        ensure(size > 0.0 && size < 1.0, || format!("achieved size {size} at d = {d} is degenerate"))?;
        let r = cfg.radius.at(d);
        lr_powers.push(lr_power_beta(&LrPowerQuery { d, alpha: size, r })?);
        sizes.push(size);
    }
    let max_lr_power = lr_powers.iter().copied().fold(0.0, f64::max);
    let epsilon = (1.0 - max_lr_power) / 2.0;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::ConfigurationInvalid(format!(
            "LR power reaches {max_lr_power} on the grid, leaving no positive epsilon"
        )));
    }

    let mut rows = Vec::with_capacity(cfg.d_grid.len());
    for (i, &d) in cfg.d_grid.iter().enumerate() {
        let r = cfg.radius.at(d);
        let (threshold, volume) = match cfg.region {
            RegionThreshold::Empty => (f64::INFINITY, VolumeEstimate::sampled(0, cfg.n.max(1))),
            RegionThreshold::Full => unreachable!("rejected above"),
            RegionThreshold::Threshold { amplitude } => {
                let s = amplitude.at(d);
                let sub = stream.substream(i as u64).substream(2);
                (s, pnorm_threshold_fraction(d, p, r, s, cfg.n, sub)?)
            }
        };
        let bound = concentration_bound(d, r, epsilon)?;
        rows.push(RelativeVolumeRow {
            d,
            r,
            threshold,
            size: sizes[i],
            lr_power: lr_powers[i],
            volume,
            report: BoundReport::new(volume.proportion(), bound, cfg.slack),
        });
    }
    Ok(RelativeVolumeReport {
        epsilon,
        max_lr_power,
        rows,
    })
}

/// Sphere-averaged power of a test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WapEstimate {
    pub estimate: f64,
    /// Standard error of the outer mean; it absorbs the inner noise.
    pub standard_error: f64,
    pub outer_n: u64,
    pub inner_n: u64,
}

/// `∫ E ψ(θ + ε) dρ_{d,r}(θ)` by nested Monte Carlo.
pub fn wap_average_power(test: &TestSpec, r: f64, outer_n: u64, inner_n: u64, stream: RngStream) -> Result<WapEstimate> {
    ensure(r > 0.0 && r.is_finite(), || format!("radius must be positive, got {r}"))?;
    ensure(outer_n >= 2, || "outer_n must be >= 2".into())?;
    ensure(inner_n >= 1, || "inner_n must be >= 1".into())?;
    let powers = sphere_point_powers(test, r, outer_n, inner_n, stream);
    let m = outer_n as f64;
    let mean = powers.iter().map(|p| p.estimate).sum::<f64>() / m;
    let var = powers.iter().map(|p| (p.estimate - mean).powi(2)).sum::<f64>() / (m - 1.0);
    // when every point agrees exactly the sample variance vanishes; fall back to the pooled binomial error
    let pooled = (mean * (1.0 - mean) / (m * inner_n as f64)).sqrt();
    Ok(WapEstimate {
        estimate: mean,
        standard_error: (var / m).sqrt().max(pooled),
        outer_n,
        inner_n,
    })
}

/// Paired comparison of a test's power at two parameters.
/// Weighted average power of a test against the LR power at its size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WapReport {
    pub wap: WapEstimate,
    pub size: SizeEstimate,
    pub lr_power: f64,
    /// `wap <= lr_power + 4 se`.
    pub pass: bool,
}

/// Compares the sphere-averaged power of `test` with `β_{d,α}(r)`, where `α`
/// is the achieved size (estimated from `size_n` null draws unless exact).
pub fn wap_dominance(
    test: &TestSpec,
    r: f64,
    outer_n: u64,
    inner_n: u64,
    size_n: u64,
    stream: RngStream,
) -> Result<WapReport> {
    let size = achieved_size(test, size_n, stream.substream(0))?;
    ensure(size.value > 0.0 && size.value < 1.0, || format!("achieved size {} is degenerate", size.value))?;
    let wap = wap_average_power(test, r, outer_n, inner_n, stream.substream(1))?;
    let lr_power = lr_power_beta(&LrPowerQuery {
        d: test.d,
        alpha: size.value,
        r,
    })?;
    Ok(WapReport {
        wap,
        size,
        lr_power,
        pass: wap.estimate <= lr_power + 4.0 * wap.standard_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub power_1: f64,
    pub power_2: f64,
    /// `|P̂(θ₁) - P̂(θ₂)|`.
    pub delta: f64,
    /// `‖θ₁ - θ₂‖₂ / 2`.
    pub bound: f64,
    /// Standard error of the paired difference.
    pub standard_error: f64,
    pub pass: bool,
}

#[derive(Default)]
struct PairCounts {
    first: u64,
    second: u64,
    discordant: u64,
}

/// Checks `|P(θ₁) - P(θ₂)| <= ‖θ₁ - θ₂‖₂/2` within 4 standard errors.
///
/// Both powers use the same noise draws, so the difference is estimated
/// from paired indicators.
pub fn lipschitz_power_check(
    test: &TestSpec,
    theta_1: &ParameterPoint,
    theta_2: &ParameterPoint,
    inner_n: u64,
    stream: RngStream,
) -> Result<LipschitzReport> {
    ensure(theta_1.dim() == theta_2.dim(), || "theta_1 and theta_2 must have the same dimension".into())?;
    ensure(theta_1.dim() == test.d, || {
        format!("parameters have dimension {} but the test has d = {}", theta_1.dim(), test.d)
    })?;
    ensure(inner_n >= 2, || "inner_n must be >= 2".into())?;
    let d = test.d;
    let (t1, t2) = (theta_1.values(), theta_2.values());
    let counts = mc::fold_replications(
        inner_n,
        stream,
        || (vec![0.0; d], vec![0.0; d], vec![0.0; d], Vec::with_capacity(d)),
        |acc: &mut PairCounts, rng, (noise, y1, y2, scratch)| {
            rng.fill_standard_normal(noise);
            for i in 0..d {
                y1[i] = t1[i] + noise[i];
                y2[i] = t2[i] + noise[i];
            }
            let a = test.rejects_with(y1, scratch);
            let b = test.rejects_with(y2, scratch);
            acc.first += u64::from(a);
            acc.second += u64::from(b);
            acc.discordant += u64::from(a != b);
        },
        |x, y| PairCounts {
            first: x.first + y.first,
            second: x.second + y.second,
            discordant: x.discordant + y.discordant,
        },
    );
    let n = inner_n as f64;
    let power_1 = counts.first as f64 / n;
    let power_2 = counts.second as f64 / n;
    let mean_diff = power_1 - power_2;
    let second_moment = counts.discordant as f64 / n;
    let var = (second_moment - mean_diff * mean_diff).max(0.0) * n / (n - 1.0);
    let standard_error = (var / n).sqrt();
    let bound = t1.iter().zip(t2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / 2.0;
    let delta = mean_diff.abs();
    Ok(LipschitzReport {
        power_1,
        power_2,
        delta,
        bound,
        standard_error,
        pass: delta <= bound + 4.0 * standard_error,
    })
}

/// Sphere-averaged likelihood-ratio kernel along a grid of `‖y‖₂` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub grid: Vec<f64>,
    /// `g(a) = ∫ cosh(a γ₁) dρ_{d,r}(γ)`, the symmetrized `∫ exp(a γ₁) dρ_{d,r}`.
    pub values: Vec<f64>,
    pub nondecreasing: bool,
    pub all_at_least_one: bool,
}

/// Estimates `g(a)` on `grid` from `n` common sphere samples.
pub fn spherical_bayes_statistic_monotonicity(
    d: usize,
    r: f64,
    grid: &[f64],
    n: u64,
    stream: RngStream,
) -> Result<MonotonicityReport> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    ensure(r > 0.0 && r.is_finite(), || format!("radius must be positive, got {r}"))?;
    ensure(n >= 1, || "n must be >= 1".into())?;
    ensure(grid.iter().all(|a| *a >= 0.0), || "grid values must be >= 0".into())?;
    ensure(grid.windows(2).all(|w| w[1] > w[0]), || "grid must be increasing".into())?;
    let first_coords = mc::sample_values(
        n,
        stream,
        || vec![0.0; d],
        |rng, g| {
            fill_uniform_sphere(g, r, rng);
            g[0]
        },
    );
    let values: Vec<f64> = grid
        .iter()
        .map(|&a| first_coords.iter().map(|&x| (a * x).cosh()).sum::<f64>() / n as f64)
        .collect();
    Ok(MonotonicityReport {
        grid: grid.to_vec(),
        nondecreasing: values.windows(2).all(|w| w[1] >= w[0]),
        all_at_least_one: values.iter().all(|&v| v >= 1.0),
        values,
    })
}
