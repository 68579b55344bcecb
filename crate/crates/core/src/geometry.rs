//! Geometry of p-balls in high dimension.
//!
//! Volumes are computed in log space via log-gamma because `Γ(1 + d/p)`
//! overflows long before `d = 4096`. Relative volumes of sets inside a
//! Euclidean ball are estimated by uniform sampling from the ball; with the
//! ball scaled to unit volume the sampled fraction is the volume itself.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::estimate::Proportion;
use crate::hypothesis::p_norm_unchecked;
use crate::mc;
use crate::rng::{RngStream, StreamRng};
use crate::special::ln_gamma;

/// The p-ball `{x ∈ R^d : ‖x‖_p ≤ r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub d: usize,
    #[serde(with = "crate::serde_ext")]
    pub p: f64,
    pub r: f64,
}

impl BallSpec {
    pub fn new(d: usize, p: f64, r: f64) -> Result<Self> {
        ensure(d >= 1, || "ball dimension must be >= 1".into())?;
        ensure(p > 0.0, || format!("ball exponent p must be > 0, got {p}"))?;
        ensure(r > 0.0 && r.is_finite(), || format!("ball radius must be positive and finite, got {r}"))?;
        Ok(Self { d, p, r })
    }
}

/// An exact or sampled volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    /// `value` is a natural logarithm (absolute volumes).
    pub is_log: bool,
    pub is_exact: bool,
    pub n: u64,
    pub hits: u64,
    pub standard_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl VolumeEstimate {
    pub fn exact(value: f64, is_log: bool) -> Self {
        Self {
            value,
            is_log,
            is_exact: true,
            n: 0,
            hits: 0,
            standard_error: 0.0,
            ci_lower: value,
            ci_upper: value,
        }
    }

    pub fn sampled(hits: u64, n: u64) -> Self {
        let p = Proportion::from_counts(hits, n);
        Self {
            value: p.estimate,
            is_log: false,
            is_exact: false,
            n,
            hits,
            standard_error: p.standard_error,
            ci_lower: p.ci_lower,
            ci_upper: p.ci_upper,
        }
    }

    pub fn proportion(&self) -> Proportion {
        Proportion::from_counts(self.hits, self.n)
    }
}

/// Natural log of `vol_d(B_p^d(r)) = (2Γ(1+1/p))^d r^d / Γ(1+d/p)`.
pub fn pball_log_volume(spec: &BallSpec) -> f64 {
    let d = spec.d as f64;
    if spec.p.is_infinite() {
        return d * (2.0 * spec.r).ln();
    }
    d * (std::f64::consts::LN_2 + ln_gamma(1.0 + 1.0 / spec.p)) - ln_gamma(1.0 + d / spec.p) + d * spec.r.ln()
}

/// Radius `e_{d,p}` of the unit-volume p-ball.
pub fn unit_volume_radius(d: usize, p: f64) -> Result<f64> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    ensure(p > 0.0, || format!("exponent p must be > 0, got {p}"))?;
    if p.is_infinite() {
        return Ok(0.5);
    }
    let d_f = d as f64;
    Ok((ln_gamma(1.0 + d_f / p) / d_f - std::f64::consts::LN_2 - ln_gamma(1.0 + 1.0 / p)).exp())
}

/// `u_d = (e_{d,2}/e_{d,p}) d^{1/(2p) - 1/4}` and the gamma-ratio lower bound
/// `(d/p)^{1/2-1/p} Γ(1+1/p)/Γ(3/2) d^{1/(2p) - 1/4}`.
///
/// The lower bound is claimed for `p >= 2` and `d(1/2 - 1/p) >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactor {
    pub value: f64,
    pub lower_bound: f64,
}

pub fn scaling_factor_u(d: usize, p: f64) -> Result<ScalingFactor> {
    ensure(p > 0.0 && p.is_finite(), || format!("exponent p must lie in (0, inf), got {p}"))?;
    let d_f = d as f64;
    let shrink = d_f.powf(1.0 / (2.0 * p) - 0.25);
    let value = unit_volume_radius(d, 2.0)? / unit_volume_radius(d, p)? * shrink;
    let log_ratio_bound =
        (0.5 - 1.0 / p) * (d_f / p).ln() + ln_gamma(1.0 / p + 1.0) - ln_gamma(1.5);
    Ok(ScalingFactor {
        value,
        lower_bound: log_ratio_bound.exp() * shrink,
    })
}

/// Writes a uniform point of the sphere of radius `r` into `out`.
///
/// Normalized Gaussian vector; an all-zero draw (probability zero) is redrawn.
pub fn fill_uniform_sphere(out: &mut [f64], r: f64, rng: &mut StreamRng) {
    loop {
        rng.fill_standard_normal(out);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let scale = r / norm;
            out.iter_mut().for_each(|v| *v *= scale);
            return;
        }
    }
}

pub fn sample_uniform_sphere(d: usize, r: f64, rng: &mut StreamRng) -> Result<Vec<f64>> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    ensure(r > 0.0 && r.is_finite(), || format!("radius must be positive and finite, got {r}"))?;
    let mut out = vec![0.0; d];
    fill_uniform_sphere(&mut out, r, rng);
    Ok(out)
}

/// Writes a uniform point of the Euclidean ball of radius `r` into `out`.
pub fn fill_uniform_ball(out: &mut [f64], r: f64, rng: &mut StreamRng) {
    let radius = r * rng.uniform().powf(1.0 / out.len() as f64);
    fill_uniform_sphere(out, radius, rng);
}

pub fn sample_uniform_ball(d: usize, r: f64, rng: &mut StreamRng) -> Result<Vec<f64>> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    ensure(r > 0.0 && r.is_finite(), || format!("radius must be positive and finite, got {r}"))?;
    let mut out = vec![0.0; d];
    fill_uniform_ball(&mut out, r, rng);
    Ok(out)
}

/// Radial law of the sampled points.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Radial {
    /// Uniform in the ball of radius `r`.
    Ball,
    /// Uniform in the shell `inner·r ≤ ‖x‖₂ ≤ r`.
    Shell { inner: f64 },
    /// Uniform on the sphere of radius `r`.
    Sphere,
}

/// `‖x‖_p` for `n` uniform points `x` of the given radial law, in replication order.
fn sampled_pnorms(d: usize, p: f64, r: f64, radial: Radial, n: u64, stream: RngStream) -> Vec<f64> {
    mc::sample_values(
        n,
        stream,
        || vec![0.0; d],
        |rng, g| {
            let radius = match radial {
                Radial::Ball => r * rng.uniform().powf(1.0 / d as f64),
                Radial::Shell { inner } => {
                    let floor = inner.powi(d as i32);
                    r * (floor + rng.uniform() * (1.0 - floor)).powf(1.0 / d as f64)
                }
                Radial::Sphere => r,
            };
            // direction from a Gaussian vector: ‖x‖_p = radius ‖g‖_p / ‖g‖₂
            loop {
                rng.fill_standard_normal(g);
                let l2 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if l2 > 0.0 {
                    return radius * p_norm_unchecked(g, p) / l2;
                }
            }
        },
    )
}

fn check_sampling(d: usize, p: f64, n: u64) -> Result<()> {
    ensure(d >= 1, || "dimension must be >= 1".into())?;
    ensure(p > 0.0, || format!("exponent p must be > 0, got {p}"))?;
    ensure(n >= 1, || "sample count must be >= 1".into())
}

pub const MIN_INTERSECTION_SAMPLES: u64 = 1_000;

/// `vol_d(B_2^d(e_{d,2}) ∩ t·B_p^d(e_{d,p}))` for each `t`, on common samples.
///
/// Since the Euclidean ball has unit volume, the fraction of its uniform
/// points with `‖x‖_p ≤ t·e_{d,p}` is the intersection volume. Sharing the
/// samples across `ts` makes the curve pathwise nondecreasing in `t`.
pub fn intersection_volume_curve(d: usize, p: f64, ts: &[f64], n: u64, stream: RngStream) -> Result<Vec<VolumeEstimate>> {
    check_sampling(d, p, n)?;
    ensure(n >= MIN_INTERSECTION_SAMPLES, || {
        format!("intersection volume needs n >= {MIN_INTERSECTION_SAMPLES}, got {n}")
    })?;
    ensure(ts.iter().all(|t| *t >= 0.0), || "scale t must be >= 0".into())?;
    let e2 = unit_volume_radius(d, 2.0)?;
    let ep = unit_volume_radius(d, p)?;
    let norms = sampled_pnorms(d, p, e2, Radial::Ball, n, stream);
    Ok(ts
        .iter()
        .map(|&t| {
            let limit = t * ep;
            let hits = norms.iter().filter(|&&v| v <= limit).count() as u64;
            VolumeEstimate::sampled(hits, n)
        })
        .collect())
}

pub fn intersection_volume_ratio(d: usize, p: f64, t: f64, n: u64, stream: RngStream) -> Result<VolumeEstimate> {
    Ok(intersection_volume_curve(d, p, &[t], n, stream)?[0])
}

/// Fraction of the Euclidean ball `B_2^d(r)` where `‖x‖_p >= s`.
pub fn pnorm_threshold_fraction(d: usize, p: f64, r: f64, s: f64, n: u64, stream: RngStream) -> Result<VolumeEstimate> {
    threshold_fraction(d, p, r, s, Radial::Ball, n, stream)
}

/// Same as [`pnorm_threshold_fraction`] but for the uniform measure on the sphere of radius `r`.
pub fn sphere_pnorm_threshold_fraction(
    d: usize,
    p: f64,
    r: f64,
    s: f64,
    n: u64,
    stream: RngStream,
) -> Result<VolumeEstimate> {
    threshold_fraction(d, p, r, s, Radial::Sphere, n, stream)
}

/// Same as [`pnorm_threshold_fraction`] restricted to the shell `inner·r ≤ ‖x‖₂ ≤ r`.
pub fn shell_pnorm_threshold_fraction(
    d: usize,
    p: f64,
    r: f64,
    inner: f64,
    s: f64,
    n: u64,
    stream: RngStream,
) -> Result<VolumeEstimate> {
    ensure((0.0..1.0).contains(&inner), || format!("shell inner fraction must lie in [0,1), got {inner}"))?;
    threshold_fraction(d, p, r, s, Radial::Shell { inner }, n, stream)
}

fn threshold_fraction(d: usize, p: f64, r: f64, s: f64, radial: Radial, n: u64, stream: RngStream) -> Result<VolumeEstimate> {
    check_sampling(d, p, n)?;
    ensure(r > 0.0 && r.is_finite(), || format!("radius must be positive and finite, got {r}"))?;
    ensure(s >= 0.0, || format!("threshold s must be >= 0, got {s}"))?;
    let norms = sampled_pnorms(d, p, r, radial, n, stream);
    let hits = norms.iter().filter(|&&v| v >= s).count() as u64;
    Ok(VolumeEstimate::sampled(hits, n))
}

/// Ball fraction of `{‖x‖_p >= s}` through the polar decomposition: the
/// radial law `R = r U^{1/d}` is split into `strata` equal-probability
/// strata, and within each a radius is drawn and the sphere fraction at that
/// radius sampled. Returns the stratified mean and its standard error.
pub fn radially_stratified_threshold_fraction(
    d: usize,
    p: f64,
    r: f64,
    s: f64,
    strata: usize,
    n_per_stratum: u64,
    stream: RngStream,
) -> Result<(f64, f64)> {
    check_sampling(d, p, n_per_stratum)?;
    ensure(strata >= 1, || "need at least one stratum".into())?;
    let per: Vec<(f64, f64)> = mc::map_items(strata as u64, stream, |k, sub| {
        let lo = k as f64 / strata as f64;
        let hi = (k + 1) as f64 / strata as f64;
        let norms = mc::sample_values(
            n_per_stratum,
            sub,
            || vec![0.0; d],
            |rng, g| {
                let u = lo + (hi - lo) * rng.uniform();
                let radius = r * u.powf(1.0 / d as f64);
                fill_uniform_sphere(g, radius, rng);
                p_norm_unchecked(g, p)
            },
        );
        let hits = norms.iter().filter(|&&v| v >= s).count() as u64;
        let prop = Proportion::from_counts(hits, n_per_stratum);
        (prop.estimate, prop.standard_error)
    });
    let m = strata as f64;
    let mean = per.iter().map(|(e, _)| e).sum::<f64>() / m;
    let se = per.iter().map(|(_, s)| s * s).sum::<f64>().sqrt() / m;
    Ok((mean, se))
}
