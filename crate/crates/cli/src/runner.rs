//! Executes a validated [`RunConfig`] into output rows.

use std::collections::BTreeMap;
use std::time::Instant;

use gausstest_core::geometry::{
    fill_uniform_sphere, intersection_volume_ratio, pball_log_volume, pnorm_threshold_fraction, scaling_factor_u,
};
use gausstest_core::special::{normal_upper_quantile, standard_normal_quantile};
use gausstest_core::superconsistency::{achieved_size, verify_concentration, wap_dominance, lipschitz_power_check};
use gausstest_core::{
    calibrate_critical_value, estimate_power, lr_power_beta, BallSpec, CalibrationMethod, Error, ExcessPowerQuery,
    LrPowerQuery, ParameterPoint, RngStream, Statistic, TestSpec,
};

use crate::config::{
    CalibrateSpec, Experiment, LipschitzSpec, PowerCurveSpec, Prop4Spec, RunConfig, Scale, TestConfig, Theorem2Spec,
    Trend, VolumeMeasure, VolumeSweepSpec, WapSpec,
};
use crate::record::Record;

/// Rows of a run plus per-experiment wall times (seconds), which are kept
/// out of the rows so that tables are reproducible byte for byte.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config_hash: String,
    pub records: Vec<Record>,
    pub wall_times: Vec<(String, f64)>,
}

impl RunOutput {
    pub fn failed_rows(&self) -> usize {
        self.records.iter().filter(|r| r.status != "ok").count()
    }
}

pub fn run(cfg: &RunConfig) -> RunOutput {
    let config_hash = cfg.hash();
    let root = RngStream::root(cfg.seed);
    let mut records = Vec::new();
    let mut wall_times = Vec::new();
    for exp in &cfg.experiments {
        let start = Instant::now();
        let mut rows = Rows {
            template: Record {
                config_hash: config_hash.clone(),
                seed: cfg.seed,
                experiment: exp.name().to_string(),
                kind: exp.kind().to_string(),
                status: "ok".into(),
                ..Record::default()
            },
            rows: Vec::new(),
        };
        let stream = root.substream(name_key(exp.name()));
        match exp {
            Experiment::Calibrate(s) => calibrate(s, stream, &mut rows),
            Experiment::PowerCurve(s) => power_curve(s, stream, &mut rows),
            Experiment::VolumeSweep(s) => volume_sweep(s, stream, &mut rows),
            Experiment::VerifyTheorem2(s) => theorem2(s, stream, &mut rows),
            Experiment::VerifyProp4(s) => prop4(s, stream, &mut rows),
            Experiment::WapCheck(s) => wap(s, stream, &mut rows),
            Experiment::LipschitzCheck(s) => lipschitz(s, stream, &mut rows),
        }
        records.extend(rows.rows);
        wall_times.push((exp.name().to_string(), start.elapsed().as_secs_f64()));
    }
    RunOutput {
        config_hash,
        records,
        wall_times,
    }
}

/// FNV-1a hash of the experiment name: each experiment draws from its own
/// substream, unaffected by the other entries of the config.
fn name_key(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

struct Rows {
    template: Record,
    rows: Vec<Record>,
}

impl Rows {
    fn start(&self, quantity: &str) -> Record {
        Record {
            row: self.rows.len(),
            quantity: quantity.into(),
            ..self.template.clone()
        }
    }

    /// Stores `rec` after `fill` ran; a failure becomes the row's status.
    fn push(&mut self, mut rec: Record, fill: impl FnOnce(&mut Record) -> gausstest_core::Result<()>) {
        if let Err(e) = fill(&mut rec) {
            rec.status = status_of(&e).into();
            rec.message = e.to_string();
            rec.pass = None;
            rec.margin = None;
        }
        self.rows.push(rec);
    }
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::CalibrationInsufficient { .. } => "calibration_insufficient",
        Error::NumericFailure { .. } => "numeric_failure",
        Error::ConfigurationInvalid(_) => "configuration_invalid",
    }
}

fn stream_label(s: RngStream) -> String {
    format!("{}:{}", s.seed, s.stream_id)
}

fn exponent(stat: &Statistic) -> Option<f64> {
    match stat {
        Statistic::PNorm { p } => Some(*p),
        _ => None,
    }
}

fn mc_n(method: CalibrationMethod) -> Option<u64> {
    match method {
        CalibrationMethod::MonteCarlo { n } => Some(n),
        _ => None,
    }
}

/// Closed-form critical values that do not go through the calibration code.
fn closed_form_critical_value(stat: &Statistic, d: usize, alpha: f64) -> Option<f64> {
    match exponent(stat)? {
        p if p.is_infinite() => Some(standard_normal_quantile((1.0 + (1.0 - alpha).powf(1.0 / d as f64)) / 2.0)),
        p if p == 2.0 && d == 1 => Some(standard_normal_quantile(1.0 - alpha / 2.0)),
        p if p == 2.0 && d == 2 => Some((-2.0 * alpha.ln()).sqrt()),
        _ => None,
    }
}

/// Two-sided 99.9% half-width for a proportion with true value `p`.
fn band_999(p: f64, n: u64) -> f64 {
    normal_upper_quantile(0.0005) * (p * (1.0 - p) / n as f64).sqrt()
}

/// Signed trend margin; nonnegative when the trend holds.
fn trend_margin(trend: Trend, previous: f64, current: f64) -> f64 {
    match trend {
        Trend::Nondecreasing => current - previous,
        Trend::Nonincreasing => previous - current,
    }
}

fn calibration_stream(exp: RngStream, test: usize, d: usize) -> RngStream {
    exp.substream(0).substream(test as u64).substream(d as u64)
}

fn work_stream(exp: RngStream, parts: &[u64]) -> RngStream {
    parts.iter().fold(exp.substream(1), |s, &k| s.substream(k))
}

fn calibrate(s: &CalibrateSpec, exp: RngStream, rows: &mut Rows) {
    for &d in &s.d {
        for (ai, &alpha) in s.alpha.iter().enumerate() {
            let stream = work_stream(exp, &[d as u64, ai as u64]);
            let mut base = rows.start("critical_value");
            base.test = s.family.label();
            base.d = Some(d);
            base.p = exponent(&s.family);
            base.alpha = Some(alpha);
            base.size = Some(alpha);
            base.n = mc_n(s.calibration);
            base.stream = stream_label(stream.substream(0));
            let mut spec = None;
            rows.push(base.clone(), |rec| {
                let cal = calibrate_critical_value(&s.family, d, alpha, s.calibration, stream.substream(0))?;
                rec.value = Some(cal.critical_value);
                rec.std_error = Some(cal.error);
                if let Some(reference) = closed_form_critical_value(&s.family, d, alpha) {
                    let tol = (4.0 * cal.error).max(1e-9);
                    rec.reference = Some(reference);
                    rec.bound = Some(tol);
                    rec.set_check(tol - (cal.critical_value - reference).abs());
                }
                spec = Some(TestSpec::single(s.family.clone(), d, cal.critical_value, alpha, s.calibration)?);
                Ok(())
            });
            let (Some(n), Some(spec)) = (s.size_check_n, spec) else { continue };
            let mut rec = rows.start("null_rejection_rate");
            rec.n = Some(n);
            rec.stream = stream_label(stream.substream(1));
            rec.test = base.test;
            rec.d = base.d;
            rec.p = base.p;
            rec.alpha = base.alpha;
            rec.size = base.size;
            rows.push(rec, |rec| {
                let est = estimate_power(&spec, &ParameterPoint::zeros(d)?, n, stream.substream(1))?;
                let half = band_999(alpha, n);
                rec.value = Some(est.estimate);
                rec.std_error = Some(est.standard_error);
                rec.ci_lower = Some(est.ci_lower);
                rec.ci_upper = Some(est.ci_upper);
                rec.reference = Some(alpha);
                rec.bound = Some(half);
                rec.set_check(half - (est.estimate - alpha).abs());
                Ok(())
            });
        }
    }
}

fn power_curve(s: &PowerCurveSpec, exp: RngStream, rows: &mut Rows) {
    let mut specs = BTreeMap::new();
    for j in 0..s.signal.len() {
        // shared across the dimension grid: common random numbers along d
        let stream = work_stream(exp, &[j as u64]);
        let mut previous: Option<f64> = None;
        for &d in &s.d {
            let mut rec = rows.start("power");
            rec.test = s.test.label();
            rec.d = Some(d);
            rec.p = exponent(&s.test.family);
            rec.alpha = Some(s.test.alpha);
            rec.n = Some(s.n);
            rec.stream = stream_label(stream);
            rows.push(rec, |rec| {
                let spec = cached_spec(&mut specs, &s.test, 0, d, exp)?;
                let theta = s.signal.realize(j, d)?;
                let r = theta.norm2();
                let est = estimate_power(&spec, &theta, s.n, stream)?;
                let beta = lr_power_beta(&LrPowerQuery { d, alpha: s.test.alpha, r })?;
                rec.size = Some(spec.nominal_size);
                rec.r = Some(r);
                rec.value = Some(est.estimate);
                rec.std_error = Some(est.standard_error);
                rec.ci_lower = Some(est.ci_lower);
                rec.ci_upper = Some(est.ci_upper);
                rec.reference = Some(beta);
                let mut margins = Vec::new();
                if spec.is_lr() && spec.exact_size().is_some() {
                    // standard error implied by the oracle value
                    let tol = 4.0 * (beta * (1.0 - beta) / s.n as f64).sqrt();
                    rec.bound = Some(tol);
                    margins.push(tol - (est.estimate - beta).abs());
                }
                if let (Some(trend), Some(prev)) = (s.trend, previous) {
                    margins.push(trend_margin(trend, prev, est.estimate));
                }
                if let Some(m) = margins.into_iter().reduce(f64::min) {
                    rec.set_check(m);
                }
                previous = Some(est.estimate);
                Ok(())
            });
        }
    }
}

fn cached_spec(
    cache: &mut BTreeMap<(usize, usize), TestSpec>,
    test: &TestConfig,
    index: usize,
    d: usize,
    exp: RngStream,
) -> gausstest_core::Result<TestSpec> {
    if let Some(spec) = cache.get(&(index, d)) {
        return Ok(spec.clone());
    }
    let spec = test.build(d, calibration_stream(exp, index, d))?;
    cache.insert((index, d), spec.clone());
    Ok(spec)
}

fn volume_sweep(s: &VolumeSweepSpec, exp: RngStream, rows: &mut Rows) {
    // one stream for the whole grid: pathwise comparisons along d
    let stream = work_stream(exp, &[]);
    let mut previous: Option<f64> = None;
    for &d in &s.d {
        let quantity = match s.measure {
            VolumeMeasure::Intersection { .. } => "intersection_volume",
            VolumeMeasure::Threshold { .. } => "threshold_fraction",
            VolumeMeasure::LogVolume { .. } => "log_volume",
        };
        let mut rec = rows.start(quantity);
        rec.d = Some(d);
        rec.p = Some(s.p);
        rows.push(rec, |rec| {
            let value = match &s.measure {
                VolumeMeasure::Intersection { t } => {
                    let t = match t {
                        Scale::Value(t) => *t,
                        Scale::Named(_) => scaling_factor_u(d, s.p)?.value,
                    };
                    rec.t = Some(t);
                    rec.n = Some(s.n);
                    rec.stream = stream_label(stream);
                    let v = intersection_volume_ratio(d, s.p, t, s.n, stream)?;
                    fill_volume(rec, &v);
                    v.value
                }
                VolumeMeasure::Threshold { r, s: thr } => {
                    rec.r = Some(r.at(d));
                    rec.s = Some(thr.at(d));
                    rec.n = Some(s.n);
                    rec.stream = stream_label(stream);
                    let v = pnorm_threshold_fraction(d, s.p, r.at(d), thr.at(d), s.n, stream)?;
                    fill_volume(rec, &v);
                    v.value
                }
                VolumeMeasure::LogVolume { r } => {
                    rec.r = Some(r.at(d));
                    let v = pball_log_volume(&BallSpec::new(d, s.p, r.at(d))?);
                    rec.value = Some(v);
                    v
                }
            };
            if let (Some(trend), Some(prev)) = (s.trend, previous) {
                rec.set_check(trend_margin(trend, prev, value));
            }
            previous = Some(value);
            Ok(())
        });
    }
}

fn fill_volume(rec: &mut Record, v: &gausstest_core::VolumeEstimate) {
    rec.value = Some(v.value);
    rec.std_error = Some(v.standard_error);
    rec.ci_lower = Some(v.ci_lower);
    rec.ci_upper = Some(v.ci_upper);
}

fn theorem2(s: &Theorem2Spec, exp: RngStream, rows: &mut Rows) {
    let stream = work_stream(exp, &[0]);
    let last = s.d.len() - 1;
    let mut previous: Option<f64> = None;
    for (i, &d) in s.d.iter().enumerate() {
        let mut rec = rows.start("threshold_fraction");
        let (r, thr) = (s.radius.at(d), s.threshold.at(d));
        rec.d = Some(d);
        rec.p = Some(s.p);
        rec.r = Some(r);
        rec.s = Some(thr);
        rec.n = Some(s.n);
        rec.stream = stream_label(stream);
        rows.push(rec, |rec| {
            let v = pnorm_threshold_fraction(d, s.p, r, thr, s.n, stream)?;
            fill_volume(rec, &v);
            let mut margins = Vec::new();
            if let Some(prev) = previous {
                margins.push(prev - v.value);
            }
            if i == last {
                rec.bound = Some(s.final_max);
                margins.push(s.final_max - v.value);
            }
            if let Some(m) = margins.into_iter().reduce(f64::min) {
                rec.set_check(m);
            }
            previous = Some(v.value);
            Ok(())
        });
    }

    let stream = work_stream(exp, &[1]);
    let mut first: Option<f64> = None;
    let mut previous: Option<f64> = None;
    let last = s.intersection_d.len().saturating_sub(1);
    for (i, &d) in s.intersection_d.iter().enumerate() {
        let mut rec = rows.start("intersection_volume");
        rec.d = Some(d);
        rec.p = Some(s.p);
        rec.n = Some(s.intersection_n);
        rec.stream = stream_label(stream);
        rows.push(rec, |rec| {
            let t = scaling_factor_u(d, s.p)?.value;
            rec.t = Some(t);
            let v = intersection_volume_ratio(d, s.p, t, s.intersection_n, stream)?;
            fill_volume(rec, &v);
            let mut margins = Vec::new();
            if let Some(prev) = previous {
                margins.push(v.value - prev);
            }
            let mut strict = None;
            if i == last && i > 0 {
                // the final Wilson lower limit must exceed the first value
                let first = first.expect("first row recorded");
                rec.reference = Some(first);
                strict = Some(v.ci_lower - first);
                margins.push(v.ci_lower - first);
            }
            if let Some(m) = margins.into_iter().reduce(f64::min) {
                rec.set_check(m);
                if strict.is_some_and(|m| m <= 0.0) {
                    rec.pass = Some(false);
                }
            }
            first.get_or_insert(v.value);
            previous = Some(v.value);
            Ok(())
        });
    }
}

fn prop4(s: &Prop4Spec, exp: RngStream, rows: &mut Rows) {
    for (ti, test) in s.tests.iter().enumerate() {
        for &d in &s.d {
            let r = s.r.at(d);
            let built = test.build(d, calibration_stream(exp, ti, d)).and_then(|spec| {
                let size = achieved_size(&spec, s.size_n, work_stream(exp, &[ti as u64, d as u64]))?;
                Ok((spec, size))
            });
            for (ei, &epsilon) in s.epsilon.iter().enumerate() {
                let stream = work_stream(exp, &[ti as u64, d as u64, ei as u64 + 1]);
                let mut rec = rows.start("excess_power_region");
                rec.test = test.label();
                rec.d = Some(d);
                rec.p = exponent(&test.family);
                rec.alpha = Some(test.alpha);
                rec.r = Some(r);
                rec.eps = Some(epsilon);
                rec.n = Some(s.outer_n);
                rec.stream = stream_label(stream);
                rows.push(rec, |rec| {
                    let (spec, size) = built.clone()?;
                    rec.size = Some(size.value);
                    let q = ExcessPowerQuery {
                        d,
                        r,
                        epsilon,
                        test: spec,
                        size: size.value,
                        outer_n: s.outer_n,
                        inner_n: s.inner_n,
                        decision_margin: s.decision_margin,
                    };
                    let (measure, report) = verify_concentration(&q, stream)?;
                    rec.value = Some(measure.estimate.estimate);
                    rec.std_error = Some(measure.estimate.standard_error);
                    rec.ci_lower = Some(measure.estimate.ci_lower);
                    rec.ci_upper = Some(measure.estimate.ci_upper);
                    rec.reference = Some(measure.lr_power);
                    rec.bound = Some(report.analytic_bound);
                    rec.margin = Some(report.analytic_bound + report.slack - measure.estimate.ci_upper);
                    rec.pass = Some(report.pass);
                    if measure.empty_by_power_ceiling {
                        rec.message = "empty: lr_power + eps >= 1".into();
                    }
                    Ok(())
                });
            }
        }
    }
}

fn wap(s: &WapSpec, exp: RngStream, rows: &mut Rows) {
    let mut specs = BTreeMap::new();
    for (ti, test) in s.tests.iter().enumerate() {
        for (pi, point) in s.points.iter().enumerate() {
            let stream = work_stream(exp, &[ti as u64, pi as u64]);
            let mut rec = rows.start("weighted_average_power");
            rec.test = test.label();
            rec.d = Some(point.d);
            rec.p = exponent(&test.family);
            rec.alpha = Some(test.alpha);
            rec.r = Some(point.r);
            rec.n = Some(s.outer_n * s.inner_n);
            rec.stream = stream_label(stream);
            rows.push(rec, |rec| {
                let spec = cached_spec(&mut specs, test, ti, point.d, exp)?;
                let rep = wap_dominance(&spec, point.r, s.outer_n, s.inner_n, s.size_n, stream)?;
                rec.size = Some(rep.size.value);
                rec.value = Some(rep.wap.estimate);
                rec.std_error = Some(rep.wap.standard_error);
                rec.reference = Some(rep.lr_power);
                let bound = rep.lr_power + 4.0 * rep.wap.standard_error;
                rec.bound = Some(bound);
                rec.margin = Some(bound - rep.wap.estimate);
                rec.pass = Some(rep.pass);
                Ok(())
            });
        }
    }
}

fn lipschitz(s: &LipschitzSpec, exp: RngStream, rows: &mut Rows) {
    let mut specs = BTreeMap::new();
    let tests = s.tests.len() as u64;
    for k in 0..s.pairs {
        let ti = (k % tests) as usize;
        let d = s.d[((k / tests) % s.d.len() as u64) as usize];
        let test = &s.tests[ti];
        let mut g = work_stream(exp, &[k, 0]).generator();
        let theta_1: Vec<f64> = (0..d).map(|_| s.signal_scale * g.standard_normal()).collect();
        let mut step = vec![0.0; d];
        fill_uniform_sphere(&mut step, s.max_step * g.uniform(), &mut g);
        let theta_2: Vec<f64> = theta_1.iter().zip(&step).map(|(a, b)| a + b).collect();
        let h = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        let stream = work_stream(exp, &[k, 1]);

        let mut rec = rows.start("power_difference");
        rec.test = test.label();
        rec.d = Some(d);
        rec.p = exponent(&test.family);
        rec.alpha = Some(test.alpha);
        rec.r = Some(theta_1.iter().map(|v| v * v).sum::<f64>().sqrt());
        rec.h = Some(h);
        rec.n = Some(s.inner_n);
        rec.stream = stream_label(stream);
        rows.push(rec, |rec| {
            let spec = cached_spec(&mut specs, test, ti, d, exp)?;
            rec.size = Some(spec.nominal_size);
            let rep = lipschitz_power_check(
                &spec,
                &ParameterPoint::new(theta_1)?,
                &ParameterPoint::new(theta_2)?,
                s.inner_n,
                stream,
            )?;
            rec.value = Some(rep.delta);
            rec.std_error = Some(rep.standard_error);
            rec.bound = Some(rep.bound);
            rec.margin = Some(rep.bound + 4.0 * rep.standard_error - rep.delta);
            rec.pass = Some(rep.pass);
            Ok(())
        });
    }
}
