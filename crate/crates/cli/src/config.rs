//! Experiment configuration: a JSON document with a seed, an optional output
//! path and a list of experiments tagged by `kind`.

use std::path::{Path, PathBuf};

use gausstest_core::model::{AlternativeRule, Amplitude};
use gausstest_core::superconsistency::ExcessPowerQuery;
use gausstest_core::{combine, CalibrationMethod, ParameterPoint, RngStream, Statistic, TestSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
}

/// A test family together with its calibration; calibrated per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub family: Statistic,
    pub alpha: f64,
    pub calibration: CalibrationMethod,
    /// OR-combined enhancement test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enhancement: Option<Box<TestConfig>>,
}

impl TestConfig {
    pub fn label(&self) -> String {
        match &self.enhancement {
            None => self.family.label(),
            Some(e) => format!("{}|{}", self.family.label(), e.label()),
        }
    }

    /// Calibrates the test (and its enhancement) in dimension `d`.
    pub fn build(&self, d: usize, stream: RngStream) -> gausstest_core::Result<TestSpec> {
        let (spec, _) = TestSpec::calibrated(self.family.clone(), d, self.alpha, self.calibration, stream.substream(0))?;
        match &self.enhancement {
            None => Ok(spec),
            Some(e) => combine(spec, e.build(d, stream.substream(1))?),
        }
    }

    fn validate(&self, at: &str, d: usize) -> Result<(), CliError> {
        check(self.alpha > 0.0 && self.alpha < 1.0, at, "alpha", || format!("must lie in (0,1), got {}", self.alpha))?;
        if let CalibrationMethod::MonteCarlo { n } = self.calibration {
            check((n as f64) * self.alpha >= 20.0, at, "calibration.n", || {
                format!("n = {n} is too small for alpha = {} (need n * alpha >= 20)", self.alpha)
            })?;
        }
        // statistic/method compatibility; exact and CLT calibrations are cheap to try
        let probe = match self.calibration {
            CalibrationMethod::MonteCarlo { .. } => {
                TestSpec::single(self.family.clone(), d, 0.0, self.alpha, self.calibration).map(|_| ())
            }
            m => TestSpec::calibrated(self.family.clone(), d, self.alpha, m, RngStream::root(0)).map(|_| ()),
        };
        probe.map_err(|e| CliError::config(format!("{at}.family"), format!("at d = {d}: {e}")))?;
        if let Some(e) = &self.enhancement {
            e.validate(&format!("{at}.enhancement"), d)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Nondecreasing,
    Nonincreasing,
}

impl Trend {
    pub fn holds(self, previous: f64, current: f64) -> bool {
        match self {
            Trend::Nondecreasing => current >= previous,
            Trend::Nonincreasing => current <= previous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// All coordinates equal.
    Flat,
    /// Signal in the first coordinate only.
    Spike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "signal", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    /// Alternatives of Euclidean norm `r` pointing in `direction`.
    Radius { r: Vec<f64>, direction: Direction },
    /// One alternative rule evaluated along the dimension grid.
    Rule { rule: AlternativeRule },
}

impl Signal {
    pub fn len(&self) -> usize {
        match self {
            Signal::Radius { r, .. } => r.len(),
            Signal::Rule { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn realize(&self, index: usize, d: usize) -> gausstest_core::Result<ParameterPoint> {
        match self {
            Signal::Radius { r, direction } => {
                let r = r[index];
                let values = match direction {
                    Direction::Flat => vec![r / (d as f64).sqrt(); d],
                    Direction::Spike => {
                        let mut v = vec![0.0; d];
                        v[0] = r;
                        v
                    }
                };
                ParameterPoint::new(values)
            }
            Signal::Rule { rule } => rule.realize(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedScale {
    /// The scaling factor `u_d`.
    #[serde(rename = "u_d")]
    ScalingFactor,
}

/// Scale `t` of the p-ball: a number or `"u_d"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scale {
    Value(f64),
    Named(NamedScale),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolumeMeasure {
    /// `vol(B_2(e_{d,2}) ∩ t·B_p(e_{d,p}))`.
    Intersection { t: Scale },
    /// Fraction of `B_2(r_d)` where `‖x‖_p >= s_d`.
    Threshold { r: Amplitude, s: Amplitude },
    /// Exact `ln vol B_p(r_d)`.
    LogVolume { r: Amplitude },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    pub name: String,
    pub family: Statistic,
    pub d: Vec<usize>,
    pub alpha: Vec<f64>,
    pub calibration: CalibrationMethod,
    /// Null draws for an empirical size check of each calibrated test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_check_n: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCurveSpec {
    pub name: String,
    pub test: TestConfig,
    pub d: Vec<usize>,
    pub signal: Signal,
    pub n: u64,
    /// Pathwise trend of the power along the dimension grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend: Option<Trend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSweepSpec {
    pub name: String,
    pub p: f64,
    pub d: Vec<usize>,
    pub measure: VolumeMeasure,
    #[serde(default)]
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend: Option<Trend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Spec {
    pub name: String,
    pub p: f64,
    pub d: Vec<usize>,
    pub radius: Amplitude,
    pub threshold: Amplitude,
    pub n: u64,
    /// Upper limit for the threshold fraction at the largest dimension.
    pub final_max: f64,
    /// Dimensions for the intersection check at `t = u_d`; empty to skip.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intersection_d: Vec<usize>,
    #[serde(default)]
    pub intersection_n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prop4Spec {
    pub name: String,
    pub tests: Vec<TestConfig>,
    pub d: Vec<usize>,
    pub r: Amplitude,
    pub epsilon: Vec<f64>,
    pub outer_n: u64,
    pub inner_n: u64,
    pub decision_margin: f64,
    /// Null draws used to estimate the size of non-exact tests.
    pub size_n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpherePoint {
    pub d: usize,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WapSpec {
    pub name: String,
    pub tests: Vec<TestConfig>,
    pub points: Vec<SpherePoint>,
    pub outer_n: u64,
    pub inner_n: u64,
    pub size_n: u64,
}

/// A randomized panel of `pairs` (test, θ₁, θ₂) triples: `θ₁` has i.i.d.
/// `N(0, signal_scale²)` entries and `θ₂ = θ₁ + h·v` with `v` uniform on the
/// unit sphere and `h` uniform on `(0, max_step)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSpec {
    pub name: String,
    pub tests: Vec<TestConfig>,
    pub d: Vec<usize>,
    pub pairs: u64,
    pub signal_scale: f64,
    pub max_step: f64,
    pub inner_n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Calibrate(CalibrateSpec),
    PowerCurve(PowerCurveSpec),
    VolumeSweep(VolumeSweepSpec),
    VerifyTheorem2(Theorem2Spec),
    VerifyProp4(Prop4Spec),
    WapCheck(WapSpec),
    LipschitzCheck(LipschitzSpec),
}

impl Experiment {
    pub fn name(&self) -> &str {
        match self {
            Experiment::Calibrate(s) => &s.name,
            Experiment::PowerCurve(s) => &s.name,
            Experiment::VolumeSweep(s) => &s.name,
            Experiment::VerifyTheorem2(s) => &s.name,
            Experiment::VerifyProp4(s) => &s.name,
            Experiment::WapCheck(s) => &s.name,
            Experiment::LipschitzCheck(s) => &s.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Calibrate(_) => "calibrate",
            Experiment::PowerCurve(_) => "power_curve",
            Experiment::VolumeSweep(_) => "volume_sweep",
            Experiment::VerifyTheorem2(_) => "verify_theorem2",
            Experiment::VerifyProp4(_) => "verify_prop4",
            Experiment::WapCheck(_) => "wap_check",
            Experiment::LipschitzCheck(_) => "lipschitz_check",
        }
    }
}

fn check(cond: bool, at: &str, key: &str, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::config(format!("{at}.{key}"), msg()))
    }
}

fn check_grid(d: &[usize], at: &str, key: &str) -> Result<(), CliError> {
    check(!d.is_empty(), at, key, || "must not be empty".into())?;
    check(d.iter().all(|&x| x >= 1), at, key, || "dimensions must be >= 1".into())?;
    check(d.windows(2).all(|w| w[1] > w[0]), at, key, || "must be strictly increasing".into())
}

fn check_tests(tests: &[TestConfig], d: &[usize], at: &str) -> Result<(), CliError> {
    check(!tests.is_empty(), at, "tests", || "must not be empty".into())?;
    for (i, t) in tests.iter().enumerate() {
        for &dim in d {
            t.validate(&format!("{at}.tests[{i}]"), dim)?;
        }
    }
    Ok(())
}

fn check_p(p: f64, at: &str) -> Result<(), CliError> {
    check(p > 0.0, at, "p", || format!("must be > 0, got {p}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Canonical JSON: the serialized config with object keys sorted.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("JSON value serializes")
    }

    /// SHA-256 of the canonical JSON, as lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks every experiment's parameters before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut names = std::collections::BTreeSet::new();
        for (i, exp) in self.experiments.iter().enumerate() {
            let at = format!("experiments[{i}]");
            check(!exp.name().is_empty(), &at, "name", || "must not be empty".into())?;
            check(names.insert(exp.name().to_string()), &at, "name", || {
                format!("duplicate experiment name {:?}", exp.name())
            })?;
            match exp {
                Experiment::Calibrate(s) => {
                    check_grid(&s.d, &at, "d")?;
                    check(!s.alpha.is_empty(), &at, "alpha", || "must not be empty".into())?;
                    for &alpha in &s.alpha {
                        let t = TestConfig {
                            family: s.family.clone(),
                            alpha,
                            calibration: s.calibration,
                            enhancement: None,
                        };
                        for &d in &s.d {
                            t.validate(&at, d)?;
                        }
                    }
                    if let Some(n) = s.size_check_n {
                        check(n >= 100, &at, "size_check_n", || format!("must be >= 100, got {n}"))?;
                    }
                }
                Experiment::PowerCurve(s) => {
                    check_grid(&s.d, &at, "d")?;
                    for &d in &s.d {
                        s.test.validate(&format!("{at}.test"), d)?;
                    }
                    check(s.n >= 100, &at, "n", || format!("must be >= 100, got {}", s.n))?;
                    check(!s.signal.is_empty(), &at, "signal.r", || "must not be empty".into())?;
                    if let Signal::Radius { r, .. } = &s.signal {
                        check(r.iter().all(|v| v.is_finite() && *v >= 0.0), &at, "signal.r", || {
                            "radii must be finite and >= 0".into()
                        })?;
                    }
                    for &d in &s.d {
                        for j in 0..s.signal.len() {
                            s.signal
                                .realize(j, d)
                                .map_err(|e| CliError::config(format!("{at}.signal"), format!("at d = {d}: {e}")))?;
                        }
                    }
                }
                Experiment::VolumeSweep(s) => {
                    check_grid(&s.d, &at, "d")?;
                    check_p(s.p, &at)?;
                    match &s.measure {
                        VolumeMeasure::Intersection { t } => {
                            check(s.n >= 1000, &at, "n", || format!("must be >= 1000, got {}", s.n))?;
                            if let Scale::Value(t) = t {
                                check(*t >= 0.0, &at, "measure.t", || format!("must be >= 0, got {t}"))?;
                            } else {
                                check(s.p.is_finite(), &at, "measure.t", || "u_d needs a finite p".into())?;
                            }
                        }
                        VolumeMeasure::Threshold { .. } => {
                            check(s.n >= 1, &at, "n", || "must be >= 1".into())?;
                        }
                        VolumeMeasure::LogVolume { .. } => {}
                    }
                }
                Experiment::VerifyTheorem2(s) => {
                    check_grid(&s.d, &at, "d")?;
                    check(s.p > 0.0 && s.p.is_finite(), &at, "p", || format!("must lie in (0, inf), got {}", s.p))?;
                    check(s.n >= 1, &at, "n", || "must be >= 1".into())?;
                    check((0.0..=1.0).contains(&s.final_max), &at, "final_max", || "must lie in [0,1]".into())?;
                    if !s.intersection_d.is_empty() {
                        check_grid(&s.intersection_d, &at, "intersection_d")?;
                        check(s.intersection_n >= 1000, &at, "intersection_n", || "must be >= 1000".into())?;
                    }
                }
                Experiment::VerifyProp4(s) => {
                    check_grid(&s.d, &at, "d")?;
                    check_tests(&s.tests, &s.d, &at)?;
                    check(!s.epsilon.is_empty(), &at, "epsilon", || "must not be empty".into())?;
                    check(s.size_n >= 100, &at, "size_n", || "must be >= 100".into())?;
                    for &d in &s.d {
                        for &epsilon in &s.epsilon {
                            let q = ExcessPowerQuery {
                                d,
                                r: s.r.at(d),
                                epsilon,
                                test: TestSpec::lr(d, 0.05).expect("valid LR test"),
                                size: 0.05,
                                outer_n: s.outer_n,
                                inner_n: s.inner_n,
                                decision_margin: s.decision_margin,
                            };
                            q.validate().map_err(|e| CliError::config(at.clone(), e.to_string()))?;
                        }
                    }
                }
                Experiment::WapCheck(s) => {
                    check(!s.points.is_empty(), &at, "points", || "must not be empty".into())?;
                    let ds: Vec<usize> = s.points.iter().map(|p| p.d).collect();
                    check_tests(&s.tests, &ds, &at)?;
                    for p in &s.points {
                        check(p.r > 0.0 && p.r.is_finite(), &at, "points.r", || format!("must be positive, got {}", p.r))?;
                    }
                    check(s.outer_n >= 2, &at, "outer_n", || "must be >= 2".into())?;
                    check(s.inner_n >= 1, &at, "inner_n", || "must be >= 1".into())?;
                    check(s.size_n >= 100, &at, "size_n", || "must be >= 100".into())?;
                }
                Experiment::LipschitzCheck(s) => {
                    check_grid(&s.d, &at, "d")?;
                    check_tests(&s.tests, &s.d, &at)?;
                    check(s.pairs >= 1, &at, "pairs", || "must be >= 1".into())?;
                    check(s.signal_scale >= 0.0 && s.signal_scale.is_finite(), &at, "signal_scale", || {
                        "must be finite and >= 0".into()
                    })?;
                    check(s.max_step > 0.0 && s.max_step.is_finite(), &at, "max_step", || "must be positive".into())?;
                    check(s.inner_n >= 2, &at, "inner_n", || "must be >= 2".into())?;
                }
            }
        }
        Ok(())
    }
}
