use gausstest_core::special::{normal_upper_quantile, standard_normal_quantile};
use gausstest_core::{
    calibrate_critical_value, combine, estimate_power, lr_power_beta, CalibrationMethod, LrPowerQuery,
    ParameterPoint, RngStream, Statistic, TestSpec,
};

fn spike(d: usize, a: f64) -> ParameterPoint {
    let mut v = vec![0.0; d];
    v[0] = a;
    ParameterPoint::new(v).unwrap()
}

fn flat(d: usize, norm: f64) -> ParameterPoint {
    ParameterPoint::new(vec![norm / (d as f64).sqrt(); d]).unwrap()
}

/// Two-sided 99.9% acceptance band for a binomial proportion (normal approximation).
fn band(alpha: f64, n: u64) -> (f64, f64) {
    let half = normal_upper_quantile(0.0005) * (alpha * (1.0 - alpha) / n as f64).sqrt();
    (alpha - half, alpha + half)
}

#[test]
fn exact_tests_hold_their_size() {
    for (stat, d, alpha) in [
        (Statistic::lr(), 10, 0.05),
        (Statistic::p_norm(f64::INFINITY), 30, 0.05),
        (Statistic::lr(), 3, 0.01),
    ] {
        let spec = TestSpec::calibrated(stat, d, alpha, CalibrationMethod::Exact, RngStream::root(0)).unwrap().0;
        let n = 1_000_000;
        let est = estimate_power(&spec, &ParameterPoint::zeros(d).unwrap(), n, RngStream::root(17)).unwrap();
        let (lo, hi) = band(alpha, n);
        assert!(est.estimate >= lo && est.estimate <= hi, "{}: {} outside [{lo}, {hi}]", spec.label(), est.estimate);
    }
}

#[test]
fn lr_power_matches_noncentral_oracle() {
    for (i, (d, alpha, r)) in [(1, 0.05, 2.0), (5, 0.1, 1.5), (40, 0.05, 4.0), (300, 0.01, 6.0)].into_iter().enumerate() {
        let spec = TestSpec::lr(d, alpha).unwrap();
        let est = estimate_power(&spec, &flat(d, r), 50_000, RngStream::root(100 + i as u64)).unwrap();
        let beta = lr_power_beta(&LrPowerQuery { d, alpha, r }).unwrap();
        assert!((est.estimate - beta).abs() <= 4.0 * est.standard_error, "d={d}: {} vs {beta}", est.estimate);
    }
}

#[test]
fn one_dimensional_lr_power_closed_form() {
    let z = standard_normal_quantile(0.975);
    let phi = gausstest_core::special::normal_cdf;
    let beta = lr_power_beta(&LrPowerQuery { d: 1, alpha: 0.05, r: 2.0 }).unwrap();
    assert!((beta - (phi(-z + 2.0) + phi(-z - 2.0))).abs() < 1e-10);
}

#[test]
fn lr_power_is_rotation_invariant() {
    let d = 50;
    let spec = TestSpec::lr(d, 0.05).unwrap();
    let a = estimate_power(&spec, &spike(d, 3.5), 100_000, RngStream::root(1)).unwrap();
    let b = estimate_power(&spec, &flat(d, 3.5), 100_000, RngStream::root(2)).unwrap();
    let se = a.standard_error.hypot(b.standard_error);
    assert!((a.estimate - b.estimate).abs() <= 4.0 * se, "{} vs {}", a.estimate, b.estimate);
}

#[test]
fn p_norm_tests_are_not_comparable_at_d_1024() {
    let d = 1024;
    let n = 20_000;
    let lr = TestSpec::lr(d, 0.05).unwrap();
    let sup = TestSpec::calibrated(Statistic::p_norm(f64::INFINITY), d, 0.05, CalibrationMethod::Exact, RngStream::root(0))
        .unwrap()
        .0;
    let gap = |theta: &ParameterPoint, seed: u64| {
        let a = estimate_power(&lr, theta, n, RngStream::root(seed)).unwrap();
        let b = estimate_power(&sup, theta, n, RngStream::root(seed + 1)).unwrap();
        (a.estimate - b.estimate, a.standard_error.hypot(b.standard_error))
    };
    // ‖θ‖₂² = 3√d spread evenly
    let (diff, se) = gap(&flat(d, (3.0 * 32.0f64).sqrt()), 20);
    assert!(diff > 10.0 * se, "dense: lr - sup = {diff}, se {se}");
    let (diff, se) = gap(&spike(d, 6.0), 30);
    assert!(-diff > 10.0 * se, "spike: lr - sup = {diff}, se {se}");
}

#[test]
fn higher_criticism_calibration_is_seed_stable() {
    let hc = Statistic::higher_criticism();
    let method = CalibrationMethod::MonteCarlo { n: 200_000 };
    let a = calibrate_critical_value(&hc, 64, 0.05, method, RngStream::root(1)).unwrap();
    let b = calibrate_critical_value(&hc, 64, 0.05, method, RngStream::root(2)).unwrap();
    let se = a.error.hypot(b.error);
    assert!(a.error > 0.0 && b.error > 0.0);
    assert!((a.critical_value - b.critical_value).abs() <= 2.0 * se, "{a:?} vs {b:?}");
}

#[test]
fn monte_carlo_and_clt_calibrations_agree_for_p4() {
    let stat = Statistic::p_norm(4.0);
    let mc = calibrate_critical_value(&stat, 64, 0.05, CalibrationMethod::MonteCarlo { n: 1_000_000 }, RngStream::root(5))
        .unwrap();
    let clt = calibrate_critical_value(&stat, 64, 0.05, CalibrationMethod::CltApprox, RngStream::root(0)).unwrap();
    let err = mc.error.hypot(clt.error);
    assert!((mc.critical_value - clt.critical_value).abs() <= 3.0 * err, "{mc:?} vs {clt:?}");
}

#[test]
fn combined_size_obeys_union_bound() {
    let d = 20;
    let primary = TestSpec::lr(d, 0.05).unwrap();
    let enhancement = TestSpec::calibrated(Statistic::p_norm(f64::INFINITY), d, 0.01, CalibrationMethod::Exact, RngStream::root(0))
        .unwrap()
        .0;
    let both = combine(primary, enhancement).unwrap();
    assert!((both.nominal_size - 0.06).abs() < 1e-15);
    let est = estimate_power(&both, &ParameterPoint::zeros(d).unwrap(), 400_000, RngStream::root(8)).unwrap();
    assert!(est.estimate <= 0.06 + 4.0 * est.standard_error, "{}", est.estimate);
}

#[test]
fn combined_power_dominates_primary_pathwise() {
    let d = 40;
    let primary = TestSpec::lr(d, 0.05).unwrap();
    let enhancement = TestSpec::calibrated(Statistic::higher_criticism(), d, 0.01, CalibrationMethod::MonteCarlo { n: 20_000 }, RngStream::root(3))
        .unwrap()
        .0;
    let both = combine(primary.clone(), enhancement.clone()).unwrap();
    for (i, theta) in [spike(d, 4.0), flat(d, 3.0), ParameterPoint::zeros(d).unwrap()].iter().enumerate() {
        let s = RngStream::root(50 + i as u64);
        let c = estimate_power(&both, theta, 20_000, s).unwrap();
        let a = estimate_power(&primary, theta, 20_000, s).unwrap();
        let b = estimate_power(&enhancement, theta, 20_000, s).unwrap();
        assert!(c.rejections >= a.rejections.max(b.rejections));
        assert!(c.rejections <= a.rejections + b.rejections);
    }
}

#[test]
fn exactly_calibrated_null_rate_is_covered() {
    let spec = TestSpec::lr(8, 0.05).unwrap();
    let est = estimate_power(&spec, &ParameterPoint::zeros(8).unwrap(), 100_000, RngStream::root(21)).unwrap();
    assert!(est.ci_lower <= 0.05 && 0.05 <= est.ci_upper, "{est:?}");
}
