use gausstest_core::model::Amplitude;
use gausstest_core::special::normal_sf;
use gausstest_core::superconsistency::{
    concentration_bound, excess_power_region_measure, lipschitz_power_check, spherical_bayes_statistic_monotonicity,
    verify_theorem3, wap_average_power, wap_dominance, RegionThreshold, RelativeVolumeConfig,
};
use gausstest_core::{
    lr_power_beta, CalibrationMethod, ExcessPowerQuery, LrPowerQuery, ParameterPoint, RngStream, Statistic, TestSpec,
};

#[test]
fn lr_average_power_equals_pointwise_power() {
    let (d, r) = (20, 2.0);
    let test = TestSpec::lr(d, 0.05).unwrap();
    let wap = wap_average_power(&test, r, 400, 2_000, RngStream::root(1)).unwrap();
    let beta = lr_power_beta(&LrPowerQuery { d, alpha: 0.05, r }).unwrap();
    assert!((wap.estimate - beta).abs() <= 4.0 * wap.standard_error, "{wap:?} vs {beta}");
}

#[test]
fn higher_criticism_does_not_beat_lr_on_average() {
    let (d, r) = (100, 3.0);
    let hc = TestSpec::calibrated(Statistic::higher_criticism(), d, 0.05, CalibrationMethod::MonteCarlo { n: 100_000 }, RngStream::root(2))
        .unwrap()
        .0;
    let report = wap_dominance(&hc, r, 500, 1_000, 200_000, RngStream::root(3)).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn half_space_power_has_closed_form_and_respects_lipschitz_bound() {
    let d = 5;
    let mut w = vec![0.0; d];
    w[0] = 1.0;
    let c = 1.0;
    let test = TestSpec::single(Statistic::Linear { weights: w }, d, c, normal_sf(c), CalibrationMethod::Exact).unwrap();
    let at = |a: f64| {
        let mut v = vec![0.0; d];
        v[0] = a;
        ParameterPoint::new(v).unwrap()
    };
    let n = 200_000;
    for (i, (a, b)) in [(0.0, 0.1), (0.9, 1.1), (1.0, 2.5), (-1.0, 3.0)].into_iter().enumerate() {
        let rep = lipschitz_power_check(&test, &at(a), &at(b), n, RngStream::root(10 + i as u64)).unwrap();
        // P(θ₁ + z >= c) = Φ(θ₁ - c)
        let (p1, p2) = (normal_sf(c - a), normal_sf(c - b));
        let se = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
        assert!((rep.power_1 - p1).abs() <= 4.0 * se(p1), "{rep:?} vs {p1}");
        assert!((rep.power_2 - p2).abs() <= 4.0 * se(p2), "{rep:?} vs {p2}");
        assert!((p1 - p2).abs() <= rep.bound);
        assert!((rep.bound - (b - a).abs() / 2.0).abs() < 1e-15);
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn finite_difference_powers_are_lipschitz() {
    let d = 30;
    let tests = [
        TestSpec::lr(d, 0.05).unwrap(),
        TestSpec::calibrated(Statistic::p_norm(f64::INFINITY), d, 0.05, CalibrationMethod::Exact, RngStream::root(0))
            .unwrap()
            .0,
        TestSpec::calibrated(Statistic::p_norm(1.0), d, 0.1, CalibrationMethod::CltApprox, RngStream::root(0))
            .unwrap()
            .0,
    ];
    let mut g = RngStream::root(20).generator();
    for (i, test) in tests.iter().enumerate() {
        let base: Vec<f64> = (0..d).map(|_| 0.5 * g.standard_normal()).collect();
        let mut moved = base.clone();
        moved[0] += 0.1;
        let rep = lipschitz_power_check(
            test,
            &ParameterPoint::new(base).unwrap(),
            &ParameterPoint::new(moved).unwrap(),
            50_000,
            RngStream::root(30 + i as u64),
        )
        .unwrap();
        assert!(rep.pass, "{}: {rep:?}", test.label());
        assert!(rep.delta < rep.bound, "{}: {rep:?}", test.label());
    }
}

#[test]
fn spherical_bayes_kernel_is_nondecreasing() {
    let grid: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
    let rep = spherical_bayes_statistic_monotonicity(10, 2.0, &grid, 100_000, RngStream::root(4)).unwrap();
    assert_eq!(rep.values[0], 1.0);
    assert!(rep.nondecreasing && rep.all_at_least_one, "{rep:?}");
}

#[test]
fn quartic_spike_regions_shrink_below_the_bound() {
    let cfg = RelativeVolumeConfig {
        statistic: Statistic::p_norm(4.0),
        alpha: 0.05,
        calibration: CalibrationMethod::CltApprox,
        size_n: 20_000,
        d_grid: vec![64, 128, 256, 512, 1024],
        radius: Amplitude::new(1.0, 0.25, 0.0),
        region: RegionThreshold::Threshold {
            amplitude: Amplitude::new(1.0, 0.125, 1.0),
        },
        n: 100_000,
        slack: 0.0,
    };
    let rep = verify_theorem3(&cfg, RngStream::root(5)).unwrap();
    assert!(rep.epsilon > 0.0);
    assert!(rep.all_pass(), "{rep:?}");
    let fractions: Vec<f64> = rep.rows.iter().map(|r| r.volume.value).collect();
    assert!(fractions.windows(2).all(|w| w[1] <= w[0]), "{fractions:?}");

    let empty = verify_theorem3(&RelativeVolumeConfig { region: RegionThreshold::Empty, ..cfg }, RngStream::root(5)).unwrap();
    assert!(empty.rows.iter().all(|r| r.volume.value == 0.0 && r.report.pass));
}

#[test]
fn epsilon_is_positive_for_bounded_radii() {
    for scale in [0.5, 1.0, 2.0] {
        let cfg = RelativeVolumeConfig {
            statistic: Statistic::p_norm(4.0),
            alpha: 0.05,
            calibration: CalibrationMethod::CltApprox,
            size_n: 5_000,
            d_grid: vec![16, 64, 256],
            radius: Amplitude::new(scale, 0.25, 0.0),
            region: RegionThreshold::Empty,
            n: 1_000,
            slack: 0.0,
        };
        let rep = verify_theorem3(&cfg, RngStream::root(6)).unwrap();
        assert!(rep.epsilon > 0.0 && rep.epsilon <= 0.5, "{rep:?}");
        assert!((rep.epsilon - (1.0 - rep.max_lr_power) / 2.0).abs() < 1e-15);
    }
}

#[test]
fn sup_norm_excess_region_respects_concentration_bound() {
    let d = 50;
    let r = (d as f64).powf(0.25);
    let test = TestSpec::calibrated(Statistic::p_norm(f64::INFINITY), d, 0.05, CalibrationMethod::Exact, RngStream::root(0))
        .unwrap()
        .0;
    let q = ExcessPowerQuery {
        d,
        r,
        epsilon: 0.2,
        test,
        size: 0.05,
        outer_n: 300,
        inner_n: 4_000,
        decision_margin: 3.0,
    };
    let m = excess_power_region_measure(&q, RngStream::root(7)).unwrap();
    let bound = concentration_bound(d, r, 0.2).unwrap();
    assert!(m.estimate.ci_upper <= bound, "{m:?} vs {bound}");
}
