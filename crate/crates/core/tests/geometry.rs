use gausstest_core::geometry::{
    intersection_volume_curve, intersection_volume_ratio, pball_log_volume, pnorm_threshold_fraction,
    radially_stratified_threshold_fraction, sample_uniform_ball, sample_uniform_sphere, scaling_factor_u,
    shell_pnorm_threshold_fraction, sphere_pnorm_threshold_fraction, unit_volume_radius,
};
use gausstest_core::special::{chi_square_upper_quantile, normal_upper_quantile};
use gausstest_core::{p_norm, wilson_interval, BallSpec, RngStream};

/// Midpoint-rule fraction of the Euclidean ball of radius `r` (d = 2 or 3)
/// whose points satisfy `keep`, on an `m^d` tensor grid over the cube `[-r, r]^d`.
fn grid_fraction(d: usize, r: f64, m: usize, keep: impl Fn(&[f64]) -> bool) -> f64 {
    let h = 2.0 * r / m as f64;
    let coord = |i: usize| -r + (i as f64 + 0.5) * h;
    let (mut inside, mut hits) = (0u64, 0u64);
    let mut x = vec![0.0; d];
    let total = m.pow(d as u32);
    for idx in 0..total {
        let mut k = idx;
        for xi in x.iter_mut() {
            *xi = coord(k % m);
            k /= m;
        }
        if x.iter().map(|v| v * v).sum::<f64>() <= r * r {
            inside += 1;
            hits += u64::from(keep(&x));
        }
    }
    hits as f64 / inside as f64
}

#[test]
fn volume_identity_across_grid() {
    let ps = [0.5, 1.0, 2.0, 3.0, 4.0, 8.0, f64::INFINITY];
    let ds = [1usize, 2, 3, 5, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096];
    for &p in &ps {
        for &d in &ds {
            let e = unit_volume_radius(d, p).unwrap();
            let v = pball_log_volume(&BallSpec::new(d, p, e).unwrap()).exp();
            assert!((v - 1.0).abs() <= 1e-10, "d={d} p={p}: {v}");
        }
    }
}

#[test]
fn euclidean_ball_of_radius_quartic_root_shrinks() {
    // the volume peaks at d = 105 and decreases strictly afterwards
    let logs: Vec<f64> = (105..=4096)
        .map(|d| pball_log_volume(&BallSpec::new(d, 2.0, (d as f64).powf(0.25)).unwrap()))
        .collect();
    assert!(logs.windows(2).all(|w| w[1] < w[0]));
    assert!(*logs.last().unwrap() < -2700.0);
}

#[test]
fn scaling_factor_dominates_gamma_ratio_bound() {
    for p in [3.0, 4.0, 8.0] {
        for d in (4..=12).map(|k| 1usize << k) {
            let u = scaling_factor_u(d, p).unwrap();
            assert!(u.value >= u.lower_bound, "d={d} p={p}: {u:?}");
        }
    }
    let u4: Vec<f64> = (4..=12).map(|k| scaling_factor_u(1 << k, 4.0).unwrap().value).collect();
    assert!(u4.windows(2).all(|w| w[1] > w[0]), "{u4:?}");
}

#[test]
fn circle_angles_are_uniform() {
    let n = 100_000;
    let mut g = RngStream::root(3).generator();
    let mut bins = [0u64; 36];
    for _ in 0..n {
        let x = sample_uniform_sphere(2, 1.5, &mut g).unwrap();
        let angle = x[1].atan2(x[0]) + std::f64::consts::PI;
        let b = ((angle / (2.0 * std::f64::consts::PI)) * 36.0) as usize;
        bins[b.min(35)] += 1;
    }
    let expected = n as f64 / 36.0;
    let chi2: f64 = bins.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let crit = chi_square_upper_quantile(35.0, 0.001).unwrap();
    assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
}

#[test]
fn sphere_coordinates_are_centered() {
    let (d, r, n) = (5, 2.0, 100_000);
    let mut g = RngStream::root(4).generator();
    let mut sums = vec![0.0; d];
    for _ in 0..n {
        let x = sample_uniform_sphere(d, r, &mut g).unwrap();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - r).abs() <= 1e-12 * r);
        sums.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
    }
    // each coordinate has variance r²/d
    let se = r / (d as f64).sqrt() / (n as f64).sqrt();
    for s in sums {
        assert!((s / n as f64).abs() <= 4.0 * se);
    }
}

#[test]
fn half_radius_ball_mass() {
    let n = 100_000u64;
    let z = normal_upper_quantile(0.0005);
    let mut g = RngStream::root(5).generator();
    for d in 1..=10 {
        let hits = (0..n)
            .filter(|_| {
                let x = sample_uniform_ball(d, 3.0, &mut g).unwrap();
                x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.5
            })
            .count() as u64;
        let (lo, hi) = wilson_interval(hits, n, z);
        let target = 0.5f64.powi(d as i32);
        assert!(lo <= target && target <= hi, "d={d}: {hits}/{n} vs {target}");
    }
}

#[test]
fn one_dimensional_ball_is_uniform_interval() {
    let (n, r) = (100_000usize, 2.5);
    let mut g = RngStream::root(6).generator();
    let mut xs: Vec<f64> = (0..n).map(|_| sample_uniform_ball(1, r, &mut g).unwrap()[0]).collect();
    assert!(xs.iter().all(|x| x.abs() <= r));
    xs.sort_by(f64::total_cmp);
    let cdf = |x: f64| (x + r) / (2.0 * r);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    // asymptotic Kolmogorov critical value at the 99.9% level
    assert!(ks * (n as f64).sqrt() < 1.9495, "KS statistic {ks}");
}

#[test]
fn small_dimension_estimators_match_grid_quadrature() {
    let n = 1_000_000;
    for (d, p, m, s, t) in [
        (2usize, 4.0, 3000usize, 0.75, 0.9),
        (3, 4.0, 300, 0.7, 0.9),
        (2, 1.0, 3000, 1.1, 0.9),
        (3, 3.0, 300, 0.75, 0.9),
    ] {
        // threshold fraction of the unit ball
        let oracle = grid_fraction(d, 1.0, m, |x| p_norm(x, p).unwrap() >= s);
        let mc = pnorm_threshold_fraction(d, p, 1.0, s, n, RngStream::root(d as u64)).unwrap();
        assert!(oracle > 0.05 && oracle < 0.95, "uninformative oracle {oracle}");
        assert!((mc.value - oracle).abs() <= 0.01 * oracle, "threshold d={d} p={p}: {} vs {oracle}", mc.value);

        // intersection with the scaled unit-volume p-ball
        let e2 = unit_volume_radius(d, 2.0).unwrap();
        let ep = unit_volume_radius(d, p).unwrap();
        let oracle = grid_fraction(d, e2, m, |x| p_norm(x, p).unwrap() <= t * ep);
        let mc = intersection_volume_ratio(d, p, t, n, RngStream::root(10 + d as u64)).unwrap();
        assert!(oracle > 0.05 && oracle < 0.95, "uninformative oracle {oracle}");
        assert!((mc.value - oracle).abs() <= 0.01 * oracle, "intersection d={d} p={p}: {} vs {oracle}", mc.value);
    }
}

#[test]
fn intersection_at_d500_is_nearly_full() {
    let u = scaling_factor_u(500, 4.0).unwrap().value;
    let est = intersection_volume_ratio(500, 4.0, u, 1_000_000, RngStream::root(500)).unwrap();
    assert!(est.value >= 0.95, "{est:?}");
}

#[test]
fn intersection_curve_nondecreasing_in_t() {
    let ts: Vec<f64> = (0..30).map(|i| 0.7 + 0.02 * i as f64).collect();
    let curve = intersection_volume_curve(50, 4.0, &ts, 20_000, RngStream::root(9)).unwrap();
    assert!(curve.windows(2).all(|w| w[1].value >= w[0].value));
    assert_eq!(intersection_volume_ratio(50, 4.0, 0.0, 20_000, RngStream::root(9)).unwrap().value, 0.0);
}

#[test]
fn threshold_fractions_follow_norm_ordering() {
    let s = 1.1;
    let stream = RngStream::root(12);
    let fr: Vec<u64> = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0]
        .iter()
        .map(|&p| pnorm_threshold_fraction(8, p, 1.5, s, 20_000, stream).unwrap().hits)
        .collect();
    assert!(fr.windows(2).all(|w| w[1] <= w[0]), "{fr:?}");
}

#[test]
fn ball_fraction_equals_radial_average_of_sphere_fractions() {
    let (d, p, r, s) = (10, 4.0, 2.0, 1.2);
    let ball = pnorm_threshold_fraction(d, p, r, s, 400_000, RngStream::root(30)).unwrap();
    let (mean, se) = radially_stratified_threshold_fraction(d, p, r, s, 20, 20_000, RngStream::root(31)).unwrap();
    assert!(ball.value > 0.05 && ball.value < 0.95);
    let combined = ball.standard_error.hypot(se);
    assert!((ball.value - mean).abs() <= 4.0 * combined, "{} vs {mean} (se {combined})", ball.value);
}

#[test]
fn thin_shell_is_bracketed_by_spheres() {
    // {‖x‖_p >= s} grows with the radius, so the shell fraction lies between
    // the sphere fractions at the inner and outer radii
    let (d, p, r, s) = (20, 4.0, 3.0, 1.75);
    let n = 200_000;
    let shell = shell_pnorm_threshold_fraction(d, p, r, 0.99, s, n, RngStream::root(40)).unwrap();
    let outer = sphere_pnorm_threshold_fraction(d, p, r, s, n, RngStream::root(41)).unwrap();
    let inner = sphere_pnorm_threshold_fraction(d, p, 0.99 * r, s, n, RngStream::root(42)).unwrap();
    assert!(outer.value > 0.05 && outer.value < 0.95, "{}", outer.value);
    assert!(shell.value <= outer.value + 4.0 * shell.standard_error.hypot(outer.standard_error));
    assert!(shell.value >= inner.value - 4.0 * shell.standard_error.hypot(inner.standard_error));
}

#[test]
fn vanishing_shell_matches_sphere() {
    let (d, p, r, s) = (20, 4.0, 3.0, 1.75);
    let n = 200_000;
    let shell = shell_pnorm_threshold_fraction(d, p, r, 0.9999, s, n, RngStream::root(43)).unwrap();
    let sphere = sphere_pnorm_threshold_fraction(d, p, r, s, n, RngStream::root(44)).unwrap();
    let se = shell.standard_error.hypot(sphere.standard_error);
    assert!((shell.value - sphere.value).abs() <= 4.0 * se, "{} vs {}", shell.value, sphere.value);
}
