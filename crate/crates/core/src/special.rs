//! Special functions: normal distribution, log-gamma, and central chi-square
//! tails and quantiles.
//!
//! The complementary error function comes from `libm` (musl's, within a
//! couple of ulps); log-gamma and the regularized incomplete gamma come from
//! `statrs`. The normal quantile is Wichura's AS 241 (PPND16), relative
//! accuracy about 1e-16, which sits on the hot path of every normal draw.

use statrs::function::gamma;

use crate::error::{Error, Result};

pub use statrs::function::gamma::ln_gamma;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`, accurate far into the tail.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Two-sided p-value `2(1 - Φ(|x|))`.
#[inline]
pub fn two_sided_p_value(x: f64) -> f64 {
    libm::erfc(x.abs() * FRAC_1_SQRT_2)
}

/// Inverse of the standard normal CDF (AS 241). Returns ±∞ at 0 and 1.
pub fn standard_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_854e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Upper quantile `z` with `1 - Φ(z) = tail`, computed without forming `1 - tail`.
#[inline]
pub fn normal_upper_quantile(tail: f64) -> f64 {
    -standard_normal_quantile(tail)
}

/// `E|Z|^k = 2^{k/2} Γ((k+1)/2) / √π` for a standard normal `Z` and `k > -1`.
pub fn normal_abs_moment(k: f64) -> f64 {
    (0.5 * k * std::f64::consts::LN_2 + ln_gamma(0.5 * (k + 1.0)) - 0.5 * std::f64::consts::PI.ln())
        .exp()
}

/// Regularized upper incomplete gamma `Q(a, x)`, extended to `x = 0` and `x = ∞`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma::gamma_ur(a, x)
    }
}

/// Upper tail of the central chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(df: f64, x: f64) -> f64 {
    gamma_q(0.5 * df, 0.5 * x)
}

/// Upper-`alpha` quantile `c` of a central chi-square, `P(χ²_df > c) = alpha`.
///
/// Bisection on the regularized incomplete gamma, bracketed from the
/// Wilson–Hilferty approximation, to absolute tolerance 1e-12 (or the
/// floating-point resolution at `c`, whichever is coarser).
pub fn chi_square_upper_quantile(df: f64, alpha: f64) -> Result<f64> {
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::invalid(format!("chi-square degrees of freedom must be positive, got {df}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let z = normal_upper_quantile(alpha);
    let h = 2.0 / (9.0 * df);
    let guess = (df * (1.0 - h + z * h.sqrt()).powi(3)).max(f64::MIN_POSITIVE);

    let excess = |x: f64| chi_square_sf(df, x) - alpha;
    let (mut lo, mut hi) = (guess, guess);
    let mut expansions = 0;
    while excess(lo) < 0.0 {
        lo *= 0.5;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::NumericFailure {
                routine: "chi_square_upper_quantile",
                detail: format!("could not bracket from below (df={df}, alpha={alpha})"),
            });
        }
    }
    while excess(hi) > 0.0 {
        hi = hi * 2.0 + 1.0;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::NumericFailure {
                routine: "chi_square_upper_quantile",
                detail: format!("could not bracket from above (df={df}, alpha={alpha})"),
            });
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 || mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values from scipy.special.ndtri
    const NDTRI: &[(f64, f64)] = &[
        (0.975, 1.959963984540054),
        (0.3, -0.5244005127080409),
        (1e-10, -6.361340902404056),
        (0.02425, -1.972961051311885),
        (0.9999, 3.719016485455709),
        (1e-300, -37.0470962993612),
        (0.500000001, 2.5066282037387115e-09),
    ];

    #[test]
    fn quantile_matches_reference() {
        for &(p, x) in NDTRI {
            let got = standard_normal_quantile(p);
            assert!((got - x).abs() <= 1e-14 * x.abs().max(1.0), "p={p}: {got} vs {x}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let x = standard_normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-14, "p={p}");
        }
        for k in 3..300 {
            let tail = 10f64.powi(-k);
            let x = normal_upper_quantile(tail);
            assert!(((normal_sf(x) - tail) / tail).abs() < 1e-12, "tail={tail}");
        }
    }

    #[test]
    fn quantile_edges() {
        assert_eq!(standard_normal_quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(standard_normal_quantile(1.0), f64::INFINITY);
        assert_eq!(standard_normal_quantile(0.5), 0.0);
    }

    #[test]
    fn abs_moments() {
        assert!((normal_abs_moment(2.0) - 1.0).abs() < 1e-14);
        assert!((normal_abs_moment(4.0) - 3.0).abs() < 1e-13);
        assert!((normal_abs_moment(1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((normal_abs_moment(0.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chi_square_two_df_closed_form() {
        // chi-square(2) upper tail is exp(-x/2)
        for &alpha in &[0.5, 0.1, 0.05, 0.01, 1e-6] {
            let c = chi_square_upper_quantile(2.0, alpha).unwrap();
            assert!((c - (-2.0 * f64::ln(alpha))).abs() < 1e-9, "alpha={alpha}: {c}");
        }
    }

    #[test]
    fn chi_square_one_df_is_squared_normal() {
        let c = chi_square_upper_quantile(1.0, 0.05).unwrap();
        let z = normal_upper_quantile(0.025);
        assert!((c - z * z).abs() < 1e-9);
    }

    #[test]
    fn chi_square_quantile_large_df() {
        for &df in &[100.0, 1024.0, 4096.0] {
            let c = chi_square_upper_quantile(df, 0.05).unwrap();
            assert!((chi_square_sf(df, c) - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_square_rejects_bad_input() {
        assert!(chi_square_upper_quantile(0.0, 0.05).is_err());
        assert!(chi_square_upper_quantile(3.0, 1.0).is_err());
        assert!(chi_square_upper_quantile(3.0, 0.0).is_err());
    }
}
