//! Normal and chi-square distribution utilities.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..100_000 {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Chi-square CDF with `df` degrees of freedom.
pub fn chi2_cdf(df: f64, x: f64) -> f64 {
    incomplete_gamma(0.5 * df, 0.5 * x).0
}

fn chi2_log_pdf(df: f64, x: f64) -> f64 {
    let k = 0.5 * df;
    (k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)
}

/// The `prob`-quantile of the chi-square distribution with `df` degrees of freedom.
///
/// Newton iteration on the regularized incomplete gamma, started from the
/// Wilson-Hilferty approximation and safeguarded by a bisection bracket.
pub fn chi2_quantile(df: u32, prob: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("chi-square quantile needs df >= 1".into()));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("probability {prob} outside (0, 1)")));
    }
    let k = df as f64;
    let upper_tail = prob > 0.5;
    let target = if upper_tail { 1.0 - prob } else { prob };
    // residual measured on whichever tail is smaller, keeps precision near 1
    let resid = |x: f64| {
        let (p, q) = incomplete_gamma(0.5 * k, 0.5 * x);
        if upper_tail {
            target - q
        } else {
            p - target
        }
    };

    let z = normal_quantile(prob)?;
    let h = 2.0 / (9.0 * k);
    let mut x = k * (1.0 - h + z * h.sqrt()).powi(3);
    if !(x.is_finite() && x > 0.0) {
        x = k.max(1e-3);
    }

    let (mut lo, mut hi) = (0.0_f64, x.max(1.0));
    while resid(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }

    for _ in 0..500 {
        let r = resid(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = r / chi2_log_pdf(k, x).exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Standard normal quantile (Wichura's AS 241, PPND16).
pub fn normal_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("probability {prob} outside (0, 1)")));
    }
    let q = prob - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        let num = ((((((r * 2_509.080_928_730_122_7 + 33_430.575_583_588_128) * r
            + 67_265.770_927_008_7)
            * r
            + 45_921.953_931_549_87)
            * r
            + 13_731.693_765_509_461)
            * r
            + 1_971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((r * 5_226.495_278_852_545 + 28_729.085_735_721_943) * r
            + 39_307.895_800_092_71)
            * r
            + 21_213.794_301_586_597)
            * r
            + 5_394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return Ok(q * num / den);
    }
    let tail = if q < 0.0 { prob } else { 1.0 - prob };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_888)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -val } else { val })
}

/// One draw from the noncentral chi-square `chi2_df(noncentrality)`, realized
/// as `||Z + m||^2` with `||m||^2 = noncentrality`.
pub fn sample_noncentral_chi2<R: Rng + ?Sized>(df: u32, noncentrality: f64, rng: &mut R) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("noncentral chi-square needs df >= 1".into()));
    }
    if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
        return Err(Error::Domain(format!("noncentrality {noncentrality} must be finite and >= 0")));
    }
    let shift = noncentrality.sqrt();
    let z0: f64 = rng.sample(StandardNormal);
    let mut total = (z0 + shift) * (z0 + shift);
    for _ in 1..df {
        let z: f64 = rng.sample(StandardNormal);
        total += z * z;
    }
    Ok(total)
}

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of `E[df / chi2_df(noncentrality)]`.
pub fn mean_inverse_noncentral_chi2<R: Rng + ?Sized>(
    df: u32,
    noncentrality: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if df <= 2 {
        return Err(Error::Domain(format!("E[1/chi2] is infinite for df = {df} <= 2")));
    }
    if n_draws < 2 {
        return Err(Error::Domain("need at least two draws".into()));
    }
    let k = df as f64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_draws {
        let v = k / sample_noncentral_chi2(df, noncentrality, rng)?;
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n_draws - 1) as f64;
    Ok(McEstimate {
        mean,
        std_error: (var / n_draws as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chi2_quantile_closed_forms() {
        // df = 2 is exponential with mean 2
        assert_abs_diff_eq!(chi2_quantile(2, 0.95).unwrap(), -2.0 * 0.05_f64.ln(), epsilon = 1e-9);
        let z = normal_quantile(0.975).unwrap();
        assert_abs_diff_eq!(chi2_quantile(1, 0.95).unwrap(), z * z, epsilon = 1e-9);
        assert_abs_diff_eq!(chi2_quantile(2, 0.95).unwrap(), 5.99146, epsilon = 1e-5);
        assert_abs_diff_eq!(chi2_quantile(1, 0.95).unwrap(), 3.84146, epsilon = 1e-5);
    }

    #[test]
    fn chi2_quantile_rejects_bad_domain() {
        assert!(matches!(chi2_quantile(0, 0.5), Err(Error::Domain(_))));
        assert!(chi2_quantile(3, 0.0).is_err());
        assert!(chi2_quantile(3, 1.0).is_err());
    }

    #[test]
    fn chi2_quantile_strictly_increasing() {
        for df in [1, 3, 10, 57, 200] {
            let mut last = 0.0;
            for i in 1..200 {
                let q = chi2_quantile(df, i as f64 / 200.0).unwrap();
                assert!(q > last, "df {df} p {i}");
                last = q;
            }
        }
    }

    #[test]
    fn normal_quantile_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(normal_quantile(0.95).unwrap(), 1.64485, epsilon = 1e-5);
        assert_abs_diff_eq!(normal_quantile(0.975).unwrap(), 1.95996, epsilon = 1e-5);
        for p in [1e-6, 0.01, 0.2, 0.4] {
            assert_abs_diff_eq!(normal_quantile(p).unwrap(), -normal_quantile(1.0 - p).unwrap(), epsilon = 1e-8);
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.2).is_err());
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for n in 1..20 {
            fact *= n as f64;
            assert_abs_diff_eq!(ln_gamma(n as f64 + 1.0), fact.ln(), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-12);
    }

    #[test]
    fn noncentral_zero_is_central_and_checks_domain() {
        let mut a = RngStream::new(3, 0);
        let mut b = RngStream::new(3, 0);
        let x = sample_noncentral_chi2(4, 0.0, &mut a).unwrap();
        let y: f64 = (0..4)
            .map(|_| {
                let z: f64 = b.sample(StandardNormal);
                z * z
            })
            .sum();
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        assert!(sample_noncentral_chi2(0, 1.0, &mut a).is_err());
        assert!(sample_noncentral_chi2(3, -1.0, &mut a).is_err());
    }

    #[test]
    fn noncentral_moments() {
        let mut rng = RngStream::new(11, 1);
        let m = 1_000_000;
        let draws: Vec<f64> = (0..m).map(|_| sample_noncentral_chi2(10, 4.0, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert_abs_diff_eq!(mean, 14.0, epsilon = 0.02);
        assert_abs_diff_eq!(var, 36.0, epsilon = 0.5);
    }

    #[test]
    fn mean_inverse_central_closed_form() {
        let mut rng = RngStream::new(5, 2);
        let est = mean_inverse_noncentral_chi2(10, 0.0, 200_000, &mut rng).unwrap();
        assert!((est.mean - 1.25).abs() < 4.0 * est.std_error, "{est:?}");
        let est = mean_inverse_noncentral_chi2(100, 0.0, 20_000, &mut rng).unwrap();
        assert!((est.mean - 100.0 / 98.0).abs() < 4.0 * est.std_error, "{est:?}");
        assert!(mean_inverse_noncentral_chi2(2, 0.0, 20_000, &mut rng).is_err());
    }

    #[test]
    fn mean_inverse_decreases_in_noncentrality() {
        let mut last = f64::INFINITY;
        for rho in [0.0, 5.0, 20.0, 80.0, 320.0] {
            let mut rng = RngStream::new(8, 0);
            let est = mean_inverse_noncentral_chi2(20, rho, 20_000, &mut rng).unwrap();
            assert!(est.mean < last);
            last = est.mean;
        }
        assert!(last < 0.1);
    }
}
