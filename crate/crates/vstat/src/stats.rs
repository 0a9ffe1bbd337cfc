//! Summary statistics for simulation studies: normality testing, coverage
//! and variance-ratio bookkeeping, and the normal-distribution helpers the
//! rest of the crate uses.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalityResult {
    /// Omnibus K^2 statistic (sum of squared skewness and kurtosis z-scores).
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
}

/// D'Agostino-Pearson omnibus test. Transforms the sample skewness
/// (D'Agostino 1970) and kurtosis (Anscombe-Glynn 1983) to approximate
/// standard normals and refers their sum of squares to chi-squared with 2 df.
pub fn normality_test(samples: &[f64]) -> Result<NormalityResult> {
    let n = samples.len();
    if n < 20 {
        return Err(Error::estimator(format!(
            "normality test needs at least 20 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(Error::estimator("normality test: sample has zero variance"));
    }
    let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let g1 = m3 / m2.powf(1.5);
    let b2 = m4 / (m2 * m2);

    // skewness z-score
    let y = g1 * ((nf + 1.0) * (nf + 3.0) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / w2.sqrt().ln().sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let ya = y / alpha;
    let z1 = delta * (ya + (ya * ya + 1.0).sqrt()).ln();

    // kurtosis z-score
    let e_b2 = 3.0 * (nf - 1.0) / (nf + 1.0);
    let var_b2 = 24.0 * nf * (nf - 2.0) * (nf - 3.0)
        / ((nf + 1.0) * (nf + 1.0) * (nf + 3.0) * (nf + 5.0));
    let x = (b2 - e_b2) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * (6.0 * (nf + 3.0) * (nf + 5.0) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0
        + 8.0 / sqrt_beta1
            * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let z2 = ((1.0 - 2.0 / (9.0 * a))
        - ((1.0 - 2.0 / a) / (1.0 + x * (2.0 / (a - 4.0)).sqrt())).cbrt())
        / (2.0 / (9.0 * a)).sqrt();

    let k2 = z1 * z1 + z2 * z2;
    Ok(NormalityResult {
        statistic: k2,
        p_value: chi2_2_survival(k2),
        n_samples: n,
    })
}

/// Survival function of chi-squared with 2 degrees of freedom (exact).
pub fn chi2_2_survival(x: f64) -> f64 {
    (-x / 2.0).exp()
}

/// Percentage of intervals containing the reference value.
pub fn coverage(intervals: &[crate::variance::IntervalEstimate], reference: f64) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::estimator("coverage needs at least one interval"));
    }
    let hits = intervals.iter().filter(|ci| ci.contains(reference)).count();
    Ok(100.0 * hits as f64 / intervals.len() as f64)
}

/// Mean estimated variance over the empirical variance of the estimates.
pub fn variance_ratio(estimated: &[f64], empirical: f64) -> Result<f64> {
    if empirical <= 0.0 {
        return Err(Error::estimator("variance ratio needs a positive denominator"));
    }
    let mean_est = estimated.iter().sum::<f64>() / estimated.len() as f64;
    Ok(mean_est / empirical)
}

/// Sample variance, divisor n - 1.
pub fn empirical_variance(samples: &[f64]) -> f64 {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

/// Standard normal CDF via the complementary error function (accurate in
/// both tails).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF (Acklam's rational approximation, refined with
/// one Halley step; absolute error well below 1e-9).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(0.0 < p && p < 1.0, "quantile needs p in (0, 1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // one Halley refinement against the CDF
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedSpec;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quantile_known_values() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-5);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        assert!((normal_quantile(0.025) + 1.959964).abs() < 1e-5);
        // round trip
        for &p in &[0.001, 0.01, 0.3, 0.7, 0.99, 0.999] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-7, "p = {p}");
        }
    }

    #[test]
    fn cdf_symmetry() {
        for &x in &[0.0, 0.5, 1.0, 2.5] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perfectly_symmetric_mesokurtic_sample_accepted() {
        // statistic ~ 0 => p close to 1 for a sample with normal-like moments;
        // use actual normal draws and just check p is not tiny
        let mut rng = SeedSpec::new(4, "norm").rng();
        let xs: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = normality_test(&xs).unwrap();
        assert!(r.p_value > 0.01, "p = {}", r.p_value);
        assert!(chi2_2_survival(0.0) == 1.0);
    }

    #[test]
    fn rejects_exponential() {
        let mut rng = SeedSpec::new(4, "exp").rng();
        let xs: Vec<f64> = (0..2000).map(|_| -f64::ln(rng.gen::<f64>())).collect();
        let r = normality_test(&xs).unwrap();
        assert!(r.p_value < 1e-3, "p = {}", r.p_value);
    }

    #[test]
    fn size_near_nominal() {
        // under the null the test should reject at roughly the nominal rate
        let mut rejections = 0;
        for rep in 0..200 {
            let mut rng = SeedSpec::new(100 + rep, "size").rng();
            let xs: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
            if normality_test(&xs).unwrap().p_value < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / 200.0;
        assert!((0.01..=0.11).contains(&rate), "rejection rate {rate}");
    }

    #[test]
    fn affine_invariance() {
        let mut rng = SeedSpec::new(7, "aff").rng();
        let xs: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0_f64).powi(3)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 * x - 11.0).collect();
        let rx = normality_test(&xs).unwrap();
        let ry = normality_test(&ys).unwrap();
        assert!((rx.statistic - ry.statistic).abs() < 1e-9);
        assert!((rx.p_value - ry.p_value).abs() < 1e-9);
    }

    #[test]
    fn p_monotone_in_statistic() {
        assert!(chi2_2_survival(1.0) > chi2_2_survival(2.0));
        assert!(chi2_2_survival(2.0) > chi2_2_survival(10.0));
    }

    #[test]
    fn guards() {
        assert!(normality_test(&[1.0; 10]).is_err()); // too few
        assert!(normality_test(&[2.0; 50]).is_err()); // zero variance
    }

    #[test]
    fn coverage_and_ratios() {
        let ci = |center: f64, hw: f64| crate::variance::IntervalEstimate {
            center,
            half_width: hw,
            level: 0.95,
            variance_used: hw * hw,
            clamped: false,
        };
        let intervals = [ci(0.0, 1.0), ci(0.5, 1.0), ci(5.0, 1.0), ci(-0.2, 1.0)];
        assert_eq!(coverage(&intervals, 0.0).unwrap(), 75.0);
        assert_eq!(coverage(&intervals, 100.0).unwrap(), 0.0);
        assert_eq!(coverage(&intervals[..2], 0.3).unwrap(), 100.0);
        assert!(coverage(&[], 0.0).is_err());
        assert_eq!(variance_ratio(&[2.0, 4.0], 3.0).unwrap(), 1.0);
        assert_eq!(variance_ratio(&[1.0, 3.0], 1.0).unwrap(), 2.0);
        assert!(variance_ratio(&[1.0], 0.0).is_err());
        assert!((empirical_variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_variance(&[0.0, 2.0]), 2.0);
        assert_eq!(empirical_variance(&[3.0, 3.0, 3.0]), 0.0);
    }
}
