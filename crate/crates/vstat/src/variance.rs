//! Variance estimators for ensemble predictions.
//!
//! All estimators consume the per-learner outputs h_b at a test point together
//! with the inclusion counts N[i][b]. The internal (IM) estimator instead uses
//! the two-level group structure of its plan. Estimates of the first-order
//! parameter zeta_1 may be negative after bias correction; the raw value is
//! always reported and clamping happens only at interval construction.

use crate::error::{Error, Result};
use crate::plan::{InclusionMatrix, SamplingMode, SubsamplePlan};
use crate::stats::normal_quantile;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Im,
    Bm,
    Ij,
    CorrectedV,
    CorrectedU,
    CorrectedIj,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceReport {
    pub zeta1_hat: f64,
    pub zetakk_hat: f64,
    /// (k^2/n) * zeta1_hat + zetakk_hat / B, on the raw (unclamped) zeta1_hat.
    pub total_variance: f64,
    pub method: Method,
    pub ss_tau: Option<f64>,
    pub ss_eps: Option<f64>,
    pub sigma_eps2_hat: Option<f64>,
    /// Set when zeta1_hat is negative and interval construction will floor it.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub center: f64,
    pub half_width: f64,
    pub level: f64,
    pub variance_used: f64,
    pub clamped: bool,
}

impl IntervalEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.center).abs() <= self.half_width
    }
}

/// Sample variance of the per-learner outputs, divisor B - 1.
pub fn zeta_kk_hat(h_values: &[f64]) -> Result<f64> {
    let b = h_values.len();
    if b < 2 {
        return Err(Error::estimator("need at least 2 learners for zeta_kk"));
    }
    let mean = h_values.iter().sum::<f64>() / b as f64;
    Ok(h_values.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / (b - 1) as f64)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Internal two-level estimator: zeta_1 from the variance of group means,
/// zeta_kk from the variance of all outputs about the grand mean.
pub fn im_estimate(h_values: &[f64], plan: &SubsamplePlan) -> Result<VarianceReport> {
    if plan.mode != SamplingMode::ImTwoLevel {
        return Err(Error::estimator("IM requires a two-level plan"));
    }
    let outer = plan
        .outer
        .as_ref()
        .ok_or_else(|| Error::estimator("two-level plan is missing groups"))?;
    let (n_out, n_in) = (outer.n_out, outer.n_in);
    if n_out < 2 || n_in < 2 {
        return Err(Error::estimator("IM requires n_out >= 2 and n_in >= 2"));
    }
    if h_values.len() != n_out * n_in {
        return Err(Error::estimator("h value count does not match group shape"));
    }

    let group_means: Vec<f64> = (0..n_out)
        .map(|g| mean(&h_values[g * n_in..(g + 1) * n_in]))
        .collect();
    let grand = mean(h_values);
    let gm = mean(&group_means);
    let zeta1 = group_means.iter().map(|m| (m - gm) * (m - gm)).sum::<f64>() / (n_out - 1) as f64;
    let zetakk = h_values
        .iter()
        .map(|h| (h - grand) * (h - grand))
        .sum::<f64>()
        / (n_out * n_in - 1) as f64;

    Ok(VarianceReport {
        zeta1_hat: zeta1,
        zetakk_hat: zetakk,
        total_variance: total_variance(zeta1, zetakk, plan.n, plan.k, plan.b),
        method: Method::Im,
        ss_tau: None,
        ss_eps: None,
        sigma_eps2_hat: None,
        clamped: false,
    })
}

/// Per-point weighted means m_i = sum_b (N[i][b]/N_i) h_b.
/// Points never sampled (N_i = 0) yield None.
pub fn weighted_means(h_values: &[f64], inclusion: &InclusionMatrix) -> Vec<Option<f64>> {
    (0..inclusion.n)
        .map(|i| {
            let ni = inclusion.row_sum(i);
            if ni == 0 {
                return None;
            }
            let s: f64 = inclusion
                .row(i)
                .iter()
                .zip(h_values)
                .map(|(&c, &h)| c as f64 * h)
                .sum();
            Some(s / ni as f64)
        })
        .collect()
}

/// Balanced estimator: zeta_1 from the spread of the m_i, zeta_kk from the
/// learner outputs. Points with N_i = 0 are excluded and the divisor adjusted.
pub fn bm_estimate(h_values: &[f64], inclusion: &InclusionMatrix) -> Result<VarianceReport> {
    let zetakk = zeta_kk_hat(h_values)?;
    let ms: Vec<f64> = weighted_means(h_values, inclusion)
        .into_iter()
        .flatten()
        .collect();
    let n_prime = ms.len();
    if n_prime < 2 {
        return Err(Error::estimator("fewer than 2 training points were ever sampled"));
    }
    let m_bar = mean(&ms);
    let zeta1 = ms.iter().map(|m| (m - m_bar) * (m - m_bar)).sum::<f64>() / (n_prime - 1) as f64;
    Ok(VarianceReport {
        zeta1_hat: zeta1,
        zetakk_hat: zetakk,
        total_variance: total_variance(zeta1, zetakk, inclusion.n, inclusion.k, inclusion.b),
        method: Method::Bm,
        ss_tau: None,
        ss_eps: None,
        sigma_eps2_hat: None,
        clamped: false,
    })
}

/// Infinitesimal jackknife: sum over points of the squared covariance between
/// inclusion counts and learner outputs (covariance divisor B). Estimates the
/// full limiting variance, not zeta_1 itself.
pub fn ij_estimate(h_values: &[f64], inclusion: &InclusionMatrix) -> Result<f64> {
    let b = h_values.len();
    if b < 2 {
        return Err(Error::estimator("need at least 2 learners for IJ"));
    }
    if b != inclusion.b {
        return Err(Error::estimator("h value count does not match inclusion matrix"));
    }
    let h_bar = mean(h_values);
    let mut total = 0.0;
    for i in 0..inclusion.n {
        let n_bar = inclusion.row_sum(i) as f64 / b as f64;
        let cov: f64 = inclusion
            .row(i)
            .iter()
            .zip(h_values)
            .map(|(&c, &h)| (c as f64 - n_bar) * (h - h_bar))
            .sum::<f64>()
            / b as f64;
        total += cov * cov;
    }
    Ok(total)
}

/// Bias-corrected zeta_1 via variance-component decomposition. The grand mean
/// is weighted by N_i; under exact balance this reduces to the unweighted mean
/// and the estimator collapses to the closed balanced form (see
/// `corrected_v_simplified` for that identity).
pub fn corrected_v(h_values: &[f64], inclusion: &InclusionMatrix) -> Result<VarianceReport> {
    let zetakk = zeta_kk_hat(h_values)?;
    let ms = weighted_means(h_values, inclusion);
    let active: Vec<(usize, f64)> = ms
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|v| (i, v)))
        .collect();
    let n_prime = active.len();
    if n_prime < 2 {
        return Err(Error::estimator("fewer than 2 training points were ever sampled"));
    }
    let c: f64 = active
        .iter()
        .map(|&(i, _)| inclusion.row_sum(i) as f64)
        .sum();
    if c <= n_prime as f64 {
        return Err(Error::estimator(
            "C = B*k must exceed the number of sampled points (r > 1)",
        ));
    }

    let grand: f64 = active
        .iter()
        .map(|&(i, m)| inclusion.row_sum(i) as f64 * m)
        .sum::<f64>()
        / c;
    let ss_tau: f64 = active
        .iter()
        .map(|&(i, m)| inclusion.row_sum(i) as f64 * (m - grand) * (m - grand))
        .sum();
    let mut ss_eps = 0.0;
    for &(i, m) in &active {
        for (&cnt, &h) in inclusion.row(i).iter().zip(h_values) {
            if cnt > 0 {
                ss_eps += cnt as f64 * (h - m) * (h - m);
            }
        }
    }
    let sigma_eps2 = ss_eps / (c - n_prime as f64);
    let sum_ni2: f64 = active
        .iter()
        .map(|&(i, _)| {
            let ni = inclusion.row_sum(i) as f64;
            ni * ni
        })
        .sum();
    let zeta1 = (ss_tau - (n_prime as f64 - 1.0) * sigma_eps2) / (c - sum_ni2 / c);

    Ok(VarianceReport {
        zeta1_hat: zeta1,
        zetakk_hat: zetakk,
        total_variance: total_variance(zeta1, zetakk, inclusion.n, inclusion.k, inclusion.b),
        method: Method::CorrectedV,
        ss_tau: Some(ss_tau),
        ss_eps: Some(ss_eps),
        sigma_eps2_hat: Some(sigma_eps2),
        clamped: zeta1 < 0.0,
    })
}

/// Closed forms of the bias correction under exact balance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BalancedCorrection {
    /// Original-BM-minus-correction approximation: needs no extra sums.
    pub simplified: f64,
    /// The exact closed form, algebraically equal to `corrected_v`.
    pub exact: f64,
}

/// Bias-corrected zeta_1 specialized to balanced plans.
pub fn corrected_v_simplified(
    h_values: &[f64],
    inclusion: &InclusionMatrix,
) -> Result<BalancedCorrection> {
    let n = inclusion.n;
    let b = inclusion.b;
    let k = inclusion.k;
    let r = b * k / n;
    if b * k != r * n || (0..n).any(|i| inclusion.row_sum(i) as usize != r) {
        return Err(Error::estimator("corrected_v_simplified requires a balanced plan"));
    }
    if r <= 1 {
        return Err(Error::estimator("balanced correction requires r > 1"));
    }
    let ms: Vec<f64> = weighted_means(h_values, inclusion)
        .into_iter()
        .flatten()
        .collect();
    let m_bar = mean(&ms);
    let sum_m: f64 = ms.iter().map(|m| (m - m_bar) * (m - m_bar)).sum();
    let h_bar = mean(h_values);
    let sum_h: f64 = h_values.iter().map(|h| (h - h_bar) * (h - h_bar)).sum();

    let (nf, rf, kf, bf) = (n as f64, r as f64, k as f64, b as f64);
    // substituting sigma_eps^2 = (k sum_h - r sum_m) / (n (r - 1)) into
    // zeta1 = sum_m / (n - 1) - sigma_eps^2 / r
    let exact = (1.0 / (nf - 1.0) + 1.0 / (nf * (rf - 1.0))) * sum_m
        - kf / (rf * nf * (rf - 1.0)) * sum_h;
    let zetakk = sum_h / (bf - 1.0);
    let simplified = sum_m / (nf - 1.0) - (nf / kf) * zetakk / bf;
    Ok(BalancedCorrection { simplified, exact })
}

/// Empirical bias correction for without-replacement sampling.
pub fn corrected_u(h_values: &[f64], inclusion: &InclusionMatrix) -> Result<f64> {
    let n = inclusion.n;
    let k = inclusion.k;
    if k >= n {
        return Err(Error::estimator("corrected_u requires k < n"));
    }
    let b = inclusion.b as f64;
    let zetakk = zeta_kk_hat(h_values)?;
    let ms: Vec<f64> = weighted_means(h_values, inclusion)
        .into_iter()
        .flatten()
        .collect();
    if ms.len() < 2 {
        return Err(Error::estimator("fewer than 2 training points were ever sampled"));
    }
    let m_bar = mean(&ms);
    let sum_m: f64 = ms.iter().map(|m| (m - m_bar) * (m - m_bar)).sum();
    let (nf, kf) = (n as f64, k as f64);
    let inner = sum_m / (nf - 1.0) - (nf - kf) / kf * zetakk / b;
    Ok(nf * (nf - 1.0) / ((nf - kf) * (nf - kf)) * inner)
}

/// Finite-sample adjustment applied to the IJ estimate when sampling without
/// replacement.
pub fn corrected_ij(v_ij: f64, n: usize, k: usize) -> Result<f64> {
    if k >= n {
        return Err(Error::estimator("corrected_ij requires k < n"));
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(v_ij * nf * (nf - 1.0) / ((nf - kf) * (nf - kf)))
}

/// Total prediction variance: the first-order part plus the Monte Carlo part.
pub fn total_variance(zeta1: f64, zetakk: f64, n: usize, k: usize, b: usize) -> f64 {
    (k as f64) * (k as f64) / (n as f64) * zeta1 + zetakk / (b as f64)
}

/// Normal-quantile interval; negative variance is floored to zero and flagged.
pub fn confidence_interval(center: f64, variance: f64, level: f64) -> Result<IntervalEstimate> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::config("confidence level must be in (0, 1)"));
    }
    let clamped = variance < 0.0;
    let v = variance.max(0.0);
    let z = normal_quantile((1.0 + level) / 2.0);
    Ok(IntervalEstimate {
        center,
        half_width: z * v.sqrt(),
        level,
        variance_used: v,
        clamped,
    })
}
