//! Exact brute-force references and combinatorial identities.
//!
//! Everything in this module is small-scale and slow on purpose: these are the
//! independent ground truths the fast estimators are checked against. All
//! enumerations respect a hard term budget so a bad (n, k) cannot hang a test
//! run.

use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use rand_distr::{Distribution, StandardNormal};

/// Hard cap on kernel evaluations for any single brute-force enumeration.
pub const EVAL_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactKind {
    CompleteV,
    CompleteU,
    Lemma1,
    CompositeU,
}

#[derive(Debug, Clone)]
pub struct ExactStatistic {
    pub value: f64,
    pub terms_evaluated: u64,
    pub kind: ExactKind,
}

/// Stirling numbers of the second kind via the standard recurrence
/// S(k, j) = j S(k-1, j) + S(k-1, j-1).
pub fn stirling2(k: usize, j: usize) -> Result<u128> {
    if k > 20 {
        return Err(Error::Budget(format!("stirling2 supports k <= 20, got {k}")));
    }
    if j > k {
        return Ok(0);
    }
    if k == 0 {
        return Ok(1); // S(0, 0)
    }
    if j == 0 {
        return Ok(0);
    }
    let mut row = vec![0u128; k + 1];
    row[0] = 1; // S(0, 0)
    for kk in 1..=k {
        // compute in place right-to-left so row still holds S(kk-1, .)
        for jj in (1..=kk.min(j)).rev() {
            row[jj] = jj as u128 * row[jj] + row[jj - 1];
        }
        row[0] = 0;
    }
    Ok(row[j])
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn checked_pow(n: usize, k: usize) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..k {
        acc = acc.checked_mul(n as u64)?;
        if acc > EVAL_BUDGET {
            return Some(acc); // caller rejects anyway
        }
    }
    Some(acc)
}

fn budget_check(terms: u64, what: &str) -> Result<()> {
    if terms > EVAL_BUDGET {
        Err(Error::Budget(format!(
            "{what} needs {terms} kernel evaluations, budget is {EVAL_BUDGET}"
        )))
    } else {
        Ok(())
    }
}

/// Visit every k-tuple over {0, .., n-1} in lexicographic order.
fn for_each_tuple(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut tuple = vec![0usize; k];
    loop {
        f(&tuple);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < n {
                break;
            }
            tuple[pos] = 0;
        }
    }
}

/// Visit every size-k subset of {0, .., n-1} in increasing order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance to next combination
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] < n - k + pos {
                idx[pos] += 1;
                for j in pos + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Complete V-statistic: mean of h over all n^k ordered tuples.
pub fn complete_v_bruteforce(
    n: usize,
    k: usize,
    eval: impl FnMut(&[usize]) -> f64,
) -> Result<ExactStatistic> {
    let mut eval = eval;
    let terms = checked_pow(n, k)
        .ok_or_else(|| Error::Budget("n^k overflows u64".into()))?;
    budget_check(terms, "complete V")?;
    let mut sum = 0.0;
    for_each_tuple(n, k, |t| sum += eval(t));
    Ok(ExactStatistic {
        value: sum / terms as f64,
        terms_evaluated: terms,
        kind: ExactKind::CompleteV,
    })
}

/// Complete U-statistic: mean of h over all C(n, k) increasing subsets.
pub fn complete_u_bruteforce(
    n: usize,
    k: usize,
    eval: impl FnMut(&[usize]) -> f64,
) -> Result<ExactStatistic> {
    let mut eval = eval;
    if k > n {
        return Err(Error::estimator("complete U requires k <= n"));
    }
    let terms = binomial(n, k);
    if terms > EVAL_BUDGET as u128 {
        return Err(Error::Budget(format!(
            "complete U needs {terms} kernel evaluations, budget is {EVAL_BUDGET}"
        )));
    }
    let mut sum = 0.0;
    for_each_subset(n, k, |s| sum += eval(s));
    Ok(ExactStatistic {
        value: sum / terms as f64,
        terms_evaluated: terms as u64,
        kind: ExactKind::CompleteU,
    })
}

#[derive(Debug, Clone)]
pub struct Lemma1Decomposition {
    /// contributions[j - 1] = n^{-k} j! S(k, j) C(n, j) U^{(j)}
    pub contributions: Vec<f64>,
    pub value: f64,
    pub terms_evaluated: u64,
}

/// Expand the complete V-statistic over the number of distinct points used:
/// V = n^{-k} sum_j j! S(k, j) C(n, j) U^{(j)}, where U^{(j)} averages, over
/// size-j subsets, the mean of h over tuples hitting all j points.
pub fn lemma1_decomposition(
    n: usize,
    k: usize,
    mut eval: impl FnMut(&[usize]) -> f64,
) -> Result<Lemma1Decomposition> {
    let j_max = k.min(n);
    // budget: for each j we scan C(n,j) subsets times j^k candidate tuples
    let mut terms: u64 = 0;
    for j in 1..=j_max {
        let t = binomial(n, j).checked_mul(checked_pow(j, k).unwrap_or(u64::MAX) as u128);
        match t {
            Some(t) if t <= EVAL_BUDGET as u128 => terms += t as u64,
            _ => return Err(Error::Budget("lemma 1 enumeration exceeds budget".into())),
        }
        budget_check(terms, "lemma 1")?;
    }

    let nk = (n as f64).powi(k as i32);
    let mut contributions = Vec::with_capacity(j_max);
    let mut scratch = vec![0usize; k];
    for j in 1..=j_max {
        let surjections = factorial(j) * stirling2(k, j)?;
        let mut subset_sum = 0.0;
        for_each_subset(n, j, |s| {
            // mean of h over k-tuples from s using all j of its points
            let mut tuple_sum = 0.0;
            for_each_tuple(j, k, |t| {
                let mut used = 0u32;
                for &ti in t {
                    used |= 1 << ti;
                }
                if used.count_ones() as usize == j {
                    for (slot, &ti) in scratch.iter_mut().zip(t) {
                        *slot = s[ti];
                    }
                    tuple_sum += eval(&scratch);
                }
            });
            subset_sum += tuple_sum / surjections as f64;
        });
        let u_j = subset_sum / binomial(n, j) as f64;
        contributions.push(surjections as f64 * binomial(n, j) as f64 * u_j / nk);
    }
    Ok(Lemma1Decomposition {
        value: contributions.iter().sum(),
        contributions,
        terms_evaluated: terms,
    })
}

fn factorial(j: usize) -> u128 {
    (1..=j as u128).product()
}

/// Weight of one tuple inside the composite kernel: a tuple with u distinct
/// elements lies in C(n-u, k-u) of the size-k subsets, so it gets weight
/// 1 / C(n-u, k-u) to be counted exactly once overall.
pub fn composite_weight(tuple: &[usize], n: usize, k: usize) -> (usize, f64) {
    let mut seen = std::collections::BTreeSet::new();
    for &i in tuple {
        seen.insert(i);
    }
    let u = seen.len();
    (u, 1.0 / binomial(n - u, k - u) as f64)
}

/// Sum of composite weights over all k-tuples drawn from one size-k subset.
/// Always equals n^k / C(n, k) regardless of which subset is used.
pub fn composite_weight_sum_check(n: usize, k: usize) -> Result<(f64, f64)> {
    let terms = checked_pow(k, k).ok_or_else(|| Error::Budget("k^k overflows".into()))?;
    budget_check(terms, "composite weight sum")?;
    let subset: Vec<usize> = (0..k).collect();
    let mut sum = 0.0;
    let mut scratch = vec![0usize; k];
    for_each_tuple(k, k, |t| {
        for (slot, &ti) in scratch.iter_mut().zip(t) {
            *slot = subset[ti];
        }
        sum += composite_weight(&scratch, n, k).1;
    });
    let expected = (n as f64).powi(k as i32) / binomial(n, k) as f64;
    Ok((sum, expected))
}

/// U-statistic with the composite kernel
/// phi*_k(s) = (C(n,k)/n^k) sum_{tuples from s} w(tuple) h(tuple);
/// its average over all size-k subsets reproduces the complete V-statistic.
pub fn composite_u_bruteforce(
    n: usize,
    k: usize,
    mut eval: impl FnMut(&[usize]) -> f64,
) -> Result<ExactStatistic> {
    if k > n {
        return Err(Error::estimator("composite U requires k <= n"));
    }
    let subsets = binomial(n, k);
    let per_subset = checked_pow(k, k).ok_or_else(|| Error::Budget("k^k overflows".into()))?;
    let terms = subsets
        .checked_mul(per_subset as u128)
        .filter(|&t| t <= EVAL_BUDGET as u128)
        .ok_or_else(|| Error::Budget("composite U enumeration exceeds budget".into()))?;

    let scale = subsets as f64 / (n as f64).powi(k as i32);
    let mut scratch = vec![0usize; k];
    let mut subset_sum = 0.0;
    for_each_subset(n, k, |s| {
        let mut weighted = 0.0;
        for_each_tuple(k, k, |t| {
            for (slot, &ti) in scratch.iter_mut().zip(t) {
                *slot = s[ti];
            }
            let (_, w) = composite_weight(&scratch, n, k);
            weighted += w * eval(&scratch);
        });
        subset_sum += scale * weighted;
    });
    Ok(ExactStatistic {
        value: subset_sum / subsets as f64,
        terms_evaluated: terms as u64,
        kind: ExactKind::CompositeU,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: usize,
}

/// Monte Carlo estimate of zeta_{c,k}: the covariance between two kernel
/// evaluations sharing their first c arguments. Each rep draws c shared points
/// and two independent sets of k - c completions; the estimate is the sample
/// covariance of the paired kernel values and the standard error comes from
/// the spread of the centered products.
pub fn mc_zeta(
    c: usize,
    k: usize,
    reps: usize,
    mut draw: impl FnMut(&mut rand_chacha::ChaCha12Rng) -> f64,
    kernel: impl Fn(&[f64]) -> f64,
    seed: &SeedSpec,
) -> Result<McEstimate> {
    if c == 0 || c > k {
        return Err(Error::config("mc_zeta requires 1 <= c <= k"));
    }
    if reps < 2 {
        return Err(Error::config("mc_zeta requires at least 2 reps"));
    }
    let mut rng = seed.rng();
    let mut a = vec![0.0; k];
    let mut b = vec![0.0; k];
    let mut h1 = Vec::with_capacity(reps);
    let mut h2 = Vec::with_capacity(reps);
    for _ in 0..reps {
        for i in 0..c {
            let z = draw(&mut rng);
            a[i] = z;
            b[i] = z;
        }
        for i in c..k {
            a[i] = draw(&mut rng);
        }
        for i in c..k {
            b[i] = draw(&mut rng);
        }
        h1.push(kernel(&a));
        h2.push(kernel(&b));
    }
    let m1 = h1.iter().sum::<f64>() / reps as f64;
    let m2 = h2.iter().sum::<f64>() / reps as f64;
    let products: Vec<f64> = h1
        .iter()
        .zip(&h2)
        .map(|(&x, &y)| (x - m1) * (y - m2))
        .collect();
    let value = products.iter().sum::<f64>() / (reps - 1) as f64;
    let pm = products.iter().sum::<f64>() / reps as f64;
    let pv = products.iter().map(|p| (p - pm) * (p - pm)).sum::<f64>() / (reps - 1) as f64;
    Ok(McEstimate {
        value,
        std_error: (pv / reps as f64).sqrt(),
        reps,
    })
}

/// For the mean kernel on i.i.d. data with variance sigma2:
/// zeta_{1,k} = sigma2 / k^2 and zeta_{k,k} = sigma2 / k.
pub fn analytic_mean_kernel_zetas(sigma2: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    (sigma2 / (kf * kf), sigma2 / kf)
}

/// Convenience draw for mc_zeta tests: standard normal variates.
pub fn standard_normal_draw(rng: &mut rand_chacha::ChaCha12Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stirling_values() {
        assert_eq!(stirling2(3, 2).unwrap(), 3);
        assert_eq!(stirling2(4, 2).unwrap(), 7);
        assert_eq!(stirling2(5, 3).unwrap(), 25);
        for k in 1..=20 {
            assert_eq!(stirling2(k, k).unwrap(), 1);
            assert_eq!(stirling2(k, 1).unwrap(), 1);
        }
        assert_eq!(stirling2(4, 5).unwrap(), 0);
        assert!(stirling2(21, 2).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }

    fn product_kernel(z: &[f64]) -> f64 {
        z.iter().product()
    }

    #[test]
    fn product_kernel_v_and_u_on_small_sample() {
        // data z = (1, 2, 3), k = 2, h = z_i * z_j
        let z = [1.0, 2.0, 3.0];
        let v = complete_v_bruteforce(3, 2, |t| product_kernel(&[z[t[0]], z[t[1]]])).unwrap();
        assert!((v.value - 4.0).abs() < 1e-12);
        assert_eq!(v.terms_evaluated, 9);

        let u = complete_u_bruteforce(3, 2, |t| product_kernel(&[z[t[0]], z[t[1]]])).unwrap();
        assert!((u.value - 11.0 / 3.0).abs() < 1e-12);
        assert_eq!(u.terms_evaluated, 3);
    }

    #[test]
    fn lemma1_matches_hand_decomposition() {
        let z = [1.0, 2.0, 3.0];
        let d = lemma1_decomposition(3, 2, |t| product_kernel(&[z[t[0]], z[t[1]]])).unwrap();
        assert_eq!(d.contributions.len(), 2);
        assert!((d.contributions[0] - 14.0 / 9.0).abs() < 1e-12); // diagonal tuples
        assert!((d.contributions[1] - 22.0 / 9.0).abs() < 1e-12); // off-diagonal
        assert!((d.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn composite_weight_examples() {
        // n = 4, k = 2: tuple (0,0) has u = 1, weight 1/C(3,1) = 1/3;
        // tuple (0,1) has u = 2, weight 1/C(2,0) = 1
        assert_eq!(composite_weight(&[0, 0], 4, 2), (1, 1.0 / 3.0));
        assert_eq!(composite_weight(&[0, 1], 4, 2), (2, 1.0));

        let (sum, expected) = composite_weight_sum_check(4, 2).unwrap();
        assert!((sum - 8.0 / 3.0).abs() < 1e-12);
        assert!((expected - 8.0 / 3.0).abs() < 1e-12);

        let (sum, expected) = composite_weight_sum_check(6, 3).unwrap();
        assert!((sum - 10.8).abs() < 1e-12);
        assert!((expected - 10.8).abs() < 1e-12);
    }

    #[test]
    fn composite_u_equals_complete_v() {
        let z = [1.0, 2.0, 3.0, 5.0, 7.0];
        let eval = |t: &[usize]| t.iter().map(|&i| z[i]).sum::<f64>().powi(2);
        let v = complete_v_bruteforce(5, 3, eval).unwrap();
        let cu = composite_u_bruteforce(5, 3, eval).unwrap();
        assert!((v.value - cu.value).abs() < 1e-12 * v.value.abs().max(1.0));
    }

    #[test]
    fn budget_enforced() {
        assert!(complete_v_bruteforce(100, 5, |_| 0.0).is_err());
        assert!(complete_u_bruteforce(100, 10, |_| 0.0).is_err());
    }

    #[test]
    fn mc_zeta_mean_kernel_matches_analytic() {
        let k = 4;
        let kernel = |z: &[f64]| z.iter().sum::<f64>() / z.len() as f64;
        let (z1, zkk) = analytic_mean_kernel_zetas(1.0, k);
        assert_eq!((z1, zkk), (1.0 / 16.0, 0.25));

        let e1 = mc_zeta(1, k, 200_000, standard_normal_draw, kernel, &SeedSpec::new(3, "z1"))
            .unwrap();
        assert!(
            (e1.value - z1).abs() < 3.0 * e1.std_error,
            "zeta1 {} se {}",
            e1.value,
            e1.std_error
        );

        let ekk = mc_zeta(k, k, 200_000, standard_normal_draw, kernel, &SeedSpec::new(3, "zkk"))
            .unwrap();
        assert!(
            (ekk.value - zkk).abs() < 3.0 * ekk.std_error,
            "zetakk {} se {}",
            ekk.value,
            ekk.std_error
        );
    }

    #[test]
    fn mc_zeta_constant_kernel_is_zero() {
        let e = mc_zeta(1, 3, 1000, standard_normal_draw, |_| 5.0, &SeedSpec::new(9, "c"))
            .unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.std_error, 0.0);
    }
}
