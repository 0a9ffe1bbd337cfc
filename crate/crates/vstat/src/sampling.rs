//! Plan generation for every sampling mode, with reproducible randomness.

use crate::error::{Error, Result};
use crate::plan::{OuterGroups, SamplingMode, SubsamplePlan};
use crate::seed::SeedSpec;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// B subsamples of k i.i.d. uniform draws from [0, n).
pub fn draw_with_replacement(n: usize, k: usize, b: usize, seed: &SeedSpec) -> Result<SubsamplePlan> {
    if n == 0 || k == 0 || b == 0 {
        return Err(Error::config("n, k and B must all be positive"));
    }
    let mut rng = seed.rng();
    let subsamples = (0..b)
        .map(|_| (0..k).map(|_| rng.gen_range(0..n)).collect())
        .collect();
    Ok(SubsamplePlan {
        subsamples,
        mode: SamplingMode::WithReplacement,
        n,
        k,
        b,
        r: None,
        outer: None,
    })
}

/// B subsamples of k distinct indices, uniform over size-k subsets.
pub fn draw_without_replacement(
    n: usize,
    k: usize,
    b: usize,
    seed: &SeedSpec,
) -> Result<SubsamplePlan> {
    if n == 0 || k == 0 || b == 0 {
        return Err(Error::config("n, k and B must all be positive"));
    }
    if k > n {
        return Err(Error::config(format!("k = {k} exceeds n = {n}")));
    }
    let mut rng = seed.rng();
    let subsamples = (0..b)
        .map(|_| rand::seq::index::sample(&mut rng, n, k).into_vec())
        .collect();
    Ok(SubsamplePlan {
        subsamples,
        mode: SamplingMode::WithoutReplacement,
        n,
        k,
        b,
        r: None,
        outer: None,
    })
}

const BALANCED_U_RESHUFFLES: usize = 100;

/// Exactly balanced plan: every training point appears r = B*k/n times across
/// the ensemble. The `BalancedV` variant allows duplicates within a subsample;
/// `BalancedU` requires the k indices in each subsample to be distinct.
pub fn draw_balanced(
    n: usize,
    k: usize,
    b: usize,
    mode: SamplingMode,
    seed: &SeedSpec,
) -> Result<SubsamplePlan> {
    if n == 0 || k == 0 || b == 0 {
        return Err(Error::config("n, k and B must all be positive"));
    }
    if !matches!(mode, SamplingMode::BalancedV | SamplingMode::BalancedU) {
        return Err(Error::config("mode must be balanced_v or balanced_u"));
    }
    if (b * k) % n != 0 {
        return Err(Error::config(format!(
            "B*k = {} is not divisible by n = {n}",
            b * k
        )));
    }
    if mode == SamplingMode::BalancedU && k > n {
        return Err(Error::config(format!("balanced_u requires k <= n, got k = {k}, n = {n}")));
    }
    let r = b * k / n;
    let mut rng = seed.rng();

    // Multiset with each index r times, shuffled and chunked into B blocks.
    let mut pool: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat(i).take(r)).collect();
    for _ in 0..BALANCED_U_RESHUFFLES {
        pool.shuffle(&mut rng);
        let mut blocks: Vec<Vec<usize>> = pool.chunks(k).map(|c| c.to_vec()).collect();
        if mode == SamplingMode::BalancedV || repair_duplicates(&mut blocks, n) {
            let plan = SubsamplePlan {
                subsamples: blocks,
                mode,
                n,
                k,
                b,
                r: Some(r),
                outer: None,
            };
            plan.validate()?;
            return Ok(plan);
        }
    }
    Err(Error::config(format!(
        "could not build a duplicate-free balanced_u plan after {BALANCED_U_RESHUFFLES} reshuffles"
    )))
}

/// Swap within-block duplicates into other blocks where the swap removes the
/// duplicate on both sides. Returns false if stuck.
fn repair_duplicates(blocks: &mut [Vec<usize>], n: usize) -> bool {
    let nb = blocks.len();
    loop {
        let mut offender = None;
        'scan: for bi in 0..nb {
            let mut seen = vec![false; n];
            for (j, &v) in blocks[bi].iter().enumerate() {
                if seen[v] {
                    offender = Some((bi, j));
                    break 'scan;
                }
                seen[v] = true;
            }
        }
        let Some((bi, j)) = offender else { return true };
        let v = blocks[bi][j];
        let mut swapped = false;
        'search: for bo in 0..nb {
            if bo == bi {
                continue;
            }
            for jo in 0..blocks[bo].len() {
                let w = blocks[bo][jo];
                if w != v && !blocks[bi].contains(&w) && !blocks[bo].contains(&v) {
                    blocks[bi][j] = w;
                    blocks[bo][jo] = v;
                    swapped = true;
                    break 'search;
                }
            }
        }
        if !swapped {
            return false;
        }
    }
}

/// Two-level plan: n_out groups with distinct fixed points; each of a group's
/// n_in subsamples contains the fixed point in one slot plus k-1 further
/// indices drawn per `mode`.
pub fn draw_im_plan(
    n: usize,
    k: usize,
    n_out: usize,
    n_in: usize,
    mode: SamplingMode,
    seed: &SeedSpec,
) -> Result<SubsamplePlan> {
    if n == 0 || k == 0 {
        return Err(Error::config("n and k must be positive"));
    }
    // The IM estimator needs n_out >= 2 and n_in >= 2; plan generation itself
    // only requires the groups to be non-empty.
    if n_out == 0 || n_in == 0 {
        return Err(Error::config("n_out and n_in must both be positive"));
    }
    if n_out > n {
        return Err(Error::config(format!("n_out = {n_out} exceeds n = {n}")));
    }
    let without = match mode {
        SamplingMode::WithReplacement => false,
        SamplingMode::WithoutReplacement => {
            if k > n {
                return Err(Error::config(format!("k = {k} exceeds n = {n}")));
            }
            true
        }
        _ => return Err(Error::config("inner mode must be with_replacement or without_replacement")),
    };

    let mut rng = seed.rng();
    let fixed_points = rand::seq::index::sample(&mut rng, n, n_out).into_vec();
    let mut subsamples = Vec::with_capacity(n_out * n_in);
    for &z in &fixed_points {
        for _ in 0..n_in {
            subsamples.push(draw_including(n, k, z, without, &mut rng));
        }
    }
    Ok(SubsamplePlan {
        subsamples,
        mode: SamplingMode::ImTwoLevel,
        n,
        k,
        b: n_out * n_in,
        r: None,
        outer: Some(OuterGroups {
            n_out,
            n_in,
            fixed_points,
        }),
    })
}

/// One subsample of size k whose first slot is the fixed point z.
fn draw_including(n: usize, k: usize, z: usize, without: bool, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let mut s = Vec::with_capacity(k);
    s.push(z);
    if without {
        // k-1 distinct draws from [0, n) \ {z}
        for idx in rand::seq::index::sample(rng, n - 1, k - 1) {
            let v = if idx >= z { idx + 1 } else { idx };
            s.push(v);
        }
    } else {
        for _ in 1..k {
            s.push(rng.gen_range(0..n));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::inclusion_counts;

    fn seed() -> SeedSpec {
        SeedSpec::new(42, "plan")
    }

    #[test]
    fn with_replacement_single_index() {
        let p = draw_with_replacement(1, 3, 2, &seed()).unwrap();
        assert_eq!(p.subsamples, vec![vec![0, 0, 0], vec![0, 0, 0]]);
    }

    #[test]
    fn with_replacement_mass_exact() {
        let p = draw_with_replacement(500, 100, 1000, &seed()).unwrap();
        let m = inclusion_counts(&p);
        let mean_row = (0..500).map(|i| m.row_sum(i) as f64).sum::<f64>() / 500.0;
        assert!((mean_row - 200.0).abs() < 1e-9);
    }

    #[test]
    fn with_replacement_duplicate_probability() {
        // n=5, k=2: P(both draws equal) = 1/5.
        let b = 100_000;
        let p = draw_with_replacement(5, 2, b, &seed()).unwrap();
        let dups = p
            .subsamples
            .iter()
            .filter(|s| s[0] == s[1])
            .count() as f64;
        let frac = dups / b as f64;
        let se = (0.2 * 0.8 / b as f64).sqrt();
        assert!((frac - 0.2).abs() < 3.0 * se, "frac = {frac}");
    }

    #[test]
    fn with_replacement_rejects_zero() {
        assert!(draw_with_replacement(0, 1, 1, &seed()).is_err());
        assert!(draw_with_replacement(1, 0, 1, &seed()).is_err());
        assert!(draw_with_replacement(1, 1, 0, &seed()).is_err());
    }

    #[test]
    fn without_replacement_full_sample_is_permutation() {
        let p = draw_without_replacement(3, 3, 2, &seed()).unwrap();
        for s in &p.subsamples {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2]);
        }
    }

    #[test]
    fn without_replacement_uniform_over_subsets() {
        let b = 60_000;
        let p = draw_without_replacement(4, 2, b, &seed()).unwrap();
        let mut counts = std::collections::HashMap::new();
        for s in &p.subsamples {
            let mut key = s.clone();
            key.sort_unstable();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let se = (b as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for (_, c) in counts {
            assert!((c as f64 - b as f64 / 6.0).abs() < 3.0 * se);
        }
    }

    #[test]
    fn without_replacement_rejects_k_gt_n() {
        assert!(draw_without_replacement(2, 3, 1, &seed()).is_err());
    }

    #[test]
    fn balanced_minimal_case() {
        let p = draw_balanced(2, 1, 2, SamplingMode::BalancedV, &seed()).unwrap();
        assert_eq!(p.r, Some(1));
        let mut all: Vec<usize> = p.subsamples.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1]);
    }

    #[test]
    fn balanced_v_row_sums() {
        let p = draw_balanced(4, 2, 4, SamplingMode::BalancedV, &seed()).unwrap();
        let m = inclusion_counts(&p);
        for i in 0..4 {
            assert_eq!(m.row_sum(i), 2);
        }
    }

    #[test]
    fn balanced_rejects_indivisible() {
        assert!(draw_balanced(3, 2, 4, SamplingMode::BalancedV, &seed()).is_err());
    }

    #[test]
    fn balanced_u_no_duplicates() {
        let p = draw_balanced(50, 10, 25, SamplingMode::BalancedU, &seed()).unwrap();
        p.validate().unwrap();
        assert_eq!(p.r, Some(5));
    }

    #[test]
    fn im_plan_contains_fixed_points() {
        let p = draw_im_plan(10, 3, 2, 2, SamplingMode::WithoutReplacement, &seed()).unwrap();
        p.validate().unwrap();
        assert_eq!(p.b, 4);
        let outer = p.outer.as_ref().unwrap();
        // distinct fixed points
        assert_ne!(outer.fixed_points[0], outer.fixed_points[1]);
    }

    #[test]
    fn im_plan_degenerate_n1() {
        let p = draw_im_plan(1, 2, 1, 3, SamplingMode::WithReplacement, &seed()).unwrap();
        for s in &p.subsamples {
            assert_eq!(s, &vec![0, 0]);
        }
    }

    #[test]
    fn im_plan_rejects_n_out_gt_n() {
        assert!(draw_im_plan(3, 2, 4, 2, SamplingMode::WithReplacement, &seed()).is_err());
    }

    #[test]
    fn im_plan_full_sample_without_replacement() {
        let p = draw_im_plan(5, 5, 2, 2, SamplingMode::WithoutReplacement, &seed()).unwrap();
        for s in &p.subsamples {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn reproducible_across_calls() {
        let a = draw_balanced(20, 4, 10, SamplingMode::BalancedV, &seed()).unwrap();
        let b = draw_balanced(20, 4, 10, SamplingMode::BalancedV, &seed()).unwrap();
        assert_eq!(a.subsamples, b.subsamples);
    }

    #[test]
    fn marginal_inclusion_probability() {
        // Each index should appear in a subsample with probability ~ k/n
        // (1 - (1-1/n)^k for with-replacement presence, but expected count is k/n).
        let p = draw_with_replacement(10, 3, 20_000, &seed()).unwrap();
        let m = inclusion_counts(&p);
        for i in 0..10 {
            let mean_count = m.row_sum(i) as f64 / 20_000.0;
            assert!((mean_count - 0.3).abs() < 0.02, "index {i}: {mean_count}");
        }
    }
}
