//! Subsample plans and inclusion-count bookkeeping.
//!
//! A plan is the realization of a resampling scheme: B ordered index lists of
//! length k over a training set of size n. The inclusion matrix N[i][b] counts
//! how many times point i appears in subsample b and is the raw material every
//! variance estimator consumes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    WithReplacement,
    WithoutReplacement,
    BalancedV,
    BalancedU,
    ImTwoLevel,
}

/// Two-level grouping for the internal estimation scheme: `n_out` groups of
/// `n_in` consecutive subsamples, each group sharing a fixed training point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterGroups {
    pub n_out: usize,
    pub n_in: usize,
    pub fixed_points: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsamplePlan {
    pub subsamples: Vec<Vec<usize>>,
    pub mode: SamplingMode,
    pub n: usize,
    pub k: usize,
    pub b: usize,
    /// Appearances per training point when the plan is balanced: r = B*k/n.
    pub r: Option<usize>,
    pub outer: Option<OuterGroups>,
}

impl SubsamplePlan {
    /// Check the structural invariants for this plan's mode.
    pub fn validate(&self) -> Result<()> {
        if self.subsamples.len() != self.b {
            return Err(Error::config("subsample count does not match B"));
        }
        for (b, s) in self.subsamples.iter().enumerate() {
            if s.len() != self.k {
                return Err(Error::config(format!("subsample {b} has wrong length")));
            }
            if s.iter().any(|&i| i >= self.n) {
                return Err(Error::config(format!("subsample {b} has an index out of range")));
            }
        }
        let distinct_within = matches!(
            self.mode,
            SamplingMode::WithoutReplacement | SamplingMode::BalancedU
        );
        if distinct_within {
            for (b, s) in self.subsamples.iter().enumerate() {
                let mut seen = vec![false; self.n];
                for &i in s {
                    if seen[i] {
                        return Err(Error::config(format!("subsample {b} contains a duplicate")));
                    }
                    seen[i] = true;
                }
            }
        }
        if matches!(self.mode, SamplingMode::BalancedV | SamplingMode::BalancedU) {
            let r = self
                .r
                .ok_or_else(|| Error::config("balanced plan is missing r"))?;
            let mut counts = vec![0usize; self.n];
            for s in &self.subsamples {
                for &i in s {
                    counts[i] += 1;
                }
            }
            if counts.iter().any(|&c| c != r) {
                return Err(Error::config("balanced plan has unequal appearance counts"));
            }
        }
        if self.mode == SamplingMode::ImTwoLevel {
            let outer = self
                .outer
                .as_ref()
                .ok_or_else(|| Error::config("two-level plan is missing groups"))?;
            if outer.n_out * outer.n_in != self.b || outer.fixed_points.len() != outer.n_out {
                return Err(Error::config("two-level group shape inconsistent with B"));
            }
            for g in 0..outer.n_out {
                let z = outer.fixed_points[g];
                for j in 0..outer.n_in {
                    if !self.subsamples[g * outer.n_in + j].contains(&z) {
                        return Err(Error::config(format!(
                            "subsample {} does not contain group {}'s fixed point",
                            g * outer.n_in + j,
                            g
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Dense n x B matrix of inclusion counts. Entries fit in u16 at desk scale;
/// column sums are always k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InclusionMatrix {
    counts: Vec<u16>, // row-major, n * b
    row_sums: Vec<u32>,
    pub n: usize,
    pub b: usize,
    pub k: usize,
}

impl InclusionMatrix {
    pub fn count(&self, i: usize, b: usize) -> u16 {
        self.counts[i * self.b + b]
    }

    /// N_i = total appearances of point i across the ensemble.
    pub fn row_sum(&self, i: usize) -> u32 {
        self.row_sums[i]
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.counts[i * self.b..(i + 1) * self.b]
    }
}

/// Materialize N[i][b] from a plan.
pub fn inclusion_counts(plan: &SubsamplePlan) -> InclusionMatrix {
    let (n, b) = (plan.n, plan.b);
    let mut counts = vec![0u16; n * b];
    for (col, s) in plan.subsamples.iter().enumerate() {
        for &i in s {
            counts[i * b + col] += 1;
        }
    }
    let row_sums = (0..n)
        .map(|i| counts[i * b..(i + 1) * b].iter().map(|&c| c as u32).sum())
        .collect();
    InclusionMatrix {
        counts,
        row_sums,
        n,
        b,
        k: plan.k,
    }
}
