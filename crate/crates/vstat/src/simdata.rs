//! Synthetic regression problems used in the simulation studies.

use crate::data::{Dataset, Task};
use crate::error::Result;
use crate::seed::SeedSpec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// One-feature linear model: X ~ 20 * Unif(0, 1), Y = 2X + N(0, 1).
/// The customary test point is x = 10 (the middle of the support).
pub fn gen_linear(n: usize, seed: &SeedSpec) -> Result<Dataset> {
    let mut rng = seed.rng();
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = 20.0 * rng.gen::<f64>();
        let eps: f64 = StandardNormal.sample(&mut rng);
        features.push(vec![x]);
        targets.push(2.0 * x + eps);
    }
    Dataset::new(features, targets, Task::Regression)
}

/// Noiseless MARS response at `x` (5 features in [0, 1]):
/// 10 sin(pi x1 x2) + 20 (x3 - c3)^2 + 10 x4 + 5 x5.
pub fn mars_value(x: &[f64], c3: f64) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - c3) * (x[2] - c3) + 10.0 * x[3] + 5.0 * x[4]
}

/// The MARS benchmark: X ~ Unif([0, 1]^5), Y = mars_value(X) + N(0, 1).
pub fn gen_mars(n: usize, seed: &SeedSpec, c3: f64) -> Result<Dataset> {
    let mut rng = seed.rng();
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..5).map(|_| rng.gen::<f64>()).collect();
        let eps: f64 = StandardNormal.sample(&mut rng);
        targets.push(mars_value(&x, c3) + eps);
        features.push(x);
    }
    Dataset::new(features, targets, Task::Regression)
}
