//! Ensemble training over a subsample plan and per-learner evaluation.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{fit_kernel, predict_kernel, predict_kernel_values, FittedKernel, KernelSpec};
use crate::plan::{inclusion_counts, InclusionMatrix, SubsamplePlan};
use crate::seed::SeedSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleFit {
    pub learners: Vec<FittedKernel>,
    pub plan: SubsamplePlan,
    #[serde(skip)]
    inclusion: Option<InclusionMatrix>,
    pub spec: KernelSpec,
}

/// Per-learner outputs at one test point, plus their mean (the incomplete
/// statistic the ensemble reports).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointEvaluation {
    pub h_values: Vec<f64>,
    pub mean: f64,
}

/// Fit one learner per subsample. Learner b draws its randomness from the
/// stream "learner:b", so serial and parallel fits are bit-identical.
pub fn fit_ensemble(
    data: &Dataset,
    spec: &KernelSpec,
    plan: &SubsamplePlan,
    seed: &SeedSpec,
) -> Result<EnsembleFit> {
    if plan.n != data.n() {
        return Err(Error::config(format!(
            "plan is for n = {} but dataset has n = {}",
            plan.n,
            data.n()
        )));
    }
    let learners: Vec<FittedKernel> = plan
        .subsamples
        .par_iter()
        .enumerate()
        .map(|(b, indices)| {
            fit_kernel(data, indices, spec, &seed.stream(&format!("learner:{b}")))
                .map_err(|e| Error::config(format!("learner {b}: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleFit {
        learners,
        plan: plan.clone(),
        inclusion: Some(inclusion_counts(plan)),
        spec: spec.clone(),
    })
}

impl EnsembleFit {
    pub fn inclusion(&self) -> InclusionMatrix {
        match &self.inclusion {
            Some(m) => m.clone(),
            None => inclusion_counts(&self.plan),
        }
    }

    /// Average class-frequency vector over learners (classification only).
    pub fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for l in &self.learners {
            let v = predict_kernel_values(l, x);
            if acc.is_empty() {
                acc = v;
            } else {
                for (a, b) in acc.iter_mut().zip(&v) {
                    *a += b;
                }
            }
        }
        let b = self.learners.len() as f64;
        for a in &mut acc {
            *a /= b;
        }
        acc
    }

    const MODEL_VERSION: u32 = 1;

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            version: Self::MODEL_VERSION,
            fit: self.clone(),
        };
        let json = serde_json::to_string(&file)
            .map_err(|e| Error::data(format!("cannot serialize model: {e}")))?;
        std::fs::write(path.as_ref(), json)
            .map_err(|e| Error::data(format!("cannot write model file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let json = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::data(format!("cannot read model file: {e}")))?;
        let file: ModelFile = serde_json::from_str(&json)
            .map_err(|e| Error::data(format!("cannot parse model file: {e}")))?;
        if file.version != Self::MODEL_VERSION {
            return Err(Error::data(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        let mut fit = file.fit;
        fit.inclusion = Some(inclusion_counts(&fit.plan));
        Ok(fit)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    fit: EnsembleFit,
}

/// Evaluate every learner at `x` and average.
pub fn evaluate_point(fit: &EnsembleFit, x: &[f64]) -> Result<PointEvaluation> {
    let h_values: Vec<f64> = fit
        .learners
        .iter()
        .map(|l| predict_kernel(l, x))
        .collect::<Result<_>>()?;
    let mean = h_values.iter().sum::<f64>() / h_values.len() as f64;
    Ok(PointEvaluation { h_values, mean })
}
