//! Base learners: the permutation-symmetric kernels evaluated on subsamples.
//!
//! Two kernel families are provided: CART-style trees (regression and
//! classification, with optional per-node random feature selection) and the
//! subsample-mean kernel used as an analytic oracle in tests. Duplicated
//! indices are materialized as repeated rows, so a with-replacement subsample
//! genuinely weights a point by its multiplicity.

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    SubsampleMean,
    RegressionTree,
    ClassificationTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Candidate features per split; defaults to floor(p/3) for regression
    /// (min 1) and ceil(sqrt(p)) for classification.
    pub mtry: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            mtry: None,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub tree_params: Option<TreeParams>,
    /// True when per-node feature subsetting is active (mtry < p).
    pub randomized: bool,
    /// Class whose probability a classification kernel reports.
    pub positive_class: usize,
}

impl KernelSpec {
    pub fn subsample_mean() -> Self {
        KernelSpec {
            kind: KernelKind::SubsampleMean,
            tree_params: None,
            randomized: false,
            positive_class: 0,
        }
    }

    pub fn regression_tree(params: TreeParams) -> Self {
        KernelSpec {
            kind: KernelKind::RegressionTree,
            tree_params: Some(params),
            randomized: true,
            positive_class: 0,
        }
    }

    pub fn classification_tree(params: TreeParams, positive_class: usize) -> Self {
        KernelSpec {
            kind: KernelKind::ClassificationTree,
            tree_params: Some(params),
            randomized: true,
            positive_class,
        }
    }

    fn params(&self) -> TreeParams {
        self.tree_params.unwrap_or_default()
    }

    fn mtry_for(&self, p: usize) -> usize {
        match self.params().mtry {
            Some(m) => m.clamp(1, p),
            None => match self.kind {
                KernelKind::ClassificationTree => (p as f64).sqrt().ceil() as usize,
                _ => (p / 3).max(1),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Regression: mean target. Classification: per-class frequencies.
        values: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelModel {
    Constant { value: f64 },
    Tree { root: Node, task: Task },
}

/// A fitted base learner. Prediction is deterministic given the fitted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedKernel {
    pub model: KernelModel,
    /// Hash of the sorted training index multiset.
    pub fingerprint: u64,
    pub seed: SeedSpec,
    pub p: usize,
    pub positive_class: usize,
}

fn fingerprint(indices: &[usize]) -> u64 {
    // FNV-1a over the sorted index list
    let mut h: u64 = 0xcbf29ce484222325;
    for &i in indices {
        h ^= i as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Fit a kernel on `indices` (duplicates allowed, weight = multiplicity).
/// The index list is sorted before fitting so any permutation of the same
/// multiset yields an identical predictor.
pub fn fit_kernel(
    data: &Dataset,
    indices: &[usize],
    spec: &KernelSpec,
    seed: &SeedSpec,
) -> Result<FittedKernel> {
    if indices.is_empty() {
        return Err(Error::config("cannot fit a kernel on an empty index list"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= data.n()) {
        return Err(Error::config(format!("index {bad} out of range for dataset")));
    }
    let mut rows: Vec<usize> = indices.to_vec();
    rows.sort_unstable();
    let fp = fingerprint(&rows);

    let model = match spec.kind {
        KernelKind::SubsampleMean => {
            let mean = rows.iter().map(|&i| data.target(i)).sum::<f64>() / rows.len() as f64;
            KernelModel::Constant { value: mean }
        }
        KernelKind::RegressionTree => {
            let mut rng = seed.rng();
            let builder = TreeBuilder {
                data,
                n_classes: 0,
                mtry: spec.mtry_for(data.p()),
                params: spec.params(),
                task: Task::Regression,
            };
            KernelModel::Tree {
                root: builder.build(rows, 0, &mut rng),
                task: Task::Regression,
            }
        }
        KernelKind::ClassificationTree => {
            if data.task() != Task::Classification {
                return Err(Error::config("classification tree requires a classification dataset"));
            }
            let n_classes = data.n_classes();
            if spec.positive_class >= n_classes {
                return Err(Error::config(format!(
                    "designated class {} not present (dataset has {} classes)",
                    spec.positive_class, n_classes
                )));
            }
            let mut rng = seed.rng();
            let builder = TreeBuilder {
                data,
                n_classes,
                mtry: spec.mtry_for(data.p()),
                params: spec.params(),
                task: Task::Classification,
            };
            KernelModel::Tree {
                root: builder.build(rows, 0, &mut rng),
                task: Task::Classification,
            }
        }
    };
    Ok(FittedKernel {
        model,
        fingerprint: fp,
        seed: seed.clone(),
        p: data.p(),
        positive_class: spec.positive_class,
    })
}

/// Evaluate a fitted kernel at a test point. Classification returns the
/// probability of the designated class.
pub fn predict_kernel(model: &FittedKernel, x: &[f64]) -> Result<f64> {
    if x.len() != model.p {
        return Err(Error::config(format!(
            "feature vector has {} entries, model expects {}",
            x.len(),
            model.p
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite entry in feature vector"));
    }
    let probs = predict_kernel_values(model, x);
    Ok(match model.model {
        KernelModel::Constant { .. } => probs[0],
        KernelModel::Tree { task, .. } => match task {
            Task::Regression => probs[0],
            Task::Classification => probs[model.positive_class],
        },
    })
}

/// Raw leaf values at a test point: [mean] for regression / constant kernels,
/// the class-frequency vector for classification. No dimension checks.
pub fn predict_kernel_values(model: &FittedKernel, x: &[f64]) -> Vec<f64> {
    match &model.model {
        KernelModel::Constant { value } => vec![*value],
        KernelModel::Tree { root, .. } => {
            let mut node = root;
            loop {
                match node {
                    Node::Leaf { values } => return values.clone(),
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        node = if x[*feature] < *threshold { left } else { right };
                    }
                }
            }
        }
    }
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    n_classes: usize,
    mtry: usize,
    params: TreeParams,
    task: Task,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> TreeBuilder<'a> {
    fn build(&self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha12Rng) -> Node {
        let at_depth_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        if rows.len() < self.params.min_samples_split || at_depth_limit || self.is_pure(&rows) {
            return self.leaf(&rows);
        }

        // Draw mtry candidate features without replacement; evaluate them in
        // ascending order so ties resolve to the lowest feature index.
        let mut features = rand::seq::index::sample(rng, self.data.p(), self.mtry).into_vec();
        features.sort_unstable();

        let parent_score = self.node_score(&rows);
        let mut best: Option<BestSplit> = None;
        for &f in &features {
            if let Some(candidate) = self.best_split_on(&rows, f) {
                let improves = match &best {
                    None => candidate.score < parent_score - 1e-12 * parent_score.abs().max(1e-300),
                    Some(b) => candidate.score < b.score,
                };
                if improves {
                    best = Some(candidate);
                }
            }
        }
        let Some(split) = best else { return self.leaf(&rows) };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.data.row(i)[split.feature] < split.threshold);
        if left_rows.is_empty() || right_rows.is_empty() {
            return self.leaf(&left_rows.iter().chain(&right_rows).copied().collect::<Vec<_>>());
        }
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.build(left_rows, depth + 1, rng)),
            right: Box::new(self.build(right_rows, depth + 1, rng)),
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.data.target(rows[0]);
        rows.iter().all(|&i| self.data.target(i) == first)
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        match self.task {
            Task::Regression => {
                let mean = rows.iter().map(|&i| self.data.target(i)).sum::<f64>() / rows.len() as f64;
                Node::Leaf { values: vec![mean] }
            }
            Task::Classification => {
                let mut counts = vec![0.0; self.n_classes];
                for &i in rows {
                    counts[self.data.target(i) as usize] += 1.0;
                }
                let total = rows.len() as f64;
                for c in &mut counts {
                    *c /= total;
                }
                Node::Leaf { values: counts }
            }
        }
    }

    /// Impurity of a node on the scale used for split comparison: total SSE
    /// for regression, count-weighted Gini for classification.
    fn node_score(&self, rows: &[usize]) -> f64 {
        match self.task {
            Task::Regression => {
                let (mut s, mut s2) = (0.0, 0.0);
                for &i in rows {
                    let y = self.data.target(i);
                    s += y;
                    s2 += y * y;
                }
                let m = rows.len() as f64;
                (s2 - s * s / m).max(0.0)
            }
            Task::Classification => {
                let mut counts = vec![0.0f64; self.n_classes];
                for &i in rows {
                    counts[self.data.target(i) as usize] += 1.0;
                }
                let m = rows.len() as f64;
                m * (1.0 - counts.iter().map(|c| (c / m) * (c / m)).sum::<f64>())
            }
        }
    }

    /// Best threshold on one feature, minimizing the summed child impurity.
    /// Thresholds are midpoints between consecutive distinct sorted values,
    /// scanned in ascending order so the first minimum wins.
    fn best_split_on(&self, rows: &[usize], feature: usize) -> Option<BestSplit> {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| {
            self.data.row(a)[feature]
                .partial_cmp(&self.data.row(b)[feature])
                .unwrap()
                .then(a.cmp(&b))
        });
        let m = order.len();

        match self.task {
            Task::Regression => {
                let (mut ls, mut ls2) = (0.0f64, 0.0f64);
                let (mut ts, mut ts2) = (0.0f64, 0.0f64);
                for &i in &order {
                    let y = self.data.target(i);
                    ts += y;
                    ts2 += y * y;
                }
                let mut best: Option<BestSplit> = None;
                for cut in 1..m {
                    let y = self.data.target(order[cut - 1]);
                    ls += y;
                    ls2 += y * y;
                    let lv = self.data.row(order[cut - 1])[feature];
                    let rv = self.data.row(order[cut])[feature];
                    if lv == rv {
                        continue;
                    }
                    let nl = cut as f64;
                    let nr = (m - cut) as f64;
                    let sse_l = (ls2 - ls * ls / nl).max(0.0);
                    let rs = ts - ls;
                    let rs2 = ts2 - ls2;
                    let sse_r = (rs2 - rs * rs / nr).max(0.0);
                    let score = sse_l + sse_r;
                    if best.as_ref().is_none_or(|b| score < b.score) {
                        best = Some(BestSplit {
                            score,
                            feature,
                            threshold: 0.5 * (lv + rv),
                        });
                    }
                }
                best
            }
            Task::Classification => {
                let mut left = vec![0.0f64; self.n_classes];
                let mut total = vec![0.0f64; self.n_classes];
                for &i in &order {
                    total[self.data.target(i) as usize] += 1.0;
                }
                let mut best: Option<BestSplit> = None;
                for cut in 1..m {
                    left[self.data.target(order[cut - 1]) as usize] += 1.0;
                    let lv = self.data.row(order[cut - 1])[feature];
                    let rv = self.data.row(order[cut])[feature];
                    if lv == rv {
                        continue;
                    }
                    let nl = cut as f64;
                    let nr = (m - cut) as f64;
                    let gini_l = nl * (1.0 - left.iter().map(|c| (c / nl) * (c / nl)).sum::<f64>());
                    let gini_r = nr
                        * (1.0
                            - total
                                .iter()
                                .zip(&left)
                                .map(|(t, l)| {
                                    let c = t - l;
                                    (c / nr) * (c / nr)
                                })
                                .sum::<f64>());
                    let score = gini_l + gini_r;
                    if best.as_ref().is_none_or(|b| score < b.score) {
                        best = Some(BestSplit {
                            score,
                            feature,
                            threshold: 0.5 * (lv + rv),
                        });
                    }
                }
                best
            }
        }
    }
}
