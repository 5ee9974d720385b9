//! Weight functions: map a query covariate to a probability vector over
//! training samples.
//!
//! Four learners are available: uniform (SAA), k-nearest neighbours, a
//! single honest tree, and a subsampled forest of honest trees. Learners
//! for stage `t` are fitted on the samples' `x_{t-1}` and produce the
//! weights `w^t(x_{t-1})` over the samples' `y_t`.

pub mod forest;
pub mod knn;
pub mod training;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{fit_forest, ForestModel};
pub use knn::{knn_weights, KnnModel};
pub use training::TrainingSet;
pub use tree::{fit_honest, fit_tree, Honesty, SplitParams, TreeModel};

use crate::error::{Error, Result};
use crate::rng;

/// Absolute tolerance on the unit-sum invariant.
pub const SUM_TOL: f64 = 1e-9;

/// Nonnegative weights over the `N` training samples, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates nonnegativity and unit sum.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let v = WeightVector(w);
        v.check().map_err(Error::Input)?;
        Ok(v)
    }

    pub(crate) fn from_raw(w: Vec<f64>) -> Self {
        WeightVector(w)
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    /// All mass on sample `i`.
    pub fn point(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        WeightVector(w)
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if let Some((i, v)) = self.0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(format!("weight {i} = {v} is negative or NaN"));
        }
        let s: f64 = self.0.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(format!("weights sum to {s}"));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(index, weight)` for every strictly positive weight, ascending by index.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied().enumerate().filter(|(_, w)| *w > 0.0)
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|w| **w > 0.0).count()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `Σᵢ wᵢ·responseᵢ`
pub fn weighted_regression(weights: &WeightVector, responses: &[f64]) -> Result<f64> {
    if weights.len() != responses.len() {
        return Err(Error::input(format!(
            "{} weights but {} responses",
            weights.len(),
            responses.len()
        )));
    }
    Ok(weights.support().map(|(i, w)| w * responses[i]).sum())
}

fn default_lambda() -> f64 {
    0.2
}
fn default_pi() -> f64 {
    1.0
}
fn default_trees() -> usize {
    100
}

/// Learner choice plus hyperparameters. `None` fields take sample-size defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum WeightSpec {
    Saa,
    Knn {
        #[serde(default)]
        k: Option<usize>,
    },
    Tree {
        #[serde(default)]
        k: Option<usize>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_pi")]
        pi: f64,
        #[serde(default = "default_honesty")]
        honesty: Honesty,
    },
    Forest {
        #[serde(default = "default_trees")]
        trees: usize,
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        subsample: Option<usize>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_pi")]
        pi: f64,
        #[serde(default = "default_honesty")]
        honesty: Honesty,
    },
}

fn default_honesty() -> Honesty {
    Honesty::IgnoreResponse
}

/// `max(1, ⌈N^0.6⌉)`, capped at `N`.
pub fn default_k(n: usize) -> usize {
    ((n as f64).powf(0.6).ceil() as usize).clamp(1, n.max(1))
}

/// `min(⌈N^0.8⌉, N − 1)`, at least 1.
pub fn default_subsample(n: usize) -> usize {
    ((n as f64).powf(0.8).ceil() as usize)
        .min(n.saturating_sub(1))
        .max(1)
}

impl WeightSpec {
    pub fn knn() -> Self {
        WeightSpec::Knn { k: None }
    }

    pub fn tree() -> Self {
        WeightSpec::Tree {
            k: None,
            lambda: default_lambda(),
            pi: default_pi(),
            honesty: default_honesty(),
        }
    }

    pub fn forest() -> Self {
        WeightSpec::Forest {
            trees: default_trees(),
            k: None,
            subsample: None,
            lambda: default_lambda(),
            pi: default_pi(),
            honesty: default_honesty(),
        }
    }

    /// Parses the short names used on the command line.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "saa" => Ok(WeightSpec::Saa),
            "knn" => Ok(WeightSpec::knn()),
            "tree" | "cart" => Ok(WeightSpec::tree()),
            "rf" | "forest" => Ok(WeightSpec::forest()),
            other => Err(Error::input(format!(
                "unknown weight method {other:?} (saa|knn|tree|rf)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightSpec::Saa => "saa",
            WeightSpec::Knn { .. } => "knn",
            WeightSpec::Tree { .. } => "tree",
            WeightSpec::Forest { .. } => "rf",
        }
    }

    /// Fits the learner on `points` (one covariate per training sample).
    pub fn fit(&self, points: &[Vec<f64>], seed: u64) -> Result<WeightModel> {
        let n = points.len();
        if n == 0 {
            return Err(Error::input("cannot fit weights on zero samples"));
        }
        Ok(match self {
            WeightSpec::Saa => WeightModel::Uniform { n_samples: n },
            WeightSpec::Knn { k } => WeightModel::Knn(KnnModel::new(
                points.to_vec(),
                k.unwrap_or_else(|| default_k(n)),
            )?),
            WeightSpec::Tree {
                k,
                lambda,
                pi,
                honesty,
            } => {
                let params = SplitParams {
                    k: k.unwrap_or_else(|| default_k(n)),
                    lambda: *lambda,
                    pi: *pi,
                    honesty: *honesty,
                };
                let idx: Vec<usize> = (0..n).collect();
                WeightModel::Tree(fit_honest(points, &idx, params, seed)?)
            }
            WeightSpec::Forest {
                trees,
                k,
                subsample,
                lambda,
                pi,
                honesty,
            } => {
                let params = SplitParams {
                    k: k.unwrap_or_else(|| default_k(n)),
                    lambda: *lambda,
                    pi: *pi,
                    honesty: *honesty,
                };
                let s = subsample.unwrap_or_else(|| default_subsample(n));
                WeightModel::Forest(fit_forest(points, *trees, s, params, seed)?)
            }
        })
    }
}

/// A fitted weight function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WeightModel {
    Uniform { n_samples: usize },
    Knn(KnnModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

impl WeightModel {
    pub fn weights(&self, query: &[f64]) -> Result<WeightVector> {
        match self {
            WeightModel::Uniform { n_samples } => Ok(WeightVector::uniform(*n_samples)),
            WeightModel::Knn(m) => m.weights(query),
            WeightModel::Tree(m) => m.weights(query),
            WeightModel::Forest(m) => m.weights(query),
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            WeightModel::Uniform { n_samples } => *n_samples,
            WeightModel::Knn(m) => m.points.len(),
            WeightModel::Tree(m) => m.n_samples,
            WeightModel::Forest(m) => m.n_samples,
        }
    }

    /// True when the weights do not depend on the query.
    pub fn is_covariate_free(&self) -> bool {
        match self {
            WeightModel::Uniform { .. } => true,
            WeightModel::Knn(m) => m.k == m.points.len(),
            WeightModel::Tree(m) => m.n_leaves() == 1,
            WeightModel::Forest(m) => m.trees.iter().all(|t| t.n_leaves() == 1),
        }
    }
}

/// Per-stage learners: `stages[t - 1]` produces `w^t(x_{t-1})` for `t in 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightModels {
    pub stages: Vec<WeightModel>,
}

impl WeightModels {
    /// Fits one learner per stage. `specs` holds either one spec for every
    /// stage or exactly one per stage.
    pub fn fit(training: &TrainingSet, specs: &[WeightSpec], seed: u64) -> Result<Self> {
        let horizon = training.horizon();
        if specs.len() != 1 && specs.len() != horizon {
            return Err(Error::input(format!(
                "need 1 or {horizon} weight specs, got {}",
                specs.len()
            )));
        }
        let stages = (1..=horizon)
            .map(|t| {
                let spec = &specs[if specs.len() == 1 { 0 } else { t - 1 }];
                let points = training.stage_covariates(t - 1);
                spec.fit(
                    &points,
                    rng::derive_seed(seed, &[rng::tags::WEIGHTS, t as u64]),
                )
            })
            .collect::<Result<_>>()?;
        Ok(WeightModels { stages })
    }

    /// Point-mass or otherwise fixed weights, one vector per stage, ignoring covariates.
    pub fn uniform(n: usize, horizon: usize) -> Self {
        WeightModels {
            stages: vec![WeightModel::Uniform { n_samples: n }; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// `w^t(query)` for `t in 1..=T`.
    pub fn weights(&self, t: usize, query: &[f64]) -> Result<WeightVector> {
        if t == 0 || t > self.stages.len() {
            return Err(Error::input(format!("stage {t} has no weight model")));
        }
        self.stages[t - 1].weights(query)
    }

    pub fn model(&self, t: usize) -> &WeightModel {
        &self.stages[t - 1]
    }
}
