//! Out-of-sample execution of trained policies.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basestock::{fit_basestock, BasestockConfig, BasestockPolicy};
use super::generate::Paths;
use super::inventory::{build_inventory_instance, InventoryParams, LotSizingParams};
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::sddp::{solve_sddp_from, LookaheadPolicy, SddpConfig};
use crate::weights::{TrainingSet, WeightModels, WeightSpec, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "lowercase")]
pub enum Problem {
    Inventory(InventoryParams),
    #[serde(rename = "lotsizing")]
    LotSizing(LotSizingParams),
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Inventory(_) => "inventory",
            Problem::LotSizing(_) => "lotsizing",
        }
    }

    pub fn demand_cap(&self) -> f64 {
        match self {
            Problem::Inventory(_) => f64::INFINITY,
            Problem::LotSizing(p) => p.demand_cap,
        }
    }
}

/// How a policy uses covariates arriving after time 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateUse {
    /// Condition every stage on the current covariate.
    Dynamic,
    /// Condition every stage on `x_0` only.
    Static,
}

/// A weight learner plus its covariate usage, e.g. `knn` or `static-rf`.
/// Labels `rf`/`forest` select [`bench_forest`].
///
/// Deserializes from either a label or `{"spec": .., "covariates": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MethodRepr")]
pub struct Method {
    pub spec: WeightSpec,
    pub covariates: CovariateUse,
}

impl Method {
    pub fn dynamic(spec: WeightSpec) -> Self {
        Method {
            spec,
            covariates: CovariateUse::Dynamic,
        }
    }

    pub fn label(&self) -> String {
        match self.covariates {
            CovariateUse::Dynamic => self.spec.name().to_string(),
            CovariateUse::Static => format!("static-{}", self.spec.name()),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MethodRepr {
    Label(String),
    Full {
        spec: WeightSpec,
        covariates: CovariateUse,
    },
}

impl TryFrom<MethodRepr> for Method {
    type Error = Error;

    fn try_from(r: MethodRepr) -> Result<Self> {
        match r {
            MethodRepr::Label(s) => s.parse(),
            MethodRepr::Full { spec, covariates } => Ok(Method { spec, covariates }),
        }
    }
}

/// Forest used by the experiments: 25 trees with leaves of 5 to 9 samples.
pub fn bench_forest() -> WeightSpec {
    match WeightSpec::forest() {
        WeightSpec::Forest {
            subsample,
            lambda,
            pi,
            honesty,
            ..
        } => WeightSpec::Forest {
            trees: 25,
            k: Some(5),
            subsample,
            lambda,
            pi,
            honesty,
        },
        _ => unreachable!("forest constructor"),
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (covariates, name) = match s.strip_prefix("static-") {
            Some(rest) => (CovariateUse::Static, rest),
            None => (CovariateUse::Dynamic, s),
        };
        let spec = match WeightSpec::from_name(name)? {
            WeightSpec::Forest { .. } => bench_forest(),
            other => other,
        };
        Ok(Method { spec, covariates })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    /// Re-solve each stage against the trained cuts, conditioned on the current covariate.
    Resolve,
    /// As `Resolve`, but conditioned on `x_0` throughout.
    Static,
    /// Apply a fitted basestock policy (lot sizing).
    Basestock,
}

/// One executed test path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub covariates: Vec<Vec<f64>>,
    pub uncertainties: Vec<f64>,
    /// Stage decision vectors in template layout.
    pub decisions: Vec<Vec<f64>>,
    pub stage_costs: Vec<f64>,
    pub total: f64,
}

impl PolicyRun {
    fn new(
        covariates: Vec<Vec<f64>>,
        uncertainties: Vec<f64>,
        decisions: Vec<Vec<f64>>,
        stage_costs: Vec<f64>,
    ) -> Self {
        let total = stage_costs.iter().sum();
        PolicyRun {
            covariates,
            uncertainties,
            decisions,
            stage_costs,
            total,
        }
    }
}

/// Settings shared by every policy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub sddp: SddpConfig,
    pub basestock: BasestockConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            sddp: SddpConfig {
                forward_samples: 10,
                max_iter: 10,
                gap_tol: 0.0,
                ..SddpConfig::default()
            },
            basestock: BasestockConfig::default(),
        }
    }
}

/// The covariate the policy conditions on at stage `t` of test path `p`.
fn query(test: &Paths, p: usize, t: usize, mode: CovariateUse) -> &[f64] {
    match mode {
        CovariateUse::Dynamic => &test.x[p][t],
        CovariateUse::Static => &test.x[p][0],
    }
}

fn training_for(training: &TrainingSet, covariates: CovariateUse) -> TrainingSet {
    match covariates {
        CovariateUse::Dynamic => training.clone(),
        CovariateUse::Static => training.frozen_covariates(),
    }
}

fn check_paths(training: &TrainingSet, test: &Paths) -> Result<()> {
    if test.horizon() != training.horizon() {
        return Err(Error::input(format!(
            "test paths have horizon {}, training has {}",
            test.horizon(),
            training.horizon()
        )));
    }
    Ok(())
}

/// Trains on `training` and executes the policy on every test path.
///
/// Inventory runs in `Resolve` or `Static` mode; lot sizing in `Basestock`
/// mode, where `method.covariates` selects dynamic or static weights.
pub fn run_policy(
    problem: &Problem,
    method: &Method,
    mode: PolicyMode,
    training: &TrainingSet,
    test: &Paths,
    config: &PolicyConfig,
    seed: u64,
) -> Result<Vec<PolicyRun>> {
    check_paths(training, test)?;
    match (problem, mode) {
        (Problem::Inventory(params), PolicyMode::Resolve | PolicyMode::Static) => {
            let covariates = if mode == PolicyMode::Static {
                CovariateUse::Static
            } else {
                method.covariates
            };
            run_resolve(
                params,
                &method.spec,
                covariates,
                training,
                test,
                &config.sddp,
                seed,
            )
        }
        (Problem::LotSizing(params), PolicyMode::Basestock) => {
            let train = training_for(training, method.covariates);
            let models = WeightModels::fit(
                &train,
                std::slice::from_ref(&method.spec),
                weight_seed(seed),
            )?;
            let policy = fit_basestock(&train, &models, params, &config.basestock)?;
            run_basestock(params, &policy, &models, method.covariates, test)
        }
        (p, m) => Err(Error::input(format!(
            "{} does not support {m:?} policies",
            p.name()
        ))),
    }
}

fn weight_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, &[tags::WEIGHTS])
}

fn run_resolve(
    params: &InventoryParams,
    spec: &WeightSpec,
    covariates: CovariateUse,
    training: &TrainingSet,
    test: &Paths,
    sddp: &SddpConfig,
    seed: u64,
) -> Result<Vec<PolicyRun>> {
    let train = training_for(training, covariates);
    let dim = train.covariate_dim(0);
    let instance = build_inventory_instance(params, &train, spec.clone(), vec![0.0; dim])?;
    let models = instance.fit_weights(weight_seed(seed))?;
    let config = SddpConfig {
        seed: rng::derive_seed(seed, &[tags::SDDP_FORWARD]),
        ..sddp.clone()
    };
    // Cuts are trained from uniformly drawn first-stage samples so that they
    // serve every test covariate.
    let run = solve_sddp_from(
        &instance,
        &models,
        &config,
        Some(&WeightVector::uniform(train.n_samples())),
        None,
    )?;
    let policy = LookaheadPolicy {
        instance: &instance,
        models: &models,
        pool: &run.pool,
    };
    let horizon = instance.horizon();
    let shared_root = if models.model(1).is_covariate_free() {
        Some(policy.decide(0, &[], &[], Some(&test.x[0][0]))?)
    } else {
        None
    };
    (0..test.len())
        .into_par_iter()
        .map(|p| {
            let mut state = Vec::new();
            let mut decisions = Vec::with_capacity(horizon + 1);
            let mut costs = Vec::with_capacity(horizon + 1);
            for t in 0..=horizon {
                let y = if t == 0 {
                    Vec::new()
                } else {
                    vec![test.y[p][t - 1]]
                };
                let x = (t < horizon).then(|| query(test, p, t, covariates));
                let sol = match (&shared_root, t) {
                    (Some(root), 0) => root.clone(),
                    _ => policy
                        .decide(t, &state, &y, x)
                        .map_err(|e| path_error(e, p, t))?,
                };
                costs.push(sol.immediate_cost);
                state = sol.next_state;
                decisions.push(sol.z);
            }
            Ok(PolicyRun::new(
                test.x[p].clone(),
                test.y[p].clone(),
                decisions,
                costs,
            ))
        })
        .collect()
}

fn path_error(e: Error, p: usize, t: usize) -> Error {
    match e {
        Error::Infeasible {
            stage,
            scenario: None,
        } => Error::Infeasible {
            stage,
            scenario: Some(format!("test path {p}")),
        },
        other => Error::Solver(format!("test path {p}, stage {t}: {other}")),
    }
}

fn run_basestock(
    params: &LotSizingParams,
    policy: &BasestockPolicy,
    models: &WeightModels,
    covariates: CovariateUse,
    test: &Paths,
) -> Result<Vec<PolicyRun>> {
    (0..test.len())
        .into_par_iter()
        .map(|p| {
            let (decisions, costs) =
                BasestockPolicy::simulate(params, &test.y[p], |t, inv, room| {
                    policy.order(params, models, t, query(test, p, t, covariates), inv, room)
                })?;
            Ok(PolicyRun::new(
                test.x[p].clone(),
                test.y[p].clone(),
                decisions,
                costs,
            ))
        })
        .collect()
}

/// Mean and sample standard deviation of path totals.
pub fn summarize(runs: &[PolicyRun]) -> (f64, f64) {
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.total).sum::<f64>() / n;
    let var = if runs.len() > 1 {
        runs.iter().map(|r| (r.total - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}
