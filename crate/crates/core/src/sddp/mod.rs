//! Stochastic dual dynamic programming on the weighted problem.
//!
//! Each iteration samples `M` index paths forward under the weights, records
//! the visited states and path costs (statistical upper bound), then walks
//! back from the last stage adding one weighted aggregate cut per distinct
//! trial and one per-sample cut per supporting training sample. The lower
//! bound is the stage-0 optimum under the current cuts.

mod bounds;
mod cuts;
mod expansion;
mod generate;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bounds::{normal_quantile, statistical_upper_bound, z_half_alpha};
pub use cuts::{CovKey, Cut, CutFamily, CutOrigin, CutPool, PoolFuture};
pub use expansion::{binary_expansion, ExpansionSpec, StateEncoding, DEFAULT_BITS};
pub use generate::{
    benders_cut, integer_optimality_cut, lagrangian_cut, lagrangian_cut_with_box, multiplier_box,
    CutCoefficients, LAGRANGIAN_MAX_EVALS,
};

use crate::error::{Error, Result};
use crate::linopt::stage::{solve_stage, FutureValue, StageOptions, StageSolution, StateInput};
use crate::model::ProblemInstance;
use crate::rng;
use crate::weights::{WeightModels, WeightVector};

/// Sparse weights: `(sample, weight)` with positive weight, ascending index.
pub type Sparse = Vec<(usize, f64)>;

pub fn sparse(w: &WeightVector) -> Sparse {
    w.support().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SddpConfig {
    /// Forward samples per iteration, `M`.
    pub forward_samples: usize,
    /// Confidence level of the statistical upper bound.
    pub alpha: f64,
    /// Stop when `UB − LB ≤ gap_tol · max(1, |LB|)`.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Empty selects Benders for continuous states and Lagrangian for binary states.
    pub cut_families: Vec<CutFamily>,
    pub seed: u64,
    /// Stop when the lower bound improves by less than `stall_tol` over this many iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Also bound each future value by the weighted sum of per-sample cuts.
    pub scenario_model: bool,
    /// Record wall-clock milliseconds in the log (non-deterministic).
    pub wall_clock: bool,
    /// Report the final upper bound from a fresh forward pass under the final
    /// cuts instead of the last in-loop pass, whose sample also decided when to stop.
    pub independent_ub: bool,
}

impl Default for SddpConfig {
    fn default() -> Self {
        SddpConfig {
            forward_samples: 20,
            alpha: 0.05,
            gap_tol: 1e-4,
            max_iter: 100,
            cut_families: Vec::new(),
            seed: 0,
            stall_window: 10,
            stall_tol: 1e-8,
            scenario_model: true,
            wall_clock: false,
            independent_ub: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Gap,
    MaxIter,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub lb: f64,
    pub ub_mean: f64,
    pub ub_std: f64,
    pub ub: f64,
    pub wall_ms: u64,
    pub cuts_added: usize,
}

/// Per-trial record of one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// `states[t - 1]`: state entering stage `t`.
    pub states: Vec<Vec<f64>>,
    /// `samples[t - 1]`: training sample drawn at stage `t`.
    pub samples: Vec<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SddpRun {
    pub lb: f64,
    pub ub_mean: f64,
    pub ub_std: f64,
    pub ub: f64,
    pub iterations: usize,
    pub forward_samples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub stop: StopReason,
    pub log: Vec<IterationLog>,
    /// `trial_states[iteration][j][t - 1]`.
    pub trial_states: Vec<Vec<Vec<Vec<f64>>>>,
    pub first_stage: Vec<f64>,
    pub pool: CutPool,
}

impl SddpRun {
    pub fn lb_trace(&self) -> Vec<f64> {
        self.log.iter().map(|l| l.lb).collect()
    }

    /// `iter,lb,ub_mean,ub_std,ub,wall_ms,cuts_added`
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iter,lb,ub_mean,ub_std,ub,wall_ms,cuts_added\n");
        for l in &self.log {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{},{}\n",
                l.iter, l.lb, l.ub_mean, l.ub_std, l.ub, l.wall_ms, l.cuts_added
            ));
        }
        out
    }
}

/// Weights needed by the passes, computed once.
#[derive(Debug, Clone)]
pub struct WeightTable {
    /// `w^1(x_0)`, or the override.
    pub root: Sparse,
    /// `per_sample[t - 1][j] = w^t(x^j_{t-1})` for `t >= 2`; one shared entry when covariate-free.
    per_sample: Vec<Vec<Sparse>>,
    shared: Vec<bool>,
}

impl WeightTable {
    pub fn new(
        instance: &ProblemInstance,
        models: &WeightModels,
        root: Option<&WeightVector>,
    ) -> Result<Self> {
        let horizon = instance.horizon();
        let n = instance.n_samples();
        let shared: Vec<bool> = (1..=horizon)
            .map(|t| models.model(t).is_covariate_free())
            .collect();
        let root = match root {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::input(
                        "root weights length differs from the sample count",
                    ));
                }
                sparse(w)
            }
            None => sparse(&models.weights(1, &instance.initial_covariate)?),
        };
        let mut per_sample = vec![Vec::new()];
        for t in 2..=horizon {
            let rows = if shared[t - 1] {
                vec![sparse(
                    &models.weights(t, instance.training.covariate(0, t - 1))?,
                )]
            } else {
                (0..n)
                    .into_par_iter()
                    .map(|j| {
                        models
                            .weights(t, instance.training.covariate(j, t - 1))
                            .map(|w| sparse(&w))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            per_sample.push(rows);
        }
        Ok(WeightTable {
            root,
            per_sample,
            shared,
        })
    }

    /// Weights of stage `t` given the sample drawn at stage `t − 1` (`None` at the root).
    pub fn at(&self, t: usize, prev: Option<usize>) -> &Sparse {
        match prev {
            None => &self.root,
            Some(j) => {
                let rows = &self.per_sample[t - 1];
                if self.shared[t - 1] {
                    &rows[0]
                } else {
                    &rows[j]
                }
            }
        }
    }

    pub fn key(&self, t: usize, prev: Option<usize>) -> CovKey {
        match prev {
            None => CovKey::Root,
            Some(_) if self.shared[t - 1] => CovKey::Shared,
            Some(j) => CovKey::Sample(j),
        }
    }
}

fn with_scenario(e: Error, scenario: String) -> Error {
    match e {
        Error::Infeasible {
            stage,
            scenario: None,
        } => Error::Infeasible {
            stage,
            scenario: Some(scenario),
        },
        other => other,
    }
}

fn sample_index(w: &Sparse, rng: &mut rng::Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(i, p) in w {
        acc += p;
        if u < acc {
            return i;
        }
    }
    w.last().expect("nonempty weights").0
}

/// Holds everything the passes share.
struct Engine<'a> {
    instance: &'a ProblemInstance,
    table: WeightTable,
    families: Vec<CutFamily>,
    config: &'a SddpConfig,
}

impl Engine<'_> {
    fn horizon(&self) -> usize {
        self.instance.horizon()
    }

    /// `ψ_{t}` seen from a stage-`t−1` decision whose sample is `prev`.
    fn future<'p>(
        &'p self,
        pool: &'p CutPool,
        t: usize,
        prev: Option<usize>,
    ) -> Option<PoolFuture<'p>> {
        if t > self.horizon() {
            return None;
        }
        let key = self.table.key(t, prev);
        // A shared pool already aggregates every sample; skip the costlier sum there.
        let w = (self.config.scenario_model && key != CovKey::Shared)
            .then(|| self.table.at(t, prev).as_slice());
        Some(pool.future(t, Some(key), w))
    }

    fn solve(
        &self,
        pool: &CutPool,
        t: usize,
        state: &[f64],
        sample: Option<usize>,
        duals: bool,
    ) -> Result<StageSolution> {
        let y = self.instance.uncertainty(t, sample);
        let fut = self.future(pool, t + 1, sample);
        let opts = StageOptions {
            relax_integrality: false,
            state_duals: duals,
        };
        solve_stage(
            &self.instance.stages[t],
            StateInput::Fixed(state),
            y,
            fut.as_ref().map(|f| f as &dyn FutureValue),
            opts,
        )
    }

    fn root_solve(&self, pool: &CutPool) -> Result<StageSolution> {
        self.solve(pool, 0, &self.instance.initial_state, None, false)
    }

    fn forward(&self, pool: &CutPool, iteration: usize) -> Result<Vec<Trial>> {
        let root = self.root_solve(pool)?;
        let horizon = self.horizon();
        (0..self.config.forward_samples)
            .into_par_iter()
            .map(|j| {
                let mut rng = rng::stream(
                    self.config.seed,
                    &[rng::tags::SDDP_FORWARD, iteration as u64, j as u64],
                );
                let mut state = root.next_state.clone();
                let mut cost = root.immediate_cost;
                let mut prev = None;
                let mut states = Vec::with_capacity(horizon);
                let mut samples = Vec::with_capacity(horizon);
                for t in 1..=horizon {
                    let i = sample_index(self.table.at(t, prev), &mut rng);
                    let sol = self
                        .solve(pool, t, &state, Some(i), false)
                        .map_err(|e| with_scenario(e, format!("forward trial {j}, sample {i}")))?;
                    states.push(std::mem::replace(&mut state, sol.next_state));
                    samples.push(i);
                    cost += sol.immediate_cost;
                    prev = Some(i);
                }
                Ok(Trial {
                    states,
                    samples,
                    cost,
                })
            })
            .collect()
    }

    fn cut_for(
        &self,
        pool: &CutPool,
        family: CutFamily,
        t: usize,
        state: &[f64],
        i: usize,
    ) -> Result<CutCoefficients> {
        let template = &self.instance.stages[t];
        let y = self.instance.uncertainty(t, Some(i));
        let fut = self.future(pool, t + 1, Some(i));
        let fut = fut.as_ref().map(|f| f as &dyn FutureValue);
        match family {
            CutFamily::Benders => benders_cut(template, state, y, fut),
            CutFamily::Integer => {
                integer_optimality_cut(template, state, y, fut, pool.lower_bound(t))
            }
            CutFamily::Lagrangian => lagrangian_cut(template, state, y, fut),
        }
    }

    /// Adds cuts for stages `T..1` at the trial states; returns the number added.
    fn backward(&self, pool: &mut CutPool, trials: &[Trial], iteration: usize) -> Result<usize> {
        let mut added = 0;
        for t in (1..=self.horizon()).rev() {
            // Distinct (key, state) trials at this stage, in first-seen order.
            let mut distinct: Vec<(CovKey, Option<usize>, &[f64], usize)> = Vec::new();
            for (j, tr) in trials.iter().enumerate() {
                let prev = if t == 1 {
                    None
                } else {
                    Some(tr.samples[t - 2])
                };
                let key = self.table.key(t, prev);
                let s = tr.states[t - 1].as_slice();
                if !distinct.iter().any(|(k, _, st, _)| *k == key && *st == s) {
                    distinct.push((key, prev, s, j));
                }
            }
            // Distinct (state, sample) subproblems.
            let mut states: Vec<&[f64]> = Vec::new();
            let mut jobs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut job_list: Vec<(usize, usize)> = Vec::new();
            for &(_, prev, s, _) in &distinct {
                let sid = match states.iter().position(|x| *x == s) {
                    Some(p) => p,
                    None => {
                        states.push(s);
                        states.len() - 1
                    }
                };
                for &(i, _) in self.table.at(t, prev) {
                    jobs.entry((sid, i)).or_insert_with(|| {
                        job_list.push((sid, i));
                        job_list.len() - 1
                    });
                }
            }
            let pool_ref: &CutPool = pool;
            let results: Vec<Vec<CutCoefficients>> = job_list
                .par_iter()
                .map(|&(sid, i)| {
                    self.families
                        .iter()
                        .map(|&f| {
                            self.cut_for(pool_ref, f, t, states[sid], i).map_err(|e| {
                                with_scenario(e, format!("backward stage {t}, sample {i}"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;

            for (fi, &family) in self.families.iter().enumerate() {
                for (&(sid, i), res) in job_list.iter().zip(&results) {
                    let c = &res[fi];
                    pool.add_scenario(
                        t,
                        i,
                        Cut {
                            beta: c.beta,
                            pi: c.pi.clone(),
                            family,
                            origin: CutOrigin {
                                iteration,
                                stage: t,
                                trial: sid,
                            },
                        },
                    );
                    added += 1;
                }
                for &(key, prev, s, j) in &distinct {
                    let sid = states
                        .iter()
                        .position(|x| *x == s)
                        .expect("state registered");
                    let mut beta = 0.0;
                    let mut pi = vec![0.0; s.len()];
                    for &(i, w) in self.table.at(t, prev) {
                        let c = &results[jobs[&(sid, i)]][fi];
                        beta += w * c.beta;
                        for (p, q) in pi.iter_mut().zip(&c.pi) {
                            *p += w * q;
                        }
                    }
                    pool.add_pooled(
                        t,
                        key,
                        Cut {
                            beta,
                            pi,
                            family,
                            origin: CutOrigin {
                                iteration,
                                stage: t,
                                trial: j,
                            },
                        },
                    );
                    added += 1;
                }
            }
        }
        Ok(added)
    }
}

fn state_is_binary(instance: &ProblemInstance) -> bool {
    instance.stages[..instance.horizon()].iter().all(|st| {
        st.transition.as_ref().is_none_or(|f| {
            (0..f.rows).all(|r| {
                let row = f.row(r);
                let nz: Vec<usize> = (0..row.len()).filter(|&j| row[j] != 0.0).collect();
                nz.len() == 1
                    && row[nz[0]] == 1.0
                    && st.kind(nz[0]) == crate::linopt::VarKind::Binary
            })
        })
    })
}

/// Lower bounds and state dimensions used to seed an empty pool.
pub fn empty_pool(instance: &ProblemInstance) -> Result<CutPool> {
    let horizon = instance.horizon();
    let lbs = (1..=horizon)
        .map(|t| instance.lower_bound(t))
        .collect::<Result<Vec<_>>>()?;
    let dims = (1..=horizon).map(|t| instance.stages[t].n_state).collect();
    Ok(CutPool::new(lbs, dims, instance.n_samples()))
}

/// Runs SDDP with the root weights `w^1(x_0)`.
pub fn solve_sddp(
    instance: &ProblemInstance,
    models: &WeightModels,
    config: &SddpConfig,
) -> Result<SddpRun> {
    solve_sddp_from(instance, models, config, None, None)
}

/// Runs SDDP, optionally overriding the root weights and warm-starting from `pool`.
pub fn solve_sddp_from(
    instance: &ProblemInstance,
    models: &WeightModels,
    config: &SddpConfig,
    root_weights: Option<&WeightVector>,
    pool: Option<CutPool>,
) -> Result<SddpRun> {
    instance.check()?;
    if config.forward_samples < 2 {
        return Err(Error::input(
            "SDDP needs at least two forward samples per iteration",
        ));
    }
    if config.max_iter == 0 {
        return Err(Error::input("max_iter must be positive"));
    }
    z_half_alpha(config.alpha)?;
    let binary_state = state_is_binary(instance);
    let families = if config.cut_families.is_empty() {
        vec![if binary_state && instance.has_binaries() {
            CutFamily::Lagrangian
        } else {
            CutFamily::Benders
        }]
    } else {
        config.cut_families.clone()
    };
    if !binary_state && families.iter().any(|f| *f != CutFamily::Benders) {
        return Err(Error::input(
            "integer and Lagrangian cuts need a binary state; apply a binary expansion first",
        ));
    }
    let engine = Engine {
        instance,
        table: WeightTable::new(instance, models, root_weights)?,
        families,
        config,
    };
    let mut pool = match pool {
        Some(p) => {
            if p.horizon() != instance.horizon()
                || p.scenario
                    .first()
                    .is_some_and(|s| s.len() != instance.n_samples())
            {
                return Err(Error::input(
                    "warm-start cut pool does not match the instance",
                ));
            }
            p
        }
        None => empty_pool(instance)?,
    };

    let start = Instant::now();
    let mut log: Vec<IterationLog> = Vec::new();
    let mut trial_states = Vec::new();
    let mut stop = StopReason::MaxIter;
    let mut last = None;
    for iter in 1..=config.max_iter {
        let trials = if instance.horizon() > 0 {
            engine.forward(&pool, iter)?
        } else {
            let root = engine.root_solve(&pool)?;
            vec![
                Trial {
                    states: Vec::new(),
                    samples: Vec::new(),
                    cost: root.immediate_cost
                };
                config.forward_samples
            ]
        };
        let costs: Vec<f64> = trials.iter().map(|t| t.cost).collect();
        let (ub_mean, ub_std, ub) = statistical_upper_bound(&costs, config.alpha)?;
        let cuts_added = engine.backward(&mut pool, &trials, iter)?;
        let root = engine.root_solve(&pool)?;
        let lb = root.objective;
        trial_states.push(trials.into_iter().map(|t| t.states).collect());
        log.push(IterationLog {
            iter,
            lb,
            ub_mean,
            ub_std,
            ub,
            wall_ms: if config.wall_clock {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
            cuts_added,
        });
        log::debug!("sddp iter {iter}: lb {lb:.6} ub {ub:.6} cuts {cuts_added}");
        last = Some(root);
        if ub - lb <= config.gap_tol * lb.abs().max(1.0) {
            stop = StopReason::Gap;
            break;
        }
        if config.stall_window > 0 && log.len() > config.stall_window {
            let before = log[log.len() - 1 - config.stall_window].lb;
            if lb - before < config.stall_tol {
                stop = StopReason::Stalled;
                break;
            }
        }
    }
    let root = last.expect("at least one iteration");
    let fin = log.last().expect("at least one iteration").clone();
    let (ub_mean, ub_std, ub) = if config.independent_ub && instance.horizon() > 0 {
        // Iteration numbers start at 1, so stream 0 is never used inside the loop.
        let costs: Vec<f64> = engine.forward(&pool, 0)?.iter().map(|t| t.cost).collect();
        statistical_upper_bound(&costs, config.alpha)?
    } else {
        (fin.ub_mean, fin.ub_std, fin.ub)
    };
    Ok(SddpRun {
        lb: fin.lb,
        ub_mean,
        ub_std,
        ub,
        iterations: log.len(),
        forward_samples: config.forward_samples,
        alpha: config.alpha,
        seed: config.seed,
        stop,
        log,
        trial_states,
        first_stage: root.z,
        pool,
    })
}

/// Test-time decisions from trained per-sample cuts: at stage `t` with state
/// `s`, observed `y_t` and covariate `x_t`, solve the stage with future value
/// `Σᵢ w^{t+1}_i(x_t) max_k cut_{ik}(s')`.
pub struct LookaheadPolicy<'a> {
    pub instance: &'a ProblemInstance,
    pub models: &'a WeightModels,
    pub pool: &'a CutPool,
}

impl LookaheadPolicy<'_> {
    pub fn decide(
        &self,
        t: usize,
        state: &[f64],
        y: &[f64],
        covariate: Option<&[f64]>,
    ) -> Result<StageSolution> {
        let horizon = self.instance.horizon();
        let weights;
        let fut = if t < horizon {
            let x = covariate.ok_or_else(|| {
                Error::input(format!("stage {t} decision needs the covariate x_{t}"))
            })?;
            weights = sparse(&self.models.weights(t + 1, x)?);
            if t + 1 >= 2 && self.models.model(t + 1).is_covariate_free() {
                Some(self.pool.future(t + 1, Some(CovKey::Shared), None))
            } else {
                Some(self.pool.future(t + 1, None, Some(&weights)))
            }
        } else {
            None
        };
        let opts = StageOptions {
            relax_integrality: false,
            state_duals: false,
        };
        solve_stage(
            &self.instance.stages[t],
            StateInput::Fixed(state),
            y,
            fut.as_ref().map(|f| f as &dyn FutureValue),
            opts,
        )
    }
}
