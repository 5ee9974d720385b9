//! Cost-versus-sample-size curves over repeated training sets.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_paths, GeneratorConfig, Loadings, Paths};
use super::inventory::{InventoryParams, LotSizingParams};
use super::policy::{run_policy, summarize, Method, PolicyConfig, PolicyMode, Problem};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Inventory,
    #[serde(rename = "lotsizing")]
    LotSizing,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inventory" => Ok(ProblemKind::Inventory),
            "lotsizing" | "lot-sizing" => Ok(ProblemKind::LotSizing),
            other => Err(Error::input(format!(
                "unknown problem {other:?} (inventory|lotsizing)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// `T`; the problem has `T + 1` stages.
    pub horizon: usize,
    pub n_grid: Vec<usize>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub test_paths: usize,
    pub seed: u64,
    pub policy: PolicyConfig,
    /// Record per-replication wall-clock time (non-deterministic output).
    pub wall_clock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::Inventory,
            horizon: 11,
            n_grid: vec![25, 50, 100, 200],
            methods: ["saa", "knn", "rf"]
                .iter()
                .map(|m| m.parse().expect("known method"))
                .collect(),
            replications: 25,
            test_paths: 1000,
            seed: 0,
            policy: PolicyConfig::default(),
            wall_clock: false,
        }
    }
}

/// One `(N, method, replication)` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub method: String,
    pub replication: usize,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub wall_ms: u64,
}

/// Replication average with a normal 95% half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub problem: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub method: String,
    pub mean_of_means: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub curve: Vec<CurveRow>,
}

/// Problem data fixed for the whole experiment.
pub struct Setting {
    pub problem: Problem,
    pub generator: GeneratorConfig,
    pub loadings: Loadings,
}

impl Setting {
    pub fn new(kind: ProblemKind, horizon: usize, seed: u64) -> Self {
        let (problem, cap) = match kind {
            ProblemKind::Inventory => (
                Problem::Inventory(InventoryParams::default()),
                f64::INFINITY,
            ),
            ProblemKind::LotSizing => {
                let p = LotSizingParams::with_seeded_prices(seed);
                let cap = p.demand_cap;
                (Problem::LotSizing(p), cap)
            }
        };
        Setting {
            problem,
            generator: GeneratorConfig {
                horizon,
                demand_cap: cap,
                ..GeneratorConfig::default()
            },
            loadings: Loadings::permuted(horizon, seed),
        }
    }

    pub fn mode(&self) -> PolicyMode {
        match self.problem {
            Problem::Inventory(_) => PolicyMode::Resolve,
            Problem::LotSizing(_) => PolicyMode::Basestock,
        }
    }

    /// Paths from an independent seed space: `tag` separates training from test data.
    pub fn paths(&self, n: usize, seed: u64, tag: &[u64]) -> Result<Paths> {
        let cfg = GeneratorConfig {
            n_samples: n,
            seed: derive_seed(seed, tag),
            ..self.generator.clone()
        };
        generate_paths(&cfg, &self.loadings)
    }
}

fn check(config: &ExperimentConfig) -> Result<()> {
    if config.n_grid.is_empty() || config.n_grid.contains(&0) {
        return Err(Error::input("the N grid must be nonempty and positive"));
    }
    if config.methods.is_empty() {
        return Err(Error::input("at least one method is required"));
    }
    if config.replications == 0 || config.test_paths == 0 {
        return Err(Error::input("replications and test paths must be positive"));
    }
    if config.horizon == 0 {
        return Err(Error::input("the horizon must be at least 1"));
    }
    Ok(())
}

pub fn experiment_curve(config: &ExperimentConfig) -> Result<ExperimentResult> {
    check(config)?;
    let setting = Setting::new(config.problem, config.horizon, config.seed);
    let test = setting.paths(config.test_paths, config.seed, &[tags::TEST])?;
    let mode = setting.mode();
    let problem_name = setting.problem.name().to_string();

    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |r| (n, r)))
        .collect();
    let per_cell: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(n, rep)| {
            let training = setting
                .paths(n, config.seed, &[tags::TRAINING, n as u64, rep as u64])?
                .to_training()?;
            let seed = derive_seed(config.seed, &[tags::REPLICATION, n as u64, rep as u64]);
            config
                .methods
                .iter()
                .map(|method| {
                    let start = Instant::now();
                    let runs = run_policy(
                        &setting.problem,
                        method,
                        mode,
                        &training,
                        &test,
                        &config.policy,
                        seed,
                    )?;
                    let (mean_cost, std_cost) = summarize(&runs);
                    log::info!("{problem_name} N={n} {method} rep {rep}: {mean_cost:.3}");
                    Ok(ResultRow {
                        problem: problem_name.clone(),
                        n,
                        method: method.label(),
                        replication: rep,
                        mean_cost,
                        std_cost,
                        wall_ms: if config.wall_clock {
                            start.elapsed().as_millis() as u64
                        } else {
                            0
                        },
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    let curve = aggregate(&rows, config);
    Ok(ExperimentResult { rows, curve })
}

/// Means over replications per `(N, method)` in grid order.
pub fn aggregate(rows: &[ResultRow], config: &ExperimentConfig) -> Vec<CurveRow> {
    let mut out = Vec::new();
    for &n in &config.n_grid {
        for method in &config.methods {
            let label = method.label();
            let means: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.method == label)
                .map(|r| r.mean_cost)
                .collect();
            if means.is_empty() {
                continue;
            }
            let k = means.len() as f64;
            let mean = means.iter().sum::<f64>() / k;
            let ci95 = if means.len() > 1 {
                let sd = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
                1.959_963_984_540_054 * sd / k.sqrt()
            } else {
                0.0
            };
            out.push(CurveRow {
                problem: rows[0].problem.clone(),
                n,
                method: label,
                mean_of_means: mean,
                ci95,
            });
        }
    }
    out
}

fn write_rows<T: Serialize>(rows: &[T], header: &str) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Solver(e.to_string()))?)
        .map_err(|e| Error::Solver(e.to_string()))?;
    Ok(format!("{header}\n{body}"))
}

impl ExperimentResult {
    /// `problem,N,method,replication,mean_cost,std_cost,wall_ms`
    pub fn rows_csv(&self) -> Result<String> {
        write_rows(
            &self.rows,
            "problem,N,method,replication,mean_cost,std_cost,wall_ms",
        )
    }

    /// `problem,N,method,mean_of_means,ci95`
    pub fn curve_csv(&self) -> Result<String> {
        write_rows(&self.curve, "problem,N,method,mean_of_means,ci95")
    }

    pub fn mean_of(&self, n: usize, method: &str) -> Option<f64> {
        self.curve
            .iter()
            .find(|c| c.n == n && c.method == method)
            .map(|c| c.mean_of_means)
    }

    pub fn replication_means(&self, n: usize, method: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n && r.method == method)
            .map(|r| r.mean_cost)
            .collect()
    }
}
