//! Command-line front end.
//!
//! Every subcommand reads its settings from flags, optionally layered over a
//! JSON config file (flags win). Outputs are pure functions of the resolved
//! settings and input files; each carries a `#` metadata block (CSV) or a
//! `meta` object (JSON) with the tool version, seed and a SHA-256 of the
//! resolved settings.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bench::{
    build_inventory_instance, build_lotsizing_instance, experiment_curve, run_policy, summarize,
    ExperimentConfig, Method, PolicyConfig, Problem, ProblemKind, Setting,
};
use crate::error::{Error, Result};
use crate::exact::solve_extensive;
use crate::model::{build_scenario_tree, ProblemInstance};
use crate::rng::{derive_seed, tags};
use crate::sddp::{solve_sddp, CovKey, Cut, CutFamily, CutPool, SddpConfig};
use crate::weights::{TrainingSet, WeightSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "prescriptor",
    version,
    about = "Covariate-weighted multistage stochastic optimization"
)]
pub struct Cli {
    /// Worker threads (default: logical cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with default settings for the subcommand; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic training paths and a matching problem instance.
    Generate(GenerateArgs),
    /// Fit weights and solve an instance exactly or with SDDP.
    Solve(SolveArgs),
    /// Train one policy and evaluate it on independent test paths.
    Evaluate(EvaluateArgs),
    /// Run a cost-versus-sample-size experiment.
    Benchmark(BenchmarkArgs),
    /// Write a cut pool from `solve` as CSV.
    CutsExport(CutsExportArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateArgs {
    /// inventory | lotsizing
    #[arg(long)]
    pub problem: Option<ProblemKind>,
    /// Number of training paths.
    #[arg(long)]
    pub n: Option<usize>,
    /// `T`; the problem has `T + 1` stages.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight learner recorded in the instance (saa|knn|tree|rf).
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveArgs {
    /// Instance JSON.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Replace the instance's training data with this CSV.
    #[arg(long)]
    pub training: Option<PathBuf>,
    /// exact | sddp
    #[arg(long)]
    pub solver: Option<String>,
    /// Override the instance's learner (saa|knn|tree|rf).
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub pi: Option<f64>,
    /// Query covariate `x_0`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// SDDP forward samples per iteration.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Relative gap tolerance.
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Cut families (benders,integer,lagrangian).
    #[arg(long, value_delimiter = ',')]
    pub cuts: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub problem: Option<ProblemKind>,
    /// Method label such as knn, rf or static-knn.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub test_paths: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub problem: Option<ProblemKind>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub test_paths: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// 100 replications unless `--replications` is given.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full: Option<bool>,
    /// Record wall-clock times (makes the rows CSV non-reproducible).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub wall_clock: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutsExportArgs {
    /// Cut pool JSON written by `solve --solver sddp`.
    #[arg(long)]
    pub cuts: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Process exit code for a result: 0 success, 1 solver failure, 2 usage error.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_usage() => 2,
        Err(_) => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::input("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::input(format!("cannot size the thread pool: {e}")))?;
    }
    let file = cli.config.as_deref().map(read_config).transpose()?;
    match cli.command {
        Command::Generate(a) => generate(layer(file, a)?),
        Command::Solve(a) => solve(layer(file, a)?),
        Command::Evaluate(a) => evaluate(layer(file, a)?),
        Command::Benchmark(a) => benchmark(layer(file, a)?),
        Command::CutsExport(a) => cuts_export(layer(file, a)?),
    }
}

fn read_config(path: &Path) -> Result<Value> {
    let text = read(path)?;
    let v: Value = serde_json::from_str(&text)?;
    if !v.is_object() {
        return Err(Error::input(format!(
            "{} must hold a JSON object",
            path.display()
        )));
    }
    Ok(v)
}

/// Overlays the flags that were given onto the config file's values.
fn layer<T: Serialize + DeserializeOwned + HasOut>(file: Option<Value>, flags: T) -> Result<T> {
    let out = flags.out().cloned();
    let mut merged = file.unwrap_or_else(|| json!({}));
    if let (Value::Object(base), Value::Object(over)) = (&mut merged, serde_json::to_value(&flags)?)
    {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    let mut resolved: T =
        serde_json::from_value(merged).map_err(|e| Error::input(format!("config: {e}")))?;
    resolved.set_out(out);
    Ok(resolved)
}

trait HasOut {
    fn out(&self) -> Option<&PathBuf>;
    fn set_out(&mut self, out: Option<PathBuf>);
}

macro_rules! has_out {
    ($($t:ty),*) => {$(
        impl HasOut for $t {
            fn out(&self) -> Option<&PathBuf> {
                self.out.as_ref()
            }
            fn set_out(&mut self, out: Option<PathBuf>) {
                self.out = out;
            }
        }
    )*};
}
has_out!(
    GenerateArgs,
    SolveArgs,
    EvaluateArgs,
    BenchmarkArgs,
    CutsExportArgs
);

/// Version, seed and settings hash attached to every output.
#[derive(Debug, Clone, Serialize)]
struct Meta {
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    config_sha256: String,
}

impl Meta {
    fn new<T: Serialize>(command: &'static str, seed: Option<u64>, settings: &T) -> Result<Self> {
        let canonical = serde_json::to_string(settings)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(Meta {
            version: VERSION,
            command,
            seed,
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        })
    }

    fn csv_header(&self) -> String {
        let mut s = format!(
            "# prescriptor {}\n# command: {}\n",
            self.version, self.command
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed: {seed}\n"));
        }
        s.push_str(&format!("# config-sha256: {}\n", self.config_sha256));
        s
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out
        .clone()
        .ok_or_else(|| Error::input("--out is required"))?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json(dir: &Path, name: &str, meta: &Meta, body: Value) -> Result<()> {
    let mut doc = json!({ "meta": meta });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    write(dir, name, &(serde_json::to_string_pretty(&doc)? + "\n"))
}

fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::input(format!("--{flag} is required")))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let seed = require(&args.seed, "seed")?;
    let kind = args.problem.unwrap_or(ProblemKind::Inventory);
    let n = args.n.unwrap_or(100);
    let horizon = args.horizon.unwrap_or(11);
    if n == 0 {
        return Err(Error::input("--n must be at least 1"));
    }
    let spec = match &args.weights {
        Some(name) => parse_method(name)?.spec,
        None => WeightSpec::knn(),
    };
    let meta = Meta::new("generate", Some(seed), &args)?;
    let dir = out_dir(&args.out)?;

    let setting = Setting::new(kind, horizon, seed);
    let paths = setting.paths(n, seed, &[tags::TRAINING])?;
    let training = paths.to_training()?;
    let mut csv = meta.csv_header();
    let mut buf = Vec::new();
    training.write_csv(&mut buf)?;
    csv.push_str(&String::from_utf8(buf).map_err(|e| Error::Solver(e.to_string()))?);
    write(&dir, "training.csv", &csv)?;

    let x0 = vec![0.0; training.covariate_dim(0)];
    let instance = match &setting.problem {
        Problem::Inventory(p) => build_inventory_instance(p, &training, spec, x0)?,
        Problem::LotSizing(p) => build_lotsizing_instance(p, &training, spec, x0)?,
    };
    write(&dir, "instance.json", &(instance.to_json()? + "\n"))?;
    write_json(
        &dir,
        "metadata.json",
        &meta,
        json!({
            "problem": setting.problem,
            "generator": crate::bench::GeneratorConfig { n_samples: n, seed: derive_seed(seed, &[tags::TRAINING]), ..setting.generator.clone() },
            "loadings": setting.loadings,
        }),
    )
}

fn parse_method(name: &str) -> Result<Method> {
    name.parse()
}

/// Applies the hyperparameter flags to `spec`.
fn tune(mut spec: WeightSpec, a: &SolveArgs) -> Result<WeightSpec> {
    match &mut spec {
        WeightSpec::Saa => {}
        WeightSpec::Knn { k } => {
            if a.k.is_some() {
                *k = a.k;
            }
        }
        WeightSpec::Tree { k, lambda, pi, .. } => {
            if a.k.is_some() {
                *k = a.k;
            }
            *lambda = a.lambda.unwrap_or(*lambda);
            *pi = a.pi.unwrap_or(*pi);
        }
        WeightSpec::Forest {
            trees,
            k,
            subsample,
            lambda,
            pi,
            ..
        } => {
            *trees = a.trees.unwrap_or(*trees);
            if a.k.is_some() {
                *k = a.k;
            }
            if a.subsample.is_some() {
                *subsample = a.subsample;
            }
            *lambda = a.lambda.unwrap_or(*lambda);
            *pi = a.pi.unwrap_or(*pi);
        }
    }
    Ok(spec)
}

fn solve(args: SolveArgs) -> Result<()> {
    let seed = require(&args.seed, "seed")?;
    let path = require(&args.instance, "instance")?;
    let mut instance = ProblemInstance::from_json(&read(&path)?)?;
    if let Some(tp) = &args.training {
        let f = std::fs::File::open(tp).map_err(|e| Error::io(tp, e))?;
        instance.training = TrainingSet::read_csv(f)?;
    }
    if let Some(name) = &args.weights {
        instance.weight_specs = vec![WeightSpec::from_name(name)?];
    }
    instance.weight_specs = instance
        .weight_specs
        .iter()
        .map(|s| tune(s.clone(), &args))
        .collect::<Result<_>>()?;
    if let Some(x0) = &args.x0 {
        instance.initial_covariate = x0.clone();
    }
    instance.check()?;
    let meta = Meta::new("solve", Some(seed), &(&args, &instance))?;
    let dir = out_dir(&args.out)?;
    let models = instance.fit_weights(derive_seed(seed, &[tags::WEIGHTS]))?;

    match args.solver.as_deref().unwrap_or("sddp") {
        "exact" => {
            let tree = build_scenario_tree(&instance, &models)?;
            let sol = solve_extensive(&instance, &tree)?;
            write_json(
                &dir,
                "report.json",
                &meta,
                json!({
                    "solver": "exact",
                    "objective": sol.objective,
                    "first_stage": sol.first_stage,
                    "tree_nodes": tree.len(),
                }),
            )
        }
        "sddp" => {
            let defaults = SddpConfig::default();
            let cut_families = match &args.cuts {
                None => Vec::new(),
                Some(names) => names
                    .iter()
                    .map(|n| {
                        CutFamily::from_name(n)
                            .ok_or_else(|| Error::input(format!("unknown cut family {n:?}")))
                    })
                    .collect::<Result<_>>()?,
            };
            let config = SddpConfig {
                forward_samples: args.samples.unwrap_or(defaults.forward_samples),
                alpha: args.alpha.unwrap_or(defaults.alpha),
                gap_tol: args.gap.unwrap_or(defaults.gap_tol),
                max_iter: args.max_iter.unwrap_or(defaults.max_iter),
                cut_families,
                seed: derive_seed(seed, &[tags::SDDP_FORWARD]),
                ..defaults
            };
            let run = solve_sddp(&instance, &models, &config)?;
            write(&dir, "sddp_log.csv", &(meta.csv_header() + &run.log_csv()))?;
            write(&dir, "cuts.json", &(run.pool.to_json()? + "\n"))?;
            write_json(
                &dir,
                "report.json",
                &meta,
                json!({
                    "solver": "sddp",
                    "objective": run.lb,
                    "first_stage": run.first_stage,
                    "lb": run.lb,
                    "ub": run.ub,
                    "ub_mean": run.ub_mean,
                    "ub_std": run.ub_std,
                    "iterations": run.iterations,
                    "stop": run.stop,
                    "cuts": run.pool.n_cuts(),
                    "lb_trace": run.lb_trace(),
                }),
            )
        }
        other => Err(Error::input(format!(
            "unknown solver {other:?} (exact|sddp)"
        ))),
    }
}

fn policy_config(samples: Option<usize>, max_iter: Option<usize>) -> PolicyConfig {
    let mut p = PolicyConfig::default();
    if let Some(m) = samples {
        p.sddp.forward_samples = m;
    }
    if let Some(it) = max_iter {
        p.sddp.max_iter = it;
    }
    p
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let seed = require(&args.seed, "seed")?;
    let kind = args.problem.unwrap_or(ProblemKind::Inventory);
    let method = args
        .method
        .clone()
        .unwrap_or_else(|| Method::dynamic(WeightSpec::knn()));
    let n = args.n.unwrap_or(100);
    let test_paths = args.test_paths.unwrap_or(1000);
    if n == 0 || test_paths == 0 {
        return Err(Error::input("--n and --test-paths must be positive"));
    }
    let meta = Meta::new("evaluate", Some(seed), &args)?;
    let dir = out_dir(&args.out)?;

    let setting = Setting::new(kind, args.horizon.unwrap_or(11), seed);
    let test = setting.paths(test_paths, seed, &[tags::TEST])?;
    let training = setting
        .paths(n, seed, &[tags::TRAINING, n as u64, 0])?
        .to_training()?;
    let config = policy_config(args.samples, args.max_iter);
    let runs = run_policy(
        &setting.problem,
        &method,
        setting.mode(),
        &training,
        &test,
        &config,
        derive_seed(seed, &[tags::REPLICATION, n as u64, 0]),
    )?;
    let (mean, std) = summarize(&runs);
    let mut csv = meta.csv_header();
    csv.push_str("path,total\n");
    for (p, r) in runs.iter().enumerate() {
        csv.push_str(&format!("{p},{:?}\n", r.total));
    }
    write(&dir, "paths.csv", &csv)?;
    write_json(
        &dir,
        "summary.json",
        &meta,
        json!({
            "problem": setting.problem.name(),
            "method": method.label(),
            "n": n,
            "test_paths": test_paths,
            "mean_cost": mean,
            "std_cost": std,
        }),
    )
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let seed = require(&args.seed, "seed")?;
    let defaults = ExperimentConfig::default();
    let full = args.full.unwrap_or(false);
    let config = ExperimentConfig {
        problem: args.problem.unwrap_or(defaults.problem),
        horizon: args.horizon.unwrap_or(defaults.horizon),
        n_grid: args.n_grid.clone().unwrap_or(defaults.n_grid),
        methods: args.methods.clone().unwrap_or(defaults.methods),
        replications: args
            .replications
            .unwrap_or(if full { 100 } else { defaults.replications }),
        test_paths: args.test_paths.unwrap_or(defaults.test_paths),
        seed,
        policy: policy_config(args.samples, args.max_iter),
        wall_clock: args.wall_clock.unwrap_or(false),
    };
    let meta = Meta::new("benchmark", Some(seed), &config)?;
    let dir = out_dir(&args.out)?;
    let result = experiment_curve(&config)?;
    write(
        &dir,
        "results.csv",
        &(meta.csv_header() + &result.rows_csv()?),
    )?;
    write(
        &dir,
        "curve.csv",
        &(meta.csv_header() + &result.curve_csv()?),
    )
}

fn key_label(key: CovKey) -> String {
    match key {
        CovKey::Root => "root".into(),
        CovKey::Sample(i) => format!("sample:{i}"),
        CovKey::Shared => "shared".into(),
    }
}

fn cut_row(stage: usize, pool: &str, key: &str, c: &Cut) -> String {
    let family = match c.family {
        CutFamily::Benders => "benders",
        CutFamily::Integer => "integer",
        CutFamily::Lagrangian => "lagrangian",
    };
    let pi: Vec<String> = c.pi.iter().map(|v| format!("{v:?}")).collect();
    format!(
        "{stage},{pool},{key},{family},{},{},{:?},{}\n",
        c.origin.iteration,
        c.origin.trial,
        c.beta,
        pi.join(" ")
    )
}

fn cuts_export(args: CutsExportArgs) -> Result<()> {
    let path = require(&args.cuts, "cuts")?;
    let text = read(&path)?;
    let pool = CutPool::from_json(&text)?;
    let meta = Meta::new("cuts-export", None, &text)?;
    let dir = out_dir(&args.out)?;
    let mut csv = meta.csv_header();
    csv.push_str("stage,pool,key,family,iteration,trial,beta,pi\n");
    for ((t, key), cuts) in &pool.pooled {
        for c in cuts {
            csv.push_str(&cut_row(*t, "pooled", &key_label(*key), c));
        }
    }
    for (t, per_sample) in pool.scenario.iter().enumerate() {
        for (i, cuts) in per_sample.iter().enumerate() {
            for c in cuts {
                csv.push_str(&cut_row(t + 1, "scenario", &format!("sample:{i}"), c));
            }
        }
    }
    write(&dir, "cuts.csv", &csv)
}
