//! Reproduction of the inventory and lot-sizing experiments.

mod basestock;
mod experiment;
mod generate;
mod inventory;
mod policy;

pub use basestock::{
    fit_basestock, fit_basestock_on_grid, level_grid, BasestockConfig, BasestockPolicy,
};
pub use experiment::{
    aggregate, experiment_curve, CurveRow, ExperimentConfig, ExperimentResult, ProblemKind,
    ResultRow, Setting,
};
pub use generate::{
    demand, generate_covariates, generate_demand, generate_paths, GeneratorConfig, Loadings, Paths,
};
pub use inventory::{
    build_inventory_instance, build_lotsizing_instance, inventory_stage, lotsizing_stage,
    InventoryParams, LotSizingParams, INVENTORY_VARS,
};
pub use policy::{
    bench_forest, run_policy, summarize, CovariateUse, Method, PolicyConfig, PolicyMode, PolicyRun,
    Problem,
};
