//! Problem instances: affine stage templates, the instance container with
//! validation, and weighted scenario trees.

mod instance;
mod scenario;
mod template;

pub use instance::{Finding, FindingKind, ProblemInstance};
pub use scenario::{build_scenario_tree, ScenarioNode, ScenarioTree, NODE_CAP};
pub use template::StageTemplate;
