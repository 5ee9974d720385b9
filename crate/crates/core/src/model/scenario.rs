use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ProblemInstance;
use crate::error::{Error, Result};
use crate::weights::{WeightModels, WeightVector};

/// A node of the weighted scenario tree. The root has no sample; a node at
/// depth `t >= 1` stands for training sample `i` and carries its `y_t` and,
/// for `t < T`, its `x_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioNode {
    pub depth: usize,
    pub parent: Option<usize>,
    pub sample: Option<usize>,
    /// Weight of this branch given the parent's covariate.
    pub branch_weight: f64,
    /// Product of branch weights from the root.
    pub probability: f64,
    pub y: Vec<f64>,
    pub x: Option<Vec<f64>>,
    pub children: Vec<usize>,
}

/// Nodes in breadth-first order; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub nodes: Vec<ScenarioNode>,
    /// Depth of the root within the full horizon.
    pub root_depth: usize,
    pub horizon: usize,
}

/// Default node cap for continuous problems.
pub const NODE_CAP: usize = 1_000_000;

/// Builds the tree rooted at `(s_0, x_0)`; zero-weight branches are omitted.
pub fn build_scenario_tree(
    instance: &ProblemInstance,
    models: &WeightModels,
) -> Result<ScenarioTree> {
    ScenarioTree::grow(instance, models, 0, None, NODE_CAP)
}

impl ScenarioTree {
    /// Builds the subtree whose root is sample `root_sample` observed at
    /// depth `root_depth` (or the instance root when `root_depth == 0`).
    pub fn grow(
        instance: &ProblemInstance,
        models: &WeightModels,
        root_depth: usize,
        root_sample: Option<usize>,
        cap: usize,
    ) -> Result<Self> {
        let horizon = instance.horizon();
        if models.horizon() != horizon {
            return Err(Error::input(format!(
                "weight models cover {} stages, instance has T = {horizon}",
                models.horizon()
            )));
        }
        if root_depth > horizon || (root_depth > 0) != root_sample.is_some() {
            return Err(Error::input(
                "subtree root must be a training sample at depth 1..=T, or the root at depth 0",
            ));
        }
        let (y, x) = match root_sample {
            None => (Vec::new(), Some(instance.initial_covariate.clone())),
            Some(i) => node_data(instance, root_depth, i),
        };
        let mut nodes = vec![ScenarioNode {
            depth: root_depth,
            parent: None,
            sample: root_sample,
            branch_weight: 1.0,
            probability: 1.0,
            y,
            x,
            children: Vec::new(),
        }];
        // Children of every node with the same (depth, sample) share weights.
        let mut cache: HashMap<(usize, Option<usize>), WeightVector> = HashMap::new();
        let mut head = 0;
        while head < nodes.len() {
            let depth = nodes[head].depth;
            if depth < horizon {
                let key = (depth, nodes[head].sample);
                let w = match cache.get(&key) {
                    Some(w) => w.clone(),
                    None => {
                        let q = nodes[head].x.clone().unwrap_or_default();
                        let w = models.weights(depth + 1, &q)?;
                        cache.insert(key, w.clone());
                        w
                    }
                };
                let p = nodes[head].probability;
                for (i, wi) in w.support() {
                    if nodes.len() >= cap {
                        return Err(Error::Resource {
                            message: format!(
                                "scenario tree exceeds {cap} nodes; use kNN weights (support k) or a shorter horizon"
                            ),
                            incumbent: None,
                            bound: None,
                        });
                    }
                    let (y, x) = node_data(instance, depth + 1, i);
                    let id = nodes.len();
                    nodes.push(ScenarioNode {
                        depth: depth + 1,
                        parent: Some(head),
                        sample: Some(i),
                        branch_weight: wi,
                        probability: p * wi,
                        y,
                        x,
                        children: Vec::new(),
                    });
                    nodes[head].children.push(id);
                }
            }
            head += 1;
        }
        Ok(ScenarioTree {
            nodes,
            root_depth,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ScenarioNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }
}

fn node_data(instance: &ProblemInstance, depth: usize, i: usize) -> (Vec<f64>, Option<Vec<f64>>) {
    let y = instance.training.uncertainty(i, depth).to_vec();
    let x = (depth < instance.horizon()).then(|| instance.training.covariate(i, depth).to_vec());
    (y, x)
}
