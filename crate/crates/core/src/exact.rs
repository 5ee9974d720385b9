//! Extensive-form solver: one decision copy per scenario-tree node, solved as
//! a single LP (or MIP when stages carry binaries).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linopt::{self, LinearProgram, Status, VarKind};
use crate::model::{ProblemInstance, ScenarioTree};
use crate::weights::WeightModels;

/// Node cap for continuous extensive forms.
pub const CONTINUOUS_CAP: usize = 1_000_000;
/// Node cap when any stage has binary decisions.
pub const BINARY_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub objective: f64,
    /// Decision at the tree root.
    pub first_stage: Vec<f64>,
    /// Decision per tree node, indexed like `tree.nodes`.
    pub node_decisions: Vec<Vec<f64>>,
}

impl ExactSolution {
    /// `Σ_n p_n · c_{depth(n)} · z_n`.
    pub fn recomputed_cost(&self, instance: &ProblemInstance, tree: &ScenarioTree) -> f64 {
        tree.nodes
            .iter()
            .zip(&self.node_decisions)
            .map(|(n, z)| n.probability * instance.stages[n.depth].immediate_cost(z))
            .sum()
    }
}

/// Solves the weighted problem on `tree` from the instance's initial state.
pub fn solve_extensive(instance: &ProblemInstance, tree: &ScenarioTree) -> Result<ExactSolution> {
    if tree.root_depth != 0 {
        return Err(Error::input(
            "solve_extensive needs a tree rooted at stage 0",
        ));
    }
    solve_tree(instance, tree, &instance.initial_state)
}

/// Solves the extensive form of `tree` with `root_state` entering the root node.
pub fn solve_tree(
    instance: &ProblemInstance,
    tree: &ScenarioTree,
    root_state: &[f64],
) -> Result<ExactSolution> {
    let binaries = instance.has_binaries();
    let cap = if binaries { BINARY_CAP } else { CONTINUOUS_CAP };
    if tree.len() > cap {
        return Err(Error::Resource {
            message: format!(
                "extensive form has {} nodes, cap is {cap}; use kNN weights (support k) or a shorter horizon",
                tree.len()
            ),
            incumbent: None,
            bound: None,
        });
    }
    if root_state.len() != instance.stages[tree.root_depth].n_state {
        return Err(Error::input("root state dimension mismatch"));
    }

    let mut offset = Vec::with_capacity(tree.len());
    let mut total = 0;
    for n in &tree.nodes {
        offset.push(total);
        total += instance.stages[n.depth].n_dec;
    }
    let mut lp = LinearProgram::new(total);
    for (id, n) in tree.nodes.iter().enumerate() {
        let st = &instance.stages[n.depth];
        let o = offset[id];
        for j in 0..st.n_dec {
            lp.objective[o + j] = n.probability * st.cost[j];
            lp.lower[o + j] = st.lower[j];
            lp.upper[o + j] = st.upper[j];
            lp.integrality[o + j] = st.kind(j);
        }
    }
    for (id, n) in tree.nodes.iter().enumerate() {
        let st = &instance.stages[n.depth];
        // Root: state is data. Other nodes: s = F_{parent} z_parent moves to the left side.
        let state_term = match n.parent {
            None => Some(root_state.to_vec()),
            Some(_) => None,
        };
        let rhs = st.rhs(
            state_term.as_deref().unwrap_or(&vec![0.0; st.n_state]),
            &n.y,
        );
        for (r, &b) in rhs.iter().enumerate() {
            let mut entries: Vec<(usize, f64)> =
                st.w.row(r)
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| (offset[id] + j, a))
                    .collect();
            if let Some(p) = n.parent {
                let pst = &instance.stages[tree.nodes[p].depth];
                let f = pst
                    .transition
                    .as_ref()
                    .ok_or_else(|| Error::input("missing transition"))?;
                // −(T_r F) z_parent
                let coeff = f.tmul_vec(st.t.row(r));
                entries.extend(coeff.iter().enumerate().map(|(j, &c)| (offset[p] + j, -c)));
            }
            lp.add_sparse_row(&entries, st.sense(r), b);
        }
    }

    let res = if lp.has_integers() {
        linopt::solve_mip_with_limit(&lp, linopt::NODE_LIMIT)?
    } else {
        linopt::solve_lp(&lp)?
    };
    match res.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Err(Error::Infeasible {
                stage: tree.root_depth,
                scenario: Some("extensive form".into()),
            })
        }
        Status::Unbounded => {
            return Err(Error::Unbounded {
                context: Some("extensive form".into()),
            })
        }
    }
    let node_decisions: Vec<Vec<f64>> = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| {
            let st = &instance.stages[n.depth];
            let mut z = res.x[offset[id]..offset[id] + st.n_dec].to_vec();
            for (j, v) in z.iter_mut().enumerate() {
                if st.kind(j) == VarKind::Binary {
                    *v = v.round();
                }
            }
            z
        })
        .collect();
    Ok(ExactSolution {
        objective: res.objective,
        first_stage: node_decisions[0].clone(),
        node_decisions,
    })
}

/// `Q̂_t(state; y^i_t, x^i_t)` by solving the subtree rooted at training
/// sample `sample` observed at stage `t` (`t >= 1`), or the full problem
/// from `state` when `t == 0` and `sample` is `None`.
pub fn value_function_oracle(
    instance: &ProblemInstance,
    models: &WeightModels,
    t: usize,
    sample: Option<usize>,
    state: &[f64],
) -> Result<f64> {
    let cap = if instance.has_binaries() {
        BINARY_CAP
    } else {
        CONTINUOUS_CAP
    };
    let tree = ScenarioTree::grow(instance, models, t, sample, cap)?;
    Ok(solve_tree(instance, &tree, state)?.objective)
}
