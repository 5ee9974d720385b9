//! Best-bound branch and bound over binary columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lp::{LinearProgram, SolveResult, Status, VarKind};
use super::simplex::solve_relaxation;
use crate::error::{Error, Result};

pub const INT_TOL: f64 = 1e-6;
pub const ABS_GAP: f64 = 1e-6;
pub const NODE_LIMIT: usize = 1_000_000;

struct Node {
    bound: f64,
    seq: usize,
    /// `(column, fixed value)` for every binary fixed on the path to this node.
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap on the negated bound, ties by creation order for determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn most_fractional(lp: &LinearProgram, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, kind) in lp.integrality.iter().enumerate() {
        if *kind != VarKind::Binary {
            continue;
        }
        let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
        if frac > INT_TOL && best.is_none_or(|(_, b)| frac > b + 1e-12) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

pub fn branch_and_bound(lp: &LinearProgram, node_limit: usize) -> Result<SolveResult> {
    lp.validate()?;
    let mut base = lp.relaxation();
    for (j, kind) in lp.integrality.iter().enumerate() {
        if *kind == VarKind::Binary {
            if !(lp.lower[j].is_finite() && lp.upper[j].is_finite()) {
                return Err(Error::input(format!("binary column {j} must be bounded")));
            }
            base.lower[j] = base.lower[j].max(0.0).ceil();
            base.upper[j] = base.upper[j].min(1.0).floor();
            if base.lower[j] > base.upper[j] {
                return Ok(SolveResult::with_status(Status::Infeasible, lp.num_vars()));
            }
        }
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        fixings: Vec::new(),
    });
    let mut seq = 1;
    let mut nodes = 0;
    let mut iterations = 0;
    let mut work = base.clone();

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - ABS_GAP {
                break;
            }
        }
        if nodes >= node_limit {
            let bound = node.bound;
            return Err(Error::Resource {
                message: format!("branch-and-bound node limit {node_limit} exceeded"),
                incumbent: incumbent.map(|(v, _)| v),
                bound: Some(bound),
            });
        }
        nodes += 1;
        work.lower.copy_from_slice(&base.lower);
        work.upper.copy_from_slice(&base.upper);
        for &(j, v) in &node.fixings {
            work.lower[j] = v;
            work.upper[j] = v;
        }
        let relax = solve_relaxation(&work)?;
        iterations += relax.iterations;
        match relax.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                let mut res = SolveResult::with_status(Status::Unbounded, lp.num_vars());
                res.nodes = nodes;
                return Ok(res);
            }
            Status::Optimal => {}
        }
        if let Some((inc, _)) = &incumbent {
            if relax.objective >= inc - ABS_GAP {
                continue;
            }
        }
        match most_fractional(lp, &relax.x) {
            None => {
                let mut x = relax.x;
                for (j, kind) in lp.integrality.iter().enumerate() {
                    if *kind == VarKind::Binary {
                        x[j] = x[j].round();
                    }
                }
                let value = lp.objective_value(&x);
                if incumbent.as_ref().is_none_or(|(inc, _)| value < *inc) {
                    incumbent = Some((value, x));
                }
            }
            Some(j) => {
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound: relax.objective,
                        seq,
                        fixings,
                    });
                    seq += 1;
                }
            }
        }
    }

    let n = lp.num_vars();
    Ok(match incumbent {
        None => {
            let mut r = SolveResult::with_status(Status::Infeasible, n);
            r.nodes = nodes;
            r.iterations = iterations;
            r
        }
        Some((objective, x)) => SolveResult {
            status: Status::Optimal,
            x,
            objective,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            basis: Vec::new(),
            iterations,
            // The root counts as a node but not as branching.
            nodes: nodes.saturating_sub(1),
        },
    })
}
