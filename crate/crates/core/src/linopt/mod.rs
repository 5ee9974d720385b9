//! Linear and mixed-binary optimization kernel.
//!
//! [`solve_lp`] is a bounded revised simplex that returns basic duals;
//! [`solve_mip`] wraps it in best-bound branch and bound. [`stage`] builds
//! and solves the per-stage subproblems used by both solvers.

mod dump;
mod lp;
mod mip;
mod simplex;
pub mod stage;

pub use dump::{to_lp_text, DUMP_ENV};
pub use lp::{LinearProgram, RowSense, SolveResult, Status, VarKind};
pub use mip::{ABS_GAP, INT_TOL, NODE_LIMIT};
pub use simplex::{FEAS_TOL, OPT_TOL};
pub use stage::{fix_state_and_solve, FutureValue, StageSolution};

use crate::error::{Error, Result};

/// Solves a continuous LP.
pub fn solve_lp(lp: &LinearProgram) -> Result<SolveResult> {
    if lp.has_integers() {
        return Err(Error::input(
            "solve_lp called on a problem with binary columns; use solve_mip",
        ));
    }
    dump::maybe_dump(lp);
    simplex::solve_relaxation(lp)
}

/// Solves an LP with binary columns to absolute gap [`ABS_GAP`].
pub fn solve_mip(lp: &LinearProgram) -> Result<SolveResult> {
    solve_mip_with_limit(lp, NODE_LIMIT)
}

pub fn solve_mip_with_limit(lp: &LinearProgram, node_limit: usize) -> Result<SolveResult> {
    dump::maybe_dump(lp);
    mip::branch_and_bound(lp, node_limit)
}

/// Dispatches to [`solve_lp`] or [`solve_mip`] depending on integrality.
pub fn solve(lp: &LinearProgram) -> Result<SolveResult> {
    if lp.has_integers() {
        solve_mip(lp)
    } else {
        solve_lp(lp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp1(cost: f64) -> LinearProgram {
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = cost;
        lp
    }

    #[test]
    fn min_x_with_lower_row() {
        let mut lp = lp1(1.0);
        lp.lower[0] = f64::NEG_INFINITY;
        lp.add_row(vec![1.0], RowSense::Ge, 3.0);
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-12);
        assert!((r.duals[0].abs() - 1.0).abs() < 1e-12);
        assert!(r.duals[0] >= 0.0, "binding >= row has nonnegative dual");
    }

    #[test]
    fn le_row_dual_is_nonpositive() {
        // min -x  s.t. x <= 2
        let mut lp = lp1(-1.0);
        lp.add_row(vec![1.0], RowSense::Le, 2.0);
        let r = solve_lp(&lp).unwrap();
        assert!((r.objective + 2.0).abs() < 1e-12);
        assert!((r.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = lp1(1.0);
        lp.add_row(vec![1.0], RowSense::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let lp = lp1(-1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y  s.t. x - y = 1, x + y >= 3, x,y free -> any x+y=3 point, value 3
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.lower = vec![f64::NEG_INFINITY; 2];
        lp.add_row(vec![1.0, -1.0], RowSense::Eq, 1.0);
        lp.add_row(vec![1.0, 1.0], RowSense::Ge, 3.0);
        let r = solve_lp(&lp).unwrap();
        assert!((r.objective - 3.0).abs() < 1e-9);
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bounds_flip() {
        // max x + y with x,y in [0, 2], x + y <= 3
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.upper = vec![2.0, 2.0];
        lp.add_row(vec![1.0, 1.0], RowSense::Le, 3.0);
        let r = solve_lp(&lp).unwrap();
        assert!((r.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn mip_single_binary() {
        let mut lp = lp1(-1.0);
        lp.upper[0] = 1.0;
        lp.integrality[0] = VarKind::Binary;
        let r = solve_mip(&lp).unwrap();
        assert_eq!(r.x[0], 1.0);
        assert_eq!(r.objective, -1.0);
        assert_eq!(r.nodes, 0);
        assert!(r.duals.is_empty());
    }

    #[test]
    fn mip_knapsack_two_items() {
        // min -(3 z1 + 5 z2) s.t. 2 z1 + 3 z2 <= 4
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-3.0, -5.0];
        lp.upper = vec![1.0, 1.0];
        lp.integrality = vec![VarKind::Binary; 2];
        lp.add_row(vec![2.0, 3.0], RowSense::Le, 4.0);
        let r = solve_mip(&lp).unwrap();
        assert_eq!(r.x, vec![0.0, 1.0]);
        assert!((r.objective + 5.0).abs() < 1e-12);
    }

    #[test]
    fn mip_integral_root_needs_no_branching() {
        // min z1 + z2 s.t. z1 + z2 >= 1: LP vertex is already integral
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.upper = vec![1.0, 1.0];
        lp.integrality = vec![VarKind::Binary; 2];
        lp.add_row(vec![1.0, 1.0], RowSense::Ge, 1.0);
        let r = solve_mip(&lp).unwrap();
        assert_eq!(r.nodes, 0);
        assert_eq!(r.x, vec![1.0, 0.0]);
    }

    #[test]
    fn node_limit_is_a_resource_error() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![-1.0, -1.0, -1.0];
        lp.upper = vec![1.0; 3];
        lp.integrality = vec![VarKind::Binary; 3];
        lp.add_row(vec![2.0, 2.0, 2.0], RowSense::Le, 3.0);
        match solve_mip_with_limit(&lp, 1) {
            Err(Error::Resource { bound, .. }) => assert!(bound.is_some()),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn solve_lp_rejects_binaries() {
        let mut lp = lp1(1.0);
        lp.integrality[0] = VarKind::Binary;
        assert!(solve_lp(&lp).is_err());
    }
}
