//! Stage subproblems `min c·z + θ  s.t.  z ∈ Z_t(s, y),  θ ≥ ψ(F z)`.
//!
//! The future value `ψ` is a floor plus affine pieces; pieces are added
//! lazily, most violated first, until the incumbent satisfies all of them.

use serde::{Deserialize, Serialize};

use super::{solve, solve_lp, LinearProgram, RowSense, SolveResult, Status, VarKind};
use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::model::StageTemplate;

/// Cap on lazy-cut rounds per subproblem.
const MAX_ROUNDS: usize = 100_000;

/// The maximizing affine piece of a future-value function at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    /// Stable identifier of the piece within its function.
    pub id: usize,
    pub value: f64,
    pub beta: f64,
    pub pi: Vec<f64>,
}

/// A convex piecewise-affine lower model `max(floor, max_k β_k + π_kᵀ s)`.
pub trait FutureValue: Sync {
    fn floor(&self) -> f64;

    /// The piece attaining the maximum at `state`, or `None` when there are no pieces.
    fn support(&self, state: &[f64]) -> Option<Support>;

    fn value(&self, state: &[f64]) -> f64 {
        match self.support(state) {
            Some(s) => s.value.max(self.floor()),
            None => self.floor(),
        }
    }
}

/// A plain list of `(β, π)` pieces over a floor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutList {
    pub floor: f64,
    pub cuts: Vec<(f64, Vec<f64>)>,
}

impl CutList {
    pub fn new(floor: f64) -> Self {
        CutList {
            floor,
            cuts: Vec::new(),
        }
    }
}

impl FutureValue for CutList {
    fn floor(&self) -> f64 {
        self.floor
    }

    fn support(&self, state: &[f64]) -> Option<Support> {
        best_piece(self.cuts.iter().map(|(b, p)| (*b, p.as_slice())), state)
    }
}

/// Argmax of `β + πᵀ s` over `pieces`; ties go to the earliest piece.
pub fn best_piece<'a>(
    pieces: impl Iterator<Item = (f64, &'a [f64])>,
    state: &[f64],
) -> Option<Support> {
    let mut best: Option<(usize, f64, f64, &'a [f64])> = None;
    for (id, (b, p)) in pieces.enumerate() {
        let v = b + dot(p, state);
        if best.is_none_or(|(_, bv, _, _)| v > bv) {
            best = Some((id, v, b, p));
        }
    }
    best.map(|(id, value, beta, pi)| Support {
        id,
        value,
        beta,
        pi: pi.to_vec(),
    })
}

/// How the incoming state enters the subproblem.
#[derive(Debug, Clone, Copy)]
pub enum StateInput<'a> {
    /// `s` pinned to the given values (substituted into the right-hand side).
    Fixed(&'a [f64]),
    /// `s` becomes a decision in `[0, 1]^p` with objective `−πᵀ s` (Lagrangian relaxation).
    Relaxed { multipliers: &'a [f64] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOptions {
    /// Solve the continuous relaxation instead of the mixed-binary problem.
    pub relax_integrality: bool,
    /// Also return `∂P*/∂s` from the continuous relaxation.
    pub state_duals: bool,
}

impl Default for StageOptions {
    fn default() -> Self {
        StageOptions {
            relax_integrality: false,
            state_duals: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub z: Vec<f64>,
    /// Future-value variable; zero on a terminal stage.
    pub theta: f64,
    /// `c·z + θ` (minus `πᵀs` for a relaxed state).
    pub objective: f64,
    pub immediate_cost: f64,
    pub next_state: Vec<f64>,
    /// State values chosen by the solver when the state is relaxed.
    pub state: Vec<f64>,
    /// `∂/∂s` of the continuous-relaxation optimum; empty unless requested.
    pub state_duals: Vec<f64>,
    /// Optimum of the continuous relaxation when it was solved, else `objective`.
    pub relaxation_objective: f64,
    pub cuts_added: usize,
    pub lp_solves: usize,
}

/// Solves the stage with the state pinned, returning the primal solution and
/// the state duals `Tᵀλ` of the continuous relaxation.
pub fn fix_state_and_solve(
    template: &StageTemplate,
    state: &[f64],
    y: &[f64],
    future: Option<&dyn FutureValue>,
) -> Result<StageSolution> {
    solve_stage(
        template,
        StateInput::Fixed(state),
        y,
        future,
        StageOptions::default(),
    )
}

struct Layout {
    n_dec: usize,
    theta: Option<usize>,
    state: Option<usize>,
}

fn build(
    template: &StageTemplate,
    input: StateInput<'_>,
    y: &[f64],
    future: Option<&dyn FutureValue>,
    relax: bool,
) -> Result<(LinearProgram, Layout)> {
    let n = template.n_dec;
    let p = template.n_state;
    if let StateInput::Fixed(s) = input {
        if s.len() != p {
            return Err(Error::input(format!(
                "stage {} expects a state of length {p}, got {}",
                template.stage,
                s.len()
            )));
        }
    }
    if template.stage > 0 && !y.is_empty() && y.len() != template.n_unc() {
        return Err(Error::input(format!(
            "stage {} expects an uncertainty of length {}, got {}",
            template.stage,
            template.n_unc(),
            y.len()
        )));
    }
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.objective[j] = template.cost[j];
        lp.lower[j] = template.lower[j];
        lp.upper[j] = template.upper[j];
        if !relax {
            lp.integrality[j] = template.kind(j);
        }
    }
    let theta = future.map(|f| lp.add_var(1.0, f.floor(), f64::INFINITY, VarKind::Continuous));
    let (zero_state, multipliers) = match input {
        StateInput::Fixed(s) => (s.to_vec(), None),
        StateInput::Relaxed { multipliers } => {
            if multipliers.len() != p {
                return Err(Error::input(
                    "multiplier length differs from state dimension",
                ));
            }
            (vec![0.0; p], Some(multipliers))
        }
    };
    let state = multipliers.map(|pi| {
        let first = lp.num_vars();
        for &m in pi {
            lp.add_var(-m, 0.0, 1.0, VarKind::Continuous);
        }
        first
    });
    let rhs = template.rhs(&zero_state, y);
    let total = lp.num_vars();
    for (r, &b) in rhs.iter().enumerate() {
        let mut row = vec![0.0; total];
        row[..n].copy_from_slice(template.w.row(r));
        if let Some(first) = state {
            for k in 0..p {
                row[first + k] = -template.t.get(r, k);
            }
        }
        lp.add_row(row, template.sense(r), b);
    }
    Ok((
        lp,
        Layout {
            n_dec: n,
            theta,
            state,
        },
    ))
}

fn add_cut(
    lp: &mut LinearProgram,
    template: &StageTemplate,
    layout: &Layout,
    beta: f64,
    pi: &[f64],
) {
    let f = template
        .transition
        .as_ref()
        .expect("future value on a stage without transition");
    let mut row = vec![0.0; lp.num_vars()];
    for (j, c) in f.tmul_vec(pi).into_iter().enumerate() {
        row[j] = -c;
    }
    row[layout.theta.expect("cut without θ column")] = 1.0;
    lp.add_row(row, RowSense::Ge, beta);
}

fn status_error(template: &StageTemplate, status: Status) -> Error {
    match status {
        Status::Infeasible => Error::Infeasible {
            stage: template.stage,
            scenario: None,
        },
        _ => Error::Unbounded {
            context: Some(format!("stage {} subproblem", template.stage)),
        },
    }
}

/// Solves to optimality with lazily added future-value pieces.
fn solve_lazy(
    template: &StageTemplate,
    mut lp: LinearProgram,
    layout: &Layout,
    future: Option<&dyn FutureValue>,
    continuous: bool,
) -> Result<(SolveResult, LinearProgram, usize, usize)> {
    let mut added: Vec<usize> = Vec::new();
    let mut solves = 0;
    for _ in 0..MAX_ROUNDS {
        let res = if continuous {
            solve_lp(&lp)?
        } else {
            solve(&lp)?
        };
        solves += 1;
        if res.status != Status::Optimal {
            return Err(status_error(template, res.status));
        }
        let (Some(f), Some(ti)) = (future, layout.theta) else {
            return Ok((res, lp, 0, solves));
        };
        let next = template.next_state(&res.x[..layout.n_dec]);
        match f.support(&next) {
            Some(sup)
                if !added.contains(&sup.id)
                    && sup.value > res.x[ti] + 1e-9 * (1.0 + sup.value.abs()) =>
            {
                add_cut(&mut lp, template, layout, sup.beta, &sup.pi);
                added.push(sup.id);
            }
            _ => return Ok((res, lp, added.len(), solves)),
        }
    }
    Err(Error::Solver(format!(
        "stage {}: lazy cut loop did not settle",
        template.stage
    )))
}

/// General stage solve.
pub fn solve_stage(
    template: &StageTemplate,
    input: StateInput<'_>,
    y: &[f64],
    future: Option<&dyn FutureValue>,
    opts: StageOptions,
) -> Result<StageSolution> {
    let integer = template.has_binaries() && !opts.relax_integrality;
    let (lp, layout) = build(template, input, y, future, !integer)?;
    let n_rows = template.n_rows();
    let (res, _, cuts_added, mut lp_solves) = solve_lazy(template, lp, &layout, future, !integer)?;

    let mut state_duals = Vec::new();
    let mut relaxation_objective = res.objective;
    if opts.state_duals {
        if let StateInput::Fixed(_) = input {
            let duals = if integer {
                let (rlp, rlayout) = build(template, input, y, future, true)?;
                let (rres, _, _, k) = solve_lazy(template, rlp, &rlayout, future, true)?;
                lp_solves += k;
                relaxation_objective = rres.objective;
                rres.duals
            } else {
                res.duals.clone()
            };
            state_duals = (0..template.n_state)
                .map(|k| (0..n_rows).map(|r| duals[r] * template.t.get(r, k)).sum())
                .collect();
        }
    }
    let z = res.x[..layout.n_dec].to_vec();
    let theta = layout.theta.map_or(0.0, |i| res.x[i]);
    let state = layout.state.map_or_else(Vec::new, |first| {
        res.x[first..first + template.n_state].to_vec()
    });
    Ok(StageSolution {
        immediate_cost: template.immediate_cost(&z),
        next_state: template.next_state(&z),
        z,
        theta,
        objective: res.objective,
        state,
        state_duals,
        relaxation_objective,
        cuts_added,
        lp_solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    /// min z  s.t.  −z ≤ −s + y,  z ≥ 0.
    fn toy() -> StageTemplate {
        let mut t = StageTemplate::new(1, 1, 1, 1);
        t.cost = vec![1.0];
        t.push_row(&[-1.0], RowSense::Le, 0.0, &[-1.0], &[1.0]);
        t
    }

    #[test]
    fn binding_state_row() {
        let sol = fix_state_and_solve(&toy(), &[2.0], &[1.0], None).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.state_duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slack_state_row() {
        let sol = fix_state_and_solve(&toy(), &[0.0], &[1.0], None).unwrap();
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.state_duals[0].abs() < 1e-9);
    }

    #[test]
    fn empty_pool_pins_theta_to_floor() {
        let mut t = toy();
        t.transition = Some(Matrix::from_rows(&[vec![1.0]]).unwrap());
        let fut = CutList::new(-4.0);
        let sol = fix_state_and_solve(&t, &[2.0], &[1.0], Some(&fut)).unwrap();
        assert!((sol.theta + 4.0).abs() < 1e-9);
        assert!((sol.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn lazy_cuts_reach_full_model() {
        let mut t = toy();
        t.transition = Some(Matrix::from_rows(&[vec![1.0]]).unwrap());
        t.upper = vec![10.0];
        let mut fut = CutList::new(0.0);
        // ψ(s) = max(0, 5 − s, 2s − 10)
        fut.cuts.push((5.0, vec![-1.0]));
        fut.cuts.push((-10.0, vec![2.0]));
        let sol = fix_state_and_solve(&t, &[2.0], &[1.0], Some(&fut)).unwrap();
        // min z + max(0, 5 − z, 2z − 10), z ≥ 1 → z in [1,5], value 5
        assert!((sol.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn wrong_state_length() {
        assert!(fix_state_and_solve(&toy(), &[1.0, 2.0], &[1.0], None).is_err());
    }

    #[test]
    fn infeasible_names_stage() {
        let mut t = toy();
        t.upper = vec![0.5];
        match fix_state_and_solve(&t, &[2.0], &[1.0], None) {
            Err(Error::Infeasible { stage, .. }) => assert_eq!(stage, 1),
            other => panic!("{other:?}"),
        }
    }
}
