//! The three cut families of the backward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linopt::stage::{solve_stage, FutureValue, StageOptions, StateInput};
use crate::linopt::{solve_lp, LinearProgram, RowSense, Status, VarKind};
use crate::matrix::dot;
use crate::model::StageTemplate;

/// Inner MIP evaluations allowed per Lagrangian dual.
pub const LAGRANGIAN_MAX_EVALS: usize = 50;
const LAGRANGIAN_TOL: f64 = 1e-7;
const BINARY_TOL: f64 = 1e-9;

/// Coefficients of `β + πᵀ s` plus the subproblem value the cut was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCoefficients {
    pub beta: f64,
    pub pi: Vec<f64>,
    /// Cut value at the trial state.
    pub value: f64,
    /// Set when the Lagrangian iteration cap was reached.
    pub capped: bool,
}

/// Benders cut from the continuous relaxation: `π = ∂P*/∂s`, `β = P* − πᵀ s^j`.
pub fn benders_cut(
    template: &StageTemplate,
    state: &[f64],
    y: &[f64],
    future: Option<&dyn FutureValue>,
) -> Result<CutCoefficients> {
    let opts = StageOptions {
        relax_integrality: true,
        state_duals: true,
    };
    let sol = solve_stage(template, StateInput::Fixed(state), y, future, opts)?;
    let pi = sol.state_duals;
    Ok(CutCoefficients {
        beta: sol.objective - dot(&pi, state),
        pi,
        value: sol.objective,
        capped: false,
    })
}

fn check_binary(state: &[f64]) -> Result<()> {
    match state.iter().find(|v| {
        (**v - v.round()).abs() > BINARY_TOL || !(-BINARY_TOL..=1.0 + BINARY_TOL).contains(*v)
    }) {
        Some(v) => Err(Error::input(format!("state component {v} is not binary"))),
        None => Ok(()),
    }
}

/// `P* − (P* − L)·H(s, s^j)` with `H` the Hamming distance to the binary
/// trial state, written as `β + πᵀ s`.
pub fn integer_optimality_cut(
    template: &StageTemplate,
    state: &[f64],
    y: &[f64],
    future: Option<&dyn FutureValue>,
    lower: f64,
) -> Result<CutCoefficients> {
    check_binary(state)?;
    let opts = StageOptions {
        relax_integrality: false,
        state_duals: false,
    };
    let p = solve_stage(template, StateInput::Fixed(state), y, future, opts)?.objective;
    let gap = p - lower;
    if gap < -1e-9 * (1.0 + p.abs()) {
        return Err(Error::input(format!(
            "lower bound {lower} exceeds the subproblem optimum {p}"
        )));
    }
    let gap = gap.max(0.0);
    let s: Vec<f64> = state.iter().map(|v| v.round()).collect();
    let pi: Vec<f64> = s.iter().map(|sk| -gap * (1.0 - 2.0 * sk)).collect();
    let beta = p - gap * s.iter().sum::<f64>();
    Ok(CutCoefficients {
        beta,
        pi,
        value: p,
        capped: false,
    })
}

/// `L(π) = min c·z + θ − πᵀ s` with the state relaxed to `[0, 1]^p`.
/// Returns the value and the supergradient `s^j − s*` of `L(π) + πᵀ s^j`.
fn lagrangian_value(
    template: &StageTemplate,
    pi: &[f64],
    trial: &[f64],
    y: &[f64],
    future: Option<&dyn FutureValue>,
) -> Result<(f64, Vec<f64>)> {
    let opts = StageOptions {
        relax_integrality: false,
        state_duals: false,
    };
    let sol = solve_stage(
        template,
        StateInput::Relaxed { multipliers: pi },
        y,
        future,
        opts,
    )?;
    let g = trial.iter().zip(&sol.state).map(|(a, b)| a - b).collect();
    Ok((sol.objective, g))
}

/// Box half-width for the multipliers: ten times the largest cost magnitude.
pub fn multiplier_box(template: &StageTemplate) -> f64 {
    10.0 * template.cost.iter().fold(1.0_f64, |m, c| m.max(c.abs()))
}

/// Lagrangian cut: maximizes `L(π) + πᵀ s^j` over `π ∈ [−Π, Π]^p` by
/// Kelley's cutting planes, starting from the Benders multipliers.
pub fn lagrangian_cut(
    template: &StageTemplate,
    state: &[f64],
    y: &[f64],
    future: Option<&dyn FutureValue>,
) -> Result<CutCoefficients> {
    lagrangian_cut_with_box(template, state, y, future, multiplier_box(template))
}

pub fn lagrangian_cut_with_box(
    template: &StageTemplate,
    state: &[f64],
    y: &[f64],
    future: Option<&dyn FutureValue>,
    bound: f64,
) -> Result<CutCoefficients> {
    check_binary(state)?;
    let p = state.len();
    let start = benders_cut(template, state, y, future)?.pi;

    // (π, h(π) = L(π) + πᵀ s^j, supergradient)
    let mut planes: Vec<(Vec<f64>, f64, Vec<f64>)> = Vec::new();
    let mut best: Option<(Vec<f64>, f64, f64)> = None; // (π, L(π), h)
    let mut pi = start;
    let mut capped = true;
    for _ in 0..LAGRANGIAN_MAX_EVALS {
        let (l, g) = lagrangian_value(template, &pi, state, y, future)?;
        let h = l + dot(&pi, state);
        if best.as_ref().is_none_or(|b| h > b.2) {
            best = Some((pi.clone(), l, h));
        }
        planes.push((pi.clone(), h, g));

        // max η  s.t.  η ≤ h_k + g_kᵀ(π − π_k),  π ∈ [−Π, Π]^p
        let mut master = LinearProgram::new(p + 1);
        for k in 0..p {
            master.lower[k] = -bound;
            master.upper[k] = bound;
        }
        master.lower[p] = f64::NEG_INFINITY;
        master.objective[p] = -1.0;
        for (pk, hk, gk) in &planes {
            let mut row = vec![0.0; p + 1];
            for k in 0..p {
                row[k] = -gk[k];
            }
            row[p] = 1.0;
            master.add_row(row, RowSense::Le, hk - dot(gk, pk));
        }
        debug_assert!(master.integrality.iter().all(|k| *k == VarKind::Continuous));
        let res = solve_lp(&master)?;
        if res.status != Status::Optimal {
            return Err(Error::Solver(
                "Lagrangian master problem did not solve to optimality".into(),
            ));
        }
        let upper = -res.objective;
        let best_h = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.2);
        if upper - best_h <= LAGRANGIAN_TOL * (1.0 + best_h.abs()) {
            capped = false;
            break;
        }
        pi = res.x[..p].to_vec();
    }
    if capped {
        log::warn!("Lagrangian dual stopped at the {LAGRANGIAN_MAX_EVALS}-evaluation cap; returning the best cut found");
    }
    let (pi, l, h) = best.expect("at least one evaluation");
    Ok(CutCoefficients {
        beta: l,
        pi,
        value: h,
        capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min z  s.t.  z ≥ s − y,  z ≥ 0.
    fn toy() -> StageTemplate {
        let mut t = StageTemplate::new(1, 1, 1, 1);
        t.cost = vec![1.0];
        t.push_row(&[-1.0], RowSense::Le, 0.0, &[-1.0], &[1.0]);
        t
    }

    #[test]
    fn benders_examples() {
        let c = benders_cut(&toy(), &[2.0], &[1.0], None).unwrap();
        assert!((c.pi[0] - 1.0).abs() < 1e-9 && (c.beta + 1.0).abs() < 1e-9);
        let c = benders_cut(&toy(), &[0.0], &[1.0], None).unwrap();
        assert!(c.pi[0].abs() < 1e-9 && c.beta.abs() < 1e-9);
    }

    /// Two-bit toy: min 3u  s.t.  u ≥ s₀ + s₁ − 1 with u binary.
    fn two_bit() -> StageTemplate {
        let mut t = StageTemplate::new(1, 1, 2, 0);
        t.cost = vec![3.0];
        t.upper = vec![1.0];
        t.integrality = vec![VarKind::Binary];
        t.push_row(&[-1.0], RowSense::Le, 1.0, &[-1.0, -1.0], &[]);
        t
    }

    fn q(s: &[f64]) -> f64 {
        if s[0] + s[1] > 1.5 {
            3.0
        } else {
            0.0
        }
    }

    #[test]
    fn integer_cut_tight_and_valid() {
        let states = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        for sj in &states {
            let c = integer_optimality_cut(&two_bit(), sj, &[], None, 0.0).unwrap();
            assert_eq!(c.beta + dot(&c.pi, sj), q(sj));
            for s in &states {
                assert!(c.beta + dot(&c.pi, s) <= q(s) + 1e-12);
            }
        }
        assert!(integer_optimality_cut(&two_bit(), &[0.5, 0.0], &[], None, 0.0).is_err());
    }

    #[test]
    fn lagrangian_valid_and_dominates_benders() {
        let states = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        for sj in &states {
            let lag = lagrangian_cut(&two_bit(), sj, &[], None).unwrap();
            let ben = benders_cut(&two_bit(), sj, &[], None).unwrap();
            assert!(lag.value >= ben.value - 1e-7);
            for s in &states {
                assert!(lag.beta + dot(&lag.pi, s) <= q(s) + 1e-6);
            }
        }
        let lag = lagrangian_cut(&two_bit(), &[1.0, 1.0], &[], None).unwrap();
        assert!((lag.value - 3.0).abs() < 1e-6);
    }
}
