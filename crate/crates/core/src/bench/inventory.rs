//! Stage templates for the inventory and lot-sizing problems.
//!
//! Both carry the state `(I_{t−1}, C_{t−1}, z¹_{t−1})`: inventory at the end
//! of the previous period, cumulative advance orders, and the advance order
//! arriving now.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linopt::{RowSense, VarKind};
use crate::matrix::Matrix;
use crate::model::{ProblemInstance, StageTemplate};
use crate::weights::{TrainingSet, WeightSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InventoryParams {
    /// Advance-order unit cost.
    pub c1: f64,
    /// Immediate-order unit cost.
    pub c2: f64,
    pub holding: f64,
    /// Backlog coefficient; a unit of backlog costs `−backlog`.
    pub backlog: f64,
    /// Cumulative advance-order budget grows by this much per period.
    pub budget_step: f64,
}

impl Default for InventoryParams {
    fn default() -> Self {
        InventoryParams {
            c1: 5.0,
            c2: 10.0,
            holding: 5.0,
            backlog: -10.0,
            budget_step: 50.0,
        }
    }
}

impl InventoryParams {
    pub fn check(&self) -> Result<()> {
        if !(self.c1 < self.c2) {
            return Err(Error::input(
                "advance orders must be cheaper than immediate orders",
            ));
        }
        if self.holding < 0.0 || self.backlog > 0.0 || self.c1 < 0.0 {
            return Err(Error::input(
                "inventory costs must make the stage cost nonnegative",
            ));
        }
        Ok(())
    }

    /// `z̄_tot,t = budget_step · (t + 1)`.
    pub fn budget(&self, t: usize) -> f64 {
        self.budget_step * (t + 1) as f64
    }
}

pub const INVENTORY_VARS: [&str; 5] = ["z1", "z2", "I", "e", "C"];

fn state_transition(n_dec: usize, inv: usize, cum: usize) -> Matrix {
    let mut rows = vec![vec![0.0; n_dec]; 3];
    rows[0][inv] = 1.0;
    rows[1][cum] = 1.0;
    rows[2][0] = 1.0;
    Matrix::from_rows(&rows).expect("rectangular")
}

/// Stage `t` of the inventory LP: `[z¹, z², I, e, C]` with
/// `e ≥ c_h I`, `e ≥ c_b I` pricing holding and backlog.
pub fn inventory_stage(params: &InventoryParams, t: usize, horizon: usize) -> StageTemplate {
    let n_state = if t == 0 { 0 } else { 3 };
    let mut st = StageTemplate::new(t, 5, n_state, 1);
    st.cost = vec![params.c1, params.c2, 0.0, 1.0, 0.0];
    st.lower[2] = f64::NEG_INFINITY;
    st.upper[4] = params.budget(t);
    if t == horizon {
        st.upper[0] = 0.0;
    }
    let s = |v: [f64; 3]| if n_state == 0 { Vec::new() } else { v.to_vec() };
    // I − z² = I_prev + z¹_prev − y
    st.push_row(
        &[0.0, -1.0, 1.0, 0.0, 0.0],
        RowSense::Eq,
        0.0,
        &s([1.0, 0.0, 1.0]),
        &[-1.0],
    );
    st.push_row(
        &[0.0, 0.0, -params.holding, 1.0, 0.0],
        RowSense::Ge,
        0.0,
        &s([0.0; 3]),
        &[0.0],
    );
    st.push_row(
        &[0.0, 0.0, -params.backlog, 1.0, 0.0],
        RowSense::Ge,
        0.0,
        &s([0.0; 3]),
        &[0.0],
    );
    // C − z¹ = C_prev
    st.push_row(
        &[-1.0, 0.0, 0.0, 0.0, 1.0],
        RowSense::Eq,
        0.0,
        &s([0.0, 1.0, 0.0]),
        &[0.0],
    );
    if t < horizon {
        st.transition = Some(state_transition(5, 2, 4));
    }
    st
}

pub fn build_inventory_instance(
    params: &InventoryParams,
    training: &TrainingSet,
    spec: WeightSpec,
    initial_covariate: Vec<f64>,
) -> Result<ProblemInstance> {
    params.check()?;
    let horizon = training.horizon();
    let inst = ProblemInstance {
        stages: (0..=horizon)
            .map(|t| inventory_stage(params, t, horizon))
            .collect(),
        initial_state: Vec::new(),
        initial_covariate,
        training: training.clone(),
        weight_specs: vec![spec],
        lower_bounds: None,
    };
    inst.check()?;
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotSizingParams {
    pub c1: f64,
    pub holding: f64,
    /// Immediate-order quantities `q_j`.
    pub quantities: Vec<f64>,
    /// Per-unit prices `c_{2j}`.
    pub prices: Vec<f64>,
    pub budget_step: f64,
    pub demand_cap: f64,
}

impl LotSizingParams {
    /// `q = (20, 40, 60, 80, 100)` with prices drawn `U(5, 10)` from `seed`.
    pub fn with_seeded_prices(seed: u64) -> Self {
        use rand::Rng as _;
        let mut r = crate::rng::stream(seed, &[crate::rng::tags::LOT_PRICES]);
        let quantities = vec![20.0, 40.0, 60.0, 80.0, 100.0];
        let prices = quantities
            .iter()
            .map(|_| r.random_range(5.0..10.0))
            .collect();
        LotSizingParams {
            c1: 5.0,
            holding: 5.0,
            quantities,
            prices,
            budget_step: 50.0,
            demand_cap: 200.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.quantities.is_empty() || self.quantities.len() != self.prices.len() {
            return Err(Error::input(
                "lot sizing needs one price per order quantity",
            ));
        }
        if self.prices.iter().any(|&p| !(p > self.c1)) {
            return Err(Error::input(
                "every immediate price must exceed the advance price",
            ));
        }
        if self.quantities.iter().any(|&q| !(q > 0.0)) {
            return Err(Error::input("order quantities must be positive"));
        }
        if self.quantities.iter().sum::<f64>() < self.demand_cap {
            return Err(Error::input("order quantities cannot cover the demand cap"));
        }
        if self.holding < 0.0 {
            return Err(Error::input("holding cost must be nonnegative"));
        }
        Ok(())
    }

    pub fn budget(&self, t: usize) -> f64 {
        self.budget_step * (t + 1) as f64
    }

    pub fn n_options(&self) -> usize {
        self.quantities.len()
    }
}

/// Stage `t` of the lot-sizing MIP: `[z¹, z²_1..z²_M, I, C]`, `I ≥ 0`, `z²` binary.
pub fn lotsizing_stage(params: &LotSizingParams, t: usize, horizon: usize) -> StageTemplate {
    let m = params.n_options();
    let n = m + 3;
    let (inv, cum) = (m + 1, m + 2);
    let n_state = if t == 0 { 0 } else { 3 };
    let mut st = StageTemplate::new(t, n, n_state, 1);
    st.cost[0] = params.c1;
    for j in 0..m {
        st.cost[1 + j] = params.prices[j] * params.quantities[j];
        st.upper[1 + j] = 1.0;
        st.integrality[1 + j] = VarKind::Binary;
    }
    st.cost[inv] = params.holding;
    st.upper[cum] = params.budget(t);
    if t == horizon {
        st.upper[0] = 0.0;
    }
    let s = |v: [f64; 3]| if n_state == 0 { Vec::new() } else { v.to_vec() };
    // I − Σ q_j z²_j = I_prev + z¹_prev − y
    let mut row = vec![0.0; n];
    for j in 0..m {
        row[1 + j] = -params.quantities[j];
    }
    row[inv] = 1.0;
    st.push_row(&row, RowSense::Eq, 0.0, &s([1.0, 0.0, 1.0]), &[-1.0]);
    let mut row = vec![0.0; n];
    row[0] = -1.0;
    row[cum] = 1.0;
    st.push_row(&row, RowSense::Eq, 0.0, &s([0.0, 1.0, 0.0]), &[0.0]);
    if t < horizon {
        st.transition = Some(state_transition(n, inv, cum));
    }
    st
}

pub fn build_lotsizing_instance(
    params: &LotSizingParams,
    training: &TrainingSet,
    spec: WeightSpec,
    initial_covariate: Vec<f64>,
) -> Result<ProblemInstance> {
    params.check()?;
    let horizon = training.horizon();
    let inst = ProblemInstance {
        stages: (0..=horizon)
            .map(|t| lotsizing_stage(params, t, horizon))
            .collect(),
        initial_state: Vec::new(),
        initial_covariate,
        training: training.clone(),
        weight_specs: vec![spec],
        lower_bounds: None,
    };
    inst.check()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linopt::stage::fix_state_and_solve;

    #[test]
    fn single_stage_orders_immediately() {
        let st = inventory_stage(&InventoryParams::default(), 1, 1);
        let sol = fix_state_and_solve(&st, &[0.0, 0.0, 0.0], &[10.0], None).unwrap();
        assert!((sol.objective - 100.0).abs() < 1e-9);
        assert!((sol.z[1] - 10.0).abs() < 1e-9 && sol.z[0].abs() < 1e-12);
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let st = inventory_stage(&InventoryParams::default(), 2, 3);
        let sol = fix_state_and_solve(&st, &[0.0, 0.0, 0.0], &[0.0], None).unwrap();
        assert!(sol.objective.abs() < 1e-12);
    }

    #[test]
    fn lot_sizing_picks_matching_option() {
        let params = LotSizingParams {
            prices: vec![6.0, 9.0, 9.0, 9.0, 9.0],
            ..LotSizingParams::with_seeded_prices(0)
        };
        let st = lotsizing_stage(&params, 1, 1);
        let sol = fix_state_and_solve(&st, &[0.0, 0.0, 0.0], &[20.0], None).unwrap();
        assert_eq!(&sol.z[1..6], &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((sol.objective - 120.0).abs() < 1e-9);
        let sol = fix_state_and_solve(&st, &[0.0, 0.0, 0.0], &[0.0], None).unwrap();
        assert!(sol.z[1..6].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn seeded_prices_exceed_advance_cost() {
        let p = LotSizingParams::with_seeded_prices(11);
        p.check().unwrap();
        assert!(p.prices.iter().all(|c| (5.0..10.0).contains(c)));
    }
}
