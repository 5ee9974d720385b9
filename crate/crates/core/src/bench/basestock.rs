//! Covariate-dependent basestock policies for lot sizing.
//!
//! `r_t^i` is fitted per training sample by backward induction over the
//! weighted sample tree, with cost-to-go tabulated on an inventory grid;
//! any shortfall is covered by the cheapest combination of immediate lots,
//! counting holding cost on the excess.
//!
//! At execution the advance order minimizes the weighted tabulated cost at
//! the observed covariate within the remaining budget, see [`BasestockPolicy::order`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inventory::LotSizingParams;
use crate::error::{Error, Result};
use crate::weights::{TrainingSet, WeightModels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasestockConfig {
    /// Candidate levels, evenly spaced on `[0, quantile of training demand]`.
    pub grid_points: usize,
    pub quantile: f64,
    /// Resolution of the tabulated cost-to-go.
    pub inventory_points: usize,
}

impl Default for BasestockConfig {
    fn default() -> Self {
        BasestockConfig {
            grid_points: 21,
            quantile: 0.99,
            inventory_points: 161,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasestockPolicy {
    /// `levels[t][i]`: target position after the stage-`t` advance order when `x_t = x_t^i`.
    pub levels: Vec<Vec<f64>>,
    /// Fitted expected cost from stage 0 for each training sample's `x_0`.
    pub root_values: Vec<f64>,
    /// Upper end of the inventory grid the cost tables are tabulated on.
    pub grid_max: f64,
    /// `tables[t][j][k]`: stage-`t+1` serve cost plus cost-to-go on sample `j`
    /// from grid position `k`.
    pub tables: Vec<Vec<Vec<f64>>>,
}

/// Every subset of immediate lots, summarized for fast lookup.
struct Lots {
    /// `(quantity, cost, mask)` sorted by quantity.
    combos: Vec<(f64, f64, u32)>,
    /// Minimum of `cost + holding · quantity` over `combos[k..]`, with its index.
    suffix: Vec<(f64, usize)>,
}

impl Lots {
    fn new(params: &LotSizingParams) -> Self {
        let m = params.n_options();
        let mut combos: Vec<(f64, f64, u32)> = (0u32..1 << m)
            .map(|mask| {
                let (mut q, mut c) = (0.0, 0.0);
                for j in 0..m {
                    if mask >> j & 1 == 1 {
                        q += params.quantities[j];
                        c += params.prices[j] * params.quantities[j];
                    }
                }
                (q, c, mask)
            })
            .collect();
        combos.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut suffix = vec![(f64::INFINITY, 0); combos.len()];
        let mut best = (f64::INFINITY, 0);
        for k in (0..combos.len()).rev() {
            let v = combos[k].1 + params.holding * combos[k].0;
            if v <= best.0 {
                best = (v, k);
            }
            suffix[k] = best;
        }
        Lots { combos, suffix }
    }

    /// Cheapest lots covering `shortfall`, as `(combo index, cost + holding · quantity)`.
    fn cover(&self, shortfall: f64) -> (usize, f64) {
        let k = self.combos.partition_point(|c| c.0 < shortfall - 1e-9);
        let k = k.min(self.combos.len() - 1);
        let (v, idx) = self.suffix[k];
        (idx, v)
    }

    /// Immediate cost (lots plus holding) and ending inventory from position `s` under demand `y`.
    fn serve(&self, holding: f64, s: f64, y: f64) -> (f64, f64, usize) {
        let (idx, v) = self.cover(y - s);
        let end = s + self.combos[idx].0 - y;
        (v + holding * (s - y), end, idx)
    }
}

/// Uniform grid on `[0, max]` with linear interpolation (clamped at the ends).
struct Grid {
    max: f64,
    step: f64,
    n: usize,
}

impl Grid {
    fn new(max: f64, n: usize) -> Self {
        let n = n.max(2);
        Grid {
            max,
            step: max / (n - 1) as f64,
            n,
        }
    }

    fn point(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    fn interp(&self, table: &[f64], v: f64) -> f64 {
        if !(self.step > 0.0) {
            return table[0];
        }
        let u = (v.clamp(0.0, self.max)) / self.step;
        let k = (u.floor() as usize).min(self.n - 2);
        let f = u - k as f64;
        table[k] * (1.0 - f) + table[k + 1] * f
    }
}

fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = ((values.len() - 1) as f64 * q).round() as usize;
    values[pos.min(values.len() - 1)]
}

/// Candidate basestock levels: `points` evenly spaced on `[0, quantile of all training demands]`.
pub fn level_grid(training: &TrainingSet, config: &BasestockConfig) -> Vec<f64> {
    let mut all: Vec<f64> = (1..=training.horizon())
        .flat_map(|t| training.stage_responses(t))
        .collect();
    let top = quantile(&mut all, config.quantile).max(0.0);
    if config.grid_points <= 1 {
        return vec![0.0];
    }
    (0..config.grid_points)
        .map(|k| top * k as f64 / (config.grid_points - 1) as f64)
        .collect()
}

pub fn fit_basestock(
    training: &TrainingSet,
    models: &WeightModels,
    params: &LotSizingParams,
    config: &BasestockConfig,
) -> Result<BasestockPolicy> {
    fit_basestock_on_grid(
        training,
        models,
        params,
        config,
        &level_grid(training, config),
    )
}

/// Backward induction with an explicit level grid.
pub fn fit_basestock_on_grid(
    training: &TrainingSet,
    models: &WeightModels,
    params: &LotSizingParams,
    config: &BasestockConfig,
    levels: &[f64],
) -> Result<BasestockPolicy> {
    params.check()?;
    if levels.is_empty() || levels.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::input(
            "basestock levels must be a nonempty set of nonnegative values",
        ));
    }
    let horizon = training.horizon();
    let n = training.n_samples();
    if models.horizon() != horizon {
        return Err(Error::input(
            "weight models and training set disagree on the horizon",
        ));
    }
    let lots = Lots::new(params);
    let top_level = levels.iter().cloned().fold(0.0, f64::max);
    let max_demand = (1..=horizon)
        .flat_map(|t| training.stage_responses(t))
        .fold(0.0, f64::max);
    let grid = Grid::new(
        top_level.max(max_demand) + params.quantities.iter().sum::<f64>(),
        config.inventory_points,
    );

    // next_v[j][k]: cost-to-go after serving stage t+1 on sample j, ending with grid inventory k.
    let mut next_v = vec![vec![0.0; grid.n]; n];
    let mut out = vec![Vec::new(); horizon];
    let mut tables = vec![Vec::new(); horizon];
    let mut root_values = Vec::new();
    for t in (0..horizon).rev() {
        let ys = training.stage_responses(t + 1);
        // Per-sample stage-(t+1) outcome from each grid position.
        let serve: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                (0..grid.n)
                    .map(|k| {
                        let (c, end, _) = lots.serve(params.holding, grid.point(k), ys[j]);
                        c + grid.interp(&next_v[j], end)
                    })
                    .collect()
            })
            .collect();
        let fitted: Vec<(f64, f64, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let w = models.weights(t + 1, training.covariate(i, t))?;
                let mut g = vec![0.0; grid.n];
                for (j, wj) in w.support() {
                    for (gk, sk) in g.iter_mut().zip(&serve[j]) {
                        *gk += wj * sk;
                    }
                }
                let mut best = (f64::INFINITY, 0.0);
                for &r in levels {
                    let v = params.c1 * r + grid.interp(&g, r);
                    if v < best.0 - 1e-12 {
                        best = (v, r);
                    }
                }
                Ok((best.1, best.0, g))
            })
            .collect::<Result<_>>()?;
        out[t] = fitted.iter().map(|f| f.0).collect();
        tables[t] = serve;
        if t == 0 {
            root_values = fitted.iter().map(|f| f.1).collect();
        } else {
            next_v = fitted
                .iter()
                .map(|(r, _, g)| {
                    (0..grid.n)
                        .map(|k| {
                            let inv = grid.point(k);
                            params.c1 * (r - inv).max(0.0) + grid.interp(g, inv.max(*r))
                        })
                        .collect()
                })
                .collect();
        }
    }
    Ok(BasestockPolicy {
        levels: out,
        root_values,
        grid_max: grid.max,
        tables,
    })
}

impl BasestockPolicy {
    /// Number of uncertainty stages `T`.
    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    /// Weighted target `Σᵢ w^{t+1}_i(x) r_t^i`.
    pub fn target(&self, models: &WeightModels, t: usize, x: &[f64]) -> Result<f64> {
        let w = models.weights(t + 1, x)?;
        Ok(w.support().map(|(i, wi)| wi * self.levels[t][i]).sum())
    }

    /// Fitted expected cost, averaged over the training samples' time-0 covariates.
    pub fn in_sample_cost(&self) -> f64 {
        self.root_values.iter().sum::<f64>() / self.root_values.len() as f64
    }

    /// Advance order at stage `t` from inventory `inv` with `room` budget left:
    /// minimizes `c1 o + Σ_j w^{t+1}_j(x) G_t^j(inv + o)` over `o ∈ [0, room]`.
    pub fn order(
        &self,
        params: &LotSizingParams,
        models: &WeightModels,
        t: usize,
        x: &[f64],
        inv: f64,
        room: f64,
    ) -> Result<f64> {
        let room = room.max(0.0);
        if room == 0.0 {
            return Ok(0.0);
        }
        let grid = Grid::new(self.grid_max, self.tables[t][0].len());
        let w = models.weights(t + 1, x)?;
        let mut g = vec![0.0; grid.n];
        for (j, wj) in w.support() {
            for (gk, sk) in g.iter_mut().zip(&self.tables[t][j]) {
                *gk += wj * sk;
            }
        }
        let eval = |o: f64| params.c1 * o + grid.interp(&g, inv + o);
        let mut best = (eval(0.0), 0.0);
        let mut consider = |o: f64| {
            let v = eval(o);
            if v < best.0 - 1e-12 {
                best = (v, o);
            }
        };
        for k in 0..grid.n {
            let o = grid.point(k) - inv;
            if o > 0.0 && o < room {
                consider(o);
            }
        }
        consider(room);
        Ok(best.1)
    }

    /// Runs one demand path `y_1..y_T`; `order(t, inv, room)` gives the stage-`t`
    /// advance order, clipped to `[0, room]`.
    /// Decisions use the lot-sizing template layout `[z¹, z²_1..z²_M, I, C]`.
    pub fn simulate<F>(
        params: &LotSizingParams,
        demands: &[f64],
        mut order: F,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)>
    where
        F: FnMut(usize, f64, f64) -> Result<f64>,
    {
        let lots = Lots::new(params);
        let m = params.n_options();
        let horizon = demands.len();
        let mut decisions = Vec::with_capacity(horizon + 1);
        let mut costs = Vec::with_capacity(horizon + 1);
        let (mut inv, mut pipe, mut cum) = (0.0, 0.0, 0.0);
        for t in 0..=horizon {
            let mut z = vec![0.0; m + 3];
            let mut cost = 0.0;
            let position = inv + pipe;
            if t > 0 {
                let y = demands[t - 1].min(params.demand_cap);
                let (_, end, idx) = lots.serve(params.holding, position, y);
                let mask = lots.combos[idx].2;
                for j in 0..m {
                    if mask >> j & 1 == 1 {
                        z[1 + j] = 1.0;
                        cost += params.prices[j] * params.quantities[j];
                    }
                }
                inv = end;
            } else {
                inv = position;
            }
            cost += params.holding * inv;
            let amount = if t < horizon {
                let room = (params.budget(t) - cum).max(0.0);
                order(t, inv, room)?.clamp(0.0, room)
            } else {
                0.0
            };
            cum += amount;
            cost += params.c1 * amount;
            pipe = amount;
            z[0] = amount;
            z[m + 1] = inv;
            z[m + 2] = cum;
            decisions.push(z);
            costs.push(cost);
        }
        Ok((decisions, costs))
    }
}
