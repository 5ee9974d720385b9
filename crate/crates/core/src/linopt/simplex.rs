//! Dense bounded revised simplex.
//!
//! Each row `i` gets a logical column `rᵢ = aᵢx` whose bounds encode the row
//! sense, so the working system is `A x − r = 0` with every column boxed.
//! Phase 1 adds one artificial per row whose logical starts outside its
//! bounds and minimizes their sum; phase 2 runs on the original costs.
//! The basis inverse is kept explicitly and refreshed by Gauss–Jordan
//! elimination every few dozen pivots.

use super::lp::{LinearProgram, RowSense, SolveResult, Status};
use crate::error::{Error, Result};

pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 30;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Pricing {
    Dantzig,
    Bland,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    n: usize,
    m: usize,
    /// Structural columns, column-major.
    cols: Vec<Vec<f64>>,
    /// Sign of each artificial column (`σᵢ eᵢ`).
    art_sign: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    cost: Vec<f64>,
    /// Basic column of each row.
    basis: Vec<usize>,
    /// Row position of each basic column, `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    pricing: Pricing,
    forced_bland: bool,
    degenerate_run: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, forced_bland: bool) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut cols = vec![vec![0.0; m]; n];
        for (i, row) in lp.rows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                cols[j][i] = a;
            }
        }
        let total = n + 2 * m;
        let mut lb = vec![0.0; total];
        let mut ub = vec![0.0; total];
        lb[..n].copy_from_slice(&lp.lower);
        ub[..n].copy_from_slice(&lp.upper);
        for i in 0..m {
            let b = lp.rhs[i];
            let (lo, hi) = match lp.senses[i] {
                RowSense::Le => (f64::NEG_INFINITY, b),
                RowSense::Ge => (b, f64::INFINITY),
                RowSense::Eq => (b, b),
            };
            lb[n + i] = lo;
            ub[n + i] = hi;
        }
        Simplex {
            lp,
            n,
            m,
            cols,
            art_sign: vec![1.0; m],
            lb,
            ub,
            x: vec![0.0; total],
            cost: vec![0.0; total],
            basis: vec![0; m],
            pos: vec![usize::MAX; total],
            binv: vec![0.0; m * m],
            iterations: 0,
            since_refactor: 0,
            pricing: if forced_bland {
                Pricing::Bland
            } else {
                Pricing::Dantzig
            },
            forced_bland,
            degenerate_run: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + 2 * self.m
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    /// Writes column `j` of the working matrix into `out`.
    fn column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            out.copy_from_slice(&self.cols[j]);
        } else if j < self.n + self.m {
            out[j - self.n] = -1.0;
        } else {
            let i = j - self.n - self.m;
            out[i] = self.art_sign[i];
        }
    }

    /// Phase-1 starting point: structurals at a bound, logicals basic where
    /// feasible, artificials basic elsewhere.
    fn initialize(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.x[j] = if self.lb[j].is_finite() {
                self.lb[j]
            } else if self.ub[j].is_finite() {
                self.ub[j]
            } else {
                0.0
            };
        }
        let mut needs_phase1 = false;
        for i in 0..m {
            let act: f64 = (0..n).map(|j| self.cols[j][i] * self.x[j]).sum();
            let (lo, hi) = (self.lb[n + i], self.ub[n + i]);
            let a = n + m + i;
            self.lb[a] = 0.0;
            if act >= lo && act <= hi {
                self.x[n + i] = act;
                self.basis[i] = n + i;
                self.ub[a] = 0.0;
                self.x[a] = 0.0;
            } else {
                needs_phase1 = true;
                let v = if act > hi { hi } else { lo };
                self.x[n + i] = v;
                let diff = v - act;
                self.art_sign[i] = if diff >= 0.0 { 1.0 } else { -1.0 };
                self.x[a] = diff.abs();
                self.ub[a] = f64::INFINITY;
                self.basis[i] = a;
            }
        }
        for (i, &b) in self.basis.iter().enumerate() {
            self.pos[b] = i;
        }
        self.refactor()
            .expect("initial basis is diagonal and always invertible");
        needs_phase1
    }

    /// Recomputes `B⁻¹` from scratch and the basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            for i in 0..m {
                b[i * m + r] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = b[c * m + c].abs();
            for r in c + 1..m {
                let v = b[r * m + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(Error::Solver(format!(
                    "singular basis during refactorization (column {c}, pivot {best:e})"
                )));
            }
            if piv != c {
                for k in 0..m {
                    b.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let p = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= p;
                inv[c * m + k] /= p;
            }
            for r in 0..m {
                if r != c {
                    let f = b[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            b[r * m + k] -= f * b[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        // rhs = −Σ_nonbasic col_j x_j
        let mut rhs = vec![0.0; m];
        let mut col = vec![0.0; m];
        for j in 0..self.total() {
            if self.pos[j] == usize::MAX && self.x[j] != 0.0 {
                self.column(j, &mut col);
                for i in 0..m {
                    rhs[i] -= col[i] * self.x[j];
                }
            }
        }
        for r in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[r * m + k] * rhs[k]).sum();
            self.x[self.basis[r]] = v;
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = self.cost[j];
            if cb != 0.0 {
                for k in 0..m {
                    y[k] += cb * self.binv[r * m + k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cost[j] - self.cols[j].iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
        } else if j < self.n + self.m {
            self.cost[j] + y[j - self.n]
        } else {
            let i = j - self.n - self.m;
            self.cost[j] - self.art_sign[i] * y[i]
        }
    }

    /// Direction in which nonbasic `j` may improve the objective, if any.
    fn improving_direction(&self, j: usize, d: f64) -> Option<f64> {
        let (lo, hi) = (self.lb[j], self.ub[j]);
        if lo == hi {
            return None;
        }
        let at_lower = lo.is_finite() && self.x[j] <= lo;
        let at_upper = hi.is_finite() && self.x[j] >= hi;
        if d < -OPT_TOL && !at_upper {
            Some(1.0)
        } else if d > OPT_TOL && !at_lower {
            Some(-1.0)
        } else {
            None
        }
    }

    fn run(&mut self, phase1: bool, max_iter: usize) -> Result<Outcome> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        let mut col = vec![0.0; m];
        loop {
            if self.iterations >= max_iter {
                return Err(Error::Solver(format!(
                    "iteration limit {max_iter} reached ({} rows, {} columns, phase {})",
                    m,
                    self.n,
                    if phase1 { 1 } else { 2 }
                )));
            }
            let y = self.duals();

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.total() {
                if self.pos[j] != usize::MAX {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                if let Some(dir) = self.improving_direction(j, d) {
                    match self.pricing {
                        Pricing::Bland => {
                            entering = Some((j, dir, d));
                            break;
                        }
                        Pricing::Dantzig => {
                            if entering.is_none_or(|(_, _, best)| d.abs() > best.abs()) {
                                entering = Some((j, dir, d));
                            }
                        }
                    }
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(Outcome::Optimal);
            };

            self.column(q, &mut col);
            for r in 0..m {
                alpha[r] = (0..m).map(|k| self.binv[r * m + k] * col[k]).sum();
            }

            // Ratio test.
            let mut step = f64::INFINITY;
            let mut leave: Option<usize> = None;
            let mut leave_to_upper = false;
            for r in 0..m {
                let rate = -dir * alpha[r];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[r];
                let (limit, to_upper) = if rate < 0.0 {
                    if !self.lb[j].is_finite() {
                        continue;
                    }
                    (((self.x[j] - self.lb[j]) / -rate).max(0.0), false)
                } else {
                    if !self.ub[j].is_finite() {
                        continue;
                    }
                    (((self.ub[j] - self.x[j]) / rate).max(0.0), true)
                };
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        if limit < step - 1e-12 {
                            true
                        } else if limit <= step + 1e-12 {
                            match self.pricing {
                                Pricing::Bland => j < self.basis[cur],
                                Pricing::Dantzig => alpha[r].abs() > alpha[cur].abs(),
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = limit;
                    leave = Some(r);
                    leave_to_upper = to_upper;
                }
            }
            let flip = self.ub[q] - self.lb[q];
            let bound_flip = flip.is_finite() && flip <= step;
            if bound_flip {
                step = flip;
                leave = None;
            }
            if !step.is_finite() {
                if phase1 {
                    return Err(Error::Solver("phase 1 reported an unbounded ray".into()));
                }
                return Ok(Outcome::Unbounded);
            }

            self.iterations += 1;
            if step <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_SWITCH {
                    self.pricing = Pricing::Bland;
                }
            } else {
                self.degenerate_run = 0;
                if !self.forced_bland {
                    self.pricing = Pricing::Dantzig;
                }
            }

            // Primal update.
            self.x[q] += dir * step;
            for r in 0..m {
                let j = self.basis[r];
                self.x[j] -= dir * step * alpha[r];
            }

            match leave {
                None => {
                    // Snap onto the bound to avoid drift.
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    self.x[out] = if leave_to_upper {
                        self.ub[out]
                    } else {
                        self.lb[out]
                    };
                    self.pos[out] = usize::MAX;
                    self.basis[r] = q;
                    self.pos[q] = r;
                    let piv = alpha[r];
                    for k in 0..m {
                        self.binv[r * m + k] /= piv;
                    }
                    for i in 0..m {
                        if i != r && alpha[i] != 0.0 {
                            let f = alpha[i];
                            for k in 0..m {
                                self.binv[i * m + k] -= f * self.binv[r * m + k];
                            }
                        }
                    }
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                    }
                }
            }
        }
    }

    /// Pivots zero-valued artificials out of the basis after phase 1.
    fn expel_artificials(&mut self) {
        let m = self.m;
        let mut col = vec![0.0; m];
        for r in 0..m {
            let a = self.basis[r];
            if !self.is_artificial(a) {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n + self.m {
                if self.pos[j] != usize::MAX {
                    continue;
                }
                self.column(j, &mut col);
                let v: f64 = (0..m).map(|k| self.binv[r * m + k] * col[k]).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                self.x[a] = 0.0;
                self.pos[a] = usize::MAX;
                self.basis[r] = q;
                self.pos[q] = r;
                // Rebuilding the inverse keeps this rare path simple.
                if self.refactor().is_err() {
                    // Undo: keep the artificial basic at zero.
                    self.pos[q] = usize::MAX;
                    self.basis[r] = a;
                    self.pos[a] = r;
                    self.refactor().ok();
                }
            }
        }
    }

    fn solve(mut self) -> Result<SolveResult> {
        let n = self.n;
        let m = self.m;
        let max_iter = 20_000 + 50 * (n + m);
        let needs_phase1 = self.initialize();
        if needs_phase1 {
            for j in 0..self.total() {
                self.cost[j] = if self.is_artificial(j) { 1.0 } else { 0.0 };
            }
            self.run(true, max_iter)?;
            self.refactor()?;
            let infeas: f64 = (n + m..self.total()).map(|j| self.x[j].max(0.0)).sum();
            let scale = 1.0 + self.lp.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if infeas > FEAS_TOL * scale {
                let mut res = SolveResult::with_status(Status::Infeasible, n);
                res.iterations = self.iterations;
                return Ok(res);
            }
            for j in n + m..self.total() {
                self.ub[j] = 0.0;
                if self.pos[j] == usize::MAX {
                    self.x[j] = 0.0;
                }
            }
            self.expel_artificials();
            self.refactor()?;
        }
        for j in 0..self.total() {
            self.cost[j] = if j < n { self.lp.objective[j] } else { 0.0 };
        }
        let outcome = self.run(false, max_iter)?;
        if let Outcome::Unbounded = outcome {
            let mut res = SolveResult::with_status(Status::Unbounded, n);
            res.iterations = self.iterations;
            return Ok(res);
        }
        self.refactor()?;
        let y = self.duals();
        let x: Vec<f64> = self.x[..n].to_vec();
        let reduced_costs = (0..n).map(|j| self.reduced_cost(j, &y)).collect();
        Ok(SolveResult {
            status: Status::Optimal,
            objective: self.lp.objective_value(&x),
            x,
            duals: y,
            reduced_costs,
            basis: self
                .basis
                .iter()
                .map(|&j| if j < n + m { j } else { usize::MAX })
                .collect(),
            iterations: self.iterations,
            nodes: 0,
        })
    }
}

/// Solves the continuous relaxation of `lp`, retrying with Bland pricing
/// when the first attempt fails numerically.
pub fn solve_relaxation(lp: &LinearProgram) -> Result<SolveResult> {
    lp.validate()?;
    let first_failure = match Simplex::new(lp, false).solve() {
        Ok(r) if certified(lp, &r) => return Ok(r),
        Ok(r) => format!("primal residual {:e}", lp.primal_residual(&r.x)),
        Err(e) => e.to_string(),
    };
    match Simplex::new(lp, true).solve() {
        Ok(r) if certified(lp, &r) => Ok(r),
        Ok(r) => Err(Error::Solver(format!(
            "solution failed certification after restart: {first_failure}; retry primal residual {:e}",
            lp.primal_residual(&r.x)
        ))),
        Err(e) => Err(Error::Solver(format!("{first_failure}; restart: {e}"))),
    }
}

fn certified(lp: &LinearProgram, r: &SolveResult) -> bool {
    if r.status != Status::Optimal {
        return true;
    }
    let scale = 1.0 + r.x.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    lp.primal_residual(&r.x) <= FEAS_TOL * scale
}
