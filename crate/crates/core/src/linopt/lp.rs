use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

/// `min cᵀx  s.t.  aᵢx (≤|≥|=) bᵢ,  l ≤ x ≤ u`, optionally with binary columns.
///
/// Rows are stored densely; problems in this crate are desk-scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integrality: Vec<VarKind>,
}

impl LinearProgram {
    /// `n` continuous variables in `[0, ∞)` with zero cost and no rows.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            integrality: vec![VarKind::Continuous; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a column and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64, kind: VarKind) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integrality.push(kind);
        for r in &mut self.rows {
            r.push(0.0);
        }
        self.objective.len() - 1
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: RowSense, rhs: f64) -> usize {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push(coeffs);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Appends a row given as sparse `(column, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, entries: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in entries {
            coeffs[j] += a;
        }
        self.add_row(coeffs, sense, rhs)
    }

    pub fn has_integers(&self) -> bool {
        self.integrality.contains(&VarKind::Binary)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.integrality.len() != n {
            return Err(Error::input(
                "variable attribute lengths disagree with objective",
            ));
        }
        if self.senses.len() != self.rows.len() || self.rhs.len() != self.rows.len() {
            return Err(Error::input("row attribute lengths disagree"));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != n) {
            return Err(Error::input(format!("row {i} has wrong length")));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] {
                return Err(Error::input(format!(
                    "variable {j}: lower bound {} exceeds upper bound {}",
                    self.lower[j], self.upper[j]
                )));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.objective[j].is_nan() {
                return Err(Error::input(format!("variable {j}: NaN data")));
            }
        }
        Ok(())
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| crate::matrix::dot(r, x)).collect()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, act) in self.activities(x).into_iter().enumerate() {
            let b = self.rhs[i];
            let v = match self.senses[i] {
                RowSense::Le => act - b,
                RowSense::Ge => b - act,
                RowSense::Eq => (act - b).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        crate::matrix::dot(&self.objective, x)
    }

    /// The LP with every integrality flag cleared.
    pub fn relaxation(&self) -> LinearProgram {
        let mut lp = self.clone();
        lp.integrality
            .iter_mut()
            .for_each(|k| *k = VarKind::Continuous);
        lp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of an LP or MIP solve.
///
/// Dual convention: `duals[i]` is the rate of change of the optimal value
/// with respect to `rhs[i]`. Under minimization a binding `≤` row therefore
/// has a nonpositive dual and a binding `≥` row a nonnegative one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals; empty for MIP solves.
    pub duals: Vec<f64>,
    /// Reduced costs of the structural columns; empty for MIP solves.
    pub reduced_costs: Vec<f64>,
    /// Basic column per row (structural `j < n`, row logical `n + i`). Empty for MIP.
    pub basis: Vec<usize>,
    pub iterations: usize,
    /// Branch-and-bound nodes explored beyond the root (0 for a pure LP or an integral root).
    pub nodes: usize,
}

impl SolveResult {
    pub(crate) fn with_status(status: Status, n: usize) -> Self {
        SolveResult {
            status,
            x: vec![0.0; n],
            objective: match status {
                Status::Infeasible => f64::INFINITY,
                Status::Unbounded => f64::NEG_INFINITY,
                Status::Optimal => 0.0,
            },
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            basis: Vec::new(),
            iterations: 0,
            nodes: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
