use serde::{Deserialize, Serialize};

use crate::linopt::{RowSense, VarKind};
use crate::matrix::Matrix;

/// One stage of an affine multistage problem.
///
/// Decision `z` (length `n_dec`) has cost `cost·z`, must satisfy
/// `W z (sense) h + T s + U y` row by row, and produces the next state
/// `transition · z`. The last stage has no transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTemplate {
    pub stage: usize,
    pub n_dec: usize,
    pub n_state: usize,
    pub cost: Vec<f64>,
    #[serde(default)]
    pub transition: Option<Matrix>,
    #[serde(rename = "W")]
    pub w: Matrix,
    pub h: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Matrix,
    #[serde(rename = "U")]
    pub u: Matrix,
    /// Row senses; all `<=` when omitted.
    #[serde(default)]
    pub senses: Vec<RowSense>,
    /// Variable bounds; `null` in JSON stands for an infinite bound.
    #[serde(with = "lower_bounds")]
    pub lower: Vec<f64>,
    #[serde(with = "upper_bounds")]
    pub upper: Vec<f64>,
    #[serde(default)]
    pub integrality: Vec<VarKind>,
}

macro_rules! infinite_as_null {
    ($name:ident, $inf:expr) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                let raw = Vec::<Option<f64>>::deserialize(d)?;
                Ok(raw.into_iter().map(|x| x.unwrap_or($inf)).collect())
            }
        }
    };
}
infinite_as_null!(lower_bounds, f64::NEG_INFINITY);
infinite_as_null!(upper_bounds, f64::INFINITY);

impl StageTemplate {
    /// An unconstrained stage with `n_dec` continuous decisions in `[0, ∞)`.
    pub fn new(stage: usize, n_dec: usize, n_state: usize, n_unc: usize) -> Self {
        StageTemplate {
            stage,
            n_dec,
            n_state,
            cost: vec![0.0; n_dec],
            transition: None,
            w: Matrix::empty(n_dec),
            h: Vec::new(),
            t: Matrix::empty(n_state),
            u: Matrix::empty(n_unc),
            senses: Vec::new(),
            lower: vec![0.0; n_dec],
            upper: vec![f64::INFINITY; n_dec],
            integrality: vec![VarKind::Continuous; n_dec],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.w.rows
    }

    pub fn n_unc(&self) -> usize {
        self.u.cols
    }

    /// Dimension of the state passed to the next stage.
    pub fn n_next_state(&self) -> usize {
        self.transition.as_ref().map_or(0, |f| f.rows)
    }

    pub fn sense(&self, r: usize) -> RowSense {
        self.senses.get(r).copied().unwrap_or(RowSense::Le)
    }

    pub fn kind(&self, j: usize) -> VarKind {
        self.integrality
            .get(j)
            .copied()
            .unwrap_or(VarKind::Continuous)
    }

    pub fn has_binaries(&self) -> bool {
        self.integrality.contains(&VarKind::Binary)
    }

    /// Appends the row `coeffs · z (sense) h + t_row · s + u_row · y`.
    pub fn push_row(
        &mut self,
        coeffs: &[f64],
        sense: RowSense,
        h: f64,
        t_row: &[f64],
        u_row: &[f64],
    ) {
        debug_assert_eq!(coeffs.len(), self.n_dec);
        push(&mut self.w, coeffs);
        push(&mut self.t, t_row);
        push(&mut self.u, u_row);
        self.h.push(h);
        while self.senses.len() + 1 < self.w.rows {
            self.senses.push(RowSense::Le);
        }
        self.senses.push(sense);
    }

    /// `h + T s + U y` for every row.
    pub fn rhs(&self, state: &[f64], y: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|r| {
                let mut v = self.h[r];
                if self.t.cols > 0 {
                    v += crate::matrix::dot(self.t.row(r), state);
                }
                if self.u.cols > 0 && !y.is_empty() {
                    v += crate::matrix::dot(self.u.row(r), y);
                }
                v
            })
            .collect()
    }

    pub fn immediate_cost(&self, z: &[f64]) -> f64 {
        crate::matrix::dot(&self.cost, z)
    }

    pub fn next_state(&self, z: &[f64]) -> Vec<f64> {
        self.transition
            .as_ref()
            .map_or_else(Vec::new, |f| f.mul_vec(z))
    }

    /// `min cost·z` over the variable box, ignoring rows. `-∞` when unbounded.
    pub fn box_minimum(&self) -> f64 {
        self.cost
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if c > 0.0 {
                    c * self.lower[j]
                } else if c < 0.0 {
                    c * self.upper[j]
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn push(m: &mut Matrix, row: &[f64]) {
    debug_assert_eq!(row.len(), m.cols);
    m.data.extend_from_slice(row);
    m.rows += 1;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_bounds_roundtrip_through_json() {
        let mut st = StageTemplate::new(1, 2, 0, 0);
        st.lower[1] = f64::NEG_INFINITY;
        st.upper[0] = 3.5;
        let text = serde_json::to_string(&st).unwrap();
        assert!(text.contains("\"lower\":[0.0,null]"));
        let back: StageTemplate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, st);
    }
}
