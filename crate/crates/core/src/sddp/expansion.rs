//! Binary expansion of continuous state components, so that binary-state
//! cut families apply to mixed problems.
//!
//! A component `v ∈ [lo, hi]` leaving stage `t` is replaced by bits
//! `b_0..b_{B-1}` with `v = lo + δ Σ 2^k b_k + r`, `r ∈ [0, δ]`,
//! `δ = (hi − lo) / (2^B − 1)`; the next stage sees `lo + δ Σ 2^k b_k`,
//! i.e. the state rounded down to the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linopt::{RowSense, VarKind};
use crate::matrix::Matrix;
use crate::model::{ProblemInstance, StageTemplate};

pub const DEFAULT_BITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateEncoding {
    /// Already 0/1; kept as a single bit.
    Binary,
    Range {
        lo: f64,
        hi: f64,
    },
}

/// `encodings[t - 1][k]` describes component `k` of the state entering stage `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSpec {
    pub bits: usize,
    pub encodings: Vec<Vec<StateEncoding>>,
}

impl ExpansionSpec {
    pub fn step(&self, enc: StateEncoding) -> f64 {
        match enc {
            StateEncoding::Binary => 1.0,
            StateEncoding::Range { lo, hi } => (hi - lo) / ((1u64 << self.bits) - 1) as f64,
        }
    }

    fn width(&self, enc: StateEncoding) -> usize {
        match enc {
            StateEncoding::Binary => 1,
            StateEncoding::Range { .. } => self.bits,
        }
    }

    /// Encodes a continuous state as bits (rounding down to the grid).
    pub fn encode(&self, t: usize, state: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for (k, &enc) in self.encodings[t - 1].iter().enumerate() {
            match enc {
                StateEncoding::Binary => out.push(state[k].round()),
                StateEncoding::Range { lo, .. } => {
                    let max = (1u64 << self.bits) - 1;
                    let n = (((state[k] - lo) / self.step(enc)).floor().max(0.0) as u64).min(max);
                    out.extend((0..self.bits).map(|b| ((n >> b) & 1) as f64));
                }
            }
        }
        out
    }

    /// Inverse of [`encode`](Self::encode) up to grid resolution.
    pub fn decode(&self, t: usize, bits: &[f64]) -> Vec<f64> {
        let mut pos = 0;
        self.encodings[t - 1]
            .iter()
            .map(|&enc| {
                let w = self.width(enc);
                let chunk = &bits[pos..pos + w];
                pos += w;
                match enc {
                    StateEncoding::Binary => chunk[0],
                    StateEncoding::Range { lo, .. } => {
                        lo + self.step(enc)
                            * chunk
                                .iter()
                                .enumerate()
                                .map(|(b, v)| v * (1u64 << b) as f64)
                                .sum::<f64>()
                    }
                }
            })
            .collect()
    }
}

/// Rewrites `instance` so every state entering stages `1..=T` is binary.
pub fn binary_expansion(
    instance: &ProblemInstance,
    spec: &ExpansionSpec,
) -> Result<ProblemInstance> {
    let horizon = instance.horizon();
    if spec.encodings.len() != horizon {
        return Err(Error::input(format!(
            "expansion needs encodings for {horizon} stages"
        )));
    }
    if spec.bits == 0 || spec.bits > 40 {
        return Err(Error::input("bit width must lie in 1..=40"));
    }
    for (t, enc) in spec.encodings.iter().enumerate() {
        if enc.len() != instance.stages[t + 1].n_state {
            return Err(Error::input(format!(
                "stage {} state has {} components, {} encodings given",
                t + 1,
                instance.stages[t + 1].n_state,
                enc.len()
            )));
        }
        if let Some(StateEncoding::Range { lo, hi }) = enc
            .iter()
            .find(|e| matches!(e, StateEncoding::Range { lo, hi } if !(hi > lo)))
        {
            return Err(Error::input(format!("empty range [{lo}, {hi}]")));
        }
    }

    let mut out = instance.clone();
    for t in 0..horizon {
        let encodings = &spec.encodings[t];
        // Producing side: stage t gains bit and remainder columns.
        let mut st = out.stages[t].clone();
        let f = st
            .transition
            .clone()
            .ok_or_else(|| Error::input(format!("stage {t} lacks a transition")))?;
        let mut new_rows: Vec<Vec<f64>> = Vec::new();
        for (k, &enc) in encodings.iter().enumerate() {
            match enc {
                StateEncoding::Binary => new_rows.push(f.row(k).to_vec()),
                StateEncoding::Range { lo, .. } => {
                    let delta = spec.step(enc);
                    let first_bit = st.n_dec;
                    add_columns(&mut st, spec.bits + 1);
                    for b in 0..spec.bits {
                        st.upper[first_bit + b] = 1.0;
                        st.integrality[first_bit + b] = VarKind::Binary;
                    }
                    let r = first_bit + spec.bits;
                    st.upper[r] = delta;
                    let mut coeffs = f.row(k).to_vec();
                    coeffs.resize(st.n_dec, 0.0);
                    for b in 0..spec.bits {
                        coeffs[first_bit + b] = -delta * (1u64 << b) as f64;
                    }
                    coeffs[r] = -1.0;
                    let t_row = vec![0.0; st.n_state];
                    let u_row = vec![0.0; st.n_unc()];
                    st.push_row(&coeffs, RowSense::Eq, lo, &t_row, &u_row);
                    for b in 0..spec.bits {
                        let mut sel = vec![0.0; first_bit + spec.bits + 1];
                        sel[first_bit + b] = 1.0;
                        new_rows.push(sel);
                    }
                }
            }
        }
        for row in &mut new_rows {
            row.resize(st.n_dec, 0.0);
        }
        st.transition = Some(Matrix::from_rows(&new_rows)?);
        out.stages[t] = st;

        // Consuming side: stage t+1 reads the bits through T.
        let next = &mut out.stages[t + 1];
        let old_t = next.t.clone();
        let n_bits: usize = encodings.iter().map(|&e| spec.width(e)).sum();
        let mut new_t = Matrix::zeros(old_t.rows, n_bits);
        for r in 0..old_t.rows {
            let mut col = 0;
            for (k, &enc) in encodings.iter().enumerate() {
                let a = old_t.get(r, k);
                match enc {
                    StateEncoding::Binary => {
                        new_t.set(r, col, a);
                        col += 1;
                    }
                    StateEncoding::Range { lo, .. } => {
                        next.h[r] += a * lo;
                        let delta = spec.step(enc);
                        for b in 0..spec.bits {
                            new_t.set(r, col + b, a * delta * (1u64 << b) as f64);
                        }
                        col += spec.bits;
                    }
                }
            }
        }
        next.t = new_t;
        next.n_state = n_bits;
    }
    Ok(out)
}

fn add_columns(st: &mut StageTemplate, extra: usize) {
    let n = st.n_dec;
    let m = st.w.rows;
    let mut w = Matrix::zeros(m, n + extra);
    for r in 0..m {
        w.data[r * (n + extra)..r * (n + extra) + n].copy_from_slice(st.w.row(r));
    }
    st.w = w;
    st.n_dec += extra;
    st.cost.resize(n + extra, 0.0);
    st.lower.resize(n + extra, 0.0);
    st.upper.resize(n + extra, f64::INFINITY);
    if st.integrality.len() < n {
        st.integrality.resize(n, VarKind::Continuous);
    }
    st.integrality.resize(n + extra, VarKind::Continuous);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_round_down() {
        let spec = ExpansionSpec {
            bits: 3,
            encodings: vec![vec![
                StateEncoding::Range { lo: 0.0, hi: 7.0 },
                StateEncoding::Binary,
            ]],
        };
        let bits = spec.encode(1, &[5.6, 1.0]);
        assert_eq!(bits, vec![1.0, 0.0, 1.0, 1.0]);
        assert_eq!(spec.decode(1, &bits), vec![5.0, 1.0]);
    }
}
