#![allow(dead_code, clippy::needless_range_loop)]

pub mod oracle;

use prescriptor::linopt::{RowSense, VarKind};
use prescriptor::matrix::Matrix;
use prescriptor::model::{ProblemInstance, StageTemplate};
use prescriptor::weights::{TrainingSet, WeightSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random continuous instance with relatively complete recourse: the last
/// decision of every stage is a costly slack entering every `≥` row.
///
/// `T ≤ 3`, `N ≤ 5`, at most four decisions per stage, states in a bounded box.
pub fn random_instance(seed: u64) -> ProblemInstance {
    let mut r = rng(seed);
    let horizon = r.random_range(1..=3usize);
    let n = r.random_range(1..=5usize);
    let dx = r.random_range(1..=2usize);
    let n_state = r.random_range(1..=2usize);
    let mut stages = Vec::new();
    for t in 0..=horizon {
        let n_dec = r.random_range(2..=4usize);
        let n_in = if t == 0 { 0 } else { n_state };
        let mut st = StageTemplate::new(t, n_dec, n_in, if t == 0 { 0 } else { 1 });
        for j in 0..n_dec - 1 {
            st.cost[j] = r.random_range(-1.0..2.0);
            st.upper[j] = 10.0;
        }
        st.cost[n_dec - 1] = 3.0;
        st.upper[n_dec - 1] = 1000.0;
        let rows = r.random_range(1..=2usize);
        for _ in 0..rows {
            let mut coeffs: Vec<f64> = (0..n_dec - 1).map(|_| r.random_range(-1.0..2.0)).collect();
            coeffs.push(1.0);
            let t_row: Vec<f64> = (0..n_in).map(|_| r.random_range(-1.0..1.0)).collect();
            let u_row: Vec<f64> = (0..st.n_unc()).map(|_| r.random_range(-1.0..1.0)).collect();
            st.push_row(
                &coeffs,
                RowSense::Ge,
                r.random_range(-5.0..5.0),
                &t_row,
                &u_row,
            );
        }
        if t < horizon {
            let f: Vec<Vec<f64>> = (0..n_state)
                .map(|_| {
                    let mut row: Vec<f64> =
                        (0..n_dec - 1).map(|_| r.random_range(0.0..1.0)).collect();
                    row.push(0.0);
                    row
                })
                .collect();
            st.transition = Some(Matrix::from_rows(&f).unwrap());
        }
        stages.push(st);
    }
    let covariates: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..horizon)
                .map(|_| (0..dx).map(|_| r.random_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    let uncertainties: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..horizon)
                .map(|_| vec![r.random_range(0.0..5.0)])
                .collect()
        })
        .collect();
    let spec = match r.random_range(0..3u32) {
        0 => WeightSpec::Saa,
        1 => WeightSpec::Knn {
            k: Some(r.random_range(1..=n)),
        },
        _ => WeightSpec::tree(),
    };
    ProblemInstance {
        stages,
        initial_state: Vec::new(),
        initial_covariate: (0..dx).map(|_| r.random_range(-1.0..1.0)).collect(),
        training: TrainingSet::new(covariates, uncertainties).unwrap(),
        weight_specs: vec![spec],
        lower_bounds: None,
    }
}

/// Random instance with binary states: each stage carries `bits` binary
/// decisions forwarded as the next state, one continuous decision and a
/// costly slack covering every `≥` row. `T ≤ 2`, `N ≤ 3`.
pub fn random_binary_instance(seed: u64, bits: usize) -> ProblemInstance {
    let mut r = rng(seed ^ 0xB1);
    let horizon = r.random_range(1..=2usize);
    let n = r.random_range(1..=3usize);
    let mut stages = Vec::new();
    for t in 0..=horizon {
        let n_dec = bits + 2;
        let n_in = if t == 0 { 0 } else { bits };
        let mut st = StageTemplate::new(t, n_dec, n_in, if t == 0 { 0 } else { 1 });
        for j in 0..bits {
            st.cost[j] = r.random_range(-1.0..2.0);
            st.upper[j] = 1.0;
            st.integrality[j] = VarKind::Binary;
        }
        st.cost[bits] = r.random_range(0.0..1.5);
        st.upper[bits] = 5.0;
        st.cost[bits + 1] = 4.0;
        st.upper[bits + 1] = 1000.0;
        for _ in 0..r.random_range(1..=2usize) {
            let mut coeffs: Vec<f64> = (0..=bits).map(|_| r.random_range(-1.0..2.0)).collect();
            coeffs.push(1.0);
            let t_row: Vec<f64> = (0..n_in).map(|_| r.random_range(-2.0..2.0)).collect();
            let u_row: Vec<f64> = (0..st.n_unc()).map(|_| r.random_range(-1.0..1.0)).collect();
            st.push_row(
                &coeffs,
                RowSense::Ge,
                r.random_range(-2.0..3.0),
                &t_row,
                &u_row,
            );
        }
        if t < horizon {
            let f: Vec<Vec<f64>> = (0..bits)
                .map(|k| (0..n_dec).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
                .collect();
            st.transition = Some(Matrix::from_rows(&f).unwrap());
        }
        stages.push(st);
    }
    let covariates: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..horizon)
                .map(|_| vec![r.random_range(-1.0..1.0)])
                .collect()
        })
        .collect();
    let uncertainties: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..horizon)
                .map(|_| vec![r.random_range(0.0..3.0)])
                .collect()
        })
        .collect();
    let spec = if r.random_bool(0.5) {
        WeightSpec::Saa
    } else {
        WeightSpec::Knn {
            k: Some(r.random_range(1..=n)),
        }
    };
    ProblemInstance {
        stages,
        initial_state: Vec::new(),
        initial_covariate: vec![r.random_range(-1.0..1.0)],
        training: TrainingSet::new(covariates, uncertainties).unwrap(),
        weight_specs: vec![spec],
        lower_bounds: None,
    }
}
