//! Reference solvers written against the model's definitions only; they
//! share no code with the library's solvers.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use prescriptor::linopt::{LinearProgram, RowSense, VarKind};
use prescriptor::model::{ProblemInstance, StageTemplate};
use prescriptor::weights::WeightModels;

/// One node of the weighted scenario subtree.
#[derive(Debug, Clone)]
pub struct Node {
    pub stage: usize,
    pub sample: Option<usize>,
    pub prob: f64,
    pub parent: Option<usize>,
}

/// Enumerates the subtree rooted at `sample` observed at stage `t`.
/// Children of a stage-`s` node on sample `j` carry `w^{s+1}(x^j_s)`; the
/// root's children use the query covariate when the root is stage 0.
pub fn subtree(
    inst: &ProblemInstance,
    models: &WeightModels,
    t: usize,
    sample: Option<usize>,
) -> Vec<Node> {
    let horizon = inst.stages.len() - 1;
    let mut nodes = vec![Node {
        stage: t,
        sample,
        prob: 1.0,
        parent: None,
    }];
    let mut i = 0;
    while i < nodes.len() {
        let (s, smp, p) = (nodes[i].stage, nodes[i].sample, nodes[i].prob);
        if s < horizon {
            let query: &[f64] = match smp {
                Some(j) if s >= 1 => inst.training.covariate(j, s),
                _ => &inst.initial_covariate,
            };
            let w = models.weights(s + 1, query).unwrap();
            for (c, &wc) in w.as_slice().iter().enumerate() {
                if wc > 0.0 {
                    nodes.push(Node {
                        stage: s + 1,
                        sample: Some(c),
                        prob: p * wc,
                        parent: Some(i),
                    });
                }
            }
        }
        i += 1;
    }
    nodes
}

fn op(sense: RowSense) -> ComparisonOp {
    match sense {
        RowSense::Le => ComparisonOp::Le,
        RowSense::Ge => ComparisonOp::Ge,
        RowSense::Eq => ComparisonOp::Eq,
    }
}

/// Optimal value of the deterministic equivalent of the subtree rooted at
/// (`t`, `sample`) with incoming `state`; binaries are enumerated
/// exhaustively and each assignment is an LP solved by `minilp`.
/// `None` when infeasible.
pub fn de_value(
    inst: &ProblemInstance,
    models: &WeightModels,
    t: usize,
    sample: Option<usize>,
    state: &[f64],
) -> Option<f64> {
    let nodes = subtree(inst, models, t, sample);
    let mut offset = Vec::with_capacity(nodes.len());
    let mut total = 0;
    let mut binaries = Vec::new();
    for node in &nodes {
        offset.push(total);
        let st = &inst.stages[node.stage];
        for j in 0..st.n_dec {
            if st.integrality[j] == VarKind::Binary {
                binaries.push(total + j);
            }
        }
        total += st.n_dec;
    }
    assert!(
        binaries.len() <= 16,
        "too many binaries to enumerate: {}",
        binaries.len()
    );

    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << binaries.len()) {
        let mut pb = Problem::new(OptimizationDirection::Minimize);
        let mut vars = Vec::with_capacity(total);
        for (n, node) in nodes.iter().enumerate() {
            let st = &inst.stages[node.stage];
            for j in 0..st.n_dec {
                let g = offset[n] + j;
                let bounds = match binaries.iter().position(|&b| b == g) {
                    Some(bit) => {
                        let v = f64::from((mask >> bit) & 1);
                        (v, v)
                    }
                    None => (st.lower[j], st.upper[j]),
                };
                vars.push(pb.add_var(node.prob * st.cost[j], bounds));
            }
        }
        for (n, node) in nodes.iter().enumerate() {
            let st = &inst.stages[node.stage];
            let y: &[f64] = match node.sample {
                Some(i) if node.stage >= 1 => inst.training.uncertainty(i, node.stage),
                _ => &[],
            };
            for r in 0..st.h.len() {
                let mut row = vec![0.0; total];
                for j in 0..st.n_dec {
                    row[offset[n] + j] += st.w.get(r, j);
                }
                let mut rhs = st.h[r];
                for (k, yk) in y.iter().enumerate() {
                    rhs += st.u.get(r, k) * yk;
                }
                match node.parent {
                    None => {
                        for (k, sk) in state.iter().enumerate() {
                            rhs += st.t.get(r, k) * sk;
                        }
                    }
                    Some(p) => {
                        let pt = &inst.stages[nodes[p].stage];
                        let f = pt
                            .transition
                            .as_ref()
                            .expect("non-terminal stage has a transition");
                        for k in 0..st.t.cols {
                            for j in 0..pt.n_dec {
                                row[offset[p] + j] -= st.t.get(r, k) * f.get(k, j);
                            }
                        }
                    }
                }
                let terms: Vec<_> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(g, c)| (vars[g], *c))
                    .collect();
                pb.add_constraint(terms, op(st.senses[r]), rhs);
            }
        }
        match pb.solve() {
            Ok(sol) => {
                let v = sol.objective();
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
            Err(minilp::Error::Infeasible) => {}
            Err(e) => panic!("reference LP failed: {e}"),
        }
    }
    best
}

/// `min cᵀx` over a problem whose every variable has finite bounds, by
/// enumerating all basic solutions. `None` when infeasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    let mut planes: Vec<(Vec<f64>, f64)> = lp
        .rows
        .iter()
        .cloned()
        .zip(lp.rhs.iter().copied())
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let feasible = |x: &[f64]| {
        let tol = |b: f64| 1e-7 * (1.0 + b.abs());
        (0..n).all(|j| {
            x[j] >= lp.lower[j] - tol(lp.lower[j]) && x[j] <= lp.upper[j] + tol(lp.upper[j])
        }) && lp
            .rows
            .iter()
            .zip(&lp.senses)
            .zip(&lp.rhs)
            .all(|((a, s), &b)| {
                let v: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                match s {
                    RowSense::Le => v <= b + tol(b),
                    RowSense::Ge => v >= b - tol(b),
                    RowSense::Eq => (v - b).abs() <= tol(b),
                }
            })
    };
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    // Iterate over n-subsets of the planes in lexicographic order.
    fn next(pick: &mut [usize], m: usize) -> bool {
        let n = pick.len();
        let mut i = n;
        while i > 0 {
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if feasible(&x) {
                let v: f64 = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
        }
        if !next(&mut pick, planes.len()) {
            break;
        }
    }
    best
}

/// Solves a square system by Gaussian elimination with partial pivoting.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-9 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// `(floor, [(β, g)])`: a lower bound on θ and cuts `θ ≥ β + gᵀ(F z)`.
pub type Future<'a> = (f64, &'a [(f64, Vec<f64>)]);

/// One stage problem solved by `minilp` with its binaries enumerated:
/// `min cᵀz + θ − πᵀs` subject to the stage rows, where `state = Some(s)`
/// pins the incoming state and `None` frees it in `[0, 1]^p`, and `θ` is
/// bounded below by `floor` and every `β + gᵀ(F z)` in `future`.
pub fn stage_value(
    st: &StageTemplate,
    state: Option<&[f64]>,
    pi: &[f64],
    y: &[f64],
    future: Option<Future<'_>>,
) -> Option<f64> {
    let binaries: Vec<usize> = (0..st.n_dec)
        .filter(|&j| st.integrality[j] == VarKind::Binary)
        .collect();
    assert!(binaries.len() <= 16);
    let mut best: Option<f64> = None;
    for mask in 0u32..(1u32 << binaries.len()) {
        let mut pb = Problem::new(OptimizationDirection::Minimize);
        let z: Vec<_> = (0..st.n_dec)
            .map(|j| {
                let bounds = match binaries.iter().position(|&b| b == j) {
                    Some(bit) => {
                        let v = f64::from((mask >> bit) & 1);
                        (v, v)
                    }
                    None => (st.lower[j], st.upper[j]),
                };
                pb.add_var(st.cost[j], bounds)
            })
            .collect();
        let s: Vec<_> = match state {
            Some(_) => Vec::new(),
            None => (0..st.t.cols)
                .map(|k| pb.add_var(-pi[k], (0.0, 1.0)))
                .collect(),
        };
        for r in 0..st.h.len() {
            let mut rhs = st.h[r];
            for (k, yk) in y.iter().enumerate() {
                rhs += st.u.get(r, k) * yk;
            }
            let mut terms: Vec<_> = (0..st.n_dec).map(|j| (z[j], st.w.get(r, j))).collect();
            match state {
                Some(v) => {
                    for (k, sk) in v.iter().enumerate() {
                        rhs += st.t.get(r, k) * sk;
                    }
                }
                None => terms.extend(s.iter().enumerate().map(|(k, &sv)| (sv, -st.t.get(r, k)))),
            }
            pb.add_constraint(terms, op(st.senses[r]), rhs);
        }
        if let Some((floor, cuts)) = future {
            let theta = pb.add_var(1.0, (floor, f64::INFINITY));
            let f = st.transition.as_ref().expect("a future needs a transition");
            for (beta, g) in cuts {
                let mut terms = vec![(theta, 1.0)];
                for j in 0..st.n_dec {
                    let c: f64 = (0..f.rows).map(|k| g[k] * f.get(k, j)).sum();
                    terms.push((z[j], -c));
                }
                pb.add_constraint(terms, ComparisonOp::Ge, *beta);
            }
        }
        match pb.solve() {
            Ok(sol) => {
                let v = sol.objective();
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
            Err(minilp::Error::Infeasible) => {}
            Err(e) => panic!("reference LP failed: {e}"),
        }
    }
    best
}

/// `max_π L(π) + πᵀ s^j` for a one-bit state by grid search over `[−bound, bound]`.
pub fn lagrangian_grid(
    st: &StageTemplate,
    trial: f64,
    y: &[f64],
    bound: f64,
    points: usize,
) -> f64 {
    (0..points)
        .map(|g| {
            let pi = -bound + 2.0 * bound * g as f64 / (points - 1) as f64;
            stage_value(st, None, &[pi], y, None).expect("relaxed stage feasible") + pi * trial
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
