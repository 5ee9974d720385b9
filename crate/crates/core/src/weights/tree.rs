//! Honest, regular, random-split regression trees.
//!
//! Splits only ever look at covariates. A node holding `n ≥ 2k` estimation
//! samples is split on a feature picked uniformly with probability `π`
//! (round-robin by depth otherwise), at the admissible cut closest to the
//! median of the node's split samples. A cut is admissible when both sides
//! keep at least `max(k, ⌈λ·n⌉)` estimation samples, which makes every
//! leaf hold between `k` and `2k − 1` of them.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::WeightVector;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Honesty {
    /// Split and estimation samples coincide; splits ignore responses entirely.
    IgnoreResponse,
    /// A seeded half of the samples places the splits, the other half fills the leaves.
    HalfSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    /// Minimum leaf size.
    pub k: usize,
    /// Regularity fraction.
    pub lambda: f64,
    /// Random-split probability floor.
    pub pi: f64,
    pub honesty: Honesty,
}

impl SplitParams {
    pub fn new(k: usize) -> Self {
        SplitParams {
            k,
            lambda: 0.2,
            pi: 1.0,
            honesty: Honesty::IgnoreResponse,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::input("leaf size k must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 0.5) {
            return Err(Error::input(format!(
                "lambda = {} outside (0, 0.5]",
                self.lambda
            )));
        }
        if !(self.pi > 0.0 && self.pi <= 1.0) {
            return Err(Error::input(format!("pi = {} outside (0, 1]", self.pi)));
        }
        Ok(())
    }

    /// Minimum estimation samples each child must keep when splitting `n`.
    pub fn min_side(&self, n: usize) -> usize {
        self.k.max((self.lambda * n as f64 - 1e-12).ceil() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
    /// Estimation-sample indices per leaf, ascending.
    pub leaf_members: Vec<Vec<usize>>,
    pub params: SplitParams,
    /// Size of the global sample index space the weights range over.
    pub n_samples: usize,
    pub dim: usize,
}

struct Pending {
    node: usize,
    split: Vec<usize>,
    est: Vec<usize>,
    depth: usize,
}

/// Sorted `(value, index)` pairs of `idx` on `feature`.
fn sorted_on(points: &[Vec<f64>], idx: &[usize], feature: usize) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = idx.iter().map(|&i| (points[i][feature], i)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

fn median(sorted: &[(f64, usize)]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2].0
    } else {
        0.5 * (sorted[n / 2 - 1].0 + sorted[n / 2].0)
    }
}

/// The admissible threshold on `feature` closest to the split-sample median, if any.
fn choose_threshold(
    points: &[Vec<f64>],
    split: &[usize],
    est: &[usize],
    feature: usize,
    params: &SplitParams,
) -> Option<f64> {
    let n = est.len();
    let lo = params.min_side(n);
    if 2 * lo > n {
        return None;
    }
    let ev = sorted_on(points, est, feature);
    let target = if split.is_empty() {
        median(&ev)
    } else {
        median(&sorted_on(points, split, feature))
    };
    let mut best: Option<(f64, f64)> = None;
    for m in lo..=n - lo {
        let (a, b) = (ev[m - 1].0, ev[m].0);
        if a < b {
            let mid = 0.5 * (a + b);
            // `a < mid <= b` can fail to hold strictly for adjacent floats.
            let thr = if mid < b { mid } else { a };
            let dist = (thr - target).abs();
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((thr, dist));
            }
        }
    }
    best.map(|(t, _)| t)
}

/// Fits one tree. `split_idx` places the cuts, `est_idx` populates the leaves;
/// both index into `points`. Responses are never an input.
pub fn fit_tree(
    points: &[Vec<f64>],
    split_idx: &[usize],
    est_idx: &[usize],
    params: SplitParams,
    seed: u64,
) -> Result<TreeModel> {
    params.validate()?;
    if est_idx.is_empty() {
        return Err(Error::input("tree needs a nonempty estimation set"));
    }
    let dim = points.first().map_or(0, Vec::len);
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::input("tree covariates have mixed dimensions"));
    }
    if let Some(&bad) = split_idx
        .iter()
        .chain(est_idx)
        .find(|&&i| i >= points.len())
    {
        return Err(Error::input(format!("sample index {bad} out of range")));
    }
    let mut rng = rng::stream(seed, &[rng::tags::TREE]);
    let mut nodes = vec![TreeNode::Leaf { leaf: usize::MAX }];
    let mut leaf_members = Vec::new();
    let mut stack = vec![Pending {
        node: 0,
        split: split_idx.to_vec(),
        est: est_idx.to_vec(),
        depth: 0,
    }];
    while let Some(p) = stack.pop() {
        let mut chosen = None;
        if p.est.len() >= 2 * params.k && dim > 0 {
            // Draw even when no split will be admissible so the stream does not depend on data ties.
            let uniform = rng.random::<f64>() < params.pi;
            let draw = rng.random_range(0..dim);
            let first = if uniform { draw } else { p.depth % dim };
            for off in 0..dim {
                let f = (first + off) % dim;
                if let Some(thr) = choose_threshold(points, &p.split, &p.est, f, &params) {
                    chosen = Some((f, thr));
                    break;
                }
            }
        }
        match chosen {
            None => {
                let mut members = p.est;
                members.sort_unstable();
                nodes[p.node] = TreeNode::Leaf {
                    leaf: leaf_members.len(),
                };
                leaf_members.push(members);
            }
            Some((feature, threshold)) => {
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf { leaf: usize::MAX });
                nodes.push(TreeNode::Leaf { leaf: usize::MAX });
                nodes[p.node] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                let part = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) {
                    idx.iter().partition(|&&i| points[i][feature] <= threshold)
                };
                let (sl, sr) = part(&p.split);
                let (el, er) = part(&p.est);
                // Right pushed first so the left subtree is numbered first.
                stack.push(Pending {
                    node: right,
                    split: sr,
                    est: er,
                    depth: p.depth + 1,
                });
                stack.push(Pending {
                    node: left,
                    split: sl,
                    est: el,
                    depth: p.depth + 1,
                });
            }
        }
    }
    Ok(TreeModel {
        nodes,
        leaf_members,
        params,
        n_samples: points.len(),
        dim,
    })
}

/// Splits `idx` into (split half, estimation half) with a seeded shuffle.
pub fn honest_halves(idx: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut shuffled = idx.to_vec();
    shuffled.shuffle(&mut rng::stream(seed, &[rng::tags::HONEST_HALVES]));
    let half = shuffled.len() / 2;
    let (a, b) = shuffled.split_at(half);
    (a.to_vec(), b.to_vec())
}

/// Fits a tree on `idx` honoring `params.honesty`.
pub fn fit_honest(
    points: &[Vec<f64>],
    idx: &[usize],
    params: SplitParams,
    seed: u64,
) -> Result<TreeModel> {
    match params.honesty {
        Honesty::IgnoreResponse => fit_tree(points, idx, idx, params, seed),
        Honesty::HalfSplit if idx.len() >= 2 => {
            let (split, est) = honest_halves(idx, seed);
            fit_tree(points, &split, &est, params, seed)
        }
        Honesty::HalfSplit => fit_tree(points, &[], idx, params, seed),
    }
}

impl TreeModel {
    /// Leaf id containing `query`.
    pub fn leaf_of(&self, query: &[f64]) -> Result<usize> {
        if query.len() != self.dim {
            return Err(Error::input(format!(
                "query dimension {} != tree dimension {}",
                query.len(),
                self.dim
            )));
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { leaf } => return Ok(*leaf),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if query[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn weights(&self, query: &[f64]) -> Result<WeightVector> {
        let mut w = vec![0.0; self.n_samples];
        self.accumulate(query, 1.0, &mut w)?;
        Ok(WeightVector::from_raw(w))
    }

    /// Adds `scale / |R(query)|` to each member of the query's leaf.
    pub(crate) fn accumulate(&self, query: &[f64], scale: f64, w: &mut [f64]) -> Result<()> {
        let members = &self.leaf_members[self.leaf_of(query)?];
        let share = scale / members.len() as f64;
        for &i in members {
            w[i] += share;
        }
        Ok(())
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_members.len()
    }

    /// Feature used at the root, if the root splits.
    pub fn root_feature(&self) -> Option<usize> {
        match self.nodes[0] {
            TreeNode::Split { feature, .. } => Some(feature),
            TreeNode::Leaf { .. } => None,
        }
    }

    /// Checks every structural invariant against `points`: leaf band, λ-rule
    /// at each split, leaves partitioning `est_idx`, and members routed to their own leaf.
    pub fn audit(&self, points: &[Vec<f64>], est_idx: &[usize]) -> std::result::Result<(), String> {
        let k = self.params.k;
        let total = est_idx.len();
        if total >= k {
            for (l, m) in self.leaf_members.iter().enumerate() {
                if m.len() < k || m.len() > 2 * k - 1 {
                    return Err(format!(
                        "leaf {l} holds {} samples, outside [{k}, {}]",
                        m.len(),
                        2 * k - 1
                    ));
                }
            }
        } else if self.leaf_members.len() != 1 {
            return Err("estimation set smaller than k must give a single leaf".into());
        }
        let mut all: Vec<usize> = self.leaf_members.iter().flatten().copied().collect();
        all.sort_unstable();
        let mut expected = est_idx.to_vec();
        expected.sort_unstable();
        if all != expected {
            return Err("leaf members do not partition the estimation set".into());
        }
        for (l, m) in self.leaf_members.iter().enumerate() {
            for &i in m {
                if self.leaf_of(&points[i]).map_err(|e| e.to_string())? != l {
                    return Err(format!("sample {i} routed away from its leaf {l}"));
                }
            }
        }
        // λ-rule: count estimation samples beneath each split.
        fn count(t: &TreeModel, node: usize) -> usize {
            match &t.nodes[node] {
                TreeNode::Leaf { leaf } => t.leaf_members[*leaf].len(),
                TreeNode::Split { left, right, .. } => count(t, *left) + count(t, *right),
            }
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, .. } = node {
                let (l, r) = (count(self, *left), count(self, *right));
                let need = self.params.min_side(l + r);
                if l < need || r < need {
                    return Err(format!("split {id} leaves {l}/{r}, needs {need} per side"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![i as f64 * 0.37 % 1.0, (i * 7 % 11) as f64])
            .collect()
    }

    #[test]
    fn too_few_for_two_leaves_gives_single_leaf() {
        let pts = line(3);
        let idx = [0, 1, 2];
        let t = fit_tree(&pts, &idx, &idx, SplitParams::new(2), 1).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.leaf_members[0], vec![0, 1, 2]);
    }

    #[test]
    fn k_larger_than_set_is_single_leaf() {
        let pts = line(3);
        let t = fit_tree(&pts, &[0, 1, 2], &[0, 1, 2], SplitParams::new(5), 1).unwrap();
        assert_eq!(t.n_leaves(), 1);
        let w = t.weights(&[0.3, 2.0]).unwrap();
        assert!(w.as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn four_points_split_once_into_pairs() {
        let pts = vec![vec![0.1], vec![0.9], vec![0.4], vec![0.6]];
        let idx = [0, 1, 2, 3];
        let params = SplitParams {
            lambda: 0.5,
            ..SplitParams::new(2)
        };
        let t = fit_tree(&pts, &idx, &idx, params, 3).unwrap();
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.leaf_members, vec![vec![0, 2], vec![1, 3]]);
        t.audit(&pts, &idx).unwrap();
    }

    #[test]
    fn same_seed_same_partition() {
        let pts = line(40);
        let idx: Vec<usize> = (0..40).collect();
        let a = fit_tree(&pts, &idx, &idx, SplitParams::new(3), 9).unwrap();
        let b = fit_tree(&pts, &idx, &idx, SplitParams::new(3), 9).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        a.audit(&pts, &idx).unwrap();
    }

    #[test]
    fn leaf_weights_follow_membership() {
        let pts = line(8);
        let t = TreeModel {
            nodes: vec![TreeNode::Leaf { leaf: 0 }],
            leaf_members: vec![vec![2, 5, 7]],
            params: SplitParams::new(2),
            n_samples: 8,
            dim: 2,
        };
        let w = t.weights(&pts[0]).unwrap();
        for (i, &v) in w.as_slice().iter().enumerate() {
            let expect = if [2, 5, 7].contains(&i) {
                1.0 / 3.0
            } else {
                0.0
            };
            assert_eq!(v, expect);
        }
    }

    #[test]
    fn half_split_uses_disjoint_halves() {
        let pts = line(30);
        let idx: Vec<usize> = (0..30).collect();
        let params = SplitParams {
            honesty: Honesty::HalfSplit,
            ..SplitParams::new(3)
        };
        let t = fit_honest(&pts, &idx, params, 4).unwrap();
        let (_, est) = honest_halves(&idx, 4);
        t.audit(&pts, &est).unwrap();
        let w = t.weights(&pts[0]).unwrap();
        let (split, _) = honest_halves(&idx, 4);
        assert!(split.iter().all(|&i| w.as_slice()[i] == 0.0));
    }

    #[test]
    fn rejects_bad_params() {
        let pts = line(4);
        let mut p = SplitParams::new(1);
        p.lambda = 0.7;
        assert!(fit_tree(&pts, &[0], &[0], p, 0).is_err());
        p.lambda = 0.2;
        p.pi = 0.0;
        assert!(fit_tree(&pts, &[0], &[0], p, 0).is_err());
        assert!(fit_tree(&pts, &[], &[], SplitParams::new(1), 0).is_err());
    }
}
