use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_honest, SplitParams, TreeModel};
use super::WeightVector;
use crate::error::{Error, Result};
use crate::rng;

/// Subsampled forest of honest trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub subsample_indices: Vec<Vec<usize>>,
    pub rng_seed: u64,
    pub n_samples: usize,
}

/// Fits `n_trees` trees, each on a without-replacement subsample of size `subsample`.
///
/// Tree `b` draws from its own seed stream, so the result does not depend on
/// how the fits are scheduled across threads.
pub fn fit_forest(
    points: &[Vec<f64>],
    n_trees: usize,
    subsample: usize,
    params: SplitParams,
    seed: u64,
) -> Result<ForestModel> {
    let n = points.len();
    if n_trees == 0 {
        return Err(Error::input("forest needs at least one tree"));
    }
    if subsample == 0 || subsample > n {
        return Err(Error::input(format!(
            "subsample size {subsample} outside 1..={n}"
        )));
    }
    let fitted: Vec<(Vec<usize>, TreeModel)> = (0..n_trees)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[rng::tags::FOREST_SUBSAMPLE, b as u64]);
            let mut idx = sample(&mut r, n, subsample).into_vec();
            idx.sort_unstable();
            let tree_seed = rng::derive_seed(seed, &[rng::tags::TREE, b as u64]);
            let tree = fit_honest(points, &idx, params, tree_seed)?;
            Ok((idx, tree))
        })
        .collect::<Result<_>>()?;
    let (subsample_indices, trees) = fitted.into_iter().unzip();
    Ok(ForestModel {
        trees,
        subsample_indices,
        rng_seed: seed,
        n_samples: n,
    })
}

impl ForestModel {
    pub fn weights(&self, query: &[f64]) -> Result<WeightVector> {
        let mut w = vec![0.0; self.n_samples];
        let scale = 1.0 / self.trees.len() as f64;
        for t in &self.trees {
            t.accumulate(query, scale, &mut w)?;
        }
        Ok(WeightVector::from_raw(w))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tree::TreeNode;
    use super::*;

    fn leaf_tree(members: Vec<usize>, n: usize) -> TreeModel {
        TreeModel {
            nodes: vec![TreeNode::Leaf { leaf: 0 }],
            leaf_members: vec![members],
            params: SplitParams::new(1),
            n_samples: n,
            dim: 1,
        }
    }

    #[test]
    fn two_disjoint_leaves_average() {
        let f = ForestModel {
            trees: vec![leaf_tree(vec![0], 2), leaf_tree(vec![1], 2)],
            subsample_indices: vec![vec![0], vec![1]],
            rng_seed: 0,
            n_samples: 2,
        };
        assert_eq!(f.weights(&[0.0]).unwrap().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn single_tree_forest_matches_tree() {
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.618) % 1.0]).collect();
        let f = fit_forest(&pts, 1, 20, SplitParams::new(3), 5).unwrap();
        let q = [0.42];
        assert_eq!(f.weights(&q).unwrap(), f.trees[0].weights(&q).unwrap());
        let est = &f.subsample_indices[0];
        f.trees[0].audit(&pts, est).unwrap();
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let pts: Vec<Vec<f64>> = (0..25)
            .map(|i| vec![(i as f64 * 0.3) % 1.0, i as f64])
            .collect();
        let a = fit_forest(&pts, 8, 15, SplitParams::new(2), 11).unwrap();
        let b = fit_forest(&pts, 8, 15, SplitParams::new(2), 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(ForestModel::from_json(&a.to_json().unwrap()).unwrap(), a);
        for (t, idx) in a.trees.iter().zip(&a.subsample_indices) {
            let members: Vec<usize> = t.leaf_members.iter().flatten().copied().collect();
            assert!(members.iter().all(|m| idx.contains(m)));
        }
    }
}
