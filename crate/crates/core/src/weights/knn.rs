use serde::{Deserialize, Serialize};

use super::WeightVector;
use crate::error::{Error, Result};

/// Euclidean k-nearest-neighbour weights over raw covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
}

impl KnnModel {
    pub fn new(points: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("kNN needs at least one training point"));
        }
        if k == 0 || k > points.len() {
            return Err(Error::input(format!(
                "k = {k} outside 1..={}",
                points.len()
            )));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::input("kNN training points have mixed dimensions"));
        }
        Ok(KnnModel { k, points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Indices of the `k` nearest points, ties going to the lower index.
    pub fn neighbours(&self, query: &[f64]) -> Result<Vec<usize>> {
        if query.len() != self.dim() {
            return Err(Error::input(format!(
                "query dimension {} != covariate dimension {}",
                query.len(),
                self.dim()
            )));
        }
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < order.len() {
            order.select_nth_unstable_by(self.k - 1, cmp);
            order.truncate(self.k);
        }
        order.sort_by(cmp);
        Ok(order.into_iter().map(|(_, i)| i).collect())
    }

    pub fn weights(&self, query: &[f64]) -> Result<WeightVector> {
        let mut w = vec![0.0; self.points.len()];
        let share = 1.0 / self.k as f64;
        for i in self.neighbours(query)? {
            w[i] = share;
        }
        Ok(WeightVector::from_raw(w))
    }
}

/// `knn_weights` as a free function over an explicit covariate list.
pub fn knn_weights(query: &[f64], covariates: &[Vec<f64>], k: usize) -> Result<WeightVector> {
    KnnModel::new(covariates.to_vec(), k)?.weights(query)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn unique_nearest() {
        let w = knn_weights(&[0.1], &pts(&[0.0, 1.0, 2.0]), 1).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn k_equals_n_is_uniform() {
        let w = knn_weights(&[17.0], &pts(&[0.0, 1.0, 2.0, 5.0]), 4).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let w = knn_weights(&[0.5], &pts(&[0.0, 1.0]), 1).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(knn_weights(&[0.0, 1.0], &pts(&[0.0]), 1).is_err());
        assert!(knn_weights(&[0.0], &pts(&[0.0]), 0).is_err());
        assert!(knn_weights(&[0.0], &pts(&[0.0]), 2).is_err());
    }
}
