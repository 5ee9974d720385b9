//! Synthetic covariate and demand paths.
//!
//! Covariates follow a `d`-dimensional AR(1) process
//! `x_t = ρ x_{t−1} + w_t`, `w_t ~ N(0, I)`, started from its stationary law
//! `N(0, I / (1 − ρ²))`. Demand follows the factor model
//! `y_t = max(0, 50 + 12 a_tᵀ(x_{t−1} + 0.25 φ_t) + 5 b_tᵀ x_{t−1} θ_t)`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::weights::TrainingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// `T`: demands `y_1..y_T` are generated, covariates `x_0..x_{T−1}`.
    pub horizon: usize,
    pub n_samples: usize,
    pub dim: usize,
    pub ar_coeff: f64,
    /// Scale of the AR(1) innovations; zero gives deterministic decay.
    pub innovation_scale: f64,
    /// Start every path here instead of drawing from the stationary law.
    pub initial: Option<Vec<f64>>,
    pub intercept: f64,
    pub loading_scale: f64,
    pub phi_scale: f64,
    pub theta_scale: f64,
    pub demand_cap: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            horizon: 11,
            n_samples: 100,
            dim: 3,
            ar_coeff: 0.7,
            innovation_scale: 1.0,
            initial: None,
            intercept: 50.0,
            loading_scale: 12.0,
            phi_scale: 0.25,
            theta_scale: 5.0,
            demand_cap: f64::INFINITY,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::input("the number of samples must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::input("the horizon must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::input("the covariate dimension must be at least 1"));
        }
        if let Some(x0) = &self.initial {
            if x0.len() != self.dim {
                return Err(Error::input("initial covariate has the wrong dimension"));
            }
        }
        if !(self.demand_cap > 0.0) {
            return Err(Error::input("the demand cap must be positive"));
        }
        Ok(())
    }
}

/// Factor loadings `a_t`, `b_t` for `t = 1..=T`, shared by every path of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loadings {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Loadings {
    /// Seeded permutations of `(0.8, 1, 1)` and `(−1, 1, 0)` per stage.
    pub fn permuted(horizon: usize, seed: u64) -> Self {
        let mut a = Vec::with_capacity(horizon);
        let mut b = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let mut r = rng::stream(seed, &[tags::LOADINGS, t as u64]);
            let mut at = vec![0.8, 1.0, 1.0];
            let mut bt = vec![-1.0, 1.0, 0.0];
            at.shuffle(&mut r);
            bt.shuffle(&mut r);
            a.push(at);
            b.push(bt);
        }
        Loadings { a, b }
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    /// `(a_t, b_t)` for `t >= 1`.
    pub fn at(&self, t: usize) -> (&[f64], &[f64]) {
        (&self.a[t - 1], &self.b[t - 1])
    }
}

/// `n` paths of covariates `x[i][t]` (`t in 0..T`) and demands `y[i][t − 1]` (`t in 1..=T`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub x: Vec<Vec<Vec<f64>>>,
    pub y: Vec<Vec<f64>>,
}

impl Paths {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    pub fn to_training(&self) -> Result<TrainingSet> {
        TrainingSet::new(
            self.x.clone(),
            self.y
                .iter()
                .map(|p| p.iter().map(|&v| vec![v]).collect())
                .collect(),
        )
    }
}

fn normal_vec(r: &mut rng::Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

/// Covariate paths; path `i` uses its own stream, so paths are independent
/// of each other and of the number generated.
pub fn generate_covariates(config: &GeneratorConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    config.check()?;
    let rho = config.ar_coeff;
    let sd0 = (1.0 - rho * rho).sqrt().recip();
    Ok((0..config.n_samples)
        .map(|i| {
            let mut r = rng::stream(config.seed, &[tags::COVARIATES, i as u64]);
            let x0 = match &config.initial {
                Some(v) => v.clone(),
                None => normal_vec(&mut r, config.dim)
                    .into_iter()
                    .map(|v| v * sd0)
                    .collect(),
            };
            let mut path = Vec::with_capacity(config.horizon);
            path.push(x0);
            for _ in 1..config.horizon {
                let prev = path.last().expect("nonempty");
                let w = normal_vec(&mut r, config.dim);
                let next = prev
                    .iter()
                    .zip(&w)
                    .map(|(p, e)| rho * p + config.innovation_scale * e)
                    .collect();
                path.push(next);
            }
            path
        })
        .collect())
}

/// One demand draw given `x_{t−1}` and the stage loadings.
pub fn demand(
    config: &GeneratorConfig,
    a: &[f64],
    b: &[f64],
    x_prev: &[f64],
    phi: &[f64],
    theta: f64,
) -> f64 {
    let mut lin = 0.0;
    let mut inter = 0.0;
    for k in 0..x_prev.len() {
        lin += a[k] * (x_prev[k] + config.phi_scale * phi[k]);
        inter += b[k] * x_prev[k];
    }
    (config.intercept + config.loading_scale * lin + config.theta_scale * inter * theta)
        .max(0.0)
        .min(config.demand_cap)
}

/// Demand paths for the given covariate paths.
pub fn generate_demand(
    covariates: &[Vec<Vec<f64>>],
    loadings: &Loadings,
    config: &GeneratorConfig,
) -> Result<Vec<Vec<f64>>> {
    config.check()?;
    if loadings.horizon() < config.horizon {
        return Err(Error::input("loadings cover fewer stages than the horizon"));
    }
    Ok(covariates
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let mut r = rng::stream(config.seed, &[tags::DEMAND, i as u64]);
            (1..=config.horizon)
                .map(|t| {
                    let phi = normal_vec(&mut r, config.dim);
                    let theta: f64 = r.sample(StandardNormal);
                    let (a, b) = loadings.at(t);
                    demand(config, a, b, &path[t - 1], &phi, theta)
                })
                .collect()
        })
        .collect())
}

pub fn generate_paths(config: &GeneratorConfig, loadings: &Loadings) -> Result<Paths> {
    let x = generate_covariates(config)?;
    let y = generate_demand(&x, loadings, config)?;
    Ok(Paths { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_decays_geometrically() {
        let cfg = GeneratorConfig {
            horizon: 5,
            n_samples: 1,
            innovation_scale: 0.0,
            initial: Some(vec![1.0, -2.0, 0.5]),
            ..GeneratorConfig::default()
        };
        let x = generate_covariates(&cfg).unwrap();
        for (t, xt) in x[0].iter().enumerate() {
            let f = 0.7f64.powi(t as i32);
            assert!((xt[0] - f).abs() < 1e-12 && (xt[1] + 2.0 * f).abs() < 1e-12);
        }
    }

    #[test]
    fn demand_examples() {
        let cfg = GeneratorConfig::default();
        let b = [-1.0, 1.0, 0.0];
        assert_eq!(
            demand(&cfg, &[0.8, 1.0, 1.0], &b, &[0.0; 3], &[0.0; 3], 0.7),
            50.0
        );
        let y = demand(&cfg, &[0.8, 1.0, 1.0], &b, &[1.0; 3], &[0.0; 3], 0.0);
        assert!((y - 83.6).abs() < 1e-12);
        let capped = GeneratorConfig {
            demand_cap: 200.0,
            ..cfg
        };
        assert_eq!(
            demand(&capped, &[1.0; 3], &b, &[10.0; 3], &[0.0; 3], 0.0),
            200.0
        );
    }

    #[test]
    fn loadings_are_permutations() {
        let l = Loadings::permuted(12, 3);
        for t in 1..=12 {
            let (a, b) = l.at(t);
            let mut a = a.to_vec();
            let mut b = b.to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, vec![0.8, 1.0, 1.0]);
            assert_eq!(b, vec![-1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn rejects_empty() {
        let cfg = GeneratorConfig {
            n_samples: 0,
            ..GeneratorConfig::default()
        };
        assert!(generate_covariates(&cfg).is_err());
    }
}
