use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linopt::stage::{best_piece, FutureValue, Support};
use crate::matrix::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutFamily {
    Benders,
    Integer,
    Lagrangian,
}

impl CutFamily {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "benders" => Some(CutFamily::Benders),
            "integer" => Some(CutFamily::Integer),
            "lagrangian" => Some(CutFamily::Lagrangian),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CutOrigin {
    pub iteration: usize,
    pub stage: usize,
    pub trial: usize,
}

/// Affine minorant `β + πᵀ s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub beta: f64,
    pub pi: Vec<f64>,
    pub family: CutFamily,
    pub origin: CutOrigin,
}

impl Cut {
    pub fn eval(&self, s: &[f64]) -> f64 {
        self.beta + dot(&self.pi, s)
    }
}

/// Which covariate a stage's pooled cuts are conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovKey {
    /// The query covariate `x_0` of the instance.
    Root,
    /// Training sample `i`'s covariate.
    Sample(usize),
    /// Covariate-free weights: one pool for the whole stage.
    Shared,
}

/// Cut pools for stages `1..=T`.
///
/// `pooled[(t, key)]` are weighted aggregate cuts on
/// `Σᵢ w^t_i(x_key) Q̂_t(s; y^i, x^i)`; `scenario[t-1][i]` are the per-sample
/// cuts on `Q̂_t(s; y^i, x^i)` from which every aggregate was formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoolFile", from = "PoolFile")]
pub struct CutPool {
    pub lower_bounds: Vec<f64>,
    pub state_dims: Vec<usize>,
    pub pooled: BTreeMap<(usize, CovKey), Vec<Cut>>,
    pub scenario: Vec<Vec<Vec<Cut>>>,
}

#[derive(Serialize, Deserialize)]
struct PoolEntry {
    stage: usize,
    key: CovKey,
    cuts: Vec<Cut>,
}

#[derive(Serialize, Deserialize)]
struct PoolFile {
    lower_bounds: Vec<f64>,
    state_dims: Vec<usize>,
    pooled: Vec<PoolEntry>,
    scenario: Vec<Vec<Vec<Cut>>>,
}

impl From<CutPool> for PoolFile {
    fn from(p: CutPool) -> Self {
        PoolFile {
            lower_bounds: p.lower_bounds,
            state_dims: p.state_dims,
            pooled: p
                .pooled
                .into_iter()
                .map(|((stage, key), cuts)| PoolEntry { stage, key, cuts })
                .collect(),
            scenario: p.scenario,
        }
    }
}

impl From<PoolFile> for CutPool {
    fn from(f: PoolFile) -> Self {
        CutPool {
            lower_bounds: f.lower_bounds,
            state_dims: f.state_dims,
            pooled: f
                .pooled
                .into_iter()
                .map(|e| ((e.stage, e.key), e.cuts))
                .collect(),
            scenario: f.scenario,
        }
    }
}

impl CutPool {
    /// Empty pools. `lower_bounds[t-1]` and `state_dims[t-1]` describe stage `t`.
    pub fn new(lower_bounds: Vec<f64>, state_dims: Vec<usize>, n_samples: usize) -> Self {
        let horizon = lower_bounds.len();
        CutPool {
            lower_bounds,
            state_dims,
            pooled: BTreeMap::new(),
            scenario: vec![vec![Vec::new(); n_samples]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.lower_bounds.len()
    }

    pub fn lower_bound(&self, t: usize) -> f64 {
        self.lower_bounds[t - 1]
    }

    pub fn pooled_cuts(&self, t: usize, key: CovKey) -> &[Cut] {
        self.pooled.get(&(t, key)).map_or(&[], Vec::as_slice)
    }

    pub fn scenario_cuts(&self, t: usize, i: usize) -> &[Cut] {
        &self.scenario[t - 1][i]
    }

    pub fn add_pooled(&mut self, t: usize, key: CovKey, cut: Cut) {
        self.pooled.entry((t, key)).or_default().push(cut);
    }

    pub fn add_scenario(&mut self, t: usize, i: usize, cut: Cut) {
        self.scenario[t - 1][i].push(cut);
    }

    pub fn n_cuts(&self) -> usize {
        self.pooled.values().map(Vec::len).sum::<usize>()
            + self.scenario.iter().flatten().map(Vec::len).sum::<usize>()
    }

    /// `ψ_t(s, x_key) = max(L_t, max over pooled cuts)`.
    pub fn psi(&self, t: usize, key: CovKey, s: &[f64]) -> f64 {
        self.pooled_cuts(t, key)
            .iter()
            .map(|c| c.eval(s))
            .fold(self.lower_bound(t), f64::max)
    }

    /// Future-value view for stage `t`: the pooled cuts at `key` (if any),
    /// and the weighted per-sample cuts under `weights` (if given).
    pub fn future<'a>(
        &'a self,
        t: usize,
        key: Option<CovKey>,
        weights: Option<&'a [(usize, f64)]>,
    ) -> PoolFuture<'a> {
        PoolFuture {
            floor: self.lower_bound(t),
            pooled: key.map_or(&[], |k| self.pooled_cuts(t, k)),
            scenario: weights.map(|w| (w, self.scenario[t - 1].as_slice())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Sample weights paired with each sample's scenario cuts.
type ScenarioPieces<'a> = (&'a [(usize, f64)], &'a [Vec<Cut>]);

/// `max(floor, pooled pieces, Σᵢ wᵢ · max_k scenario_cut_{ik})`.
pub struct PoolFuture<'a> {
    floor: f64,
    pooled: &'a [Cut],
    scenario: Option<ScenarioPieces<'a>>,
}

/// Identifiers of weighted-sum pieces are kept apart from pooled indices.
const SUM_TAG: usize = 1 << 63;

impl PoolFuture<'_> {
    fn weighted_sum(&self, state: &[f64]) -> Option<Support> {
        let (weights, scenario) = self.scenario?;
        let mut beta = 0.0;
        let mut pi = vec![0.0; state.len()];
        let mut hasher = DefaultHasher::new();
        for &(i, w) in weights {
            // Each per-sample value is also bounded below by the floor.
            match best_piece(scenario[i].iter().map(|c| (c.beta, c.pi.as_slice())), state) {
                Some(sup) if sup.value > self.floor => {
                    (i, sup.id).hash(&mut hasher);
                    beta += w * sup.beta;
                    for (p, q) in pi.iter_mut().zip(&sup.pi) {
                        *p += w * q;
                    }
                }
                _ => {
                    (i, usize::MAX).hash(&mut hasher);
                    beta += w * self.floor;
                }
            }
        }
        let value = beta + dot(&pi, state);
        Some(Support {
            id: (hasher.finish() as usize) | SUM_TAG,
            value,
            beta,
            pi,
        })
    }
}

impl FutureValue for PoolFuture<'_> {
    fn floor(&self) -> f64 {
        self.floor
    }

    fn support(&self, state: &[f64]) -> Option<Support> {
        let a = best_piece(self.pooled.iter().map(|c| (c.beta, c.pi.as_slice())), state);
        let b = self.weighted_sum(state);
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.value > a.value { b } else { a }),
            (a, b) => a.or(b),
        }
    }
}
