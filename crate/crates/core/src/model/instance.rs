use std::fmt;

use serde::{Deserialize, Serialize};

use super::StageTemplate;
use crate::error::{Error, Result};
use crate::linopt::VarKind;
use crate::weights::{TrainingSet, WeightModels, WeightSpec};

/// A complete data-driven multistage problem: `T + 1` stage templates, the
/// initial state and covariate, training paths and the weight learner(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub stages: Vec<StageTemplate>,
    pub initial_state: Vec<f64>,
    pub initial_covariate: Vec<f64>,
    pub training: TrainingSet,
    /// One spec for all stages, or one per stage `1..=T`.
    pub weight_specs: Vec<WeightSpec>,
    /// Lower bounds `L_t` on the cost-to-go of stages `1..=T`.
    #[serde(default)]
    pub lower_bounds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    Dimension,
    Horizon,
    UnboundedBelow,
    EmptyStage,
    Bounds,
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub stage: Option<usize>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(t) => write!(f, "stage {t}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl ProblemInstance {
    /// `T`, the index of the last stage.
    pub fn horizon(&self) -> usize {
        self.stages.len().saturating_sub(1)
    }

    pub fn n_samples(&self) -> usize {
        self.training.n_samples()
    }

    pub fn has_binaries(&self) -> bool {
        self.stages.iter().any(StageTemplate::has_binaries)
    }

    pub fn fit_weights(&self, seed: u64) -> Result<WeightModels> {
        WeightModels::fit(&self.training, &self.weight_specs, seed)
    }

    /// `L_t` for `t in 1..=T`: explicit values, or the sum of the per-stage
    /// box minima of the remaining costs when that sum is finite.
    pub fn lower_bound(&self, t: usize) -> Result<f64> {
        if let Some(lb) = &self.lower_bounds {
            return lb
                .get(t - 1)
                .copied()
                .ok_or_else(|| Error::input(format!("no lower bound given for stage {t}")));
        }
        let v: f64 = self.stages[t..]
            .iter()
            .map(StageTemplate::box_minimum)
            .sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::input(format!(
                "stage costs are unbounded below over the variable box from stage {t}; supply lower_bounds explicitly"
            )))
        }
    }

    /// All findings; empty iff the instance is well formed.
    pub fn validate(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut push = |kind, stage, message: String| {
            out.push(Finding {
                kind,
                stage,
                message,
            })
        };

        if self.stages.is_empty() {
            push(
                FindingKind::EmptyStage,
                None,
                "instance has no stages".into(),
            );
            return out;
        }
        let horizon = self.horizon();
        if self.training.horizon() != horizon {
            push(
                FindingKind::Horizon,
                None,
                format!(
                    "{} stages imply T = {horizon} but training data has horizon {}",
                    self.stages.len(),
                    self.training.horizon()
                ),
            );
        }
        if self.weight_specs.len() != 1 && self.weight_specs.len() != horizon {
            push(
                FindingKind::Weights,
                None,
                format!(
                    "need 1 or {horizon} weight specs, got {}",
                    self.weight_specs.len()
                ),
            );
        }
        if let Some(lb) = &self.lower_bounds {
            if lb.len() != horizon {
                push(
                    FindingKind::Dimension,
                    None,
                    format!("lower_bounds has {} entries, expected {horizon}", lb.len()),
                );
            }
        }
        if self.initial_state.len() != self.stages[0].n_state {
            push(
                FindingKind::Dimension,
                Some(0),
                format!(
                    "initial state has {} entries, stage 0 expects {}",
                    self.initial_state.len(),
                    self.stages[0].n_state
                ),
            );
        }
        if self.training.horizon() >= 1
            && self.initial_covariate.len() != self.training.covariate_dim(0)
        {
            push(
                FindingKind::Dimension,
                None,
                format!(
                    "initial covariate has {} entries, training covariates have {}",
                    self.initial_covariate.len(),
                    self.training.covariate_dim(0)
                ),
            );
        }
        let d_y = self.training.uncertainty_dim();

        for (idx, st) in self.stages.iter().enumerate() {
            let s = Some(idx);
            if st.stage != idx {
                push(
                    FindingKind::Dimension,
                    s,
                    format!("template labelled stage {}", st.stage),
                );
            }
            if st.n_dec == 0 {
                push(FindingKind::EmptyStage, s, "stage has no decisions".into());
            }
            for (name, len) in [
                ("cost", st.cost.len()),
                ("lower", st.lower.len()),
                ("upper", st.upper.len()),
            ] {
                if len != st.n_dec {
                    push(
                        FindingKind::Dimension,
                        s,
                        format!("{name} has {len} entries, expected {}", st.n_dec),
                    );
                }
            }
            if !st.integrality.is_empty() && st.integrality.len() != st.n_dec {
                push(
                    FindingKind::Dimension,
                    s,
                    format!(
                        "integrality has {} entries, expected {}",
                        st.integrality.len(),
                        st.n_dec
                    ),
                );
            }
            let m = st.w.rows;
            for (name, mat) in [("W", &st.w), ("T", &st.t), ("U", &st.u)] {
                if !mat.is_consistent() {
                    push(
                        FindingKind::Dimension,
                        s,
                        format!("{name} data length does not match its shape"),
                    );
                }
                if mat.rows != m {
                    push(
                        FindingKind::Dimension,
                        s,
                        format!("{name} has {} rows, W has {m}", mat.rows),
                    );
                }
            }
            if st.w.cols != st.n_dec {
                push(
                    FindingKind::Dimension,
                    s,
                    format!("W has {} columns, expected {}", st.w.cols, st.n_dec),
                );
            }
            if st.t.cols != st.n_state {
                push(
                    FindingKind::Dimension,
                    s,
                    format!(
                        "T has {} columns, expected state dimension {}",
                        st.t.cols, st.n_state
                    ),
                );
            }
            let want_u = if idx == 0 {
                st.u.cols == 0 || st.u.cols == d_y
            } else {
                st.u.cols == d_y
            };
            if !want_u {
                push(
                    FindingKind::Dimension,
                    s,
                    format!(
                        "U has {} columns, uncertainty dimension is {d_y}",
                        st.u.cols
                    ),
                );
            }
            if st.h.len() != m {
                push(
                    FindingKind::Dimension,
                    s,
                    format!("h has {} entries, W has {m} rows", st.h.len()),
                );
            }
            if !st.senses.is_empty() && st.senses.len() != m {
                push(
                    FindingKind::Dimension,
                    s,
                    format!("senses has {} entries, W has {m} rows", st.senses.len()),
                );
            }
            if st.lower.len() == st.n_dec && st.upper.len() == st.n_dec {
                for j in 0..st.n_dec {
                    let (l, u) = (st.lower[j], st.upper[j]);
                    if l.is_nan() || u.is_nan() || l > u {
                        push(
                            FindingKind::Bounds,
                            s,
                            format!("decision {j} has bounds [{l}, {u}]"),
                        );
                    } else if st.kind(j) == VarKind::Binary && (l < 0.0 || u > 1.0) {
                        push(
                            FindingKind::Bounds,
                            s,
                            format!("binary decision {j} has bounds [{l}, {u}]"),
                        );
                    }
                }
                if st.cost.len() == st.n_dec
                    && self.lower_bounds.is_none()
                    && !st.box_minimum().is_finite()
                {
                    push(
                        FindingKind::UnboundedBelow,
                        s,
                        "cost is unbounded below over the variable box and no lower_bounds are given".into(),
                    );
                }
            }
            match (&st.transition, idx == horizon) {
                (Some(f), false) => {
                    if !f.is_consistent() || f.cols != st.n_dec {
                        push(
                            FindingKind::Dimension,
                            s,
                            format!("transition has {} columns, expected {}", f.cols, st.n_dec),
                        );
                    }
                    let next = self.stages[idx + 1].n_state;
                    if f.rows != next {
                        push(
                            FindingKind::Dimension,
                            s,
                            format!(
                                "transition has {} rows, stage {} state dimension is {next}",
                                f.rows,
                                idx + 1
                            ),
                        );
                    }
                }
                (None, false) => {
                    if self.stages[idx + 1].n_state != 0 {
                        push(
                            FindingKind::Dimension,
                            s,
                            "missing transition to a stateful next stage".into(),
                        );
                    }
                }
                (Some(f), true) if f.rows > 0 => {
                    push(
                        FindingKind::Dimension,
                        s,
                        "last stage must not have a transition".into(),
                    );
                }
                _ => {}
            }
        }
        out
    }

    /// [`validate`](Self::validate) as a `Result`.
    pub fn check(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = report.iter().map(ToString::to_string).collect();
            Err(Error::input(format!(
                "invalid instance: {}",
                msg.join("; ")
            )))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `y` seen by stage `t` on training sample `i`; empty at stage 0.
    pub fn uncertainty(&self, t: usize, sample: Option<usize>) -> &[f64] {
        match sample {
            Some(i) if t >= 1 => self.training.uncertainty(i, t),
            _ => &[],
        }
    }
}
