use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired covariate/uncertainty sample paths.
///
/// `covariates[i][t]` is `x_t` of sample `i` for `t in 0..T`;
/// `uncertainties[i][t - 1]` is `y_t` for `t in 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    covariates: Vec<Vec<Vec<f64>>>,
    uncertainties: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    X,
    Y,
}

/// One row of the CSV/JSON interchange form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sample: usize,
    pub stage: usize,
    pub kind: Kind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JsonForm {
    n_samples: usize,
    horizon: usize,
    records: Vec<Record>,
}

impl TrainingSet {
    pub fn new(covariates: Vec<Vec<Vec<f64>>>, uncertainties: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let ts = TrainingSet {
            covariates,
            uncertainties,
        };
        ts.validate()?;
        Ok(ts)
    }

    fn validate(&self) -> Result<()> {
        let n = self.covariates.len();
        if n == 0 {
            return Err(Error::input("training set needs at least one sample"));
        }
        if self.uncertainties.len() != n {
            return Err(Error::input(
                "covariate and uncertainty sample counts differ",
            ));
        }
        let horizon = self.covariates[0].len();
        if horizon == 0 {
            return Err(Error::input("training horizon must be at least 1"));
        }
        let x_dims: Vec<usize> = self.covariates[0].iter().map(Vec::len).collect();
        let y_dim = self.uncertainties[0].first().map_or(0, Vec::len);
        for i in 0..n {
            if self.covariates[i].len() != horizon || self.uncertainties[i].len() != horizon {
                return Err(Error::input(format!("sample {i} has a different horizon")));
            }
            for (t, x) in self.covariates[i].iter().enumerate() {
                if x.len() != x_dims[t] {
                    return Err(Error::input(format!(
                        "sample {i} stage {t}: covariate dimension mismatch"
                    )));
                }
            }
            for (t, y) in self.uncertainties[i].iter().enumerate() {
                if y.len() != y_dim {
                    return Err(Error::input(format!(
                        "sample {i} stage {}: uncertainty dimension mismatch",
                        t + 1
                    )));
                }
            }
            let bad = self.covariates[i]
                .iter()
                .chain(&self.uncertainties[i])
                .flatten()
                .any(|v| !v.is_finite());
            if bad {
                return Err(Error::input(format!(
                    "sample {i} contains non-finite values"
                )));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.covariates.len()
    }

    /// Number of uncertainty stages `T`.
    pub fn horizon(&self) -> usize {
        self.covariates[0].len()
    }

    pub fn covariate_dim(&self, t: usize) -> usize {
        self.covariates[0][t].len()
    }

    pub fn uncertainty_dim(&self) -> usize {
        self.uncertainties[0][0].len()
    }

    /// `x_t` of sample `i`, `t in 0..T`.
    pub fn covariate(&self, i: usize, t: usize) -> &[f64] {
        &self.covariates[i][t]
    }

    /// `y_t` of sample `i`, `t in 1..=T`.
    pub fn uncertainty(&self, i: usize, t: usize) -> &[f64] {
        &self.uncertainties[i][t - 1]
    }

    /// All samples' `x_t`, in sample order.
    pub fn stage_covariates(&self, t: usize) -> Vec<Vec<f64>> {
        self.covariates.iter().map(|c| c[t].clone()).collect()
    }

    /// All samples' first component of `y_t`.
    pub fn stage_responses(&self, t: usize) -> Vec<f64> {
        self.uncertainties.iter().map(|u| u[t - 1][0]).collect()
    }

    /// A copy in which every `x_t` is replaced by `x_0`: learners then only ever see time-0 covariates.
    pub fn frozen_covariates(&self) -> TrainingSet {
        TrainingSet {
            covariates: self
                .covariates
                .iter()
                .map(|c| vec![c[0].clone(); c.len()])
                .collect(),
            uncertainties: self.uncertainties.clone(),
        }
    }

    /// Same covariates, uncertainties reassigned by `perm` (sample `i` gets sample `perm[i]`'s path).
    pub fn with_permuted_uncertainties(&self, perm: &[usize]) -> TrainingSet {
        TrainingSet {
            covariates: self.covariates.clone(),
            uncertainties: perm
                .iter()
                .map(|&p| self.uncertainties[p].clone())
                .collect(),
        }
    }

    pub fn records(&self) -> Vec<Record> {
        let horizon = self.horizon();
        let mut out = Vec::with_capacity(self.n_samples() * 2 * horizon);
        for i in 0..self.n_samples() {
            for t in 0..=horizon {
                if t < horizon {
                    out.push(Record {
                        sample: i,
                        stage: t,
                        kind: Kind::X,
                        values: self.covariates[i][t].clone(),
                    });
                }
                if t >= 1 {
                    out.push(Record {
                        sample: i,
                        stage: t,
                        kind: Kind::Y,
                        values: self.uncertainties[i][t - 1].clone(),
                    });
                }
            }
        }
        out
    }

    /// Rebuilds a training set from records. `x` rows at stage `T` carry no
    /// information for the decision problem and are dropped with a warning.
    pub fn from_records(records: &[Record]) -> Result<Self> {
        let n = records.iter().map(|r| r.sample + 1).max().unwrap_or(0);
        let horizon = records
            .iter()
            .filter(|r| r.kind == Kind::Y)
            .map(|r| r.stage)
            .max()
            .unwrap_or(0);
        if n == 0 || horizon == 0 {
            return Err(Error::input(
                "training data must contain at least one sample and one y stage",
            ));
        }
        let mut xs: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; horizon]; n];
        let mut ys: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; horizon]; n];
        let mut dropped = 0usize;
        for r in records {
            let slot = match r.kind {
                Kind::X if r.stage == horizon => {
                    dropped += 1;
                    continue;
                }
                Kind::X if r.stage > horizon => {
                    return Err(Error::input(format!(
                        "x record at stage {} beyond horizon",
                        r.stage
                    )))
                }
                Kind::X => &mut xs[r.sample][r.stage],
                Kind::Y if r.stage == 0 => {
                    return Err(Error::input("y records start at stage 1"));
                }
                Kind::Y => &mut ys[r.sample][r.stage - 1],
            };
            if slot.is_some() {
                return Err(Error::input(format!(
                    "duplicate {:?} record for sample {} stage {}",
                    r.kind, r.sample, r.stage
                )));
            }
            *slot = Some(r.values.clone());
        }
        if dropped > 0 {
            log::warn!("ignored {dropped} covariate rows at the final stage (x_T is not used)");
        }
        let unwrap = |v: Vec<Vec<Option<Vec<f64>>>>, what: &str| -> Result<Vec<Vec<Vec<f64>>>> {
            v.into_iter()
                .enumerate()
                .map(|(i, row)| {
                    row.into_iter()
                        .enumerate()
                        .map(|(t, c)| {
                            c.ok_or_else(|| {
                                Error::input(format!("missing {what} for sample {i} at index {t}"))
                            })
                        })
                        .collect()
                })
                .collect()
        };
        TrainingSet::new(unwrap(xs, "covariate")?, unwrap(ys, "uncertainty")?)
    }

    /// CSV with header `sample,stage,kind,dim0,dim1,...`. Shorter rows leave trailing cells empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let records = self.records();
        let width = records.iter().map(|r| r.values.len()).max().unwrap_or(0);
        let mut wtr = csv::WriterBuilder::new().flexible(false).from_writer(w);
        let mut header = vec!["sample".to_string(), "stage".into(), "kind".into()];
        header.extend((0..width).map(|d| format!("dim{d}")));
        wtr.write_record(&header)?;
        for r in &records {
            let mut row = vec![
                r.sample.to_string(),
                r.stage.to_string(),
                match r.kind {
                    Kind::X => "x".into(),
                    Kind::Y => "y".into(),
                },
            ];
            row.extend(r.values.iter().map(|v| format!("{v:?}")));
            row.resize(3 + width, String::new());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads the CSV form; lines starting with `#` are metadata comments.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(r);
        let mut records = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let field = |k: usize| row.get(k).unwrap_or("").trim();
            let parse_usize = |k: usize| -> Result<usize> {
                field(k).parse().map_err(|_| {
                    Error::input(format!("row {}: bad integer in column {k}", line + 1))
                })
            };
            let kind = match field(2) {
                "x" => Kind::X,
                "y" => Kind::Y,
                other => {
                    return Err(Error::input(format!(
                        "row {}: unknown kind {other:?}",
                        line + 1
                    )))
                }
            };
            let mut values = Vec::new();
            for k in 3..row.len() {
                let cell = field(k);
                if cell.is_empty() {
                    continue;
                }
                values.push(
                    cell.parse::<f64>().map_err(|_| {
                        Error::input(format!("row {}: bad number {cell:?}", line + 1))
                    })?,
                );
            }
            records.push(Record {
                sample: parse_usize(0)?,
                stage: parse_usize(1)?,
                kind,
                values,
            });
        }
        TrainingSet::from_records(&records)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&JsonForm {
            n_samples: self.n_samples(),
            horizon: self.horizon(),
            records: self.records(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let form: JsonForm = serde_json::from_str(text)?;
        let ts = TrainingSet::from_records(&form.records)?;
        if ts.n_samples() != form.n_samples || ts.horizon() != form.horizon {
            return Err(Error::input(
                "declared n_samples/horizon disagree with records",
            ));
        }
        Ok(ts)
    }
}

impl Serialize for TrainingSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        JsonForm {
            n_samples: self.n_samples(),
            horizon: self.horizon(),
            records: self.records(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrainingSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let form = JsonForm::deserialize(d)?;
        TrainingSet::from_records(&form.records).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrainingSet {
        TrainingSet::new(
            vec![
                vec![vec![0.5, 1.0], vec![0.25, -1.0]],
                vec![vec![1.0 / 3.0, 2.0], vec![0.0, 0.0]],
            ],
            vec![vec![vec![10.0], vec![11.5]], vec![vec![7.0], vec![1e-17]]],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let ts = small();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sample,stage,kind,dim0,dim1\n"));
        let back = TrainingSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn json_round_trip() {
        let ts = small();
        let back = TrainingSet::from_json(&ts.to_json().unwrap()).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn final_stage_covariates_are_ignored() {
        let csv = "# meta\nsample,stage,kind,dim0\n0,0,x,1.0\n0,1,y,2.0\n0,1,x,9.0\n";
        let ts = TrainingSet::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(ts.horizon(), 1);
        assert_eq!(ts.covariate(0, 0), &[1.0]);
    }

    #[test]
    fn rejects_missing_and_ragged_data() {
        let csv = "sample,stage,kind,dim0\n0,0,x,1.0\n1,1,y,2.0\n";
        assert!(TrainingSet::read_csv(csv.as_bytes()).is_err());
        assert!(TrainingSet::new(vec![], vec![]).is_err());
        let ragged = TrainingSet::new(
            vec![vec![vec![1.0]], vec![vec![1.0, 2.0]]],
            vec![vec![vec![1.0]], vec![vec![1.0]]],
        );
        assert!(ragged.is_err());
    }
}
