//! Log transforms, standardization fitted on training rows, and seeded
//! train/test splits.

use std::path::Path;

use drcr_core::rng::{tag, Stream};
use drcr_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_table, Schema, Table};

/// What to do to each column before fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanTemplate {
    /// Take logs of every covariate.
    pub log_covariates: bool,
    pub log_response: bool,
    pub standardize_covariates: bool,
    pub standardize_response: bool,
}

impl Default for PlanTemplate {
    fn default() -> Self {
        PlanTemplate {
            log_covariates: true,
            log_response: false,
            standardize_covariates: true,
            standardize_response: true,
        }
    }
}

impl PlanTemplate {
    pub fn identity() -> Self {
        PlanTemplate {
            log_covariates: false,
            log_response: false,
            standardize_covariates: false,
            standardize_response: false,
        }
    }
}

/// `(log(v) or v - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub name: String,
    pub log: bool,
    pub mean: f64,
    pub std: f64,
}

impl ColumnTransform {
    fn apply(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.ln()
        } else {
            v
        };
        Some((v - self.mean) / self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPlan {
    pub covariates: Vec<ColumnTransform>,
    pub response: ColumnTransform,
}

impl FittedPlan {
    /// Fits every transform on `train` rows of `table` only.
    pub fn fit(template: &PlanTemplate, schema: &Schema, table: &Table, train: &[usize]) -> Result<Self> {
        let (cols, response) = schema.resolve(table)?;
        let response = response.ok_or_else(|| Error::invalid("the schema names no response"))?;
        if train.is_empty() {
            return Err(Error::invalid("no training rows"));
        }
        let column = |k: usize, log: bool, standardize: bool| -> Result<ColumnTransform> {
            let mut vals = Vec::with_capacity(train.len());
            for &i in train {
                let v = table.rows[i][k];
                if log && v <= 0.0 {
                    return Err(non_positive(table, i, k));
                }
                vals.push(if log { v.ln() } else { v });
            }
            let (mean, std) = if standardize { mean_std(&vals) } else { (0.0, 1.0) };
            Ok(ColumnTransform {
                name: table.headers[k].clone(),
                log,
                mean,
                std,
            })
        };
        Ok(FittedPlan {
            covariates: cols
                .iter()
                .map(|&k| column(k, template.log_covariates, template.standardize_covariates))
                .collect::<Result<_>>()?,
            response: column(response, template.log_response, template.standardize_response)?,
        })
    }

    /// Transforms the given rows of `table`, in that order.
    pub fn apply(&self, table: &Table, rows: &[usize], tag: &str) -> Result<Dataset> {
        let cols: Vec<usize> = self
            .covariates
            .iter()
            .map(|c| table.column(&c.name))
            .collect::<Result<_>>()?;
        let response = table.column(&self.response.name)?;
        let mut xs = Vec::with_capacity(rows.len() * cols.len());
        let mut ys = Vec::with_capacity(rows.len());
        for &i in rows {
            for (t, &k) in self.covariates.iter().zip(&cols) {
                xs.push(t.apply(table.rows[i][k]).ok_or_else(|| non_positive(table, i, k))?);
            }
            ys.push(
                self.response
                    .apply(table.rows[i][response])
                    .ok_or_else(|| non_positive(table, i, response))?,
            );
        }
        Ok(Dataset::from_flat(cols.len(), xs, ys, tag)?)
    }

    /// Maps a standardized response back to the original units.
    pub fn response_to_original(&self, v: f64) -> f64 {
        let u = v * self.response.std + self.response.mean;
        if self.response.log {
            u.exp()
        } else {
            u
        }
    }
}

fn non_positive(table: &Table, row: usize, col: usize) -> Error {
    Error::NonPositive {
        row,
        line: table.lines.get(row).copied().unwrap_or(0),
        column: table.headers[col].clone(),
        value: table.rows[row][col],
    }
}

/// Mean and sample standard deviation. A column with no spread is only
/// centred.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 1.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if std > 0.0 && std.is_finite() {
        (mean, std)
    } else {
        (mean, 1.0)
    }
}

/// A random permutation of `0..n` from `(seed, rep)`, cut after `train_rows`.
pub fn split_indices(n: usize, train_rows: usize, seed: u64, rep: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if train_rows == 0 || train_rows > n {
        return Err(Error::invalid(format!(
            "train_rows must be in 1..={n}, got {train_rows}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Stream::new(seed, &[tag("split"), rep]).shuffle(&mut idx);
    let test = idx.split_off(train_rows);
    Ok((idx, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    /// `None` when every row went to training.
    pub test: Option<Dataset>,
    pub plan: FittedPlan,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Splits `table`, fits the plan on the training part and applies it to both.
pub fn preprocess_split(
    table: &Table,
    schema: &Schema,
    template: &PlanTemplate,
    train_rows: usize,
    seed: u64,
    rep: u64,
) -> Result<Split> {
    let (train_idx, test_idx) = split_indices(table.len(), train_rows, seed, rep)?;
    let plan = FittedPlan::fit(template, schema, table, &train_idx)?;
    let train = plan.apply(table, &train_idx, &format!("train-{rep}"))?;
    let test = if test_idx.is_empty() {
        None
    } else {
        Some(plan.apply(table, &test_idx, &format!("test-{rep}"))?)
    };
    Ok(Split {
        train,
        test,
        plan,
        train_rows: train_idx,
        test_rows: test_idx,
    })
}

pub fn load_and_preprocess(
    path: impl AsRef<Path>,
    schema: &Schema,
    template: &PlanTemplate,
    train_rows: usize,
    seed: u64,
) -> Result<Split> {
    let table = read_table(path)?;
    preprocess_split(&table, schema, template, train_rows, seed, 0)
}
