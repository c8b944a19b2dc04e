//! Datasets, max-affine models and the empirical loss metrics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `n` paired observations `(X_i, Y_i)` with `X_i` in `R^d`.
///
/// Covariates are stored row-major in one flat buffer. A dataset is immutable
/// once built and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    tag: String,
}

impl Dataset {
    /// Builds a dataset from one row per observation.
    pub fn new(rows: &[Vec<f64>], ys: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("covariate rows have different lengths"));
        }
        let xs = rows.iter().flatten().copied().collect();
        Self::from_flat(d, xs, ys, tag)
    }

    /// Builds a dataset from a row-major `n x d` buffer.
    pub fn from_flat(d: usize, xs: Vec<f64>, ys: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        let n = ys.len();
        if n == 0 || d == 0 {
            return Err(Error::invalid("dataset needs n >= 1 and d >= 1"));
        }
        if xs.len() != n * d {
            return Err(Error::invalid("covariate buffer is not n x d"));
        }
        if let Some(pos) = xs.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "non-finite covariate at row {}",
                pos / d
            )));
        }
        if let Some(pos) = ys.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(alloc::format!("non-finite response at row {pos}")));
        }
        Ok(Dataset {
            d,
            xs,
            ys,
            tag: tag.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.xs.chunks_exact(self.d)
    }

    /// Same covariates with different responses.
    pub fn with_responses(&self, ys: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.d, self.xs.clone(), ys, self.tag.clone())
    }

    /// Subset of observations in the given order.
    pub fn select(&self, idx: &[usize], tag: impl Into<String>) -> Result<Self> {
        let mut xs = Vec::with_capacity(idx.len() * self.d);
        let mut ys = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.n() {
                return Err(Error::invalid("row index out of range"));
            }
            xs.extend_from_slice(self.x(i));
            ys.push(self.ys[i]);
        }
        Self::from_flat(self.d, xs, ys, tag)
    }
}

/// One supporting hyperplane `g + <xi, x - anchor>`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub g: f64,
    pub xi: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl AffinePiece {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.g;
        for ((s, xk), ak) in self.xi.iter().zip(x).zip(&self.anchor) {
            v += s * (xk - ak);
        }
        v
    }
}

/// Solver bookkeeping attached to a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitMeta {
    /// Optimal value of the training objective.
    pub objective: f64,
    /// Iterations used by the underlying solver.
    pub iterations: usize,
    /// Ambiguity radius, for DRCR fits.
    pub delta: Option<f64>,
}

/// `f(x) = max_i (g_i + <xi_i, x - anchor_i>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffineModel {
    d: usize,
    pieces: Vec<AffinePiece>,
    grad_cap: Option<f64>,
    meta: FitMeta,
}

impl MaxAffineModel {
    /// Validates dimensions, finiteness and the gradient cap (`None` means
    /// unbounded).
    pub fn new(
        d: usize,
        pieces: Vec<AffinePiece>,
        grad_cap: Option<f64>,
        meta: FitMeta,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("model dimension must be positive"));
        }
        if pieces.is_empty() {
            return Err(Error::invalid("model needs at least one piece"));
        }
        if let Some(cap) = grad_cap {
            if !(cap > 0.0) {
                return Err(Error::invalid("gradient cap must be positive"));
            }
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.xi.len() != d || p.anchor.len() != d {
                return Err(Error::invalid(alloc::format!(
                    "piece {i} does not have dimension {d}"
                )));
            }
            let finite = p.g.is_finite()
                && p.xi.iter().all(|v| v.is_finite())
                && p.anchor.iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(alloc::format!("piece {i} has non-finite entries")));
            }
            if let Some(cap) = grad_cap {
                if p.xi.iter().any(|v| v.abs() > cap) {
                    return Err(Error::invalid(alloc::format!(
                        "piece {i} exceeds the gradient cap {cap}"
                    )));
                }
            }
        }
        Ok(MaxAffineModel {
            d,
            pieces,
            grad_cap,
            meta,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn grad_cap(&self) -> Option<f64> {
        self.grad_cap
    }

    pub fn meta(&self) -> &FitMeta {
        &self.meta
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::invalid(alloc::format!(
                "point has dimension {}, model has {}",
                x.len(),
                self.d
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Predictions at every covariate row of `data`.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.d() != self.d {
            return Err(Error::invalid("dataset and model dimensions differ"));
        }
        Ok(data.rows().map(|x| self.eval_unchecked(x)).collect())
    }

    /// `max_i ||xi_i||_inf`, the sup-norm of the subgradient field.
    pub fn gradient_sup_norm(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.xi.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn predict(model: &MaxAffineModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

pub fn gradient_sup_norm(model: &MaxAffineModel) -> f64 {
    model.gradient_sup_norm()
}

fn check_pair(f: &[f64], g: &[f64]) -> Result<()> {
    if f.len() != g.len() {
        return Err(Error::invalid("value vectors have different lengths"));
    }
    if f.is_empty() {
        return Err(Error::invalid("value vectors are empty"));
    }
    if f.iter().chain(g).any(|v| !v.is_finite()) {
        return Err(Error::invalid("value vectors contain non-finite entries"));
    }
    Ok(())
}

/// `(1/n) sum |f_i - g_i|`.
pub fn empirical_l1(f: &[f64], g: &[f64]) -> Result<f64> {
    check_pair(f, g)?;
    let s: f64 = f.iter().zip(g).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / f.len() as f64)
}

/// `((1/n) sum |f_i - g_i|^2)^(1/2)`.
pub fn empirical_l2(f: &[f64], g: &[f64]) -> Result<f64> {
    check_pair(f, g)?;
    let s: f64 = f.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(s / f.len() as f64))
}

/// Both empirical losses over the same evaluation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub l1: f64,
    pub l2: f64,
    pub n_points: usize,
}

impl LossReport {
    pub fn between(f: &[f64], g: &[f64]) -> Result<Self> {
        Ok(LossReport {
            l1: empirical_l1(f, g)?,
            l2: empirical_l2(f, g)?,
            n_points: f.len(),
        })
    }
}

/// `delta * ||grad f||_inf + (1/n) sum |Y_i - f(X_i)|`.
///
/// This is the worst-case expected absolute loss over the transport ball of
/// radius `delta`; the Lipschitz constant of `z -> |y - z|` is 1.
pub fn dual_objective(model: &MaxAffineModel, data: &Dataset, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid("delta must be finite and non-negative"));
    }
    let fitted = model.predict_dataset(data)?;
    let loss: f64 = data
        .ys()
        .iter()
        .zip(&fitted)
        .map(|(y, f)| (y - f).abs())
        .sum::<f64>()
        / data.n() as f64;
    Ok(delta * model.gradient_sup_norm() + loss)
}
