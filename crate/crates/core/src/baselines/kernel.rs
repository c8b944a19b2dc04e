//! Nadaraya-Watson regression with the Gaussian kernel
//! `K(u) = (2 pi)^{-d/2} exp(-||u||^2 / 2)` and leave-one-out bandwidth
//! selection over `h = C n^{-1/(d+4)}`, `C in {0.01, ..., 1.00}`.
//!
//! Weights are normalized in log space. When even the largest unnormalized
//! weight `K((x - X_j)/h)` underflows, the plain formula is `0/0` and the
//! prediction falls back to the training mean (the `h -> infinity` limit).
//!
//! Predictions are written as `Y_r + sum_j w_j (Y_j - Y_r) / sum_j w_j`, with
//! `r` the heaviest point, so constant responses come back exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Dataset, Error, Result};

/// Number of grid values of `C`.
pub const C_GRID: usize = 100;

/// `C = j / 100` for grid index `j - 1`.
pub fn grid_c(j: usize) -> f64 {
    (j + 1) as f64 / 100.0
}

/// `h = C n^{-1/(d+4)}`.
pub fn bandwidth_for(c: f64, n: usize, d: usize) -> f64 {
    c * libm::pow(n as f64, -1.0 / (d as f64 + 4.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    train: Dataset,
    h: f64,
}

impl KernelModel {
    pub fn new(train: Dataset, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("bandwidth must be positive and finite"));
        }
        Ok(KernelModel { train, h })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let d = self.train.d();
        if x.len() != d {
            return Err(Error::invalid("point dimension does not match the training data"));
        }
        let inv = 1.0 / (2.0 * self.h * self.h);
        let log_w: Vec<f64> = self
            .train
            .rows()
            .map(|xj| -sq_dist(x, xj) * inv)
            .collect();
        let ys = self.train.ys();
        Ok(weighted_mean(d, &log_w, ys, || {
            ys.iter().sum::<f64>() / ys.len() as f64
        }))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.rows().map(|x| self.predict(x)).collect()
    }
}

pub fn kernel_predict(model: &KernelModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// `sum_k (a_k - b_k)^2` in coordinate order.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (u, v) in a.iter().zip(b) {
        let t = u - v;
        s += t * t;
    }
    s
}

/// Log of the smallest positive normal double; below it `K` underflows.
const LOG_TINY: f64 = -708.3964185322641;

/// The kernel-weighted mean given exponents `-||x - X_j||^2 / (2 h^2)`
/// (`NEG_INFINITY` entries are skipped), or `fallback()` on underflow.
pub(crate) fn weighted_mean(
    d: usize,
    log_w: &[f64],
    ys: &[f64],
    fallback: impl FnOnce() -> f64,
) -> f64 {
    let mut r = usize::MAX;
    let mut top = f64::NEG_INFINITY;
    for (j, &l) in log_w.iter().enumerate() {
        if l > top {
            top = l;
            r = j;
        }
    }
    let log_norm = -0.5 * d as f64 * libm::log(2.0 * core::f64::consts::PI);
    if r == usize::MAX || top + log_norm < LOG_TINY {
        return fallback();
    }
    let yr = ys[r];
    let mut num = 0.0;
    let mut den = 0.0;
    for (&l, &y) in log_w.iter().zip(ys) {
        if l == f64::NEG_INFINITY {
            continue;
        }
        let w = libm::exp(l - top);
        num += w * (y - yr);
        den += w;
    }
    yr + num / den
}

/// Leave-one-out squared error `sum_i (Y_i - k^{(-i)}(X_i))^2` at bandwidth
/// `h`, from precomputed squared distances (`n x n`, row-major).
pub fn loo_criterion_from(data: &Dataset, sq: &[f64], h: f64) -> f64 {
    let n = data.n();
    let d = data.d();
    let ys = data.ys();
    let inv = 1.0 / (2.0 * h * h);
    let total: f64 = ys.iter().sum();
    let mut log_w = vec![0.0; n];
    let mut crit = 0.0;
    for i in 0..n {
        for j in 0..n {
            log_w[j] = if j == i { f64::NEG_INFINITY } else { -sq[i * n + j] * inv };
        }
        let pred = weighted_mean(d, &log_w, ys, || (total - ys[i]) / (n - 1) as f64);
        let e = ys[i] - pred;
        crit += e * e;
    }
    crit
}

/// Pairwise squared distances, row-major.
pub fn squared_distances(data: &Dataset) -> Vec<f64> {
    let n = data.n();
    let mut sq = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sq[i * n + j] = sq_dist(data.x(i), data.x(j));
        }
    }
    sq
}

pub fn loo_criterion(data: &Dataset, h: f64) -> Result<f64> {
    if data.n() < 2 {
        return Err(Error::invalid("leave-one-out needs n >= 2"));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    Ok(loo_criterion_from(data, &squared_distances(data), h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthChoice {
    pub h: f64,
    pub c: f64,
    /// Criterion value for every grid point, in grid order.
    pub criteria: Vec<f64>,
}

/// Grid search over `C`; ties go to the smaller `C`.
pub fn select_bandwidth(data: &Dataset) -> Result<BandwidthChoice> {
    let (n, d) = (data.n(), data.d());
    if n < 3 {
        return Err(Error::invalid("bandwidth selection needs n >= 3"));
    }
    let sq = squared_distances(data);
    let criteria: Vec<f64> = (0..C_GRID)
        .map(|j| loo_criterion_from(data, &sq, bandwidth_for(grid_c(j), n, d)))
        .collect();
    let mut best = 0;
    for (j, &v) in criteria.iter().enumerate() {
        if v < criteria[best] {
            best = j;
        }
    }
    let c = grid_c(best);
    Ok(BandwidthChoice {
        h: bandwidth_for(c, n, d),
        c,
        criteria,
    })
}

/// Selects the bandwidth by leave-one-out and returns the fitted model.
pub fn fit_kernel(data: &Dataset) -> Result<KernelModel> {
    let choice = select_bandwidth(data)?;
    KernelModel::new(data.clone(), choice.h)
}
