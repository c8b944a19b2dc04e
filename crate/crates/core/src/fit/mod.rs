//! The DRCR linear program and its solution driver.
//!
//! Columns are laid out as `g_0..g_{n-1}`, then `xi_i^k` at `n + i*d + k`,
//! then the residual epigraphs `r_i`, then the single penalty epigraph `t`.
//! Rows, in order:
//!
//! * `r_i + g_i >= Y_i` and `r_i - g_i >= -Y_i` for each `i` (`2n` rows);
//! * `t - xi_i^k >= 0` and `t + xi_i^k >= 0` for each `i, k` (`2nd` rows);
//! * `g_j - g_i - <xi_i, X_j - X_i> >= 0` for ordered pairs `i != j`.
//!
//! The objective is `(1/n) sum r_i + delta * t` and `|xi_i^k| <= grad_cap` is
//! a column bound.

mod oracle;
mod rowgen;

use alloc::format;
use alloc::vec::Vec;

use crate::lp::{LinearProgram, Sense, SolverOptions};
use crate::{Dataset, Error, MaxAffineModel, Result};

pub use oracle::worst_case_loss_oracle;
pub use rowgen::{fit_drcr, fit_drcr_report, DrcrFit};

/// Which radius formula to use when none is given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `n^(-2/d)`.
    Experimental,
    /// `n^(-2/d) * (ln n)^(1 + 3/gamma)`.
    Theoretical,
}

/// `n^(-2/d)` or `n^(-2/d) (ln n)^(1+3/gamma)`, with unit leading constant.
pub fn default_radius(n: usize, d: usize, schedule: Schedule, gamma: Option<f64>) -> Result<f64> {
    if n < 2 || d < 1 {
        return Err(Error::invalid(format!(
            "radius schedule needs n >= 2 and d >= 1, got n={n} d={d}"
        )));
    }
    let base = libm::pow(n as f64, -2.0 / d as f64);
    match schedule {
        Schedule::Experimental => Ok(base),
        Schedule::Theoretical => match gamma {
            Some(g) if g > 0.0 && g.is_finite() => {
                Ok(base * libm::pow(libm::log(n as f64), 1.0 + 3.0 / g))
            }
            Some(g) => Err(Error::invalid(format!("gamma must be positive, got {g}"))),
            None => Err(Error::invalid("the theoretical schedule needs gamma")),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Explicit(f64),
    /// `multiplier * default_radius(n, d, kind, gamma)`.
    Schedule {
        kind: Schedule,
        gamma: Option<f64>,
        multiplier: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowGeneration {
    /// On when `n > AUTO_ROWGEN_ABOVE`.
    Auto,
    On,
    Off,
}

pub const AUTO_ROWGEN_ABOVE: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub radius: Radius,
    /// `None` means `ln n`.
    pub grad_cap: Option<f64>,
    pub row_generation: RowGeneration,
    /// Convexity violations at or below this are accepted.
    pub violation_tol: f64,
    pub solver: SolverOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            radius: Radius::Schedule {
                kind: Schedule::Experimental,
                gamma: None,
                multiplier: 1.0,
            },
            grad_cap: None,
            row_generation: RowGeneration::Auto,
            violation_tol: 1e-8,
            solver: SolverOptions::default(),
        }
    }
}

impl FitConfig {
    pub fn with_delta(delta: f64) -> Self {
        FitConfig {
            radius: Radius::Explicit(delta),
            ..FitConfig::default()
        }
    }

    pub fn delta(&self, n: usize, d: usize) -> Result<f64> {
        let delta = match self.radius {
            Radius::Explicit(v) => v,
            Radius::Schedule {
                kind,
                gamma,
                multiplier,
            } => {
                if !(multiplier > 0.0) || !multiplier.is_finite() {
                    return Err(Error::invalid("radius multiplier must be positive"));
                }
                multiplier * default_radius(n, d, kind, gamma)?
            }
        };
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be finite and >= 0, got {delta}")));
        }
        Ok(delta)
    }

    pub fn grad_cap(&self, n: usize) -> Result<f64> {
        let cap = self.grad_cap.unwrap_or_else(|| libm::log(n as f64));
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::invalid(format!("gradient cap must be positive, got {cap}")));
        }
        Ok(cap)
    }

    pub fn uses_row_generation(&self, n: usize) -> bool {
        match self.row_generation {
            RowGeneration::Auto => n > AUTO_ROWGEN_ABOVE,
            RowGeneration::On => true,
            RowGeneration::Off => false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.violation_tol > 0.0) {
            return Err(Error::invalid("violation tolerance must be positive"));
        }
        Ok(())
    }
}

/// Semantic role of an LP column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    G(usize),
    Xi(usize, usize),
    R(usize),
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrcrLpIndex {
    pub n: usize,
    pub d: usize,
}

impl DrcrLpIndex {
    pub fn g(&self, i: usize) -> usize {
        i
    }

    pub fn xi(&self, i: usize, k: usize) -> usize {
        self.n + i * self.d + k
    }

    pub fn r(&self, i: usize) -> usize {
        self.n * (1 + self.d) + i
    }

    pub fn t(&self) -> usize {
        self.n * (2 + self.d)
    }

    pub fn num_cols(&self) -> usize {
        self.n * (2 + self.d) + 1
    }

    pub fn role(&self, col: usize) -> Option<Var> {
        let (n, d) = (self.n, self.d);
        if col < n {
            Some(Var::G(col))
        } else if col < n * (1 + d) {
            let c = col - n;
            Some(Var::Xi(c / d, c % d))
        } else if col < n * (2 + d) {
            Some(Var::R(col - n * (1 + d)))
        } else if col == self.t() {
            Some(Var::T)
        } else {
            None
        }
    }

    /// Terms of `g_j - g_i - <xi_i, X_j - X_i> >= 0`.
    pub fn convexity_terms(&self, data: &Dataset, i: usize, j: usize) -> Vec<(usize, f64)> {
        let (xi, xj) = (data.x(i), data.x(j));
        let mut terms = Vec::with_capacity(self.d + 2);
        terms.push((self.g(j), 1.0));
        terms.push((self.g(i), -1.0));
        for k in 0..self.d {
            let diff = xj[k] - xi[k];
            if diff != 0.0 {
                terms.push((self.xi(i, k), -diff));
            }
        }
        terms
    }

    /// `g_j - g_i - <xi_i, X_j - X_i>` at the point `x`; negative means violated.
    pub fn convexity_slack(&self, data: &Dataset, x: &[f64], i: usize, j: usize) -> f64 {
        let (pi, pj) = (data.x(i), data.x(j));
        let xi = &x[self.xi(i, 0)..self.xi(i, 0) + self.d];
        let mut s = x[self.g(j)] - x[self.g(i)];
        for k in 0..self.d {
            s -= xi[k] * (pj[k] - pi[k]);
        }
        s
    }
}

/// The LP without any convexity rows.
pub(crate) fn base_lp(data: &Dataset, delta: f64, cap: f64) -> (LinearProgram, DrcrLpIndex) {
    let (n, d) = (data.n(), data.d());
    let idx = DrcrLpIndex { n, d };
    let mut lp = LinearProgram::new(idx.num_cols());
    let w = 1.0 / n as f64;
    for i in 0..n {
        lp.set_free(idx.g(i));
        for k in 0..d {
            lp.set_bounds(idx.xi(i, k), -cap, cap);
        }
        lp.add_objective(idx.r(i), w);
    }
    if delta != 0.0 {
        lp.add_objective(idx.t(), delta);
    }
    for i in 0..n {
        let y = data.y(i);
        lp.add_row(&[(idx.r(i), 1.0), (idx.g(i), 1.0)], Sense::Ge, y);
        lp.add_row(&[(idx.r(i), 1.0), (idx.g(i), -1.0)], Sense::Ge, -y);
    }
    for i in 0..n {
        for k in 0..d {
            lp.add_row(&[(idx.t(), 1.0), (idx.xi(i, k), -1.0)], Sense::Ge, 0.0);
            lp.add_row(&[(idx.t(), 1.0), (idx.xi(i, k), 1.0)], Sense::Ge, 0.0);
        }
    }
    (lp, idx)
}

fn check_data(data: &Dataset) -> Result<()> {
    if data.n() < 2 {
        return Err(Error::invalid(
            "DRCR needs n >= 2; with one point the fit is just the response",
        ));
    }
    Ok(())
}

/// The full program with all `n^2 - n` convexity rows.
pub fn build_drcr_lp(data: &Dataset, cfg: &FitConfig) -> Result<(LinearProgram, DrcrLpIndex)> {
    check_data(data)?;
    cfg.validate()?;
    let n = data.n();
    let delta = cfg.delta(n, data.d())?;
    let cap = cfg.grad_cap(n)?;
    let (mut lp, idx) = base_lp(data, delta, cap);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lp.add_row(&idx.convexity_terms(data, i, j), Sense::Ge, 0.0);
            }
        }
    }
    Ok((lp, idx))
}

/// The constant fit at the (lower) median of `Y`: feasible for every instance.
pub fn median_start(data: &Dataset, idx: &DrcrLpIndex) -> Vec<f64> {
    let mut ys = data.ys().to_vec();
    ys.sort_by(f64::total_cmp);
    let med = ys[(ys.len() - 1) / 2];
    let mut x = alloc::vec![0.0; idx.num_cols()];
    for i in 0..idx.n {
        x[idx.g(i)] = med;
        x[idx.r(i)] = (data.y(i) - med).abs();
    }
    x
}

/// Max-affine model from an LP point. `xi` is clamped to the cap to absorb
/// bound violations within the solver tolerance.
pub(crate) fn assemble(
    data: &Dataset,
    idx: &DrcrLpIndex,
    x: &[f64],
    cap: f64,
    meta: crate::model::FitMeta,
) -> Result<MaxAffineModel> {
    let pieces = (0..idx.n)
        .map(|i| crate::AffinePiece {
            g: x[idx.g(i)],
            xi: (0..idx.d).map(|k| x[idx.xi(i, k)].clamp(-cap, cap)).collect(),
            anchor: data.x(i).to_vec(),
        })
        .collect();
    MaxAffineModel::new(idx.d, pieces, Some(cap), meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line() -> Dataset {
        Dataset::new(&[vec![0.0], vec![1.0], vec![2.0]], vec![0.0, 1.0, 2.0], "line").unwrap()
    }

    #[test]
    fn radius_examples() {
        let r = default_radius(32, 5, Schedule::Experimental, None).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
        assert!(default_radius(1, 3, Schedule::Experimental, None).is_err());
        assert!(default_radius(10, 2, Schedule::Theoretical, None).is_err());
        assert!(default_radius(10, 2, Schedule::Theoretical, Some(0.0)).is_err());
        // gamma = 3 makes the log exponent 2.
        let r7 = default_radius(7, 2, Schedule::Theoretical, Some(3.0)).unwrap();
        assert!((r7 - libm::log(7.0) * libm::log(7.0) / 7.0).abs() < 1e-15);
    }

    #[test]
    fn index_partitions_columns() {
        let idx = DrcrLpIndex { n: 4, d: 3 };
        let mut seen = vec![false; idx.num_cols()];
        for i in 0..4 {
            seen[idx.g(i)] = true;
            seen[idx.r(i)] = true;
            for k in 0..3 {
                assert_eq!(idx.role(idx.xi(i, k)), Some(Var::Xi(i, k)));
                seen[idx.xi(i, k)] = true;
            }
        }
        seen[idx.t()] = true;
        assert!(seen.iter().all(|&s| s));
        assert_eq!(idx.role(idx.num_cols()), None);
        assert_eq!(idx.role(idx.t()), Some(Var::T));
    }

    #[test]
    fn small_program_counts() {
        let data = Dataset::new(&[vec![0.0], vec![1.0]], vec![0.0, 1.0], "two").unwrap();
        let (lp, idx) = build_drcr_lp(&data, &FitConfig::with_delta(0.5)).unwrap();
        assert_eq!(lp.num_cols(), 7);
        assert_eq!(idx.num_cols(), 7);
        // 2n residual rows + 2nd penalty rows + n^2 - n convexity rows.
        assert_eq!(lp.num_rows(), 4 + 4 + 2);
    }

    #[test]
    fn one_point_is_rejected() {
        let data = Dataset::new(&[vec![0.0]], vec![1.0], "one").unwrap();
        assert!(build_drcr_lp(&data, &FitConfig::with_delta(0.0)).is_err());
    }

    #[test]
    fn median_start_is_feasible() {
        let data = line();
        let (lp, idx) = build_drcr_lp(&data, &FitConfig::with_delta(1.0)).unwrap();
        let x = median_start(&data, &idx);
        let csr = lp.canonical().unwrap();
        let act = csr.mul_vec(&x);
        for (i, a) in act.iter().enumerate() {
            assert!(*a >= lp.rhs()[i] - 1e-15, "row {i}");
        }
        assert_eq!(x[idx.g(0)], 1.0);
    }
}
