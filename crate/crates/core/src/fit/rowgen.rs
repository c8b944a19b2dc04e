//! Solve driver: start from a subset of convexity rows and add the most
//! violated ones until none remain.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{assemble, base_lp, check_data, median_start, DrcrLpIndex, FitConfig};
use crate::lp::{certify, ResidualReport, Sense, Simplex, Status};
use crate::model::FitMeta;
use crate::{Dataset, Error, MaxAffineModel, Result};

/// A fitted model together with the LP it came from.
#[derive(Debug, Clone)]
pub struct DrcrFit {
    pub model: MaxAffineModel,
    pub index: DrcrLpIndex,
    pub delta: f64,
    pub grad_cap: f64,
    /// Optimal LP objective.
    pub objective: f64,
    /// The LP optimum, in column order.
    pub solution: Vec<f64>,
    /// Convexity rows present in the final program.
    pub convexity_rows: usize,
    /// Solve rounds (1 when every row was present from the start).
    pub rounds: usize,
    pub iterations: usize,
    pub residuals: ResidualReport,
}

impl DrcrFit {
    /// Fitted intercepts `g_i` straight from the LP.
    pub fn g(&self) -> Vec<f64> {
        (0..self.index.n).map(|i| self.solution[self.index.g(i)]).collect()
    }
}

pub fn fit_drcr(data: &Dataset, cfg: &FitConfig) -> Result<MaxAffineModel> {
    fit_drcr_report(data, cfg).map(|f| f.model)
}

/// Pairs `(i, j)` where `j` is among the `k` nearest anchors of `i` in the
/// l1 distance (ties by index), in both orientations.
fn neighbor_pairs(data: &Dataset, k: usize, present: &mut [bool]) -> Vec<(usize, usize)> {
    let n = data.n();
    let mut out = Vec::new();
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        let xi = data.x(i);
        for j in (0..n).filter(|&j| j != i) {
            let dist: f64 = xi.iter().zip(data.x(j)).map(|(a, b)| (a - b).abs()).sum();
            order.push((dist, j));
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in order.iter().take(k) {
            for (a, b) in [(i, j), (j, i)] {
                if !present[a * n + b] {
                    present[a * n + b] = true;
                    out.push((a, b));
                }
            }
        }
    }
    out
}

/// Violated absent rows, worst first (ties by row index).
fn violations(
    data: &Dataset,
    idx: &DrcrLpIndex,
    x: &[f64],
    present: &[bool],
    tol: f64,
) -> Vec<(f64, usize, usize)> {
    let n = data.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && !present[i * n + j] {
                let s = idx.convexity_slack(data, x, i, j);
                if s < -tol {
                    out.push((-s, i, j));
                }
            }
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    out
}

fn solver_error(spx: &Simplex, what: &str) -> Error {
    Error::Solver {
        status: spx.status(),
        iterations: spx.iterations(),
        detail: format!("DRCR program {what}"),
    }
}

pub fn fit_drcr_report(data: &Dataset, cfg: &FitConfig) -> Result<DrcrFit> {
    check_data(data)?;
    cfg.validate()?;
    let (n, d) = (data.n(), data.d());
    let delta = cfg.delta(n, d)?;
    let cap = cfg.grad_cap(n)?;
    let lazy = cfg.uses_row_generation(n);

    let (mut lp, idx) = base_lp(data, delta, cap);
    let mut present = vec![false; n * n];
    let initial: Vec<(usize, usize)> = if lazy {
        neighbor_pairs(data, (2 * d).min(n - 1), &mut present)
    } else {
        let mut all = Vec::with_capacity(n * (n - 1));
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                present[i * n + j] = true;
                all.push((i, j));
            }
        }
        all
    };
    for &(i, j) in &initial {
        lp.add_row(&idx.convexity_terms(data, i, j), Sense::Ge, 0.0);
    }
    let mut convexity_rows = initial.len();

    let start = median_start(data, &idx);
    let csr = lp.canonical()?;
    let mut spx = Simplex::new(&lp, &csr, &cfg.solver, Some(&start))?;
    spx.solve();
    let mut rounds = 1;
    loop {
        if spx.status() != Status::Optimal {
            return Err(solver_error(&spx, "did not reach an optimum"));
        }
        let x = spx.primal();
        let viol = violations(data, &idx, &x, &present, cfg.violation_tol);
        log::debug!(
            "drcr round={rounds} rows={convexity_rows} violated={} iterations={}",
            viol.len(),
            spx.iterations()
        );
        if viol.is_empty() {
            break;
        }
        let batch: Vec<(Vec<(usize, f64)>, Sense, f64)> = viol
            .iter()
            .take(5 * n)
            .map(|&(_, i, j)| {
                present[i * n + j] = true;
                (idx.convexity_terms(data, i, j), Sense::Ge, 0.0)
            })
            .collect();
        for (terms, sense, rhs) in &batch {
            lp.add_row(terms, *sense, *rhs);
        }
        convexity_rows += batch.len();
        spx.add_rows(&batch)?;
        rounds += 1;
    }

    let mut sol = spx.solution();
    let residuals = certify(&lp, &sol)?;
    sol.residuals = residuals;
    let objective = sol.objective_value;
    log::debug!(
        "drcr done n={n} d={d} delta={delta} objective={objective} rounds={rounds} rows={convexity_rows} \
         primal_inf={:e} gap={:e}",
        residuals.max_primal_infeasibility,
        residuals.relative_gap
    );
    let meta = FitMeta {
        objective,
        iterations: sol.iterations,
        delta: Some(delta),
    };
    let model = assemble(data, &idx, &sol.primal, cap, meta)?;
    Ok(DrcrFit {
        model,
        index: idx,
        delta,
        grad_cap: cap,
        objective,
        solution: sol.primal,
        convexity_rows,
        rounds,
        iterations: sol.iterations,
        residuals,
    })
}
