//! Brute-force search over transport plans for the worst-case expected
//! absolute loss.
//!
//! A plan gives point `i` a budget `eps_i` with `(1/n) sum eps_i <= delta`
//! and spends it by moving a fraction `q` of the point's mass a distance
//! `eps_i / q` along a direction of unit l1 norm. Budgets and fractions live
//! on the grid `{k/m}`; the grid for `2m` contains the one for `m`, so the
//! value can only grow as `m` doubles. Every plan is feasible, so the result
//! never exceeds the true supremum.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Dataset, Error, MaxAffineModel, Result};

pub const ORACLE_MAX_N: usize = 8;
pub const ORACLE_MAX_D: usize = 2;
pub const ORACLE_MAX_MOVES: usize = 4096;

fn directions(model: &MaxAffineModel, x: &[f64]) -> Vec<Vec<f64>> {
    let d = model.d();
    let mut out = Vec::with_capacity(2 * d + 2);
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut u = vec![0.0; d];
            u[k] = s;
            out.push(u);
        }
    }
    // The sign pattern of the active piece's gradient, normalized in l1.
    let active = model
        .pieces()
        .iter()
        .max_by(|a, b| a.eval(x).total_cmp(&b.eval(x)))
        .expect("models have pieces");
    let nnz = active.xi.iter().filter(|v| **v != 0.0).count();
    if nnz > 1 {
        let u: Vec<f64> = active.xi.iter().map(|v| v.signum() * (*v != 0.0) as u8 as f64 / nnz as f64).collect();
        out.push(u.iter().map(|v| -v).collect());
        out.push(u);
    }
    out
}

/// Approximates `sup { E_P |Y - f(X)| : W(P, P_n) <= delta }` under the cost
/// `||x - x'||_1` (responses cannot move) on a grid with `moves_per_point`
/// budget and mass levels per point.
pub fn worst_case_loss_oracle(
    model: &MaxAffineModel,
    data: &Dataset,
    delta: f64,
    moves_per_point: usize,
) -> Result<f64> {
    let (n, d) = (data.n(), data.d());
    if n > ORACLE_MAX_N || d > ORACLE_MAX_D {
        return Err(Error::invalid(alloc::format!(
            "the transport oracle is limited to n <= {ORACLE_MAX_N}, d <= {ORACLE_MAX_D}"
        )));
    }
    if model.d() != d {
        return Err(Error::invalid("dataset and model dimensions differ"));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid("delta must be finite and non-negative"));
    }
    if moves_per_point == 0 || moves_per_point > ORACLE_MAX_MOVES {
        return Err(Error::invalid(alloc::format!(
            "moves_per_point must be in 1..={ORACLE_MAX_MOVES}"
        )));
    }
    let base: Vec<f64> = (0..n)
        .map(|i| (data.y(i) - model.eval_unchecked(data.x(i))).abs())
        .collect();
    let empirical = base.iter().sum::<f64>() / n as f64;
    if delta == 0.0 {
        return Ok(empirical);
    }

    let m = moves_per_point;
    let total = n as f64 * delta;
    let mut moved = vec![0.0; d];
    // best[b]: largest total gain using b budget units on the points so far.
    let mut best = vec![0.0f64; m + 1];
    for i in 0..n {
        let x = data.x(i);
        let dirs = directions(model, x);
        let mut gain = vec![0.0f64; m + 1];
        for (k, g) in gain.iter_mut().enumerate().skip(1) {
            let eps = (k as f64 / m as f64) * total;
            for j in 1..=m {
                let q = j as f64 / m as f64;
                let dist = eps / q;
                for u in &dirs {
                    for ((mv, xv), uv) in moved.iter_mut().zip(x).zip(u) {
                        *mv = xv + dist * uv;
                    }
                    let loss = (data.y(i) - model.eval_unchecked(&moved)).abs();
                    *g = g.max(q * (loss - base[i]));
                }
            }
        }
        let prev = best.clone();
        for b in 0..=m {
            for k in 1..=b {
                best[b] = best[b].max(prev[b - k] + gain[k]);
            }
        }
    }
    Ok(empirical + best[m] / n as f64)
}
