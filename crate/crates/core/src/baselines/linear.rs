//! Linear regression `f(x) = b_0 + <b, x>`, fitted either by least absolute
//! deviations (an LP) or by ordinary least squares (normal equations).
//!
//! The fit is returned as a one-piece [`MaxAffineModel`] anchored at the
//! origin, so it shares prediction and loss code with the convex fits.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Cholesky;
use crate::lp::{solve_lp, LinearProgram, Sense, SolverOptions, Status};
use crate::model::FitMeta;
use crate::{AffinePiece, Dataset, Error, MaxAffineModel, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearLoss {
    /// Median regression.
    #[default]
    Absolute,
    Squared,
}

pub fn fit_linear(data: &Dataset, loss: LinearLoss) -> Result<MaxAffineModel> {
    let (beta, objective, iterations) = match loss {
        LinearLoss::Absolute => lad(data)?,
        LinearLoss::Squared => ols(data)?,
    };
    let d = data.d();
    let piece = AffinePiece {
        g: beta[0],
        xi: beta[1..].to_vec(),
        anchor: vec![0.0; d],
    };
    MaxAffineModel::new(
        d,
        vec![piece],
        None,
        FitMeta {
            objective,
            iterations,
            delta: None,
        },
    )
}

/// Columns `b_0, b_1..b_d, r_1..r_n`; minimize `(1/n) sum r_i` with
/// `r_i >= +-(Y_i - b_0 - <b, X_i>)`.
fn lad(data: &Dataset) -> Result<(Vec<f64>, f64, usize)> {
    let (n, d) = (data.n(), data.d());
    let mut lp = LinearProgram::new(1 + d + n);
    for j in 0..=d {
        lp.set_free(j);
    }
    for i in 0..n {
        let r = 1 + d + i;
        lp.add_objective(r, 1.0 / n as f64);
        lp.set_bounds(r, 0.0, f64::INFINITY);
        let x = data.x(i);
        let mut plus = vec![(r, 1.0), (0, 1.0)];
        let mut minus = vec![(r, 1.0), (0, -1.0)];
        for k in 0..d {
            plus.push((1 + k, x[k]));
            minus.push((1 + k, -x[k]));
        }
        lp.add_row(&plus, Sense::Ge, data.y(i));
        lp.add_row(&minus, Sense::Ge, -data.y(i));
    }
    let sol = solve_lp(&lp, &SolverOptions::default())?;
    if sol.status != Status::Optimal {
        return Err(Error::Solver {
            status: sol.status,
            iterations: sol.iterations,
            detail: "median regression LP".into(),
        });
    }
    Ok((sol.primal[..=d].to_vec(), sol.objective_value, sol.iterations))
}

fn ols(data: &Dataset) -> Result<(Vec<f64>, f64, usize)> {
    let (n, d) = (data.n(), data.d());
    let p = d + 1;
    let mut ata = vec![0.0; p * p];
    let mut aty = vec![0.0; p];
    let mut row = vec![1.0; p];
    for i in 0..n {
        row[1..].copy_from_slice(data.x(i));
        for a in 0..p {
            aty[a] += row[a] * data.y(i);
            for b in 0..p {
                ata[a * p + b] += row[a] * row[b];
            }
        }
    }
    let scale = ata.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let chol = Cholesky::factor(p, ata, 1e-12 * scale)
        .ok_or_else(|| Error::invalid("normal equations are not finite"))?;
    chol.solve_in_place(&mut aty);
    let beta = aty;
    let sse: f64 = (0..n)
        .map(|i| {
            let f = beta[0] + beta[1..].iter().zip(data.x(i)).map(|(b, x)| b * x).sum::<f64>();
            (data.y(i) - f) * (data.y(i) - f)
        })
        .sum();
    Ok((beta, sse / n as f64, 0))
}
