//! Dense Mehrotra predictor-corrector interior-point method. Intended for
//! cross-checking the simplex on small problems only.

use alloc::vec;
use alloc::vec::Vec;

use super::{CsrMatrix, LinearProgram, LpSolution, ResidualReport, Sense, SolverOptions, Status};
use crate::linalg::Cholesky;

const MAX_ITER: usize = 200;

/// How an original column is recovered from standard-form columns.
#[derive(Clone, Copy)]
enum Map {
    Shift(usize, f64),
    Neg(usize, f64),
    Split(usize, usize),
    Const(f64),
}

struct Standard {
    m: usize,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    map: Vec<Map>,
}

fn to_standard(lp: &LinearProgram, csr: &CsrMatrix) -> Standard {
    let cost = lp.objective();
    let mut map = Vec::with_capacity(csr.ncols);
    let mut c = Vec::new();
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for (j, &(lo, hi)) in lp.bounds().iter().enumerate() {
        let k = c.len();
        if lo == hi {
            map.push(Map::Const(lo));
        } else if lo.is_finite() {
            map.push(Map::Shift(k, lo));
            c.push(cost[j]);
            if hi.is_finite() {
                upper_rows.push((k, hi - lo));
            }
        } else if hi.is_finite() {
            map.push(Map::Neg(k, hi));
            c.push(-cost[j]);
        } else {
            map.push(Map::Split(k, k + 1));
            c.push(cost[j]);
            c.push(-cost[j]);
        }
    }
    let n_struct = c.len();
    let n_slack = lp.senses().iter().filter(|s| **s != Sense::Eq).count() + upper_rows.len();
    let n = n_struct + n_slack;
    let m = csr.nrows + upper_rows.len();
    c.resize(n, 0.0);
    let mut a = vec![0.0; m * n];
    let mut b = vec![0.0; m];
    let mut next_slack = n_struct;
    for i in 0..csr.nrows {
        let mut rhs = lp.rhs()[i];
        let (cols, vals) = csr.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            match map[j] {
                Map::Shift(k, lo) => {
                    a[i * n + k] += v;
                    rhs -= v * lo;
                }
                Map::Neg(k, hi) => {
                    a[i * n + k] -= v;
                    rhs -= v * hi;
                }
                Map::Split(kp, km) => {
                    a[i * n + kp] += v;
                    a[i * n + km] -= v;
                }
                Map::Const(x) => rhs -= v * x,
            }
        }
        match lp.senses()[i] {
            Sense::Ge => {
                a[i * n + next_slack] = -1.0;
                next_slack += 1;
            }
            Sense::Le => {
                a[i * n + next_slack] = 1.0;
                next_slack += 1;
            }
            Sense::Eq => {}
        }
        b[i] = rhs;
    }
    for (r, &(k, width)) in upper_rows.iter().enumerate() {
        let i = csr.nrows + r;
        a[i * n + k] = 1.0;
        a[i * n + next_slack] = 1.0;
        next_slack += 1;
        b[i] = width;
    }
    Standard { m, n, a, b, c, map }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl Standard {
    fn ax(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| dot(&self.a[i * self.n..(i + 1) * self.n], x))
            .collect()
    }

    fn aty(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.m {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * y[i];
            }
        }
        out
    }

    /// Factor `A diag(d) A^T`.
    fn normal(&self, d: &[f64]) -> Option<Cholesky> {
        let (m, n) = (self.m, self.n);
        let mut mat = vec![0.0; m * m];
        for i in 0..m {
            let ri = &self.a[i * n..(i + 1) * n];
            for k in 0..=i {
                let rk = &self.a[k * n..(k + 1) * n];
                let mut s = 0.0;
                for j in 0..n {
                    s += ri[j] * d[j] * rk[j];
                }
                mat[i * m + k] = s;
                mat[k * m + i] = s;
            }
        }
        let scale = (0..m).fold(0.0f64, |a, i| a.max(mat[i * m + i]));
        Cholesky::factor(m, mat, 1e-14 * scale.max(1e-30))
    }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .fold(1.0f64, |a, (x, d)| a.min(-x / d))
}

pub(super) fn solve(lp: &LinearProgram, csr: &CsrMatrix, opts: &SolverOptions) -> LpSolution {
    let st = to_standard(lp, csr);
    let (m, n) = (st.m, st.n);
    let tol = (0.01 * opts.feas_tol).min(0.01 * opts.gap_tol).max(1e-13);

    let mut x = vec![1.0; n];
    let mut s = vec![1.0; n];
    let mut y = vec![0.0; m];
    let mut status = Status::IterationLimit;
    let mut iterations = 0;

    if m == 0 {
        if st.c.iter().any(|&v| v < 0.0) {
            status = Status::Unbounded;
        } else {
            status = Status::Optimal;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
    } else {
        // Mehrotra's starting point.
        if let Some(ch) = st.normal(&vec![1.0; n]) {
            let mut t = st.b.clone();
            ch.solve_in_place(&mut t);
            x = st.aty(&t);
            let mut ac = st.ax(&st.c);
            ch.solve_in_place(&mut ac);
            y = ac;
            let aty = st.aty(&y);
            s = st.c.iter().zip(&aty).map(|(c, a)| c - a).collect();
            let dx = (-1.5 * x.iter().fold(f64::INFINITY, |a, &v| a.min(v))).max(0.0);
            let ds = (-1.5 * s.iter().fold(f64::INFINITY, |a, &v| a.min(v))).max(0.0);
            x.iter_mut().for_each(|v| *v += dx);
            s.iter_mut().for_each(|v| *v += ds);
            let xs = dot(&x, &s);
            let sx: f64 = s.iter().sum::<f64>().max(1e-12);
            let xx: f64 = x.iter().sum::<f64>().max(1e-12);
            let dx2 = 0.5 * xs / sx;
            let ds2 = 0.5 * xs / xx;
            x.iter_mut().for_each(|v| *v = (*v + dx2).max(1e-4));
            s.iter_mut().for_each(|v| *v = (*v + ds2).max(1e-4));
        }
        let bnorm = 1.0 + norm_inf(&st.b);
        let cnorm = 1.0 + norm_inf(&st.c);
        for it in 0..MAX_ITER {
            iterations = it;
            let ax = st.ax(&x);
            let rp: Vec<f64> = st.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let aty = st.aty(&y);
            let rd: Vec<f64> = (0..n).map(|j| st.c[j] - aty[j] - s[j]).collect();
            let mu = dot(&x, &s) / n as f64;
            let pobj = dot(&st.c, &x);
            let dobj = dot(&st.b, &y);
            if norm_inf(&rp) / bnorm < tol
                && norm_inf(&rd) / cnorm < tol
                && (pobj - dobj).abs() / (1.0 + pobj.abs()) < tol
            {
                status = Status::Optimal;
                break;
            }
            if !mu.is_finite() || pobj.abs() > 1e30 || dobj.abs() > 1e30 {
                break;
            }
            let d: Vec<f64> = (0..n).map(|j| x[j] / s[j]).collect();
            let Some(ch) = st.normal(&d) else {
                break;
            };
            let newton = |rc: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
                let tmp: Vec<f64> = (0..n).map(|j| (rc[j] - x[j] * rd[j]) / s[j]).collect();
                let atmp = st.ax(&tmp);
                let mut dy: Vec<f64> = (0..m).map(|i| rp[i] - atmp[i]).collect();
                ch.solve_in_place(&mut dy);
                let atdy = st.aty(&dy);
                let ds: Vec<f64> = (0..n).map(|j| rd[j] - atdy[j]).collect();
                let dx: Vec<f64> = (0..n).map(|j| (rc[j] - x[j] * ds[j]) / s[j]).collect();
                (dx, dy, ds)
            };
            let rc_aff: Vec<f64> = (0..n).map(|j| -x[j] * s[j]).collect();
            let (dxa, _, dsa) = newton(&rc_aff);
            let ap = max_step(&x, &dxa);
            let ad = max_step(&s, &dsa);
            let mu_aff = (0..n)
                .map(|j| (x[j] + ap * dxa[j]) * (s[j] + ad * dsa[j]))
                .sum::<f64>()
                / n as f64;
            let sigma = libm::pow(mu_aff / mu, 3.0).min(1.0);
            let rc: Vec<f64> = (0..n)
                .map(|j| -x[j] * s[j] - dxa[j] * dsa[j] + sigma * mu)
                .collect();
            let (dx, dy, ds) = newton(&rc);
            let ap = (0.99 * max_step(&x, &dx)).min(1.0);
            let ad = (0.99 * max_step(&s, &ds)).min(1.0);
            for j in 0..n {
                x[j] += ap * dx[j];
                s[j] += ad * ds[j];
            }
            for i in 0..m {
                y[i] += ad * dy[i];
            }
        }
    }

    let primal: Vec<f64> = st
        .map
        .iter()
        .map(|mp| match *mp {
            Map::Shift(k, lo) => lo + x[k],
            Map::Neg(k, hi) => hi - x[k],
            Map::Split(a, b) => x[a] - x[b],
            Map::Const(v) => v,
        })
        .collect();
    let objective_value = dot(&lp.objective(), &primal);
    LpSolution {
        status,
        primal,
        dual: y[..csr.nrows].to_vec(),
        objective_value,
        residuals: ResidualReport::default(),
        iterations,
        farkas: None,
        ray: None,
    }
}
