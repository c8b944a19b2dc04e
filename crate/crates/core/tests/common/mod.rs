//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the solver being checked.

#![allow(dead_code)]

use drcr_core::lp::{LinearProgram, Sense};
use drcr_core::rng::Stream;

/// A small dense LP in the form the oracle works on: `a x (sense) b` plus
/// finite box bounds.
#[derive(Clone, Debug)]
pub struct DenseLp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DenseLp {
    pub fn to_lp(&self) -> LinearProgram {
        let n = self.c.len();
        let mut lp = LinearProgram::new(n);
        for (j, &c) in self.c.iter().enumerate() {
            lp.add_objective(j, c);
            lp.set_bounds(j, self.lo[j], self.hi[j]);
        }
        for ((row, &s), &b) in self.a.iter().zip(&self.senses).zip(&self.b) {
            let terms: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
            lp.add_row(&terms, s, b);
        }
        lp
    }
}

/// Random dense LP with at most `max_vars` variables and `max_rows` rows.
/// Most instances are feasible by construction (rows are slack around a
/// hidden point); every fifth gets a shifted row that may cut it off.
pub fn random_dense_lp(s: &mut Stream, max_vars: usize, max_rows: usize) -> DenseLp {
    let n = 1 + s.below(max_vars as u64) as usize;
    let m = 1 + s.below(max_rows as u64) as usize;
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for _ in 0..n {
        let l = -(s.uniform_in(0.5, 4.0)).floor();
        lo.push(if s.below(4) == 0 { 0.0 } else { l });
        hi.push(s.uniform_in(0.5, 4.0).ceil());
    }
    let x0: Vec<f64> = (0..n).map(|j| s.uniform_in(lo[j], hi[j])).collect();
    let c: Vec<f64> = (0..n).map(|_| (s.uniform_in(-3.0, 3.0) * 8.0).round() / 8.0).collect();
    let mut a = Vec::with_capacity(m);
    let mut senses = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let tighten = s.below(5) == 0;
    for i in 0..m {
        let row: Vec<f64> = (0..n)
            .map(|_| {
                if s.below(5) == 0 {
                    0.0
                } else {
                    (s.uniform_in(-2.0, 2.0) * 4.0).round() / 4.0
                }
            })
            .collect();
        let act: f64 = row.iter().zip(&x0).map(|(r, x)| r * x).sum();
        let slack = s.uniform_in(0.0, 1.5);
        let (sense, mut rhs) = match s.below(10) {
            0 => (Sense::Eq, act),
            1..=4 => (Sense::Le, act + slack),
            _ => (Sense::Ge, act - slack),
        };
        if tighten && i == 0 {
            rhs += match sense {
                Sense::Le => -4.0,
                _ => 4.0,
            };
        }
        a.push(row);
        senses.push(sense);
        b.push(rhs);
    }
    DenseLp { c, a, senses, b, lo, hi }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-10 {
            return None;
        }
        m.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    Some(x)
}

fn for_each_subset(total: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, total: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..total {
            if total - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, total, k, cur, f);
            cur.pop();
        }
    }
    rec(0, total, k, &mut Vec::with_capacity(k), f);
}

/// Optimal objective by enumerating every vertex of the (bounded) feasible
/// region; `None` when no vertex is feasible, i.e. the LP is infeasible.
pub fn vertex_enumeration(lp: &DenseLp, tol: f64) -> Option<f64> {
    optimal_vertices(lp, tol).map(|(obj, _)| obj)
}

/// The optimal objective together with every optimal vertex (duplicates
/// included).
pub fn optimal_vertices(lp: &DenseLp, tol: f64) -> Option<(f64, Vec<Vec<f64>>)> {
    let n = lp.c.len();
    // Candidate active constraints: every row, then lower and upper bounds.
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a.iter().cloned().zip(lp.b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), lp.lo[j]));
        rows.push((e, lp.hi[j]));
    }
    let feasible = |x: &[f64]| {
        for ((row, &s), &b) in lp.a.iter().zip(&lp.senses).zip(&lp.b) {
            let act: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let ok = match s {
                Sense::Le => act <= b + tol,
                Sense::Ge => act >= b - tol,
                Sense::Eq => (act - b).abs() <= tol,
            };
            if !ok {
                return false;
            }
        }
        (0..n).all(|j| x[j] >= lp.lo[j] - tol && x[j] <= lp.hi[j] + tol)
    };
    let mut vertices: Vec<(f64, Vec<f64>)> = Vec::new();
    for_each_subset(rows.len(), n, &mut |idx| {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].0.clone()).collect();
        let r: Vec<f64> = idx.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_dense(m, r) {
            if feasible(&x) {
                let obj: f64 = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
                vertices.push((obj, x));
            }
        }
    });
    let best = vertices.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    if vertices.is_empty() {
        return None;
    }
    let opt = vertices
        .into_iter()
        .filter(|v| v.0 <= best + tol)
        .map(|v| v.1)
        .collect();
    Some((best, opt))
}
