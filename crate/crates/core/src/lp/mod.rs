//! Sparse linear programming.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c^T x
//! subject to  a_i^T x  (>= | <= | =)  b_i      for every row i
//!             lo_j <= x_j <= hi_j              (either side may be infinite)
//! ```
//!
//! The default engine is a bounded-variable two-phase primal simplex. It keeps
//! its basis in row form: a vertex is described by `ncols` active constraints
//! (rows or variable bounds), so the dense basis inverse is `ncols x ncols`
//! no matter how many rows the problem has. Free variables start out held by
//! temporary constraints that the pricing step releases first. Equality rows
//! are split into two opposite inequalities when the problem is loaded.
//! A dense primal-dual interior-point method is available for cross-checking
//! small problems.
//!
//! Dual values follow the Lagrangian `c = A^T y + z`: `y_i >= 0` on `>=` rows,
//! `y_i <= 0` on `<=` rows, free on equalities; `z_j` may be positive only at a
//! finite lower bound and negative only at a finite upper bound.

mod factor;
mod ipm;
mod scaling;
mod simplex;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};

pub(crate) use simplex::Simplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// A linear program in triplet form. Variables default to `[0, +inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    num_cols: usize,
    objective: Vec<(usize, f64)>,
    triplets: Vec<(usize, usize, f64)>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    names: Option<Vec<String>>,
}

impl LinearProgram {
    pub fn new(num_cols: usize) -> Self {
        LinearProgram {
            num_cols,
            objective: Vec::new(),
            triplets: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); num_cols],
            names: None,
        }
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn num_rows(&self) -> usize {
        self.senses.len()
    }

    /// Adds `c` to the cost of column `col`.
    pub fn add_objective(&mut self, col: usize, c: f64) {
        self.objective.push((col, c));
    }

    pub fn set_bounds(&mut self, col: usize, lo: f64, hi: f64) {
        self.bounds[col] = (lo, hi);
    }

    pub fn set_free(&mut self, col: usize) {
        self.bounds[col] = (f64::NEG_INFINITY, f64::INFINITY);
    }

    pub fn set_names(&mut self, names: Vec<String>) {
        self.names = Some(names);
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, terms: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let r = self.senses.len();
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.triplets.extend(terms.iter().map(|&(c, v)| (r, c, v)));
        r
    }

    /// Raw triplet access; duplicates are summed by [`LinearProgram::canonical`].
    pub fn push_triplet(&mut self, row: usize, col: usize, value: f64) {
        self.triplets.push((row, col, value));
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Dense cost vector.
    pub fn objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_cols];
        for &(j, v) in &self.objective {
            if j < self.num_cols {
                c[j] += v;
            }
        }
        c
    }

    /// Validates the problem and returns its constraint matrix in compressed
    /// row form with duplicate entries summed and explicit zeros dropped.
    pub fn canonical(&self) -> Result<CsrMatrix> {
        let (m, n) = (self.num_rows(), self.num_cols);
        if self.rhs.len() != m {
            return Err(Error::invalid("rhs length differs from row count"));
        }
        if self.bounds.len() != n {
            return Err(Error::invalid("bounds length differs from column count"));
        }
        if let Some(names) = &self.names {
            if names.len() != n {
                return Err(Error::invalid("names length differs from column count"));
            }
        }
        for &(j, v) in &self.objective {
            if j >= n || !v.is_finite() {
                return Err(Error::invalid("objective entry out of range or non-finite"));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(Error::invalid(alloc::format!("invalid bounds on column {j}")));
            }
        }
        if self.rhs.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("non-finite right-hand side"));
        }
        let mut trip = self.triplets.clone();
        for &(r, c, v) in &trip {
            if r >= m || c >= n {
                return Err(Error::invalid(alloc::format!("triplet ({r}, {c}) out of range")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(alloc::format!("non-finite entry at ({r}, {c})")));
            }
        }
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; m + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut k = 0;
        while k < trip.len() {
            let (r, c, mut v) = trip[k];
            k += 1;
            while k < trip.len() && trip[k].0 == r && trip[k].1 == c {
                v += trip[k].2;
                k += 1;
            }
            if v != 0.0 {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..m {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(CsrMatrix {
            nrows: m,
            ncols: n,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Human-readable dump: one line per constraint with its name, sense,
    /// right-hand side and sparse terms, followed by the non-default bounds.
    pub fn to_text(&self) -> String {
        let name = |j: usize| -> String {
            match &self.names {
                Some(n) if j < n.len() => n[j].clone(),
                _ => alloc::format!("x{j}"),
            }
        };
        let mut out = String::new();
        let _ = write!(out, "minimize");
        for (j, c) in self.objective().iter().enumerate() {
            if *c != 0.0 {
                let _ = write!(out, " {c:+e} {}", name(j));
            }
        }
        out.push('\n');
        if let Ok(csr) = self.canonical() {
            for i in 0..csr.nrows {
                let _ = write!(
                    out,
                    "r{i} {} {:e} :",
                    self.senses[i].symbol(),
                    self.rhs[i]
                );
                let (cols, vals) = csr.row(i);
                for (c, v) in cols.iter().zip(vals) {
                    let _ = write!(out, " {v:+e} {}", name(*c));
                }
                out.push('\n');
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo != 0.0 || hi != f64::INFINITY {
                let _ = writeln!(out, "bound {} {lo:e} {hi:e}", name(j));
            }
        }
        out
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn mul_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            if y[i] == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                out[j] += a * y[i];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Simplex,
    InteriorPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Largest accepted constraint or bound violation.
    pub feas_tol: f64,
    /// Largest accepted `|primal - dual| / (1 + |primal|)`.
    pub gap_tol: f64,
    /// `None` means `200 * (rows + cols)`.
    pub max_iterations: Option<usize>,
    /// Geometric-mean row and column scaling.
    pub scaling: bool,
    pub algorithm: Algorithm,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            max_iterations: None,
            scaling: true,
            algorithm: Algorithm::Simplex,
        }
    }
}

impl SolverOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0) || !(self.gap_tol > 0.0) {
            return Err(Error::invalid("solver tolerances must be positive"));
        }
        Ok(())
    }

    pub(crate) fn iteration_budget(&self, rows: usize, cols: usize) -> usize {
        self.max_iterations.unwrap_or(200 * (rows + cols).max(1))
    }
}

/// Residuals recomputed from a primal/dual pair and the problem data alone.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualReport {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Largest violation of a row or a variable bound.
    pub max_primal_infeasibility: f64,
    /// Largest violation of a dual sign condition.
    pub max_dual_infeasibility: f64,
    /// `|primal_objective - dual_objective|`.
    pub complementarity_gap: f64,
    /// `complementarity_gap / (1 + |primal_objective|)`.
    pub relative_gap: f64,
    /// For an infeasibility witness `y`: `y^T b - sup_{lo <= x <= hi} y^T A x`.
    /// Positive means the witness proves infeasibility.
    pub farkas_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective_value: f64,
    pub residuals: ResidualReport,
    pub iterations: usize,
    /// Row multipliers proving infeasibility, when `status == Infeasible`.
    pub farkas: Option<Vec<f64>>,
    /// Improving direction, when `status == Unbounded`.
    pub ray: Option<Vec<f64>>,
}

impl LpSolution {
    /// Whether the residuals meet the tolerances in `opts`.
    pub fn within(&self, opts: &SolverOptions) -> bool {
        self.residuals.max_primal_infeasibility <= opts.feas_tol
            && self.residuals.max_dual_infeasibility <= opts.feas_tol
            && self.residuals.relative_gap <= opts.gap_tol
    }
}

/// Solves `lp` with the algorithm selected in `opts`.
pub fn solve_lp(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    solve_lp_from(lp, opts, None)
}

/// Like [`solve_lp`], starting the simplex from `start`. A feasible start
/// skips phase one entirely.
pub fn solve_lp_from(
    lp: &LinearProgram,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<LpSolution> {
    opts.validate()?;
    let csr = lp.canonical()?;
    if let Some(s) = start {
        if s.len() != lp.num_cols() {
            return Err(Error::invalid("start point has the wrong length"));
        }
    }
    let mut sol = match opts.algorithm {
        Algorithm::Simplex => {
            let mut spx = Simplex::new(lp, &csr, opts, start)?;
            spx.solve();
            spx.solution()
        }
        Algorithm::InteriorPoint => ipm::solve(lp, &csr, opts),
    };
    sol.residuals = residuals(lp, &csr, &sol);
    Ok(sol)
}

/// Recomputes every residual of `sol` from the problem data.
pub fn certify(lp: &LinearProgram, sol: &LpSolution) -> Result<ResidualReport> {
    let csr = lp.canonical()?;
    if sol.primal.len() != lp.num_cols() || sol.dual.len() != lp.num_rows() {
        return Err(Error::invalid("solution dimensions do not match the problem"));
    }
    if let Some(f) = &sol.farkas {
        if f.len() != lp.num_rows() {
            return Err(Error::invalid("Farkas witness has the wrong length"));
        }
    }
    Ok(residuals(lp, &csr, sol))
}

fn residuals(lp: &LinearProgram, csr: &CsrMatrix, sol: &LpSolution) -> ResidualReport {
    let c = lp.objective();
    let x = &sol.primal;
    let y = &sol.dual;
    let mut rep = ResidualReport::default();
    if x.len() != csr.ncols || y.len() != csr.nrows {
        rep.max_primal_infeasibility = f64::INFINITY;
        rep.max_dual_infeasibility = f64::INFINITY;
        return rep;
    }
    let ax = csr.mul_vec(x);
    let mut pinf: f64 = 0.0;
    for i in 0..csr.nrows {
        let b = lp.rhs[i];
        let v = match lp.senses[i] {
            Sense::Ge => b - ax[i],
            Sense::Le => ax[i] - b,
            Sense::Eq => (ax[i] - b).abs(),
        };
        pinf = pinf.max(v);
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        pinf = pinf.max(lo - x[j]).max(x[j] - hi);
    }
    rep.max_primal_infeasibility = pinf.max(0.0);
    rep.primal_objective = c.iter().zip(x).map(|(a, b)| a * b).sum();

    let mut dinf: f64 = 0.0;
    let mut dobj = 0.0;
    for i in 0..csr.nrows {
        let v = match lp.senses[i] {
            Sense::Ge => -y[i],
            Sense::Le => y[i],
            Sense::Eq => 0.0,
        };
        dinf = dinf.max(v);
        dobj += y[i] * lp.rhs[i];
    }
    let aty = csr.mul_transpose(y);
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let z = c[j] - aty[j];
        if z > 0.0 {
            if lo.is_finite() {
                dobj += z * lo;
            } else {
                dinf = dinf.max(z);
            }
        } else if z < 0.0 {
            if hi.is_finite() {
                dobj += z * hi;
            } else {
                dinf = dinf.max(-z);
            }
        }
    }
    rep.max_dual_infeasibility = dinf;
    rep.dual_objective = dobj;
    rep.complementarity_gap = (rep.primal_objective - dobj).abs();
    rep.relative_gap = rep.complementarity_gap / (1.0 + rep.primal_objective.abs());

    if let Some(w) = &sol.farkas {
        if w.len() == csr.nrows {
            let w: Vec<f64> = w
                .iter()
                .zip(&lp.senses)
                .map(|(&v, s)| match s {
                    Sense::Ge => v.max(0.0),
                    Sense::Le => v.min(0.0),
                    Sense::Eq => v,
                })
                .collect();
            let atw = csr.mul_transpose(&w);
            let mut sup = 0.0;
            for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
                let a = atw[j];
                if a > 0.0 {
                    sup += a * hi;
                } else if a < 0.0 {
                    sup += a * lo;
                }
            }
            let wb: f64 = w.iter().zip(&lp.rhs).map(|(a, b)| a * b).sum();
            rep.farkas_margin = Some(wb - sup);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_var() -> LinearProgram {
        // minimize x subject to x >= 1
        let mut lp = LinearProgram::new(1);
        lp.add_objective(0, 1.0);
        lp.set_free(0);
        lp.add_row(&[(0, 1.0)], Sense::Ge, 1.0);
        lp
    }

    #[test]
    fn x_at_least_one() {
        for algorithm in [Algorithm::Simplex, Algorithm::InteriorPoint] {
            let opts = SolverOptions {
                algorithm,
                ..Default::default()
            };
            let sol = solve_lp(&single_var(), &opts).unwrap();
            assert_eq!(sol.status, Status::Optimal);
            assert!((sol.primal[0] - 1.0).abs() < 1e-8);
            assert!((sol.objective_value - 1.0).abs() < 1e-8);
            assert!(sol.within(&opts));
        }
    }

    #[test]
    fn hand_built_pair_certifies_exactly() {
        let lp = single_var();
        let sol = LpSolution {
            status: Status::Optimal,
            primal: vec![1.0],
            dual: vec![1.0],
            objective_value: 1.0,
            residuals: ResidualReport::default(),
            iterations: 0,
            farkas: None,
            ray: None,
        };
        let rep = certify(&lp, &sol).unwrap();
        assert_eq!(rep.max_primal_infeasibility, 0.0);
        assert_eq!(rep.max_dual_infeasibility, 0.0);
        assert_eq!(rep.complementarity_gap, 0.0);

        let mut bumped = sol.clone();
        bumped.primal[0] -= 1e-3;
        let rep = certify(&lp, &bumped).unwrap();
        assert!(rep.max_primal_infeasibility >= 1e-3 - 1e-15);
    }

    #[test]
    fn certify_rejects_wrong_dimensions() {
        let lp = single_var();
        let sol = LpSolution {
            status: Status::Optimal,
            primal: vec![1.0, 2.0],
            dual: vec![1.0],
            objective_value: 1.0,
            residuals: ResidualReport::default(),
            iterations: 0,
            farkas: None,
            ray: None,
        };
        assert!(matches!(certify(&lp, &sol), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn triangle_face() {
        // minimize -x - y s.t. x + y <= 1, x, y in [0, 1]
        let mut lp = LinearProgram::new(2);
        lp.add_objective(0, -1.0);
        lp.add_objective(1, -1.0);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        lp.add_row(&[(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        let sol = solve_lp(&lp, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective_value + 1.0).abs() < 1e-9);
        assert!((sol.primal[0] + sol.primal[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_has_witness() {
        let mut lp = LinearProgram::new(2);
        lp.add_objective(0, 1.0);
        lp.add_row(&[(0, 1.0), (1, 1.0)], Sense::Ge, 3.0);
        lp.add_row(&[(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        let sol = solve_lp(&lp, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(sol.residuals.farkas_margin.unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn unbounded_has_ray() {
        let mut lp = LinearProgram::new(2);
        lp.add_objective(0, -1.0);
        lp.add_row(&[(0, 1.0), (1, -1.0)], Sense::Le, 1.0);
        let sol = solve_lp(&lp, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Unbounded);
        let ray = sol.ray.unwrap();
        assert!(ray[0] > 0.0);
    }

    #[test]
    fn equality_rows_and_fixed_variables() {
        // minimize x + 2y + 3z s.t. x + y + z = 2, y fixed at 0.5, z >= 0
        let mut lp = LinearProgram::new(3);
        lp.add_objective(0, 1.0);
        lp.add_objective(1, 2.0);
        lp.add_objective(2, 3.0);
        lp.set_bounds(1, 0.5, 0.5);
        lp.set_bounds(0, 0.0, 1.0);
        lp.add_row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 2.0);
        let opts = SolverOptions::default();
        let sol = solve_lp(&lp, &opts).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective_value - 3.5).abs() < 1e-9);
        assert!(sol.within(&opts));
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(&[(3, 1.0)], Sense::Ge, 0.0);
        assert!(solve_lp(&lp, &SolverOptions::default()).is_err());
        let mut lp = LinearProgram::new(1);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(solve_lp(&lp, &SolverOptions::default()).is_err());
        let bad = SolverOptions {
            feas_tol: 0.0,
            ..Default::default()
        };
        assert!(solve_lp(&LinearProgram::new(1), &bad).is_err());
    }

    #[test]
    fn duplicates_are_summed() {
        let mut lp = LinearProgram::new(2);
        lp.push_triplet(0, 1, 1.0);
        lp.push_triplet(0, 1, 2.0);
        lp.push_triplet(0, 0, 0.0);
        lp.add_row(&[], Sense::Le, 1.0);
        let csr = lp.canonical().unwrap();
        assert_eq!(csr.row(0), (&[1usize][..], &[3.0][..]));
    }

    #[test]
    fn text_export_lists_rows() {
        let text = single_var().to_text();
        assert!(text.starts_with("minimize +1e0 x0"));
        assert!(text.contains("r0 >= 1e0 : +1e0 x0"));
        assert!(text.contains("bound x0 -inf inf"));
    }
}
