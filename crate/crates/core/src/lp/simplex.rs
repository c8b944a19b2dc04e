//! Bounded-variable two-phase primal simplex in row (active-set) form.
//!
//! Every internal constraint is `a^T x + s >= b` where `s` is the phase-one
//! variable; equality rows arrive as two opposite inequalities and `<=` rows
//! are negated. A vertex is a set of `nv = ncols + 1` linearly independent
//! active constraints (the working set). With `B` the working-set matrix
//! (one row per slot), column `t` of `B^{-1}` is the edge direction obtained
//! by releasing slot `t` and `lambda = B^{-T} obj` holds the multipliers.
//! `B` is kept as a sparse LU factorization with product-form updates.
//!
//! Pricing is steepest edge (multiplier squared over the squared norm of the
//! edge direction, with the norms updated at each pivot); after a run of
//! degenerate steps the right-hand sides are perturbed once, and after that
//! Bland's smallest-index rule takes over until progress resumes. The ratio test is a two-pass Harris test with a tiny tolerance.
//! Rows added after an optimal solve are handled by dual simplex steps from
//! the current vertex (with the same smallest-index fallback when they stall),
//! followed by a primal clean-up pass.

use alloc::vec;
use alloc::vec::Vec;

use super::{scaling, CsrMatrix, LinearProgram, LpSolution, ResidualReport, Sense, SolverOptions, Status};
use super::factor::Factor;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;
const STALL_LIMIT: usize = 50;
const REFRESH_EVERY: usize = 100;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-11;
const PERTURB: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Con {
    Row(u32),
    Lower(u32),
    Upper(u32),
    /// `x_j = lo_j = hi_j`; never released.
    Fixed(u32),
    /// `x_j = anchor_j`; holds a variable that is not at a bound. Released
    /// with either sign and never re-enters.
    Temp(u32),
}

impl Con {
    fn key(self) -> (u8, u32) {
        match self {
            Con::Row(i) => (0, i),
            Con::Lower(j) => (1, j),
            Con::Upper(j) => (2, j),
            Con::Fixed(j) => (3, j),
            Con::Temp(j) => (4, j),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct RowInfo {
    orig: u32,
    sign: f64,
    scale: f64,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

pub(crate) struct Simplex {
    ncols: usize,
    nv: usize,
    s: usize,
    n_orig_rows: usize,
    col_scale: Vec<f64>,
    cost: Vec<f64>,
    obj: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    row_start: Vec<usize>,
    row_idx: Vec<u32>,
    row_val: Vec<f64>,
    row_rhs: Vec<f64>,
    row_info: Vec<RowInfo>,
    slack: Vec<f64>,
    row_slot: Vec<u32>,
    var_slot: Vec<u32>,
    anchor: Vec<f64>,
    x: Vec<f64>,
    slots: Vec<Con>,
    factor: Factor,
    lambda: Vec<f64>,
    /// Squared norms of the edge directions, one per slot.
    gamma: Vec<f64>,
    /// Sign applied to the loaded direction.
    sigma: f64,
    /// `max(1, |p|_inf)`; pivot tolerances are relative to it.
    p_scale: f64,
    iterations: usize,
    max_iter: usize,
    bland: bool,
    stall: usize,
    since_refresh: usize,
    /// Amount subtracted from each row's rhs while perturbed.
    shift: Vec<f64>,
    perturbed: bool,
    may_perturb: bool,
    feas_tol: f64,
    dual_tol: f64,
    status: Status,
    farkas: Option<Vec<f64>>,
    ray: Option<Vec<f64>>,
    p: Vec<f64>,
    ap: Vec<f64>,
    w: Vec<f64>,
}

impl Simplex {
    pub(crate) fn new(
        lp: &LinearProgram,
        csr: &CsrMatrix,
        opts: &SolverOptions,
        start: Option<&[f64]>,
    ) -> Result<Self> {
        let ncols = csr.ncols;
        let nv = ncols + 1;
        let s = ncols;
        if nv >= NONE as usize {
            return Err(Error::invalid("too many columns"));
        }
        let (row_scale, col_scale) = if opts.scaling {
            scaling::geometric(csr, 4)
        } else {
            (vec![1.0; csr.nrows], vec![1.0; ncols])
        };
        let c = lp.objective();
        let mut cost: Vec<f64> = c.iter().zip(&col_scale).map(|(a, b)| a * b).collect();
        cost.push(0.0);
        let mut lo = Vec::with_capacity(nv);
        let mut hi = Vec::with_capacity(nv);
        for (j, &(l, h)) in lp.bounds().iter().enumerate() {
            lo.push(l / col_scale[j]);
            hi.push(h / col_scale[j]);
        }
        lo.push(0.0);
        hi.push(f64::INFINITY);

        let cmax = cost.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut spx = Simplex {
            ncols,
            nv,
            s,
            n_orig_rows: 0,
            col_scale,
            cost,
            obj: vec![0.0; nv],
            lo,
            hi,
            row_start: vec![0],
            row_idx: Vec::new(),
            row_val: Vec::new(),
            row_rhs: Vec::new(),
            row_info: Vec::new(),
            slack: Vec::new(),
            row_slot: Vec::new(),
            var_slot: vec![NONE; nv],
            anchor: vec![0.0; nv],
            x: vec![0.0; nv],
            slots: Vec::with_capacity(nv),
            factor: Factor::new(0, &[]).expect("empty factorization"),
            p_scale: 1.0,
            lambda: vec![0.0; nv],
            gamma: vec![1.0; nv],
            sigma: 1.0,
            iterations: 0,
            max_iter: opts.iteration_budget(csr.nrows, ncols),
            bland: false,
            stall: 0,
            since_refresh: 0,
            shift: Vec::new(),
            perturbed: false,
            may_perturb: true,
            feas_tol: (0.1 * opts.feas_tol).min(1e-9),
            dual_tol: 1e-9 * if cmax > 0.0 { cmax } else { 1.0 },
            status: Status::IterationLimit,
            farkas: None,
            ray: None,
            p: vec![0.0; nv],
            ap: Vec::new(),
            w: vec![0.0; nv],
        };
        for i in 0..csr.nrows {
            let (cols, vals) = csr.row(i);
            let terms: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
            spx.push_orig_row(&terms, lp.senses()[i], lp.rhs()[i], row_scale[i]);
        }

        for j in 0..ncols {
            let v = start.map_or(0.0, |st| st[j] / spx.col_scale[j]);
            let v = if v.is_finite() { v } else { 0.0 };
            spx.x[j] = v.max(spx.lo[j]).min(spx.hi[j]);
        }
        for j in 0..ncols {
            let (l, h, v) = (spx.lo[j], spx.hi[j], spx.x[j]);
            let con = if l == h {
                Con::Fixed(j as u32)
            } else if v == l {
                Con::Lower(j as u32)
            } else if v == h {
                Con::Upper(j as u32)
            } else {
                spx.anchor[j] = v;
                Con::Temp(j as u32)
            };
            spx.slots.push(con);
            spx.var_slot[j] = j as u32;
        }
        spx.recompute_slacks();

        let (worst, wi) = spx
            .slack
            .iter()
            .enumerate()
            .fold((0.0f64, usize::MAX), |(m, mi), (i, &v)| if v < m { (v, i) } else { (m, mi) });
        if worst >= -spx.feas_tol || wi == usize::MAX {
            spx.lo[s] = 0.0;
            spx.hi[s] = 0.0;
            spx.slots.push(Con::Fixed(s as u32));
            spx.var_slot[s] = s as u32;
            spx.obj.copy_from_slice(&spx.cost);
        } else {
            spx.x[s] = -worst;
            for v in spx.slack.iter_mut() {
                *v -= worst;
            }
            spx.slack[wi] = 0.0;
            spx.slots.push(Con::Row(wi as u32));
            spx.row_slot[wi] = s as u32;
            spx.obj[s] = 1.0;
        }
        spx.factor = Factor::new(nv, &spx.working_rows())
            .map_err(|_| Error::invalid("initial working set is singular"))?;
        spx.crash();
        spx.recompute_lambda();
        spx.recompute_gamma();
        Ok(spx)
    }

    /// Swaps anchors for rows that are tight at the start point. The point
    /// does not move; the vertex just gets a better-conditioned description.
    fn crash(&mut self) {
        let mut temps = self.slots.iter().filter(|c| matches!(c, Con::Temp(_))).count();
        for i in 0..self.row_rhs.len() {
            if temps == 0 {
                break;
            }
            if self.row_slot[i] != NONE || self.slack[i].abs() > self.feas_tol {
                continue;
            }
            self.fill_w(Con::Row(i as u32));
            let wmax = self.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut best: Option<(usize, f64)> = None;
            for (t, &c) in self.slots.iter().enumerate() {
                let a = self.w[t].abs();
                if matches!(c, Con::Temp(_)) && a >= 0.1 * wmax && a > PIVOT_TOL {
                    if best.map_or(true, |(_, b)| a > b) {
                        best = Some((t, a));
                    }
                }
            }
            if let Some((t, _)) = best {
                self.load_direction(t, 1.0);
                self.pivot(t, Con::Row(i as u32));
                temps -= 1;
            }
        }
        if self.iterations > 0 {
            log::debug!("simplex crash placed {} rows", self.iterations);
            self.iterations = 0;
            self.since_refresh = 0;
            self.refresh();
        }
    }

    fn push_orig_row(&mut self, terms: &[(usize, f64)], sense: Sense, rhs: f64, scale: f64) {
        let orig = self.n_orig_rows as u32;
        self.n_orig_rows += 1;
        let signs: &[f64] = match sense {
            Sense::Ge => &[1.0],
            Sense::Le => &[-1.0],
            Sense::Eq => &[1.0, -1.0],
        };
        for &sign in signs {
            for &(j, a) in terms {
                if a != 0.0 {
                    self.row_idx.push(j as u32);
                    self.row_val.push(scale * sign * a * self.col_scale[j]);
                }
            }
            self.row_start.push(self.row_idx.len());
            self.row_rhs.push(scale * sign * rhs);
            self.row_info.push(RowInfo { orig, sign, scale });
            self.row_slot.push(NONE);
            self.shift.push(0.0);
            self.slack.push(0.0);
            self.ap.push(0.0);
        }
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }

    pub(crate) fn status(&self) -> Status {
        self.status
    }

    /// Current primal point in original units.
    pub(crate) fn primal(&self) -> Vec<f64> {
        (0..self.ncols).map(|j| self.x[j] * self.col_scale[j]).collect()
    }

    pub(crate) fn solve(&mut self) {
        if self.hi[self.s] != 0.0 {
            match self.run_primal(true) {
                Outcome::IterationLimit => {
                    self.finish(Status::IterationLimit);
                    return;
                }
                Outcome::Unbounded | Outcome::Optimal => {}
            }
            self.refresh();
            if self.x[self.s] > self.feas_tol {
                self.farkas = Some(self.row_multipliers());
                self.finish(Status::Infeasible);
                return;
            }
            self.leave_phase_one();
        }
        self.optimize();
    }

    /// Appends rows and re-optimizes from the current vertex.
    pub(crate) fn add_rows(&mut self, rows: &[(Vec<(usize, f64)>, Sense, f64)]) -> Result<()> {
        for (terms, sense, rhs) in rows {
            if terms.iter().any(|&(j, a)| j >= self.ncols || !a.is_finite()) || !rhs.is_finite() {
                return Err(Error::invalid("added row is out of range or non-finite"));
            }
            let scale = scaling::row_factor(terms, &self.col_scale);
            let first = self.row_rhs.len();
            self.push_orig_row(terms, *sense, *rhs, scale);
            for i in first..self.row_rhs.len() {
                self.slack[i] = self.row_activity(i) - self.row_rhs[i];
            }
        }
        self.max_iter = self.max_iter.max(self.iterations + 200 * (self.row_rhs.len() + self.nv));
        if self.status != Status::Optimal {
            return Ok(());
        }
        self.status = Status::IterationLimit;
        self.may_perturb = true;
        match self.run_dual() {
            Some(true) => self.optimize(),
            Some(false) => self.finish(Status::Infeasible),
            None => self.finish(Status::IterationLimit),
        }
        Ok(())
    }

    fn optimize(&mut self) {
        loop {
            let outcome = self.run_primal(false);
            self.refresh();
            if self.perturbed {
                if let Outcome::IterationLimit = outcome {
                    self.finish(Status::IterationLimit);
                    return;
                }
                // Back to the true right-hand sides; the multipliers stay
                // dual feasible, so dual steps restore primal feasibility.
                self.unperturb();
                match self.run_dual() {
                    Some(true) => continue,
                    Some(false) => self.finish(Status::Infeasible),
                    None => self.finish(Status::IterationLimit),
                }
                return;
            }
            match outcome {
                Outcome::Optimal => {
                    // A refresh can expose small multiplier errors; polish once.
                    if self.price().is_some() {
                        if let Outcome::IterationLimit = self.run_primal(false) {
                            self.finish(Status::IterationLimit);
                            return;
                        }
                        self.refresh();
                    }
                    self.finish(Status::Optimal)
                }
                Outcome::Unbounded => self.finish(Status::Unbounded),
                Outcome::IterationLimit => self.finish(Status::IterationLimit),
            }
            return;
        }
    }

    /// Relaxes every row outside the working set by a small pseudo-random
    /// amount, which breaks ties among degenerate vertices.
    fn perturb(&mut self) {
        self.perturbed = true;
        self.may_perturb = false;
        for i in 0..self.row_rhs.len() {
            if self.row_slot[i] != NONE {
                continue;
            }
            let u = (mix(i as u64) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let eps = PERTURB * (1.0 + self.row_rhs[i].abs()) * (1.0 + u);
            self.shift[i] = eps;
            self.row_rhs[i] -= eps;
            self.slack[i] += eps;
        }
        log::debug!("simplex perturbed after {} iterations", self.iterations);
    }

    fn unperturb(&mut self) {
        for (b, e) in self.row_rhs.iter_mut().zip(self.shift.iter_mut()) {
            *b += *e;
            *e = 0.0;
        }
        self.perturbed = false;
        self.recompute_slacks();
        self.refresh();
    }

    fn finish(&mut self, status: Status) {
        self.status = status;
    }

    pub(crate) fn solution(&self) -> LpSolution {
        let primal = self.primal();
        let dual = if matches!(self.status, Status::Optimal | Status::IterationLimit) {
            self.row_multipliers()
        } else {
            vec![0.0; self.n_orig_rows]
        };
        let objective_value = (0..self.ncols)
            .map(|j| self.cost[j] * self.x[j])
            .sum();
        LpSolution {
            status: self.status,
            primal,
            dual,
            objective_value,
            residuals: ResidualReport::default(),
            iterations: self.iterations,
            farkas: self.farkas.clone(),
            ray: self.ray.clone(),
        }
    }

    fn row_multipliers(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.n_orig_rows];
        for (t, con) in self.slots.iter().enumerate() {
            if let Con::Row(i) = *con {
                let info = self.row_info[i as usize];
                y[info.orig as usize] += self.lambda[t] * info.scale * info.sign;
            }
        }
        y
    }

    // ----- constraint helpers -------------------------------------------

    fn row_activity(&self, i: usize) -> f64 {
        let mut v = self.x[self.s];
        for k in self.row_start[i]..self.row_start[i + 1] {
            v += self.row_val[k] * self.x[self.row_idx[k] as usize];
        }
        v
    }

    fn recompute_slacks(&mut self) {
        for i in 0..self.row_rhs.len() {
            self.slack[i] = self.row_activity(i) - self.row_rhs[i];
        }
    }

    fn recompute_lambda(&mut self) {
        self.lambda.copy_from_slice(&self.obj);
        self.factor.btran(&mut self.lambda);
    }

    fn recompute_gamma(&mut self) {
        let mut e = vec![0.0; self.nv];
        for t in 0..self.nv {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[t] = 1.0;
            self.factor.ftran(&mut e);
            self.gamma[t] = e.iter().map(|v| v * v).sum();
        }
    }

    fn con_slack(&self, c: Con) -> f64 {
        match c {
            Con::Row(i) => self.slack[i as usize],
            Con::Lower(j) | Con::Fixed(j) => self.x[j as usize] - self.lo[j as usize],
            Con::Upper(j) => self.hi[j as usize] - self.x[j as usize],
            Con::Temp(j) => self.x[j as usize] - self.anchor[j as usize],
        }
    }

    /// `a_c^T p` for the current direction.
    fn con_rate(&self, c: Con) -> f64 {
        match c {
            Con::Row(i) => self.ap[i as usize],
            Con::Lower(j) | Con::Fixed(j) | Con::Temp(j) => self.p[j as usize],
            Con::Upper(j) => -self.p[j as usize],
        }
    }

    fn release(&mut self, c: Con) {
        match c {
            Con::Row(i) => self.row_slot[i as usize] = NONE,
            Con::Lower(j) | Con::Upper(j) | Con::Fixed(j) | Con::Temp(j) => {
                self.var_slot[j as usize] = NONE
            }
        }
    }

    fn occupy(&mut self, c: Con, t: usize) {
        match c {
            Con::Row(i) => self.row_slot[i as usize] = t as u32,
            Con::Lower(j) | Con::Upper(j) | Con::Fixed(j) | Con::Temp(j) => {
                self.var_slot[j as usize] = t as u32
            }
        }
    }

    /// Sparse normal of constraint `c`.
    fn con_terms(&self, c: Con) -> Vec<(usize, f64)> {
        match c {
            Con::Row(i) => {
                let i = i as usize;
                let mut t: Vec<(usize, f64)> = (self.row_start[i]..self.row_start[i + 1])
                    .map(|k| (self.row_idx[k] as usize, self.row_val[k]))
                    .collect();
                t.push((self.s, 1.0));
                t
            }
            Con::Lower(j) | Con::Fixed(j) | Con::Temp(j) => vec![(j as usize, 1.0)],
            Con::Upper(j) => vec![(j as usize, -1.0)],
        }
    }

    fn working_rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.slots.iter().map(|&c| self.con_terms(c)).collect()
    }

    /// `w = B^{-T} a_c`, the coordinates of constraint `c` in the working set.
    fn fill_w(&mut self, c: Con) {
        self.w.iter_mut().for_each(|v| *v = 0.0);
        match c {
            Con::Row(i) => {
                let i = i as usize;
                for k in self.row_start[i]..self.row_start[i + 1] {
                    self.w[self.row_idx[k] as usize] += self.row_val[k];
                }
                self.w[self.s] += 1.0;
            }
            Con::Lower(j) | Con::Fixed(j) | Con::Temp(j) => self.w[j as usize] = 1.0,
            Con::Upper(j) => self.w[j as usize] = -1.0,
        }
        self.factor.btran(&mut self.w);
    }

    fn load_direction(&mut self, q: usize, sigma: f64) {
        self.p.iter_mut().for_each(|v| *v = 0.0);
        self.p[q] = sigma;
        self.sigma = sigma;
        self.factor.ftran(&mut self.p);
        self.p_scale = self.p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let (p, ps) = (&self.p, self.p[self.s]);
        for (i, a) in self.ap.iter_mut().enumerate() {
            let (b, e) = (self.row_start[i], self.row_start[i + 1]);
            let mut v = ps;
            for (&j, &r) in self.row_idx[b..e].iter().zip(&self.row_val[b..e]) {
                v += r * p[j as usize];
            }
            *a = v;
        }
    }

    fn step(&mut self, alpha: f64) {
        if alpha == 0.0 {
            return;
        }
        for (x, p) in self.x.iter_mut().zip(&self.p) {
            *x += alpha * p;
        }
        for (s, a) in self.slack.iter_mut().zip(&self.ap) {
            *s += alpha * a;
        }
    }

    /// Replaces the constraint in slot `q` by `c`. Expects `self.w` to hold
    /// `B^{-T} a_c` and `self.p` the direction of slot `q`.
    fn pivot(&mut self, q: usize, c: Con) {
        let wq = self.w[q];
        // New directions are d_t - (w_t / w_q) d_q and d_q / w_q.
        let gq: f64 = self.p.iter().map(|v| v * v).sum();
        let mut tau = self.p.clone();
        self.factor.btran(&mut tau);
        for t in 0..self.nv {
            let wt = self.w[t];
            if t == q || wt == 0.0 {
                continue;
            }
            let r = wt / wq;
            let g = self.gamma[t] - 2.0 * r * self.sigma * tau[t] + r * r * gq;
            self.gamma[t] = g.max(1e-12);
        }
        self.gamma[q] = (gq / (wq * wq)).max(1e-12);
        let theta = self.lambda[q] / wq;
        if theta != 0.0 {
            for (l, w) in self.lambda.iter_mut().zip(&self.w) {
                *l -= theta * w;
            }
        }
        self.lambda[q] = theta;
        self.factor.update(q, &self.w);

        let old = self.slots[q];
        self.release(old);
        self.slots[q] = c;
        self.occupy(c, q);
        self.iterations += 1;
        self.since_refresh += 1;
        if self.factor.is_stale() {
            self.reinvert();
        }
    }

    /// Iterative refinement of the vertex and the multipliers; reinverts the
    /// working set when refinement cannot restore accuracy.
    fn refresh(&mut self) {
        self.since_refresh = 0;
        for _ in 0..2 {
            let r = self.working_residual();
            let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst == 0.0 {
                break;
            }
            if worst > 1e-6 {
                self.reinvert();
            }
            let mut dx = r;
            self.factor.ftran(&mut dx);
            for (x, d) in self.x.iter_mut().zip(&dx) {
                *x += d;
            }
        }
        if self.lo[self.s] == self.hi[self.s] {
            self.x[self.s] = 0.0;
        }
        self.recompute_slacks();
        self.recompute_lambda();
    }

    fn working_residual(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|&c| match c {
                Con::Row(i) => self.row_rhs[i as usize] - self.row_activity(i as usize),
                Con::Lower(j) | Con::Fixed(j) => self.lo[j as usize] - self.x[j as usize],
                Con::Upper(j) => self.x[j as usize] - self.hi[j as usize],
                Con::Temp(j) => self.anchor[j as usize] - self.x[j as usize],
            })
            .collect()
    }

    /// Refactors the working set. Constraints that leave it singular are
    /// swapped for bounds or anchors on the uncovered variables.
    fn reinvert(&mut self) {
        loop {
            match Factor::new(self.nv, &self.working_rows()) {
                Ok(f) => {
                    self.factor = f;
                    break;
                }
                Err(sing) => {
                    log::debug!(
                        "simplex working set singular at iteration {}; replacing {} constraints",
                        self.iterations,
                        sing.rows.len()
                    );
                    for (&t, &j) in sing.rows.iter().zip(&sing.cols) {
                        let old = self.slots[t];
                        self.release(old);
                        let c = if self.lo[j] == self.hi[j] {
                            Con::Fixed(j as u32)
                        } else {
                            self.anchor[j] = self.x[j];
                            Con::Temp(j as u32)
                        };
                        self.slots[t] = c;
                        self.occupy(c, t);
                        self.gamma[t] = 1.0;
                    }
                }
            }
        }
        self.recompute_lambda();
    }

    // ----- primal iterations --------------------------------------------

    /// Slot to release and the direction sign, or `None` at optimality.
    fn price(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (t, &c) in self.slots.iter().enumerate() {
            let l = self.lambda[t];
            let (score, sigma) = match c {
                Con::Fixed(_) => continue,
                Con::Temp(_) => {
                    if l.abs() <= self.dual_tol {
                        continue;
                    }
                    (l * l / self.gamma[t], if l > 0.0 { -1.0 } else { 1.0 })
                }
                _ => {
                    if l >= -self.dual_tol {
                        continue;
                    }
                    (l * l / self.gamma[t], 1.0)
                }
            };
            let better = match best {
                None => true,
                Some((bt, bs, _)) => {
                    if self.bland {
                        c.key() < self.slots[bt].key()
                    } else {
                        score > bs
                    }
                }
            };
            if better {
                best = Some((t, score, sigma));
            }
        }
        best.map(|(t, _, s)| (t, s))
    }

    /// Calls `f(constraint, slack, rate)` for every constraint outside the
    /// working set that blocks the current direction.
    fn for_each_blocking(&self, q: usize, mut f: impl FnMut(Con, f64, f64)) {
        let tol = PIVOT_TOL * self.p_scale;
        for i in 0..self.row_rhs.len() {
            let slot = self.row_slot[i];
            if slot != NONE && slot as usize != q {
                continue;
            }
            let r = self.ap[i];
            if r < -tol {
                f(Con::Row(i as u32), self.slack[i].max(0.0), r);
            }
        }
        for j in 0..self.nv {
            let slot = self.var_slot[j];
            if slot != NONE && slot as usize != q {
                continue;
            }
            let pj = self.p[j];
            let (l, h) = (self.lo[j], self.hi[j]);
            if l == h {
                if pj.abs() > tol && slot == NONE {
                    f(Con::Fixed(j as u32), 0.0, -pj.abs());
                }
                continue;
            }
            if pj < -tol && l.is_finite() {
                f(Con::Lower(j as u32), (self.x[j] - l).max(0.0), pj);
            } else if pj > tol && h.is_finite() {
                f(Con::Upper(j as u32), (h - self.x[j]).max(0.0), -pj);
            }
        }
    }

    fn ratio_test(&self, q: usize) -> Option<(Con, f64)> {
        let mut theta_max = f64::INFINITY;
        self.for_each_blocking(q, |_, slack, rate| {
            theta_max = theta_max.min((slack + HARRIS_TOL) / -rate);
        });
        if theta_max == f64::INFINITY {
            return None;
        }
        let mut best: Option<(Con, f64, f64)> = None;
        let bland = self.bland;
        let mut min_ratio = f64::INFINITY;
        let mut max_rate = 0.0f64;
        if bland {
            self.for_each_blocking(q, |_, slack, rate| {
                min_ratio = min_ratio.min(slack / -rate);
            });
            self.for_each_blocking(q, |_, slack, rate| {
                if slack / -rate <= min_ratio {
                    max_rate = max_rate.max(-rate);
                }
            });
        }
        self.for_each_blocking(q, |c, slack, rate| {
            let ratio = slack / -rate;
            if bland {
                // Smallest index among the ties, skipping tiny pivots.
                if ratio > min_ratio || -rate < 1e-3 * max_rate {
                    return;
                }
                if best.map_or(true, |(bc, _, _)| c.key() < bc.key()) {
                    best = Some((c, ratio, rate));
                }
            } else {
                if ratio > theta_max {
                    return;
                }
                if best.map_or(true, |(_, _, br)| -rate > -br) {
                    best = Some((c, ratio, rate));
                }
            }
        });
        best.map(|(c, ratio, _)| (c, ratio))
    }

    fn run_primal(&mut self, phase_one: bool) -> Outcome {
        self.bland = false;
        self.stall = 0;
        loop {
            if phase_one && (self.var_slot[self.s] != NONE || self.x[self.s] <= 0.0) {
                return Outcome::Optimal;
            }
            if self.iterations >= self.max_iter {
                return Outcome::IterationLimit;
            }
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh();
            }
            let Some((q, sigma)) = self.price() else {
                return Outcome::Optimal;
            };
            self.load_direction(q, sigma);
            let Some((enter, alpha)) = self.ratio_test(q) else {
                if phase_one {
                    // s >= 0 always blocks a descent direction; numerically
                    // this means the multiplier is noise.
                    self.lambda[q] = 0.0;
                    continue;
                }
                let ray = (0..self.ncols).map(|j| self.p[j] * self.col_scale[j]).collect();
                self.ray = Some(ray);
                return Outcome::Unbounded;
            };
            let gain = alpha * self.lambda[q].abs();
            if gain <= 1e-13 * (1.0 + self.objective_scaled().abs()) {
                self.stall += 1;
                if self.stall > STALL_LIMIT {
                    if self.may_perturb {
                        // The ratio test above saw the old right-hand sides.
                        self.perturb();
                        self.stall = 0;
                        continue;
                    } else {
                        self.bland = true;
                    }
                }
            } else {
                self.stall = 0;
                self.bland = false;
            }
            self.step(alpha);
            self.fill_w(enter);
            if self.w[q].abs() < 1e-14 {
                // The blocking constraint is (numerically) dependent on the
                // rest of the working set; rebuild and try again.
                self.reinvert();
                self.iterations += 1;
                continue;
            }
            self.pivot(q, enter);
            if let Con::Row(i) = enter {
                self.slack[i as usize] = 0.0;
            }
        }
    }

    fn objective_scaled(&self) -> f64 {
        self.obj.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn leave_phase_one(&mut self) {
        let s = self.s;
        self.lo[s] = 0.0;
        self.hi[s] = 0.0;
        let slot = self.var_slot[s];
        if slot != NONE {
            self.slots[slot as usize] = Con::Fixed(s as u32);
        } else {
            self.fill_w(Con::Fixed(s as u32));
            let mut q = usize::MAX;
            let mut best = 0.0;
            for (t, &c) in self.slots.iter().enumerate() {
                if matches!(c, Con::Fixed(_)) {
                    continue;
                }
                let pref = if matches!(c, Con::Temp(_)) { 2.0 } else { 1.0 };
                if self.w[t].abs() * pref > best {
                    best = self.w[t].abs() * pref;
                    q = t;
                }
            }
            if q != usize::MAX {
                let wq = self.w[q];
                let alpha = -self.x[s] / wq;
                self.load_direction(q, 1.0);
                self.step(alpha);
                self.pivot(q, Con::Fixed(s as u32));
            }
        }
        self.x[s] = 0.0;
        self.obj.copy_from_slice(&self.cost);
        self.refresh();
    }

    // ----- dual iterations after adding rows -----------------------------

    /// Restores primal feasibility while keeping the multipliers dual
    /// feasible. `Some(true)` on success, `Some(false)` if the problem is
    /// infeasible, `None` on the iteration limit.
    fn run_dual(&mut self) -> Option<bool> {
        // Degenerate dual steps can cycle; after a run of them both choices
        // fall back to smallest-key (Bland) until the objective moves again.
        let mut stall = 0;
        loop {
            if self.iterations >= self.max_iter {
                return None;
            }
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh();
            }
            let bland = stall > STALL_LIMIT;
            let mut enter: Option<(Con, f64)> = None;
            let mut consider = |c: Con, v: f64| {
                let better = match enter {
                    None => true,
                    Some((bc, b)) => {
                        if bland {
                            c.key() < bc.key()
                        } else {
                            v > b
                        }
                    }
                };
                if better {
                    enter = Some((c, v));
                }
            };
            for i in 0..self.row_rhs.len() {
                if self.row_slot[i] == NONE && self.slack[i] < -self.feas_tol {
                    consider(Con::Row(i as u32), -self.slack[i]);
                }
            }
            for j in 0..self.ncols {
                if self.var_slot[j] != NONE {
                    continue;
                }
                let lv = self.lo[j] - self.x[j];
                let hv = self.x[j] - self.hi[j];
                if lv > self.feas_tol {
                    consider(Con::Lower(j as u32), lv);
                }
                if hv > self.feas_tol {
                    consider(Con::Upper(j as u32), hv);
                }
            }
            let Some((e, _)) = enter else {
                return Some(true);
            };
            self.fill_w(e);
            let tol = PIVOT_TOL * self.w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let mut theta_max = f64::INFINITY;
            for (t, &c) in self.slots.iter().enumerate() {
                let wt = self.w[t];
                match c {
                    Con::Fixed(_) => {}
                    Con::Temp(_) if wt.abs() > tol => {
                        theta_max = theta_max.min((self.lambda[t].abs() + self.dual_tol) / wt.abs())
                    }
                    Con::Temp(_) => {}
                    _ if wt > tol => {
                        theta_max = theta_max.min((self.lambda[t].max(0.0) + self.dual_tol) / wt)
                    }
                    _ => {}
                }
            }
            if theta_max == f64::INFINITY {
                self.farkas = Some(self.dual_farkas(e));
                return Some(false);
            }
            let ratio_of = |t: usize| {
                let wt = self.w[t];
                match self.slots[t] {
                    Con::Fixed(_) => None,
                    Con::Temp(_) => (wt.abs() > tol).then(|| self.lambda[t].abs() / wt.abs()),
                    _ => (wt > tol).then(|| self.lambda[t].max(0.0) / wt),
                }
            };
            let mut q = usize::MAX;
            if bland {
                let min_ratio = (0..self.slots.len()).filter_map(ratio_of).fold(f64::INFINITY, f64::min);
                for t in 0..self.slots.len() {
                    if ratio_of(t).is_some_and(|r| r <= min_ratio)
                        && (q == usize::MAX || self.slots[t].key() < self.slots[q].key())
                    {
                        q = t;
                    }
                }
            } else {
                let mut best = 0.0;
                for t in 0..self.slots.len() {
                    if ratio_of(t).is_some_and(|r| r <= theta_max) && self.w[t].abs() > best {
                        best = self.w[t].abs();
                        q = t;
                    }
                }
            }
            let theta = ratio_of(q).unwrap_or(0.0);
            let sigma = if self.w[q] < 0.0 { -1.0 } else { 1.0 };
            self.load_direction(q, sigma);
            let rate = self.con_rate(e);
            let alpha = -self.con_slack(e) / rate;
            let gain = theta * self.con_slack(e).abs();
            if gain <= 1e-13 * (1.0 + self.objective_scaled().abs()) {
                stall += 1;
            } else {
                stall = 0;
            }
            self.step(alpha);
            self.pivot(q, e);
            if let Con::Row(i) = e {
                self.slack[i as usize] = 0.0;
            }
        }
    }

    /// Row multipliers proving infeasibility when constraint `e` cannot be
    /// satisfied: `a_e = sum_t w_t a_t` with every released-sign `w_t <= 0`.
    fn dual_farkas(&self, e: Con) -> Vec<f64> {
        let mut y = vec![0.0; self.n_orig_rows];
        let mut add = |i: usize, u: f64| {
            let info = self.row_info[i];
            y[info.orig as usize] += u * info.scale * info.sign;
        };
        if let Con::Row(i) = e {
            add(i as usize, 1.0);
        }
        for (t, &c) in self.slots.iter().enumerate() {
            if let Con::Row(i) = c {
                add(i as usize, -self.w[t]);
            }
        }
        y
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
