//! Least-squares convex regression over max-affine functions with
//! `||xi_i||_inf <= c`.
//!
//! The QP
//!
//! ```text
//! min (1/n) sum (Y_i - g_i)^2
//! s.t. g_j - g_i - <xi_i, X_j - X_i> >= 0   (i != j)
//!      -c <= xi_i^k <= c
//! ```
//!
//! is solved by a Mehrotra predictor-corrector interior-point method. The
//! normal matrix `P + G^T Theta G` has a dense `g` block, a dense coupling
//! block `B` and a block-diagonal `xi` part with one `d x d` block per point,
//! so each Newton step reduces to an `n x n` Schur complement.
//!
//! The iterate satisfies the convexity rows only up to the solver tolerance.
//! The returned model is snapped: piece `i` becomes the piece attaining the
//! maximum at `X_i`, re-anchored there, which leaves the function unchanged at
//! the sample points and makes the interpolation identity exact.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Cholesky;
use crate::model::FitMeta;
use crate::{AffinePiece, Dataset, Error, MaxAffineModel, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LseConfig {
    /// Gradient cap `c`.
    pub c: f64,
    /// Relative tolerance on the primal, dual and complementarity residuals.
    pub tol: f64,
    pub max_iterations: usize,
}

impl LseConfig {
    pub fn new(c: f64) -> Self {
        LseConfig {
            c,
            tol: 1e-9,
            max_iterations: 200,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::invalid("gradient cap c must be positive and finite"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

/// Optimality residuals of the QP, in the units of the `(1/n) sum` objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// Largest constraint violation of the unsnapped iterate.
    pub primal: f64,
    /// `||grad f - G^T lambda||_inf`.
    pub dual: f64,
    /// Largest `lambda_r * slack_r`.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub struct LseFit {
    pub model: MaxAffineModel,
    /// `(1/n) sum (Y_i - f(X_i))^2` of the snapped model.
    pub objective: f64,
    pub kkt: KktReport,
    pub iterations: usize,
}

pub fn fit_convex_lse(data: &Dataset, cfg: &LseConfig) -> Result<MaxAffineModel> {
    fit_convex_lse_report(data, cfg).map(|f| f.model)
}

/// Convexity rows `(i, j)`, `i != j`, in lexicographic order. Columns:
/// `g_0..g_{n-1}`, then `xi_i^k` at `n + i*d + k`.
struct Rows<'a> {
    data: &'a Dataset,
    n: usize,
    d: usize,
}

impl Rows<'_> {
    fn count(&self) -> usize {
        self.n * (self.n - 1)
    }

    /// `w = A z`.
    fn apply(&self, z: &[f64], w: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        let mut r = 0;
        for i in 0..n {
            let xi = &z[n + i * d..n + (i + 1) * d];
            let at_i: f64 = xi.iter().zip(self.data.x(i)).map(|(s, x)| s * x).sum();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let at_j: f64 = xi.iter().zip(self.data.x(j)).map(|(s, x)| s * x).sum();
                w[r] = z[j] - z[i] - (at_j - at_i);
                r += 1;
            }
        }
    }

    /// `out += A^T y`.
    fn apply_t_add(&self, y: &[f64], out: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        let mut r = 0;
        for i in 0..n {
            let xi_x = self.data.x(i);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let v = y[r];
                r += 1;
                out[j] += v;
                out[i] -= v;
                let xj = self.data.x(j);
                for k in 0..d {
                    out[n + i * d + k] -= v * (xj[k] - xi_x[k]);
                }
            }
        }
    }
}

/// Factorization of `P + A^T diag(theta) A + diag(0, theta_box)`.
struct Normal {
    n: usize,
    d: usize,
    /// `B`, `n x (n d)` row-major.
    b: Vec<f64>,
    blocks: Vec<Cholesky>,
    schur: Cholesky,
}

impl Normal {
    fn new(rows: &Rows<'_>, theta: &[f64], theta_box: &[f64]) -> Result<Self> {
        let (n, d) = (rows.n, rows.d);
        let nd = n * d;
        let mut s = vec![0.0; n * n];
        let mut b = vec![0.0; n * nd];
        let mut blocks = Vec::with_capacity(n);
        let mut r = 0;
        for i in 0..n {
            s[i * n + i] += 1.0;
            let xi = rows.data.x(i);
            let mut dm = vec![0.0; d * d];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let t = theta[r];
                r += 1;
                s[i * n + i] += t;
                s[j * n + j] += t;
                s[i * n + j] -= t;
                s[j * n + i] -= t;
                let xj = rows.data.x(j);
                for k in 0..d {
                    let dk = xj[k] - xi[k];
                    b[j * nd + i * d + k] -= t * dk;
                    b[i * nd + i * d + k] += t * dk;
                    for l in 0..d {
                        dm[k * d + l] += t * dk * (xj[l] - xi[l]);
                    }
                }
            }
            let mut top = 0.0f64;
            for k in 0..d {
                dm[k * d + k] += theta_box[i * d + k];
                top = top.max(dm[k * d + k]);
            }
            blocks.push(Cholesky::factor(d, dm, 1e-14 * top.max(1e-300)).ok_or_else(singular)?);
        }
        let mut col = vec![0.0; d];
        let mut bd = vec![0.0; n * d];
        for (i, blk) in blocks.iter().enumerate() {
            for j in 0..n {
                col.copy_from_slice(&b[j * nd + i * d..j * nd + (i + 1) * d]);
                blk.solve_in_place(&mut col);
                bd[j * d..(j + 1) * d].copy_from_slice(&col);
            }
            for j in 0..n {
                let bj = &bd[j * d..(j + 1) * d];
                for l in 0..=j {
                    let bl = &b[l * nd + i * d..l * nd + (i + 1) * d];
                    let v: f64 = bj.iter().zip(bl).map(|(a, c)| a * c).sum();
                    s[j * n + l] -= v;
                }
            }
        }
        let mut top = 0.0f64;
        for j in 0..n {
            top = top.max(s[j * n + j]);
            for l in 0..j {
                s[l * n + j] = s[j * n + l];
            }
        }
        let schur = Cholesky::factor(n, s, 1e-14 * top).ok_or_else(singular)?;
        Ok(Normal {
            n,
            d,
            b,
            blocks,
            schur,
        })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        let nd = n * d;
        let (rg, rx) = rhs.split_at_mut(n);
        let mut dinv_rx = rx.to_vec();
        for (i, blk) in self.blocks.iter().enumerate() {
            blk.solve_in_place(&mut dinv_rx[i * d..(i + 1) * d]);
        }
        for j in 0..n {
            let row = &self.b[j * nd..(j + 1) * nd];
            rg[j] -= row.iter().zip(&dinv_rx).map(|(a, c)| a * c).sum::<f64>();
        }
        self.schur.solve_in_place(rg);
        for j in 0..n {
            let g = rg[j];
            if g == 0.0 {
                continue;
            }
            let row = &self.b[j * nd..(j + 1) * nd];
            for (r, a) in rx.iter_mut().zip(row) {
                *r -= a * g;
            }
        }
        for (i, blk) in self.blocks.iter().enumerate() {
            blk.solve_in_place(&mut rx[i * d..(i + 1) * d]);
        }
    }
}

fn singular() -> Error {
    Error::invalid("least-squares normal matrix is not positive definite")
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Largest step in `[0, 1]` keeping `v + a dv >= 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = 1.0f64;
    for (x, dx) in v.iter().zip(dv) {
        if *dx < 0.0 {
            a = a.min(-x / dx);
        }
    }
    a
}

/// Inequalities `G z >= h` stacked as: convexity rows (`h = 0`), then
/// `xi >= -c`, then `-xi >= -c`.
struct Ipm<'a> {
    rows: Rows<'a>,
    ys: &'a [f64],
    c: f64,
    mc: usize,
    nd: usize,
}

impl Ipm<'_> {
    fn total(&self) -> usize {
        self.mc + 2 * self.nd
    }

    fn cols(&self) -> usize {
        self.rows.n + self.nd
    }

    /// `G z - h`.
    fn activity(&self, z: &[f64], out: &mut [f64]) {
        let n = self.rows.n;
        self.rows.apply(z, &mut out[..self.mc]);
        for e in 0..self.nd {
            out[self.mc + e] = z[n + e] + self.c;
            out[self.mc + self.nd + e] = self.c - z[n + e];
        }
    }

    /// `G dz`.
    fn g_mul(&self, dz: &[f64], out: &mut [f64]) {
        let n = self.rows.n;
        self.rows.apply(dz, &mut out[..self.mc]);
        for e in 0..self.nd {
            out[self.mc + e] = dz[n + e];
            out[self.mc + self.nd + e] = -dz[n + e];
        }
    }

    /// `out = G^T u`.
    fn gt_mul(&self, u: &[f64], out: &mut [f64]) {
        let n = self.rows.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        self.rows.apply_t_add(&u[..self.mc], out);
        for e in 0..self.nd {
            out[n + e] += u[self.mc + e] - u[self.mc + self.nd + e];
        }
    }

    /// `P z + q - G^T lambda` with `P = diag(1, 0)`, `q = (-Y, 0)`.
    fn dual_residual(&self, z: &[f64], lambda: &[f64], out: &mut [f64]) {
        self.gt_mul(lambda, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
        for i in 0..self.rows.n {
            out[i] += z[i] - self.ys[i];
        }
    }
}

pub fn fit_convex_lse_report(data: &Dataset, cfg: &LseConfig) -> Result<LseFit> {
    cfg.validate()?;
    let (n, d) = (data.n(), data.d());
    if n < 2 {
        return Err(Error::invalid("least-squares convex regression needs n >= 2"));
    }
    let rows = Rows { data, n, d };
    let mc = rows.count();
    let ipm = Ipm {
        rows,
        ys: data.ys(),
        c: cfg.c,
        mc,
        nd: n * d,
    };
    let (m, nz) = (ipm.total(), ipm.cols());
    let ys = data.ys();

    // Objective 0.5 ||g - Y||^2, i.e. (n/2) times the reported one.
    let mean = ys.iter().sum::<f64>() / n as f64;
    let mut z = vec![0.0; nz];
    z[..n].iter_mut().for_each(|g| *g = mean);
    let mut act = vec![0.0; m];
    ipm.activity(&z, &mut act);
    let mut s: Vec<f64> = act.iter().map(|a| a.max(1.0)).collect();
    let mut lambda = vec![1.0; m];

    let y_scale = 1.0 + inf_norm(ys);
    let mut rd = vec![0.0; nz];
    let mut rp = vec![0.0; m];
    let mut rc = vec![0.0; m];
    let mut theta = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut rhs = vec![0.0; nz];
    let mut gdz = vec![0.0; m];
    let mut ds = vec![0.0; m];
    let mut dl = vec![0.0; m];
    let mut theta_box = vec![0.0; ipm.nd];

    let mut it = 0;
    loop {
        ipm.activity(&z, &mut act);
        for r in 0..m {
            rp[r] = act[r] - s[r];
        }
        ipm.dual_residual(&z, &lambda, &mut rd);
        let mu = s.iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        let obj = 0.5 * z[..n].iter().zip(ys).map(|(g, y)| (g - y) * (g - y)).sum::<f64>();
        let p_inf = inf_norm(&rp);
        let d_inf = inf_norm(&rd);
        if p_inf <= cfg.tol * (1.0 + cfg.c)
            && d_inf <= cfg.tol * y_scale
            && mu * m as f64 <= cfg.tol * (1.0 + obj)
        {
            break;
        }
        if it >= cfg.max_iterations {
            return Err(Error::NonConvergence {
                iterations: it,
                primal_residual: p_inf,
                dual_residual: d_inf * 2.0 / n as f64,
            });
        }
        it += 1;

        for r in 0..m {
            theta[r] = lambda[r] / s[r];
        }
        for e in 0..ipm.nd {
            theta_box[e] = theta[mc + e] + theta[mc + ipm.nd + e];
        }
        let normal = Normal::new(&ipm.rows, &theta[..mc], &theta_box)?;

        // Solves for (dz, ds, dl) given the complementarity residual in `rc`.
        let newton = |rc: &[f64], u: &mut [f64], rhs: &mut [f64], gdz: &mut [f64], ds: &mut [f64], dl: &mut [f64]| {
            for r in 0..m {
                u[r] = theta[r] * rp[r] + rc[r] / s[r];
            }
            ipm.gt_mul(u, rhs);
            for (h, g) in rhs.iter_mut().zip(&rd) {
                *h = -*h - g;
            }
            let target = rhs.to_vec();
            normal.solve(rhs);
            // One step of iterative refinement against the exact operator.
            ipm.g_mul(rhs, gdz);
            for r in 0..m {
                u[r] = theta[r] * gdz[r];
            }
            let mut back = vec![0.0; nz];
            ipm.gt_mul(u, &mut back);
            for i in 0..n {
                back[i] += rhs[i];
            }
            let mut corr: Vec<f64> = target.iter().zip(&back).map(|(t, b)| t - b).collect();
            normal.solve(&mut corr);
            for (x, c) in rhs.iter_mut().zip(&corr) {
                *x += c;
            }
            ipm.g_mul(rhs, gdz);
            for r in 0..m {
                ds[r] = gdz[r] + rp[r];
                dl[r] = -(rc[r] + lambda[r] * ds[r]) / s[r];
            }
        };

        // Predictor.
        for r in 0..m {
            rc[r] = s[r] * lambda[r];
        }
        newton(&rc, &mut u, &mut rhs, &mut gdz, &mut ds, &mut dl);
        let ap = max_step(&s, &ds);
        let ad = max_step(&lambda, &dl);
        let mu_aff = (0..m)
            .map(|r| (s[r] + ap * ds[r]) * (lambda[r] + ad * dl[r]))
            .sum::<f64>()
            / m as f64;
        let ratio = mu_aff / mu;
        let sigma = (ratio * ratio * ratio).min(1.0);

        // Corrector.
        for r in 0..m {
            rc[r] = s[r] * lambda[r] + ds[r] * dl[r] - sigma * mu;
        }
        newton(&rc, &mut u, &mut rhs, &mut gdz, &mut ds, &mut dl);
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&lambda, &dl))).min(1.0);
        for (x, dx) in z.iter_mut().zip(&rhs) {
            *x += alpha * dx;
        }
        for r in 0..m {
            s[r] += alpha * ds[r];
            lambda[r] += alpha * dl[r];
        }
    }

    if let Some((zp, lp)) = polish(&ipm, &z, &s, &lambda, cfg.tol, y_scale)? {
        z = zp;
        lambda = lp;
    }

    // Certificate in the units of the (1/n) objective.
    let scale = 2.0 / n as f64;
    let mut kkt = KktReport::default();
    ipm.activity(&z, &mut act);
    for r in 0..m {
        kkt.primal = kkt.primal.max(-act[r]);
        kkt.complementarity = kkt.complementarity.max(scale * lambda[r] * act[r].abs());
    }
    ipm.dual_residual(&z, &lambda, &mut rd);
    kkt.dual = scale * inf_norm(&rd);
    log::debug!("lse n={n} d={d} c={} iterations={it} kkt={kkt:?}", cfg.c);

    let pieces = snap(data, &z, cfg.c);
    let provisional = MaxAffineModel::new(d, pieces, Some(cfg.c), FitMeta::default())?;
    let fitted = provisional.predict_dataset(data)?;
    let objective = ys.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let model = MaxAffineModel::new(
        d,
        provisional.pieces().to_vec(),
        Some(cfg.c),
        FitMeta {
            objective,
            iterations: it,
            delta: None,
        },
    )?;
    Ok(LseFit {
        model,
        objective,
        kkt,
        iterations: it,
    })
}

/// Re-solves with the rows the interior point left active held as equalities.
/// Near-degenerate problems otherwise stop at a point that is only accurate to
/// the square root of the gap. Rows the equality solve violates join the
/// active set and the solve is repeated. The polished point is returned only
/// when it is feasible and no worse.
fn polish(
    ipm: &Ipm<'_>,
    z: &[f64],
    s: &[f64],
    lambda: &[f64],
    tol: f64,
    y_scale: f64,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let (n, m, nz) = (ipm.rows.n, ipm.total(), ipm.cols());
    let feas = 1e-12 * (1.0 + ipm.c);
    let mut active: Vec<bool> = (0..m).map(|r| s[r] < lambda[r]).collect();
    let mut y: Vec<f64> = (0..m).map(|r| if active[r] { lambda[r] } else { 0.0 }).collect();
    let mut zp = z.to_vec();
    let mut act = vec![0.0; m];
    for _ in 0..POLISH_ROUNDS {
        equality_solve(ipm, z, &active, &mut zp, &mut y)?;
        ipm.activity(&zp, &mut act);
        let mut grew = false;
        for r in 0..m {
            if !active[r] && act[r] < -feas {
                active[r] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    ipm.activity(&zp, &mut act);
    if act.iter().any(|a| *a < -feas) {
        return Ok(None);
    }
    let objective = |v: &[f64]| 0.5 * v[..n].iter().zip(ipm.ys).map(|(g, y)| (g - y) * (g - y)).sum::<f64>();
    let (before, after) = (objective(z), objective(&zp));
    if after > before + tol * (1.0 + before) {
        return Ok(None);
    }
    let yp: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    let mut rd = vec![0.0; nz];
    ipm.dual_residual(&zp, &yp, &mut rd);
    let mut rd_old = vec![0.0; nz];
    ipm.dual_residual(z, lambda, &mut rd_old);
    // Multiplier estimates carry roundoff amplified by the penalty, so the
    // certificate is only required to stay sane.
    if inf_norm(&rd) > inf_norm(&rd_old).max(libm::sqrt(tol) * y_scale) {
        return Ok(None);
    }
    Ok(Some((zp, yp)))
}

const POLISH_ROUNDS: usize = 6;

/// `min 0.5 ||g - Y||^2 + (EPS/2) ||xi - xi0||^2` with the `active` rows as
/// equalities, by the method of multipliers. `zp` and `y` carry the start and
/// return the result.
fn equality_solve(ipm: &Ipm<'_>, z0: &[f64], active: &[bool], zp: &mut [f64], y: &mut [f64]) -> Result<()> {
    const RHO: f64 = 1e5;
    // Keeps slopes the active rows leave free where the interior point put them.
    const EPS: f64 = 1e-11;
    let (n, m, nz) = (ipm.rows.n, ipm.total(), ipm.cols());
    let theta: Vec<f64> = active.iter().map(|&a| if a { RHO } else { 0.0 }).collect();
    let theta_box: Vec<f64> = (0..ipm.nd)
        .map(|e| theta[ipm.mc + e] + theta[ipm.mc + ipm.nd + e] + EPS)
        .collect();
    let normal = Normal::new(&ipm.rows, &theta[..ipm.mc], &theta_box)?;
    let mut act = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut step = vec![0.0; nz];
    for _ in 0..20 {
        // Newton steps taken as increments, so that large responses do not
        // cancel inside the solve.
        for _ in 0..2 {
            ipm.activity(zp, &mut act);
            for r in 0..m {
                u[r] = if active[r] { RHO * act[r] - y[r] } else { 0.0 };
            }
            ipm.gt_mul(&u, &mut step);
            for i in 0..n {
                step[i] += zp[i] - ipm.ys[i];
            }
            for e in 0..ipm.nd {
                step[n + e] += EPS * (zp[n + e] - z0[n + e]);
            }
            normal.solve(&mut step);
            for (x, dx) in zp.iter_mut().zip(&step) {
                *x -= dx;
            }
        }
        ipm.activity(zp, &mut act);
        let worst = (0..m).filter(|&r| active[r]).fold(0.0f64, |w, r| w.max(act[r].abs()));
        // Updating on roundoff-level activities only adds noise to `y`.
        if worst <= 1e-14 * (1.0 + ipm.c) {
            break;
        }
        for r in 0..m {
            if active[r] {
                y[r] -= RHO * act[r];
            }
        }
    }
    Ok(())
}

/// Replaces piece `i` by the piece attaining `max_j piece_j(X_i)`, anchored at
/// `X_i`.
fn snap(data: &Dataset, z: &[f64], c: f64) -> Vec<AffinePiece> {
    let (n, d) = (data.n(), data.d());
    let raw: Vec<AffinePiece> = (0..n)
        .map(|i| AffinePiece {
            g: z[i],
            xi: z[n + i * d..n + (i + 1) * d].iter().map(|v| v.clamp(-c, c)).collect(),
            anchor: data.x(i).to_vec(),
        })
        .collect();
    (0..n)
        .map(|i| {
            let x = data.x(i);
            let (mut best, mut val) = (i, raw[i].eval(x));
            for (j, p) in raw.iter().enumerate() {
                let v = p.eval(x);
                if v > val {
                    best = j;
                    val = v;
                }
            }
            AffinePiece {
                g: val,
                xi: raw[best].xi.clone(),
                anchor: x.to_vec(),
            }
        })
        .collect()
}
