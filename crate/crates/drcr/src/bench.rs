//! Experiment harness: the synthetic benchmark matrix, the real-data
//! protocol, and their CSV outputs.

use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use drcr_core::baselines::{fit_convex_lse, fit_kernel, fit_linear, KernelModel, LinearLoss, LseConfig};
use drcr_core::fit::{Radius, Schedule};
use drcr_core::model::LossReport;
use drcr_core::rng::derive_seed;
use drcr_core::synth::{f_star, generate_synthetic, CovariateDist, SyntheticSpec};
use drcr_core::{empirical_l1, fit_drcr, Dataset, FitConfig, MaxAffineModel};
use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{fmt17, parse_number, Schema, Table};
use crate::preprocess::{preprocess_split, PlanTemplate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Drcr,
    /// Least-squares convex regression with gradient cap `c`.
    Lse(f64),
    Kernel,
    Linear(LinearLoss),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Drcr => write!(f, "drcr"),
            Method::Lse(c) => write!(f, "lse({c})"),
            Method::Kernel => write!(f, "kernel"),
            Method::Linear(LinearLoss::Absolute) => write!(f, "linear"),
            Method::Linear(LinearLoss::Squared) => write!(f, "linear(squared)"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `drcr`, `lse(c)` (or `lse:c`), `kernel`, `linear`, `linear(squared)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.find(['(', ':', '=']) {
            Some(k) => (&s[..k], Some(s[k + 1..].trim_end_matches(')').trim())),
            None => (s.as_str(), None),
        };
        let bad = || Error::invalid(format!("unknown method `{s}`"));
        match (name.trim(), arg) {
            ("drcr", None) => Ok(Method::Drcr),
            ("kernel", None) => Ok(Method::Kernel),
            ("linear" | "lr" | "lad", None) => Ok(Method::Linear(LinearLoss::Absolute)),
            ("ols", None) => Ok(Method::Linear(LinearLoss::Squared)),
            ("linear" | "lr", Some("absolute" | "abs" | "l1")) => Ok(Method::Linear(LinearLoss::Absolute)),
            ("linear" | "lr", Some("squared" | "l2")) => Ok(Method::Linear(LinearLoss::Squared)),
            ("lse", Some(c)) => match parse_number(c) {
                Some(c) if c > 0.0 => Ok(Method::Lse(c)),
                _ => Err(Error::invalid(format!("lse needs a positive cap, got `{c}`"))),
            },
            _ => Err(bad()),
        }
    }
}

pub fn parse_methods(list: &[String]) -> Result<Vec<Method>> {
    list.iter().map(|m| m.parse()).collect()
}

/// A fitted estimator of any kind.
#[derive(Debug, Clone)]
pub enum Fitted {
    Affine(MaxAffineModel),
    Kernel(KernelModel),
}

impl Fitted {
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(match self {
            Fitted::Affine(m) => m.predict_dataset(data)?,
            Fitted::Kernel(m) => m.predict_dataset(data)?,
        })
    }
}

pub fn fit_method(method: Method, data: &Dataset, drcr: &FitConfig) -> Result<Fitted> {
    Ok(match method {
        Method::Drcr => Fitted::Affine(fit_drcr(data, drcr)?),
        Method::Lse(c) => Fitted::Affine(fit_convex_lse(data, &LseConfig::new(c))?),
        Method::Kernel => Fitted::Kernel(fit_kernel(data)?),
        Method::Linear(loss) => Fitted::Affine(fit_linear(data, loss)?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub d: usize,
    pub n_list: Vec<usize>,
    pub dist: CovariateDist,
    pub noise_sigma: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub radius: Radius,
    /// `None` means `ln n`.
    pub grad_cap: Option<f64>,
}

impl ExperimentSpec {
    /// The synthetic setting with `delta_n = n^(-2/d)`.
    pub fn standard(methods: Vec<Method>, n_list: Vec<usize>, replications: usize, base_seed: u64) -> Self {
        ExperimentSpec {
            methods,
            d: 5,
            n_list,
            dist: CovariateDist::Gaussian,
            noise_sigma: 0.2,
            replications,
            base_seed,
            radius: Radius::Schedule {
                kind: Schedule::Experimental,
                gamma: None,
                multiplier: 1.0,
            },
            grad_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods requested"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.n_list.is_empty() {
            return Err(Error::invalid("n_list is empty"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_list must be strictly ascending"));
        }
        for &n in &self.n_list {
            SyntheticSpec {
                n,
                d: self.d,
                dist: self.dist,
                noise_sigma: self.noise_sigma,
                seed: 0,
            }
            .validate()?;
        }
        Ok(())
    }

    pub fn drcr_config(&self) -> FitConfig {
        FitConfig {
            radius: self.radius,
            grad_cap: self.grad_cap,
            ..FitConfig::default()
        }
    }

    /// Seed of replication `rep` at sample size `n`.
    pub fn data_seed(&self, rep: usize, n: usize) -> u64 {
        derive_seed(self.base_seed, &[rep as u64, n as u64])
    }

    pub fn dataset(&self, rep: usize, n: usize) -> drcr_core::Result<Dataset> {
        generate_synthetic(&SyntheticSpec {
            n,
            d: self.d,
            dist: self.dist,
            noise_sigma: self.noise_sigma,
            seed: self.data_seed(rep, n),
        })
    }
}

/// Aggregate over the successful runs of one `(method, n)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub method: String,
    pub n: usize,
    pub dist: String,
    pub runs: usize,
    pub failures: usize,
    pub mean_l1: f64,
    pub se_l1: f64,
    pub mean_l2: f64,
    pub se_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub method: String,
    pub n: usize,
    pub rep: usize,
    pub message: String,
}

/// Mean wall-clock seconds per run. Kept apart from the cells since it is
/// the one thing that changes between identical runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub method: String,
    pub n: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub cells: Vec<Cell>,
    pub failures: Vec<Failure>,
    pub timings: Vec<Timing>,
}

impl ResultTable {
    pub fn cell(&self, method: &str, n: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.method == method && c.n == n)
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.method) {
                out.push(c.method.clone());
            }
        }
        out
    }
}

type Outcome = (Result<(f64, f64)>, f64);

fn mean_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn one_replication(spec: &ExperimentSpec, cfg: &FitConfig, rep: usize, n: usize) -> Vec<Outcome> {
    let data = match spec.dataset(rep, n) {
        Ok(d) => d,
        Err(e) => return spec.methods.iter().map(|_| (Err(e.clone().into()), 0.0)).collect(),
    };
    let truth: Vec<f64> = data.rows().map(f_star).collect();
    spec.methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let loss = fit_method(m, &data, cfg)
                .and_then(|f| f.predict_dataset(&data))
                .and_then(|pred| Ok(LossReport::between(&pred, &truth)?))
                .map(|r| (r.l1, r.l2));
            (loss, start.elapsed().as_secs_f64())
        })
        .collect()
}

/// Every requested method on fresh data for each replication and `n`.
/// Failed runs are listed in `failures` and left out of the means.
pub fn run_benchmark(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let cfg = spec.drcr_config();
    let jobs: Vec<(usize, usize)> = (0..spec.replications)
        .flat_map(|r| spec.n_list.iter().map(move |&n| (r, n)))
        .collect();
    // Collected in job order, so scheduling cannot change the result.
    let outcomes: Vec<Vec<Outcome>> = jobs
        .par_iter()
        .map(|&(r, n)| one_replication(spec, &cfg, r, n))
        .collect();

    let mut table = ResultTable::default();
    for (mi, method) in spec.methods.iter().enumerate() {
        let name = method.to_string();
        for &n in &spec.n_list {
            let (mut l1, mut l2, mut secs) = (Vec::new(), Vec::new(), 0.0);
            let mut failures = 0;
            for (&(r, jn), out) in jobs.iter().zip(&outcomes) {
                if jn != n {
                    continue;
                }
                let (res, t) = &out[mi];
                secs += t;
                match res {
                    Ok((a, b)) => {
                        l1.push(*a);
                        l2.push(*b);
                    }
                    Err(e) => {
                        failures += 1;
                        warn!("method={name} n={n} rep={r} failed: {e}");
                        table.failures.push(Failure {
                            method: name.clone(),
                            n,
                            rep: r,
                            message: e.to_string(),
                        });
                    }
                }
            }
            let (mean_l1, se_l1) = mean_se(&l1);
            let (mean_l2, se_l2) = mean_se(&l2);
            info!("method={name} n={n} runs={} mean_l1={mean_l1:.6} mean_l2={mean_l2:.6} seconds={secs:.3}", l1.len());
            table.cells.push(Cell {
                method: name.clone(),
                n,
                dist: spec.dist.name().to_owned(),
                runs: l1.len(),
                failures,
                mean_l1,
                se_l1,
                mean_l2,
                se_l2,
            });
            table.timings.push(Timing {
                method: name.clone(),
                n,
                seconds: secs / spec.replications as f64,
            });
        }
    }
    Ok(table)
}

/// Slope of `ln(mean loss)` against `ln n` per method.
#[derive(Debug, Clone, PartialEq)]
pub struct Slope {
    pub method: String,
    pub metric: &'static str,
    pub slope: f64,
    pub points: usize,
}

pub fn loglog_slopes(table: &ResultTable) -> Vec<Slope> {
    let mut out = Vec::new();
    for method in table.methods() {
        for metric in ["l1", "l2"] {
            let pts: Vec<(f64, f64)> = table
                .cells
                .iter()
                .filter(|c| c.method == method)
                .map(|c| (c.n as f64, if metric == "l1" { c.mean_l1 } else { c.mean_l2 }))
                .filter(|(_, v)| *v > 0.0 && v.is_finite())
                .map(|(n, v)| (n.ln(), v.ln()))
                .collect();
            let slope = if pts.len() < 2 {
                f64::NAN
            } else {
                let k = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
                sxy / sxx
            };
            out.push(Slope {
                method: method.clone(),
                metric,
                slope,
                points: pts.len(),
            });
        }
    }
    out
}

pub const RESULTS_FILE: &str = "results.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const SLOPES_FILE: &str = "slopes.csv";
pub const REAL_DATA_FILE: &str = "real_data.csv";
const RESULTS_HEADER: [&str; 9] = [
    "method", "n", "dist", "runs", "failures", "mean_l1", "se_l1", "mean_l2", "se_l2",
];

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Writes `results.csv`, `plot_l1.csv`, `plot_l2.csv`, `slopes.csv` and
/// `failures.csv` into `dir`. Timings are not written, so identical specs
/// give identical bytes.
pub fn emit(table: &ResultTable, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if table.cells.is_empty() {
        return Err(Error::invalid("nothing to emit: the table has no cells"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join(RESULTS_FILE);
    let mut w = writer(&path)?;
    w.write_record(RESULTS_HEADER).map_err(|e| csv_err(&path, e))?;
    for c in &table.cells {
        w.write_record([
            c.method.clone(),
            c.n.to_string(),
            c.dist.clone(),
            c.runs.to_string(),
            c.failures.to_string(),
            fmt17(c.mean_l1),
            fmt17(c.se_l1),
            fmt17(c.mean_l2),
            fmt17(c.se_l2),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    finish(&path, w)?;
    written.push(path);

    for metric in ["l1", "l2"] {
        let path = dir.join(format!("plot_{metric}.csv"));
        let mut w = writer(&path)?;
        w.write_record(["method", "n", "mean", "stderr"])
            .map_err(|e| csv_err(&path, e))?;
        for c in &table.cells {
            let (m, se) = if metric == "l1" { (c.mean_l1, c.se_l1) } else { (c.mean_l2, c.se_l2) };
            w.write_record([c.method.clone(), c.n.to_string(), fmt17(m), fmt17(se)])
                .map_err(|e| csv_err(&path, e))?;
        }
        finish(&path, w)?;
        written.push(path);
    }

    let path = dir.join(SLOPES_FILE);
    let mut w = writer(&path)?;
    w.write_record(["method", "metric", "slope", "points"])
        .map_err(|e| csv_err(&path, e))?;
    for s in loglog_slopes(table) {
        w.write_record([s.method, s.metric.to_owned(), fmt17(s.slope), s.points.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    finish(&path, w)?;
    written.push(path);

    written.push(write_failures(dir, &table.failures)?);
    Ok(written)
}

fn write_failures(dir: &Path, failures: &[Failure]) -> Result<PathBuf> {
    let path = dir.join(FAILURES_FILE);
    let mut w = writer(&path)?;
    w.write_record(["method", "n", "rep", "message"])
        .map_err(|e| csv_err(&path, e))?;
    for f in failures {
        w.write_record([f.method.clone(), f.n.to_string(), f.rep.to_string(), f.message.clone()])
            .map_err(|e| csv_err(&path, e))?;
    }
    finish(&path, w)?;
    Ok(path)
}

/// Reads `results.csv` back into cells.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<Cell>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |k: usize| Error::Parse {
            line,
            msg: format!("bad `{}` value `{}`", RESULTS_HEADER[k], &rec[k]),
        };
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(k));
        let float = |k: usize| rec[k].trim().parse::<f64>().map_err(|_| bad(k));
        cells.push(Cell {
            method: rec[0].to_owned(),
            n: int(1)?,
            dist: rec[2].to_owned(),
            runs: int(3)?,
            failures: int(4)?,
            mean_l1: float(5)?,
            se_l1: float(6)?,
            mean_l2: float(7)?,
            se_l2: float(8)?,
        });
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealDataSpec {
    pub methods: Vec<Method>,
    pub replications: usize,
    pub train_rows: usize,
    pub seed: u64,
    pub template: PlanTemplate,
    pub radius: Radius,
    pub grad_cap: Option<f64>,
}

impl RealDataSpec {
    /// DRCR, LSE with cap 10 and least-absolute-deviation regression on ten
    /// 400-row training splits.
    pub fn standard(seed: u64) -> Self {
        RealDataSpec {
            methods: vec![Method::Drcr, Method::Lse(10.0), Method::Linear(LinearLoss::Absolute)],
            replications: 10,
            train_rows: 400,
            seed,
            template: PlanTemplate::default(),
            radius: Radius::Schedule {
                kind: Schedule::Experimental,
                gamma: None,
                multiplier: 1.0,
            },
            grad_cap: None,
        }
    }
}

/// One line of the train/test table.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDataRow {
    pub method: String,
    pub runs: usize,
    pub failures: usize,
    pub train_l1: f64,
    pub train_se: f64,
    pub test_l1: f64,
    pub test_se: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealDataTable {
    pub rows: Vec<RealDataRow>,
    pub failures: Vec<Failure>,
    pub timings: Vec<Timing>,
}

impl RealDataTable {
    pub fn row(&self, method: &str) -> Option<&RealDataRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Train and test l1 error against the observed (preprocessed) responses,
/// averaged over seeded splits.
pub fn run_real_data(table: &Table, schema: &Schema, spec: &RealDataSpec) -> Result<RealDataTable> {
    if spec.methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    if spec.replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    if spec.train_rows >= table.len() {
        return Err(Error::invalid(format!(
            "train_rows {} leaves no test rows out of {}",
            spec.train_rows,
            table.len()
        )));
    }
    // Input problems surface before any fitting starts.
    let splits: Vec<_> = (0..spec.replications)
        .map(|r| preprocess_split(table, schema, &spec.template, spec.train_rows, spec.seed, r as u64))
        .collect::<Result<_>>()?;
    let cfg = FitConfig {
        radius: spec.radius,
        grad_cap: spec.grad_cap,
        ..FitConfig::default()
    };
    let outcomes: Vec<Vec<Outcome>> = splits
        .par_iter()
        .map(|split| {
            let test = split.test.as_ref().expect("train_rows < rows");
            spec.methods
                .iter()
                .map(|&m| {
                    let start = Instant::now();
                    let loss = fit_method(m, &split.train, &cfg).and_then(|f| {
                        let a = f.predict_dataset(&split.train)?;
                        let b = f.predict_dataset(test)?;
                        Ok((empirical_l1(&a, split.train.ys())?, empirical_l1(&b, test.ys())?))
                    });
                    (loss, start.elapsed().as_secs_f64())
                })
                .collect()
        })
        .collect();

    let mut out = RealDataTable::default();
    for (mi, method) in spec.methods.iter().enumerate() {
        let name = method.to_string();
        let (mut train, mut test, mut secs) = (Vec::new(), Vec::new(), 0.0);
        for (r, o) in outcomes.iter().enumerate() {
            let (res, t) = &o[mi];
            secs += t;
            match res {
                Ok((a, b)) => {
                    train.push(*a);
                    test.push(*b);
                }
                Err(e) => {
                    warn!("method={name} rep={r} failed: {e}");
                    out.failures.push(Failure {
                        method: name.clone(),
                        n: spec.train_rows,
                        rep: r,
                        message: e.to_string(),
                    });
                }
            }
        }
        let (train_l1, train_se) = mean_se(&train);
        let (test_l1, test_se) = mean_se(&test);
        info!("method={name} runs={} train_l1={train_l1:.6} test_l1={test_l1:.6} seconds={secs:.3}", train.len());
        out.rows.push(RealDataRow {
            method: name.clone(),
            runs: train.len(),
            failures: spec.replications - train.len(),
            train_l1,
            train_se,
            test_l1,
            test_se,
        });
        out.timings.push(Timing {
            method: name,
            n: spec.train_rows,
            seconds: secs / spec.replications as f64,
        });
    }
    Ok(out)
}

/// Writes `real_data.csv` and `failures.csv` into `dir`.
pub fn emit_real_data(table: &RealDataTable, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::invalid("nothing to emit: the table has no rows"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(REAL_DATA_FILE);
    let mut w = writer(&path)?;
    w.write_record(["method", "runs", "failures", "train_l1", "train_se", "test_l1", "test_se"])
        .map_err(|e| csv_err(&path, e))?;
    for r in &table.rows {
        w.write_record([
            r.method.clone(),
            r.runs.to_string(),
            r.failures.to_string(),
            fmt17(r.train_l1),
            fmt17(r.train_se),
            fmt17(r.test_l1),
            fmt17(r.test_se),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    finish(&path, w)?;
    Ok(vec![path, write_failures(dir, &table.failures)?])
}

/// Human-readable summary of the timings, for stderr.
pub fn write_timings(out: &mut impl Write, timings: &[Timing]) -> std::io::Result<()> {
    for t in timings {
        writeln!(out, "{:<18} n={:<5} {:>10.3} s/run", t.method, t.n, t.seconds)?;
    }
    Ok(())
}
