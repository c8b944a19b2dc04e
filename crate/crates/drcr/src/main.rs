use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drcr::bench::{
    emit, emit_real_data, fit_method, parse_methods, run_benchmark, run_real_data, write_timings,
    ExperimentSpec, Fitted, Method, RealDataSpec,
};
use drcr::config::{parse_dist, resolve_radius, Config};
use drcr::epa::{generate_epa_like, DEFAULT_ROWS, RESPONSE};
use drcr::io::{fmt17, read_table, table_to_dataset, write_dataset, write_table, Schema};
use drcr::model_file::{load_model, save_model};
use drcr::preprocess::PlanTemplate;
use drcr::{Error, Result};
use drcr_core::fit::Radius;
use drcr_core::synth::{generate_synthetic, SyntheticSpec};
use drcr_core::FitConfig;
use log::info;

/// Distributionally robust convex regression.
#[derive(Debug, Parser)]
#[command(name = "drcr", version)]
struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a max-affine model to a CSV file and write it as JSON.
    Fit(FitArgs),
    /// Evaluate a saved model on the rows of a CSV file.
    Predict(PredictArgs),
    /// Synthetic benchmark over sample sizes and replications.
    Benchmark(BenchArgs),
    /// Repeated train/test splits of a CSV file.
    RealData(RealArgs),
    /// Write a synthetic CSV file.
    GenData(GenArgs),
}

#[derive(Debug, Args)]
struct RadiusArgs {
    /// Fixed ambiguity radius.
    #[arg(long)]
    delta: Option<f64>,
    /// How the radius depends on n and d.
    #[arg(long)]
    schedule: Option<String>,
    /// Exponent of the theoretical schedule.
    #[arg(long)]
    gamma: Option<f64>,
    /// Leading constant of a scheduled radius.
    #[arg(long)]
    multiplier: Option<f64>,
    /// Gradient bound (default ln n).
    #[arg(long)]
    grad_cap: Option<f64>,
}

impl RadiusArgs {
    fn radius(&self, cfg: &Config) -> Result<Radius> {
        // A radius flag replaces the whole radius block of the config file.
        let flags = self.delta.is_some() || self.schedule.is_some() || self.gamma.is_some() || self.multiplier.is_some();
        if flags {
            resolve_radius(self.schedule.as_deref(), self.delta, self.gamma, self.multiplier)
        } else {
            resolve_radius(cfg.schedule.as_deref(), cfg.delta, cfg.gamma, cfg.multiplier)
        }
    }

    fn grad_cap(&self, cfg: &Config) -> Option<f64> {
        self.grad_cap.or(cfg.grad_cap)
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Response column.
    #[arg(long)]
    response: Option<String>,
    /// Covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
}

impl DataArgs {
    fn data(&self, cfg: &Config) -> Result<PathBuf> {
        self.data
            .clone()
            .or_else(|| cfg.data.clone())
            .ok_or_else(|| Error::invalid("--data is required"))
    }

    fn covariates(&self, cfg: &Config) -> Vec<String> {
        self.covariates.clone().or_else(|| cfg.covariates.clone()).unwrap_or_default()
    }

    fn schema(&self, cfg: &Config, default_response: Option<&str>) -> Result<Schema> {
        let response = self
            .response
            .clone()
            .or_else(|| cfg.response.clone())
            .or_else(|| default_response.map(str::to_owned))
            .ok_or_else(|| Error::invalid("--response is required"))?;
        Ok(Schema::new(self.covariates(cfg), response))
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    radius: RadiusArgs,
    /// Estimator: drcr, lse(c), linear or linear(squared).
    #[arg(long, default_value = "drcr")]
    method: String,
    /// Output model file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Input CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Covariate columns in model order (default: the first d columns).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Output CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    radius: RadiusArgs,
    /// Sample sizes, ascending.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    d: Option<usize>,
    /// gaussian or t10.
    #[arg(long)]
    dist: Option<String>,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: drcr, lse(c), kernel, linear, linear(squared).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RealArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    radius: RadiusArgs,
    #[arg(long)]
    train_rows: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Keep covariates on their original scale.
    #[arg(long)]
    no_log: bool,
    /// Leave the response unstandardized.
    #[arg(long)]
    raw_response: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    /// `f(x) = sum |x_k|` plus Gaussian noise.
    Synthetic,
    /// Positive pollutant-like covariates with a convex response.
    Epa,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// Rows (synthetic default 100, epa default 600).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit code 3: at least one fit failed.
struct SomeFailed;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(SomeFailed)) => ExitCode::from(3),
        Err(e) => {
            eprintln!("drcr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<std::result::Result<(), SomeFailed>> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Fit(a) => fit(a, &cfg).map(Ok),
        Command::Predict(a) => predict(a, &cfg).map(Ok),
        Command::Benchmark(a) => benchmark(a, &cfg),
        Command::RealData(a) => real_data(a, &cfg),
        Command::GenData(a) => gen_data(a, &cfg).map(Ok),
    }
}

fn fit(a: FitArgs, cfg: &Config) -> Result<()> {
    let table = read_table(a.data.data(cfg)?)?;
    let data = table_to_dataset(&table, &a.data.schema(cfg, None)?, "fit")?;
    let method: Method = a.method.parse()?;
    let fit_cfg = FitConfig {
        radius: a.radius.radius(cfg)?,
        grad_cap: a.radius.grad_cap(cfg),
        ..FitConfig::default()
    };
    let model = match fit_method(method, &data, &fit_cfg)? {
        Fitted::Affine(m) => m,
        Fitted::Kernel(_) => return Err(Error::invalid("kernel fits are not max-affine and cannot be saved")),
    };
    info!(
        "method={method} n={} d={} pieces={} objective={}",
        data.n(),
        data.d(),
        model.pieces().len(),
        model.meta().objective
    );
    let out = a.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("model.json"));
    save_model(&out, &model)
}

fn predict(a: PredictArgs, cfg: &Config) -> Result<()> {
    let model = load_model(&a.model)?;
    let path = a.data.or_else(|| cfg.data.clone()).ok_or_else(|| Error::invalid("--data is required"))?;
    let table = read_table(&path)?;
    let covariates = a
        .covariates
        .or_else(|| cfg.covariates.clone())
        .unwrap_or_else(|| table.headers.iter().take(model.d()).cloned().collect());
    if covariates.len() != model.d() {
        return Err(Error::invalid(format!(
            "model has d={} but {} covariates were given",
            model.d(),
            covariates.len()
        )));
    }
    let data = table_to_dataset(&table, &Schema::covariates_only(covariates.clone()), "predict")?;
    let pred = model.predict_dataset(&data)?;

    let out = a.out.or_else(|| cfg.out.clone());
    let sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::io(p, e))?),
        None => Box::new(io::stdout().lock()),
    };
    let target = out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut w = csv::Writer::from_writer(BufWriter::new(sink));
    let to_io = |e: csv::Error| Error::io(&target, io::Error::other(e));
    let mut header = covariates;
    header.push("prediction".into());
    w.write_record(&header).map_err(to_io)?;
    for (i, p) in pred.iter().enumerate() {
        let row = data.x(i).iter().chain(std::iter::once(p)).map(|v| fmt17(*v));
        w.write_record(row).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(&target, e))
}

fn methods_or(flag: Option<Vec<String>>, cfg: &Config, default: &[&str]) -> Result<Vec<Method>> {
    let list = flag
        .or_else(|| cfg.methods.clone())
        .unwrap_or_else(|| default.iter().map(|s| (*s).to_owned()).collect());
    parse_methods(&list)
}

fn report_timings(t: &[drcr::bench::Timing]) {
    let mut err = io::stderr().lock();
    let _ = write_timings(&mut err, t);
}

fn benchmark(a: BenchArgs, cfg: &Config) -> Result<std::result::Result<(), SomeFailed>> {
    let spec = ExperimentSpec {
        methods: methods_or(a.methods, cfg, &["drcr", "lse(0.8)", "lse(10)", "kernel"])?,
        d: a.d.or(cfg.d).unwrap_or(5),
        n_list: a
            .n
            .or_else(|| cfg.n.clone())
            .unwrap_or_else(|| vec![50, 100, 150, 200, 250, 300, 350]),
        dist: parse_dist(a.dist.as_deref().or(cfg.dist.as_deref()).unwrap_or("gaussian"))?,
        noise_sigma: a.sigma.or(cfg.sigma).unwrap_or(0.2),
        replications: a.reps.or(cfg.reps).unwrap_or(100),
        base_seed: a.seed.or(cfg.seed).unwrap_or(0),
        radius: a.radius.radius(cfg)?,
        grad_cap: a.radius.grad_cap(cfg),
    };
    let out = a.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("bench-out"));
    let table = run_benchmark(&spec)?;
    for p in emit(&table, &out)? {
        info!("wrote {}", p.display());
    }
    report_timings(&table.timings);
    Ok(if table.failures.is_empty() { Ok(()) } else { Err(SomeFailed) })
}

fn real_data(a: RealArgs, cfg: &Config) -> Result<std::result::Result<(), SomeFailed>> {
    let table = read_table(a.data.data(cfg)?)?;
    let schema = a.data.schema(cfg, None)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let mut spec = RealDataSpec::standard(seed);
    spec.methods = methods_or(a.methods, cfg, &["drcr", "lse(10)", "linear"])?;
    spec.replications = a.reps.or(cfg.reps).unwrap_or(spec.replications);
    spec.train_rows = a.train_rows.or(cfg.train_rows).unwrap_or(spec.train_rows);
    spec.template = PlanTemplate {
        log_covariates: !(a.no_log || cfg.no_log.unwrap_or(false)),
        standardize_response: !(a.raw_response || cfg.raw_response.unwrap_or(false)),
        ..PlanTemplate::default()
    };
    spec.radius = a.radius.radius(cfg)?;
    spec.grad_cap = a.radius.grad_cap(cfg);
    let out = a.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("real-data-out"));
    let result = run_real_data(&table, &schema, &spec)?;
    for p in emit_real_data(&result, &out)? {
        info!("wrote {}", p.display());
    }
    println!("{:<18} {:>12} {:>12}", "method", "train l1", "test l1");
    for r in &result.rows {
        println!("{:<18} {:>12.4} {:>12.4}", r.method, r.train_l1, r.test_l1);
    }
    report_timings(&result.timings);
    Ok(if result.failures.is_empty() { Ok(()) } else { Err(SomeFailed) })
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn gen_data(a: GenArgs, cfg: &Config) -> Result<()> {
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let out = a.out.or_else(|| cfg.out.clone()).ok_or_else(|| Error::invalid("--out is required"))?;
    ensure_parent(&out)?;
    match a.kind {
        Kind::Synthetic => {
            let mut spec = SyntheticSpec::new(
                a.n.or_else(|| cfg.n.as_ref().and_then(|v| v.first().copied())).unwrap_or(100),
                a.d.or(cfg.d).unwrap_or(5),
                parse_dist(a.dist.as_deref().or(cfg.dist.as_deref()).unwrap_or("gaussian"))?,
                seed,
            );
            spec.noise_sigma = a.sigma.or(cfg.sigma).unwrap_or(spec.noise_sigma);
            let data = generate_synthetic(&spec)?;
            let note = format!(
                "synthetic n={} d={} dist={} sigma={} seed={}",
                spec.n,
                spec.d,
                spec.dist.name(),
                spec.noise_sigma,
                spec.seed
            );
            write_dataset(&out, &data, &note)
        }
        Kind::Epa => {
            let rows = a.n.unwrap_or(DEFAULT_ROWS);
            let table = generate_epa_like(rows, seed)?;
            let note = format!("epa-like rows={rows} seed={seed} response={RESPONSE}");
            write_table(&out, &table, Some(&note))
        }
    }
}
