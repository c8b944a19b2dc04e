use drcr::bench::{
    emit, fit_method, loglog_slopes, read_results, run_benchmark, run_real_data, Cell, ExperimentSpec, Method,
    RealDataSpec, ResultTable, RESULTS_FILE,
};
use drcr::config::{parse_dist, resolve_radius, Config};
use drcr::io::{Schema, Table};
use drcr::preprocess::PlanTemplate;
use drcr::Error;
use drcr_core::baselines::LinearLoss;
use drcr_core::fit::{Radius, Schedule};
use drcr_core::model::LossReport;
use drcr_core::synth::{f_star, CovariateDist};

fn small_spec(methods: Vec<Method>, reps: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::standard(methods, vec![20, 30], reps, 77);
    spec.d = 2;
    spec
}

#[test]
fn method_names_round_trip() {
    for m in [
        Method::Drcr,
        Method::Lse(0.8),
        Method::Lse(10.0),
        Method::Kernel,
        Method::Linear(LinearLoss::Absolute),
        Method::Linear(LinearLoss::Squared),
    ] {
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
    }
    assert_eq!("LSE:0.8".parse::<Method>().unwrap(), Method::Lse(0.8));
    assert_eq!("ols".parse::<Method>().unwrap(), Method::Linear(LinearLoss::Squared));
    for bad in ["lse", "lse(-1)", "lse(x)", "drcr(1)", "tree"] {
        assert!(bad.parse::<Method>().is_err(), "{bad}");
    }
}

#[test]
fn spec_validation() {
    let ok = small_spec(vec![Method::Drcr], 1);
    assert!(ok.validate().is_ok());
    assert!(ExperimentSpec { methods: vec![], ..ok.clone() }.validate().is_err());
    assert!(ExperimentSpec { replications: 0, ..ok.clone() }.validate().is_err());
    assert!(ExperimentSpec { n_list: vec![], ..ok.clone() }.validate().is_err());
    assert!(ExperimentSpec { n_list: vec![30, 20], ..ok.clone() }.validate().is_err());
    assert!(ExperimentSpec { n_list: vec![1], ..ok.clone() }.validate().is_err());
    assert!(ExperimentSpec { noise_sigma: -1.0, ..ok }.validate().is_err());
}

#[test]
fn identical_specs_give_identical_tables() {
    let spec = small_spec(vec![Method::Drcr, Method::Kernel], 2);
    let a = run_benchmark(&spec).unwrap();
    let b = run_benchmark(&spec).unwrap();
    assert_eq!(a.cells, b.cells);
    let other = run_benchmark(&ExperimentSpec { base_seed: 78, ..spec }).unwrap();
    assert_ne!(a.cells, other.cells);
}

#[test]
fn cells_recompute_from_the_shared_loss() {
    let spec = small_spec(vec![Method::Drcr, Method::Lse(0.8), Method::Linear(LinearLoss::Squared)], 3);
    let table = run_benchmark(&spec).unwrap();
    let cfg = spec.drcr_config();
    for (mi, m) in spec.methods.iter().enumerate() {
        for &n in &spec.n_list {
            let mut l1 = Vec::new();
            for r in 0..3 {
                let data = spec.dataset(r, n).unwrap();
                let pred = fit_method(*m, &data, &cfg).unwrap().predict_dataset(&data).unwrap();
                let truth: Vec<f64> = data.rows().map(f_star).collect();
                l1.push(LossReport::between(&pred, &truth).unwrap().l1);
            }
            let cell = table.cell(&m.to_string(), n).unwrap();
            assert_eq!(cell.mean_l1, l1.iter().sum::<f64>() / 3.0, "method {mi} n {n}");
            assert_eq!(cell.runs, 3);
        }
    }
}

#[test]
fn noiseless_drcr_beats_the_median_constant() {
    let mut spec = ExperimentSpec::standard(vec![Method::Drcr], vec![50], 1, 3);
    spec.noise_sigma = 0.0;
    let table = run_benchmark(&spec).unwrap();
    let data = spec.dataset(0, 50).unwrap();
    let mut ys = data.ys().to_vec();
    ys.sort_by(f64::total_cmp);
    let median = ys[(ys.len() - 1) / 2];
    let truth: Vec<f64> = data.rows().map(f_star).collect();
    let constant = truth.iter().map(|t| (t - median).abs()).sum::<f64>() / 50.0;
    assert!(table.cells[0].mean_l1 <= constant, "{} vs {constant}", table.cells[0].mean_l1);
}

#[test]
fn failures_are_flagged_not_averaged() {
    let mut spec = small_spec(vec![Method::Drcr, Method::Kernel], 2);
    spec.grad_cap = Some(-1.0);
    let table = run_benchmark(&spec).unwrap();
    assert_eq!(table.failures.len(), 4);
    assert!(table.failures.iter().all(|f| f.method == "drcr"));
    let runs: usize = table.cells.iter().map(|c| c.runs).sum();
    assert_eq!(runs, 2 * 2 * 2 - table.failures.len());
    let dead = table.cell("drcr", 20).unwrap();
    assert_eq!((dead.runs, dead.failures), (0, 2));
    assert!(dead.mean_l1.is_nan());
    assert_eq!(table.cell("kernel", 30).unwrap().runs, 2);
}

#[test]
fn emitted_results_parse_back_exactly() {
    let spec = small_spec(vec![Method::Drcr, Method::Lse(0.8), Method::Kernel], 2);
    let table = run_benchmark(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit(&table, dir.path()).unwrap();
    assert_eq!(files.len(), 5);
    assert_eq!(read_results(dir.path().join(RESULTS_FILE)).unwrap(), table.cells);
    for metric in ["l1", "l2"] {
        let text = std::fs::read_to_string(dir.path().join(format!("plot_{metric}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("method,n,mean,stderr"));
        assert_eq!(lines.count(), 3 * 2);
    }
    // Same table, same bytes.
    let again = tempfile::tempdir().unwrap();
    emit(&table, again.path()).unwrap();
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(std::fs::read(f).unwrap(), std::fs::read(again.path().join(name)).unwrap());
    }
}

#[test]
fn emit_rejects_empty_tables_and_bad_directories() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(emit(&ResultTable::default(), dir.path()), Err(Error::Invalid(_))));
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let table = ResultTable {
        cells: vec![Cell {
            method: "drcr".into(),
            n: 10,
            dist: "gaussian".into(),
            runs: 1,
            failures: 0,
            mean_l1: 0.5,
            se_l1: 0.0,
            mean_l2: 0.6,
            se_l2: 0.0,
        }],
        ..ResultTable::default()
    };
    let err = emit(&table, blocker.join("sub")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn slopes_of_a_power_law() {
    let cells = [50usize, 100, 200, 400]
        .iter()
        .map(|&n| Cell {
            method: "m".into(),
            n,
            dist: "gaussian".into(),
            runs: 1,
            failures: 0,
            mean_l1: 3.0 * (n as f64).powf(-0.5),
            se_l1: 0.0,
            mean_l2: (n as f64).powf(-0.25),
            se_l2: 0.0,
        })
        .collect();
    let s = loglog_slopes(&ResultTable { cells, ..ResultTable::default() });
    assert_eq!(s.len(), 2);
    assert!((s[0].slope + 0.5).abs() < 1e-12);
    assert!((s[1].slope + 0.25).abs() < 1e-12);
    assert_eq!(s[0].points, 4);
}

#[test]
fn constant_response_is_fitted_exactly() {
    let rows = (0..60)
        .map(|i| vec![1.0 + i as f64, 2.0 + (i * 7 % 13) as f64, 4.5])
        .collect();
    let table = Table::new(vec!["a".into(), "b".into(), "y".into()], rows).unwrap();
    let mut spec = RealDataSpec::standard(1);
    spec.replications = 2;
    spec.train_rows = 40;
    for standardize_response in [true, false] {
        spec.template = PlanTemplate {
            standardize_response,
            ..PlanTemplate::default()
        };
        let out = run_real_data(&table, &Schema::new(vec![], "y"), &spec).unwrap();
        assert_eq!(out.rows.len(), 3);
        for r in &out.rows {
            assert_eq!(r.runs, 2);
            assert!(r.train_l1.abs() <= 1e-9, "{}: {}", r.method, r.train_l1);
        }
    }
}

#[test]
fn real_data_checks_its_inputs() {
    let rows = (0..30).map(|i| vec![1.0 + i as f64, i as f64]).collect();
    let table = Table::new(vec!["a".into(), "y".into()], rows).unwrap();
    let schema = Schema::new(vec![], "y");
    let mut spec = RealDataSpec::standard(1);
    spec.train_rows = 30;
    assert!(run_real_data(&table, &schema, &spec).is_err());
    spec.train_rows = 20;
    spec.methods.clear();
    assert!(run_real_data(&table, &schema, &spec).is_err());
    spec.methods = vec![Method::Linear(LinearLoss::Absolute)];
    spec.replications = 3;
    let a = run_real_data(&table, &schema, &spec).unwrap();
    let b = run_real_data(&table, &schema, &spec).unwrap();
    assert_eq!(a.rows, b.rows);
    // A straight line in log(a) is fitted exactly by linear regression.
    let rows = (0..30).map(|i| vec![1.0 + i as f64, 2.0 * (1.0 + i as f64).ln()]).collect();
    let line = Table::new(vec!["a".into(), "y".into()], rows).unwrap();
    let out = run_real_data(&line, &schema, &spec).unwrap();
    assert!(out.rows[0].train_l1 <= 1e-9 && out.rows[0].test_l1 <= 1e-9);
}

#[test]
fn radius_flags() {
    assert_eq!(resolve_radius(None, None, None, None).unwrap(), Radius::Schedule {
        kind: Schedule::Experimental,
        gamma: None,
        multiplier: 1.0
    });
    assert_eq!(resolve_radius(None, Some(0.3), None, None).unwrap(), Radius::Explicit(0.3));
    assert_eq!(resolve_radius(Some("fixed"), Some(0.0), None, None).unwrap(), Radius::Explicit(0.0));
    assert_eq!(
        resolve_radius(Some("Theoretical"), None, Some(3.0), Some(0.5)).unwrap(),
        Radius::Schedule { kind: Schedule::Theoretical, gamma: Some(3.0), multiplier: 0.5 }
    );
    assert!(resolve_radius(Some("fixed"), None, None, None).is_err());
    assert!(resolve_radius(Some("fixed"), Some(-1.0), None, None).is_err());
    assert!(resolve_radius(Some("theoretical"), None, None, None).is_err());
    assert!(resolve_radius(Some("experimental"), Some(0.1), None, None).is_err());
    assert!(resolve_radius(Some("weekly"), None, None, None).is_err());
}

#[test]
fn config_files() {
    let cfg = Config::parse("reps = 3\nn = [50, 100]\nmethods = [\"drcr\", \"lse(0.8)\"]\ngrad-cap = 2.0\n").unwrap();
    assert_eq!(cfg.reps, Some(3));
    assert_eq!(cfg.n, Some(vec![50, 100]));
    assert_eq!(cfg.grad_cap, Some(2.0));
    assert!(matches!(Config::parse("repz = 3"), Err(Error::Config(_))));
    assert_eq!(parse_dist("t10").unwrap(), CovariateDist::StudentT10);
    assert!(parse_dist("cauchy").is_err());
}
