use drcr::epa::{generate_epa_like, COVARIATES, RESPONSE};
use drcr::io::{fmt17, parse_table, read_table, table_to_dataset, write_dataset, write_table, Schema, Table};
use drcr::model_file::{load_model, model_from_json, model_to_json, save_model};
use drcr::preprocess::{load_and_preprocess, preprocess_split, split_indices, FittedPlan, PlanTemplate};
use drcr::Error;
use drcr_core::model::FitMeta;
use drcr_core::rng::Stream;
use drcr_core::synth::{generate_synthetic, CovariateDist, SyntheticSpec};
use drcr_core::{AffinePiece, MaxAffineModel};
use proptest::prelude::*;

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn column(data: &drcr_core::Dataset, k: usize) -> Vec<f64> {
    data.rows().map(|x| x[k]).collect()
}

/// Two log-normal covariates and a response.
fn lognormal_table(rows: usize, seed: u64) -> Table {
    let mut s = Stream::new(seed, &[]);
    let data = (0..rows)
        .map(|_| vec![s.normal().exp(), (0.5 * s.normal() + 1.0).exp(), s.normal()])
        .collect();
    Table::new(vec!["a".into(), "b".into(), "y".into()], data).unwrap()
}

#[test]
fn parses_header_comments_and_exponents() {
    let text = "# made by hand\nx, y\n1.5,2e-3\n-4,  7E2\n";
    let t = parse_table(text.as_bytes()).unwrap();
    assert_eq!(t.headers, ["x", "y"]);
    assert_eq!(t.rows, vec![vec![1.5, 0.002], vec![-4.0, 700.0]]);
    assert_eq!(t.lines, [3, 4]);
}

#[test]
fn missing_field_reports_its_line() {
    let text = "x,y\n1,2\n3,\n";
    match parse_table(text.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let short = "x,y\n1,2\n3\n";
    match parse_table(short.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let words = "x,y\n1,2\n3,four\n";
    assert!(matches!(parse_table(words.as_bytes()), Err(Error::Parse { line: 3, .. })));
    assert!(matches!(parse_table("x\nnan\n".as_bytes()), Err(Error::Parse { .. })));
}

#[test]
fn schema_selects_columns_by_name() {
    let t = parse_table("y,b,a\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
    let d = table_to_dataset(&t, &Schema::new(vec!["a".into(), "b".into()], "y"), "s").unwrap();
    assert_eq!(d.x(0), [3.0, 2.0]);
    assert_eq!(d.ys(), [1.0, 4.0]);
    // Default: everything but the response, in file order.
    let d = table_to_dataset(&t, &Schema::new(vec![], "y"), "s").unwrap();
    assert_eq!(d.x(1), [5.0, 6.0]);
    assert!(table_to_dataset(&t, &Schema::new(vec!["c".into()], "y"), "s").is_err());
    assert!(table_to_dataset(&t, &Schema::new(vec!["y".into()], "y"), "s").is_err());
}

#[test]
fn log_then_standardize_gives_unit_columns() {
    let t = lognormal_table(600, 4);
    let schema = Schema::new(vec!["a".into(), "b".into()], "y");
    let split = preprocess_split(&t, &schema, &PlanTemplate::default(), 400, 9, 0).unwrap();
    for k in 0..2 {
        let (mean, std) = moments(&column(&split.train, k));
        assert!(mean.abs() <= 1e-12, "{mean}");
        assert!((std - 1.0).abs() <= 1e-12, "{std}");
    }
    let (mean, std) = moments(split.train.ys());
    assert!(mean.abs() <= 1e-12 && (std - 1.0).abs() <= 1e-12);
    // The plan's parameters are the log-scale moments of the training rows.
    let raw: Vec<f64> = split.train_rows.iter().map(|&i| t.rows[i][0].ln()).collect();
    let (m, s) = moments(&raw);
    assert_eq!(split.plan.covariates[0].mean, m);
    assert_eq!(split.plan.covariates[0].std, s);
}

#[test]
fn response_can_stay_raw() {
    let t = lognormal_table(50, 5);
    let schema = Schema::new(vec![], "y");
    let template = PlanTemplate {
        standardize_response: false,
        ..PlanTemplate::default()
    };
    let split = preprocess_split(&t, &schema, &template, 30, 1, 0).unwrap();
    let raw: Vec<f64> = split.train_rows.iter().map(|&i| t.rows[i][2]).collect();
    assert_eq!(split.train.ys(), &raw[..]);
    assert_eq!(split.plan.response_to_original(0.25), 0.25);
}

#[test]
fn non_positive_values_are_rejected_with_their_row() {
    let mut t = lognormal_table(20, 6);
    t.rows[13][1] = 0.0;
    let schema = Schema::new(vec!["a".into(), "b".into()], "y");
    // Training on every row puts row 13 in the fitted set.
    match preprocess_split(&t, &schema, &PlanTemplate::default(), 20, 0, 0) {
        Err(Error::NonPositive { row, line, column, value }) => {
            assert_eq!((row, line, column.as_str(), value), (13, 15, "b", 0.0));
        }
        other => panic!("{other:?}"),
    }
    // Without logs the zero is fine.
    let template = PlanTemplate {
        log_covariates: false,
        ..PlanTemplate::default()
    };
    assert!(preprocess_split(&t, &schema, &template, 20, 0, 0).is_ok());
}

#[test]
fn negative_value_in_a_test_row_is_also_rejected() {
    let mut t = lognormal_table(30, 7);
    let (_, test) = split_indices(30, 20, 3, 0).unwrap();
    t.rows[test[0]][0] = -1.0;
    let schema = Schema::new(vec!["a".into(), "b".into()], "y");
    match preprocess_split(&t, &schema, &PlanTemplate::default(), 20, 3, 0) {
        Err(Error::NonPositive { row, .. }) => assert_eq!(row, test[0]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn split_sizes_and_membership() {
    let (train, test) = split_indices(600, 400, 42, 0).unwrap();
    assert_eq!((train.len(), test.len()), (400, 200));
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..600).collect::<Vec<_>>());
    assert_eq!(split_indices(600, 400, 42, 0).unwrap(), (train.clone(), test));
    assert_ne!(split_indices(600, 400, 42, 1).unwrap().0, train);
    assert_ne!(split_indices(600, 400, 43, 0).unwrap().0, train);
    assert!(split_indices(10, 0, 0, 0).is_err());
    assert!(split_indices(10, 11, 0, 0).is_err());
}

#[test]
fn test_rows_do_not_leak_into_the_plan() {
    let t = lognormal_table(100, 8);
    let schema = Schema::new(vec![], "y");
    let a = preprocess_split(&t, &schema, &PlanTemplate::default(), 70, 5, 2).unwrap();
    let mut mutated = t.clone();
    for &i in &a.test_rows {
        mutated.rows[i] = vec![1e6, 1e-6, -1e6];
    }
    let b = preprocess_split(&mutated, &schema, &PlanTemplate::default(), 70, 5, 2).unwrap();
    assert_eq!(a.plan, b.plan);
    assert_eq!(a.train, b.train);
    assert_ne!(a.test, b.test);
}

#[test]
fn applying_a_plan_is_idempotent() {
    let t = lognormal_table(80, 9);
    let schema = Schema::new(vec![], "y");
    let split = preprocess_split(&t, &schema, &PlanTemplate::default(), 60, 1, 0).unwrap();
    let once = split.plan.apply(&t, &split.train_rows, "once").unwrap();
    let twice = split.plan.apply(&t, &split.train_rows, "once").unwrap();
    assert_eq!(once, twice);
    assert_eq!(once.xs(), split.train.xs());
    assert_eq!(once.ys(), split.train.ys());
    // Standardizing already standardized data changes nothing.
    let back = drcr::io::dataset_to_table(&once, Some((&["a".into(), "b".into()], "y")));
    let all: Vec<usize> = (0..back.len()).collect();
    let template = PlanTemplate {
        log_covariates: false,
        ..PlanTemplate::default()
    };
    let refit = FittedPlan::fit(&template, &schema, &back, &all).unwrap();
    let again = refit.apply(&back, &all, "again").unwrap();
    for (u, v) in again.xs().iter().zip(once.xs()) {
        assert!((u - v).abs() <= 1e-12);
    }
    for (u, v) in again.ys().iter().zip(once.ys()) {
        assert!((u - v).abs() <= 1e-12);
    }
}

#[test]
fn constant_columns_are_only_centred() {
    let t = Table::new(
        vec!["a".into(), "y".into()],
        (0..10).map(|i| vec![1.0 + i as f64, 3.0]).collect(),
    )
    .unwrap();
    let split = preprocess_split(&t, &Schema::new(vec![], "y"), &PlanTemplate::default(), 10, 0, 0).unwrap();
    assert_eq!(split.plan.response.std, 1.0);
    assert!(split.train.ys().iter().all(|&y| y == 0.0));
    assert!(split.test.is_none());
}

#[test]
fn load_and_preprocess_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("epa.csv");
    write_table(&path, &generate_epa_like(600, 1).unwrap(), Some("generated")).unwrap();
    let schema = Schema::new(COVARIATES.iter().map(|s| (*s).to_owned()).collect(), RESPONSE);
    let split = load_and_preprocess(&path, &schema, &PlanTemplate::default(), 400, 11).unwrap();
    assert_eq!(split.train.n(), 400);
    assert_eq!(split.test.as_ref().unwrap().n(), 200);
    assert_eq!(split.train.d(), 4);
}

#[test]
fn epa_like_data_is_positive_and_seeded() {
    let a = generate_epa_like(600, 2).unwrap();
    assert_eq!(a.len(), 600);
    assert_eq!(a.headers.len(), 5);
    assert!(a.rows.iter().all(|r| r[..4].iter().all(|v| *v > 0.0)));
    assert_eq!(a, generate_epa_like(600, 2).unwrap());
    assert_ne!(a, generate_epa_like(600, 3).unwrap());
}

#[test]
fn dataset_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("syn.csv");
    let spec = SyntheticSpec::new(40, 3, CovariateDist::StudentT10, 5);
    let data = generate_synthetic(&spec).unwrap();
    write_dataset(&path, &data, "synthetic seed=5").unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# synthetic seed=5\nx1,x2,x3,y\n"));
    let back = table_to_dataset(&read_table(&path).unwrap(), &Schema::new(vec![], "y"), data.tag()).unwrap();
    assert_eq!(back, data);
}

#[test]
fn seventeen_digits() {
    assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
    assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
    for v in [f64::MIN_POSITIVE, f64::MAX, 1.0 / 3.0, -123456.789e-200] {
        assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
    }
}

#[test]
fn model_file_layout() {
    let m = MaxAffineModel::new(
        2,
        vec![AffinePiece { g: 0.1, xi: vec![1.0, -0.5], anchor: vec![0.0, 2.0] }],
        Some(2.5),
        FitMeta { objective: 0.75, iterations: 12, delta: Some(0.2) },
    )
    .unwrap();
    let json = model_to_json(&m).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["d"], 2);
    assert_eq!(v["grad_cap"], 2.5);
    assert_eq!(v["pieces"][0]["xi"][1], -0.5);
    assert_eq!(v["fit_meta"]["iterations"], 12);
    assert!(json.contains("1.0000000000000001e-1"));
    let unbounded = MaxAffineModel::new(1, vec![AffinePiece { g: 0.0, xi: vec![9.0], anchor: vec![0.0] }], None, FitMeta::default()).unwrap();
    let json = model_to_json(&unbounded).unwrap();
    assert!(json.contains("\"grad_cap\": null"));
    assert_eq!(model_from_json(&json).unwrap(), unbounded);
    assert!(model_from_json("{\"d\": 1}").is_err());
    // Slopes above the stored cap are refused.
    let bad = model_to_json(&unbounded).unwrap().replace("\"grad_cap\": null", "\"grad_cap\": 1.0");
    assert!(model_from_json(&bad).is_err());
}

#[test]
fn model_files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let m = MaxAffineModel::new(1, vec![AffinePiece { g: 1.0, xi: vec![0.5], anchor: vec![3.0] }], None, FitMeta::default()).unwrap();
    save_model(&path, &m).unwrap();
    assert_eq!(load_model(&path).unwrap(), m);
    assert!(matches!(load_model(dir.path().join("missing.json")), Err(Error::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn model_json_round_trips_exactly(seed in any::<u64>(), d in 1usize..4, k in 1usize..6, capped in any::<bool>()) {
        let mut s = Stream::new(seed, &[]);
        let scale = |s: &mut Stream| s.normal() * 10f64.powi(s.below(40) as i32 - 20);
        let pieces = (0..k)
            .map(|_| AffinePiece {
                g: scale(&mut s),
                xi: (0..d).map(|_| s.uniform_in(-1.0, 1.0)).collect(),
                anchor: (0..d).map(|_| scale(&mut s)).collect(),
            })
            .collect();
        let meta = FitMeta { objective: scale(&mut s), iterations: s.below(1000) as usize, delta: Some(s.uniform()) };
        let m = MaxAffineModel::new(d, pieces, capped.then_some(1.0), meta).unwrap();
        let back = model_from_json(&model_to_json(&m).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn csv_numbers_round_trip(v in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20)) {
        let t = Table::new(vec!["v".into()], v.iter().map(|x| vec![*x]).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_table(&path, &t, None).unwrap();
        prop_assert_eq!(read_table(&path).unwrap().rows, t.rows);
    }
}
