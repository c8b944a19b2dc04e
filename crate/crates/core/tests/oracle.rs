use drcr_core::fit::{fit_drcr_report, RowGeneration};
use drcr_core::model::FitMeta;
use drcr_core::rng::Stream;
use drcr_core::{dual_objective, worst_case_loss_oracle, AffinePiece, Dataset, FitConfig, MaxAffineModel};

fn random_model(s: &mut Stream, d: usize) -> MaxAffineModel {
    let k = 1 + s.below(4) as usize;
    let pieces = (0..k)
        .map(|_| AffinePiece {
            g: s.uniform_in(-1.0, 1.0),
            xi: (0..d).map(|_| s.uniform_in(-2.0, 2.0)).collect(),
            anchor: (0..d).map(|_| s.uniform_in(-1.0, 1.0)).collect(),
        })
        .collect();
    MaxAffineModel::new(d, pieces, None, FitMeta::default()).unwrap()
}

fn random_data(s: &mut Stream, n: usize, d: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| s.uniform_in(-1.0, 1.0)).collect()).collect();
    let ys = (0..n).map(|_| s.uniform_in(-2.0, 2.0)).collect();
    Dataset::new(&rows, ys, "tiny").unwrap()
}

#[test]
fn oracle_approaches_the_dual_from_below() {
    let mut s = Stream::new(2024, &[1]);
    for case in 0..10 {
        let n = 1 + s.below(5) as usize;
        let d = 1 + s.below(2) as usize;
        let model = random_model(&mut s, d);
        let data = random_data(&mut s, n, d);
        let delta = s.uniform_in(0.05, 1.0);
        let dual = dual_objective(&model, &data, delta).unwrap();
        let mut last_gap = f64::INFINITY;
        for m in [16, 64, 256] {
            let v = worst_case_loss_oracle(&model, &data, delta, m).unwrap();
            let gap = dual - v;
            assert!(gap >= -1e-6, "case {case}: oracle {v} above dual {dual}");
            assert!(gap <= last_gap + 1e-12, "case {case}: gap grew at m={m}");
            last_gap = gap;
        }
        assert!(last_gap <= 0.05 * dual + 1e-6, "case {case}: gap {last_gap} of {dual}");
    }
}

#[test]
fn constant_models_cannot_be_moved() {
    let model = MaxAffineModel::new(
        2,
        vec![AffinePiece { g: 0.5, xi: vec![0.0, 0.0], anchor: vec![0.0, 0.0] }],
        None,
        FitMeta::default(),
    )
    .unwrap();
    let mut s = Stream::new(5, &[]);
    let data = random_data(&mut s, 4, 2);
    let empirical = dual_objective(&model, &data, 0.0).unwrap();
    for delta in [0.0, 0.3, 3.0] {
        let v = worst_case_loss_oracle(&model, &data, delta, 32).unwrap();
        assert!((v - empirical).abs() < 1e-15);
    }
}

#[test]
fn oracle_on_a_fitted_model() {
    let data = Dataset::new(
        &[vec![0.0], vec![0.5], vec![1.0], vec![1.5], vec![2.0]],
        vec![1.0, 0.2, 0.1, 0.4, 1.3],
        "fit",
    )
    .unwrap();
    let mut cfg = FitConfig::with_delta(0.2);
    cfg.row_generation = RowGeneration::Off;
    let fit = fit_drcr_report(&data, &cfg).unwrap();
    let v = worst_case_loss_oracle(&fit.model, &data, 0.2, 512).unwrap();
    assert!(v <= fit.objective + 1e-6);
    assert!(fit.objective - v <= 0.05 * fit.objective + 1e-6);
}
