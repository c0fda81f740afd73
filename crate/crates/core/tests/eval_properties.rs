//! Cross-validation contracts: fold isolation, determinism, metric sanity
//! and report shapes.

mod common;

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use proptest::prelude::*;

use trustrec::dataset::{kfold_split, RatingDataset, RatingRecord};
use trustrec::eval::{
    compare_trust_sources, cross_validate, cross_validate_folds, threshold_sweep, write_aggregate_csv,
    write_metrics_csv, write_sweep_csv, FoldTrust, FoldTrustProvider, TrustSource,
    AGGREGATE_CSV_HEADER, METRICS_CSV_HEADER,
};
use trustrec::models::{HyperParams, ModelKind, ModelSpec};
use trustrec::trust::{extract_implicit_trust, ExtractionConfig};

fn small_hp() -> HyperParams {
    HyperParams {
        factors: 3,
        max_iter: 10,
        seed: 4,
        ..HyperParams::default()
    }
}

/// Records what each fold's trust provider was shown and checks it against
/// the held-out records of that fold.
struct Spy {
    held_out: Vec<Vec<RatingRecord>>,
    seen: Mutex<Vec<(usize, usize)>>,
}

impl FoldTrustProvider for Spy {
    fn fold_trust(&self, fold: usize, train: &RatingDataset, seed: u64) -> trustrec::Result<FoldTrust> {
        for r in &self.held_out[fold] {
            assert_eq!(
                train.rating(r.user, r.item),
                None,
                "fold {fold}: provider saw held-out ({}, {})",
                r.user,
                r.item
            );
        }
        let train_pairs: HashSet<(usize, usize)> = train.records().iter().map(|r| (r.user, r.item)).collect();
        assert_eq!(train_pairs.len(), train.len());
        self.seen.lock().unwrap().push((fold, train.len()));
        // real extraction on exactly what we were handed
        let x = extract_implicit_trust(train, &ExtractionConfig::new(3.0, seed))?;
        Ok(FoldTrust {
            edges: Some(Arc::new(x.edges)),
            threshold: Some(x.threshold),
        })
    }

    fn label(&self) -> String {
        "spy".into()
    }
}

#[test]
fn trust_extraction_never_sees_test_folds() {
    let ds = common::synthetic(60, 40, 15, 8);
    let k = 5;
    let folds = kfold_split(&ds, k, 17).unwrap();
    let held_out = (0..k)
        .map(|f| folds.test_indices(f).into_iter().map(|i| ds.records()[i]).collect())
        .collect();
    let spy = Spy {
        held_out,
        seen: Mutex::new(Vec::new()),
    };
    let spec = ModelSpec::new(ModelKind::TrustSvd).with_hp(small_hp());
    let report = cross_validate_folds(&ds, "synthetic", &spec, &folds, &spy, 17).unwrap();
    let mut seen = spy.seen.into_inner().unwrap();
    seen.sort();
    assert_eq!(seen.len(), k);
    for (fold, n_train) in seen {
        assert_eq!(n_train, folds.train_indices(fold).len());
    }
    assert_eq!(report.trust_source, "spy");
    assert!(report.folds.iter().all(|f| f.trust_edges.is_some()));
}

#[test]
fn non_trust_models_never_consult_the_provider() {
    struct Forbidden;
    impl FoldTrustProvider for Forbidden {
        fn fold_trust(&self, _: usize, _: &RatingDataset, _: u64) -> trustrec::Result<FoldTrust> {
            panic!("baseline asked for trust");
        }
        fn label(&self) -> String {
            "forbidden".into()
        }
    }
    let ds = common::synthetic(30, 20, 8, 1);
    let folds = kfold_split(&ds, 3, 1).unwrap();
    let spec = ModelSpec::new(ModelKind::BiasedMf).with_hp(small_hp());
    cross_validate_folds(&ds, "s", &spec, &folds, &Forbidden, 1).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mae_never_exceeds_rmse(seed in 0u64..1000, kind_ix in 0usize..ModelKind::ALL.len()) {
        let ds = common::synthetic(30, 20, 10, seed);
        let kind = ModelKind::ALL[kind_ix];
        let spec = ModelSpec::new(kind).with_hp(small_hp());
        let source = TrustSource::hellinger(2.0);
        let r = cross_validate(&ds, "s", &spec, 3, seed, &source).unwrap();
        for f in &r.folds {
            prop_assert!(f.mae <= f.rmse + 1e-12, "{} fold {}: {} > {}", kind, f.fold, f.mae, f.rmse);
            prop_assert!(f.mae >= 0.0 && f.rmse.is_finite());
        }
        prop_assert!(r.mae_mean <= r.rmse_mean + 1e-12);
    }
}

#[test]
fn cross_validation_is_reproducible_across_pool_sizes() {
    let ds = common::synthetic(50, 30, 12, 3);
    let spec = ModelSpec::new(ModelKind::HellTrustSvd).with_hp(small_hp());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cross_validate(&ds, "s", &spec, 5, 9, &TrustSource::hellinger(3.0)).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert!(a.same_metrics(&b));
    assert!(a.same_metrics(&run(1)));
    let c = cross_validate(&ds, "s", &spec, 5, 10, &TrustSource::hellinger(3.0)).unwrap();
    assert!(!a.same_metrics(&c), "a different seed should change the folds");
}

#[test]
fn fold_split_and_extraction_are_seed_determined() {
    let ds = common::synthetic(50, 30, 12, 3);
    assert_eq!(kfold_split(&ds, 5, 1).unwrap(), kfold_split(&ds, 5, 1).unwrap());
    assert_ne!(kfold_split(&ds, 5, 1).unwrap(), kfold_split(&ds, 5, 2).unwrap());
    let cfg = ExtractionConfig {
        expected_degree: 4.0,
        sample_size: Some(300),
        seed: 5,
    };
    let a = extract_implicit_trust(&ds, &cfg).unwrap();
    let b = extract_implicit_trust(&ds, &cfg).unwrap();
    assert_eq!(a.fit, b.fit);
    assert_eq!(a.edges.edges(), b.edges.edges());
}

#[test]
fn every_fold_is_tested_exactly_once() {
    let ds = common::synthetic(40, 30, 10, 12);
    let folds = kfold_split(&ds, 5, 3).unwrap();
    let sizes = folds.fold_sizes();
    assert_eq!(sizes.iter().sum::<usize>(), ds.len());
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    let spec = ModelSpec::new(ModelKind::ItemAvg);
    let r = cross_validate(&ds, "s", &spec, 5, 3, &TrustSource::None).unwrap();
    let tested: Vec<usize> = r.folds.iter().map(|f| f.n_test).collect();
    assert_eq!(tested, sizes);
}

#[test]
fn sweep_reports_one_point_per_grid_value() {
    let ds = common::synthetic(40, 25, 10, 4);
    let spec = ModelSpec::new(ModelKind::HellTrustSvd).with_hp(small_hp());
    let grid = [0.5, 2.0, 8.0, 1000.0];
    let sweep = threshold_sweep(&ds, "s", &grid, &spec, 3, 2).unwrap();
    assert_eq!(sweep.points.len(), grid.len());
    for (p, &g) in sweep.points.iter().zip(&grid) {
        assert_eq!(p.expected_degree, g);
    }
    // E[deg] beyond the item count is recorded as a failed point
    assert!(sweep.points[3].error.is_some());
    assert!(sweep.points[3].mae_mean.is_nan());
    assert!(sweep.points[..3].iter().all(|p| p.error.is_none() && p.mae_mean <= p.rmse_mean));
    let thresholds: Vec<f64> = sweep.points[..3].iter().map(|p| p.threshold).collect();
    assert!(thresholds.windows(2).all(|w| w[0] < w[1]));
    assert!(sweep.best_by_mae().is_some());

    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &sweep).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), grid.len() + 1);
    assert!(text.starts_with("expected_degree,threshold,mae_mean,rmse_mean"));
}

#[test]
fn comparison_runs_share_folds() {
    let ds = common::synthetic(40, 25, 10, 14);
    let explicit = Arc::new(common::random_trust(40, 100, 3));
    let specs = [
        ModelSpec::new(ModelKind::TrustSvd).with_hp(small_hp()),
        ModelSpec::new(ModelKind::HellTrustSvd).with_hp(small_hp()),
    ];
    let rows = compare_trust_sources(&ds, "s", explicit, 3.0, &specs, 4, 6).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.explicit.trust_source, "explicit");
        assert!(r.implicit.trust_source.starts_with("hellinger"));
        let ne: Vec<usize> = r.explicit.folds.iter().map(|f| f.n_test).collect();
        let ni: Vec<usize> = r.implicit.folds.iter().map(|f| f.n_test).collect();
        assert_eq!(ne, ni);
        assert!(r.mae_gap() >= 0.0 && r.rmse_gap() >= 0.0);
    }
    // both specs resolve to the same TrustSVD runs
    assert!(rows[0].explicit.folds.iter().zip(&rows[1].explicit.folds).all(|(a, b)| a.mae == b.mae));
}

#[test]
fn metric_csvs_have_expected_shape() {
    let ds = common::synthetic(30, 20, 10, 5);
    let reports: Vec<_> = [ModelKind::GlobalAvg, ModelKind::SlopeOne]
        .into_iter()
        .map(|k| cross_validate(&ds, "s", &ModelSpec::new(k), 4, 1, &TrustSource::None).unwrap())
        .collect();
    let mut m = Vec::new();
    write_metrics_csv(&mut m, &reports).unwrap();
    let m = String::from_utf8(m).unwrap();
    assert_eq!(m.lines().next().unwrap(), METRICS_CSV_HEADER.join(","));
    assert_eq!(m.lines().count(), 1 + 2 * 4);
    let mut a = Vec::new();
    write_aggregate_csv(&mut a, &reports).unwrap();
    let a = String::from_utf8(a).unwrap();
    assert_eq!(a.lines().next().unwrap(), AGGREGATE_CSV_HEADER.join(","));
    assert_eq!(a.lines().count(), 3);
}
