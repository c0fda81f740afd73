//! Cross-validated evaluation, threshold sweeps and explicit-vs-implicit
//! trust comparisons.

use std::fmt;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{kfold_split, FoldAssignment, RatingDataset, RatingRecord, TrustEdgeList};
use crate::error::{Error, Result};
use crate::models::{derive_seed, train_model, ModelKind, ModelSpec, Predictor};
use crate::trust::{DistanceModel, ThresholdSpec};

/// Expected degree used by HellTrustSVD when the experiment names no
/// Hellinger source of its own.
pub const DEFAULT_EXPECTED_DEGREE: f64 = 10.0;

/// Default expected-degree grid for threshold sweeps.
pub const DEFAULT_SWEEP_GRID: [f64; 11] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0];

const STREAM_MODEL: u64 = 1_000;
const STREAM_EXTRACT: u64 = 2_000;

/// (MAE, RMSE) of `predictor` over `test`.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, test: &[RatingRecord]) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::Empty("test set has no ratings".into()));
    }
    let (mut abs, mut sq) = (0.0, 0.0);
    for r in test {
        let e = predictor.predict(r.user, r.item) - r.rating;
        abs += e.abs();
        sq += e * e;
    }
    let n = test.len() as f64;
    Ok((abs / n, (sq / n).sqrt()))
}

/// Where a fold's trust graph comes from.
#[derive(Debug, Clone)]
pub enum TrustSource {
    None,
    Explicit(Arc<TrustEdgeList>),
    Hellinger {
        expected_degree: f64,
        sample_size: Option<usize>,
    },
}

impl TrustSource {
    pub fn hellinger(expected_degree: f64) -> Self {
        TrustSource::Hellinger {
            expected_degree,
            sample_size: None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TrustSource::None => "none".into(),
            TrustSource::Explicit(_) => "explicit".into(),
            TrustSource::Hellinger {
                expected_degree, ..
            } => format!("hellinger({expected_degree})"),
        }
    }

    /// The source a model of `kind` actually consumes.
    fn effective_for(&self, kind: ModelKind) -> TrustSource {
        match kind {
            ModelKind::TrustSvd => self.clone(),
            ModelKind::HellTrustSvd => match self {
                TrustSource::Hellinger { .. } => self.clone(),
                _ => TrustSource::hellinger(DEFAULT_EXPECTED_DEGREE),
            },
            _ => TrustSource::None,
        }
    }
}

/// Trust graph handed to one fold's training run.
#[derive(Debug, Clone)]
pub struct FoldTrust {
    pub edges: Option<Arc<TrustEdgeList>>,
    pub threshold: Option<ThresholdSpec>,
}

/// Supplies the trust graph for a fold given only that fold's training data.
pub trait FoldTrustProvider: Sync {
    fn fold_trust(&self, fold: usize, train: &RatingDataset, seed: u64) -> Result<FoldTrust>;
    fn label(&self) -> String;
}

impl FoldTrustProvider for TrustSource {
    fn fold_trust(&self, fold: usize, train: &RatingDataset, seed: u64) -> Result<FoldTrust> {
        match self {
            TrustSource::None => Ok(FoldTrust {
                edges: None,
                threshold: None,
            }),
            TrustSource::Explicit(t) => Ok(FoldTrust {
                edges: Some(Arc::clone(t)),
                threshold: None,
            }),
            TrustSource::Hellinger {
                expected_degree,
                sample_size,
            } => {
                let model = DistanceModel::new(
                    train,
                    *sample_size,
                    derive_seed(seed, STREAM_EXTRACT + fold as u64),
                )?;
                let x = model.extract(*expected_degree)?;
                Ok(FoldTrust {
                    edges: Some(Arc::new(x.edges)),
                    threshold: Some(x.threshold),
                })
            }
        }
    }

    fn label(&self) -> String {
        TrustSource::label(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub mae: f64,
    pub rmse: f64,
    pub n_test: usize,
    pub seconds: f64,
    pub threshold: Option<f64>,
    pub trust_edges: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub trust_source: String,
    pub folds: Vec<FoldResult>,
    pub mae_mean: f64,
    pub mae_se: f64,
    pub rmse_mean: f64,
    pub rmse_se: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

impl EvalReport {
    fn from_folds(model: &str, dataset: &str, trust_source: String, folds: Vec<FoldResult>) -> Self {
        let maes: Vec<f64> = folds.iter().map(|f| f.mae).collect();
        let rmses: Vec<f64> = folds.iter().map(|f| f.rmse).collect();
        let (mae_mean, mae_se) = mean_se(&maes);
        let (rmse_mean, rmse_se) = mean_se(&rmses);
        Self {
            model: model.to_owned(),
            dataset: dataset.to_owned(),
            trust_source,
            folds,
            mae_mean,
            mae_se,
            rmse_mean,
            rmse_se,
        }
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_metrics(&self, other: &EvalReport) -> bool {
        let strip = |r: &EvalReport| {
            let mut r = r.clone();
            r.folds.iter_mut().for_each(|f| f.seconds = 0.0);
            r
        };
        strip(self) == strip(other)
    }

    pub fn mean_threshold(&self) -> Option<f64> {
        let ts: Vec<f64> = self.folds.iter().filter_map(|f| f.threshold).collect();
        (!ts.is_empty()).then(|| ts.iter().sum::<f64>() / ts.len() as f64)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} on {} [{}]: MAE {:.4} ({:.4})  RMSE {:.4} ({:.4})",
            self.model, self.dataset, self.trust_source, self.mae_mean, self.mae_se, self.rmse_mean, self.rmse_se
        )
    }
}

/// Trains and tests `spec` on every fold of `folds`.
///
/// Each fold sees only its training records: the trust provider (and so
/// any trust extraction) and the model are both built from
/// `ds.subset(train_indices)`. Folds run in parallel on the current rayon
/// pool and are reported in fold order.
pub fn cross_validate_folds(
    ds: &RatingDataset,
    dataset_name: &str,
    spec: &ModelSpec,
    folds: &FoldAssignment,
    trust: &dyn FoldTrustProvider,
    seed: u64,
) -> Result<EvalReport> {
    spec.validate()?;
    let results: Vec<Result<FoldResult>> = (0..folds.k())
        .into_par_iter()
        .map(|fold| run_fold(ds, spec, folds, trust, seed, fold).map_err(|e| e.in_fold(fold)))
        .collect();
    let folds = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_folds(&spec.name, dataset_name, trust.label(), folds))
}

fn run_fold(
    ds: &RatingDataset,
    spec: &ModelSpec,
    folds: &FoldAssignment,
    trust: &dyn FoldTrustProvider,
    seed: u64,
    fold: usize,
) -> Result<FoldResult> {
    let start = Instant::now();
    let train = ds.subset(&folds.train_indices(fold));
    let test: Vec<RatingRecord> = folds
        .test_indices(fold)
        .into_iter()
        .map(|k| ds.records()[k])
        .collect();
    let ft = if spec.kind.uses_trust() {
        trust.fold_trust(fold, &train, seed)?
    } else {
        FoldTrust {
            edges: None,
            threshold: None,
        }
    };
    let mut spec = spec.clone();
    spec.hp.seed = derive_seed(seed ^ spec.hp.seed, STREAM_MODEL + fold as u64);
    let model = train_model(&spec, &train, ft.edges.as_deref())?;
    let (mae, rmse) = evaluate(&model, &test)?;
    Ok(FoldResult {
        fold,
        mae,
        rmse,
        n_test: test.len(),
        seconds: start.elapsed().as_secs_f64(),
        threshold: ft.threshold.map(|t| t.threshold),
        trust_edges: ft.edges.map(|e| e.len()),
    })
}

/// k-fold cross-validation of one model with folds drawn from `seed`.
pub fn cross_validate(
    ds: &RatingDataset,
    dataset_name: &str,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    trust: &TrustSource,
) -> Result<EvalReport> {
    let folds = kfold_split(ds, k, seed)?;
    let source = trust.effective_for(spec.kind);
    cross_validate_folds(ds, dataset_name, spec, &folds, &source, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub expected_degree: f64,
    /// Mean over folds of the per-fold threshold.
    pub threshold: f64,
    pub mae_mean: f64,
    pub rmse_mean: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub model: String,
    pub dataset: String,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Successful point with the lowest MAE.
    pub fn best_by_mae(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.error.is_none())
            .min_by(|a, b| a.mae_mean.total_cmp(&b.mae_mean))
    }

    pub fn best_by_rmse(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.error.is_none())
            .min_by(|a, b| a.rmse_mean.total_cmp(&b.rmse_mean))
    }
}

/// Default sweep configuration: TrustSVD with 5 factors, 50 epochs,
/// learning rate 0.005 and λ = 0.5.
pub fn sweep_model_spec(reg_social: f64) -> ModelSpec {
    ModelSpec::new(ModelKind::HellTrustSvd).with_hp(crate::models::HyperParams {
        factors: 5,
        max_iter: 50,
        learn_rate: 0.005,
        reg: 0.5,
        reg_social,
        ..Default::default()
    })
}

/// Cross-validates `spec` once per expected degree, all points sharing one
/// fold assignment. Per fold the distance fit is computed once and every
/// point reuses it. Failed points are recorded and the sweep continues.
pub fn threshold_sweep(
    ds: &RatingDataset,
    dataset_name: &str,
    expected_degrees: &[f64],
    spec: &ModelSpec,
    k: usize,
    seed: u64,
) -> Result<SweepReport> {
    spec.validate()?;
    let folds = kfold_split(ds, k, seed)?;
    let m = ds.n_items() as f64;
    // per fold: Vec over points of Result<(T, mae, rmse)>
    let per_fold: Vec<Result<Vec<Result<(f64, f64, f64)>>>> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<Vec<Result<(f64, f64, f64)>>> {
            let train = ds.subset(&folds.train_indices(fold));
            let test: Vec<RatingRecord> = folds
                .test_indices(fold)
                .into_iter()
                .map(|i| ds.records()[i])
                .collect();
            let mut dm = DistanceModel::new(&train, None, derive_seed(seed, STREAM_EXTRACT + fold as u64))
                .map_err(|e| e.in_fold(fold))?;
            dm.cache_distances();
            let mut fold_spec = spec.clone();
            fold_spec.hp.seed = derive_seed(seed ^ spec.hp.seed, STREAM_MODEL + fold as u64);
            Ok(expected_degrees
                .iter()
                .map(|&deg| {
                    if !(deg > 0.0 && deg < m) {
                        return Err(Error::InvalidArgument(format!(
                            "expected degree {deg} outside (0, {m})"
                        )));
                    }
                    let x = dm.extract(deg)?;
                    let model = train_model(&fold_spec, &train, Some(&x.edges))?;
                    let (mae, rmse) = evaluate(&model, &test)?;
                    Ok((x.threshold.threshold, mae, rmse))
                })
                .collect())
        })
        .collect();
    let per_fold = per_fold.into_iter().collect::<Result<Vec<_>>>()?;

    let points = expected_degrees
        .iter()
        .enumerate()
        .map(|(p, &deg)| {
            let mut vals = Vec::new();
            let mut err = None;
            for (fold, runs) in per_fold.iter().enumerate() {
                match &runs[p] {
                    Ok(v) => vals.push(*v),
                    Err(e) => {
                        err.get_or_insert_with(|| format!("fold {fold}: {e}"));
                    }
                }
            }
            let avg = |f: fn(&(f64, f64, f64)) -> f64| {
                if err.is_some() || vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().map(f).sum::<f64>() / vals.len() as f64
                }
            };
            SweepPoint {
                expected_degree: deg,
                threshold: avg(|v| v.0),
                mae_mean: avg(|v| v.1),
                rmse_mean: avg(|v| v.2),
                error: err,
            }
        })
        .collect();
    Ok(SweepReport {
        model: spec.name.clone(),
        dataset: dataset_name.to_owned(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustComparison {
    pub explicit: EvalReport,
    pub implicit: EvalReport,
}

impl TrustComparison {
    pub fn mae_gap(&self) -> f64 {
        (self.implicit.mae_mean - self.explicit.mae_mean).abs()
    }

    pub fn rmse_gap(&self) -> f64 {
        (self.implicit.rmse_mean - self.explicit.rmse_mean).abs()
    }
}

/// Runs every spec twice on identical folds: once with the explicit trust
/// list and once with the Hellinger-extracted one.
pub fn compare_trust_sources(
    ds: &RatingDataset,
    dataset_name: &str,
    explicit: Arc<TrustEdgeList>,
    expected_degree: f64,
    specs: &[ModelSpec],
    k: usize,
    seed: u64,
) -> Result<Vec<TrustComparison>> {
    let folds = kfold_split(ds, k, seed)?;
    let explicit = TrustSource::Explicit(explicit);
    let implicit = TrustSource::hellinger(expected_degree);
    specs
        .iter()
        .map(|spec| {
            let mut s = spec.clone();
            if s.kind == ModelKind::HellTrustSvd {
                s.kind = ModelKind::TrustSvd;
            }
            Ok(TrustComparison {
                explicit: cross_validate_folds(ds, dataset_name, &s, &folds, &explicit, seed)?,
                implicit: cross_validate_folds(ds, dataset_name, &s, &folds, &implicit, seed)?,
            })
        })
        .collect()
}

/// Side-by-side table with the implicit result in parentheses.
pub fn comparison_table(rows: &[TrustComparison]) -> String {
    let mut s = String::from("model,MAE,RMSE\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.3}({:.3}),{:.3}({:.3})\n",
            r.explicit.model, r.explicit.mae_mean, r.implicit.mae_mean, r.explicit.rmse_mean, r.implicit.rmse_mean
        ));
    }
    s
}

pub const METRICS_CSV_HEADER: [&str; 9] = [
    "model",
    "dataset",
    "trust_source",
    "fold",
    "mae",
    "rmse",
    "n_test",
    "threshold",
    "trust_edges",
];
/// Wall-clock timings live in their own file so the metric files stay
/// byte-identical across reruns.
pub const TIMING_CSV_HEADER: [&str; 4] = ["model", "trust_source", "fold", "seconds"];
pub const AGGREGATE_CSV_HEADER: [&str; 7] =
    ["model", "dataset", "trust_source", "mae_mean", "mae_se", "rmse_mean", "rmse_se"];
pub const SWEEP_CSV_HEADER: [&str; 4] = ["expected_degree", "threshold", "mae_mean", "rmse_mean"];

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

pub fn write_metrics_csv<W: Write>(sink: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(METRICS_CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        for f in &r.folds {
            w.write_record([
                r.model.clone(),
                r.dataset.clone(),
                r.trust_source.clone(),
                f.fold.to_string(),
                format!("{:.6}", f.mae),
                format!("{:.6}", f.rmse),
                f.n_test.to_string(),
                f.threshold.map_or(String::new(), |t| format!("{t:.6}")),
                f.trust_edges.map_or(String::new(), |n| n.to_string()),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

pub fn write_timing_csv<W: Write>(sink: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TIMING_CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        for f in &r.folds {
            w.write_record([
                r.model.clone(),
                r.trust_source.clone(),
                f.fold.to_string(),
                format!("{:.3}", f.seconds),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

pub fn write_aggregate_csv<W: Write>(sink: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(AGGREGATE_CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.model.clone(),
            r.dataset.clone(),
            r.trust_source.clone(),
            format!("{:.6}", r.mae_mean),
            format!("{:.6}", r.mae_se),
            format!("{:.6}", r.rmse_mean),
            format!("{:.6}", r.rmse_se),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

pub fn write_sweep_csv<W: Write>(sink: W, sweep: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SWEEP_CSV_HEADER).map_err(csv_err)?;
    for p in &sweep.points {
        w.write_record([
            format!("{}", p.expected_degree),
            format!("{:.6}", p.threshold),
            format!("{:.6}", p.mae_mean),
            format!("{:.6}", p.rmse_mean),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl Predictor for Fixed {
        fn predict(&self, _user: usize, item: usize) -> f64 {
            self.0[item]
        }
    }

    fn test_set(ratings: &[f64]) -> Vec<RatingRecord> {
        ratings
            .iter()
            .enumerate()
            .map(|(item, &rating)| RatingRecord {
                user: 0,
                item,
                rating,
            })
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let t = test_set(&[1.0, 2.0, 3.0]);
        assert_eq!(evaluate(&Fixed(vec![1.0, 2.0, 3.0]), &t).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn symmetric_residuals() {
        let t = test_set(&[3.0, 3.0]);
        assert_eq!(evaluate(&Fixed(vec![3.5, 2.5]), &t).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn unequal_residuals() {
        let t = test_set(&[3.0, 3.0]);
        let (mae, rmse) = evaluate(&Fixed(vec![3.0, 4.0]), &t).unwrap();
        assert_eq!(mae, 0.5);
        assert!((rmse - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(mae < rmse);
    }

    #[test]
    fn empty_test_set() {
        assert!(matches!(evaluate(&Fixed(vec![]), &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn standard_error_uses_fold_spread() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((se - sd / 2.0).abs() < 1e-15);
    }
}
