use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{roc_auc, rri, Confusion};
use crate::dataio::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::model::{DpnnModel, Hyperparams};
use crate::numerics::derive_seed;
use crate::parallel::par_map;
use crate::trainer::train;

/// Metrics for one evaluated test set; `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub auc: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
    pub rri_rate: Option<f64>,
    pub rri_n: usize,
    /// Observed remission rate of the evaluated patients.
    pub baseline_rate: f64,
    pub n: usize,
}

/// Per-patient probabilities from a trained model.
pub fn predict_all(model: &DpnnModel, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    dataset
        .records
        .iter()
        .map(|r| model.predict_raw(&r.values()?))
        .collect()
}

/// Scores `dataset` with `model`: the classification score of a patient is
/// the predicted probability for the treatment they received.
pub fn evaluate_model(
    model: &DpnnModel,
    dataset: &Dataset,
    threshold: f64,
) -> Result<MetricsRecord> {
    if dataset.is_empty() {
        return Err(Error::Domain("cannot evaluate an empty test set".into()));
    }
    let probs = predict_all(model, dataset)?;
    let received = dataset.treatments_received();
    let labels = dataset.labels();
    let scores: Vec<f64> = probs.iter().zip(&received).map(|(p, &t)| p[t]).collect();
    let auc = match roc_auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let tm = Confusion::at_threshold(&scores, &labels, threshold).metrics();
    let r = rri(&probs, &received, &labels)?;
    let positives = labels.iter().filter(|&&y| y).count();
    Ok(MetricsRecord {
        auc,
        sensitivity: tm.sensitivity,
        specificity: tm.specificity,
        ppv: tm.ppv,
        npv: tm.npv,
        f1: tm.f1,
        rri_rate: r.rate,
        rri_n: r.n_matched,
        baseline_rate: positives as f64 / labels.len() as f64,
        n: labels.len(),
    })
}

/// Mean and sample standard deviation over the defined values of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl MetricStat {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                mean: None,
                sd: None,
                n,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = (n > 1)
            .then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Self {
            mean: Some(mean),
            sd,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub auc: MetricStat,
    pub sensitivity: MetricStat,
    pub specificity: MetricStat,
    pub ppv: MetricStat,
    pub npv: MetricStat,
    pub f1: MetricStat,
    pub rri_rate: MetricStat,
    pub rri_n: MetricStat,
    pub baseline_rate: MetricStat,
    /// Number of evaluated folds.
    pub samples: usize,
    pub failed: usize,
}

impl MetricsSummary {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a MetricsRecord> + Clone,
        failed: usize,
    ) -> Self {
        let stat = |f: fn(&MetricsRecord) -> Option<f64>| {
            MetricStat::of(records.clone().into_iter().map(f))
        };
        Self {
            auc: stat(|r| r.auc),
            sensitivity: stat(|r| r.sensitivity),
            specificity: stat(|r| r.specificity),
            ppv: stat(|r| r.ppv),
            npv: stat(|r| r.npv),
            f1: stat(|r| r.f1),
            rri_rate: stat(|r| r.rri_rate),
            rri_n: stat(|r| Some(r.rri_n as f64)),
            baseline_rate: stat(|r| Some(r.baseline_rate)),
            samples: records.into_iter().count(),
            failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub repeats: usize,
    /// Master seed for fold plans and per-fold training seeds.
    pub seed: u64,
    pub jobs: usize,
    pub threshold: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 10,
            repeats: 50,
            seed: 0,
            jobs: 1,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub repeat: usize,
    pub fold: usize,
    pub test_size: usize,
    pub record: Option<MetricsRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub summary: MetricsSummary,
    /// Sorted by (repeat, fold).
    pub folds: Vec<FoldOutcome>,
}

/// Training seed for fold `(repeat, fold)` under master `seed`.
pub fn fold_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    derive_seed(seed, &[u64::MAX, repeat as u64, fold as u64])
}

/// Repeated stratified k-fold cross-validation.
pub fn run_cv(dataset: &Dataset, h: &Hyperparams, opts: &CvOptions) -> Result<CvResult> {
    h.validate()?;
    let plan = FoldPlan::repeated(&dataset.labels(), opts.k, opts.repeats, opts.seed)?;
    let jobs: Vec<(usize, usize)> = (0..opts.repeats)
        .flat_map(|r| (0..opts.k).map(move |f| (r, f)))
        .collect();
    let mut folds = par_map(opts.jobs, &jobs, |&(repeat, fold)| {
        let test_idx = plan.test_indices(repeat, fold);
        let run = || -> Result<MetricsRecord> {
            let train_set = dataset.subset(&plan.train_indices(repeat, fold));
            let hf = Hyperparams {
                seed: fold_seed(opts.seed, repeat, fold),
                ..h.clone()
            };
            let report = train(&train_set, &hf)?;
            evaluate_model(&report.model, &dataset.subset(&test_idx), opts.threshold)
        };
        let (record, error) = match run() {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        FoldOutcome {
            repeat,
            fold,
            test_size: test_idx.len(),
            record,
            error,
        }
    })?;
    folds.sort_by_key(|f| (f.repeat, f.fold));
    let ok: Vec<&MetricsRecord> = folds.iter().filter_map(|f| f.record.as_ref()).collect();
    let failed = folds.len() - ok.len();
    let summary = MetricsSummary::from_records(ok.iter().copied(), failed);
    Ok(CvResult { summary, folds })
}

/// Trains on every study except `held_out` and evaluates on `held_out`.
pub fn loso(
    dataset: &Dataset,
    h: &Hyperparams,
    held_out: &str,
    threshold: f64,
) -> Result<MetricsRecord> {
    if !dataset.records.iter().any(|r| r.study == held_out) {
        return Err(Error::UnknownStudy(held_out.to_string()));
    }
    let train_set = dataset.filter(|r| r.study != held_out);
    let test_set = dataset.filter(|r| r.study == held_out);
    let report = train(&train_set, h)?;
    evaluate_model(&report.model, &test_set, threshold)
}

/// Outcome of holding out one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoOutcome {
    pub study: String,
    pub test_size: usize,
    pub record: Option<MetricsRecord>,
    pub error: Option<String>,
}

/// Holds out each study in turn, in order of first appearance. Every run trains
/// with `h.seed`.
pub fn loso_all(
    dataset: &Dataset,
    h: &Hyperparams,
    threshold: f64,
    jobs: usize,
) -> Result<Vec<LosoOutcome>> {
    h.validate()?;
    let studies = dataset.studies();
    par_map(jobs, &studies, |study| {
        let (record, error) = match loso(dataset, h, study, threshold) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        LosoOutcome {
            study: study.clone(),
            test_size: dataset.records.iter().filter(|r| &r.study == study).count(),
            record,
            error,
        }
    })
}

fn cell(s: &MetricStat) -> String {
    match (s.mean, s.sd) {
        (Some(m), Some(sd)) => format!("{m:.3} ({sd:.3})"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "n/a".to_string(),
    }
}

/// Fixed-width text table with one row per labelled summary.
pub fn format_metrics_table(rows: &[(String, MetricsSummary)]) -> String {
    let headers = [
        "Model",
        "AUC",
        "Sensitivity",
        "Specificity",
        "PPV",
        "NPV",
        "F1",
        "RRI",
        "Folds",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, s)| {
            vec![
                name.clone(),
                cell(&s.auc),
                cell(&s.sensitivity),
                cell(&s.specificity),
                cell(&s.ppv),
                cell(&s.npv),
                cell(&s.f1),
                cell(&s.rri_rate),
                if s.failed > 0 {
                    format!("{} ({} failed)", s.samples, s.failed)
                } else {
                    s.samples.to_string()
                },
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..headers.len())
        .map(|c| {
            body.iter()
                .map(|r| r[c].len())
                .chain([headers[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(headers.to_vec(), &mut out);
    line(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
        &mut out,
    );
    for r in &body {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}
