//! Classification and treatment-selection metrics, repeated stratified
//! cross-validation and leave-one-study-out validation.

mod cv;
mod metrics;

pub use cv::{
    evaluate_model, fold_seed, format_metrics_table, loso, loso_all, predict_all, run_cv,
    CvOptions, CvResult, FoldOutcome, LosoOutcome, MetricStat, MetricsRecord, MetricsSummary,
};
pub use metrics::{
    argmax, improvement, roc_auc, rri, threshold_metrics, Confusion, RriResult, ThresholdMetrics,
    DEFAULT_BASELINE,
};
