//! Evaluation harness: metrics, splitting, oversampling, and the
//! cross-validated experiment grid.

pub mod experiment;
pub mod metrics;
pub mod split;

pub use experiment::{
    compare_cell, render_comparison_text, render_text, run_experiment, CellReport,
    ComparisonReport, ExperimentConfig, ExperimentReport, MeanMetrics, ModelRow,
};
pub use metrics::{
    compute_metrics, roc_auc, ClassMetrics, ConfusionMatrix, MetricName, MetricsReport,
};
pub use split::{
    kfold, oversample, oversample_indices, stratified_split, stratified_split_indices, FoldPlan,
};
