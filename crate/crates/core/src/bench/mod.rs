//! Repeated-run evaluation of imbalance techniques: metrics, the technique
//! grammar, the per-run pipeline, suite aggregation and report files.

mod metrics;
mod report;
mod run;
mod suite;
mod technique;

pub use metrics::{
    confusion, f1_score, mean_std, median, pct_improvement, variance_to_mean, Confusion,
    BASELINE_REFERENCE_F1,
};
pub use report::{emit_report, REPORT_COLUMNS};
pub use run::{
    evaluate, fit_baseline, run_technique, train_technique, BaselineFit, FoldAccess, Folds,
    RunConfig, RunResult, SealedTest, Trained,
};
pub use suite::{
    run_suite, stability_notes, MetricsReport, RunFailure, Stat, SuiteConfig, TechniqueSummary,
    UNRELIABLE_FAILURE_SHARE,
};
pub use technique::{
    all_techniques, catalogue, CalibrationMethod, Category, GenerativeKind, Technique,
    TechniqueSpec, DEFAULT_BAGGING_MEMBERS, DEFAULT_BOOSTING_ROUNDS,
};
