//! Metrics, experiment protocols and introspection reports.

mod auc;
mod decay;
mod protocols;
mod report;
mod suite;

pub use auc::{auc, mean_auc, output_aucs};
pub use decay::{decay_report, delta_grid, DecayCurve, DecayReport, HistogramBin, WeightHistogram, DELTA_MAX, DELTA_STEP, HIST_BINS};
pub use protocols::{
    cross_validate, fold_seed, online_eval, online_eval_cv, scaling_experiment, CutoffAuc, CvReport, CvRun,
    FoldResult, OnlineReport, ScalingCell, Summary,
};
pub use report::{
    correlation_csv, cv_csv, decay_curves_csv, hidden_hist_csv, num, online_csv, provenance_line, EvalReport,
};
pub use suite::{experiment_suite, SuiteConfig, SuiteOutcome, SuiteRow, SuiteTable, MANIFEST};
