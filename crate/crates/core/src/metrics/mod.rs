//! Confusion-matrix metrics, PR/ROC curves, reliability binning with ECE and
//! MCE, and operating-threshold selection.

mod confusion;
mod curves;
mod reliability;
mod threshold;

use thiserror::Error;

pub use confusion::{basic_metrics, confusion_at, mcc, BasicMetrics, ConfusionMatrix};
pub use curves::{pr_curve, roc_curve, PrCurve, PrPoint, RocCurve, RocPoint};
pub use reliability::{ece, mce, reliability_bins, Bin, BinMode, ReliabilityBins};
pub use threshold::{
    gmeans_threshold, optimal_threshold_pr, youden_threshold, Criterion, ThresholdChoice,
};

/// Default number of reliability bins.
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no positive labels")]
    NoPositives,
    #[error("degenerate: single class")]
    SingleClass,
    #[error("empty set")]
    EmptySet,
    #[error("no operating point with a defined F-score")]
    NoDefinedF,
    #[error("empty curve")]
    EmptyCurve,
    #[error("bin count must be at least 2, got {0}")]
    BinCount(usize),
}

/// Picks a threshold on `set` according to `criterion`.
pub fn choose_threshold(
    set: &crate::data::ScoreSet,
    criterion: Criterion,
) -> Result<ThresholdChoice, MetricError> {
    match criterion {
        Criterion::DefaultHalf => Ok(ThresholdChoice::default_half()),
        Criterion::PrFmax => optimal_threshold_pr(&pr_curve(set)?),
        Criterion::Youden => youden_threshold(&roc_curve(set)?),
        Criterion::Gmeans => gmeans_threshold(&roc_curve(set)?),
    }
}
