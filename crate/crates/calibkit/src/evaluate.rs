//! One evaluation of a score set at one operating threshold: everything the
//! eval command and each experiment row report.

use calibkit_core::metrics::{
    basic_metrics, choose_threshold, confusion_at, ece, mce, mcc, pr_curve, reliability_bins,
    roc_curve, BinMode, ConfusionMatrix, Criterion, MetricError, ReliabilityBins,
    ThresholdChoice,
};
use calibkit_core::stats::{proportion_interval, IntervalEstimate, IntervalMethod};
use calibkit_core::ScoreSet;
use serde::{Serialize, Serializer};

/// Serialises `None` as the literal string `"NA"`.
pub fn na<T: Serialize, S: Serializer>(value: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => v.serialize(s),
        None => s.serialize_str("NA"),
    }
}

/// Text form used in CSV cells and console output.
pub fn na_text(value: Option<f64>) -> String {
    value.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// How the operating threshold is picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    Fixed(f64),
    Policy(Criterion),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub bins: usize,
    pub bin_mode: BinMode,
    pub ci_level: f64,
    pub ci_method: IntervalMethod,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            bins: calibkit_core::metrics::DEFAULT_BINS,
            bin_mode: BinMode::PositiveFraction,
            ci_level: 0.95,
            ci_method: IntervalMethod::Wilson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub threshold: ThresholdChoice,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    #[serde(serialize_with = "na")]
    pub precision: Option<f64>,
    #[serde(serialize_with = "na")]
    pub recall: Option<f64>,
    #[serde(serialize_with = "na")]
    pub fscore: Option<f64>,
    #[serde(serialize_with = "na")]
    pub mcc: Option<f64>,
    /// `NA` without positives.
    #[serde(serialize_with = "na")]
    pub auprc: Option<f64>,
    /// `NA` unless both classes are present.
    #[serde(serialize_with = "na")]
    pub auroc: Option<f64>,
    pub ece: f64,
    pub mce: f64,
    /// Binomial interval around the MCC value with n = set size; `NA` when
    /// MCC is undefined or negative.
    #[serde(serialize_with = "na")]
    pub mcc_ci: Option<IntervalEstimate>,
    #[serde(serialize_with = "na")]
    pub ece_ci: Option<IntervalEstimate>,
    #[serde(skip)]
    pub bins: ReliabilityBins,
}

pub fn interval(value: Option<f64>, n: usize, settings: &EvalSettings) -> Option<IntervalEstimate> {
    let v = value.filter(|v| (0.0..=1.0).contains(v))?;
    proportion_interval(v, n as u64, settings.ci_level, settings.ci_method).ok()
}

pub fn evaluate(
    set: &ScoreSet,
    rule: ThresholdRule,
    settings: &EvalSettings,
) -> Result<Evaluation, MetricError> {
    if set.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let threshold = match rule {
        ThresholdRule::Fixed(t) => ThresholdChoice {
            threshold: t,
            criterion: Criterion::DefaultHalf,
            criterion_value: t,
        },
        ThresholdRule::Policy(c) => choose_threshold(set, c)?,
    };
    let confusion = confusion_at(set, threshold.threshold);
    let basic = basic_metrics(&confusion);
    let mcc = mcc(&confusion);
    let bins = reliability_bins(set, settings.bins, settings.bin_mode)?;
    let ece = ece(&bins)?;
    let mce = mce(&bins)?;
    Ok(Evaluation {
        threshold,
        confusion,
        accuracy: basic.accuracy,
        precision: basic.precision,
        recall: basic.recall,
        fscore: basic.fscore,
        mcc,
        auprc: pr_curve(set).ok().map(|c| c.auprc()),
        auroc: roc_curve(set).ok().map(|c| c.auroc()),
        ece,
        mce,
        mcc_ci: interval(mcc, set.len(), settings),
        ece_ci: interval(Some(ece), set.len(), settings),
        bins,
    })
}
