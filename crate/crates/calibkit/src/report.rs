//! The single-set evaluation report written by `calibkit eval`.

use calibkit_core::metrics::{Bin, BinMode};
use calibkit_core::stats::IntervalMethod;
use serde::Serialize;

use crate::evaluate::{na, EvalSettings, Evaluation};
use crate::experiment::INTERVAL_NOTE;
use crate::TOOLKIT_VERSION;

pub const EVAL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct BinRow {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    #[serde(serialize_with = "na")]
    pub mean_score: Option<f64>,
    #[serde(serialize_with = "na")]
    pub observed: Option<f64>,
}

impl From<&Bin> for BinRow {
    fn from(b: &Bin) -> Self {
        Self {
            lower: b.lower,
            upper: b.upper,
            count: b.count,
            mean_score: b.mean_score,
            observed: b.observed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub toolkit_version: &'static str,
    pub generated_at: String,
    pub input: String,
    pub size: usize,
    pub positives: usize,
    pub negatives: usize,
    pub bin_mode: BinMode,
    pub bin_count: usize,
    pub ci_level: f64,
    pub ci_method: IntervalMethod,
    pub interval_note: &'static str,
    pub evaluation: Evaluation,
    pub reliability: Vec<BinRow>,
}

impl EvalReport {
    pub fn new(input: &str, counts: (usize, usize), settings: &EvalSettings, evaluation: Evaluation) -> Self {
        let (negatives, positives) = counts;
        Self {
            schema_version: EVAL_SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION,
            generated_at: crate::timestamp(),
            input: input.to_string(),
            size: negatives + positives,
            positives,
            negatives,
            bin_mode: settings.bin_mode,
            bin_count: settings.bins,
            ci_level: settings.ci_level,
            ci_method: settings.ci_method,
            interval_note: INTERVAL_NOTE,
            reliability: evaluation.bins.bins().iter().map(BinRow::from).collect(),
            evaluation,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialises");
        text.push('\n');
        text
    }
}
