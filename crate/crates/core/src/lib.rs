//! Probability calibration for binary classifiers.
//!
//! Fits Platt, beta and penalised-spline calibration maps to classifier
//! scores, measures calibration (reliability bins, ECE, MCE) and
//! classification quality (confusion-matrix metrics, PR and ROC curves),
//! selects operating thresholds, and attaches binomial confidence intervals.
//! [`simlab`] builds class-imbalanced subsets and synthetic scores with known
//! ground truth.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and the
//! experiment runner live in the `calibkit` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod calibrate;
pub mod data;
pub mod metrics;
pub mod rng;
pub mod simlab;
pub mod stats;

pub use calibrate::{
    apply_map, fit, fit_beta, fit_platt, fit_spline, is_monotone, CalibrationMap, FitError,
    FitOptions, MapKind, Method,
};
pub use data::{parse_scores_csv, stratified_split, DataError, ScoreRecord, ScoreSet, SplitSpec};
