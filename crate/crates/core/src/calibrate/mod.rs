//! Calibration maps: Platt scaling, beta calibration and penalised spline
//! calibration, plus application and monotonicity checks.

mod beta;
mod newton;
mod platt;
mod spline;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::data::ScoreSet;

pub use beta::fit_beta;
pub use platt::fit_platt;
pub use spline::{fit_spline, NaturalSpline};

pub(crate) use newton::sigmoid;

/// Grid size used when a fitter verifies monotonicity.
pub const DEFAULT_MONOTONE_GRID: usize = 4097;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("empty fit set")]
    Empty,
    #[error("degenerate: single class")]
    SingleClass,
    #[error("failed to converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },
    #[error("too few distinct scores: {found} found, {required} required")]
    TooFewDistinct { found: usize, required: usize },
    #[error("spline fit failed to converge at every smoothing parameter")]
    AllLambdasFailed,
    #[error("invalid options: {0}")]
    Options(&'static str),
}

impl From<newton::NotConverged> for FitError {
    fn from(e: newton::NotConverged) -> Self {
        FitError::NotConverged {
            iterations: e.iterations,
            gradient_norm: e.gradient_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Method {
    Platt,
    Beta,
    Spline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Platt, Method::Beta, Method::Spline];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Platt => "platt",
            Method::Beta => "beta",
            Method::Spline => "spline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "platt" => Ok(Method::Platt),
            "beta" => Ok(Method::Beta),
            "spline" => Ok(Method::Spline),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitOptions {
    /// Scores are clamped to `[epsilon, 1 - epsilon]` before logs are taken.
    pub epsilon: f64,
    /// Use Platt's smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
    pub platt_target_smoothing: bool,
    /// `None` means `min(20, max(4, distinct_scores / 10))`.
    pub spline_knot_count: Option<usize>,
    pub spline_lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Seeds the spline cross-validation fold assignment.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            platt_target_smoothing: true,
            spline_knot_count: None,
            spline_lambda_grid: default_lambda_grid(),
            cv_folds: 5,
            max_iterations: 100,
            gradient_tolerance: 1e-10,
            seed: 0,
        }
    }
}

/// 17 log-spaced points from `1e-4` to `1e4` (half-decade steps).
pub fn default_lambda_grid() -> Vec<f64> {
    (0..17).map(|i| libm::pow(10.0, -4.0 + i as f64 * 0.5)).collect()
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.01) {
            return Err(FitError::Options("epsilon must lie in (0, 0.01)"));
        }
        if self.cv_folds < 2 {
            return Err(FitError::Options("cv_folds must be at least 2"));
        }
        if self.max_iterations == 0 {
            return Err(FitError::Options("max_iterations must be positive"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(FitError::Options("gradient_tolerance must be positive"));
        }
        if self.spline_lambda_grid.is_empty() {
            return Err(FitError::Options("lambda grid is empty"));
        }
        if self.spline_lambda_grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(FitError::Options("lambda grid values must be positive"));
        }
        if self.spline_lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FitError::Options("lambda grid must be strictly ascending"));
        }
        if matches!(self.spline_knot_count, Some(k) if k < 3) {
            return Err(FitError::Options("spline_knot_count must be at least 3"));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn clamp(&self, z: f64) -> f64 {
        clamp_score(z, self.epsilon)
    }

    pub(crate) fn newton(&self) -> newton::Settings {
        newton::Settings {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
        }
    }
}

#[inline]
fn clamp_score(z: f64, epsilon: f64) -> f64 {
    z.clamp(epsilon, 1.0 - epsilon)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "variant", rename_all = "snake_case")
)]
pub enum MapKind {
    Identity,
    /// `sigma(alpha + beta * z)` on the raw probability `z`.
    Platt { alpha: f64, beta: f64 },
    /// `logit(p) = c + a ln z - b ln(1 - z)`.
    Beta { a: f64, b: f64, c: f64 },
    /// `sigma(f(z))` with `f` a natural cubic spline given by its values at
    /// the knots.
    Spline {
        knots: Vec<f64>,
        basis_coefficients: Vec<f64>,
        lambda: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationMap {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: MapKind,
    pub epsilon: f64,
    pub monotone_verified: bool,
}

impl CalibrationMap {
    pub fn identity() -> Self {
        Self {
            kind: MapKind::Identity,
            epsilon: FitOptions::default().epsilon,
            monotone_verified: true,
        }
    }

    pub fn platt(alpha: f64, beta: f64) -> Self {
        Self {
            kind: MapKind::Platt { alpha, beta },
            epsilon: FitOptions::default().epsilon,
            monotone_verified: beta >= 0.0,
        }
    }

    pub fn beta(a: f64, b: f64, c: f64) -> Self {
        Self {
            kind: MapKind::Beta { a, b, c },
            epsilon: FitOptions::default().epsilon,
            monotone_verified: a >= 0.0 && b >= 0.0,
        }
    }

    pub fn variant(&self) -> &'static str {
        match self.kind {
            MapKind::Identity => "identity",
            MapKind::Platt { .. } => "platt",
            MapKind::Beta { .. } => "beta",
            MapKind::Spline { .. } => "spline",
        }
    }

    /// Structural checks for maps that arrive from outside (e.g. a JSON file).
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.01) {
            return Err("epsilon must lie in (0, 0.01)");
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match &self.kind {
            MapKind::Identity => Ok(()),
            MapKind::Platt { alpha, beta } => {
                finite(&[*alpha, *beta]).then_some(()).ok_or("non-finite parameter")
            }
            MapKind::Beta { a, b, c } => {
                finite(&[*a, *b, *c]).then_some(()).ok_or("non-finite parameter")?;
                (*a >= 0.0 && *b >= 0.0)
                    .then_some(())
                    .ok_or("beta exponents a and b must be nonnegative")
            }
            MapKind::Spline {
                knots,
                basis_coefficients,
                lambda,
            } => {
                if knots.len() < 3 {
                    return Err("spline needs at least 3 knots");
                }
                if knots.len() != basis_coefficients.len() {
                    return Err("knot and coefficient counts differ");
                }
                if !finite(knots) || !finite(basis_coefficients) || !(*lambda >= 0.0) {
                    return Err("non-finite spline parameter");
                }
                if knots.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("knots must be strictly ascending");
                }
                if knots[0] <= 0.0 || knots[knots.len() - 1] >= 1.0 {
                    return Err("knots must lie in (0, 1)");
                }
                Ok(())
            }
        }
    }

    /// Evaluates the map at a single score.
    pub fn apply_one(&self, z: f64) -> f64 {
        self.applier().apply(z)
    }

    fn applier(&self) -> Applier<'_> {
        match &self.kind {
            MapKind::Spline {
                knots,
                basis_coefficients,
                ..
            } => {
                let spline = NaturalSpline::new(knots.clone());
                let second = spline.second_derivatives(basis_coefficients);
                Applier::Spline {
                    spline,
                    values: basis_coefficients,
                    second,
                    epsilon: self.epsilon,
                }
            }
            kind => Applier::Closed {
                kind,
                epsilon: self.epsilon,
            },
        }
    }
}

enum Applier<'a> {
    Closed {
        kind: &'a MapKind,
        epsilon: f64,
    },
    Spline {
        spline: NaturalSpline,
        values: &'a [f64],
        second: Vec<f64>,
        epsilon: f64,
    },
}

impl Applier<'_> {
    fn apply(&self, z: f64) -> f64 {
        let p = match self {
            Applier::Closed { kind, epsilon } => match kind {
                MapKind::Identity => z,
                MapKind::Platt { alpha, beta } => sigmoid(alpha + beta * z),
                MapKind::Beta { a, b, c } => {
                    let z = clamp_score(z, *epsilon);
                    sigmoid(c + a * libm::log(z) - b * libm::log1p(-z))
                }
                MapKind::Spline { .. } => unreachable!("spline handled separately"),
            },
            Applier::Spline {
                spline,
                values,
                second,
                epsilon,
            } => sigmoid(spline.eval(values, second, clamp_score(z, *epsilon))),
        };
        p.clamp(0.0, 1.0)
    }
}

/// Applies the map element-wise, preserving positional order.
pub fn apply_map(map: &CalibrationMap, scores: &[f64]) -> Vec<f64> {
    let applier = map.applier();
    scores.iter().map(|&z| applier.apply(z)).collect()
}

/// Recalibrates a whole set, keeping ids and labels.
pub fn apply_to_set(map: &CalibrationMap, set: &ScoreSet) -> ScoreSet {
    set.with_scores(&apply_map(map, &set.scores()))
}

/// `true` iff the map is nondecreasing (to within `-1e-12`) across
/// `grid_size` equally spaced points of `[0, 1]`.
pub fn is_monotone(map: &CalibrationMap, grid_size: usize) -> bool {
    let grid_size = grid_size.max(2);
    let last = (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / last).collect();
    apply_map(map, &grid)
        .windows(2)
        .all(|w| w[1] - w[0] >= -1e-12)
}

/// Total Bernoulli log-likelihood of the set's labels under the mapped
/// probabilities. `-inf` when a certain prediction is wrong.
pub fn log_likelihood(map: &CalibrationMap, set: &ScoreSet) -> f64 {
    let probs = apply_map(map, &set.scores());
    probs
        .iter()
        .zip(set.records())
        .map(|(&p, r)| {
            if r.positive {
                libm::log(p)
            } else {
                libm::log1p(-p)
            }
        })
        .sum()
}

/// Dispatches to the fitter for `method`.
pub fn fit(method: Method, set: &ScoreSet, opts: &FitOptions) -> Result<CalibrationMap, FitError> {
    match method {
        Method::Platt => fit_platt(set, opts),
        Method::Beta => fit_beta(set, opts),
        Method::Spline => fit_spline(set, opts),
    }
}

/// Shared preconditions: options valid, set non-empty, both classes present.
/// Returns `(negatives, positives)`.
pub(crate) fn check_fit_set(set: &ScoreSet, opts: &FitOptions) -> Result<(usize, usize), FitError> {
    opts.validate()?;
    if set.is_empty() {
        return Err(FitError::Empty);
    }
    let (neg, pos) = set.class_counts();
    if neg == 0 || pos == 0 {
        return Err(FitError::SingleClass);
    }
    Ok((neg, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_apply() {
        assert_eq!(
            apply_map(&CalibrationMap::identity(), &[0.0, 0.3, 1.0]),
            vec![0.0, 0.3, 1.0]
        );
    }

    #[test]
    fn platt_at_zero_is_half() {
        assert_eq!(apply_map(&CalibrationMap::platt(0.0, 1.0), &[0.0]), vec![0.5]);
    }

    #[test]
    fn beta_identity_parameters() {
        let out = apply_map(&CalibrationMap::beta(1.0, 1.0, 0.0), &[0.3, 0.01, 0.97]);
        for (o, z) in out.iter().zip([0.3, 0.01, 0.97]) {
            assert!((o - z).abs() < 1e-15, "{o} vs {z}");
        }
    }

    #[test]
    fn monotone_checks() {
        assert!(is_monotone(&CalibrationMap::platt(0.3, 2.0), DEFAULT_MONOTONE_GRID));
        assert!(!is_monotone(&CalibrationMap::platt(0.3, -1.0), DEFAULT_MONOTONE_GRID));
        assert!(is_monotone(&CalibrationMap::identity(), 2));
    }

    #[test]
    fn option_validation() {
        let mut o = FitOptions::default();
        assert!(o.validate().is_ok());
        o.epsilon = 0.5;
        assert!(o.validate().is_err());
        let mut o = FitOptions::default();
        o.cv_folds = 1;
        assert!(o.validate().is_err());
        let mut o = FitOptions::default();
        o.spline_lambda_grid = vec![1.0, 0.5];
        assert!(o.validate().is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 17);
        assert!((g[0] - 1e-4).abs() < 1e-18);
        assert!((g[16] - 1e4).abs() < 1e-9);
        assert!((g[8] - 1.0).abs() < 1e-15);
    }
}
