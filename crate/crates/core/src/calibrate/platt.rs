use alloc::vec::Vec;

use nalgebra::DVector;

use super::newton::{maximize, LogisticDesign};
use super::{check_fit_set, CalibrationMap, FitError, FitOptions, MapKind};
use crate::data::ScoreSet;

/// Fits `p = sigma(alpha + beta * z)` on the (clamped) probabilities `z` by
/// maximum likelihood, optionally against Platt's smoothed targets.
pub fn fit_platt(set: &ScoreSet, opts: &FitOptions) -> Result<CalibrationMap, FitError> {
    let (neg, pos) = check_fit_set(set, opts)?;
    let (hi, lo) = if opts.platt_target_smoothing {
        (
            (pos as f64 + 1.0) / (pos as f64 + 2.0),
            1.0 / (neg as f64 + 2.0),
        )
    } else {
        (1.0, 0.0)
    };

    let mut rows = Vec::with_capacity(set.len() * 2);
    let mut targets = Vec::with_capacity(set.len());
    for r in set.records() {
        rows.push(1.0);
        rows.push(opts.clamp(r.score));
        targets.push(if r.positive { hi } else { lo });
    }
    let design = LogisticDesign {
        rows: &rows,
        features: 2,
        targets: &targets,
    };
    let start = DVector::from_vec(alloc::vec![
        libm::log((pos as f64 + 1.0) / (neg as f64 + 1.0)),
        0.0
    ]);
    let sol = maximize(&design, start, opts.newton())?;
    let (alpha, beta) = (sol.x[0], sol.x[1]);
    Ok(CalibrationMap {
        kind: MapKind::Platt { alpha, beta },
        epsilon: opts.epsilon,
        monotone_verified: beta >= 0.0,
    })
}
