use alloc::vec::Vec;

use nalgebra::DVector;

use super::newton::{maximize, LogisticDesign};
use super::{check_fit_set, CalibrationMap, FitError, FitOptions, MapKind};
use crate::data::ScoreSet;

/// Fits `logit(p) = c + a ln z - b ln(1 - z)` by logistic regression on the
/// features `(ln z, -ln(1 - z))`.
///
/// A negative `a` or `b` is removed by dropping that feature and refitting
/// (the more negative one first), so the result always has `a, b >= 0` and is
/// nondecreasing.
pub fn fit_beta(set: &ScoreSet, opts: &FitOptions) -> Result<CalibrationMap, FitError> {
    check_fit_set(set, opts)?;

    let logs: Vec<(f64, f64)> = set
        .records()
        .iter()
        .map(|r| {
            let z = opts.clamp(r.score);
            (libm::log(z), -libm::log1p(-z))
        })
        .collect();
    let targets: Vec<f64> = set
        .records()
        .iter()
        .map(|r| if r.positive { 1.0 } else { 0.0 })
        .collect();

    // Start at the identity map: (a, b, c) = (1, 1, 0).
    let mut params: [f64; 3] = [1.0, 1.0, 0.0];
    let mut active = [true, true];
    loop {
        let columns: Vec<usize> = (0..2).filter(|&i| active[i]).collect();
        let features = columns.len() + 1;
        let mut rows = Vec::with_capacity(logs.len() * features);
        for &(ln_z, neg_ln_1mz) in &logs {
            for &c in &columns {
                rows.push(if c == 0 { ln_z } else { neg_ln_1mz });
            }
            rows.push(1.0);
        }
        let design = LogisticDesign {
            rows: &rows,
            features,
            targets: &targets,
        };
        let mut start: Vec<f64> = columns.iter().map(|&c| params[c].max(0.0)).collect();
        start.push(params[2]);
        let sol = maximize(&design, DVector::from_vec(start), opts.newton())?;

        params = [0.0, 0.0, sol.x[features - 1]];
        for (slot, &c) in columns.iter().enumerate() {
            params[c] = sol.x[slot];
        }

        let drop = columns
            .iter()
            .copied()
            .filter(|&c| params[c] < 0.0)
            .min_by(|&x, &y| params[x].total_cmp(&params[y]));
        match drop {
            Some(c) => {
                active[c] = false;
                params[c] = 0.0;
            }
            None => break,
        }
    }

    let [a, b, c] = params;
    Ok(CalibrationMap {
        kind: MapKind::Beta { a, b, c },
        epsilon: opts.epsilon,
        monotone_verified: true,
    })
}
