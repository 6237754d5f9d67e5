//! Damped Newton ascent for small smooth concave objectives.

use nalgebra::{DMatrix, DVector};

/// A concave objective to maximise.
pub(crate) trait Concave {
    fn value(&self, x: &DVector<f64>) -> f64;

    /// Gradient and the negated Hessian (positive semidefinite).
    fn derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NotConverged {
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub(crate) struct Solution {
    pub x: DVector<f64>,
}

const MAX_HALVINGS: usize = 60;
/// Newton decrement below which no representable improvement remains. Lets
/// badly scaled problems (very large smoothing penalties) stop at their
/// gradient noise floor.
const MIN_DECREMENT: f64 = 1e-20;

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| if x.abs() > m { x.abs() } else { m })
}

/// Solves `h * d = g`, adding a growing ridge when `h` is not numerically
/// positive definite.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Some(chol.solve(g));
    }
    let scale = h.diagonal().iter().fold(1e-12_f64, |m, x| m.max(x.abs()));
    let mut ridge = scale * 1e-10;
    for _ in 0..30 {
        let mut damped = h.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += ridge;
        }
        if let Some(chol) = damped.cholesky() {
            return Some(chol.solve(g));
        }
        ridge *= 10.0;
    }
    None
}

/// Newton iterations with step halving whenever the objective would drop.
///
/// Converged when the sup-norm of the gradient falls below the tolerance or
/// the Newton decrement drops below `MIN_DECREMENT`. If
/// no halving can improve the objective the iterate is accepted only when the
/// gradient is already at the numerical floor (`sqrt(tolerance)`).
pub(crate) fn maximize<F: Concave>(
    objective: &F,
    start: DVector<f64>,
    settings: Settings,
) -> Result<Solution, NotConverged> {
    let mut x = start;
    let mut value = objective.value(&x);
    let mut gradient_norm = f64::INFINITY;

    for iteration in 0..settings.max_iterations {
        let (gradient, neg_hessian) = objective.derivatives(&x);
        gradient_norm = max_abs(&gradient);
        if !gradient_norm.is_finite() {
            break;
        }
        if gradient_norm < settings.gradient_tolerance {
            return Ok(Solution { x });
        }
        let Some(direction) = newton_direction(neg_hessian, &gradient) else {
            break;
        };
        // Predicted ascent of the full step is twice this.
        let decrement = gradient.dot(&direction);
        if decrement < MIN_DECREMENT {
            return Ok(Solution { x });
        }
        if decrement < 1e-12 * (1.0 + value.abs()) {
            // Below the resolution of `value`: comparing objectives is noise.
            x += &direction;
            value = objective.value(&x);
            continue;
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &x + &direction * step;
            let candidate_value = objective.value(&candidate);
            if candidate_value.is_finite() && candidate_value >= value {
                x = candidate;
                value = candidate_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if gradient_norm < libm::sqrt(settings.gradient_tolerance) {
                return Ok(Solution { x });
            }
            return Err(NotConverged {
                iterations: iteration + 1,
                gradient_norm,
            });
        }
    }

    let (gradient, _) = objective.derivatives(&x);
    let final_norm = max_abs(&gradient);
    if final_norm < settings.gradient_tolerance {
        return Ok(Solution { x });
    }
    Err(NotConverged {
        iterations: settings.max_iterations,
        gradient_norm: if final_norm.is_finite() {
            final_norm
        } else {
            gradient_norm
        },
    })
}

/// `log(1 + exp(f))` without overflow.
#[inline]
pub(crate) fn log1p_exp(f: f64) -> f64 {
    if f > 0.0 {
        f + libm::log1p(libm::exp(-f))
    } else {
        libm::log1p(libm::exp(f))
    }
}

#[inline]
pub(crate) fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + libm::exp(-f))
    } else {
        let e = libm::exp(f);
        e / (1.0 + e)
    }
}

/// Mean Bernoulli log-likelihood of a linear predictor over dense features.
pub(crate) struct LogisticDesign<'a> {
    /// Row-major, `features` columns per row.
    pub rows: &'a [f64],
    pub features: usize,
    pub targets: &'a [f64],
}

impl LogisticDesign<'_> {
    fn linear(&self, x: &DVector<f64>, row: usize) -> f64 {
        let r = &self.rows[row * self.features..(row + 1) * self.features];
        r.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }
}

impl Concave for LogisticDesign<'_> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let n = self.targets.len();
        let total: f64 = (0..n)
            .map(|i| {
                let f = self.linear(x, i);
                self.targets[i] * f - log1p_exp(f)
            })
            .sum();
        total / n as f64
    }

    fn derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.features;
        let n = self.targets.len();
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for i in 0..n {
            let r = &self.rows[i * k..(i + 1) * k];
            let p = sigmoid(self.linear(x, i));
            let resid = self.targets[i] - p;
            let w = p * (1.0 - p);
            for a in 0..k {
                g[a] += resid * r[a];
                for b in a..k {
                    h[(a, b)] += w * r[a] * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        let scale = 1.0 / n as f64;
        (g * scale, h * scale)
    }
}
