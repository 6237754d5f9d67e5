//! Penalised natural cubic spline calibration on the logit scale.
//!
//! The spline is parameterised by its values at the knots. Natural boundary
//! conditions (zero second derivative at both end knots) make the second
//! derivatives a linear function of those values, `M = S * values`, and the
//! roughness `integral f''(t)^2 dt` a quadratic form `values' P values`.
//! Outside the knot range the spline continues linearly.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::newton::{log1p_exp, maximize, sigmoid, Concave};
use super::{check_fit_set, is_monotone, CalibrationMap, FitError, FitOptions, MapKind};
use super::DEFAULT_MONOTONE_GRID;
use crate::data::ScoreSet;
use crate::rng::SeededRng;

#[derive(Debug, Clone)]
pub struct NaturalSpline {
    knots: Vec<f64>,
    /// `K x K`; rows 0 and `K - 1` are zero.
    second: DMatrix<f64>,
}

impl NaturalSpline {
    /// `knots` must be strictly ascending with at least 3 entries.
    pub fn new(knots: Vec<f64>) -> Self {
        let k = knots.len();
        assert!(k >= 3, "natural spline needs at least 3 knots");
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(h.iter().all(|&x| x > 0.0), "knots must be strictly ascending");

        // Continuity of f' at interior knots: R * M_inner = Q' * values.
        let m = k - 2;
        let mut r = DMatrix::zeros(m, m);
        let mut qt = DMatrix::zeros(m, k);
        for j in 1..=m {
            let row = j - 1;
            r[(row, row)] = (h[j - 1] + h[j]) / 3.0;
            if row + 1 < m {
                r[(row, row + 1)] = h[j] / 6.0;
                r[(row + 1, row)] = h[j] / 6.0;
            }
            qt[(row, j - 1)] = 1.0 / h[j - 1];
            qt[(row, j)] = -1.0 / h[j - 1] - 1.0 / h[j];
            qt[(row, j + 1)] = 1.0 / h[j];
        }
        let inner = r
            .cholesky()
            .expect("spline band matrix is positive definite")
            .solve(&qt);
        let mut second = DMatrix::zeros(k, k);
        second.view_mut((1, 0), (m, k)).copy_from(&inner);
        Self { knots, second }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Second derivatives at the knots for the given knot values.
    pub fn second_derivatives(&self, values: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(values);
        (&self.second * v).iter().copied().collect()
    }

    /// Segment index and weights `(w0, w1, w2, w3)` such that
    /// `f(t) = w0 v[s] + w1 v[s+1] + w2 M[s] + w3 M[s+1]`.
    pub(crate) fn locate(&self, t: f64) -> (usize, [f64; 4]) {
        let k = self.knots.len();
        let first = self.knots[0];
        let last = self.knots[k - 1];
        if t < first {
            let h = self.knots[1] - first;
            let s = (t - first) / h;
            return (0, [1.0 - s, s, 0.0, -s * h * h / 6.0]);
        }
        if t > last {
            let h = last - self.knots[k - 2];
            let s = (t - last) / h;
            return (k - 2, [-s, 1.0 + s, s * h * h / 6.0, 0.0]);
        }
        let seg = self
            .knots
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(k - 2);
        let h = self.knots[seg + 1] - self.knots[seg];
        let a = (self.knots[seg + 1] - t) / h;
        let b = 1.0 - a;
        let c = h * h / 6.0;
        (seg, [a, b, (a * a * a - a) * c, (b * b * b - b) * c])
    }

    pub fn eval(&self, values: &[f64], second: &[f64], t: f64) -> f64 {
        let (s, w) = self.locate(t);
        w[0] * values[s] + w[1] * values[s + 1] + w[2] * second[s] + w[3] * second[s + 1]
    }

    /// `P` with `integral f''^2 = values' P values` over the knot range.
    pub fn penalty_matrix(&self) -> DMatrix<f64> {
        let k = self.knots.len();
        let mut g = DMatrix::zeros(k, k);
        for i in 0..k - 1 {
            let h = self.knots[i + 1] - self.knots[i];
            g[(i, i)] += h / 3.0;
            g[(i + 1, i + 1)] += h / 3.0;
            g[(i, i + 1)] += h / 6.0;
            g[(i + 1, i)] += h / 6.0;
        }
        self.second.transpose() * g * &self.second
    }

    /// Columns map segment-local weights back to knot-value coordinates.
    fn segment_frame(&self, seg: usize) -> DMatrix<f64> {
        let k = self.knots.len();
        let mut t = DMatrix::zeros(k, 4);
        t[(seg, 0)] = 1.0;
        t[(seg + 1, 1)] = 1.0;
        for row in 0..k {
            t[(row, 2)] = self.second[(seg, row)];
            t[(row, 3)] = self.second[(seg + 1, row)];
        }
        t
    }
}

/// Objective in the eigenbasis of the penalty, `values = basis * theta`, where
/// the roughness is `sum eigen[j] * theta[j]^2`. Large penalties then no longer
/// cancel inside `P * values`, which keeps the gradient accurate at any lambda.
struct PenalizedLogistic<'a> {
    problem: &'a SplineProblem,
    points: Vec<(usize, [f64; 4])>,
    targets: Vec<f64>,
    lambda: f64,
}

impl PenalizedLogistic<'_> {
    fn predictor(&self, values: &[f64], second: &[f64], i: usize) -> f64 {
        let (s, w) = self.points[i];
        w[0] * values[s] + w[1] * values[s + 1] + w[2] * second[s] + w[3] * second[s + 1]
    }

    fn roughness(&self, theta: &DVector<f64>) -> f64 {
        theta
            .iter()
            .zip(&self.problem.eigen)
            .map(|(t, d)| d * t * t)
            .sum()
    }
}

impl Concave for PenalizedLogistic<'_> {
    fn value(&self, theta: &DVector<f64>) -> f64 {
        let gamma = &self.problem.basis * theta;
        let values = gamma.as_slice();
        let second = self.problem.spline.second_derivatives(values);
        let n = self.targets.len();
        let ll: f64 = (0..n)
            .map(|i| {
                let f = self.predictor(values, &second, i);
                self.targets[i] * f - log1p_exp(f)
            })
            .sum();
        ll / n as f64 - self.lambda * self.roughness(theta)
    }

    fn derivatives(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let gamma = &self.problem.basis * theta;
        let values = gamma.as_slice();
        let second = self.problem.spline.second_derivatives(values);
        let segments = self.problem.frames.len();
        let mut local_h = vec![[[0.0f64; 4]; 4]; segments];
        let mut local_g = vec![[0.0f64; 4]; segments];
        for (i, &(s, w)) in self.points.iter().enumerate() {
            let p = sigmoid(self.predictor(values, &second, i));
            let resid = self.targets[i] - p;
            let weight = p * (1.0 - p);
            for a in 0..4 {
                local_g[s][a] += resid * w[a];
                for b in 0..4 {
                    local_h[s][a][b] += weight * w[a] * w[b];
                }
            }
        }

        let k = self.problem.spline.len();
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for s in 0..segments {
            if local_h[s].iter().all(|row| row.iter().all(|&v| v == 0.0)) {
                continue;
            }
            let frame = &self.problem.frames[s];
            let lg = DVector::from_column_slice(&local_g[s]);
            let lh = DMatrix::from_fn(4, 4, |a, b| local_h[s][a][b]);
            g += frame * lg;
            h += frame * lh * frame.transpose();
        }
        let scale = 1.0 / self.targets.len() as f64;
        let basis = &self.problem.basis;
        let mut g = basis.transpose() * g * scale;
        let mut h = basis.transpose() * h * basis * scale;
        for (j, &d) in self.problem.eigen.iter().enumerate() {
            g[j] -= 2.0 * self.lambda * d * theta[j];
            h[(j, j)] += 2.0 * self.lambda * d;
        }
        (g, h)
    }
}

/// Knot values and fitted spline are shared between the CV folds and the
/// final fit.
struct SplineProblem {
    spline: NaturalSpline,
    frames: Vec<DMatrix<f64>>,
    /// Orthonormal eigenvectors of the penalty matrix (columns).
    basis: DMatrix<f64>,
    /// Matching eigenvalues, negatives from rounding clipped to zero.
    eigen: Vec<f64>,
}

impl SplineProblem {
    fn new(knots: Vec<f64>) -> Self {
        let spline = NaturalSpline::new(knots);
        let frames = (0..spline.len() - 1).map(|s| spline.segment_frame(s)).collect();
        let decomposition = spline.penalty_matrix().symmetric_eigen();
        let eigen = decomposition.eigenvalues.iter().map(|d| d.max(0.0)).collect();
        Self {
            spline,
            frames,
            basis: decomposition.eigenvectors,
            eigen,
        }
    }

    fn fit(
        &self,
        z: &[f64],
        y: &[f64],
        members: impl Iterator<Item = usize>,
        lambda: f64,
        opts: &FitOptions,
    ) -> Result<Vec<f64>, FitError> {
        let mut points = Vec::new();
        let mut targets = Vec::new();
        for i in members {
            points.push(self.spline.locate(z[i]));
            targets.push(y[i]);
        }
        let rate = targets.iter().sum::<f64>() / targets.len() as f64;
        let rate = rate.clamp(1e-6, 1.0 - 1e-6);
        let start = DVector::from_element(self.spline.len(), libm::log(rate / (1.0 - rate)));
        let objective = PenalizedLogistic {
            problem: self,
            points,
            targets,
            lambda,
        };
        let start = self.basis.transpose() * start;
        let sol = maximize(&objective, start, opts.newton())?;
        Ok((&self.basis * sol.x).iter().copied().collect())
    }
}

fn default_knot_count(distinct: usize) -> usize {
    (distinct / 10).clamp(4, 20)
}

/// Stratified fold labels: each class is shuffled and dealt round-robin.
fn assign_folds(labels: &[f64], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = SeededRng::new(seed);
    let mut fold = vec![0usize; labels.len()];
    for class in [0.0, 1.0] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut members);
        for (pos, &i) in members.iter().enumerate() {
            fold[i] = pos % folds;
        }
    }
    fold
}

fn log_loss(y: f64, p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    if y > 0.5 {
        -libm::log(p)
    } else {
        -libm::log1p(-p)
    }
}

/// Penalised-likelihood spline calibration.
///
/// Maximises `mean log-likelihood - lambda * integral f''^2` with
/// `p = sigma(f(z))` over natural cubic splines whose knots sit at equally
/// spaced quantiles of the distinct clamped scores. `lambda` is chosen from
/// the options grid by stratified K-fold cross-validated log-loss; ties go to
/// the larger `lambda`. A grid of one value skips cross-validation.
pub fn fit_spline(set: &ScoreSet, opts: &FitOptions) -> Result<CalibrationMap, FitError> {
    let (neg, pos) = check_fit_set(set, opts)?;

    let z: Vec<f64> = set.records().iter().map(|r| opts.clamp(r.score)).collect();
    let y: Vec<f64> = set
        .records()
        .iter()
        .map(|r| if r.positive { 1.0 } else { 0.0 })
        .collect();

    let mut distinct = z.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let knot_count = opts
        .spline_knot_count
        .unwrap_or_else(|| default_knot_count(distinct.len()));
    if distinct.len() < knot_count + 2 {
        return Err(FitError::TooFewDistinct {
            found: distinct.len(),
            required: knot_count + 2,
        });
    }
    let last = distinct.len() - 1;
    let span = knot_count - 1;
    let knots: Vec<f64> = (0..knot_count)
        .map(|j| distinct[(j * last + span / 2) / span])
        .collect();
    let problem = SplineProblem::new(knots.clone());

    let grid = &opts.spline_lambda_grid;
    let lambda = if grid.len() == 1 {
        grid[0]
    } else {
        if neg.min(pos) < opts.cv_folds {
            return Err(FitError::Options(
                "each class needs at least cv_folds records for cross-validation",
            ));
        }
        let folds = assign_folds(&y, opts.cv_folds, opts.seed);
        let mut best: Option<(f64, f64)> = None;
        for &lambda in grid {
            let Some(loss) = cv_loss(&problem, &z, &y, &folds, lambda, opts) else {
                continue;
            };
            // Ascending grid: `<=` hands ties to the larger lambda.
            if best.is_none_or(|(_, b)| loss <= b) {
                best = Some((lambda, loss));
            }
        }
        best.ok_or(FitError::AllLambdasFailed)?.0
    };

    let values = problem.fit(&z, &y, 0..z.len(), lambda, opts)?;
    let mut map = CalibrationMap {
        kind: MapKind::Spline {
            knots,
            basis_coefficients: values,
            lambda,
        },
        epsilon: opts.epsilon,
        monotone_verified: false,
    };
    map.monotone_verified = is_monotone(&map, DEFAULT_MONOTONE_GRID);
    Ok(map)
}

/// Mean held-out log-loss, or `None` if any fold fails to converge.
fn cv_loss(
    problem: &SplineProblem,
    z: &[f64],
    y: &[f64],
    folds: &[usize],
    lambda: f64,
    opts: &FitOptions,
) -> Option<f64> {
    let mut total = 0.0;
    for fold in 0..opts.cv_folds {
        let train = (0..z.len()).filter(|&i| folds[i] != fold);
        let values = problem.fit(z, y, train, lambda, opts).ok()?;
        let second = problem.spline.second_derivatives(&values);
        for i in (0..z.len()).filter(|&i| folds[i] == fold) {
            let p = sigmoid(problem.spline.eval(&values, &second, z[i]));
            total += log_loss(y[i], p);
        }
    }
    Some(total / z.len() as f64)
}
