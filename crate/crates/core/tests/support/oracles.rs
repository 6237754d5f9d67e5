//! Brute-force reference implementations used by the metric tests.
//!
//! Everything here recounts from the raw samples at every candidate threshold,
//! O(n^2), with no shared code paths with the library's single-sweep versions.

#![allow(dead_code)]

use calibkit_core::metrics::ConfusionMatrix;
use calibkit_core::rng::SeededRng;
use calibkit_core::ScoreSet;

/// Random set with `2..=max_n` records and both classes present. Scores come
/// from a coarse grid half of the time so ties are common.
pub fn random_set(rng: &mut SeededRng, max_n: u64) -> ScoreSet {
    loop {
        let n = 2 + rng.below(max_n - 1) as usize;
        let coarse = rng.bernoulli(0.5);
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let s = if coarse {
                rng.below(21) as f64 / 20.0
            } else {
                rng.next_f64()
            };
            scores.push(s);
            labels.push(rng.bernoulli(0.1 + 0.8 * s));
        }
        if labels.iter().any(|l| *l) && labels.iter().any(|l| !*l) {
            return ScoreSet::from_scores("oracle", &scores, &labels).unwrap();
        }
    }
}

fn distinct_desc(set: &ScoreSet) -> Vec<f64> {
    let mut t = set.scores();
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    t
}

fn counts_at(set: &ScoreSet, t: f64) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for r in set.records() {
        match (r.score >= t, r.positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    (tp, fp, fn_, tn)
}

/// Average precision, accumulated over thresholds from high to low.
pub fn auprc(set: &ScoreSet) -> f64 {
    let pos = set.records().iter().filter(|r| r.positive).count() as u64;
    let mut area = 0.0;
    let mut prev_tp = 0;
    for t in distinct_desc(set) {
        let (tp, fp, _, _) = counts_at(set, t);
        let precision = tp as f64 / (tp + fp) as f64;
        area += ((tp - prev_tp) as f64 / pos as f64) * precision;
        prev_tp = tp;
    }
    area
}

/// Mann-Whitney: fraction of positive/negative pairs ordered correctly, ties ½.
pub fn auroc(set: &ScoreSet) -> f64 {
    let pos: Vec<f64> = set.records().iter().filter(|r| r.positive).map(|r| r.score).collect();
    let neg: Vec<f64> = set.records().iter().filter(|r| !r.positive).map(|r| r.score).collect();
    let mut twice = 0u128;
    for p in &pos {
        for n in &neg {
            if p > n {
                twice += 2;
            } else if p == n {
                twice += 1;
            }
        }
    }
    twice as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64
}

/// Exhaustive maximisation of `score(tp, fp, fn, tn)` (an exact fraction as
/// numerator/denominator) over every observed threshold; ties go to the lowest
/// threshold. Returns `(threshold, value)`.
fn best_by<F>(set: &ScoreSet, score: F) -> Option<(f64, f64)>
where
    F: Fn(u64, u64, u64, u64) -> Option<(i128, i128)>,
{
    let mut best: Option<(f64, i128, i128)> = None;
    for t in distinct_desc(set).into_iter().rev() {
        let (tp, fp, fn_, tn) = counts_at(set, t);
        let Some((num, den)) = score(tp, fp, fn_, tn) else {
            continue;
        };
        // Ascending thresholds: replace only on strict improvement.
        if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
            best = Some((t, num, den));
        }
    }
    best.map(|(t, n, d)| (t, n as f64 / d as f64))
}

pub fn fmax(set: &ScoreSet) -> Option<(f64, f64)> {
    best_by(set, |tp, fp, fn_, _| {
        (tp > 0).then(|| (2 * tp as i128, (2 * tp + fp + fn_) as i128))
    })
}

pub fn youden(set: &ScoreSet) -> Option<(f64, f64)> {
    best_by(set, |tp, fp, fn_, tn| {
        let (p, n) = ((tp + fn_) as i128, (fp + tn) as i128);
        Some((tp as i128 * n - fp as i128 * p, p * n))
    })
}

/// Returns the squared G-mean; callers take the square root.
pub fn gmeans_squared(set: &ScoreSet) -> Option<(f64, f64)> {
    best_by(set, |tp, fp, fn_, tn| {
        let (p, n) = ((tp + fn_) as i128, (fp + tn) as i128);
        Some((tp as i128 * tn as i128, p * n))
    })
}

/// Expands a confusion matrix into per-sample (predicted, actual) pairs and
/// recounts accuracy, precision, recall, F and MCC by their textbook formulas.
pub struct Recount {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fscore: Option<f64>,
    pub mcc: Option<f64>,
}

pub fn recount(cm: &ConfusionMatrix) -> Recount {
    let mut samples = Vec::new();
    samples.extend(std::iter::repeat_n((true, true), cm.tp as usize));
    samples.extend(std::iter::repeat_n((true, false), cm.fp as usize));
    samples.extend(std::iter::repeat_n((false, true), cm.fn_ as usize));
    samples.extend(std::iter::repeat_n((false, false), cm.tn as usize));
    let count = |pred: bool, actual: bool| {
        samples.iter().filter(|s| **s == (pred, actual)).count() as f64
    };
    let (tp, fp, fn_, tn) = (count(true, true), count(true, false), count(false, true), count(false, false));
    let accuracy = (tp + tn) / samples.len() as f64;
    let precision = (tp + fp > 0.0).then(|| tp / (tp + fp));
    let recall = (tp + fn_ > 0.0).then(|| tp / (tp + fn_));
    let fscore = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = (!factors.contains(&0.0))
        .then(|| (tp * tn - fp * fn_) / factors.iter().product::<f64>().sqrt());
    Recount {
        accuracy,
        precision,
        recall,
        fscore,
        mcc,
    }
}

pub fn random_matrix(rng: &mut SeededRng) -> ConfusionMatrix {
    loop {
        // Zero cells are common so NA paths get exercised.
        let mut cell = || if rng.bernoulli(0.2) { 0 } else { rng.below(200) };
        let cm = ConfusionMatrix::new(cell(), cell(), cell(), cell());
        if cm.total() > 0 {
            return cm;
        }
    }
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}
