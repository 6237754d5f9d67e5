use alloc::vec::Vec;
use core::cmp::Ordering;

use super::MetricError;
use crate::data::ScoreSet;

/// Cumulative counts at each distinct score, highest score first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SweepPoint {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
}

/// One sort, one pass: each distinct score used as an inclusive threshold.
pub(crate) fn sweep(set: &ScoreSet) -> Vec<SweepPoint> {
    let mut pairs: Vec<(f64, bool)> = set.records().iter().map(|r| (r.score, r.positive)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<SweepPoint> = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (i, &(score, positive)) in pairs.iter().enumerate() {
        if positive {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = pairs
            .get(i + 1)
            .is_none_or(|next| next.0.total_cmp(&score) != Ordering::Equal);
        if last_of_group {
            out.push(SweepPoint {
                threshold: score,
                tp,
                fp,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
}

/// Precision-recall operating points, thresholds descending. The last point
/// (lowest observed score) is the all-positive endpoint with recall 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PrCurve {
    points: Vec<PrPoint>,
    positives: u64,
    auprc: f64,
}

impl PrCurve {
    pub fn points(&self) -> &[PrPoint] {
        &self.points
    }

    pub fn positives(&self) -> u64 {
        self.positives
    }

    /// Average precision: `sum_n (R_n - R_{n-1}) * P_n`.
    pub fn auprc(&self) -> f64 {
        self.auprc
    }
}

pub fn pr_curve(set: &ScoreSet) -> Result<PrCurve, MetricError> {
    let (_, positives) = set.class_counts();
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    let positives = positives as u64;
    let mut points = Vec::new();
    let mut auprc = 0.0;
    let mut prev_tp = 0u64;
    for p in sweep(set) {
        let precision = p.tp as f64 / (p.tp + p.fp) as f64;
        let recall = p.tp as f64 / positives as f64;
        auprc += ((p.tp - prev_tp) as f64 / positives as f64) * precision;
        prev_tp = p.tp;
        points.push(PrPoint {
            threshold: p.threshold,
            precision,
            recall,
            tp: p.tp,
            fp: p.fp,
        });
    }
    Ok(PrCurve {
        points,
        positives,
        auprc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub tp: u64,
    pub fp: u64,
}

/// ROC operating points at each distinct score, thresholds descending. The
/// origin (nothing predicted positive) is implicit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RocCurve {
    points: Vec<RocPoint>,
    positives: u64,
    negatives: u64,
    auroc: f64,
}

impl RocCurve {
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn positives(&self) -> u64 {
        self.positives
    }

    pub fn negatives(&self) -> u64 {
        self.negatives
    }

    pub fn auroc(&self) -> f64 {
        self.auroc
    }
}

/// Trapezoidal AUROC, accumulated in integers and divided once.
pub fn roc_curve(set: &ScoreSet) -> Result<RocCurve, MetricError> {
    let (negatives, positives) = set.class_counts();
    if negatives == 0 || positives == 0 {
        return Err(MetricError::SingleClass);
    }
    let (pos, neg) = (positives as u64, negatives as u64);
    let mut points = Vec::new();
    let mut twice_area: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0u64, 0u64);
    for p in sweep(set) {
        twice_area += (p.fp - prev_fp) as u128 * (p.tp + prev_tp) as u128;
        prev_tp = p.tp;
        prev_fp = p.fp;
        points.push(RocPoint {
            threshold: p.threshold,
            fpr: p.fp as f64 / neg as f64,
            tpr: p.tp as f64 / pos as f64,
            tp: p.tp,
            fp: p.fp,
        });
    }
    let auroc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(RocCurve {
        points,
        positives: pos,
        negatives: neg,
        auroc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64], labels: &[u8]) -> ScoreSet {
        let labels: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        ScoreSet::from_scores("t", scores, &labels).unwrap()
    }

    #[test]
    fn perfect_ranking_has_unit_areas() {
        let s = set(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]);
        assert_eq!(pr_curve(&s).unwrap().auprc(), 1.0);
        assert_eq!(roc_curve(&s).unwrap().auroc(), 1.0);
    }

    #[test]
    fn reversed_ranking_has_zero_auroc() {
        let s = set(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]);
        assert_eq!(roc_curve(&s).unwrap().auroc(), 0.0);
    }

    #[test]
    fn four_point_fixture() {
        // Hand sweep: (R, P) = (1/2, 1), (1/2, 1/2), (1, 2/3), (1, 1/2).
        let s = set(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]);
        let c = pr_curve(&s).unwrap();
        let thresholds: Vec<f64> = c.points().iter().map(|p| p.threshold).collect();
        assert_eq!(thresholds, [0.8, 0.4, 0.35, 0.1]);
        assert!((c.auprc() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(c.points().last().unwrap().recall, 1.0);
    }

    #[test]
    fn tied_scores_form_one_point() {
        let s = set(&[0.5, 0.5, 0.5, 0.2], &[1, 0, 1, 0]);
        let roc = roc_curve(&s).unwrap();
        assert_eq!(roc.points().len(), 2);
        // Mann-Whitney with ties: pairs (p, n): 2 pos at .5 vs n at .5 -> 1/2 each,
        // vs n at .2 -> 1 each. (1 + 2) / 4.
        assert_eq!(roc.auroc(), 0.75);
    }

    #[test]
    fn errors() {
        let neg_only = set(&[0.1, 0.2], &[0, 0]);
        assert_eq!(pr_curve(&neg_only).unwrap_err(), MetricError::NoPositives);
        assert_eq!(roc_curve(&neg_only).unwrap_err(), MetricError::SingleClass);
    }
}
