use core::fmt;
use core::str::FromStr;

use super::{MetricError, PrCurve, RocCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Criterion {
    DefaultHalf,
    PrFmax,
    Youden,
    Gmeans,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::DefaultHalf,
        Criterion::PrFmax,
        Criterion::Youden,
        Criterion::Gmeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::DefaultHalf => "default_half",
            Criterion::PrFmax => "pr_fmax",
            Criterion::Youden => "youden",
            Criterion::Gmeans => "gmeans",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub criterion: Criterion,
    pub criterion_value: f64,
}

impl ThresholdChoice {
    pub fn default_half() -> Self {
        Self {
            threshold: 0.5,
            criterion: Criterion::DefaultHalf,
            criterion_value: 0.5,
        }
    }
}

// Criteria are compared as exact rationals so that mathematically tied
// operating points tie in code as well. Points arrive highest threshold
// first; `>=` therefore hands ties to the lower threshold.
fn select<I>(points: I) -> Option<(f64, u128, u128)>
where
    I: Iterator<Item = (f64, u128, u128)>,
{
    let mut best: Option<(f64, u128, u128)> = None;
    for (threshold, num, den) in points {
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd >= bn * den,
        };
        if better {
            best = Some((threshold, num, den));
        }
    }
    best
}

/// Threshold with maximal F-score, `F = 2TP / (2TP + FP + FN)`; points with
/// no true positives have undefined F and are skipped.
pub fn optimal_threshold_pr(curve: &PrCurve) -> Result<ThresholdChoice, MetricError> {
    let positives = curve.positives() as u128;
    let candidates = curve.points().iter().filter(|p| p.tp > 0).map(|p| {
        let tp = p.tp as u128;
        let fn_ = positives - tp;
        (p.threshold, 2 * tp, 2 * tp + p.fp as u128 + fn_)
    });
    let (threshold, num, den) = select(candidates).ok_or(MetricError::NoDefinedF)?;
    Ok(ThresholdChoice {
        threshold,
        criterion: Criterion::PrFmax,
        criterion_value: num as f64 / den as f64,
    })
}

/// Maximises Youden's `J = TPR - FPR`.
pub fn youden_threshold(curve: &RocCurve) -> Result<ThresholdChoice, MetricError> {
    let (pos, neg) = (curve.positives() as i128, curve.negatives() as i128);
    let mut best: Option<(f64, i128)> = None;
    for p in curve.points() {
        // J * P * N
        let scaled = p.tp as i128 * neg - p.fp as i128 * pos;
        if best.is_none_or(|(_, b)| scaled >= b) {
            best = Some((p.threshold, scaled));
        }
    }
    let (threshold, scaled) = best.ok_or(MetricError::EmptyCurve)?;
    Ok(ThresholdChoice {
        threshold,
        criterion: Criterion::Youden,
        criterion_value: scaled as f64 / (pos * neg) as f64,
    })
}

/// Maximises `sqrt(TPR * (1 - FPR))`.
pub fn gmeans_threshold(curve: &RocCurve) -> Result<ThresholdChoice, MetricError> {
    let (pos, neg) = (curve.positives() as u128, curve.negatives() as u128);
    let candidates = curve
        .points()
        .iter()
        .map(|p| (p.threshold, p.tp as u128 * (neg - p.fp as u128), pos * neg));
    let (threshold, num, den) = select(candidates).ok_or(MetricError::EmptyCurve)?;
    Ok(ThresholdChoice {
        threshold,
        criterion: Criterion::Gmeans,
        criterion_value: libm::sqrt(num as f64 / den as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ScoreSet;
    use crate::metrics::{pr_curve, roc_curve};
    use alloc::vec::Vec;

    fn set(scores: &[f64], labels: &[u8]) -> ScoreSet {
        let labels: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        ScoreSet::from_scores("t", scores, &labels).unwrap()
    }

    #[test]
    fn fmax_on_four_point_fixture() {
        let s = set(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]);
        let c = optimal_threshold_pr(&pr_curve(&s).unwrap()).unwrap();
        assert_eq!(c.threshold, 0.35);
        assert!((c.criterion_value - 0.8).abs() < 1e-15);
        assert_eq!(c.criterion, Criterion::PrFmax);
    }

    #[test]
    fn perfect_ranking_choices() {
        let s = set(&[0.9, 0.7, 0.3, 0.1], &[1, 1, 0, 0]);
        let f = optimal_threshold_pr(&pr_curve(&s).unwrap()).unwrap();
        assert_eq!((f.threshold, f.criterion_value), (0.7, 1.0));
        let roc = roc_curve(&s).unwrap();
        let j = youden_threshold(&roc).unwrap();
        assert_eq!((j.threshold, j.criterion_value), (0.7, 1.0));
        let g = gmeans_threshold(&roc).unwrap();
        assert_eq!((g.threshold, g.criterion_value), (0.7, 1.0));
    }

    #[test]
    fn fmax_ties_go_low() {
        // At 0.9: tp=1 fp=0 fn=1 -> F = 2/3. At 0.2: tp=2 fp=2 fn=0 -> F = 4/6.
        let s = set(&[0.9, 0.5, 0.3, 0.2], &[1, 0, 0, 1]);
        let c = optimal_threshold_pr(&pr_curve(&s).unwrap()).unwrap();
        assert_eq!(c.threshold, 0.2);
    }

    #[test]
    fn random_equivalent_roc_returns_lowest() {
        // Every threshold holds one positive and one negative.
        let s = set(&[0.9, 0.9, 0.5, 0.5, 0.1, 0.1], &[1, 0, 1, 0, 1, 0]);
        let roc = roc_curve(&s).unwrap();
        let j = youden_threshold(&roc).unwrap();
        assert_eq!((j.threshold, j.criterion_value), (0.1, 0.0));
    }

    #[test]
    fn gmeans_all_positive_point_is_zero() {
        let s = set(&[0.2, 0.8], &[1, 0]);
        let roc = roc_curve(&s).unwrap();
        let last = roc.points().last().unwrap();
        assert_eq!((last.tpr, last.fpr), (1.0, 1.0));
        // Reversed pair: the best is still 0 at both points -> lowest threshold.
        let g = gmeans_threshold(&roc).unwrap();
        assert_eq!((g.threshold, g.criterion_value), (0.2, 0.0));
    }

    #[test]
    fn criterion_names_round_trip() {
        for c in Criterion::ALL {
            assert_eq!(c.as_str().parse::<Criterion>(), Ok(c));
        }
        assert!("best".parse::<Criterion>().is_err());
    }
}
