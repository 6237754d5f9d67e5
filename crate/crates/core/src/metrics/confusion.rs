use crate::data::ScoreSet;

/// Counts of a binary decision rule against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Accuracy, precision, recall and F-score. `None` marks an undefined
/// ratio (reported as "NA"), never a silent zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicMetrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fscore: Option<f64>,
}

/// Predicted positive iff `score >= threshold`.
pub fn confusion_at(set: &ScoreSet, threshold: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for r in set.records() {
        match (r.score >= threshold, r.positive) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    cm
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy is `NaN` for an all-zero matrix (outside the precondition).
pub fn basic_metrics(cm: &ConfusionMatrix) -> BasicMetrics {
    let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let fscore = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    BasicMetrics {
        accuracy,
        precision,
        recall,
        fscore,
    }
}

/// Matthews correlation coefficient; `None` when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> Option<f64> {
    let (tp, fp, fn_, tn) = (cm.tp as u128, cm.fp as u128, cm.fn_ as u128, cm.tn as u128);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0) {
        return None;
    }
    let (agree, disagree) = (tp * tn, fp * fn_);
    let numerator = if agree >= disagree {
        (agree - disagree) as f64
    } else {
        -((disagree - agree) as f64)
    };
    let denominator =
        libm::sqrt((factors[0] * factors[1]) as f64) * libm::sqrt((factors[2] * factors[3]) as f64);
    Some((numerator / denominator).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let s = ScoreSet::from_scores("s", &[0.6, 0.4], &[true, false]).unwrap();
        assert_eq!(confusion_at(&s, 0.5), ConfusionMatrix::new(1, 0, 0, 1));
        let all = confusion_at(&s, 0.0);
        assert_eq!((all.fp, all.tn), (1, 0));
        let tie = ScoreSet::from_scores("s", &[0.5], &[false]).unwrap();
        assert_eq!(confusion_at(&tie, 0.5).fp, 1);
    }

    #[test]
    fn basic_metric_examples() {
        let m = basic_metrics(&ConfusionMatrix::new(90, 20, 10, 80));
        assert!((m.accuracy - 0.85).abs() < 1e-15);
        assert!((m.precision.unwrap() - 90.0 / 110.0).abs() < 1e-15);
        assert!((m.recall.unwrap() - 0.9).abs() < 1e-15);
        assert!((m.fscore.unwrap() - 0.857_142_857_142_857).abs() < 1e-12);

        let na = basic_metrics(&ConfusionMatrix::new(0, 0, 50, 50));
        assert_eq!(na.accuracy, 0.5);
        assert_eq!(na.precision, None);
        assert_eq!(na.recall, Some(0.0));
        assert_eq!(na.fscore, None);

        let perfect = basic_metrics(&ConfusionMatrix::new(50, 0, 0, 50));
        assert_eq!(
            (perfect.accuracy, perfect.precision, perfect.recall, perfect.fscore),
            (1.0, Some(1.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&ConfusionMatrix::new(50, 0, 0, 50)), Some(1.0));
        assert_eq!(mcc(&ConfusionMatrix::new(0, 0, 50, 50)), None);
        let expected = 7000.0 / libm::sqrt(110.0 * 100.0 * 100.0 * 90.0);
        assert!((mcc(&ConfusionMatrix::new(90, 20, 10, 80)).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.7035).abs() < 5e-5);
    }

    #[test]
    fn mcc_survives_huge_counts() {
        let big = 1u64 << 40;
        let v = mcc(&ConfusionMatrix::new(big, 1, 1, big)).unwrap();
        assert!(v > 0.999_999 && v <= 1.0);
    }
}
