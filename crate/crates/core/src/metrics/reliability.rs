use alloc::vec::Vec;

use super::MetricError;
use crate::data::ScoreSet;

/// What a bin's `observed` value measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum BinMode {
    /// Fraction of positive labels in the bin.
    #[default]
    PositiveFraction,
    /// Fraction of records whose 0.5-threshold prediction matches the label.
    LabelAccuracy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    /// `None` for empty bins.
    pub mean_score: Option<f64>,
    pub observed: Option<f64>,
}

/// Equal-width bins `((z-1)/Z, z/Z]`; a score of exactly 0 goes to the first bin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReliabilityBins {
    mode: BinMode,
    bins: Vec<Bin>,
    total: u64,
}

impl ReliabilityBins {
    pub fn mode(&self) -> BinMode {
        self.mode
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

#[inline]
fn bound(k: usize, z: usize) -> f64 {
    k as f64 / z as f64
}

/// Zero-based bin for `score`, consistent with the `f64` bounds `k / Z`.
pub(crate) fn bin_index(score: f64, z: usize) -> usize {
    if score <= 0.0 {
        return 0;
    }
    let mut k = (libm::ceil(score * z as f64) as usize).clamp(1, z);
    while k > 1 && score <= bound(k - 1, z) {
        k -= 1;
    }
    while k < z && score > bound(k, z) {
        k += 1;
    }
    k - 1
}

pub fn reliability_bins(
    set: &ScoreSet,
    bin_count: usize,
    mode: BinMode,
) -> Result<ReliabilityBins, MetricError> {
    if bin_count < 2 {
        return Err(MetricError::BinCount(bin_count));
    }
    let mut counts = alloc::vec![0u64; bin_count];
    let mut sums = alloc::vec![0.0f64; bin_count];
    let mut hits = alloc::vec![0u64; bin_count];
    for r in set.records() {
        let b = bin_index(r.score, bin_count);
        counts[b] += 1;
        sums[b] += r.score;
        let hit = match mode {
            BinMode::PositiveFraction => r.positive,
            BinMode::LabelAccuracy => (r.score >= 0.5) == r.positive,
        };
        hits[b] += hit as u64;
    }
    let bins = (0..bin_count)
        .map(|b| {
            let (lower, upper) = (bound(b, bin_count), bound(b + 1, bin_count));
            let count = counts[b];
            let (mean_score, observed) = if count == 0 {
                (None, None)
            } else {
                // Rounding in the sum can push the mean an ulp past a bound.
                let mean = (sums[b] / count as f64).clamp(lower, upper);
                (Some(mean), Some(hits[b] as f64 / count as f64))
            };
            Bin {
                lower,
                upper,
                count,
                mean_score,
                observed,
            }
        })
        .collect();
    Ok(ReliabilityBins {
        mode,
        bins,
        total: set.len() as u64,
    })
}

fn gaps(bins: &ReliabilityBins) -> impl Iterator<Item = (u64, f64)> + '_ {
    bins.bins.iter().filter_map(|b| match (b.mean_score, b.observed) {
        (Some(m), Some(o)) => Some((b.count, libm::fabs(o - m))),
        _ => None,
    })
}

/// Expected calibration error: count-weighted mean of `|observed - mean|`.
pub fn ece(bins: &ReliabilityBins) -> Result<f64, MetricError> {
    if bins.total == 0 {
        return Err(MetricError::EmptySet);
    }
    let m = bins.total as f64;
    Ok(gaps(bins).map(|(c, g)| c as f64 / m * g).sum())
}

/// Maximum calibration error over non-empty bins.
pub fn mce(bins: &ReliabilityBins) -> Result<f64, MetricError> {
    gaps(bins)
        .map(|(_, g)| g)
        .reduce(f64::max)
        .ok_or(MetricError::EmptySet)
}
