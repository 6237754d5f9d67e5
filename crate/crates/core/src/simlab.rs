//! Class-imbalance subsets and synthetic scores with known calibration.

use alloc::format;
use alloc::vec::Vec;

use thiserror::Error;

use crate::calibrate::sigmoid;
use crate::data::{ScoreRecord, ScoreSet};
use crate::rng::SeededRng;

/// Resampling rounds allowed when chasing `positive_rate_target`.
pub const MAX_RESAMPLE_ROUNDS: usize = 200;
/// Allowed deviation of the realised positive fraction from the target.
pub const RATE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("percent must lie in 1..=100, got {0}")]
    Percent(u32),
    #[error("pool must contain both classes")]
    SingleClass,
    #[error("imbalanced set would contain no positives ({negatives} negatives at {percent}%)")]
    NoPositives { negatives: usize, percent: u32 },
    #[error("pool has {available} positives but {required} are required")]
    InsufficientPositives { available: usize, required: usize },
    #[error("invalid synthetic spec: {0}")]
    Spec(&'static str),
    #[error("positive rate target {0} unattainable within {MAX_RESAMPLE_ROUNDS} resampling rounds")]
    Unattainable(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImbalanceSpec {
    /// Positives kept, as a percentage of the negative count.
    pub percent: u32,
    pub seed: u64,
}

/// Number of positives a Set-`percent` subset keeps: `floor(percent * negatives / 100)`.
pub fn imbalanced_positive_count(negatives: usize, percent: u32) -> usize {
    (negatives as u128 * percent as u128 / 100) as usize
}

/// Keeps every negative and a seeded uniform sample (without replacement) of
/// `floor(percent / 100 * negatives)` positives. Records are untouched and
/// keep their pool order.
pub fn make_imbalanced(pool: &ScoreSet, spec: ImbalanceSpec) -> Result<ScoreSet, SimError> {
    if !(1..=100).contains(&spec.percent) {
        return Err(SimError::Percent(spec.percent));
    }
    let (negatives, positives) = pool.class_counts();
    if negatives == 0 || positives == 0 {
        return Err(SimError::SingleClass);
    }
    let required = imbalanced_positive_count(negatives, spec.percent);
    if required == 0 {
        return Err(SimError::NoPositives {
            negatives,
            percent: spec.percent,
        });
    }
    if required > positives {
        return Err(SimError::InsufficientPositives {
            available: positives,
            required,
        });
    }

    let mut pos_idx: Vec<usize> = pool
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.positive)
        .map(|(i, _)| i)
        .collect();
    SeededRng::new(spec.seed).shuffle(&mut pos_idx);
    let mut keep = alloc::vec![false; pool.len()];
    for &i in &pos_idx[..required] {
        keep[i] = true;
    }
    let records = pool
        .records()
        .iter()
        .zip(&keep)
        .filter(|(r, &k)| !r.positive || k)
        .map(|(r, _)| r.clone())
        .collect();
    Ok(ScoreSet::from_validated(
        format!("{}/set-{}", pool.name(), spec.percent),
        records,
    ))
}

/// Map from the true probability to the emitted score.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum Distortion {
    None,
    /// `logit(z) = g * logit(p) + d`, `g > 0`.
    AffineLogit { g: f64, d: f64 },
    /// `logit(z) = c0 + c1 x + c2 x^2 + c3 x^3` with `x = logit(p)`; must be
    /// strictly increasing in `x`.
    CubicLogit { coefficients: [f64; 4] },
}

impl Distortion {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            Distortion::None => Ok(()),
            Distortion::AffineLogit { g, d } => {
                if !(g > 0.0) || !g.is_finite() || !d.is_finite() {
                    return Err(SimError::Spec("affine_logit requires finite g > 0 and d"));
                }
                Ok(())
            }
            Distortion::CubicLogit { coefficients: [_, c1, c2, c3] } => {
                // derivative c1 + 2 c2 x + 3 c3 x^2 must stay positive
                let increasing = if c3 == 0.0 {
                    c2 == 0.0 && c1 > 0.0
                } else {
                    c3 > 0.0 && 4.0 * c2 * c2 - 12.0 * c1 * c3 < 0.0
                };
                if increasing {
                    Ok(())
                } else {
                    Err(SimError::Spec("cubic_logit must be strictly increasing"))
                }
            }
        }
    }

    pub fn apply(&self, p: f64) -> f64 {
        let x = || libm::log(p / (1.0 - p));
        match *self {
            Distortion::None => p,
            Distortion::AffineLogit { g, d } => sigmoid(g * x() + d),
            Distortion::CubicLogit {
                coefficients: [c0, c1, c2, c3],
            } => {
                let x = x();
                sigmoid(((c3 * x + c2) * x + c1) * x + c0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthSpec {
    pub n: usize,
    /// True probabilities are drawn from `[p_low, p_high]`.
    pub p_low: f64,
    pub p_high: f64,
    pub distortion: Distortion,
    pub positive_rate_target: Option<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            p_low: 0.02,
            p_high: 0.98,
            distortion: Distortion::None,
            positive_rate_target: None,
            seed: 0,
        }
    }
}

/// Draws the true probability. Without a rate target this is uniform on
/// `[lo, hi]`. With a target `t` the uniform draw `u` is tilted to
/// `lo + (hi - lo) u^k` (or the mirror image for `t` above the midpoint) with
/// `k` chosen so that `E[p] = t`; labels drawn from `p` stay calibrated.
#[derive(Debug, Clone, Copy)]
enum BaseDraw {
    Uniform { lo: f64, hi: f64 },
    TiltLow { lo: f64, hi: f64, k: f64 },
    TiltHigh { lo: f64, hi: f64, k: f64 },
}

impl BaseDraw {
    fn new(spec: &SynthSpec) -> Result<Self, SimError> {
        let (lo, hi) = (spec.p_low, spec.p_high);
        let Some(t) = spec.positive_rate_target else {
            return Ok(BaseDraw::Uniform { lo, hi });
        };
        if !(t > lo && t < hi) {
            return Err(SimError::Unattainable(t));
        }
        let mid = 0.5 * (lo + hi);
        Ok(if t <= mid {
            BaseDraw::TiltLow {
                lo,
                hi,
                k: (hi - lo) / (t - lo) - 1.0,
            }
        } else {
            BaseDraw::TiltHigh {
                lo,
                hi,
                k: (hi - lo) / (hi - t) - 1.0,
            }
        })
    }

    fn draw(self, u: f64) -> f64 {
        match self {
            BaseDraw::Uniform { lo, hi } => lo + (hi - lo) * u,
            BaseDraw::TiltLow { lo, hi, k } => lo + (hi - lo) * libm::pow(u, k),
            BaseDraw::TiltHigh { lo, hi, k } => hi - (hi - lo) * libm::pow(u, k),
        }
    }
}

/// Synthetic scores with hidden ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub scores: ScoreSet,
    /// True positive-class probability of each record, positionally aligned.
    pub truth: Vec<f64>,
}

/// Per record: `p` from the base distribution, label `~ Bernoulli(p)`, score
/// `distortion(p)`. Two uniforms are consumed per record in that order. With a
/// rate target the whole set is redrawn (continuing the stream) until the
/// realised positive fraction is within [`RATE_TOLERANCE`].
pub fn synth_scores(spec: &SynthSpec) -> Result<SynthOutput, SimError> {
    if spec.n == 0 {
        return Err(SimError::Spec("n must be positive"));
    }
    if !(spec.p_low > 0.0 && spec.p_low < spec.p_high && spec.p_high < 1.0) {
        return Err(SimError::Spec("need 0 < p_low < p_high < 1"));
    }
    spec.distortion.validate()?;
    let base = BaseDraw::new(spec)?;
    let mut rng = SeededRng::new(spec.seed);

    for _ in 0..MAX_RESAMPLE_ROUNDS {
        let mut truth = Vec::with_capacity(spec.n);
        let mut records = Vec::with_capacity(spec.n);
        let mut positives = 0usize;
        for i in 0..spec.n {
            let p = base.draw(rng.next_f64());
            let positive = rng.bernoulli(p);
            positives += positive as usize;
            let z = spec.distortion.apply(p).clamp(0.0, 1.0);
            truth.push(p);
            records.push(ScoreRecord::new(format!("s{i}"), z, positive));
        }
        let accepted = match spec.positive_rate_target {
            None => true,
            Some(t) => libm::fabs(positives as f64 / spec.n as f64 - t) <= RATE_TOLERANCE,
        };
        if accepted {
            return Ok(SynthOutput {
                scores: ScoreSet::from_validated("synth".into(), records),
                truth,
            });
        }
    }
    Err(SimError::Unattainable(
        spec.positive_rate_target.unwrap_or(f64::NAN),
    ))
}

/// Class-balanced pool: `spec.n / 2` records of each class, kept in draw
/// order from the same per-record stream as [`synth_scores`]. Records drawn
/// for an already full class are discarded. With the default symmetric base
/// the overall positive rate is 1/2, so balancing leaves the pool calibrated.
/// Ids are `s{draw index}`.
pub fn synth_balanced_pool(spec: &SynthSpec) -> Result<SynthOutput, SimError> {
    if spec.n < 2 || !spec.n.is_multiple_of(2) {
        return Err(SimError::Spec("balanced pool size must be even and at least 2"));
    }
    if spec.positive_rate_target.is_some() {
        return Err(SimError::Spec("balanced pools take no positive rate target"));
    }
    if !(spec.p_low > 0.0 && spec.p_low < spec.p_high && spec.p_high < 1.0) {
        return Err(SimError::Spec("need 0 < p_low < p_high < 1"));
    }
    spec.distortion.validate()?;
    let base = BaseDraw::new(spec)?;
    let mut rng = SeededRng::new(spec.seed);
    let per_class = spec.n / 2;
    let (mut neg, mut pos) = (0usize, 0usize);
    let mut truth = Vec::with_capacity(spec.n);
    let mut records = Vec::with_capacity(spec.n);
    let max_draws = MAX_RESAMPLE_ROUNDS * spec.n;
    for i in 0..max_draws {
        if neg == per_class && pos == per_class {
            break;
        }
        let p = base.draw(rng.next_f64());
        let positive = rng.bernoulli(p);
        let slot = if positive { &mut pos } else { &mut neg };
        if *slot == per_class {
            continue;
        }
        *slot += 1;
        truth.push(p);
        let z = spec.distortion.apply(p).clamp(0.0, 1.0);
        records.push(ScoreRecord::new(format!("s{i}"), z, positive));
    }
    if records.len() < spec.n {
        return Err(SimError::Spec("could not fill both classes"));
    }
    Ok(SynthOutput {
        scores: ScoreSet::from_validated("synth".into(), records),
        truth,
    })
}
