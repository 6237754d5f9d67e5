//! Binomial-proportion confidence intervals and the interval-overlap
//! significance rule.
//!
//! Point values such as MCC or ECE are treated as proportions over `n` test
//! samples. That is statistically loose for anything but a true proportion,
//! but it is the convention the toolkit reports, labelled with its method.

use core::fmt;
use core::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("proportion {0} outside [0, 1]")]
    Proportion(f64),
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("confidence level {0} outside (0, 1)")]
    Level(f64),
    #[error("intervals have different confidence levels ({0} vs {1})")]
    LevelMismatch(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum IntervalMethod {
    #[default]
    Wilson,
    Wald,
}

impl IntervalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalMethod::Wilson => "wilson",
            IntervalMethod::Wald => "wald",
        }
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalMethod {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wilson" => Ok(IntervalMethod::Wilson),
            "wald" => Ok(IntervalMethod::Wald),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntervalEstimate {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: u64,
    pub level: f64,
    pub method: IntervalMethod,
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation (relative error below `1.15e-9`) followed
/// by one Halley step against `erfc`, which brings the result to within a few
/// ulps for `p` in `(1e-300, 1 - 1e-16)`.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }

    let x = if p < LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let e = 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Two-sided critical value for a confidence `level`.
pub fn critical_value(level: f64) -> f64 {
    normal_quantile(1.0 - (1.0 - level) / 2.0)
}

pub fn proportion_interval(
    p: f64,
    n: u64,
    level: f64,
    method: IntervalMethod,
) -> Result<IntervalEstimate, StatsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::Proportion(p));
    }
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Level(level));
    }
    let z = critical_value(level);
    let nf = n as f64;
    let (lower, upper) = match method {
        IntervalMethod::Wald => {
            let half = z * libm::sqrt(p * (1.0 - p) / nf);
            (p - half, p + half)
        }
        IntervalMethod::Wilson => {
            let z2 = z * z;
            let denom = 1.0 + z2 / nf;
            let center = (p + z2 / (2.0 * nf)) / denom;
            let half = z * libm::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)) / denom;
            // Guard against rounding pushing the bound past the point.
            ((center - half).min(p), (center + half).max(p))
        }
    };
    Ok(IntervalEstimate {
        point: p,
        lower: lower.clamp(0.0, 1.0),
        upper: upper.clamp(0.0, 1.0),
        n,
        level,
        method,
    })
}

/// `true` iff the closed intervals are disjoint.
pub fn significant_difference(
    a: &IntervalEstimate,
    b: &IntervalEstimate,
) -> Result<bool, StatsError> {
    if a.level != b.level {
        return Err(StatsError::LevelMismatch(a.level, b.level));
    }
    Ok(a.upper < b.lower || b.upper < a.lower)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(lower: f64, upper: f64) -> IntervalEstimate {
        IntervalEstimate {
            point: (lower + upper) / 2.0,
            lower,
            upper,
            n: 100,
            level: 0.95,
            method: IntervalMethod::Wilson,
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert!((critical_value(0.95) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.5)).abs() < 1e-15);
        assert!((normal_quantile(0.995) - 2.575_829_303_548_901).abs() < 1e-12);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
        assert!((normal_quantile(0.01) + 2.326_347_874_040_841).abs() < 1e-12);
    }

    #[test]
    fn wald_matches_reported_intervals() {
        let a = proportion_interval(0.6321, 600, 0.95, IntervalMethod::Wald).unwrap();
        assert!((a.lower - 0.5935).abs() < 5e-4 && (a.upper - 0.6707).abs() < 5e-4);
        let b = proportion_interval(0.0327, 600, 0.95, IntervalMethod::Wald).unwrap();
        assert!((b.lower - 0.0184).abs() < 5e-4 && (b.upper - 0.0470).abs() < 5e-4);
    }

    #[test]
    fn wilson_at_zero() {
        let i = proportion_interval(0.0, 100, 0.95, IntervalMethod::Wilson).unwrap();
        let z2 = critical_value(0.95).powi(2);
        assert_eq!(i.lower, 0.0);
        assert!((i.upper - z2 / (100.0 + z2)).abs() < 1e-12);
        assert!((i.upper - 0.0370).abs() < 1e-4);
    }

    #[test]
    fn wilson_symmetric_at_half() {
        let i = proportion_interval(0.5, 37, 0.9, IntervalMethod::Wilson).unwrap();
        assert!(((0.5 - i.lower) - (i.upper - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(
            proportion_interval(1.5, 10, 0.95, IntervalMethod::Wald),
            Err(StatsError::Proportion(1.5))
        );
        assert!(proportion_interval(0.5, 0, 0.95, IntervalMethod::Wald).is_err());
        assert!(proportion_interval(0.5, 10, 1.0, IntervalMethod::Wald).is_err());
    }

    #[test]
    fn overlap_rule() {
        let sig = |a: (f64, f64), b: (f64, f64)| {
            significant_difference(&interval(a.0, a.1), &interval(b.0, b.1)).unwrap()
        };
        assert!(sig((0.10, 0.20), (0.25, 0.35)));
        assert!(!sig((0.10, 0.30), (0.25, 0.45)));
        assert!(!sig((0.1, 0.2), (0.2, 0.3)));
        let mut other = interval(0.5, 0.6);
        other.level = 0.9;
        assert!(significant_difference(&interval(0.1, 0.2), &other).is_err());
    }
}
