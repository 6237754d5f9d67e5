//! Experiment configuration.
//!
//! Key-value form, one `key = value` per line, `#` starts a comment, lists
//! are comma separated:
//!
//! ```text
//! sources = synth:shifted, scores/model_a.csv
//! synth.shifted.n = 4000
//! synth.shifted.distortion = affine_logit(2, 1)
//! percents = 20, 40, 60, 80, 100
//! calibrators = platt, beta, spline, none
//! policies = default_half, pr_fmax, youden, gmeans
//! bins = 10
//! ci_level = 0.95
//! ci_method = wilson
//! seed = 42
//! fit_fraction = 0.5
//! output_dir = results
//! ```
//!
//! The JSON form is one object with the same keys; list values may be arrays
//! or comma-separated strings.
//!
//! Sources are either CSV paths or `synth:NAME`. A synthetic source is a
//! class-balanced pool of `synth.NAME.n` records (default 4000) with
//! `synth.NAME.distortion` (`none`, `affine_logit(g, d)` or
//! `cubic_logit(c0, c1, c2, c3)`, default `none`), base probabilities on
//! `[synth.NAME.p_low, synth.NAME.p_high]` (default 0.02 and 0.98) and an
//! optional `synth.NAME.seed` (default derived from the master seed).
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use calibkit_core::calibrate::Method;
use calibkit_core::metrics::Criterion;
use calibkit_core::rng::derive_seed;
use calibkit_core::simlab::{Distortion, SynthSpec};
use calibkit_core::stats::IntervalMethod;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { key: String, line: usize },
    #[error("invalid JSON config: {0}")]
    Json(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

/// A grid calibrator entry: a fitted method or no calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Calibrator {
    Platt,
    Beta,
    Spline,
    None,
}

impl Calibrator {
    pub fn as_str(self) -> &'static str {
        match self {
            Calibrator::Platt => "platt",
            Calibrator::Beta => "beta",
            Calibrator::Spline => "spline",
            Calibrator::None => "none",
        }
    }

    pub fn method(self) -> Option<Method> {
        match self {
            Calibrator::Platt => Some(Method::Platt),
            Calibrator::Beta => Some(Method::Beta),
            Calibrator::Spline => Some(Method::Spline),
            Calibrator::None => None,
        }
    }
}

impl FromStr for Calibrator {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "none" => Ok(Calibrator::None),
            other => other.parse::<Method>().map(|m| match m {
                Method::Platt => Calibrator::Platt,
                Method::Beta => Calibrator::Beta,
                Method::Spline => Calibrator::Spline,
            }),
        }
    }
}

impl Serialize for Calibrator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Csv { label: String, path: PathBuf },
    Synth { label: String, spec: SynthSpec },
}

impl Source {
    /// The name used in cell keys and reports, as written in the config.
    pub fn label(&self) -> &str {
        match self {
            Source::Csv { label, .. } | Source::Synth { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub sources: Vec<Source>,
    pub percents: Vec<u32>,
    pub calibrators: Vec<Calibrator>,
    pub policies: Vec<Criterion>,
    pub bins: usize,
    pub ci_level: f64,
    pub ci_method: IntervalMethod,
    pub seed: u64,
    pub fit_fraction: f64,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

const TOP_LEVEL_KEYS: [&str; 10] = [
    "sources",
    "percents",
    "calibrators",
    "policies",
    "bins",
    "ci_level",
    "ci_method",
    "seed",
    "fit_fraction",
    "output_dir",
];
const SYNTH_KEYS: [&str; 5] = ["n", "distortion", "p_low", "p_high", "seed"];

/// Parses `key = value` lines into a flat map.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                line: i + 1,
            });
        }
    }
    Ok(map)
}

/// Flattens a JSON object into the same map; arrays join with commas.
pub fn parse_json(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| ConfigError::Json("top level must be an object".into()))?;
    let scalar = |key: &str, v: &serde_json::Value| -> Result<String, ConfigError> {
        match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            _ => Err(bad(key, "expected a string, number or array of those")),
        }
    };
    let mut map = BTreeMap::new();
    for (key, v) in object {
        let text = match v {
            serde_json::Value::Array(items) => items
                .iter()
                .map(|item| scalar(key, item))
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            other => scalar(key, other)?,
        };
        map.insert(key.clone(), text);
    }
    Ok(map)
}

fn list(value: &str) -> Vec<&str> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| bad(key, format!("`{value}` is not a valid number")))
}

/// `none`, `affine_logit(g, d)` or `cubic_logit(c0, c1, c2, c3)`.
pub fn parse_distortion(key: &str, value: &str) -> Result<Distortion, ConfigError> {
    let value = value.trim();
    if value == "none" {
        return Ok(Distortion::None);
    }
    let (name, rest) = value
        .split_once('(')
        .ok_or_else(|| bad(key, "expected none, affine_logit(g, d) or cubic_logit(c0, c1, c2, c3)"))?;
    let args = rest
        .strip_suffix(')')
        .ok_or_else(|| bad(key, "missing closing parenthesis"))?;
    let args: Vec<f64> = list(args)
        .into_iter()
        .map(|a| number(key, a))
        .collect::<Result<_, _>>()?;
    let distortion = match (name.trim(), args.as_slice()) {
        ("affine_logit", &[g, d]) => Distortion::AffineLogit { g, d },
        ("cubic_logit", &[c0, c1, c2, c3]) => Distortion::CubicLogit {
            coefficients: [c0, c1, c2, c3],
        },
        _ => return Err(bad(key, format!("unrecognised distortion `{value}`"))),
    };
    distortion.validate().map_err(|e| bad(key, e.to_string()))?;
    Ok(distortion)
}

impl ExperimentConfig {
    /// Reads a config file; JSON when the first non-blank character is `{`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let map = if text.trim_start().starts_with('{') {
            parse_json(text)?
        } else {
            parse_key_values(text)?
        };
        Self::from_map(&map, base_dir)
    }

    pub fn from_map(map: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self, ConfigError> {
        let seed: u64 = match map.get("seed") {
            Some(v) => number("seed", v)?,
            None => 0,
        };

        let mut synth_names = Vec::new();
        for key in map.keys() {
            if let Some(rest) = key.strip_prefix("synth.") {
                let (name, field) = rest
                    .rsplit_once('.')
                    .ok_or_else(|| ConfigError::UnknownKey(key.clone()))?;
                if name.is_empty() || !SYNTH_KEYS.contains(&field) {
                    return Err(ConfigError::UnknownKey(key.clone()));
                }
                synth_names.push(name.to_string());
            } else if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }

        let source_list = list(map.get("sources").ok_or(ConfigError::Missing("sources"))?);
        if source_list.is_empty() {
            return Err(bad("sources", "at least one source is required"));
        }
        let mut sources = Vec::new();
        for entry in &source_list {
            if sources.iter().any(|s: &Source| s.label() == *entry) {
                return Err(bad("sources", format!("duplicate source `{entry}`")));
            }
            let source = match entry.strip_prefix("synth:") {
                Some(name) => Source::Synth {
                    label: entry.to_string(),
                    spec: synth_spec(map, name, seed)?,
                },
                None => Source::Csv {
                    label: entry.to_string(),
                    path: base_dir.join(entry),
                },
            };
            sources.push(source);
        }
        for name in &synth_names {
            if !source_list.contains(&format!("synth:{name}").as_str()) {
                return Err(bad(
                    &format!("synth.{name}"),
                    "settings given for a synthetic source not listed in `sources`",
                ));
            }
        }

        let percents: Vec<u32> = match map.get("percents") {
            Some(v) => list(v)
                .into_iter()
                .map(|p| number("percents", p))
                .collect::<Result<_, _>>()?,
            None => vec![20, 40, 60, 80, 100],
        };
        if percents.is_empty() || percents.iter().any(|p| !(1..=100).contains(p)) {
            return Err(bad("percents", "need one or more integers in 1..=100"));
        }
        let mut sorted = percents.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != percents.len() {
            return Err(bad("percents", "duplicate entries"));
        }

        let calibrators = match map.get("calibrators") {
            Some(v) => parse_list::<Calibrator>("calibrators", v)?,
            None => vec![
                Calibrator::Platt,
                Calibrator::Beta,
                Calibrator::Spline,
                Calibrator::None,
            ],
        };
        let policies = match map.get("policies") {
            Some(v) => parse_list::<Criterion>("policies", v)?,
            None => vec![Criterion::DefaultHalf, Criterion::PrFmax],
        };

        let bins: usize = match map.get("bins") {
            Some(v) => number("bins", v)?,
            None => calibkit_core::metrics::DEFAULT_BINS,
        };
        if bins < 2 {
            return Err(bad("bins", "at least 2 bins are required"));
        }
        let ci_level: f64 = match map.get("ci_level") {
            Some(v) => number("ci_level", v)?,
            None => 0.95,
        };
        if !(ci_level > 0.0 && ci_level < 1.0) {
            return Err(bad("ci_level", "must lie strictly between 0 and 1"));
        }
        let ci_method = match map.get("ci_method") {
            Some(v) => v
                .parse()
                .map_err(|_| bad("ci_method", "expected wilson or wald"))?,
            None => IntervalMethod::Wilson,
        };
        let fit_fraction: f64 = match map.get("fit_fraction") {
            Some(v) => number("fit_fraction", v)?,
            None => 0.5,
        };
        if !(fit_fraction > 0.0 && fit_fraction < 1.0) {
            return Err(bad("fit_fraction", "must lie strictly between 0 and 1"));
        }
        let output_dir = base_dir.join(map.get("output_dir").map_or("calibkit-results", |s| s));

        Ok(Self {
            sources,
            percents,
            calibrators,
            policies,
            bins,
            ci_level,
            ci_method,
            seed,
            fit_fraction,
            output_dir,
        })
    }
}

fn parse_list<T: FromStr + PartialEq>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    let mut out: Vec<T> = Vec::new();
    for item in list(value) {
        let parsed = item
            .parse()
            .map_err(|_| bad(key, format!("unknown entry `{item}`")))?;
        if out.contains(&parsed) {
            return Err(bad(key, format!("duplicate entry `{item}`")));
        }
        out.push(parsed);
    }
    if out.is_empty() {
        return Err(bad(key, "at least one entry is required"));
    }
    Ok(out)
}

fn synth_spec(
    map: &BTreeMap<String, String>,
    name: &str,
    master: u64,
) -> Result<SynthSpec, ConfigError> {
    let get = |field: &str| map.get(&format!("synth.{name}.{field}"));
    let key = |field: &str| format!("synth.{name}.{field}");
    let mut spec = SynthSpec {
        n: 4000,
        seed: derive_seed(master, &format!("synth:{name}")),
        ..SynthSpec::default()
    };
    if let Some(v) = get("n") {
        spec.n = number(&key("n"), v)?;
    }
    if spec.n < 2 || !spec.n.is_multiple_of(2) {
        return Err(bad(&key("n"), "must be an even count of at least 2"));
    }
    if let Some(v) = get("distortion") {
        spec.distortion = parse_distortion(&key("distortion"), v)?;
    }
    if let Some(v) = get("p_low") {
        spec.p_low = number(&key("p_low"), v)?;
    }
    if let Some(v) = get("p_high") {
        spec.p_high = number(&key("p_high"), v)?;
    }
    if !(spec.p_low > 0.0 && spec.p_low < spec.p_high && spec.p_high < 1.0) {
        return Err(bad(&key("p_low"), "need 0 < p_low < p_high < 1"));
    }
    if let Some(v) = get("seed") {
        spec.seed = number(&key("seed"), v)?;
    }
    Ok(spec)
}
