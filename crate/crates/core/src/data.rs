//! Scored predictions, CSV ingestion and stratified splitting.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use crate::rng::SeededRng;

/// Header line of the score CSV format.
pub const CSV_HEADER: &str = "id,score,label";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error("missing or incorrect header at line 1 (expected `{CSV_HEADER}`)")]
    Header,
    #[error("expected 3 fields at line {line}, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("empty id at line {line}")]
    EmptyId { line: usize },
    #[error("non-numeric score at line {line}")]
    NonNumericScore { line: usize },
    #[error("score out of range at line {line}")]
    ScoreOutOfRange { line: usize },
    #[error("label not in {{0,1}} at line {line}")]
    InvalidLabel { line: usize },
    #[error("duplicate id `{id}` at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("empty dataset")]
    Empty,
    #[error("score out of range for record `{id}`")]
    RecordScore { id: String },
    #[error("duplicate id `{id}`")]
    RecordDuplicate { id: String },
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("fit_fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
    #[error("class {label} has {count} record(s); at least 2 are required")]
    ClassTooSmall { label: u8, count: usize },
    #[error("fit_fraction {fraction} would leave class {label} empty in the {part} part")]
    EmptyPart {
        fraction: f64,
        label: u8,
        part: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreRecord {
    pub id: String,
    /// Positive-class probability in `[0, 1]`.
    pub score: f64,
    pub positive: bool,
}

impl ScoreRecord {
    pub fn new(id: impl Into<String>, score: f64, positive: bool) -> Self {
        Self {
            id: id.into(),
            score,
            positive,
        }
    }

    pub fn label(&self) -> u8 {
        self.positive as u8
    }
}

/// Ordered collection of scored records with unique ids.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ScoreSet {
    name: String,
    records: Vec<ScoreRecord>,
}

impl ScoreSet {
    /// Validates score ranges and id uniqueness. Empty sets are allowed here;
    /// fitting and metric operations reject them.
    pub fn new(name: impl Into<String>, records: Vec<ScoreRecord>) -> Result<Self, DataError> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if !(0.0..=1.0).contains(&r.score) {
                return Err(DataError::RecordScore { id: r.id.clone() });
            }
            if !ids.insert(r.id.as_str()) {
                return Err(DataError::RecordDuplicate { id: r.id.clone() });
            }
        }
        Ok(Self {
            name: name.into(),
            records,
        })
    }

    /// Builds a set from parallel score/label slices with ids `0, 1, ...`.
    pub fn from_scores(
        name: impl Into<String>,
        scores: &[f64],
        labels: &[bool],
    ) -> Result<Self, DataError> {
        if scores.len() != labels.len() {
            return Err(DataError::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        let records = scores
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&s, &l))| ScoreRecord::new(i.to_string(), s, l))
            .collect();
        Self::new(name, records)
    }

    // Internal constructor for subsets of an already validated set.
    pub(crate) fn from_validated(name: String, records: Vec<ScoreRecord>) -> Self {
        Self { name, records }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ScoreRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.positive).collect()
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.records.iter().filter(|r| r.positive).count();
        (self.records.len() - pos, pos)
    }

    /// Same ids and labels with scores replaced positionally.
    ///
    /// Panics if `scores` has a different length or contains a value outside
    /// `[0, 1]`.
    pub fn with_scores(&self, scores: &[f64]) -> ScoreSet {
        assert_eq!(scores.len(), self.records.len(), "score count mismatch");
        let records = self
            .records
            .iter()
            .zip(scores)
            .map(|(r, &s)| {
                assert!((0.0..=1.0).contains(&s), "score {s} outside [0, 1]");
                ScoreRecord::new(r.id.clone(), s, r.positive)
            })
            .collect();
        ScoreSet::from_validated(self.name.clone(), records)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Serialises to the CSV format accepted by [`parse_scores_csv`]. Scores are
    /// written in shortest round-trip form, so parse-then-write-then-parse is
    /// the identity.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 + self.records.len() * 24);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.id, r.score, r.label());
        }
        out
    }
}

/// Parses the `id,score,label` CSV format. LF and CRLF line endings are
/// accepted; blank lines are skipped. Line numbers in errors are 1-based and
/// count the header.
pub fn parse_scores_csv(name: &str, source: &[u8]) -> Result<ScoreSet, DataError> {
    let text = core::str::from_utf8(source).map_err(|_| DataError::Encoding)?;
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));

    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(DataError::Header),
    }

    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(DataError::FieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(DataError::EmptyId { line: line_no });
        }
        let score: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| DataError::NonNumericScore { line: line_no })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(DataError::ScoreOutOfRange { line: line_no });
        }
        let positive = match fields[2].trim() {
            "0" => false,
            "1" => true,
            _ => return Err(DataError::InvalidLabel { line: line_no }),
        };
        if !ids.insert(id) {
            return Err(DataError::DuplicateId {
                id: id.to_string(),
                line: line_no,
            });
        }
        records.push(ScoreRecord::new(id, score, positive));
    }

    if records.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(ScoreSet::from_validated(name.to_string(), records))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub fit_fraction: f64,
    pub seed: u64,
}

/// Per-class proportional split into `(fit, eval)`.
///
/// Each class is shuffled independently with [`SeededRng`] (negatives drawn
/// from the stream first, then positives) and the first
/// `round(fit_fraction * class_count)` shuffled records go to the fit part.
/// Both parts keep the input order of their records.
pub fn stratified_split(
    set: &ScoreSet,
    spec: SplitSpec,
) -> Result<(ScoreSet, ScoreSet), SplitError> {
    if !(spec.fit_fraction > 0.0 && spec.fit_fraction < 1.0) {
        return Err(SplitError::Fraction(spec.fit_fraction));
    }
    let mut rng = SeededRng::new(spec.seed);
    let mut in_fit = alloc::vec![false; set.len()];

    for positive in [false, true] {
        let mut members: Vec<usize> = set
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.positive == positive)
            .map(|(i, _)| i)
            .collect();
        let label = positive as u8;
        if members.len() < 2 {
            return Err(SplitError::ClassTooSmall {
                label,
                count: members.len(),
            });
        }
        let take = libm::round(spec.fit_fraction * members.len() as f64) as usize;
        if take == 0 || take == members.len() {
            return Err(SplitError::EmptyPart {
                fraction: spec.fit_fraction,
                label,
                part: if take == 0 { "fit" } else { "eval" },
            });
        }
        rng.shuffle(&mut members);
        for &i in &members[..take] {
            in_fit[i] = true;
        }
    }

    let mut fit = Vec::new();
    let mut eval = Vec::new();
    for (r, &f) in set.records.iter().zip(&in_fit) {
        if f {
            fit.push(r.clone());
        } else {
            eval.push(r.clone());
        }
    }
    Ok((
        ScoreSet::from_validated(format!("{}/fit", set.name), fit),
        ScoreSet::from_validated(format!("{}/eval", set.name), eval),
    ))
}
