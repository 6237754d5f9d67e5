//! File formats: score CSV, truth sidecar CSV and calibration-map JSON.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use calibkit_core::calibrate::CalibrationMap;
use calibkit_core::{parse_scores_csv, DataError, ScoreSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TOOLKIT_VERSION;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Data { path: PathBuf, source: DataError },
    #[error("{path}: invalid calibration map: {message}")]
    Map { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Set name used for a file: its stem, or the full path when there is none.
pub fn set_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn read_scores_from(name: &str, mut reader: impl Read) -> Result<ScoreSet, IoError> {
    let mut bytes = Vec::new();
    let path = PathBuf::from(name);
    reader.read_to_end(&mut bytes).map_err(io_err(&path))?;
    parse_scores_csv(name, &bytes).map_err(|source| IoError::Data { path, source })
}

pub fn read_scores(path: &Path) -> Result<ScoreSet, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_scores_csv(&set_name(path), &bytes).map_err(|source| IoError::Data {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_scores(path: &Path, set: &ScoreSet) -> Result<(), IoError> {
    write_text(path, &set.to_csv())
}

/// Sidecar for synthetic sets: `id,true_p`, one row per record.
pub fn truth_csv(set: &ScoreSet, truth: &[f64]) -> String {
    let mut out = String::from("id,true_p\n");
    for (r, p) in set.records().iter().zip(truth) {
        out.push_str(&r.id);
        out.push(',');
        out.push_str(&p.to_string());
        out.push('\n');
    }
    out
}

/// On-disk map document: the map's own fields plus the writing toolkit version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    #[serde(flatten)]
    pub map: CalibrationMap,
    pub toolkit_version: String,
}

pub fn map_to_json(map: &CalibrationMap) -> String {
    let doc = MapDocument {
        map: map.clone(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("map serialises");
    text.push('\n');
    text
}

pub fn map_from_json(path: &Path, text: &str) -> Result<CalibrationMap, IoError> {
    let bad = |message: String| IoError::Map {
        path: path.to_path_buf(),
        message,
    };
    let doc: MapDocument = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    doc.map.validate().map_err(|e| bad(e.to_string()))?;
    Ok(doc.map)
}

pub fn read_map(path: &Path) -> Result<CalibrationMap, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    map_from_json(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use calibkit_core::calibrate::{fit_spline, FitOptions};

    #[test]
    fn map_json_round_trips_exactly() {
        let scores: Vec<f64> = (0..400).map(|i| (i as f64 + 0.5) / 400.0).collect();
        let labels: Vec<bool> = (0..400).map(|i| (i * 7919) % 400 < i).collect();
        let set = ScoreSet::from_scores("s", &scores, &labels).unwrap();
        let opts = FitOptions {
            spline_lambda_grid: vec![0.01],
            ..FitOptions::default()
        };
        let maps = [
            CalibrationMap::identity(),
            CalibrationMap::platt(-1.234567890123456, 0.1 + 0.2),
            CalibrationMap::beta(0.5, 1.0 / 3.0, -0.5),
            fit_spline(&set, &opts).unwrap(),
        ];
        for map in maps {
            let text = map_to_json(&map);
            let back = map_from_json(Path::new("m.json"), &text).unwrap();
            assert_eq!(back, map);
            let value: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(value["toolkit_version"], TOOLKIT_VERSION);
            assert!(value["variant"].is_string());
        }
    }

    #[test]
    fn rejects_malformed_maps() {
        let p = Path::new("m.json");
        assert!(map_from_json(p, "{}").is_err());
        let negative_beta = r#"{"variant":"beta","a":-1.0,"b":1.0,"c":0.0,"epsilon":1e-6,
            "monotone_verified":true,"toolkit_version":"0.1.0"}"#;
        assert!(map_from_json(p, negative_beta).is_err());
    }

    #[test]
    fn truth_sidecar_layout() {
        let set = ScoreSet::from_scores("t", &[0.2, 0.7], &[false, true]).unwrap();
        assert_eq!(truth_csv(&set, &[0.25, 0.5]), "id,true_p\n0,0.25\n1,0.5\n");
    }
}
