//! The imbalance x calibrator x threshold-policy grid.
//!
//! For every source and percent the pool is reduced to a Set-N subset and
//! split into fit and evaluation parts. Each calibrator is fitted on the fit
//! part; raw and recalibrated evaluation scores are then scored under every
//! threshold policy. Every random choice uses a seed derived from the master
//! seed and the cell key, so results do not depend on scheduling.

use std::path::{Path, PathBuf};

use calibkit_core::calibrate::{apply_to_set, fit, CalibrationMap, FitOptions};
use calibkit_core::metrics::{pr_curve, Criterion};
use calibkit_core::rng::derive_seed;
use calibkit_core::simlab::{make_imbalanced, synth_balanced_pool, ImbalanceSpec};
use calibkit_core::stats::significant_difference;
use calibkit_core::{stratified_split, ScoreSet, SplitSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Calibrator, ExperimentConfig, Source};
use crate::evaluate::{evaluate, na, na_text, EvalSettings, Evaluation, ThresholdRule};
use crate::io::{self, IoError};
use crate::svg;
use crate::TOOLKIT_VERSION;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub source: String,
    pub percent: u32,
    pub calibrator: Calibrator,
    pub policy: Criterion,
    /// `ok` or `failed`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(serialize_with = "na")]
    pub fit_size: Option<usize>,
    #[serde(serialize_with = "na")]
    pub eval_size: Option<usize>,
    #[serde(serialize_with = "na")]
    pub eval_positives: Option<usize>,
    #[serde(serialize_with = "na")]
    pub map: Option<CalibrationMap>,
    #[serde(serialize_with = "na")]
    pub before: Option<Evaluation>,
    #[serde(serialize_with = "na")]
    pub after: Option<Evaluation>,
    /// MCC after minus MCC before.
    #[serde(serialize_with = "na")]
    pub delta_mcc: Option<f64>,
    /// Intervals before and after do not overlap.
    #[serde(serialize_with = "na")]
    pub mcc_significant: Option<bool>,
    #[serde(serialize_with = "na")]
    pub ece_significant: Option<bool>,
    /// AUPRC and AUROC identical before and after (to 1e-12).
    #[serde(serialize_with = "na")]
    pub rank_metrics_unchanged: Option<bool>,
    /// Lowest evaluation ECE among the fitted calibrators of this source and
    /// percent.
    pub best_calibrator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestCalibrator {
    pub source: String,
    pub percent: u32,
    pub calibrator: Calibrator,
    pub ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub toolkit_version: &'static str,
    /// The only field that differs between identical runs.
    pub generated_at: String,
    pub config: ExperimentConfig,
    pub interval_note: &'static str,
    pub rows: Vec<Row>,
    pub best_calibrators: Vec<BestCalibrator>,
    pub failed_rows: usize,
}

pub const INTERVAL_NOTE: &str = "binomial proportion interval applied to the metric value with n = evaluation set size; significant = intervals before and after calibration do not overlap";

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    /// Plot files relative to the output directory.
    pub plots: Vec<(PathBuf, String)>,
}

impl ExperimentOutcome {
    pub fn failed(&self) -> bool {
        self.report.failed_rows > 0
    }

    pub fn report_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.report).expect("report serialises");
        text.push('\n');
        text
    }

    pub fn report_csv(&self) -> String {
        report_csv(&self.report.rows)
    }

    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        io::write_text(&dir.join(REPORT_JSON), &self.report_json())?;
        io::write_text(&dir.join(REPORT_CSV), &self.report_csv())?;
        for (rel, text) in &self.plots {
            io::write_text(&dir.join(rel), text)?;
        }
        Ok(())
    }
}

struct Prepared {
    source: usize,
    percent: u32,
    split: Result<(ScoreSet, ScoreSet), String>,
}

struct CellOutput {
    rows: Vec<Row>,
    plots: Vec<(PathBuf, String)>,
}

fn load_pool(source: &Source) -> Result<ScoreSet, String> {
    match source {
        Source::Csv { path, .. } => io::read_scores(path).map_err(|e| e.to_string()),
        Source::Synth { spec, .. } => synth_balanced_pool(spec)
            .map(|out| out.scores)
            .map_err(|e| e.to_string()),
    }
}

fn slug(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn failed_row(
    source: &str,
    percent: u32,
    calibrator: Calibrator,
    policy: Criterion,
    error: &str,
) -> Row {
    Row {
        source: source.to_string(),
        percent,
        calibrator,
        policy,
        status: "failed",
        error: Some(error.to_string()),
        fit_size: None,
        eval_size: None,
        eval_positives: None,
        map: None,
        before: None,
        after: None,
        delta_mcc: None,
        mcc_significant: None,
        ece_significant: None,
        rank_metrics_unchanged: None,
        best_calibrator: false,
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    calibrator: Calibrator,
    settings: &EvalSettings,
) -> CellOutput {
    let label = cfg.sources[prepared.source].label();
    let percent = prepared.percent;
    let fail = |error: &str| CellOutput {
        rows: cfg
            .policies
            .iter()
            .map(|&p| failed_row(label, percent, calibrator, p, error))
            .collect(),
        plots: Vec::new(),
    };
    let (fit_set, eval_set) = match &prepared.split {
        Ok(parts) => parts,
        Err(e) => return fail(e),
    };

    let map = match calibrator.method() {
        None => None,
        Some(method) => {
            let opts = FitOptions {
                seed: derive_seed(cfg.seed, &format!("{label}|{percent}|{}|fit", calibrator.as_str())),
                ..FitOptions::default()
            };
            match fit(method, fit_set, &opts) {
                Ok(map) => Some(map),
                Err(e) => return fail(&e.to_string()),
            }
        }
    };
    let calibrated = match &map {
        Some(m) => apply_to_set(m, eval_set),
        None => eval_set.clone(),
    };

    let dir = PathBuf::from("cells")
        .join(format!("{:02}-{}", prepared.source, slug(label)))
        .join(format!("set-{percent}"))
        .join(calibrator.as_str());
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for (i, &policy) in cfg.policies.iter().enumerate() {
        let rule = ThresholdRule::Policy(policy);
        let result = evaluate(eval_set, rule, settings)
            .and_then(|b| evaluate(&calibrated, rule, settings).map(|a| (b, a)));
        let (before, after) = match result {
            Ok(pair) => pair,
            Err(e) => {
                rows.push(failed_row(label, percent, calibrator, policy, &e.to_string()));
                continue;
            }
        };
        if i == 0 {
            let title = format!("{label} set-{percent} {}", calibrator.as_str());
            plots.push((
                dir.join("reliability_before.svg"),
                svg::reliability_svg(&before.bins, &format!("{title} (before)")),
            ));
            plots.push((
                dir.join("reliability_after.svg"),
                svg::reliability_svg(&after.bins, &format!("{title} (after)")),
            ));
        }
        if let Ok(curve) = pr_curve(&calibrated) {
            plots.push((
                dir.join(format!("pr_{}.svg", policy.as_str())),
                svg::pr_svg(&curve, &after.threshold, &format!("{label} set-{percent} {} {}", calibrator.as_str(), policy.as_str())),
            ));
        }
        let both = |f: fn(&Evaluation) -> Option<f64>| match (f(&before), f(&after)) {
            (Some(b), Some(a)) => Some((b, a)),
            _ => None,
        };
        let delta_mcc = both(|e| e.mcc).map(|(b, a)| a - b);
        let significant = |b: &Option<_>, a: &Option<_>| match (b, a) {
            (Some(b), Some(a)) => significant_difference(b, a).ok(),
            _ => None,
        };
        let rank_metrics_unchanged = match (both(|e| e.auprc), both(|e| e.auroc)) {
            (Some((p0, p1)), Some((r0, r1))) => {
                Some((p0 - p1).abs() <= 1e-12 && (r0 - r1).abs() <= 1e-12)
            }
            _ => None,
        };
        rows.push(Row {
            source: label.to_string(),
            percent,
            calibrator,
            policy,
            status: "ok",
            error: None,
            fit_size: Some(fit_set.len()),
            eval_size: Some(eval_set.len()),
            eval_positives: Some(eval_set.class_counts().1),
            map: map.clone(),
            mcc_significant: significant(&before.mcc_ci, &after.mcc_ci),
            ece_significant: significant(&before.ece_ci, &after.ece_ci),
            before: Some(before),
            after: Some(after),
            delta_mcc,
            rank_metrics_unchanged,
            best_calibrator: false,
        });
    }
    CellOutput { rows, plots }
}

/// Runs the grid on a pool of `threads` workers (`None`: rayon's default).
/// Output is identical for any thread count.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> ExperimentOutcome {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().expect("thread pool");
    pool.install(|| run_grid(cfg))
}

fn run_grid(cfg: &ExperimentConfig) -> ExperimentOutcome {
    let settings = EvalSettings {
        bins: cfg.bins,
        ci_level: cfg.ci_level,
        ci_method: cfg.ci_method,
        ..EvalSettings::default()
    };

    let pools: Vec<Result<ScoreSet, String>> = cfg.sources.par_iter().map(load_pool).collect();

    let groups: Vec<(usize, u32)> = (0..cfg.sources.len())
        .flat_map(|s| cfg.percents.iter().map(move |&p| (s, p)))
        .collect();
    let prepared: Vec<Prepared> = groups
        .par_iter()
        .map(|&(source, percent)| {
            let label = cfg.sources[source].label();
            let split = pools[source].clone().and_then(|pool| {
                let subset = make_imbalanced(
                    &pool,
                    ImbalanceSpec {
                        percent,
                        seed: derive_seed(cfg.seed, &format!("{label}|{percent}|imbalance")),
                    },
                )
                .map_err(|e| e.to_string())?;
                stratified_split(
                    &subset,
                    SplitSpec {
                        fit_fraction: cfg.fit_fraction,
                        seed: derive_seed(cfg.seed, &format!("{label}|{percent}|split")),
                    },
                )
                .map_err(|e| e.to_string())
            });
            Prepared {
                source,
                percent,
                split,
            }
        })
        .collect();

    let units: Vec<(usize, Calibrator)> = (0..prepared.len())
        .flat_map(|g| cfg.calibrators.iter().map(move |&c| (g, c)))
        .collect();
    let outputs: Vec<CellOutput> = units
        .par_iter()
        .map(|&(g, calibrator)| run_cell(cfg, &prepared[g], calibrator, &settings))
        .collect();

    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for out in outputs {
        rows.extend(out.rows);
        plots.extend(out.plots);
    }
    rows.sort_by(|a, b| {
        let key = |r: &Row| (r.source.clone(), r.percent, r.calibrator, r.policy);
        key(a).cmp(&key(b))
    });
    plots.sort_by(|a, b| a.0.cmp(&b.0));

    let best_calibrators = mark_best(cfg, &mut rows);
    let failed_rows = rows.iter().filter(|r| r.status != "ok").count();
    ExperimentOutcome {
        report: ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION,
            generated_at: crate::timestamp(),
            config: cfg.clone(),
            interval_note: INTERVAL_NOTE,
            rows,
            best_calibrators,
            failed_rows,
        },
        plots,
    }
}

/// Lowest post-calibration ECE per (source, percent) among fitted
/// calibrators; ties go to platt, then beta, then spline.
fn mark_best(cfg: &ExperimentConfig, rows: &mut [Row]) -> Vec<BestCalibrator> {
    let mut best = Vec::new();
    for source in &cfg.sources {
        for &percent in &cfg.percents {
            let mut choice: Option<(Calibrator, f64)> = None;
            for r in rows.iter() {
                if r.source != source.label() || r.percent != percent || r.calibrator == Calibrator::None {
                    continue;
                }
                let Some(after) = &r.after else { continue };
                if choice.is_none_or(|(c, e)| after.ece < e || (after.ece == e && r.calibrator < c)) {
                    choice = Some((r.calibrator, after.ece));
                }
            }
            if let Some((calibrator, ece)) = choice {
                for r in rows.iter_mut() {
                    if r.source == source.label() && r.percent == percent && r.calibrator == calibrator {
                        r.best_calibrator = true;
                    }
                }
                best.push(BestCalibrator {
                    source: source.label().to_string(),
                    percent,
                    calibrator,
                    ece,
                });
            }
        }
    }
    best
}

const CSV_COLUMNS: [&str; 34] = [
    "source",
    "percent",
    "calibrator",
    "policy",
    "status",
    "error",
    "fit_size",
    "eval_size",
    "eval_positives",
    "threshold_before",
    "threshold_after",
    "accuracy_before",
    "accuracy_after",
    "precision_before",
    "precision_after",
    "recall_before",
    "recall_after",
    "fscore_before",
    "fscore_after",
    "mcc_before",
    "mcc_after",
    "mcc_ci_before",
    "mcc_ci_after",
    "ece_before",
    "ece_after",
    "ece_ci_before",
    "ece_ci_after",
    "mce_before",
    "mce_after",
    "auprc_before",
    "auprc_after",
    "mcc_significant",
    "ece_significant",
    "best_calibrator",
];

/// One line per row; undefined values are the literal `NA`. Intervals are
/// written as `lower;upper`.
pub fn report_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        let pair = |f: &dyn Fn(&Evaluation) -> Option<f64>| {
            [
                na_text(r.before.as_ref().and_then(f)),
                na_text(r.after.as_ref().and_then(f)),
            ]
        };
        let ci = |f: &dyn Fn(&Evaluation) -> Option<String>| {
            let get = |e: &Option<Evaluation>| e.as_ref().and_then(f).unwrap_or_else(|| "NA".into());
            [get(&r.before), get(&r.after)]
        };
        let flag = |v: Option<bool>| v.map_or_else(|| "NA".to_string(), |b| b.to_string());
        let count = |v: Option<usize>| v.map_or_else(|| "NA".to_string(), |n| n.to_string());
        let mut record = vec![
            r.source.clone(),
            r.percent.to_string(),
            r.calibrator.as_str().to_string(),
            r.policy.as_str().to_string(),
            r.status.to_string(),
            r.error.clone().unwrap_or_default(),
            count(r.fit_size),
            count(r.eval_size),
            count(r.eval_positives),
        ];
        record.extend(pair(&|e| Some(e.threshold.threshold)));
        record.extend(pair(&|e| Some(e.accuracy)));
        record.extend(pair(&|e| e.precision));
        record.extend(pair(&|e| e.recall));
        record.extend(pair(&|e| e.fscore));
        record.extend(pair(&|e| e.mcc));
        record.extend(ci(&|e| e.mcc_ci.map(|c| format!("{};{}", c.lower, c.upper))));
        record.extend(pair(&|e| Some(e.ece)));
        record.extend(ci(&|e| e.ece_ci.map(|c| format!("{};{}", c.lower, c.upper))));
        record.extend(pair(&|e| Some(e.mce)));
        record.extend(pair(&|e| e.auprc));
        record.push(flag(r.mcc_significant));
        record.push(flag(r.ece_significant));
        record.push(r.best_calibrator.to_string());
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
