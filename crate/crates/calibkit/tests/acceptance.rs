//! Acceptance suite: one check per criterion, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the summary lines always
//! print: `cargo test -p calibkit --test acceptance`.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::panic;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use calibkit::config::ExperimentConfig;
use calibkit::experiment::run_experiment;
use calibkit_core::calibrate::{
    apply_map, apply_to_set, fit_beta, fit_platt, fit_spline, FitOptions, MapKind,
};
use calibkit_core::metrics::{
    basic_metrics, confusion_at, ece, gmeans_threshold, mcc, optimal_threshold_pr, pr_curve,
    reliability_bins, roc_curve, youden_threshold, BinMode,
};
use calibkit_core::rng::SeededRng;
use calibkit_core::simlab::{make_imbalanced, synth_scores, Distortion, ImbalanceSpec, SynthSpec};
use calibkit_core::stats::{proportion_interval, IntervalMethod};
use calibkit_core::{stratified_split, ScoreSet, SplitSpec};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ece_of(set: &ScoreSet) -> f64 {
    ece(&reliability_bins(set, 10, BinMode::PositiveFraction).unwrap()).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn balanced_pool(neg: usize, pos: usize) -> ScoreSet {
    let scores: Vec<f64> = (0..neg + pos).map(|i| (i % 101) as f64 / 100.0).collect();
    let labels: Vec<bool> = (0..neg + pos).map(|i| i >= neg).collect();
    ScoreSet::from_scores("pool", &scores, &labels).unwrap()
}

fn ci_arithmetic() -> Outcome {
    let cases = [(0.6321, 0.5935, 0.6707), (0.0327, 0.0184, 0.0470)];
    let mut detail = Vec::new();
    let mut ok = true;
    for (p, lo, hi) in cases {
        let iv = proportion_interval(p, 600, 0.95, IntervalMethod::Wald).unwrap();
        ok &= (iv.lower - lo).abs() <= 5e-4 && (iv.upper - hi).abs() <= 5e-4;
        detail.push(format!("{p} -> ({:.4}, {:.4})", iv.lower, iv.upper));
    }
    check(ok, detail.join("; "))
}

fn imbalance_counts() -> Outcome {
    let pool = balanced_pool(1000, 1000);
    let mut got = Vec::new();
    for percent in [20, 40, 60, 80] {
        let s = make_imbalanced(&pool, ImbalanceSpec { percent, seed: 1 }).unwrap();
        got.push(s.class_counts());
    }
    let small = make_imbalanced(&balanced_pool(226, 226), ImbalanceSpec { percent: 20, seed: 1 })
        .unwrap()
        .class_counts();
    let expected = [(1000, 200), (1000, 400), (1000, 600), (1000, 800)];
    check(
        got == expected && small == (226, 45),
        format!("(neg, pos) = {got:?}, 226-pool at 20% = {small:?}"),
    )
}

fn calibrated_synthetic_ece() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let out = synth_scores(&SynthSpec {
            n: 100_000,
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        worst = worst.max(ece_of(&out.scores));
    }
    check(worst < 0.01, format!("max ECE over 10 seeds {worst:.5}"))
}

fn beta_recovery() -> Outcome {
    let out = synth_scores(&SynthSpec {
        n: 50_000,
        distortion: Distortion::AffineLogit { g: 2.0, d: 1.0 },
        seed: 1,
        ..SynthSpec::default()
    })
    .unwrap();
    let (fit_set, eval_set) = stratified_split(
        &out.scores,
        SplitSpec {
            fit_fraction: 0.5,
            seed: 1,
        },
    )
    .unwrap();
    let map = fit_beta(&fit_set, &FitOptions::default()).unwrap();
    let MapKind::Beta { a, b, c } = map.kind else {
        return Err("fit_beta returned a non-beta map".into());
    };
    let before = ece_of(&eval_set);
    let after = ece_of(&apply_to_set(&map, &eval_set));
    let reduction = 1.0 - after / before;
    let params_ok = (a - 0.5).abs() <= 0.05 && (b - 0.5).abs() <= 0.05 && (c + 0.5).abs() <= 0.05;
    check(
        params_ok && reduction >= 0.8,
        format!("(a, b, c) = ({a:.4}, {b:.4}, {c:.4}); held-out ECE {before:.4} -> {after:.4} ({:.1}% reduction)", 100.0 * reduction),
    )
}

fn rank_invariance() -> Outcome {
    let mut rng = SeededRng::new(5);
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let g = 0.3 + 2.7 * rng.next_f64();
        let d = -1.5 + 3.0 * rng.next_f64();
        let scores: Vec<f64> = (0..500).map(|_| 0.001 + 0.998 * rng.next_f64()).collect();
        let labels: Vec<bool> = scores
            .iter()
            .map(|&z| rng.bernoulli(sigmoid(g * logit(z) + d)))
            .collect();
        let set = ScoreSet::from_scores("r", &scores, &labels).unwrap();
        let opts = FitOptions {
            seed: case,
            ..FitOptions::default()
        };
        let (auprc0, auroc0) = (pr_curve(&set).unwrap().auprc(), roc_curve(&set).unwrap().auroc());
        let maps = [fit_platt(&set, &opts), fit_beta(&set, &opts), fit_spline(&set, &opts)];
        for map in maps.into_iter().flatten().filter(|m| m.monotone_verified) {
            let after = set.with_scores(&apply_map(&map, &scores));
            let dp = (pr_curve(&after).unwrap().auprc() - auprc0).abs();
            let dr = (roc_curve(&after).unwrap().auroc() - auroc0).abs();
            worst = worst.max(dp).max(dr);
            compared += 1;
        }
    }
    check(
        worst <= 1e-12 && compared >= 200,
        format!("{compared} monotone maps over 100 sets; max |delta| {worst:e}"),
    )
}

fn headline_finding() -> Outcome {
    let mut delta_half = Vec::new();
    let mut delta_pr = Vec::new();
    for seed in 0..10 {
        let out = synth_scores(&SynthSpec {
            n: 50_000,
            distortion: Distortion::AffineLogit { g: 2.0, d: -2.0 },
            positive_rate_target: Some(0.2),
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let (fit_set, eval_set) = stratified_split(
            &out.scores,
            SplitSpec {
                fit_fraction: 0.5,
                seed,
            },
        )
        .unwrap();
        let map = fit_beta(&fit_set, &FitOptions::default()).unwrap();
        let calibrated = apply_to_set(&map, &eval_set);
        let mcc_at = |s: &ScoreSet, t: f64| mcc(&confusion_at(s, t)).unwrap_or(0.0);
        delta_half.push(mcc_at(&calibrated, 0.5) - mcc_at(&eval_set, 0.5));
        let t_before = optimal_threshold_pr(&pr_curve(&eval_set).unwrap()).unwrap().threshold;
        let t_after = optimal_threshold_pr(&pr_curve(&calibrated).unwrap()).unwrap().threshold;
        delta_pr.push((mcc_at(&calibrated, t_after) - mcc_at(&eval_set, t_before)).abs());
    }
    let (m_half, m_pr) = (median(delta_half), median(delta_pr));
    check(
        m_half > 0.05 && m_pr < 0.02,
        format!("median dMCC at 0.5 = {m_half:+.4}; median |dMCC| at PR threshold = {m_pr:.4}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = SeededRng::new(0xacce);
    for case in 0..1000 {
        let set = oracles::random_set(&mut rng, 100);
        let pr = pr_curve(&set).unwrap();
        let roc = roc_curve(&set).unwrap();
        let f = optimal_threshold_pr(&pr).unwrap();
        let j = youden_threshold(&roc).unwrap();
        let g = gmeans_threshold(&roc).unwrap();
        let (ft, fv) = oracles::fmax(&set).unwrap();
        let (jt, jv) = oracles::youden(&set).unwrap();
        let (gt, gv) = oracles::gmeans_squared(&set).unwrap();
        let ok = pr.auprc() == oracles::auprc(&set)
            && roc.auroc() == oracles::auroc(&set)
            && f.threshold == ft
            && (f.criterion_value - fv).abs() < 1e-12
            && j.threshold == jt
            && (j.criterion_value - jv).abs() < 1e-12
            && g.threshold == gt
            && (g.criterion_value - gv.sqrt()).abs() < 1e-12;
        if !ok {
            return Err(format!("mismatch on random set {case} (n = {})", set.len()));
        }
    }
    Ok("1000 random sets, n <= 100: AUPRC, AUROC, F-max, Youden, G-means identical".into())
}

fn metric_formulas() -> Outcome {
    let mut rng = SeededRng::new(0xf0f0);
    let mut na_cases = 0;
    for i in 0..1000 {
        let cm = oracles::random_matrix(&mut rng);
        let m = basic_metrics(&cm);
        let r = oracles::recount(&cm);
        let ok = (m.accuracy - r.accuracy).abs() < 1e-12
            && oracles::close(m.precision, r.precision, 1e-12)
            && oracles::close(m.recall, r.recall, 1e-12)
            && oracles::close(m.fscore, r.fscore, 1e-12)
            && oracles::close(mcc(&cm), r.mcc, 1e-12);
        if !ok {
            return Err(format!("matrix {i} {cm:?} disagrees with the recount"));
        }
        na_cases += mcc(&cm).is_none() as usize;
    }
    check(
        na_cases > 0,
        format!("1000 random matrices agree; {na_cases} with MCC NA"),
    )
}

const GRID_CONFIG: &str = "\
sources = synth:sharp, synth:flat
synth.sharp.n = 3000
synth.sharp.distortion = affine_logit(2, 1)
synth.flat.n = 2000
synth.flat.distortion = cubic_logit(-0.5, 0.6, 0, 0.05)
percents = 20, 60, 100
calibrators = platt, beta, spline, none
policies = default_half, pr_fmax, youden, gmeans
seed = 2024
output_dir = out
";

fn without_timestamp(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_cli(config: &Path, out: &Path, threads: &str) -> Result<String, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_calibkit"))
        .args(["run", "--config"])
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .env("CALIBKIT_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::parse(GRID_CONFIG, dir.path()).map_err(|e| e.to_string())?;
    let first = run_experiment(&cfg, Some(4));
    let second = run_experiment(&cfg, Some(4));
    if first.failed() {
        return Err(format!("{} grid rows failed", first.report.failed_rows));
    }
    let same_runs = without_timestamp(&first.report_json()) == without_timestamp(&second.report_json())
        && first.report_csv() == second.report_csv()
        && first.plots == second.plots;

    let config_path = dir.path().join("grid.cfg");
    std::fs::write(&config_path, GRID_CONFIG).map_err(|e| e.to_string())?;
    let one = run_cli(&config_path, &dir.path().join("t1"), "1")?;
    let eight = run_cli(&config_path, &dir.path().join("t8"), "8")?;
    let same_threads = without_timestamp(&one) == without_timestamp(&eight)
        && without_timestamp(&one) == without_timestamp(&first.report_json());
    let csv = |d: &str| std::fs::read(dir.path().join(d).join("report.csv")).unwrap_or_default();
    let same_csv = csv("t1") == csv("t8");
    check(
        same_runs && same_threads && same_csv,
        format!(
            "{} rows; repeated run identical: {same_runs}; CALIBKIT_THREADS 1 vs 8 identical: {}",
            first.report.rows.len(),
            same_threads && same_csv
        ),
    )
}

fn spline_sanity() -> Outcome {
    let f0 = |z: f64| 3.0 * (z - 0.5) + 4.0 * (z - 0.5).powi(3);
    let generated = |n: usize, seed: u64| {
        let mut rng = SeededRng::new(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let labels: Vec<bool> = scores.iter().map(|&z| rng.bernoulli(sigmoid(f0(z)))).collect();
        ScoreSet::from_scores("cubic", &scores, &labels).unwrap()
    };

    let set = generated(5_000, 10);
    let forced = FitOptions {
        spline_lambda_grid: vec![1e4],
        ..FitOptions::default()
    };
    let spline = fit_spline(&set, &forced).map_err(|e| e.to_string())?;
    let affine = fit_platt(
        &set,
        &FitOptions {
            platt_target_smoothing: false,
            ..FitOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let eps = forced.epsilon;
    let grid: Vec<f64> = (0..=1000)
        .map(|i| eps + (1.0 - 2.0 * eps) * i as f64 / 1000.0)
        .collect();
    let sup = apply_map(&spline, &grid)
        .iter()
        .zip(apply_map(&affine, &grid))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let big = generated(20_000, 2024);
    let map = fit_spline(&big, &FitOptions::default()).map_err(|e| e.to_string())?;
    let points: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mae = apply_map(&map, &points)
        .iter()
        .zip(&points)
        .map(|(p, &z)| (p - sigmoid(f0(z))).abs())
        .sum::<f64>()
        / points.len() as f64;
    check(
        sup < 1e-3 && mae < 0.03,
        format!("lambda 1e4 vs affine logistic sup {sup:.2e}; cubic recovery grid MAE {mae:.4}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("CI arithmetic vs published intervals", ci_arithmetic),
        ("imbalance counts", imbalance_counts),
        ("calibrated synthetic scores have ECE < 0.01", calibrated_synthetic_ece),
        ("beta recovery oracle", beta_recovery),
        ("rank invariance of AUPRC and AUROC", rank_invariance),
        ("threshold dependence of calibration gains", headline_finding),
        ("brute-force oracle equivalence", oracle_equivalence),
        ("metric formulas and NA propagation", metric_formulas),
        ("experiment determinism", determinism),
        ("spline sanity", spline_sanity),
    ];
    // Keep panics from individual checks out of the summary.
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{secs:.2}s]", i + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
