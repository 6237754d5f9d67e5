use std::path::{Path, PathBuf};
use std::process::ExitCode;

use calibkit::config::{parse_distortion, ExperimentConfig};
use calibkit::evaluate::{evaluate, EvalSettings, ThresholdRule};
use calibkit::experiment::run_experiment;
use calibkit::io;
use calibkit::report::EvalReport;
use calibkit::{svg, THREADS_ENV, TOOLKIT_VERSION};
use calibkit_core::calibrate::{apply_to_set, fit, log_likelihood, FitOptions, MapKind, Method};
use calibkit_core::metrics::{pr_curve, BinMode, Criterion};
use calibkit_core::simlab::{synth_balanced_pool, synth_scores, SynthSpec};
use calibkit_core::stats::IntervalMethod;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for bad flags, unreadable or invalid inputs.
const EXIT_USAGE: u8 = 2;
/// Exit status for fits, metrics or grid cells that could not be computed.
const EXIT_COMPUTE: u8 = 3;

#[derive(Parser)]
#[command(name = "calibkit", version, about = "Probability calibration and calibration-aware evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a calibration map to a score file.
    Fit(FitArgs),
    /// Apply a calibration map to a score file.
    Apply(ApplyArgs),
    /// Evaluate a score file: metrics, intervals, optional plots.
    Eval(EvalArgs),
    /// Generate synthetic scores with known true probabilities.
    Simulate(SimulateArgs),
    /// Run an experiment grid from a config file.
    Run(RunArgs),
    /// Print the toolkit version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Platt,
    Beta,
    Spline,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    DefaultHalf,
    PrFmax,
    Youden,
    Gmeans,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    Wilson,
    Wald,
}

#[derive(Clone, Copy, ValueEnum)]
enum BinModeArg {
    PositiveFraction,
    LabelAccuracy,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Seed for spline cross-validation folds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Disable Platt target smoothing (plain maximum likelihood).
    #[arg(long)]
    no_target_smoothing: bool,
    /// Spline knot count (default chosen from the number of distinct scores).
    #[arg(long)]
    knots: Option<usize>,
    /// Comma-separated ascending spline smoothing grid.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    /// Fixed operating threshold (default 0.5).
    #[arg(long, conflicts_with = "threshold_policy")]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    threshold_policy: Option<PolicyArg>,
    #[arg(long, default_value_t = calibkit_core::metrics::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, value_enum, default_value = "positive-fraction")]
    bin_mode: BinModeArg,
    #[arg(long, value_enum, default_value = "wilson")]
    ci: CiArg,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    /// Write reliability.svg and pr_curve.svg here.
    #[arg(long)]
    svg_dir: Option<PathBuf>,
    /// Report path; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// none, affine_logit(g, d) or cubic_logit(c0, c1, c2, c3)
    #[arg(long, default_value = "none")]
    distortion: String,
    #[arg(long)]
    positive_rate: Option<f64>,
    /// Exactly n/2 records of each class.
    #[arg(long, conflicts_with = "positive_rate")]
    balanced: bool,
    #[arg(long, default_value_t = 0.02)]
    p_low: f64,
    #[arg(long, default_value_t = 0.98)]
    p_high: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Sidecar `id,true_p` file.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output_dir.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.to_string(),
    }
}

fn compute(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_COMPUTE,
        message: message.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Apply(a) => cmd_apply(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Run(a) => cmd_run(a),
        Command::Version => {
            println!("calibkit {TOOLKIT_VERSION}");
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("calibkit: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), Failure> {
    let set = io::read_scores(&a.input).map_err(usage)?;
    let defaults = FitOptions::default();
    let opts = FitOptions {
        epsilon: a.epsilon,
        platt_target_smoothing: !a.no_target_smoothing,
        spline_knot_count: a.knots,
        spline_lambda_grid: a.lambda_grid.unwrap_or(defaults.spline_lambda_grid),
        cv_folds: a.cv_folds,
        max_iterations: a.max_iterations,
        seed: a.seed,
        ..defaults
    };
    opts.validate().map_err(usage)?;
    let method = match a.method {
        MethodArg::Platt => Method::Platt,
        MethodArg::Beta => Method::Beta,
        MethodArg::Spline => Method::Spline,
    };
    let map = fit(method, &set, &opts).map_err(compute)?;
    io::write_text(&a.output, &io::map_to_json(&map)).map_err(usage)?;

    match &map.kind {
        MapKind::Platt { alpha, beta } => println!("platt alpha={alpha} beta={beta}"),
        MapKind::Beta { a, b, c } => println!("beta a={a} b={b} c={c}"),
        MapKind::Spline { knots, lambda, .. } => {
            println!("spline knots={} lambda={lambda}", knots.len())
        }
        MapKind::Identity => println!("identity"),
    }
    println!("monotone_verified={}", map.monotone_verified);
    println!("log_likelihood={}", log_likelihood(&map, &set));
    Ok(())
}

fn cmd_apply(a: ApplyArgs) -> Result<(), Failure> {
    let map = io::read_map(&a.map).map_err(usage)?;
    let set = io::read_scores(&a.input).map_err(usage)?;
    io::write_scores(&a.output, &apply_to_set(&map, &set)).map_err(usage)
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    if a.bins < 2 {
        return Err(usage("--bins must be at least 2"));
    }
    if !(a.ci_level > 0.0 && a.ci_level < 1.0) {
        return Err(usage("--ci-level must lie strictly between 0 and 1"));
    }
    if let Some(t) = a.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(usage("--threshold must lie in [0, 1]"));
        }
    }
    let set = io::read_scores(&a.input).map_err(usage)?;
    let settings = EvalSettings {
        bins: a.bins,
        bin_mode: match a.bin_mode {
            BinModeArg::PositiveFraction => BinMode::PositiveFraction,
            BinModeArg::LabelAccuracy => BinMode::LabelAccuracy,
        },
        ci_level: a.ci_level,
        ci_method: match a.ci {
            CiArg::Wilson => IntervalMethod::Wilson,
            CiArg::Wald => IntervalMethod::Wald,
        },
    };
    let rule = match (a.threshold, a.threshold_policy) {
        (_, Some(p)) => ThresholdRule::Policy(match p {
            PolicyArg::DefaultHalf => Criterion::DefaultHalf,
            PolicyArg::PrFmax => Criterion::PrFmax,
            PolicyArg::Youden => Criterion::Youden,
            PolicyArg::Gmeans => Criterion::Gmeans,
        }),
        (Some(t), None) => ThresholdRule::Fixed(t),
        (None, None) => ThresholdRule::Policy(Criterion::DefaultHalf),
    };
    let evaluation = evaluate(&set, rule, &settings).map_err(compute)?;

    if let Some(dir) = &a.svg_dir {
        let title = set.name().to_string();
        io::write_text(&dir.join("reliability.svg"), &svg::reliability_svg(&evaluation.bins, &title))
            .map_err(usage)?;
        if let Ok(curve) = pr_curve(&set) {
            io::write_text(&dir.join("pr_curve.svg"), &svg::pr_svg(&curve, &evaluation.threshold, &title))
                .map_err(usage)?;
        }
    }
    let report = EvalReport::new(set.name(), set.class_counts(), &settings, evaluation);
    match &a.output {
        Some(path) => io::write_text(path, &report.to_json()).map_err(usage),
        None => {
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let spec = SynthSpec {
        n: a.n,
        p_low: a.p_low,
        p_high: a.p_high,
        distortion: parse_distortion("--distortion", &a.distortion).map_err(usage)?,
        positive_rate_target: a.positive_rate,
        seed: a.seed,
    };
    let out = if a.balanced {
        synth_balanced_pool(&spec)
    } else {
        synth_scores(&spec)
    }
    .map_err(usage)?;
    let set = out.scores.with_name(io::set_name(&a.output));
    io::write_scores(&a.output, &set).map_err(usage)?;
    if let Some(path) = &a.truth {
        io::write_text(path, &io::truth_csv(&set, &out.truth)).map_err(usage)?;
    }
    Ok(())
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&a.config).map_err(usage)?;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    let threads = threads_from_env()?;
    let outcome = run_experiment(&cfg, threads);
    outcome.write(&cfg.output_dir).map_err(usage)?;
    let dir: &Path = &cfg.output_dir;
    println!(
        "{} rows ({} failed) written to {}",
        outcome.report.rows.len(),
        outcome.report.failed_rows,
        dir.display()
    );
    if outcome.failed() {
        for r in outcome.report.rows.iter().filter(|r| r.status != "ok") {
            eprintln!(
                "failed cell {} set-{} {} {}: {}",
                r.source,
                r.percent,
                r.calibrator.as_str(),
                r.policy.as_str(),
                r.error.as_deref().unwrap_or("")
            );
        }
        return Err(compute(format!("{} grid rows failed", outcome.report.failed_rows)));
    }
    Ok(())
}
