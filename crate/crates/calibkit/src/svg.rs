//! Hand-written SVG plots.
//!
//! Every plot uses `viewBox="0 0 800 600"`. The unit square of data space maps
//! onto the plot area `[80, 760] x [40, 440]` (left, right, top, bottom):
//!
//! ```text
//! x_svg = 80 + 680 * x
//! y_svg = 440 - 400 * y
//! ```
//!
//! The reliability diagram adds a count histogram in the strip
//! `[80, 760] x [480, 540]` below the axes, one bar per bin, bar height
//! proportional to `count / max_count`.

use std::fmt::Write;

use calibkit_core::metrics::{PrCurve, ReliabilityBins, ThresholdChoice};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
pub const PLOT_LEFT: f64 = 80.0;
pub const PLOT_RIGHT: f64 = 760.0;
pub const PLOT_TOP: f64 = 40.0;
pub const PLOT_BOTTOM: f64 = 440.0;
pub const STRIP_TOP: f64 = 480.0;
pub const STRIP_BOTTOM: f64 = 540.0;
pub const MARKER_RADIUS: f64 = 6.0;

pub fn x_to_svg(x: f64) -> f64 {
    PLOT_LEFT + (PLOT_RIGHT - PLOT_LEFT) * x
}

pub fn y_to_svg(y: f64) -> f64 {
    PLOT_BOTTOM - (PLOT_BOTTOM - PLOT_TOP) * y
}

fn num(v: f64) -> String {
    // Two decimals are far below a pixel; trims noise like 439.99999999.
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (l, t, b) = (num(PLOT_LEFT), num(PLOT_TOP), num(PLOT_BOTTOM));
    let _ = writeln!(
        out,
        r##"<rect class="frame" x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#333333"/>"##,
        num(PLOT_RIGHT - PLOT_LEFT),
        num(PLOT_BOTTOM - PLOT_TOP)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let (x, y) = (num(x_to_svg(v)), num(y_to_svg(v)));
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{b}" x2="{x}" y2="{}" stroke="#333333"/><text x="{x}" y="{}" font-size="12" text-anchor="middle">{v:.1}</text>"##,
            num(PLOT_BOTTOM + 5.0),
            num(PLOT_BOTTOM + 20.0)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{l}" y2="{y}" stroke="#333333"/><text x="{}" y="{}" font-size="12" text-anchor="end">{v:.1}</text>"##,
            num(PLOT_LEFT - 5.0),
            num(PLOT_LEFT - 8.0),
            num(y_to_svg(v) + 4.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="x-label" x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        num((PLOT_LEFT + PLOT_RIGHT) / 2.0),
        num(PLOT_BOTTOM + 34.0),
        escape(x_label)
    );
    let cy = num((PLOT_TOP + PLOT_BOTTOM) / 2.0);
    let _ = writeln!(
        out,
        r#"<text class="y-label" x="24" y="{cy}" font-size="14" text-anchor="middle" transform="rotate(-90 24 {cy})">{}</text>"#,
        escape(y_label)
    );
}

/// Reliability diagram: diagonal, one marker per non-empty bin at
/// (mean score, observed), and the count histogram strip.
pub fn reliability_svg(bins: &ReliabilityBins, title: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    axes(
        &mut out,
        "Mean predicted probability",
        "Observed positive fraction",
    );
    let _ = writeln!(
        out,
        r##"<path class="diagonal" d="M {} {} L {} {}" stroke="#999999" stroke-dasharray="6 4" fill="none"/>"##,
        num(x_to_svg(0.0)),
        num(y_to_svg(0.0)),
        num(x_to_svg(1.0)),
        num(y_to_svg(1.0))
    );

    let max_count = bins.bins().iter().map(|b| b.count).max().unwrap_or(0).max(1);
    let strip = STRIP_BOTTOM - STRIP_TOP;
    for (k, bin) in bins.bins().iter().enumerate() {
        let x0 = x_to_svg(bin.lower);
        let width = x_to_svg(bin.upper) - x0;
        let height = strip * bin.count as f64 / max_count as f64;
        let _ = writeln!(
            out,
            r##"<rect class="count" data-bin="{k}" data-count="{}" x="{}" y="{}" width="{}" height="{}" fill="#9ecae1" stroke="#ffffff"/>"##,
            bin.count,
            num(x0),
            num(STRIP_BOTTOM - height),
            num(width),
            num(height)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12">Count per bin (max {max_count})</text>"#,
        num(PLOT_LEFT),
        num(STRIP_BOTTOM + 16.0)
    );

    for (k, bin) in bins.bins().iter().enumerate() {
        let (Some(mean), Some(observed)) = (bin.mean_score, bin.observed) else {
            continue;
        };
        let _ = writeln!(
            out,
            r##"<circle class="bin" data-bin="{k}" cx="{}" cy="{}" r="{}" fill="#d62728"/>"##,
            num(x_to_svg(mean)),
            num(y_to_svg(observed)),
            num(MARKER_RADIUS)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// PR curve as a step path (each step spans `R_{n-1}..R_n` at height `P_n`,
/// the average-precision area), with a marker at the operating point of
/// `choice` and the AUPRC and threshold printed.
pub fn pr_svg(curve: &PrCurve, choice: &ThresholdChoice, title: &str) -> String {
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, "Recall", "Precision");

    let mut d = String::new();
    let mut prev_recall = 0.0;
    for (i, p) in curve.points().iter().enumerate() {
        if i == 0 {
            let _ = write!(d, "M {} {}", num(x_to_svg(0.0)), num(y_to_svg(p.precision)));
        } else {
            let _ = write!(d, " V {}", num(y_to_svg(p.precision)));
        }
        if p.recall != prev_recall || i == 0 {
            let _ = write!(d, " H {}", num(x_to_svg(p.recall)));
        }
        prev_recall = p.recall;
    }
    let _ = writeln!(
        out,
        r##"<path class="pr" d="{d}" stroke="#1f77b4" stroke-width="2" fill="none"/>"##
    );

    // Operating point: the lowest curve threshold that still includes all
    // scores >= the chosen threshold.
    let point = curve
        .points()
        .iter().rfind(|p| p.threshold >= choice.threshold);
    if let Some(p) = point {
        let _ = writeln!(
            out,
            r##"<circle class="operating-point" data-threshold="{}" cx="{}" cy="{}" r="{}" fill="#d62728"/>"##,
            p.threshold,
            num(x_to_svg(p.recall)),
            num(y_to_svg(p.precision)),
            num(MARKER_RADIUS)
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="auprc" x="{}" y="{}" font-size="14">AUPRC {:.4}</text>"#,
        num(PLOT_LEFT + 12.0),
        num(PLOT_BOTTOM - 36.0),
        curve.auprc()
    );
    let _ = writeln!(
        out,
        r#"<text class="threshold" x="{}" y="{}" font-size="14">threshold {:.4} ({})</text>"#,
        num(PLOT_LEFT + 12.0),
        num(PLOT_BOTTOM - 16.0),
        choice.threshold,
        choice.criterion.as_str()
    );
    out.push_str("</svg>\n");
    out
}
