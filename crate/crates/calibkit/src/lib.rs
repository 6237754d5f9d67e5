//! File formats, plots, the experiment-grid runner and the command-line
//! front end for `calibkit-core`.

pub mod config;
pub mod evaluate;
pub mod experiment;
pub mod io;
pub mod report;
pub mod svg;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the experiment runner's worker threads.
pub const THREADS_ENV: &str = "CALIBKIT_THREADS";

/// Current UTC time, RFC 3339.
pub fn timestamp() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}
