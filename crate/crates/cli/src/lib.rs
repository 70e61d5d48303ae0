//! Command-line driver for the cohgen experiments.
//!
//! Every command resolves a [`config::RunConfig`], runs it into a
//! [`summary::Summary`] and writes that summary, the resolved config and the
//! CSV extracts into one output directory.

pub mod commands;
pub mod config;
pub mod summary;

use std::fs;
use std::io;
use std::path::Path;

use config::{Experiment, RunConfig};
use summary::{Summary, CONFIG_FILE, SUMMARY_FILE};

/// Runs a resolved config and writes every artifact into `out`.
pub fn run_to_dir(experiment: Experiment, config: RunConfig, out: &Path) -> io::Result<Summary> {
    let summary = commands::run(experiment, config);
    fs::create_dir_all(out)?;
    fs::write(out.join(CONFIG_FILE), summary.config.to_toml())?;
    write_artifacts(&summary, out)?;
    Ok(summary)
}

fn write_artifacts(summary: &Summary, out: &Path) -> io::Result<()> {
    fs::write(out.join(SUMMARY_FILE), summary.to_json())?;
    for (name, body) in summary.csv_artifacts() {
        fs::write(out.join(name), body)?;
    }
    Ok(())
}

/// Re-reads `summary.json` in `dir`, rewrites its CSV extracts and returns the
/// text tables. Nothing is recomputed.
pub fn report(dir: &Path) -> io::Result<String> {
    let text = fs::read_to_string(dir.join(SUMMARY_FILE))?;
    let summary = Summary::from_json(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    for (name, body) in summary.csv_artifacts() {
        fs::write(dir.join(name), body)?;
    }
    Ok(summary.report())
}
