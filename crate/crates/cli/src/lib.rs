//! Experiment runner for the `spinlab` library.

pub mod config;
pub mod pipeline;
pub mod presets;
pub mod render;

use std::path::{Path, PathBuf};

use anyhow::Result;
use rayon::prelude::*;

use config::ExperimentConfig;
use pipeline::{run_experiment, Outcome};

pub const OUT_DIR_ENV: &str = "SPINLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "spinlab-out";

/// Runs a batch concurrently; outcomes come back in config order.
pub fn run_batch(configs: &[ExperimentConfig]) -> Result<Vec<Outcome>> {
    configs.par_iter().map(run_experiment).collect()
}

/// Output root: explicit choice, then the config's own, then the default.
pub fn output_root(explicit: Option<&Path>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
