//! Batch experiment runner: config parsing, the scripted experiments and
//! their file outputs.

pub mod config;
pub mod experiments;
pub mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, ExperimentKind, SolverKind};
pub use experiments::{execute, AssertionOutcome, ExperimentOutput};

use crate::error::Result;

/// Environment variable that overrides the parent of every output directory.
pub const OUTPUT_ROOT_ENV: &str = "VORTLAB_OUTPUT_ROOT";

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub directory: PathBuf,
    pub files: Vec<PathBuf>,
    pub assertions: Vec<AssertionOutcome>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssertionOutcome> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory of `cfg`, placed under `root` when given.
pub fn output_dir(cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    match root {
        Some(r) => r.join(&cfg.output),
        None => cfg.output.clone(),
    }
}

/// Runs the experiment and writes its artifacts, the resolved config and a
/// manifest into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, root: Option<&Path>) -> Result<RunSummary> {
    let out = execute(cfg)?;
    let dir = output_dir(cfg, root);
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut artifacts = out.artifacts;
    artifacts.push(("config.resolved".into(), cfg.canonical()));
    artifacts.sort_by(|a, b| a.0.cmp(&b.0));

    let mut manifest = String::new();
    writeln!(manifest, "tool = {}", env!("CARGO_PKG_NAME")).unwrap();
    writeln!(manifest, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(manifest, "experiment = {}", cfg.experiment).unwrap();
    writeln!(manifest, "seed = {}", cfg.seed).unwrap();
    writeln!(manifest, "config_sha256 = {}", cfg.hash()).unwrap();
    for (name, body) in &artifacts {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        writeln!(manifest, "file = {name} {}", sha256_hex(body.as_bytes())).unwrap();
        files.push(p);
    }
    for a in &out.assertions {
        writeln!(
            manifest,
            "assert = {} {}",
            a.name,
            if a.passed { "pass" } else { "fail" }
        )
        .unwrap();
    }
    let p = dir.join("manifest.txt");
    std::fs::write(&p, manifest)?;
    files.push(p);
    Ok(RunSummary {
        directory: dir,
        files,
        assertions: out.assertions,
    })
}
