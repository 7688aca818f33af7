//! Experiment configuration, orchestration and report emission.

mod cli;
mod config;
mod experiments;
mod report;

pub use cli::cli_dispatch;
pub use config::{describe_spec, ExperimentConfig, ExperimentKind, KNOWN_KEYS};
pub use experiments::{random_halves_weights, random_thirds_weights, run_experiment, RunOutput};
pub use report::{build_id, num, strip_timestamp, timestamp_line, Outcome, Report, Section, Table};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Run an experiment, inside a pool of `threads` workers when given.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput> {
    match threads {
        #[cfg(feature = "parallel")]
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config {
                    key: "threads".into(),
                    message: e.to_string(),
                })?;
            pool.install(|| run_experiment(cfg))
        }
        _ => run_experiment(cfg),
    }
}

/// Files written for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub report: PathBuf,
    pub csv: Option<PathBuf>,
}

/// Write `<dir>/<kind>.report.txt` and, for tabular results, `<dir>/<kind>.csv`.
pub fn write_artifacts(out: &RunOutput, kind: ExperimentKind, dir: &Path) -> Result<Artifacts> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = dir.join(format!("{kind}.report.txt"));
    std::fs::write(&report, out.report.render(&timestamp_line())).map_err(|e| Error::io(&report, e))?;
    let csv = match &out.table {
        Some(t) => {
            let p = dir.join(format!("{kind}.csv"));
            t.write(&p)?;
            Some(p)
        }
        None => None,
    };
    Ok(Artifacts { report, csv })
}
