//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{ExperimentConfig, ExperimentKind};
use super::{run_with_threads, write_artifacts};
use crate::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "perclab", version, about = "Finite-N experiments on isolated perceptron solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample an instance and write it as a binary instance file.
    Gen(CommonArgs),
    /// Enumerate solutions, isolation and clusters of one instance.
    Enumerate(CommonArgs),
    /// Margin bound and conditional feasibility around isolated solutions.
    Fragility(CommonArgs),
    /// The resampling pipeline around an algorithm's output.
    Pipeline(CommonArgs),
    /// Distance between outputs on correlated instances.
    Stability(CommonArgs),
    /// How often an algorithm lands near a (k-isolated) solution.
    Success(CommonArgs),
    /// Random cases of both partition constructions.
    PartitionTest(CommonArgs),
    /// Random Gaussian setups for the correlation inequality.
    PittTest(CommonArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for the report and CSV.
    #[arg(long)]
    dir: Option<String>,
    /// Extra `key=value` settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    #[arg(long)]
    symmetric: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    intervals: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    iota: Option<String>,
    #[arg(long)]
    link: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    cases: Option<String>,
    #[arg(long)]
    instances: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl CommonArgs {
    fn flags(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("dir", &self.dir),
            ("n", &self.n),
            ("m", &self.m),
            ("alpha", &self.alpha),
            ("kappa", &self.kappa),
            ("symmetric", &self.symmetric),
            ("intervals", &self.intervals),
            ("eta", &self.eta),
            ("k", &self.k),
            ("iota", &self.iota),
            ("link", &self.link),
            ("samples", &self.samples),
            ("trials", &self.trials),
            ("cases", &self.cases),
            ("instances", &self.instances),
            ("seed", &self.seed),
            ("omega", &self.omega),
            ("algorithm", &self.algorithm),
            ("rho", &self.rho),
            ("threshold", &self.threshold),
            ("input", &self.input),
            ("out", &self.out),
        ]
    }

    fn build(&self, kind: ExperimentKind) -> Result<(ExperimentConfig, Option<usize>)> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                ExperimentConfig::from_text(kind, &text)?
            }
            None => ExperimentConfig::new(kind),
        };
        for (key, value) in self.flags() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
                key: kv.clone(),
                message: "expected KEY=VALUE".into(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        let threads = match self.threads {
            Some(t) => Some(t),
            None => cfg.get("threads")?,
        };
        Ok((cfg, threads))
    }
}

impl Command {
    fn split(&self) -> (ExperimentKind, &CommonArgs) {
        match self {
            Command::Gen(a) => (ExperimentKind::Gen, a),
            Command::Enumerate(a) => (ExperimentKind::Enumerate, a),
            Command::Fragility(a) => (ExperimentKind::Fragility, a),
            Command::Pipeline(a) => (ExperimentKind::Pipeline, a),
            Command::Stability(a) => (ExperimentKind::Stability, a),
            Command::Success(a) => (ExperimentKind::Success, a),
            Command::PartitionTest(a) => (ExperimentKind::PartitionTest, a),
            Command::PittTest(a) => (ExperimentKind::PittTest, a),
        }
    }
}

/// Parse `argv` (including the program name), run the experiment and write
/// its artifacts. Returns the process exit code: 0 pass, 1 usage or
/// configuration error, 2 theorem-violation assertion.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = cli.command.split();
    let (cfg, threads) = match args.build(kind) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("perclab: {e}");
            return 1;
        }
    };
    let out = match run_with_threads(&cfg, threads) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("perclab: {e}");
            return 1;
        }
    };
    let dir = cfg.path("dir").unwrap_or_else(|| PathBuf::from("."));
    match write_artifacts(&out, kind, &dir) {
        Ok(a) => {
            println!("report: {}", a.report.display());
            if let Some(c) = a.csv {
                println!("csv: {}", c.display());
            }
            println!("outcome: {:?}", out.report.outcome());
            out.report.outcome().exit_code()
        }
        Err(e) => {
            eprintln!("perclab: {e}");
            1
        }
    }
}
