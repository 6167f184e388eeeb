//! `ptdil`: dilation, simulation, sweep, pulse, fit and verification jobs.

mod commands;
mod config;
mod fitinput;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Needs, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(#[from] ptdilation::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "ValidationError",
            CliError::Input(_) => "InputError",
            CliError::Numeric(e) => e.name(),
            CliError::Io { .. } => "IoError",
            CliError::Check(_) => "CheckFailed",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Input(_) => 1,
            CliError::Numeric(_) | CliError::Io { .. } | CliError::Check(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ptdil", version, about = "Hermitian dilation of the PT-symmetric qubit")]
struct Cli {
    #[command(flatten)]
    common: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the config file.
#[derive(Debug, Args)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (beats PTDIL_OUT_DIR and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Comma-separated list of r values.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    r_list: Option<Vec<f64>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    t0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    t1: Option<f64>,
    #[arg(long, global = true)]
    n_nodes: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    margin: Option<f64>,
    #[arg(long, global = true)]
    substeps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shots per pulse sequence for synthetic measurements.
    #[arg(long, global = true)]
    repetitions: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    p_e: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// A-series CSV and diagnostics JSON per r.
    Dilate,
    /// Post-selected trajectory per r with the analytic oracle.
    Simulate,
    /// P0 matrix over r_list, plus a noisy matrix when repetitions > 0.
    Sweep,
    /// Drive program per r, optionally audited in the lab frame.
    Pulses {
        #[arg(long)]
        lab_audit: bool,
    },
    /// Fits r to trajectory or matrix CSVs.
    Fit {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
    },
    /// Checks the dilation invariants per r.
    Verify,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(r) = self.r {
            cfg.r = Some(r);
            cfg.r_list = None;
        }
        if let Some(list) = &self.r_list {
            cfg.r_list = Some(list.clone());
        }
        if let Some(v) = self.t0 {
            cfg.grid.t0 = v;
        }
        if let Some(v) = self.t1 {
            cfg.grid.t1 = v;
        }
        if let Some(v) = self.n_nodes {
            cfg.grid.n_nodes = v;
        }
        if let Some(v) = self.margin {
            cfg.margin = v;
        }
        if let Some(v) = self.substeps {
            cfg.substeps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        if let Some(v) = self.p_e {
            cfg.p_e = v;
        }
    }
}

fn needs(command: &Command) -> Needs {
    match command {
        Command::Sweep => Needs { r_values: true, r_list: true, full_nv: false },
        Command::Pulses { lab_audit } => Needs { r_values: true, full_nv: *lab_audit, ..Needs::default() },
        Command::Fit { .. } => Needs::default(),
        _ => Needs { r_values: true, ..Needs::default() },
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path).map_err(|e| CliError::Validation(vec![e]))?,
        None => RunConfig::default(),
    };
    cli.common.apply(&mut cfg);
    let errs = cfg.validate(needs(&cli.command));
    if !errs.is_empty() {
        return Err(CliError::Validation(errs));
    }
    let out_dir = cfg.resolve_output_dir(cli.common.out.as_deref());
    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    // destination and pool size do not affect results, so they stay out of the hash
    cfg.output_dir = None;
    cfg.workers = None;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))?;
    let job = commands::Job { cfg, out_dir };
    pool.install(|| match &cli.command {
        Command::Dilate => commands::dilate(&job),
        Command::Simulate => commands::simulate(&job),
        Command::Sweep => commands::sweep(&job),
        Command::Pulses { lab_audit } => commands::pulses(&job, *lab_audit),
        Command::Fit { input } => commands::fit(&job, input),
        Command::Verify => commands::verify(&job),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(e.exit_code())
        }
    }
}
