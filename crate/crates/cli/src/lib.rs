//! Command-line front end: JSON documents in, JSON reports out.

pub mod commands;
pub mod corpus;
pub mod error;
pub mod schema;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use commands::{execute_to_outcome, Outcome, Request, Settings};
use error::CliError;
use schema::{LagrangianFile, MultiplierFile, SeedFile, SystemFile};

#[derive(Debug, Parser)]
#[command(
    name = "varinverse",
    version,
    about = "Construct and certify Lagrangians for given equations of motion"
)]
pub struct Cli {
    /// Random sample points per condition.
    #[arg(long, global = true, default_value_t = 64)]
    pub samples: usize,
    /// Condition tolerance (default 1e-8 second order, 1e-5 first order).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Tolerance for the discrete variational certificate.
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub certify_tol: f64,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Time step for flows and discrete trajectories.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub dt: f64,
    /// Trajectories used by the certificate.
    #[arg(long, global = true, default_value_t = 2)]
    pub trajectories: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the integrability conditions of a multiplier or first-order action.
    Check {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        multiplier: Option<PathBuf>,
        #[arg(long)]
        omega0: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Use the flow construction even for linear systems.
        #[arg(long)]
        flow: bool,
    },
    /// Find a multiplier (or take one) and build the Lagrangian.
    Build {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, conflicts_with = "ansatz")]
        multiplier: Option<PathBuf>,
        #[arg(long)]
        ansatz: Option<String>,
    },
    /// Build a first-order action from a seed two-form.
    FirstOrder {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        omega0: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Grid intervals on [0, t].
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long)]
        flow: bool,
    },
    /// Certify a Lagrangian against the equations on discrete trajectories.
    Verify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        multiplier: Option<PathBuf>,
        #[arg(long)]
        lagrangian: Option<PathBuf>,
        #[arg(long)]
        omega0: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        flow: bool,
    },
    /// Run the bundled example corpus against its expected exit codes.
    Corpus {
        /// Run only examples whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
}

impl Cli {
    pub fn settings(&self) -> Settings {
        Settings {
            samples: self.samples,
            tol: self.tol,
            certify_tol: self.certify_tol,
            seed: self.seed,
            dt: self.dt,
            trajectories: self.trajectories,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn read_opt<T>(
    path: Option<&PathBuf>,
    parse: fn(&str) -> Result<T, CliError>,
) -> Result<Option<T>, CliError> {
    path.map(|p| read(p).and_then(|s| parse(&s))).transpose()
}

/// Reads the files named on the command line.
pub fn request(cmd: &Command) -> Result<Request, CliError> {
    let system = |p: &PathBuf| read(p).and_then(|s| SystemFile::from_json(&s));
    Ok(match cmd {
        Command::Check {
            system: s,
            multiplier,
            omega0,
            t,
            flow,
        } => Request::Check {
            system: system(s)?,
            multiplier: read_opt(multiplier.as_ref(), MultiplierFile::from_json)?,
            omega0: read_opt(omega0.as_ref(), SeedFile::from_json)?,
            horizon: *t,
            flow: *flow,
        },
        Command::Build {
            system: s,
            multiplier,
            ansatz,
        } => Request::Build {
            system: system(s)?,
            multiplier: read_opt(multiplier.as_ref(), MultiplierFile::from_json)?,
            ansatz: ansatz.clone(),
        },
        Command::FirstOrder {
            system: s,
            omega0,
            t,
            grid,
            flow,
        } => Request::FirstOrder {
            system: system(s)?,
            omega0: read_opt(omega0.as_ref(), SeedFile::from_json)?,
            horizon: *t,
            grid: *grid,
            flow: *flow,
        },
        Command::Verify {
            system: s,
            multiplier,
            lagrangian,
            omega0,
            t,
            flow,
        } => Request::Verify {
            system: system(s)?,
            multiplier: read_opt(multiplier.as_ref(), MultiplierFile::from_json)?,
            lagrangian: read_opt(lagrangian.as_ref(), LagrangianFile::from_json)?,
            omega0: read_opt(omega0.as_ref(), SeedFile::from_json)?,
            horizon: *t,
            flow: *flow,
        },
        Command::Corpus { .. } => {
            return Err(CliError::Schema("the corpus takes no input files".into()))
        }
    })
}

/// Report text plus exit code for a parsed command line.
pub struct RunResult {
    pub code: i32,
    pub report: Option<String>,
    pub message: String,
}

pub fn run(cli: &Cli) -> RunResult {
    let settings = cli.settings();
    if let Command::Corpus { filter } = &cli.command {
        let (code, report, message) = corpus::run_corpus(filter.as_deref(), &settings);
        return RunResult {
            code,
            report: Some(render(&report)),
            message,
        };
    }
    let outcome = match request(&cli.command) {
        Ok(req) => execute_to_outcome(&req, &settings),
        Err(e) => Outcome {
            code: e.exit_code(),
            report: None,
            message: e.to_string(),
        },
    };
    RunResult {
        code: outcome.code,
        report: outcome.report.map(|r| render(&r)),
        message: outcome.message,
    }
}

pub fn render<T: serde::Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}
