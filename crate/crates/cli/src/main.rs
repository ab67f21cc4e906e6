//! `iscpb`: batch runs, benchmark comparisons, parameter sweeps, clutter
//! tables and the verification suites.
//!
//! Machine-readable output (summaries, error objects) goes to stdout,
//! progress to stderr. Exit codes: 0 success, 1 verification failure,
//! 2 infeasible, 3 invalid input, 4 solver or internal failure.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iscpb_core::planner::PlannerError;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "iscpb", version, about = "UAV sensing/charging/collection/backhaul planner")]
struct Cli {
    /// Scenario document (JSON), or one of the built-ins `default` and `parallel-rows`.
    #[arg(long, global = true, default_value = "default")]
    scenario: String,
    /// Output directory; the ISCPB_OUT environment variable takes precedence.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized verification points.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Concurrent solves for bench and sweep (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one scenario.
    Run,
    /// Proposed planner against the reference strategies.
    Bench {
        /// Restrict to one reference strategy (FoB, FHF, TF, SF, FETA).
        #[arg(long)]
        strategy: Option<String>,
    },
    /// One run per value of a scenario parameter.
    Sweep {
        /// `<axis>=<v1,v2,...>` with axis one of sea_state, gamma_s_th, chi, p_uav.
        #[arg(long)]
        sweep: String,
    },
    /// Morchin backscattering table over grazing angle and sea state.
    ClutterCurve,
    /// Property suites; nonzero exit if any check fails.
    Verify {
        /// Scales one constant of the analytic sensing gradient (negative control).
        #[arg(long, default_value_t = 1.0, hide = true)]
        mutate_gradient: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("no feasible plan: {0}")]
    Infeasible(serde_json::Value),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Solver(_) | CliError::Io(_) | CliError::Internal(_) => 4,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            CliError::ChecksFailed(_) => "verification_failed",
            CliError::Infeasible(_) => "infeasible",
            CliError::Validation(_) => "validation_error",
            CliError::Solver(_) => "solver_failure",
            CliError::Io(_) => "io_error",
            CliError::Internal(_) => "internal_error",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "status": self.status(), "exit_code": self.exit_code(), "message": self.to_string() });
        if let CliError::Infeasible(cert) = self {
            v["certificate"] = cert.clone();
        }
        v
    }
}

impl From<PlannerError> for CliError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Scenario(e) => CliError::Validation(e.to_string()),
            PlannerError::TooManyBuoys(e) => CliError::Validation(e.to_string()),
            PlannerError::Infeasible(cert) => CliError::Infeasible(serde_json::to_value(&cert).unwrap_or_default()),
            PlannerError::Solver(e) => CliError::Solver(e.to_string()),
            PlannerError::Metrics(m) => CliError::Internal(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Validation(e.to_string().trim_end().to_string());
            println!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            println!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = std::env::var_os("ISCPB_OUT").map(PathBuf::from).unwrap_or(cli.out);
    let cfg = commands::load_scenario(&cli.scenario)?;
    if cli.workers > 0 {
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    }
    match cli.command {
        Command::Run => commands::run(&cfg, &out),
        Command::Bench { strategy } => commands::bench(&cfg, &out, strategy.as_deref()),
        Command::Sweep { sweep } => commands::sweep(&cfg, &out, &sweep),
        Command::ClutterCurve => commands::clutter_curve(&cfg, &out),
        Command::Verify { mutate_gradient } => commands::verify(&out, cli.seed, mutate_gradient),
    }
}
