//! `symdiag`: Jacobi diagonalization, classification, counterexample checks
//! and tensor generation from the command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 non-convergence, 3 consistency
//! violation, 4 parse error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use symdiag_core::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_INCONSISTENT: u8 = 3;
pub const EXIT_PARSE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "symdiag", version, about = "Orthogonal diagonalization of symmetric 3-tensors")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Precedence: flag, then environment,
/// then default.
#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalOpts {
    /// Stop tolerance on max |d| per sweep (scaled by max(1, ‖A‖²))
    #[arg(long, global = true, env = "SYMDIAG_TOL", default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, global = true, env = "SYMDIAG_MAX_SWEEPS", default_value_t = 100)]
    pub max_sweeps: usize,
    #[arg(long, global = true, env = "SYMDIAG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Number of starts for multi-start searches (start 0 is the identity)
    #[arg(long, global = true, env = "SYMDIAG_RESTARTS", default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, global = true, env = "SYMDIAG_PAIR_RULE", value_enum, default_value_t = PairRuleArg::Cyclic)]
    pub pair_rule: PairRuleArg,
    #[arg(long, global = true, env = "SYMDIAG_RESTRICT_QUARTER_PI")]
    pub restrict_quarter_pi: bool,
    /// Worker threads for multi-start runs (default: all cores)
    #[arg(long, global = true, env = "SYMDIAG_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, env = "SYMDIAG_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRuleArg {
    Cyclic,
    Greedy,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run Jacobi sweeps and write the trace, final W and Q
    Diagonalize {
        /// Tensor file (text or JSON)
        input: PathBuf,
        /// Skip the three-factor comparison
        #[arg(long)]
        no_trifactor: bool,
    },
    /// Class membership report as JSON
    Classify {
        input: PathBuf,
        #[arg(long, env = "SYMDIAG_REL_TOL", default_value_t = 1e-9)]
        rel_tol: f64,
        #[arg(long, env = "SYMDIAG_ABS_TOL", default_value_t = 1e-12)]
        abs_tol: f64,
        #[arg(long, env = "SYMDIAG_EIG_REL", default_value_t = 1e-8)]
        eig_rel: f64,
        /// Attach a heuristic multi-start search for rotations beating Q = I
        #[arg(long)]
        md_search: bool,
    },
    /// Counterexample, stationary-point and 2-dimensional certificates
    Verify {
        /// Starts for the Jacobi and ρ searches
        #[arg(long, default_value_t = 10_000)]
        starts: usize,
        /// Grid points per axis for the 2-dimensional certificate
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Write a tensor file
    Generate {
        #[arg(value_enum)]
        kind: GenerateKind,
        /// Example name for `paper-example`: symmetrizer-123,
        /// pd4-threequarters or lmd3
        name: Option<String>,
        #[arg(long, short = 'n', default_value_t = 3)]
        n: usize,
        /// Odeco weights, comma separated; sets n
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weights: Option<Vec<f64>>,
        /// A_123 for lmd3
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        g: f64,
        /// Common stationary ratio for lmd3
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Output path (default: inside --out-dir)
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerateKind {
    Odeco,
    Pd,
    Random,
    PaperExample,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn new(code: u8, msg: impl Into<String>) -> Self {
        Self {
            code,
            msg: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Json(_) => EXIT_PARSE,
            Error::Inconsistent(_) => EXIT_INCONSISTENT,
            _ => EXIT_OTHER,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_OTHER, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Diagonalize { input, no_trifactor } => {
            commands::diagonalize(&cli.global, input, !no_trifactor)
        }
        Command::Classify {
            input,
            rel_tol,
            abs_tol,
            eig_rel,
            md_search,
        } => commands::classify(
            &cli.global,
            input,
            symdiag_core::classify::Tolerances {
                abs_tol: *abs_tol,
                rel_tol: *rel_tol,
                eig_rel: *eig_rel,
            },
            *md_search,
        ),
        Command::Verify {
            starts,
            grid,
            samples,
        } => commands::verify(&cli.global, *starts, *grid, *samples),
        Command::Generate {
            kind,
            name,
            n,
            weights,
            g,
            gamma,
            format,
            output,
        } => commands::generate(
            &cli.global,
            &commands::GenerateArgs {
                kind: *kind,
                name: name.clone(),
                n: *n,
                weights: weights.clone(),
                g: *g,
                gamma: *gamma,
                format: *format,
                output: output.clone(),
            },
        ),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
