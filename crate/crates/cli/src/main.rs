mod commands;
mod io;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nclb_core::algebra::DEFAULT_INDEX_TRIALS;
use nclb_core::report::Status;
use nclb_core::Error;

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Parser, Debug)]
#[command(name = "nclb", version, about = "Exact and sampled checks for reduced left-invariant Laplacians")]
pub struct Cli {
    /// Emit the JSON report instead of a table.
    #[arg(long, global = true)]
    pub json: bool,

    /// Sampling seed (decimal or 0x-prefixed hex).
    #[arg(long, global = true, env = "NCLB_SEED", value_parser = parse_seed)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Jacobi identity of a structure-constant file.
    CheckAlgebra { file: PathBuf },
    /// Index of the algebra from seeded random covectors.
    Index {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INDEX_TRIALS)]
        trials: usize,
    },
    /// Whether a coordinate subspace is a coisotropic commutative ideal for a form.
    Coisotropic {
        file: PathBuf,
        #[arg(long)]
        form: PathBuf,
        /// 1-based basis indices spanning the subspace.
        #[arg(long, value_delimiter = ',', required = true)]
        ideal: Vec<usize>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Bundled group models.
    #[command(subcommand)]
    Model(ModelCommand),
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Metric parameter alpha (rational).
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Metric parameter beta (rational).
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum ModelCommand {
    /// Run every registered check on a model.
    Verify {
        name: String,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Reduced operator and its normalized first-order split.
    Reduce {
        name: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "J", allow_hyphen_values = true)]
        j: Option<String>,
        #[arg(long = "E", allow_hyphen_values = true)]
        e: Option<String>,
    },
    /// Residual of the Laplace equation for a mode, an expression file or a CSV field.
    Residual {
        name: String,
        #[command(flatten)]
        params: ParamArgs,
        /// `mode`, a CSV field (`coordinates..., re, im`) or a file holding an expression.
        #[arg(long)]
        psi: String,
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        nu: Option<String>,
        #[arg(long = "E", allow_hyphen_values = true)]
        e: Option<String>,
        #[arg(long = "J", allow_hyphen_values = true)]
        j: Option<String>,
        /// `n:lo:hi` for every axis or one triple per axis, comma separated.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Field from sampled spectral data by the inverse transform.
    Reconstruct {
        name: String,
        /// CSV with columns `k, J, re, im` on a tensor grid.
        #[arg(long)]
        phi: PathBuf,
        #[arg(long = "E", allow_hyphen_values = true)]
        e: String,
        #[arg(long)]
        grid: String,
        /// Relative refinement tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Write the reconstructed field as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

/// Errors caused by the invocation or its inputs rather than by a failed check.
fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Input(_)
            | Error::Parse { .. }
            | Error::Parameter(_)
            | Error::UnsupportedModel(_)
            | Error::MissingVariable(_)
            | Error::DegenerateForm(_)
            | Error::Precondition(_)
            | Error::SingularMeasure(_)
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match commands::execute(&cli.command, seed) {
        Ok(doc) => {
            let text = if cli.json { format!("{}\n", doc.to_json()) } else { doc.to_table() };
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            match doc.overall {
                Status::Pass => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage_error(&e) { 2 } else { 1 })
        }
    }
}
