//! `tigm`: solve, classify, build chains and sample from the command line.
//!
//! Exit codes: 0 success, 2 bad input, 3 no measure (divergent activities),
//! 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tigm::solve::GraphKind;

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "tigm", version, about = "Gibbs measures of the countable-state hard-core model on the Cayley tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print Λ1, Λ2 and the critical activity for a loop activity
    Thresholds {
        /// Loop activity; accepts fractions such as 49/9
        #[arg(long, allow_negative_numbers = true, value_parser = parse_number)]
        lambda: f64,
    },
    /// Every positive boundary-law solution for a spec file
    Solve {
        spec: PathBuf,
        #[arg(long)]
        graph: Option<GraphKind>,
    },
    /// Regime report for equal loop activities and total activity Λ
    Classify {
        #[arg(long, allow_negative_numbers = true, value_parser = parse_number)]
        lambda: f64,
        /// Total activity; `inf` for a divergent series
        #[arg(long = "Lambda", allow_negative_numbers = true, value_parser = parse_number)]
        total: f64,
        #[arg(long, default_value = "three-loop")]
        graph: GraphKind,
    },
    /// Transition matrix and stationary law with a verification report
    Chain {
        spec: PathBuf,
        #[arg(long)]
        window: u32,
        /// Only this solution (0-based, in solver order)
        #[arg(long)]
        solution: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Directory for the CSV files
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Sample trees from the chain and report marginals
    Sample {
        spec: PathBuf,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        trees: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        solution: usize,
        /// Write the sampled trees here as JSON
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Closed-form against oracle counts over a grid, as CSV
    Sweep {
        /// Comma-separated loop activities
        #[arg(long = "lambda-grid", default_value = "")]
        lambda_grid: String,
        /// Comma-separated totals, or `thresholds` for six values around Λ1 and Λ2
        #[arg(long = "Lambda-grid", default_value = "thresholds")]
        total_grid: String,
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long, default_value_t = 200)]
        starts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Dump a curve pair over λ instead: `f,g` or `h,delta`
        #[arg(long = "emit-curves")]
        emit_curves: Option<String>,
        #[arg(long, allow_negative_numbers = true, value_parser = parse_number)]
        x: Option<f64>,
        /// Total activity for the curve dump
        #[arg(long = "Lambda", allow_negative_numbers = true, value_parser = parse_number)]
        total: Option<f64>,
        /// Points in the curve dump
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// A decimal or a fraction `p/q`.
fn parse_number(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let q: f64 = q.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            p / q
        }
        None => s.trim().parse().map_err(|e| format!("{s}: {e}"))?,
    };
    if value.is_nan() {
        return Err(format!("{s} is not a number"));
    }
    Ok(value)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<tigm::Error>() {
        Some(tigm::Error::DivergentActivities) => 3,
        Some(tigm::Error::NumericalFailure(_) | tigm::Error::NotUnique { .. }) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Thresholds { lambda } => commands::thresholds(lambda),
        Command::Solve { spec, graph } => commands::solve(&spec, graph),
        Command::Classify { lambda, total, graph } => commands::classify(lambda, total, graph),
        Command::Chain { spec, window, solution, format, out_dir } => {
            commands::chain(&spec, window, solution, matches!(format, Format::Csv), &out_dir)
        }
        Command::Sample { spec, depth, trees, seed, solution, samples } => {
            commands::sample(&spec, depth, trees, seed, solution, samples.as_deref())
        }
        Command::Sweep { lambda_grid, total_grid, out, starts, seed, emit_curves, x, total, points } => {
            match emit_curves {
                Some(pair) => commands::curves(&pair, x, total, points, &out),
                None => commands::sweep(&lambda_grid, &total_grid, &out, starts, seed),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            if code == 3 {
                eprintln!("no TIGM: {err:#}");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}
