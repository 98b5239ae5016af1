use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ibvp_cli::{run, CliError, Command, Format, LoadedConfig, Options};

#[derive(Parser)]
#[command(
    name = "ibvp",
    version,
    about = "Impulsive boundary value problems on the half-line"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the standing hypotheses H1..H7 on the configured problem.
    Validate(Args),
    /// Tabulate the Green's function and its one-sided t-derivatives.
    Green(Args),
    /// Search for fixed points of the integral operator from several starts.
    Solve(Args),
    /// Estimate the asymptotic constants and evaluate the existence conditions.
    Certify(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Solver tolerance (overrides numerics.solver.tol).
    #[arg(long)]
    tol: Option<f64>,
    /// Seed of the random hypothesis probes (overrides numerics.sampling.seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

fn execute(command: Command, args: &Args) -> Result<(), CliError> {
    let cfg = LoadedConfig::load(&args.config)?;
    let opts = Options {
        format: match args.format {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        },
        tol: args.tol,
        seed: args.seed,
    };
    let text = run(&cfg, command, &opts)?.render()?;
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Sub::Validate(a) => (Command::Validate, a),
        Sub::Green(a) => (Command::Green, a),
        Sub::Solve(a) => (Command::Solve, a),
        Sub::Certify(a) => (Command::Certify, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
