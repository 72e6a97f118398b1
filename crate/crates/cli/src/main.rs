use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use stackgov_cli::run::{self, batch_entry, batch_exit_code, CliError, Command, Overrides};
use stackgov_core::TieBreakMode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tie {
    Optimistic,
    Pessimistic,
}

/// Stackelberg equilibrium solvers for games and AI governance scenarios.
#[derive(Debug, Parser)]
#[command(name = "stackgov", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario files (TOML or JSON).
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// CSV output path; a directory with --batch.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid resolution for verification, transfers or finite governance mode.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    tie: Option<Tie>,
    #[arg(long)]
    seed: Option<u64>,
    /// Solve every path concurrently and print a JSON array.
    #[arg(long)]
    batch: bool,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("stackgov: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Output(format!("stdout: {e}")))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { run::EXIT_USAGE } else { run::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let overrides = Overrides {
        out: args.out,
        grid: args.grid,
        tie: args.tie.map(|t| match t {
            Tie::Optimistic => TieBreakMode::Optimistic,
            Tie::Pessimistic => TieBreakMode::Pessimistic,
        }),
        seed: args.seed,
    };

    if args.batch {
        if let Some(dir) = &overrides.out {
            if let Err(e) = std::fs::create_dir_all(dir) {
                return fail(&CliError::Output(format!("{}: {e}", dir.display())));
            }
        }
        let results = run::run_batch(args.command, &args.paths, &overrides);
        let entries: Vec<_> = args.paths.iter().zip(&results).map(|(p, r)| batch_entry(p, r)).collect();
        let text = serde_json::to_string_pretty(&entries).expect("reports serialize");
        if let Err(e) = emit(&text) {
            return fail(&e);
        }
        return ExitCode::from(batch_exit_code(&results) as u8);
    }

    if args.paths.len() != 1 {
        return fail(&CliError::Usage(format!("expected one scenario path, got {}; pass --batch for several", args.paths.len())));
    }
    match run::run(args.command, &args.paths[0], &overrides) {
        Ok(report) => {
            if let Err(e) = emit(&report.to_json()) {
                return fail(&e);
            }
            if report.verified == Some(false) {
                eprintln!("stackgov: verification failed for {}", report.source);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => fail(&e),
    }
}
