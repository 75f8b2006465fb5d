mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Context;
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("narx-prune: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<Vec<std::path::PathBuf>, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(CliError::internal)?;
    }
    let ctx = Context {
        out: cli.out,
        timings: cli.timings,
    };
    match &cli.command {
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::FitBaseline(a) => commands::fit_baseline(&ctx, a),
        Command::Prune(a) => commands::prune(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Sweep(a) => commands::run_sweep(&ctx, a),
        Command::Pca(a) => commands::pca(&ctx, a),
        Command::Replay(a) => commands::replay(&ctx, &a.artifact),
    }
}
