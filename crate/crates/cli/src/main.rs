mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Globals};
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dialoforge: error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("Run 'dialoforge --help' for usage.");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = args::load_config(cli.config.as_deref())?;
    let globals = Globals {
        seed: args::resolve_seed(cli.seed, file.seed)?,
        jobs: cli.jobs.or(file.jobs).unwrap_or(0),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(globals.jobs)
        .build()
        .map_err(CliError::invalid)?;
    pool.install(|| commands::dispatch(cli.command, file.rest, globals))
}
