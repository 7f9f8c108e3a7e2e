use std::process::ExitCode;

use clap::Parser;
use srcsel_cli::commands::run;
use srcsel_cli::{Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.common.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))
            .and_then(|()| run(cli)),
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("srcsel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
