mod args;
mod commands;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = Cli::command().get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let result = match &cli.command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Synthesize(a) => commands::synthesize(a),
        Command::Train(a) => commands::train(a, sub),
        Command::Evaluate(a) => commands::evaluate_cmd(a, sub),
        Command::Ablate(a) => commands::ablate(a, sub),
        Command::ExportAttention(a) => commands::export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
