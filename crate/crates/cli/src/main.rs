mod args;
mod commands;
mod failure;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::Failure;
use settings::{Settings, SettingsFile};

fn run(cli: Cli) -> Result<(), Failure> {
    let file = SettingsFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Compress(r) => commands::compress_cmd(&Settings::resolve(&file, r)?),
        Command::Evaluate(a) => commands::evaluate(&file, &Settings::resolve(&file, &a.run)?, a),
        Command::MrrExperiment(a) => commands::mrr(&Settings::resolve(&file, &a.run)?, a),
        Command::SigmaSweep(a) => commands::sweep(&Settings::resolve(&file, &a.run)?, a),
        Command::ExportCheck(a) => commands::export_check(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code as u8)
        }
    }
}
