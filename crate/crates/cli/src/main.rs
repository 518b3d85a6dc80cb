mod args;
mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;
use output::OutDir;

fn run(cli: &Cli) -> Result<String, CliError> {
    let mut out = OutDir::create(&cli.out_dir)?;
    let summary = match &cli.command {
        Command::Contours(a) => commands::contours(a, &mut out),
        Command::Jsa(a) => commands::jsa(a, &mut out),
        Command::PuritySweep(a) => commands::purity_sweep_cmd(a, &mut out),
        Command::Stats(a) => commands::stats(a, &mut out),
        Command::SetCalibrate(a) => commands::set_calibrate(a, &mut out),
        Command::Overlap(a) => commands::overlap(a, &mut out),
        Command::Fringes(a) => commands::fringes(a, &mut out),
    }?;
    debug_assert!(!out.written().is_empty());
    Ok(summary)
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let flag = e
                .get(clap::error::ContextKind::InvalidArg)
                .map(|v| v.to_string().split(' ').next().unwrap_or_default().to_string())
                .unwrap_or_default();
            let rendered = e.render().to_string();
            let message = rendered.trim().trim_start_matches("error: ").lines().next().unwrap_or("").to_string();
            return fail(&CliError::Arguments { flag, message });
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
