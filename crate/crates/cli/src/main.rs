mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Version of the JSON documents written to standard output.
pub const SCHEMA_VERSION: u32 = 1;

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
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {} threads: {}", n, e);
            return ExitCode::from(1);
        }
    }

    let ctx = commands::Context {
        seed: cli.seed,
        invocation: invocation(),
    };
    let result = match &cli.command {
        Command::Corr(a) => commands::corr(&ctx, a),
        Command::Theory(a) => commands::theory(&ctx, a),
        Command::Dcor(a) => commands::dcor(&ctx, a),
        Command::Ddc(a) => commands::ddc(&ctx, a),
        Command::Rpca(a) => commands::rpca(&ctx, a),
        Command::Sim(a) => commands::sim(&ctx, a),
        Command::Bench(a) => commands::bench(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

/// The command line as typed, program name reduced to its file name.
fn invocation() -> String {
    let mut parts: Vec<String> = std::env::args().collect();
    if let Some(first) = parts.first_mut() {
        if let Some(name) = std::path::Path::new(first.as_str()).file_name() {
            *first = name.to_string_lossy().into_owned();
        }
    }
    parts.join(" ")
}
