use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sdl_cli::{run, Command};

/// Singular diffusion laboratory runner.
#[derive(Debug, Parser)]
#[command(name = "sdl", version)]
struct Args {
    /// What to do with the configuration.
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Replace an existing run directory.
    #[arg(long)]
    force: bool,
    /// Worker threads for `sweep` (default: available processors).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args.command, &args.config, args.force, args.workers) {
        Ok(summary) => {
            println!("{}", summary.line());
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
