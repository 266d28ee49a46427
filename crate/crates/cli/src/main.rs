mod args;
mod commands;
mod failure;
mod pipeline;
mod sidecar;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Embed(a) => commands::cmd_embed(a, &mut out),
        Command::Extract(a) => commands::cmd_extract(a, &mut out),
        Command::Attack(a) => commands::cmd_attack(a, &mut out),
        Command::Solve(a) => commands::cmd_solve(a, &mut out),
        Command::Sweep(a) => commands::cmd_sweep(a, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sidemark: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
