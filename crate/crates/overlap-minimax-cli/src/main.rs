mod analyze;
mod args;
mod checks;
mod experiments;
mod failure;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::Failure;

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Analyze(a) => analyze::analyze(a),
        Command::Sensitivity(a) => analyze::sensitivity(a),
        Command::Coverage(a) => experiments::coverage(a),
        Command::Simulate(a) => experiments::simulate(a),
        Command::SampleOptions(a) => experiments::sample_options(a),
        Command::Confseq(a) => experiments::confseq(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are not failures.
            let code = if e.use_stderr() { failure::code::VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code as u8)
        }
    }
}
