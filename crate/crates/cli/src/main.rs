use std::process::ExitCode;

use clap::Parser;
use unsharp_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("unsharp: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(e) = report.emit() {
        eprintln!("unsharp: cannot write output: {e}");
        return ExitCode::from(1);
    }
    if !report.failures.is_empty() {
        eprintln!("unsharp: {} check(s) failed:", report.failures.len());
        for f in &report.failures {
            eprintln!("  {f}");
        }
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
