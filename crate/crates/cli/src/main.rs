use std::process::ExitCode;

use clap::Parser;
use graphot_cli::commands::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.summary());
            if !cli.quiet {
                for (k, v) in &report.notes {
                    println!("{k}: {v}");
                }
                for path in &report.outputs {
                    println!("wrote {path}");
                }
                println!("wall time {:.2} s", report.wall_time_s);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
