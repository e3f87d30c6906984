use std::process::ExitCode;

use clap::Parser;
use surrocal_cli::{run, Cli, RunConfig, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("CALIB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is set once");
            }
            _ => {
                eprintln!("error: CALIB_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
        }
    }
    let result = RunConfig::from_command(&cli.command).and_then(|cfg| run(&cfg));
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
