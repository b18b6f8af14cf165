use std::process::ExitCode;

use clap::Parser;
use fnnsel::cli::{run, Cli};
use fnnsel::report::write_file;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| match &out.out {
        Some(path) => write_file(path, &out.report),
        None => {
            print!("{}", out.report);
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
