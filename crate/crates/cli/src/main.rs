use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use varinverse_cli::error::EXIT_SCHEMA;
use varinverse_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    let mut code = result.code;
    if let Some(report) = &result.report {
        let written = match &cli.out {
            Some(path) => {
                std::fs::write(path, report).map_err(|e| format!("{}: {e}", path.display()))
            }
            None => std::io::stdout()
                .write_all(report.as_bytes())
                .map_err(|e| e.to_string()),
        };
        if let Err(e) = written {
            eprintln!("cannot write report: {e}");
            code = EXIT_SCHEMA;
        }
    }
    if !result.message.is_empty() {
        eprintln!("{}", result.message);
    }
    ExitCode::from(code as u8)
}
