mod args;
mod commands;
mod records;
mod report;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Format};
use report::Report;

const EXIT_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn render(report: &Report, format: Format) -> Result<String, csv::Error> {
    Ok(match format {
        Format::Table => report.to_table(),
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv()?,
    })
}

fn execute(cli: &Cli) -> Result<Report, Box<dyn std::error::Error + Send + Sync>> {
    let go = || commands::run(&cli.command, cli.global.seed);
    match cli.global.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(t))
            .build()?
            .install(go),
        None => go(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let text = match render(&report, cli.global.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let written = match &cli.global.output {
        Some(path) => fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_ERROR);
    }
    if report.failed() {
        ExitCode::from(EXIT_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}
