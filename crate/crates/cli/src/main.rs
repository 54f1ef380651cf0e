//! `wptlab <subcommand> --config <path> [--out <dir>] [--quiet]`
//!
//! Exit status 0 when every declared tolerance holds, 1 on a tolerance or
//! numerical failure, 2 when the configuration is malformed.

mod config;
mod run;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Config, SchemaError};
use run::{execute, Command};

#[derive(Parser, Debug)]
#[command(name = "wptlab", version, about = "Parallel transport experiments on Wasserstein geodesics")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match std::fs::read_to_string(&cli.config)
        .map_err(|e| SchemaError(format!("cannot read {}: {e}", cli.config.display())))
        .and_then(|text| Config::parse(&text))
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };

    let report = match execute(cli.command, &config) {
        Ok(r) => r,
        Err(e) if e.is::<SchemaError>() => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = report.write(&cli.out, cli.command, &config) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }

    if !cli.quiet {
        for row in &report.table.rows {
            let line: Vec<String> = row.iter().map(|c| c.render()).collect();
            println!("{}", line.join("  "));
        }
    }
    if report.passed() {
        if !cli.quiet {
            println!("all {} checks passed; wrote {}", report.checks.len(), cli.out.display());
        }
        ExitCode::SUCCESS
    } else {
        for c in report.failures() {
            eprintln!("tolerance failure: {}", c.describe());
        }
        ExitCode::from(1)
    }
}
