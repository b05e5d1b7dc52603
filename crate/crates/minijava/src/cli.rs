//! Command-line front end shared by the `minijava` binaries.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "minijava", about = "Compile and unit-test a Java-subset workspace")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoverageFormat {
    Json,
    Clover,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Type-check every source file and print javac-style diagnostics.
    Compile { workspace: PathBuf },
    /// Compile, then run one JUnit 4 test class.
    Test {
        workspace: PathBuf,
        /// Fully qualified or simple name of the test class.
        #[arg(long)]
        class: String,
        #[arg(long)]
        coverage_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: CoverageFormat,
    },
}

pub fn main_with_args(args: impl IntoIterator<Item = String>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("minijava: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> std::io::Result<ExitCode> {
    match cli.command {
        Command::Compile { workspace } => {
            let outcome = crate::compile_workspace(&workspace)?;
            eprint!("{}", outcome.log);
            Ok(if outcome.success() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Test { workspace, class, coverage_out, format } => {
            let report = crate::test_workspace(&workspace, &class)?;
            let Some(run) = report.run else {
                eprint!("{}", report.compile.log);
                return Ok(ExitCode::from(1));
            };
            print!("{}", run.stdout);
            print!("{}", run.log);
            if let Some(path) = coverage_out {
                let text = match format {
                    CoverageFormat::Json => run.coverage.to_json(),
                    CoverageFormat::Clover => run.coverage.to_clover(),
                };
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(path, text)?;
            }
            Ok(if run.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
