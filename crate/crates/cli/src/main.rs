//! `coevo`: generate, repair and evolve unit tests for the public methods of a project.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coevo::config::{CoevoConfig, ConfigError};
use coevo::gateway::{CompletionParams, Gateway, Transport};
use coevo::harness::{HarnessError, ShellHarness};
use coevo::ingest::{describe, scan_project};
use coevo::ledger::{SessionHeader, SessionLedger};
use coevo::metrics::{compute_metrics, export_suite, render_table, FocalClass};
use coevo::orchestrator::run_project;
use coevo::profile::FrameworkProfile;
use coevo::prompt::PromptStudio;
use coevo::repair::RepairEnv;

#[derive(Debug, Parser)]
#[command(name = "coevo", version, about = "Co-evolve LLM-generated unit tests through template repair and coverage feedback")]
struct Cli {
    /// Configuration file.
    #[arg(long, global = true, default_value = "coevo.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the focal methods of the project.
    Ingest {
        /// Print the focal units as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Generate suites for every focal method and write the session ledger.
    Generate(RunArgs),
    /// Re-run a session against recorded transcripts.
    Replay(RunArgs),
    /// Compute metrics over a ledger.
    Report {
        #[arg(long)]
        ledger: PathBuf,
        /// Print the metrics as JSON instead of a table.
        #[arg(long)]
        json: bool,
        /// Also write the JSON summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the final suites of a ledger with their provenance records.
    Export {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Ledger path; defaults to `ledger.jsonl` in the output directory.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Transcript directory, overriding the configuration.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Only these focal methods, by id or slug.
    #[arg(long = "focal")]
    focals: Vec<String>,
}

/// Exit status: 0 success, 1 partial failure, 2 configuration error.
enum Failure {
    Partial(String),
    Config(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(m)) => {
            eprintln!("coevo: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("coevo: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest { json } => ingest(&load_config(&cli.config)?, json),
        Command::Generate(args) => generate(load_config(&cli.config)?, args, false),
        Command::Replay(args) => generate(load_config(&cli.config)?, args, true),
        Command::Report { ledger, json, out } => report(&ledger, json, out.as_deref()),
        Command::Export { ledger, out } => {
            let out = match out {
                Some(o) => o,
                None => load_config(&cli.config)?.project.out_dir.join("suites"),
            };
            export(&ledger, &out)
        }
    }
}

fn load_config(path: &Path) -> Result<CoevoConfig, Failure> {
    let config = CoevoConfig::load(path)?;
    config.validate()?;
    Ok(config)
}

fn ingest(config: &CoevoConfig, json: bool) -> Result<(), Failure> {
    let profile = config.framework_profile()?;
    let focals = scan_project(&config.project.root, &config.project.source_root, &profile).map_err(|e| Failure::Config(e.to_string()))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&focals).expect("focal units serialize"));
    } else {
        for f in &focals {
            println!("{}", describe(f));
        }
    }
    Ok(())
}

fn generate(mut config: CoevoConfig, args: RunArgs, replay: bool) -> Result<(), Failure> {
    if let Some(t) = args.transcripts {
        config.gateway.transcript_dir = Some(t);
    }
    if replay {
        config.gateway.mode = Transport::Replay;
        if config.gateway.transcript_dir.is_none() {
            return Err(Failure::Config("replay needs a transcript directory".into()));
        }
    }
    let profile = config.framework_profile()?;
    let templates = config.prompt_templates()?;
    let mut focals =
        scan_project(&config.project.root, &config.project.source_root, &profile).map_err(|e| Failure::Config(e.to_string()))?;
    if !args.focals.is_empty() {
        focals.retain(|f| args.focals.iter().any(|s| *s == f.id || *s == f.slug));
    }
    let gateway = Gateway::new(config.gateway.clone()).map_err(|e| Failure::Config(e.to_string()))?;
    let harness =
        ShellHarness::new(config.project.root.clone(), config.project.work_dir.clone(), config.toolchain.clone(), profile.clone());
    let studio = PromptStudio::new(templates, profile.clone(), config.run.clone());
    let params = CompletionParams { temperature: config.run.temperature, model_id: config.gateway.model_id.clone() };
    let env = RepairEnv { harness: &harness, profile: &profile, studio: &studio, config: &config.run, params: &params };
    let results = run_project(&focals, &env, &gateway).map_err(|e| match e {
        HarnessError::ToolchainMissing(_) => Failure::Config(e.to_string()),
        other => Failure::Partial(other.to_string()),
    })?;

    let header = SessionHeader {
        model_id: config.gateway.model_id.clone(),
        transport: config.gateway.mode,
        profile: config.profile.clone(),
        config: config.run.clone(),
    };
    let ledger = SessionLedger::new(header, results);
    let name = if replay { "replay-ledger.jsonl" } else { "ledger.jsonl" };
    let path = args.ledger.unwrap_or_else(|| config.project.out_dir.join(name));
    ledger.write(&path).map_err(|e| Failure::Partial(e.to_string()))?;
    let metrics = compute_metrics(&ledger, &profile);
    let summary = path.with_extension("summary.json");
    fs::write(&summary, serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n")
        .map_err(|e| Failure::Partial(format!("cannot write {}: {e}", summary.display())))?;
    print!("{}", render_table(&metrics));
    println!("ledger: {}", path.display());
    partial_status(&metrics.per_focal.iter().map(|f| f.class).collect::<Vec<_>>())
}

fn partial_status(classes: &[FocalClass]) -> Result<(), Failure> {
    let failed = classes.iter().filter(|c| **c != FocalClass::Pass).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Partial(format!("{failed} of {} focal methods did not pass", classes.len())))
    }
}

fn read_ledger(path: &Path) -> Result<(SessionLedger, FrameworkProfile), Failure> {
    let ledger = SessionLedger::read(path).map_err(|e| Failure::Config(e.to_string()))?;
    let profile = if ledger.header.profile.ends_with(".toml") {
        FrameworkProfile::load(Path::new(&ledger.header.profile))
    } else {
        FrameworkProfile::builtin(&ledger.header.profile)
    }
    .map_err(|e| Failure::Config(e.to_string()))?;
    Ok((ledger, profile))
}

fn report(path: &Path, json: bool, out: Option<&Path>) -> Result<(), Failure> {
    let (ledger, profile) = read_ledger(path)?;
    let metrics = compute_metrics(&ledger, &profile);
    let text = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
    if let Some(out) = out {
        fs::write(out, &text).map_err(|e| Failure::Partial(format!("cannot write {}: {e}", out.display())))?;
    }
    if json {
        print!("{text}");
    } else {
        print!("{}", render_table(&metrics));
    }
    Ok(())
}

fn export(path: &Path, out: &Path) -> Result<(), Failure> {
    let (ledger, _) = read_ledger(path)?;
    let mut missing = 0;
    for result in &ledger.focals {
        let files = export_suite(result, out).map_err(|e| Failure::Partial(format!("cannot export {}: {e}", result.focal.id)))?;
        if files.is_empty() {
            missing += 1;
            println!("{}\tno final suite", result.focal.id);
        }
        for f in files {
            println!("{}\t{}", result.focal.id, f.display());
        }
    }
    if missing > 0 {
        return Err(Failure::Partial(format!("{missing} focal methods had no final suite")));
    }
    Ok(())
}
