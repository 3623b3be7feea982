use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use tracing_subscriber::EnvFilter;

use llmhar_core::experiment::{self, ExperimentConfig};
use llmhar_core::synthetic::SyntheticSpec;

#[derive(Parser)]
#[command(name = "llmhar", version, about = "LLM-based multi-resident activity recognition")]
struct Cli {
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's run directory.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Build a fine-tuning corpus from a teacher run's train sessions.
    Distill {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one corpus per session count.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Session counts, e.g. `--k 1,2,4`. Defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Merge report files into a CSV table and SVG charts.
    Report {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Generate a synthetic multi-resident home.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        /// Generator spec; the built-in five-room home is used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        sessions: usize,
        #[arg(long, default_value_t = 100)]
        events: usize,
        #[arg(long, default_value_t = 2)]
        residents: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a profile against a dataset.
    Validate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
}

fn emit(json_mode: bool, value: serde_json::Value, human: impl FnOnce() -> String) {
    if json_mode {
        println!("{value}");
    } else {
        println!("{}", human());
    }
}

async fn dispatch(cli: Cli) -> Result<ExitCode> {
    let as_json = cli.json;
    match cli.command {
        Command::Run { config, run_dir } => {
            let mut loaded = ExperimentConfig::load(&config)?;
            if let Some(dir) = run_dir {
                loaded.config.run_dir = dir;
            }
            let s = experiment::cmd_run(&loaded).await?;
            let r = &s.report;
            emit(
                as_json,
                json!({
                    "report": s.report_path,
                    "windows": s.windows,
                    "reused": s.reused,
                    "queried": s.queried,
                    "mean_f1": r.mean_f1,
                    "missed": r.missed_display,
                }),
                || {
                    format!(
                        "{} on {}: F1 {:.4}, missed {} ({} sessions, {} windows, {} reused)\nreport: {}",
                        r.info.model,
                        r.info.dataset,
                        r.mean_f1,
                        r.missed_display,
                        r.sessions.len(),
                        s.windows,
                        s.reused,
                        s.report_path.display()
                    )
                },
            );
        }
        Command::Distill { config, out } => {
            let m = experiment::cmd_distill(&ExperimentConfig::load(&config)?, &out)?;
            emit(as_json, serde_json::to_value(&m)?, || {
                format!("{} records from {} sessions -> {}", m.records, m.sessions.len(), out.display())
            });
        }
        Command::Ablate { config, out_dir, k } => {
            let ms = experiment::cmd_ablate(&ExperimentConfig::load(&config)?, &out_dir, &k)?;
            emit(as_json, serde_json::to_value(&ms)?, || {
                ms.iter()
                    .map(|m| format!("{}: {} records, {} sessions", m.corpus.display(), m.records, m.sessions.len()))
                    .collect::<Vec<_>>()
                    .join("\n")
            });
        }
        Command::Report { out_dir, reports } => {
            let out = experiment::cmd_report(&reports, &out_dir)?;
            emit(
                as_json,
                json!({
                    "csv": out.csv,
                    "json": out.json,
                    "size_chart": out.size_chart,
                    "size_points": out.size_points,
                    "ablation_chart": out.ablation_chart,
                    "ablation_points": out.ablation_points,
                }),
                || format!("wrote {} and charts to {}", out.csv.display(), out_dir.display()),
            );
        }
        Command::Synth {
            out_dir,
            spec,
            sessions,
            events,
            residents,
            seed,
        } => {
            let spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => SyntheticSpec::default_home(sessions, events, residents),
            };
            let out = experiment::cmd_synth(&spec, seed, &out_dir)?;
            emit(
                as_json,
                json!({
                    "events": out.events,
                    "profile": out.profile,
                    "manifest": out.manifest,
                    "sessions": out.sessions,
                    "event_count": out.event_count,
                }),
                || format!("{} sessions, {} events -> {}", out.sessions, out.event_count, out_dir.display()),
            );
        }
        Command::Validate { profile, dataset } => {
            let violations = experiment::validate(&profile, &dataset)?;
            emit(as_json, serde_json::to_value(&violations)?, || {
                if violations.is_empty() {
                    "ok".to_string()
                } else {
                    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")
                }
            });
            if !violations.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("LLMHAR_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    match dispatch(cli).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
