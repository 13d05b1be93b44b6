use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedrl_core::agents::AgentKind;
use fedrl_core::experiment::{compare_runs, emit_plots, load_config, run_experiment, Mode, RunConfig};
use fedrl_core::metrics::read_metrics;
use fedrl_core::{Error, Result};

const OUT_DIR_ENV: &str = "FEDRL_OUT_DIR";

#[derive(Parser)]
#[command(name = "fedrl", version, about = "Federated reinforcement learning for epidemic control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print (or write) a config file holding every default.
    InitConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train federated and/or centralized models.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "both")]
        mode: Mode,
        #[arg(long)]
        agent: Option<AgentKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides $FEDRL_OUT_DIR and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render reward curves from metrics CSV files.
    Plot {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Compare the evaluation curves of two runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print(out: Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(&p, text).map_err(|e| Error::io(&p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::InitConfig { out } => write_or_print(out, &RunConfig::default().to_json()?),
        Command::Train {
            config,
            mode,
            agent,
            seed,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => load_config(&p)?,
                None => RunConfig::default(),
            };
            if let Some(a) = agent {
                cfg.agent.algorithm = a;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)) {
                cfg.out_dir = dir;
            }
            let summary = run_experiment(&cfg, mode)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Plot { metrics, out } => {
            for p in emit_plots(&metrics, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let report = compare_runs(&read_metrics(&a)?, &read_metrics(&b)?)?;
            write_or_print(out, &serde_json::to_string_pretty(&report)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
