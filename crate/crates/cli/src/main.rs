mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::commands::Ctx;
use crate::config::{parse_config, ConfigError, ExperimentConfig};
use crate::io::Staging;

#[derive(Parser)]
#[command(name = "grouprobust", version, about = "Group-robust training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic train/val/test splits as CSV.
    Generate(Common),
    /// Train one configuration.
    Train(Common),
    /// Train every point of the [grid] and select by validation accuracy.
    Sweep(Common),
    /// Error-set or CVaR-set diagnostics against an ERM reference.
    Analyze(Common),
    /// Retrain JTT stage two on edited error sets.
    Ablate(Common),
    /// Repeat the sweep on subsampled validation sets.
    ValStudy(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    out: PathBuf,
    /// Overrides [train] seed ([data] seed for `generate`).
    #[arg(long)]
    seed: Option<u64>,
    /// Directory holding train.csv, val.csv and test.csv; replaces [data].
    #[arg(long)]
    data: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Sweep(_) => "sweep",
            Command::Analyze(_) => "analyze",
            Command::Ablate(_) => "ablate",
            Command::ValStudy(_) => "val-study",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Generate(c)
            | Command::Train(c)
            | Command::Sweep(c)
            | Command::Analyze(c)
            | Command::Ablate(c)
            | Command::ValStudy(c) => c,
        }
    }
}

fn fail(kind: &str, message: String, extra: Value, code: u8) -> ExitCode {
    let mut block = json!({"kind": kind, "message": message});
    if let (Value::Object(b), Value::Object(e)) = (&mut block, extra) {
        b.extend(e);
    }
    eprintln!("{}", serde_json::to_string_pretty(&json!({ "error": block })).unwrap());
    ExitCode::from(code)
}

fn load_config(cmd: &Command) -> Result<ExperimentConfig, anyhow::Error> {
    let common = cmd.common();
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        match cmd {
            Command::Generate(_) => cfg.data.seed = seed,
            _ => cfg.train.seed = seed,
        }
    }
    Ok(cfg)
}

fn run(cmd: &Command, cfg: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    let common = cmd.common();
    let out = Staging::new(&common.out)?;
    let ctx = Ctx {
        cfg,
        data_dir: common.data.as_deref(),
        out: &out,
    };
    let body = match cmd {
        Command::Generate(_) => commands::generate(&ctx)?,
        Command::Train(_) => commands::train_cmd(&ctx)?,
        Command::Sweep(_) => commands::sweep(&ctx)?,
        Command::Analyze(_) => commands::analyze(&ctx)?,
        Command::Ablate(_) => commands::ablate(&ctx)?,
        Command::ValStudy(_) => commands::val_study(&ctx)?,
    };
    let mut report = json!({
        "tool": "grouprobust",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "config": cfg,
        "data_source": match &common.data {
            Some(dir) => json!({"kind": "csv", "dir": dir}),
            None => json!({"kind": "synthetic"}),
        },
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    report["wall_clock"] = json!({
        "started_unix_ms": started_unix_ms as u64,
        "elapsed_ms": started.elapsed().as_millis() as u64,
    });
    out.write("report.json", serde_json::to_string_pretty(&report)? + "\n")?;
    out.commit()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim().to_string(), json!({}), 1);
        }
    };
    let cfg = match load_config(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            let extra = match e.downcast_ref::<ConfigError>() {
                Some(c) => json!({"key": c.key, "line": c.line}),
                None => json!({}),
            };
            return fail("config", format!("{e:#}"), extra, 1);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("runtime", format!("{e:#}"), json!({}), 2),
    }
}
