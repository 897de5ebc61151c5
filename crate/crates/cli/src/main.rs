//! `anderson-lab`: runs localization experiments described by JSON configs.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config, 3 numerical failure.

mod commands;
mod config;
mod output;

use anderson_core::ensemble::RNG_SCHEME;
use clap::{Parser, Subcommand};
use config::{validate, Level, Validation};
use output::{sha256_hex, write_output, RunManifest};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const WORKERS_ENV: &str = "ANDERSON_LAB_WORKERS";

#[derive(Parser)]
#[command(name = "anderson-lab", version, about = "Localization experiments for random Schrödinger and CMV operators")]
struct Cli {
    #[command(subcommand)]
    action: Action,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to the config, then $ANDERSON_LAB_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for outputs (default: current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Action {
    /// Validate a config and run the experiment.
    Run { config: PathBuf },
    /// Check a config and list every diagnostic.
    Validate { config: PathBuf },
}

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn read(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| fail(1, "Io", &format!("{}: {e}", path.display())))
}

fn report(v: &Validation) -> serde_json::Value {
    json!({ "valid": v.is_valid(), "diagnostics": v.diagnostics })
}

fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<usize, String> {
    if let Some(w) = flag.or(config) {
        return if w >= 1 { Ok(w) } else { Err("workers must be ≥ 1".into()) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(format!("{WORKERS_ENV}={s:?} is not a positive integer")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.action {
        Action::Validate { config } => {
            let text = match read(config) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let v = validate(&text, cli.seed);
            println!("{}", serde_json::to_string_pretty(&report(&v)).unwrap());
            if v.is_valid() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Action::Run { config } => match run(&cli, config) {
            Ok(()) => ExitCode::SUCCESS,
            Err(code) => code,
        },
    }
}

fn run(cli: &Cli, path: &Path) -> Result<(), ExitCode> {
    let text = read(path)?;
    let v = validate(&text, cli.seed);
    for d in v.diagnostics.iter().filter(|d| d.level == Level::Warning) {
        eprintln!("{}", json!({ "warning": d.kind, "field": d.field, "message": d.message }));
    }
    let Some(cfg) = v.config.clone() else {
        eprintln!("{}", json!({ "error": "InvalidConfig", "diagnostics": v.diagnostics }));
        return Err(ExitCode::from(2));
    };
    let config_workers = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|x| x.get("workers").and_then(|w| w.as_u64()))
        .map(|w| w as usize);
    let workers = resolve_workers(cli.workers, config_workers).map_err(|m| fail(2, "InvalidWorkers", &m))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| fail(1, "ThreadPool", &e.to_string()))?;

    let start = Instant::now();
    let out = pool
        .install(|| commands::run(&cfg))
        .map_err(|e| fail(3, e.kind(), &e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();

    let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let io = |e: std::io::Error| fail(1, "Io", &format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(&dir).map_err(io)?;
    let stem = cfg.output.strip_suffix(".csv").unwrap_or(&cfg.output).to_string();
    let mut entries = Vec::new();
    write_output(&dir, &cfg.output, "table", out.table.to_csv().as_bytes(), &mut entries).map_err(io)?;
    if let Some(s) = &out.summary {
        let text = serde_json::to_string_pretty(s).unwrap() + "\n";
        write_output(&dir, &format!("{stem}.summary.json"), "summary", text.as_bytes(), &mut entries).map_err(io)?;
    }
    for (name, table) in &out.extra {
        write_output(&dir, &format!("{stem}.{name}.csv"), "table", table.to_csv().as_bytes(), &mut entries).map_err(io)?;
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        schema_version: config::SCHEMA_VERSION,
        command: cfg.command.name(),
        config_sha256: sha256_hex(cfg.canonical_json().as_bytes()),
        seed: cfg.seed,
        rng_scheme: RNG_SCHEME,
        workers,
        wall_time_seconds: wall,
        outputs: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).unwrap() + "\n";
    std::fs::write(dir.join(format!("{stem}.manifest.json")), text).map_err(io)?;
    Ok(())
}
