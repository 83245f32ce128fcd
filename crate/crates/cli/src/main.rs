//! `lindblad-lab`: batch runner for spectra, eigenoperator and dynamics experiments.

mod config;
mod error;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use lindblad_core::cache::Cache;
use lindblad_core::fixtures::NAMED_OPERATORS;
use lindblad_core::RealizationTable;
use serde_json::json;

use config::{ExperimentConfig, Kind};
use error::CliError;
use output::Output;

const OUT_ENV: &str = "LINDBLAD_LAB_OUT";
const THREADS_ENV: &str = "LINDBLAD_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "lindblad-lab", version, about = "Run Lindbladian spectrum, eigenoperator and dynamics experiments")]
struct Args {
    /// Experiment kind, or `list-fixtures`.
    kind: String,
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: LINDBLAD_LAB_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output root (default: LINDBLAD_LAB_OUT, else the config's `out`, else ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for cached superoperators and decompositions.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Check the config and exit without computing anything.
    #[arg(long)]
    validate: bool,
    /// Extra realization tables for `list-fixtures`.
    #[arg(long)]
    fixtures_dir: Option<PathBuf>,
}

fn list_fixtures(dir: Option<&Path>) -> Result<(), CliError> {
    let builtin = RealizationTable::builtin();
    let table = match dir {
        Some(d) => RealizationTable::with_custom_dir(d).map_err(|e| CliError::Config(format!("{}: {e}", d.display())))?,
        None => builtin.clone(),
    };
    let stock = builtin.seeds();
    println!("realizations:");
    for seed in table.seeds() {
        let from = if stock.contains(&seed) { "built-in" } else { "custom" };
        println!("  seed {seed:<6} {from}");
    }
    println!("named operators:");
    for (name, what) in NAMED_OPERATORS {
        println!("  {name:<14} {what}");
    }
    Ok(())
}

fn threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(t) = flag {
        return if t > 0 { Ok(t) } else { Err(CliError::Config("--threads must be positive".into())) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.parse().ok().filter(|&t: &usize| t > 0).ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    if args.kind == "list-fixtures" {
        return list_fixtures(args.fixtures_dir.as_deref());
    }
    let kind = Kind::from_str(&args.kind, false).map_err(|_| {
        let names: Vec<&str> = Kind::value_variants().iter().map(|k| k.name()).collect();
        CliError::Config(format!("unknown kind {:?}; expected list-fixtures or one of {}", args.kind, names.join(", ")))
    })?;
    let path = args.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    let workers = threads(args.threads)?;
    // nothing touches the filesystem before this passes
    cfg.validate(kind)?;
    if args.validate {
        println!("{}: ok", path.display());
        return Ok(());
    }
    let root = args.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let dir = root.join(cfg.name.clone().unwrap_or_else(|| kind.name().to_string()));
    let out = Output::create(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Output(e.to_string()))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let ctx = run::Ctx::new(&cfg, args.cache.as_ref().map(Cache::new), &out)?;
    let summary = pool.install(|| run::run(kind, &ctx))?;
    let manifest = json!({
        "artifact": "lindblad-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": kind,
        "config": cfg,
        "model_hash": summary.model_hash,
        "prng": { "algorithm": summary.prng, "seeds": summary.seeds },
        "threads": workers,
        "started_unix": started,
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "results": summary.results,
        "notes": summary.notes,
        "files": out.inventory(),
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("manifest.json"), bytes)?;
    println!("{kind}: wrote {} files to {}", out.inventory().len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lindblad-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
