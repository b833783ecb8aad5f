//! `servicing`: run scenarios, analyse sensing sets and gains, export plot data.

mod export;

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use servicing_core::sim::{run_scenario, scenario_gain_report, BoundOverrides, ScenarioConfig};
use servicing_core::Error;

#[derive(Parser)]
#[command(name = "servicing", version, about = "Multi-servicer spacecraft regulation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory.csv, summary.json and manifest.json.
    #[command(group(ArgGroup::new("seed_choice").required(true).args(["seed", "seeds"])))]
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Half-open seed range `a..b`; each run goes to `OUT/seed_N`.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: Option<Range<u64>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Rank test of the sensing set and interaction-matrix spectra.
    Trackability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Gain conditions, ultimate bound and feasibility report.
    Gains {
        #[arg(long)]
        config: PathBuf,
        /// JSON file pinning some or all bounds; the rest are estimated.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Seed for the sampling estimators.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-figure CSV files from a completed run directory.
    ExportPlots {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_seed_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    if a >= b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

/// Failure classes and their exit codes.
#[derive(Debug)]
enum Failure {
    Io(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            e if e.is_runtime() => Failure::Runtime(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

fn io_failure(what: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", what.display()))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn load_config(path: &Path) -> Result<(ScenarioConfig, String), Failure> {
    let text = read_file(path)?;
    let cfg = ScenarioConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, hex::encode(Sha256::digest(text.as_bytes()))))
}

/// Provenance of one run directory.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    config_path: String,
    /// SHA-256 of the config file bytes as read.
    config_file_sha256: String,
    /// Hash of the effective configuration, after any overrides.
    config_hash: String,
    seed: u64,
    out_dir: String,
    tool_version: String,
}

fn simulate_one(cfg: &ScenarioConfig, config_path: &Path, file_sha: &str, seed: u64, out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let run = run_scenario(cfg, seed)?;
    let mut csv = Vec::new();
    run.log.write_csv(&mut csv)?;
    write_file(&out.join("trajectory.csv"), &csv)?;
    write_file(&out.join("summary.json"), run.summary.to_json()?.as_bytes())?;
    let manifest = RunManifest {
        config_path: config_path.display().to_string(),
        config_file_sha256: file_sha.to_string(),
        config_hash: cfg.hash(),
        seed,
        out_dir: out.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let manifest = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
    write_file(&out.join("manifest.json"), manifest.as_bytes())?;
    for w in &run.summary.warnings {
        eprintln!("warning (seed {seed}): {w}");
    }
    match &run.summary.abort {
        Some(a) => Err(Failure::Runtime(format!(
            "seed {seed}: run aborted at t = {} s (step {}): {}",
            a.t, a.step, a.message
        ))),
        None => Ok(()),
    }
}

fn simulate(
    config: &Path,
    seed: Option<u64>,
    seeds: Option<Range<u64>>,
    out: &Path,
    dt: Option<f64>,
    duration: Option<f64>,
) -> Result<(), Failure> {
    let (cfg, file_sha) = load_config(config)?;
    let cfg = cfg.with_overrides(dt, duration).map_err(Failure::from)?;
    if let Some(seed) = seed {
        simulate_one(&cfg, config, &file_sha, seed, out)?;
        println!("seed {seed}: completed, outputs in {}", out.display());
        return Ok(());
    }
    let seeds: Vec<u64> = seeds.expect("clap requires seed or seeds").collect();
    let results: Vec<(u64, Result<(), Failure>)> = seeds
        .par_iter()
        .map(|&s| (s, simulate_one(&cfg, config, &file_sha, s, &out.join(format!("seed_{s}")))))
        .collect();
    let mut worst: Option<Failure> = None;
    for (s, r) in results {
        match r {
            Ok(()) => println!("seed {s}: completed"),
            Err(f) => {
                eprintln!("error: {}", f.message());
                if worst.as_ref().is_none_or(|w| f.code() < w.code()) {
                    worst = Some(f);
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn trackability(config: &Path, json: bool) -> Result<(), Failure> {
    let (cfg, _) = load_config(config)?;
    let report = cfg.interaction()?.report();
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.to_string()))?);
    } else {
        let verdict = if report.trackable { "trackable" } else { "not trackable" };
        println!("rank       {}", report.rank);
        println!("verdict    {verdict}");
        println!("connected  {}", report.connected);
        println!("H spectrum [{:.6e}, {:.6e}]", report.h_min, report.h_max);
        println!("J spectrum [{:.6e}, {:.6e}]", report.j_min, report.j_max);
    }
    Ok(())
}

fn gains(config: &Path, bounds: Option<&Path>, json: bool, seed: u64) -> Result<(), Failure> {
    let (cfg, _) = load_config(config)?;
    let overrides = match bounds {
        Some(p) => Some(BoundOverrides::from_json(&read_file(p)?).map_err(Failure::from)?),
        None => None,
    };
    let report = scenario_gain_report(&cfg, overrides.as_ref(), seed)?;
    if json {
        println!("{}", report.to_json()?);
    } else {
        print!("{}", report.table());
        if report.caveat {
            println!("note: estimated bounds are sampled lower bounds; the verdict is indicative only");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, seed, seeds, out, dt, duration } => {
            simulate(&config, seed, seeds, &out, dt, duration)
        }
        Command::Trackability { config, json } => trackability(&config, json),
        Command::Gains { config, bounds, json, seed } => gains(&config, bounds.as_deref(), json, seed),
        Command::ExportPlots { run } => export::export_plots(&run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
