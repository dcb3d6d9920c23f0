mod config;
mod experiments;
mod results;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use colombeau_core::io::{write_snapshots, Manifest};

use crate::results::{Check, Outcome};

const EXIT_CHECKS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const SNAPSHOT_DIR: &str = "snapshots";

/// Reproducible runner for ε-regularization experiments.
#[derive(Parser, Debug)]
#[command(name = "colombeau", version)]
struct Cli {
    /// Worker threads for independent ε tasks (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for random coefficient profiles and probe vectors; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Results directory (default: results/<config name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Summarize a results directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Report { dir } => match results::report(dir) {
            Ok((text, _)) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", dir.display());
                ExitCode::from(EXIT_USAGE)
            }
        },
    }
}

fn run(cli: &Cli, path: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cfg = match config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}:{}: {}", path.display(), e.line, e.message);
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out_dir = cli.out.clone().unwrap_or_else(|| {
        let stem = path
            .file_stem()
            .map_or("run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("results").join(stem)
    });

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let start = Instant::now();
    let (mut outcome, snapshots) = pool.install(|| experiments::run(&cfg.spec, seed)).unwrap_or_else(|e| {
        let mut o = Outcome::default();
        o.checks
            .push(Check::new("experiment", f64::NAN, f64::NAN, false, e.to_string()));
        (o, Vec::new())
    });
    outcome.note("timing.total_s", format!("{:.3}", start.elapsed().as_secs_f64()));

    let mut manifest = Manifest::new();
    manifest.set("experiment", cfg.experiment.name());
    manifest.set("config", path.display());
    manifest.set("seed", seed);
    manifest.set("workers", pool.current_num_threads());
    manifest.set("version.core", colombeau_core::VERSION);
    manifest.set("version.cli", env!("CARGO_PKG_VERSION"));
    if !snapshots.is_empty() {
        manifest.set("snapshots", SNAPSHOT_DIR);
    }
    let written = results::write_results(&out_dir, &text, &outcome, manifest).and_then(|()| {
        if snapshots.is_empty() {
            return Ok(());
        }
        let items: Vec<(f64, &_)> = snapshots.iter().map(|(e, u)| (*e, u)).collect();
        write_snapshots(&items, "u_eps(T)", &out_dir.join(SNAPSHOT_DIR))
            .map_err(|e| std::io::Error::other(e.to_string()))
    });
    if let Err(e) = written {
        eprintln!("error: writing {}: {e}", out_dir.display());
        return ExitCode::from(EXIT_USAGE);
    }

    let failures = outcome.failures();
    println!(
        "{}: {} checks, {} failed -> {}",
        cfg.experiment.name(),
        outcome.checks.len(),
        failures.len(),
        out_dir.display()
    );
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for c in failures {
            eprintln!(
                "FAIL {}: measured {:e}, threshold {:e} ({})",
                c.name, c.measured, c.threshold, c.detail
            );
        }
        ExitCode::from(EXIT_CHECKS)
    }
}
