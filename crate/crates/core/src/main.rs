use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dbsim::association::AssociationScheme;
use dbsim::config::{Overrides, SimConfig};
use dbsim::experiment::{run_experiment, ExperimentMatrix};
use dbsim::mobility::MovementPolicy;
use dbsim::Error;

/// Run drone base station experiments and write their data sets.
#[derive(Debug, Parser)]
#[command(name = "dbsim", version)]
struct Cli {
    /// TOML config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Movement model(s): hov, restricted, free.
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    model: Vec<MovementPolicy>,
    /// Association scheme(s) for the free model: rss, throughput.
    #[arg(long, value_delimiter = ',', value_parser = parse_assoc)]
    assoc: Vec<AssociationScheme>,
    /// Drone speed(s), m/s.
    #[arg(long, value_delimiter = ',')]
    speed: Vec<f64>,
    /// Maximum acceleration(s), m/s².
    #[arg(long, value_delimiter = ',')]
    accel: Vec<f64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Simulated seconds per run.
    #[arg(long)]
    duration: Option<f64>,
    /// Seconds discarded before sampling.
    #[arg(long)]
    warmup: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Sweep the reference grid: hov, restricted, free-rss and free-throughput
    /// at 2, 4, 6 and 8 m/s. Explicit axis flags narrow it.
    #[arg(long)]
    sweep: bool,
}

fn parse_model(s: &str) -> Result<MovementPolicy, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "hov" | "hover" => Ok(MovementPolicy::Hover),
        "restricted" => Ok(MovementPolicy::Restricted),
        "free" => Ok(MovementPolicy::Free),
        other => Err(format!("unknown model `{other}` (hov, restricted, free)")),
    }
}

fn parse_assoc(s: &str) -> Result<AssociationScheme, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "rss" => Ok(AssociationScheme::Rss),
        "throughput" => Ok(AssociationScheme::Throughput),
        other => Err(format!("unknown association `{other}` (rss, throughput)")),
    }
}

fn first<T: Copy>(v: &[T]) -> Option<T> {
    (v.len() == 1).then(|| v[0])
}

fn build(cli: &Cli) -> Result<ExperimentMatrix, Error> {
    let overrides = Overrides {
        model: first(&cli.model),
        association: first(&cli.assoc),
        speed: first(&cli.speed),
        accel: first(&cli.accel),
        runs: cli.runs,
        duration: cli.duration,
        warmup: cli.warmup,
        seed: cli.seed,
    };
    let base = match &cli.config {
        Some(path) => SimConfig::load(path, &overrides)?,
        None => {
            let mut cfg = SimConfig::default();
            overrides.apply(&mut cfg);
            cfg.validate()?;
            cfg
        }
    };
    let mut m = ExperimentMatrix::single(base);
    if cli.sweep {
        m.models = vec![MovementPolicy::Hover, MovementPolicy::Restricted, MovementPolicy::Free];
        m.associations = vec![AssociationScheme::Rss, AssociationScheme::Throughput];
        m.speeds = vec![2.0, 4.0, 6.0, 8.0];
    }
    if !cli.model.is_empty() {
        m.models = cli.model.clone();
    }
    if !cli.assoc.is_empty() {
        m.associations = cli.assoc.clone();
    }
    if !cli.speed.is_empty() {
        m.speeds = cli.speed.clone();
    }
    if !cli.accel.is_empty() {
        m.accels = cli.accel.clone();
    }
    for cfg in m.points() {
        cfg.validate()?;
    }
    Ok(m)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let matrix = match build(&cli) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let results = match run_experiment(&matrix, &cli.out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut warnings = false;
    for (dir, s) in &results {
        let bps = s.packets.mean_bps.map_or("n/a".to_string(), |v| format!("{:.4} Mbit/s", v / 1e6));
        println!("{}: {} packets, mean {bps}", dir.display(), s.packets.count);
        if s.game.nonconverged > 0 {
            warnings = true;
            eprintln!(
                "warning: {}: {} of {} direction games hit the sweep cap",
                s.label, s.game.nonconverged, s.game.epochs
            );
        }
    }
    if warnings {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}
