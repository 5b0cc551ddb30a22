//! Experiment matrices and their on-disk output sets.
//!
//! Each matrix point gets its own directory holding `config.toml`,
//! `packets.csv`, `samples.csv`, `pairs_near.csv`, one `cdf_<metric>.csv`
//! per observable and `summary.json`. Floats are written with 17
//! significant digits so every summary value can be recomputed bit-exactly
//! from the CSV files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::association::AssociationScheme;
use crate::config::SimConfig;
use crate::engine::{batch_seeds, run};
use crate::error::{Error, Result};
use crate::metrics::{empirical_cdf, mean, median, percentile, standard_error, MetricsLog, PairDistances};
use crate::mobility::MovementPolicy;

/// Distance below which two drones count as colliding, metres.
pub const COLLISION_THRESHOLD_M: f64 = 10.0;

/// Link observables written to `samples.csv`, in column order.
pub const LINK_METRICS: [&str; 6] = ["distance", "rss", "rx_power", "interference", "se", "throughput"];

/// Cartesian sweep around a base config.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMatrix {
    pub base: SimConfig,
    pub models: Vec<MovementPolicy>,
    pub associations: Vec<AssociationScheme>,
    pub speeds: Vec<f64>,
    pub accels: Vec<f64>,
}

impl ExperimentMatrix {
    /// A single point: the base config itself.
    pub fn single(base: SimConfig) -> Self {
        Self {
            models: vec![base.run.model],
            associations: vec![base.run.association],
            speeds: vec![base.drone.speed_mps],
            accels: vec![base.drone.max_accel_mps2],
            base,
        }
    }

    /// Resolved configs of every point. Association only varies for the
    /// free model; the others always serve locally.
    pub fn points(&self) -> Vec<SimConfig> {
        let mut out: Vec<SimConfig> = Vec::new();
        for &model in &self.models {
            let assocs: &[AssociationScheme] = match model {
                MovementPolicy::Free => &self.associations,
                _ => &self.associations[..self.associations.len().min(1)],
            };
            for &association in assocs {
                for &speed in &self.speeds {
                    for &accel in &self.accels {
                        let mut cfg = self.base.clone();
                        cfg.run.model = model;
                        cfg.run.association = association;
                        cfg.drone.speed_mps = speed;
                        cfg.drone.max_accel_mps2 = accel;
                        if !out.iter().any(|c| point_label(c) == point_label(&cfg)) {
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Directory name of a point, e.g. `free-throughput_v2_a4`.
pub fn point_label(cfg: &SimConfig) -> String {
    format!("{}_v{}_a{}", cfg.model_label(), cfg.drone.speed_mps, cfg.drone.max_accel_mps2)
}

/// 17 significant digits, locale-free.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| Self {
            mean: mean(values),
            std_error: standard_error(values),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketSummary {
    pub count: usize,
    /// Pooled over every inner-cell packet of every run.
    pub mean_bps: Option<f64>,
    /// Mean and standard error of the per-run means.
    pub per_run_bps: Option<Estimate>,
    pub mean_tau_s: Option<f64>,
    pub censored_sessions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSummary {
    pub metric: &'static str,
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub per_run: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSummary {
    pub count: usize,
    pub max: usize,
    pub p99: Option<f64>,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionSummary {
    pub threshold_m: f64,
    pub pair_samples: u64,
    pub below_threshold: u64,
    pub stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSummary {
    pub epochs: u64,
    pub nonconverged: u64,
    pub mean_sweeps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub label: String,
    pub version: &'static str,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub packets: PacketSummary,
    /// Links of users whose home cell is inner.
    pub links: Vec<LinkSummary>,
    pub loads: LoadSummary,
    pub collision: CollisionSummary,
    pub game: GameSummary,
    pub config: SimConfig,
}

/// Runs and statistics of one matrix point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub label: String,
    pub config: SimConfig,
    pub logs: Vec<MetricsLog>,
    pub summary: Summary,
}

fn link_value(metric: &str, l: &crate::metrics::LinkSample) -> f64 {
    match metric {
        "distance" => l.distance,
        "rss" => l.rss,
        "rx_power" => l.rx_power,
        "interference" => l.interference,
        "se" => l.se,
        _ => l.throughput,
    }
}

/// Inner-cell packet rates in run order, then completion order.
pub fn inner_packet_bps(cfg: &SimConfig, logs: &[MetricsLog]) -> Result<Vec<Vec<f64>>> {
    let grid = cfg.grid()?;
    Ok(logs
        .iter()
        .map(|l| l.packets.iter().filter(|p| grid.is_inner(p.cell)).map(|p| p.bps).collect())
        .collect())
}

/// Inner-cell values of one link metric, per run.
pub fn inner_link_values(cfg: &SimConfig, logs: &[MetricsLog], metric: &str) -> Result<Vec<Vec<f64>>> {
    let grid = cfg.grid()?;
    Ok(logs
        .iter()
        .map(|l| {
            l.links
                .iter()
                .filter(|s| grid.is_inner(s.cell))
                .map(|s| link_value(metric, s))
                .collect()
        })
        .collect())
}

/// Per-drone active-user counts at every sample, all runs.
pub fn load_values(logs: &[MetricsLog]) -> Vec<f64> {
    logs.iter()
        .flat_map(|l| l.loads.iter().map(|s| s.users as f64))
        .collect()
}

pub fn merged_pairs(logs: &[MetricsLog]) -> Option<PairDistances> {
    let mut it = logs.iter();
    let mut acc = it.next()?.pairs.clone();
    for l in it {
        acc.merge(&l.pairs);
    }
    Some(acc)
}

pub fn summarize(cfg: &SimConfig, logs: &[MetricsLog]) -> Result<Summary> {
    let per_run = inner_packet_bps(cfg, logs)?;
    let pooled: Vec<f64> = per_run.iter().flatten().copied().collect();
    let run_means: Vec<f64> = per_run.iter().filter(|r| !r.is_empty()).map(|r| mean(r)).collect();
    let grid = cfg.grid()?;
    let taus: Vec<f64> = logs
        .iter()
        .flat_map(|l| l.packets.iter().filter(|p| grid.is_inner(p.cell)).map(|p| p.tau))
        .collect();
    let packets = PacketSummary {
        count: pooled.len(),
        mean_bps: (!pooled.is_empty()).then(|| mean(&pooled)),
        per_run_bps: Estimate::of(&run_means),
        mean_tau_s: (!taus.is_empty()).then(|| mean(&taus)),
        censored_sessions: logs.iter().map(|l| l.censored_sessions).sum(),
    };

    let mut links = Vec::new();
    for metric in LINK_METRICS {
        let runs = inner_link_values(cfg, logs, metric)?;
        let all: Vec<f64> = runs.iter().flatten().copied().collect();
        let means: Vec<f64> = runs.iter().filter(|r| !r.is_empty()).map(|r| mean(r)).collect();
        links.push(LinkSummary {
            metric,
            count: all.len(),
            mean: (!all.is_empty()).then(|| mean(&all)),
            median: median(&all).ok(),
            per_run: Estimate::of(&means),
        });
    }

    let load = load_values(logs);
    let loads = LoadSummary {
        count: load.len(),
        max: load.iter().fold(0.0f64, |m, &v| m.max(v)) as usize,
        p99: percentile(&load, 0.99).ok(),
        mean: (!load.is_empty()).then(|| mean(&load)),
    };

    let pairs = merged_pairs(logs);
    let (total, below) = pairs.as_ref().map_or((0, 0), |p| {
        (p.total, p.near.iter().filter(|s| s.distance < COLLISION_THRESHOLD_M).count() as u64)
    });
    let collision = CollisionSummary {
        threshold_m: COLLISION_THRESHOLD_M,
        pair_samples: total,
        below_threshold: below,
        stat: if total == 0 { 0.0 } else { below as f64 / total as f64 },
    };

    let epochs: u64 = logs.iter().map(|l| l.game_epochs).sum();
    let sweeps: u64 = logs.iter().map(|l| l.total_sweeps).sum();
    let game = GameSummary {
        epochs,
        nonconverged: logs.iter().map(|l| l.nonconverged_epochs).sum(),
        mean_sweeps: (epochs > 0).then(|| sweeps as f64 / epochs as f64),
    };

    Ok(Summary {
        label: point_label(cfg),
        version: env!("CARGO_PKG_VERSION"),
        runs: logs.len(),
        seeds: logs.iter().map(|l| l.seed).collect(),
        packets,
        links,
        loads,
        collision,
        game,
        config: cfg.clone(),
    })
}

/// Runs every seed of one point in parallel and summarises them.
pub fn run_point(cfg: &SimConfig) -> Result<PointResult> {
    cfg.validate()?;
    let seeds = batch_seeds(cfg, cfg.run.runs.max(1));
    let logs = seeds
        .into_par_iter()
        .map(|seed| run(cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, &logs)?;
    Ok(PointResult {
        label: point_label(cfg),
        config: cfg.clone(),
        logs,
        summary,
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| io_err(path, e))
}

pub fn packets_csv(cfg: &SimConfig, logs: &[MetricsLog]) -> Result<String> {
    let grid = cfg.grid()?;
    let mut s = String::from("run,user,cell,request_time,completion_time,tau_s,bps\n");
    for (run, log) in logs.iter().enumerate() {
        for p in log.packets.iter().filter(|p| grid.is_inner(p.cell)) {
            let _ = writeln!(
                s,
                "{run},{},{},{},{},{},{}",
                p.user,
                p.cell,
                fmt_f64(p.request_time),
                fmt_f64(p.completion_time),
                fmt_f64(p.tau),
                fmt_f64(p.bps)
            );
        }
    }
    Ok(s)
}

/// Long format: one row per (sample, metric). Empty fields do not apply.
pub fn samples_csv(logs: &[MetricsLog]) -> String {
    let mut s = String::from("run,time,metric,dbs,user,cell,value\n");
    for (run, log) in logs.iter().enumerate() {
        let mut links = log.links.iter().peekable();
        let mut loads = log.loads.iter().peekable();
        for step in &log.steps {
            let t = fmt_f64(step.time);
            let _ = writeln!(s, "{run},{t},active_dbs,,,,{}", step.active_dbs);
            let _ = writeln!(s, "{run},{t},active_users,,,,{}", step.active_users);
            while let Some(l) = loads.next_if(|l| l.time == step.time) {
                let _ = writeln!(s, "{run},{t},load,{},,,{}", l.dbs, l.users);
            }
            while let Some(l) = links.next_if(|l| l.time == step.time) {
                for metric in LINK_METRICS {
                    let _ = writeln!(
                        s,
                        "{run},{t},{metric},{},{},{},{}",
                        l.dbs,
                        l.user,
                        l.cell,
                        fmt_f64(link_value(metric, l))
                    );
                }
            }
        }
    }
    s
}

pub fn pairs_near_csv(logs: &[MetricsLog]) -> String {
    let mut s = String::from("run,time,a,b,distance\n");
    for (run, log) in logs.iter().enumerate() {
        for p in &log.pairs.near {
            let _ = writeln!(s, "{run},{},{},{},{}", fmt_f64(p.time), p.a, p.b, fmt_f64(p.distance));
        }
    }
    s
}

fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("value,cdf\n");
    for &(v, p) in points {
        let _ = writeln!(s, "{},{}", fmt_f64(v), fmt_f64(p));
    }
    s
}

pub type Cdf = Vec<(f64, f64)>;

/// `(file stem, CDF)` for every observable with at least one sample.
pub fn cdfs(cfg: &SimConfig, logs: &[MetricsLog]) -> Result<Vec<(String, Cdf)>> {
    let mut out = Vec::new();
    let bps: Vec<f64> = inner_packet_bps(cfg, logs)?.into_iter().flatten().collect();
    if let Ok(c) = empirical_cdf(&bps) {
        out.push(("packet_bps".to_string(), c));
    }
    for metric in LINK_METRICS {
        let v: Vec<f64> = inner_link_values(cfg, logs, metric)?.into_iter().flatten().collect();
        if let Ok(c) = empirical_cdf(&v) {
            out.push((metric.to_string(), c));
        }
    }
    if let Ok(c) = empirical_cdf(&load_values(logs)) {
        out.push(("load".to_string(), c));
    }
    if let Some(p) = merged_pairs(logs) {
        if p.total > 0 {
            out.push(("pair_distance".to_string(), p.histogram_cdf()));
        }
    }
    Ok(out)
}

pub fn write_point(dir: &Path, result: &PointResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let cfg = &result.config;
    write_file(&dir.join("config.toml"), &cfg.to_toml_string())?;
    write_file(&dir.join("packets.csv"), &packets_csv(cfg, &result.logs)?)?;
    write_file(&dir.join("samples.csv"), &samples_csv(&result.logs))?;
    write_file(&dir.join("pairs_near.csv"), &pairs_near_csv(&result.logs))?;
    for (name, cdf) in cdfs(cfg, &result.logs)? {
        write_file(&dir.join(format!("cdf_{name}.csv")), &cdf_csv(&cdf))?;
    }
    let json = serde_json::to_string_pretty(&result.summary).map_err(|e| io_err(dir, e))?;
    write_file(&dir.join("summary.json"), &(json + "\n"))
}

/// Fails early when `out` cannot hold results.
pub fn prepare_output(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let probe = out.join(".write-probe");
    write_file(&probe, "")?;
    fs::remove_file(&probe).map_err(|e| io_err(&probe, e))
}

/// Runs every point and writes its directory under `out`; results come back
/// in point order.
pub fn run_experiment(matrix: &ExperimentMatrix, out: &Path) -> Result<Vec<(PathBuf, Summary)>> {
    prepare_output(out)?;
    let points = matrix.points();
    for cfg in &points {
        cfg.validate()?;
    }
    points
        .par_iter()
        .map(|cfg| {
            let result = run_point(cfg)?;
            let dir = out.join(&result.label);
            write_point(&dir, &result)?;
            Ok((dir, result.summary))
        })
        .collect()
}
