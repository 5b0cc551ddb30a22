//! Observables collected during a run and the statistics built from them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::CellGrid;

/// Anything tagged with the home cell of the user it was measured for.
pub trait CellTagged {
    fn cell(&self) -> usize;
}

/// One completed download.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketRecord {
    pub user: usize,
    pub cell: usize,
    pub request_time: f64,
    pub completion_time: f64,
    pub tau: f64,
    pub bps: f64,
}

impl CellTagged for PacketRecord {
    fn cell(&self) -> usize {
        self.cell
    }
}

/// One active link at one allocation boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSample {
    pub time: f64,
    pub user: usize,
    pub cell: usize,
    pub dbs: usize,
    /// Ground distance, metres.
    pub distance: f64,
    /// Full-band expected received signal, watts.
    pub rss: f64,
    /// Expected received signal in the allocated band, watts.
    pub rx_power: f64,
    /// Interference in the allocated band, watts.
    pub interference: f64,
    pub se: f64,
    pub throughput: f64,
}

impl CellTagged for LinkSample {
    fn cell(&self) -> usize {
        self.cell
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSample {
    pub time: f64,
    pub active_dbs: usize,
    pub active_users: usize,
}

/// Number of active users on one serving drone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSample {
    pub time: f64,
    pub dbs: usize,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSample {
    pub time: f64,
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Drone-to-drone ground distances over a run.
///
/// Every pair at every sample is counted in a 1 m histogram; pairs closer
/// than `near_radius` are also kept verbatim so proximity statistics below
/// that radius are exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDistances {
    pub near_radius: f64,
    pub total: u64,
    pub histogram: Vec<u64>,
    pub near: Vec<PairSample>,
}

impl PairDistances {
    pub fn new(near_radius: f64, max_distance: f64) -> Self {
        Self {
            near_radius,
            total: 0,
            histogram: vec![0; max_distance.ceil() as usize + 2],
            near: Vec::new(),
        }
    }

    pub fn record(&mut self, time: f64, a: usize, b: usize, distance: f64) {
        self.total += 1;
        let bin = (distance.floor() as usize).min(self.histogram.len() - 1);
        self.histogram[bin] += 1;
        if distance < self.near_radius {
            self.near.push(PairSample { time, a, b, distance });
        }
    }

    /// Fraction of samples closer than `threshold`; exact for thresholds up
    /// to `near_radius`, histogram-resolution above it.
    pub fn collision_stat(&self, threshold: f64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let below = if threshold <= self.near_radius {
            self.near.iter().filter(|p| p.distance < threshold).count() as u64
        } else {
            let full = (threshold.floor() as usize).min(self.histogram.len());
            self.histogram[..full].iter().sum()
        };
        below as f64 / self.total as f64
    }

    pub fn merge(&mut self, other: &PairDistances) {
        self.total += other.total;
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (h, o) in self.histogram.iter_mut().zip(&other.histogram) {
            *h += o;
        }
        self.near.extend(other.near.iter().cloned());
    }

    /// Step CDF at the upper edge of each populated 1 m bin.
    pub fn histogram_cdf(&self) -> Vec<(f64, f64)> {
        let mut acc = 0u64;
        let mut out = Vec::new();
        for (bin, &count) in self.histogram.iter().enumerate() {
            if count == 0 {
                continue;
            }
            acc += count;
            out.push(((bin + 1) as f64, acc as f64 / self.total as f64));
        }
        out
    }
}

/// Everything recorded during one run after the warm-up.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsLog {
    pub seed: u64,
    pub warmup: f64,
    pub packets: Vec<PacketRecord>,
    pub links: Vec<LinkSample>,
    pub steps: Vec<StepSample>,
    pub loads: Vec<LoadSample>,
    pub pairs: PairDistances,
    /// Direction-update epochs that had at least one player.
    pub game_epochs: u64,
    pub nonconverged_epochs: u64,
    pub total_sweeps: u64,
    /// Downloads still pending when the run ended (dropped from statistics).
    pub censored_sessions: u64,
}

impl MetricsLog {
    pub fn new(seed: u64, warmup: f64, pairs: PairDistances) -> Self {
        Self {
            seed,
            warmup,
            packets: Vec::new(),
            links: Vec::new(),
            steps: Vec::new(),
            loads: Vec::new(),
            pairs,
            game_epochs: 0,
            nonconverged_epochs: 0,
            total_sweeps: 0,
            censored_sessions: 0,
        }
    }
}

/// Keeps only records measured for users whose home cell is inner.
pub fn filter_inner<T: CellTagged + Clone>(records: &[T], grid: &CellGrid) -> Vec<T> {
    records
        .iter()
        .filter(|r| grid.is_inner(r.cell()))
        .cloned()
        .collect()
}

/// Sorted step function `(value, P[X <= value])`, one point per distinct value.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}

/// Per-packet pooled mean over all runs, restricted to inner cells.
pub fn mean_packet_throughput(logs: &[MetricsLog], grid: &CellGrid) -> Result<f64> {
    let values: Vec<f64> = logs
        .iter()
        .flat_map(|l| l.packets.iter())
        .filter(|p| grid.is_inner(p.cell))
        .map(|p| p.bps)
        .collect();
    if values.is_empty() {
        return Err(Error::NoPackets);
    }
    Ok(mean(&values))
}

/// Fraction of distance samples strictly below `threshold` (0 when empty).
pub fn collision_stat(distances: &[f64], threshold: f64) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    distances.iter().filter(|&&d| d < threshold).count() as f64 / distances.len() as f64
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (sample standard deviation over √n).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Nearest-rank percentile, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

pub fn median(values: &[f64]) -> Result<f64> {
    percentile(values, 0.5)
}
