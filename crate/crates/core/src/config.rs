//! Run configuration: every network, channel, traffic and engine parameter.
//!
//! Configs are TOML files split into sections. Any key may be omitted and
//! falls back to the defaults below; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::association::{AssociationPolicy, AssociationScheme};
use crate::channel::{dbm_to_watts, Channel, ChannelParams};
use crate::error::{Error, Result};
use crate::geometry::CellGrid;
use crate::mobility::{build_action_set, max_turn_angle, ActionSet, MovementPolicy, RwpParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerCells {
    /// The single centre cell.
    Center,
    /// Every cell not on the outer ring.
    Interior,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub cells_per_side: usize,
    pub cell_edge_m: f64,
    pub users_per_cell: usize,
    pub drones: usize,
    pub inner_cells: InnerCells,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            cells_per_side: 7,
            cell_edge_m: 80.0,
            users_per_cell: 5,
            drones: 49,
            inner_cells: InnerCells::Center,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneConfig {
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub max_accel_mps2: f64,
    /// Number of candidate turning angles.
    pub actions: usize,
    pub direction_interval_s: f64,
    /// Points checked along each candidate arc for border feasibility.
    pub arc_samples: usize,
    pub max_sweeps: usize,
}

impl Default for DroneConfig {
    fn default() -> Self {
        Self {
            altitude_m: 10.0,
            speed_mps: 2.0,
            max_accel_mps2: 4.0,
            actions: 21,
            direction_interval_s: 1.0,
            arc_samples: crate::mobility::DEFAULT_ARC_SAMPLES,
            max_sweeps: crate::dma::DEFAULT_MAX_SWEEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub alpha: f64,
    pub beta: f64,
    pub a_los_db: f64,
    pub a_nlos_db: f64,
    pub gamma_los: f64,
    pub gamma_nlos: f64,
    pub p_tx_dbm: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub noise_figure_db: f64,
    pub interference_range_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let p = ChannelParams::default();
        Self {
            alpha: p.alpha,
            beta: p.beta,
            a_los_db: p.a_los_db,
            a_nlos_db: p.a_nlos_db,
            gamma_los: p.gamma_los,
            gamma_nlos: p.gamma_nlos,
            p_tx_dbm: 24.0,
            bandwidth_hz: p.bandwidth_hz,
            carrier_hz: p.carrier_hz,
            noise_figure_db: p.noise_figure_db,
            interference_range_m: p.kappa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub mean_reading_s: f64,
    pub packet_mbyte: f64,
    pub bits_per_mbyte: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            mean_reading_s: 40.0,
            packet_mbyte: 4.0,
            bits_per_mbyte: crate::traffic::BITS_PER_MBYTE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserConfig {
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub pause_max_s: f64,
}

impl Default for UserConfig {
    fn default() -> Self {
        let p = RwpParams::default();
        Self {
            speed_min_mps: p.speed_min,
            speed_max_mps: p.speed_max,
            pause_max_s: p.pause_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: MovementPolicy,
    pub association: AssociationScheme,
    pub allocation_interval_s: f64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub runs: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: MovementPolicy::Free,
            association: AssociationScheme::Throughput,
            allocation_interval_s: 0.2,
            duration_s: 800.0,
            warmup_s: 40.0,
            runs: 10,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub drone: DroneConfig,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub users: UserConfig,
    pub run: RunConfig,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub model: Option<MovementPolicy>,
    pub association: Option<AssociationScheme>,
    pub speed: Option<f64>,
    pub accel: Option<f64>,
    pub runs: Option<usize>,
    pub duration: Option<f64>,
    pub warmup: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SimConfig) {
        if let Some(m) = self.model {
            cfg.run.model = m;
        }
        if let Some(a) = self.association {
            cfg.run.association = a;
        }
        if let Some(v) = self.speed {
            cfg.drone.speed_mps = v;
        }
        if let Some(a) = self.accel {
            cfg.drone.max_accel_mps2 = a;
        }
        if let Some(r) = self.runs {
            cfg.run.runs = r;
        }
        if let Some(d) = self.duration {
            cfg.run.duration_s = d;
        }
        if let Some(w) = self.warmup {
            cfg.run.warmup_s = w;
        }
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be non-negative, got {v}")))
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.message().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Reads, overrides and validates a config file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        overrides.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if n.cells_per_side == 0 {
            return Err(Error::config("network.cells_per_side", "must be at least 1"));
        }
        positive("network.cell_edge_m", n.cell_edge_m)?;
        if n.drones != self.cell_count() {
            return Err(Error::config(
                "network.drones",
                format!("must equal the number of cells ({}), got {}", self.cell_count(), n.drones),
            ));
        }

        let d = &self.drone;
        positive("drone.altitude_m", d.altitude_m)?;
        positive("drone.speed_mps", d.speed_mps)?;
        non_negative("drone.max_accel_mps2", d.max_accel_mps2)?;
        positive("drone.direction_interval_s", d.direction_interval_s)?;
        if d.actions < 3 || d.actions.is_multiple_of(2) {
            return Err(Error::config("drone.actions", format!("must be odd and >= 3, got {}", d.actions)));
        }
        if d.arc_samples == 0 {
            return Err(Error::config("drone.arc_samples", "must be at least 1"));
        }
        if d.max_sweeps == 0 {
            return Err(Error::config("drone.max_sweeps", "must be at least 1"));
        }

        let c = &self.channel;
        positive("channel.alpha", c.alpha)?;
        positive("channel.beta", c.beta)?;
        positive("channel.gamma_los", c.gamma_los)?;
        if c.gamma_nlos.is_nan() || c.gamma_nlos < c.gamma_los {
            return Err(Error::config("channel.gamma_nlos", "must be >= channel.gamma_los"));
        }
        for (key, v) in [
            ("channel.a_los_db", c.a_los_db),
            ("channel.a_nlos_db", c.a_nlos_db),
            ("channel.p_tx_dbm", c.p_tx_dbm),
            ("channel.noise_figure_db", c.noise_figure_db),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        positive("channel.bandwidth_hz", c.bandwidth_hz)?;
        positive("channel.carrier_hz", c.carrier_hz)?;
        positive("channel.interference_range_m", c.interference_range_m)?;

        let t = &self.traffic;
        positive("traffic.mean_reading_s", t.mean_reading_s)?;
        non_negative("traffic.packet_mbyte", t.packet_mbyte)?;
        positive("traffic.bits_per_mbyte", t.bits_per_mbyte)?;

        let u = &self.users;
        positive("users.speed_min_mps", u.speed_min_mps)?;
        if !u.speed_max_mps.is_finite() || u.speed_max_mps < u.speed_min_mps {
            return Err(Error::config("users.speed_max_mps", "must be finite and >= users.speed_min_mps"));
        }
        non_negative("users.pause_max_s", u.pause_max_s)?;

        let r = &self.run;
        positive("run.allocation_interval_s", r.allocation_interval_s)?;
        let ratio = d.direction_interval_s / r.allocation_interval_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::config(
                "run.allocation_interval_s",
                format!(
                    "drone.direction_interval_s ({}) must be an integer multiple of it ({})",
                    d.direction_interval_s, r.allocation_interval_s
                ),
            ));
        }
        non_negative("run.duration_s", r.duration_s)?;
        non_negative("run.warmup_s", r.warmup_s)?;
        if r.warmup_s > r.duration_s {
            return Err(Error::config("run.warmup_s", "must not exceed run.duration_s"));
        }
        if r.runs == 0 {
            return Err(Error::config("run.runs", "must be at least 1"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.network.cells_per_side * self.network.cells_per_side
    }

    pub fn user_count(&self) -> usize {
        self.network.users_per_cell * self.cell_count()
    }

    pub fn grid(&self) -> Result<CellGrid> {
        let k = self.network.cells_per_side;
        let inner = match self.network.inner_cells {
            InnerCells::Center => return CellGrid::with_center_inner(k, self.network.cell_edge_m),
            InnerCells::All => (0..k * k).collect(),
            InnerCells::Interior if k <= 2 => (0..k * k).collect(),
            InnerCells::Interior => (1..k - 1)
                .flat_map(|row| (1..k - 1).map(move |col| row * k + col))
                .collect(),
        };
        CellGrid::new(k, self.network.cell_edge_m, inner)
    }

    pub fn channel_params(&self) -> ChannelParams {
        let c = &self.channel;
        ChannelParams {
            alpha: c.alpha,
            beta: c.beta,
            a_los_db: c.a_los_db,
            a_nlos_db: c.a_nlos_db,
            gamma_los: c.gamma_los,
            gamma_nlos: c.gamma_nlos,
            p_tx_w: dbm_to_watts(c.p_tx_dbm),
            bandwidth_hz: c.bandwidth_hz,
            carrier_hz: c.carrier_hz,
            noise_figure_db: c.noise_figure_db,
            kappa: c.interference_range_m,
        }
    }

    pub fn channel(&self) -> Channel {
        Channel::new(self.channel_params(), self.drone.altitude_m)
    }

    pub fn rwp(&self) -> RwpParams {
        RwpParams {
            speed_min: self.users.speed_min_mps,
            speed_max: self.users.speed_max_mps,
            pause_max: self.users.pause_max_s,
        }
    }

    pub fn max_turn(&self) -> Result<f64> {
        max_turn_angle(
            self.drone.max_accel_mps2,
            self.drone.direction_interval_s,
            self.drone.speed_mps,
        )
    }

    pub fn action_set(&self) -> Result<ActionSet> {
        build_action_set(self.max_turn()?, self.drone.actions)
    }

    pub fn packet_bits(&self) -> f64 {
        self.traffic.packet_mbyte * self.traffic.bits_per_mbyte
    }

    /// Allocation steps per direction-update interval.
    pub fn steps_per_direction(&self) -> usize {
        (self.drone.direction_interval_s / self.run.allocation_interval_s).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        (self.run.duration_s / self.run.allocation_interval_s + 1e-9).floor() as usize
    }

    pub fn association_policy(&self) -> AssociationPolicy {
        match (self.run.model, self.run.association) {
            (MovementPolicy::Free, AssociationScheme::Rss) => AssociationPolicy::Rss,
            (MovementPolicy::Free, AssociationScheme::Throughput) => AssociationPolicy::Throughput,
            _ => AssociationPolicy::Local,
        }
    }

    /// Short model name: `hov`, `restricted`, `free-rss` or `free-throughput`.
    pub fn model_label(&self) -> &'static str {
        match (self.run.model, self.run.association) {
            (MovementPolicy::Hover, _) => "hov",
            (MovementPolicy::Restricted, _) => "restricted",
            (MovementPolicy::Free, AssociationScheme::Rss) => "free-rss",
            (MovementPolicy::Free, AssociationScheme::Throughput) => "free-throughput",
        }
    }
}
