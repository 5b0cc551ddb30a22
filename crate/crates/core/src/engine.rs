//! Fixed-step simulation loop.
//!
//! Time advances in allocation intervals of `t_r` seconds. Within a step the
//! order is fixed:
//!
//! 1. due packet requests fire and are associated,
//! 2. under RSS association every active user re-selects its drone,
//! 3. bandwidth is re-split equally per drone,
//! 4. on direction-update boundaries every drone commits a turn,
//! 5. link rates are evaluated at the step-start geometry, sampled, and
//!    applied to the pending downloads,
//! 6. users and drones move for `t_r` seconds.

use rayon::prelude::*;

use crate::association::{rss_associate, throughput_associate, AssociationPolicy, AssociationState};
use crate::channel::{Channel, Transmitter};
use crate::config::SimConfig;
use crate::dma::{decide_turns, GameSnapshot};
use crate::error::{Error, Result};
use crate::geometry::{ground_distance, CellGrid, Point2D};
use crate::metrics::{LinkSample, LoadSample, MetricsLog, PacketRecord, PairDistances, StepSample};
use crate::mobility::{arc_step, rwp_step, ActionSet, DroneState, MovementPolicy, RwpParams, UserState};
use crate::rng::{run_seed, substream, SimRng, Stream};
use crate::traffic::{advance_session, finish_session, packet_throughput, start_session, UserTraffic};

/// Pairs closer than this are logged individually.
pub const NEAR_PAIR_RADIUS: f64 = 20.0;

/// Border slack tolerated by the composite audit, metres.
const AUDIT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Check every module invariant at each step; violations become errors.
    pub audit: bool,
}

/// Full mutable state of one run.
#[derive(Debug, Clone)]
pub struct World {
    pub cfg: SimConfig,
    pub grid: CellGrid,
    pub channel: Channel,
    pub actions: Option<ActionSet>,
    pub rwp: RwpParams,
    pub policy: AssociationPolicy,
    pub drones: Vec<DroneState>,
    pub users: Vec<UserState>,
    pub traffic: Vec<UserTraffic>,
    pub assoc: AssociationState,
    pub step: usize,
    pub log: MetricsLog,
    mobility_rngs: Vec<SimRng>,
    traffic_rngs: Vec<SimRng>,
    drone_rngs: Vec<SimRng>,
    audit_enabled: bool,
}

impl World {
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let rwp = cfg.rwp();
        let model = cfg.run.model;
        let actions = match model {
            MovementPolicy::Hover => None,
            _ => Some(cfg.action_set()?),
        };

        let n_users = cfg.user_count();
        let mut mobility_rngs: Vec<SimRng> = (0..n_users)
            .map(|u| substream(seed, Stream::UserMobility, u as u64))
            .collect();
        let mut traffic_rngs: Vec<SimRng> = (0..n_users)
            .map(|u| substream(seed, Stream::UserTraffic, u as u64))
            .collect();
        let drone_rngs: Vec<SimRng> = (0..cfg.network.drones)
            .map(|d| substream(seed, Stream::Drone, d as u64))
            .collect();

        let per_cell = cfg.network.users_per_cell;
        let mut users = Vec::with_capacity(n_users);
        let mut traffic = Vec::with_capacity(n_users);
        for u in 0..n_users {
            let cell = u / per_cell;
            let rect = grid.cell_rect(cell)?;
            users.push(UserState::spawn(u, cell, rect, &rwp, &mut mobility_rngs[u]));
            traffic.push(UserTraffic::new(u, cfg.traffic.mean_reading_s, &mut traffic_rngs[u]));
        }

        let mut drones = Vec::with_capacity(cfg.network.drones);
        for d in 0..cfg.network.drones {
            let mut placement = substream(seed, Stream::Placement, d as u64);
            use rand::Rng;
            let heading = placement.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let allowed_region = match model {
                MovementPolicy::Free => grid.area(),
                _ => grid.cell_rect(d)?,
            };
            drones.push(DroneState {
                id: d,
                home_cell: d,
                position: grid.cell_center(d)?,
                heading,
                speed: if model == MovementPolicy::Hover { 0.0 } else { cfg.drone.speed_mps },
                altitude: cfg.drone.altitude_m,
                current_turn: 0.0,
                policy: model,
                allowed_region,
            });
        }

        let pairs = PairDistances::new(NEAR_PAIR_RADIUS, grid.side_length() * std::f64::consts::SQRT_2);
        Ok(Self {
            cfg: cfg.clone(),
            channel: cfg.channel(),
            policy: cfg.association_policy(),
            actions,
            rwp,
            assoc: AssociationState::new(n_users, drones.len()),
            drones,
            users,
            traffic,
            step: 0,
            log: MetricsLog::new(seed, cfg.run.warmup_s, pairs),
            grid,
            mobility_rngs,
            traffic_rngs,
            drone_rngs,
            audit_enabled: false,
        })
    }

    pub fn clock(&self) -> f64 {
        self.step as f64 * self.cfg.run.allocation_interval_s
    }

    fn user_positions(&self) -> Vec<Point2D> {
        self.users.iter().map(|u| u.position).collect()
    }

    fn drone_positions(&self) -> Vec<Point2D> {
        self.drones.iter().map(|d| d.position).collect()
    }

    /// Drone positions one allocation interval ahead along current arcs.
    fn extrapolated_drones(&self) -> Vec<Point2D> {
        let tr = self.cfg.run.allocation_interval_s;
        let tm = self.cfg.drone.direction_interval_s;
        self.drones
            .iter()
            .map(|d| match d.policy {
                MovementPolicy::Hover => d.position,
                _ => arc_step(d, d.current_turn * tr / tm, tr).position,
            })
            .collect()
    }

    fn associate_new(&mut self, user: usize, users: &[Point2D], drones_now: &[Point2D], drones_next: &[Point2D]) -> Result<usize> {
        match self.policy {
            AssociationPolicy::Local => Ok(self.users[user].home_cell),
            AssociationPolicy::Rss => rss_associate(&self.channel, users[user], drones_now),
            AssociationPolicy::Throughput => {
                throughput_associate(&self.channel, user, users, drones_next, &self.assoc)
            }
        }
    }

    /// Advances the world by one allocation interval.
    pub fn step_once(&mut self) -> Result<()> {
        let t = self.clock();
        let tr = self.cfg.run.allocation_interval_s;
        let sampling = t >= self.cfg.run.warmup_s;
        let users_now = self.user_positions();
        let drones_now = self.drone_positions();

        // 1. packet requests
        let drones_next = match self.policy {
            AssociationPolicy::Throughput => self.extrapolated_drones(),
            _ => Vec::new(),
        };
        let packet_bits = self.cfg.packet_bits();
        for u in 0..self.users.len() {
            if !self.traffic[u].request_due(t) {
                continue;
            }
            let request_time = self.traffic[u].next_request_time;
            start_session(&mut self.traffic[u], request_time, packet_bits)?;
            if self.traffic[u].pending.as_ref().is_some_and(|s| s.is_complete()) {
                // zero-size packet: done on arrival
                finish_session(&mut self.traffic[u], self.cfg.traffic.mean_reading_s, &mut self.traffic_rngs[u]);
                continue;
            }
            let dbs = self.associate_new(u, &users_now, &drones_now, &drones_next)?;
            self.assoc.assign(u, dbs);
        }

        // 2. RSS re-selection
        if self.policy == AssociationPolicy::Rss {
            let active: Vec<usize> = self.assoc.active_users().map(|(u, _)| u).collect();
            for u in active {
                let dbs = rss_associate(&self.channel, users_now[u], &drones_now)?;
                if self.assoc.serving[u] != Some(dbs) {
                    self.assoc.assign(u, dbs);
                }
            }
        }

        // 3. allocation
        self.assoc.recompute_allocations(self.channel.params.bandwidth_hz);

        // 4. direction decisions
        if self.step.is_multiple_of(self.cfg.steps_per_direction()) {
            if let Some(actions) = &self.actions {
                let snapshot = GameSnapshot {
                    channel: &self.channel,
                    drones: &self.drones,
                    users: &users_now,
                    active_sets: &self.assoc.active_sets,
                    interval: self.cfg.drone.direction_interval_s,
                };
                let decision = decide_turns(
                    snapshot,
                    actions,
                    self.cfg.drone.arc_samples,
                    self.cfg.drone.max_sweeps,
                    &mut self.drone_rngs,
                );
                for (d, turn) in self.drones.iter_mut().zip(decision.turns) {
                    d.current_turn = turn;
                }
                if decision.players > 0 {
                    self.log.game_epochs += 1;
                    self.log.total_sweeps += decision.sweeps as u64;
                    if !decision.converged {
                        self.log.nonconverged_epochs += 1;
                    }
                }
            }
        }

        if self.audit_enabled {
            self.audit()?;
        }

        // 5. transfer and sampling
        let transmitters: Vec<Transmitter> = self
            .drones
            .iter()
            .enumerate()
            .map(|(d, drone)| Transmitter {
                position: drone.position,
                active: !self.assoc.is_idle(d),
            })
            .collect();
        let now = t + tr;
        let active: Vec<(usize, usize)> = self.assoc.active_users().collect();
        for &(u, dbs) in &active {
            let b_u = self.assoc.allocations[u];
            let lb = self.channel.link_budget(users_now[u], dbs, &transmitters, b_u);
            if sampling {
                self.log.links.push(LinkSample {
                    time: t,
                    user: u,
                    cell: self.users[u].home_cell,
                    dbs,
                    distance: lb.distance,
                    rss: self.channel.expected_rss(lb.distance),
                    rx_power: lb.expected_rx(),
                    interference: lb.interference,
                    se: lb.se_avg,
                    throughput: lb.throughput,
                });
            }
            if let Some(session) = self.traffic[u].pending.as_mut() {
                advance_session(session, dbs, lb.throughput, tr, now);
            }
        }
        if sampling {
            let mut active_dbs = 0;
            for (d, set) in self.assoc.active_sets.iter().enumerate() {
                if !set.is_empty() {
                    active_dbs += 1;
                    self.log.loads.push(LoadSample { time: t, dbs: d, users: set.len() });
                }
            }
            self.log.steps.push(StepSample {
                time: t,
                active_dbs,
                active_users: active.len(),
            });
            for a in 0..self.drones.len() {
                for b in a + 1..self.drones.len() {
                    let dist = ground_distance(drones_now[a], drones_now[b]);
                    self.log.pairs.record(t, a, b, dist);
                }
            }
        }
        for &(u, _) in &active {
            if !self.traffic[u].pending.as_ref().is_some_and(|s| s.is_complete()) {
                continue;
            }
            let session = finish_session(&mut self.traffic[u], self.cfg.traffic.mean_reading_s, &mut self.traffic_rngs[u])
                .expect("completed session");
            self.assoc.remove(u);
            if session.request_time >= self.cfg.run.warmup_s {
                let tau = session.transmission_time().expect("complete");
                self.log.packets.push(PacketRecord {
                    user: u,
                    cell: self.users[u].home_cell,
                    request_time: session.request_time,
                    completion_time: session.completion_time.expect("complete"),
                    tau,
                    bps: packet_throughput(&session)?,
                });
            }
        }

        // 6. motion
        for (u, user) in self.users.iter_mut().enumerate() {
            *user = rwp_step(user, tr, &self.rwp, &mut self.mobility_rngs[u]);
        }
        let tm = self.cfg.drone.direction_interval_s;
        for d in self.drones.iter_mut() {
            if d.policy != MovementPolicy::Hover {
                *d = arc_step(d, d.current_turn * tr / tm, tr);
            }
        }
        self.step += 1;
        Ok(())
    }

    /// Composite invariant check at the current boundary.
    pub fn audit(&self) -> Result<()> {
        let fail = |what: String| Err(Error::config("audit", what));
        if let Err(e) = self.assoc.audit(self.channel.params.bandwidth_hz) {
            return fail(e);
        }
        for (u, tr) in self.traffic.iter().enumerate() {
            if tr.is_active() != self.assoc.serving[u].is_some() {
                return fail(format!("user {u}: pending download and association disagree"));
            }
            if let Some(s) = &tr.pending {
                if s.bits_remaining < 0.0 || s.bits_remaining > s.size {
                    return fail(format!("user {u}: bits remaining {} outside [0, {}]", s.bits_remaining, s.size));
                }
            }
            let user = &self.users[u];
            if !user.cell_rect.contains(user.position) {
                return fail(format!("user {u} left its home cell"));
            }
        }
        for d in &self.drones {
            if !d.allowed_region.contains_with_margin(d.position, AUDIT_SLACK) {
                return fail(format!("drone {} at ({}, {}) left its region", d.id, d.position.x, d.position.y));
            }
            if d.policy == MovementPolicy::Hover && d.position != self.grid.cell_center(d.home_cell)? {
                return fail(format!("hovering drone {} moved", d.id));
            }
            if let Some(actions) = &self.actions {
                if d.current_turn.abs() > actions.max_angle() + 1e-12 {
                    return fail(format!("drone {} turn {} exceeds limit", d.id, d.current_turn));
                }
            }
            if d.altitude != self.cfg.drone.altitude_m {
                return fail(format!("drone {} altitude changed", d.id));
            }
        }
        if self.policy == AssociationPolicy::Local {
            for (u, s) in self.assoc.active_users() {
                if s != self.users[u].home_cell {
                    return fail(format!("user {u} served outside its home cell"));
                }
            }
        }
        Ok(())
    }
}

/// Executes one run of `cfg` with the given run seed.
pub fn run(cfg: &SimConfig, seed: u64) -> Result<MetricsLog> {
    run_with(cfg, seed, RunOptions::default())
}

pub fn run_with(cfg: &SimConfig, seed: u64, options: RunOptions) -> Result<MetricsLog> {
    let mut world = World::new(cfg, seed)?;
    world.audit_enabled = options.audit;
    for _ in 0..cfg.total_steps() {
        world.step_once()?;
    }
    if options.audit {
        world.audit()?;
    }
    world.log.censored_sessions = world.traffic.iter().filter(|t| t.is_active()).count() as u64;
    Ok(world.log)
}

/// Seeds of the `runs` executions keyed by the config's master seed.
pub fn batch_seeds(cfg: &SimConfig, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|i| run_seed(cfg.run.seed, i)).collect()
}

/// Independent runs on the current rayon pool, returned in run order.
pub fn run_batch(cfg: &SimConfig, runs: usize) -> Result<Vec<MetricsLog>> {
    cfg.validate()?;
    batch_seeds(cfg, runs.max(1))
        .into_par_iter()
        .map(|seed| run(cfg, seed))
        .collect()
}
