//! Drone direction selection: a non-cooperative turning game among serving
//! drones, solved by best-response dynamics, plus the idle and hovering
//! behaviours.
//!
//! Each serving drone (a *player*) picks one turning angle per
//! direction-update interval. Its utility is the mean average spectral
//! efficiency of its own active users, evaluated with every player placed at
//! the end of the arc its angle would trace. Users are frozen at their
//! current positions and only players radiate interference.

use rand::Rng;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::geometry::{ground_distance, Point2D};
use crate::mobility::{arc_step, feasible_actions, ActionSet, DroneState, MovementPolicy};

/// Utility gains at or below this are treated as ties.
pub const UTILITY_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_MAX_SWEEPS: usize = 50;

/// Inputs shared by every utility evaluation in one decision epoch.
#[derive(Debug, Clone, Copy)]
pub struct GameSnapshot<'a> {
    pub channel: &'a Channel,
    pub drones: &'a [DroneState],
    /// Current user positions, indexed by user id.
    pub users: &'a [Point2D],
    /// Active users per drone, indexed by drone id.
    pub active_sets: &'a [Vec<usize>],
    /// Direction-update interval, seconds.
    pub interval: f64,
}

/// The turning game for one epoch.
#[derive(Debug, Clone)]
pub struct DirectionGame<'a> {
    snapshot: GameSnapshot<'a>,
    players: Vec<usize>,
    /// Per player, candidate angles in tie-break order.
    actions: Vec<Vec<f64>>,
    /// Per player and action, the drone position at the end of the interval.
    endpoints: Vec<Vec<Point2D>>,
}

/// Orders angles by preference on ties: smaller magnitude first, then
/// negative before positive.
fn tie_break_order(angles: &[f64]) -> Vec<f64> {
    let mut sorted = angles.to_vec();
    sorted.sort_by(|a, b| {
        a.abs()
            .total_cmp(&b.abs())
            .then_with(|| a.total_cmp(b))
    });
    sorted.dedup();
    sorted
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashOutcome {
    /// Drone ids of the players, ascending.
    pub players: Vec<usize>,
    /// Chosen angle per player, aligned with `players`.
    pub angles: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl<'a> DirectionGame<'a> {
    /// Builds the game over every drone with at least one active user.
    ///
    /// `action_sets[d]` are drone `d`'s border-feasible angles.
    pub fn new(snapshot: GameSnapshot<'a>, action_sets: &[Vec<f64>]) -> Self {
        let players: Vec<usize> = (0..snapshot.drones.len())
            .filter(|&d| !snapshot.active_sets[d].is_empty())
            .collect();
        let actions: Vec<Vec<f64>> = players
            .iter()
            .map(|&d| tie_break_order(&action_sets[d]))
            .collect();
        let endpoints = players
            .iter()
            .zip(&actions)
            .map(|(&d, acts)| {
                acts.iter()
                    .map(|&a| arc_step(&snapshot.drones[d], a, snapshot.interval).position)
                    .collect()
            })
            .collect();
        Self {
            snapshot,
            players,
            actions,
            endpoints,
        }
    }

    pub fn players(&self) -> &[usize] {
        &self.players
    }

    /// Candidate angles of the player at `index`, in tie-break order.
    pub fn actions(&self, index: usize) -> &[f64] {
        &self.actions[index]
    }

    fn player_index(&self, drone: usize) -> Result<usize> {
        self.players
            .binary_search(&drone)
            .map_err(|_| Error::IdlePlayer(drone))
    }

    /// Utility of drone `drone` under the joint action `joint` (action
    /// indices aligned with [`players`](Self::players)).
    pub fn utility(&self, drone: usize, joint: &[usize]) -> Result<f64> {
        let p = self.player_index(drone)?;
        Ok(self.utility_at(p, joint[p], joint))
    }

    /// Utility of player `p` playing action `own` while the others play `joint`.
    fn utility_at(&self, p: usize, own: usize, joint: &[usize]) -> f64 {
        let channel = self.snapshot.channel;
        let kappa = channel.params.kappa;
        let noise = crate::channel::noise_power(
            channel.params.bandwidth_hz,
            channel.params.noise_figure_db,
        );
        let here = self.endpoints[p][own];
        let members = &self.snapshot.active_sets[self.players[p]];
        let mut total = 0.0;
        for &u in members {
            let user = self.snapshot.users[u];
            let mut interference = 0.0;
            for (q, ends) in self.endpoints.iter().enumerate() {
                if q == p {
                    continue;
                }
                let r = ground_distance(user, ends[joint[q]]);
                if r <= kappa {
                    interference += channel.gains(r).expected_w();
                }
            }
            let g = channel.gains(ground_distance(user, here));
            let denom = interference + noise;
            total += g.p_los * (1.0 + g.los_w / denom).log2()
                + g.p_nlos() * (1.0 + g.nlos_w / denom).log2();
        }
        total / members.len() as f64
    }

    /// Index of the best reply of player `p` to `joint`.
    pub fn best_response(&self, p: usize, joint: &[usize]) -> usize {
        let mut best = 0;
        let mut best_u = self.utility_at(p, 0, joint);
        for a in 1..self.actions[p].len() {
            let u = self.utility_at(p, a, joint);
            if u > best_u + UTILITY_TOLERANCE * best_u.abs().max(1.0) {
                best = a;
                best_u = u;
            }
        }
        best
    }

    /// Largest utility gain any single player could obtain by deviating.
    pub fn max_deviation_gain(&self, joint: &[usize]) -> f64 {
        (0..self.players.len())
            .map(|p| {
                let current = self.utility_at(p, joint[p], joint);
                (0..self.actions[p].len())
                    .map(|a| self.utility_at(p, a, joint) - current)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Best-response dynamics from `start` in fixed player order.
    pub fn iterate_best_responses(&self, start: Vec<usize>, max_sweeps: usize) -> (Vec<usize>, usize, bool) {
        let mut joint = start;
        for sweep in 1..=max_sweeps {
            let mut changed = false;
            for p in 0..self.players.len() {
                let br = self.best_response(p, &joint);
                if br != joint[p] {
                    joint[p] = br;
                    changed = true;
                }
            }
            if !changed {
                return (joint, sweep, true);
            }
        }
        (joint, max_sweeps, false)
    }

    /// Random start drawn from each player's own stream, then best-response
    /// sweeps until no player changes or `max_sweeps` is hit.
    pub fn solve_nash<R: Rng>(&self, rngs: &mut [R], max_sweeps: usize) -> NashOutcome {
        let start = self
            .players
            .iter()
            .enumerate()
            .map(|(p, &d)| rngs[d].random_range(0..self.actions[p].len()))
            .collect();
        let (joint, sweeps, converged) = self.iterate_best_responses(start, max_sweeps);
        NashOutcome {
            players: self.players.clone(),
            angles: self.angles(&joint),
            sweeps,
            converged,
        }
    }

    pub fn angles(&self, joint: &[usize]) -> Vec<f64> {
        joint
            .iter()
            .enumerate()
            .map(|(p, &a)| self.actions[p][a])
            .collect()
    }
}

/// Uniformly random border-feasible turn for a drone with no active users.
pub fn idle_direction<R: Rng + ?Sized>(feasible: &[f64], rng: &mut R) -> f64 {
    feasible[rng.random_range(0..feasible.len())]
}

/// Hovering drones never turn and never move.
pub fn hov_policy(_drone: &DroneState) -> f64 {
    0.0
}

/// Turns chosen for every drone at one direction-update boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDecision {
    pub turns: Vec<f64>,
    pub players: usize,
    pub sweeps: usize,
    pub converged: bool,
}

/// Picks every drone's turn for the coming interval: the game for serving
/// drones, a random feasible turn for idle ones, nothing for hovering ones.
pub fn decide_turns<R: Rng>(
    snapshot: GameSnapshot<'_>,
    actions: &ActionSet,
    arc_samples: usize,
    max_sweeps: usize,
    rngs: &mut [R],
) -> EpochDecision {
    let feasible: Vec<Vec<f64>> = snapshot
        .drones
        .iter()
        .map(|d| match d.policy {
            MovementPolicy::Hover => vec![hov_policy(d)],
            _ => feasible_actions(d, actions, snapshot.interval, arc_samples),
        })
        .collect();
    let mut turns = vec![0.0; snapshot.drones.len()];
    let mut decision = EpochDecision {
        turns: Vec::new(),
        players: 0,
        sweeps: 0,
        converged: true,
    };
    if snapshot.drones.iter().all(|d| d.policy == MovementPolicy::Hover) {
        decision.turns = turns;
        return decision;
    }
    let game = DirectionGame::new(snapshot, &feasible);
    let outcome = game.solve_nash(rngs, max_sweeps);
    for (&d, &a) in outcome.players.iter().zip(&outcome.angles) {
        turns[d] = a;
    }
    for (d, drone) in snapshot.drones.iter().enumerate() {
        if drone.policy != MovementPolicy::Hover && snapshot.active_sets[d].is_empty() {
            turns[d] = idle_direction(&feasible[d], &mut rngs[d]);
        }
    }
    decision.turns = turns;
    decision.players = outcome.players.len();
    decision.sweeps = outcome.sweeps;
    decision.converged = outcome.converged;
    decision
}
