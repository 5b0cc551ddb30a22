//! User Random Waypoint motion and constant-speed drone arc kinematics.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ground_distance, Point2D, Rect};

/// Containment tolerance for border checks, metres.
pub const BORDER_SLACK: f64 = 1e-9;

/// Number of points sampled along an arc when checking border feasibility.
pub const DEFAULT_ARC_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwpParams {
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_max: f64,
}

impl Default for RwpParams {
    fn default() -> Self {
        Self {
            speed_min: 0.5,
            speed_max: 2.0,
            pause_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub id: usize,
    pub home_cell: usize,
    pub cell_rect: Rect,
    pub position: Point2D,
    pub destination: Point2D,
    pub speed: f64,
    /// Pause to take once `destination` is reached.
    pub pause_remaining: f64,
    pub arrived: bool,
}

fn uniform_point<R: Rng + ?Sized>(rect: &Rect, rng: &mut R) -> Point2D {
    Point2D::new(
        rng.random_range(rect.min.x..=rect.max.x),
        rng.random_range(rect.min.y..=rect.max.y),
    )
}

fn uniform_in<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

impl UserState {
    /// Places a user uniformly in its home cell with a fresh waypoint leg.
    pub fn spawn<R: Rng + ?Sized>(
        id: usize,
        home_cell: usize,
        cell_rect: Rect,
        params: &RwpParams,
        rng: &mut R,
    ) -> Self {
        let position = uniform_point(&cell_rect, rng);
        let mut user = Self {
            id,
            home_cell,
            cell_rect,
            position,
            destination: position,
            speed: params.speed_min,
            pause_remaining: 0.0,
            arrived: false,
        };
        user.new_leg(params, rng);
        user
    }

    fn new_leg<R: Rng + ?Sized>(&mut self, params: &RwpParams, rng: &mut R) {
        self.destination = uniform_point(&self.cell_rect, rng);
        self.speed = uniform_in(params.speed_min, params.speed_max, rng);
        self.pause_remaining = uniform_in(0.0, params.pause_max, rng);
        self.arrived = false;
    }
}

/// Advances one user by `dt` seconds of Random Waypoint motion.
///
/// Arrival clamps exactly at the destination and the leftover time counts
/// against the pause. Once the pause runs out a new leg is drawn and any
/// remaining time is spent moving along it.
pub fn rwp_step<R: Rng + ?Sized>(user: &UserState, dt: f64, params: &RwpParams, rng: &mut R) -> UserState {
    let mut next = user.clone();
    let mut budget = dt;
    // A handful of leg changes per step at most; bounds the loop for zero-length legs.
    for _ in 0..8 {
        if budget <= 0.0 {
            break;
        }
        if !next.arrived {
            let remaining = ground_distance(next.position, next.destination);
            let reach = next.speed * budget;
            if reach < remaining {
                let f = reach / remaining;
                next.position = Point2D::new(
                    next.position.x + f * (next.destination.x - next.position.x),
                    next.position.y + f * (next.destination.y - next.position.y),
                );
                budget = 0.0;
            } else {
                next.position = next.destination;
                budget -= if next.speed > 0.0 { remaining / next.speed } else { budget };
                next.arrived = true;
            }
        } else if next.pause_remaining > budget {
            next.pause_remaining -= budget;
            budget = 0.0;
        } else {
            budget -= next.pause_remaining;
            next.pause_remaining = 0.0;
            next.new_leg(params, rng);
        }
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MovementPolicy {
    /// Hovers at the centre of its home cell.
    #[serde(rename = "hov", alias = "hover")]
    Hover,
    /// Moves, confined to its home cell.
    Restricted,
    /// Moves anywhere in the network area.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub id: usize,
    pub home_cell: usize,
    pub position: Point2D,
    /// Radians, normalised to `[-π, π)`.
    pub heading: f64,
    pub speed: f64,
    pub altitude: f64,
    /// Heading change committed for the current direction-update interval.
    pub current_turn: f64,
    pub policy: MovementPolicy,
    pub allowed_region: Rect,
}

pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = (a + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Largest heading change a drone can complete within `t_m` seconds.
pub fn max_turn_angle(a_max: f64, t_m: f64, speed: f64) -> Result<f64> {
    if speed <= 0.0 || !speed.is_finite() {
        return Err(Error::ZeroSpeed(speed));
    }
    Ok(a_max * t_m / speed)
}

/// The discrete turning options available to a drone in one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    angles: Vec<f64>,
}

impl ActionSet {
    pub fn from_angles(angles: Vec<f64>) -> Self {
        Self { angles }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn max_angle(&self) -> f64 {
        self.angles.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// `count` equally spaced angles spanning `[-max_turn, max_turn]`.
///
/// A zero `max_turn` collapses to the single straight-ahead action.
pub fn build_action_set(max_turn: f64, count: usize) -> Result<ActionSet> {
    if count < 3 || count.is_multiple_of(2) {
        return Err(Error::InvalidActionCount(count));
    }
    if max_turn == 0.0 {
        return Ok(ActionSet::from_angles(vec![0.0]));
    }
    let half = (count - 1) as i64 / 2;
    let angles = (-half..=half)
        .map(|k| max_turn * k as f64 / half as f64)
        .collect();
    Ok(ActionSet::from_angles(angles))
}

/// `sin(x) / x`, accurate near zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Moves a drone for `dt` seconds while its heading changes by `turn` at a
/// uniform rate.
///
/// The path is a circular arc of radius `speed·dt/|turn|`; the displacement is
/// the chord `2R·sin(|turn|/2)` taken along `heading + turn/2`.
pub fn arc_step(state: &DroneState, turn: f64, dt: f64) -> DroneState {
    let mut next = state.clone();
    let chord = state.speed * dt * sinc(0.5 * turn);
    let direction = state.heading + 0.5 * turn;
    next.position = Point2D::new(
        state.position.x + chord * direction.cos(),
        state.position.y + chord * direction.sin(),
    );
    next.heading = normalize_angle(state.heading + turn);
    next
}

/// Positions sampled at `samples` equally spaced instants along a turn over
/// `interval`, the last one being the endpoint.
pub fn arc_samples(state: &DroneState, turn: f64, interval: f64, samples: usize) -> Vec<DroneState> {
    let n = samples.max(1);
    (1..=n)
        .map(|k| {
            let f = k as f64 / n as f64;
            arc_step(state, turn * f, interval * f)
        })
        .collect()
}

/// Whether repeatedly turning at `max_turn` per `interval` traces a circle
/// that stays inside `region`.
fn has_safe_circle(state: &DroneState, max_turn: f64, interval: f64, region: &Rect) -> bool {
    if max_turn <= 0.0 || state.speed <= 0.0 {
        return false;
    }
    let radius = state.speed * interval / max_turn;
    let (s, c) = state.heading.sin_cos();
    let left = Point2D::new(state.position.x - radius * s, state.position.y + radius * c);
    let right = Point2D::new(state.position.x + radius * s, state.position.y - radius * c);
    region.contains_disc(left, radius, BORDER_SLACK) || region.contains_disc(right, radius, BORDER_SLACK)
}

/// Turning options that keep the drone inside its allowed region over the
/// next `interval` seconds.
///
/// An option qualifies when every sampled arc point lies in the region.
/// Among those, options whose endpoint still admits a full max-turn circle
/// inside the region are preferred, so a drone can always keep itself in
/// bounds on later intervals. If nothing qualifies the option whose endpoint
/// lands nearest the region centre is returned on its own.
pub fn feasible_actions(
    state: &DroneState,
    actions: &ActionSet,
    interval: f64,
    samples: usize,
) -> Vec<f64> {
    let region = state.allowed_region;
    let max_turn = actions.max_angle();
    let mut contained = Vec::with_capacity(actions.len());
    let mut viable = Vec::with_capacity(actions.len());
    for &turn in actions.angles() {
        let path = arc_samples(state, turn, interval, samples);
        if path
            .iter()
            .all(|s| region.contains_with_margin(s.position, BORDER_SLACK))
        {
            contained.push(turn);
            let end = path.last().expect("at least one sample");
            if has_safe_circle(end, max_turn, interval, &region) {
                viable.push(turn);
            }
        }
    }
    if !viable.is_empty() {
        return viable;
    }
    if !contained.is_empty() {
        return contained;
    }
    let center = region.center();
    let mut best = actions.angles()[0];
    let mut best_dist = f64::INFINITY;
    for &turn in actions.angles() {
        let d = ground_distance(arc_step(state, turn, interval).position, center);
        if d < best_dist {
            best = turn;
            best_dist = d;
        }
    }
    vec![best]
}
