//! User association schemes and equal-share bandwidth allocation.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, PathGains};
use crate::error::{Error, Result};
use crate::geometry::{ground_distance, Point2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssociationScheme {
    /// Highest expected received signal strength, re-evaluated every interval.
    Rss,
    /// Network-throughput maximising choice made once per packet request.
    Throughput,
}

/// How the engine actually associates users for a movement model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationPolicy {
    /// Always the drone of the user's home cell.
    Local,
    Rss,
    Throughput,
}

/// Equal split of `bandwidth` over the members of one active set.
pub fn allocate_equal(members: &[usize], bandwidth: f64) -> Vec<(usize, f64)> {
    if members.is_empty() {
        return Vec::new();
    }
    let share = bandwidth / members.len() as f64;
    members.iter().map(|&u| (u, share)).collect()
}

/// Full-band, LoS-expectation weighted received power from `drone` at `user`.
pub fn expected_rss(channel: &Channel, user: Point2D, drone: Point2D) -> f64 {
    channel.expected_rss(ground_distance(user, drone))
}

/// Strongest drone by expected RSS; ties go to the lowest id.
pub fn rss_associate(channel: &Channel, user: Point2D, drones: &[Point2D]) -> Result<usize> {
    let mut best = None;
    let mut best_rss = f64::NEG_INFINITY;
    for (id, &d) in drones.iter().enumerate() {
        let rss = expected_rss(channel, user, d);
        if rss > best_rss {
            best = Some(id);
            best_rss = rss;
        }
    }
    best.ok_or(Error::NoDrones)
}

/// Which drone serves each active user, and the resulting bandwidth split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationState {
    /// Indexed by user id; `None` for inactive users.
    pub serving: Vec<Option<usize>>,
    /// Indexed by drone id; sorted user ids.
    pub active_sets: Vec<Vec<usize>>,
    /// Indexed by user id, Hz.
    pub allocations: Vec<f64>,
}

impl AssociationState {
    pub fn new(users: usize, drones: usize) -> Self {
        Self {
            serving: vec![None; users],
            active_sets: vec![Vec::new(); drones],
            allocations: vec![0.0; users],
        }
    }

    pub fn assign(&mut self, user: usize, dbs: usize) {
        self.remove(user);
        self.serving[user] = Some(dbs);
        let set = &mut self.active_sets[dbs];
        let pos = set.binary_search(&user).unwrap_or_else(|p| p);
        set.insert(pos, user);
    }

    pub fn remove(&mut self, user: usize) {
        if let Some(old) = self.serving[user].take() {
            self.active_sets[old].retain(|&u| u != user);
        }
        self.allocations[user] = 0.0;
    }

    pub fn is_idle(&self, dbs: usize) -> bool {
        self.active_sets[dbs].is_empty()
    }

    pub fn active_users(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.serving
            .iter()
            .enumerate()
            .filter_map(|(u, s)| s.map(|d| (u, d)))
    }

    pub fn recompute_allocations(&mut self, bandwidth: f64) {
        self.allocations.iter_mut().for_each(|b| *b = 0.0);
        for set in &self.active_sets {
            for (u, b) in allocate_equal(set, bandwidth) {
                self.allocations[u] = b;
            }
        }
    }

    /// Partition and bandwidth audit; returns the first violation found.
    pub fn audit(&self, bandwidth: f64) -> std::result::Result<(), String> {
        let mut seen = vec![0usize; self.serving.len()];
        for (dbs, set) in self.active_sets.iter().enumerate() {
            let total: f64 = set.iter().map(|&u| self.allocations[u]).sum();
            if total > bandwidth * (1.0 + 1e-12) {
                return Err(format!("drone {dbs} allocates {total} Hz > {bandwidth}"));
            }
            for &u in set {
                seen[u] += 1;
                if self.serving[u] != Some(dbs) {
                    return Err(format!("user {u} listed under drone {dbs} but served by {:?}", self.serving[u]));
                }
                let expected = bandwidth / set.len() as f64;
                if self.allocations[u] != expected {
                    return Err(format!("user {u} has {} Hz, expected {expected}", self.allocations[u]));
                }
            }
        }
        for (u, s) in self.serving.iter().enumerate() {
            let want = usize::from(s.is_some());
            if seen[u] != want {
                return Err(format!("user {u} appears in {} active sets", seen[u]));
            }
        }
        Ok(())
    }
}

/// Precomputed full-band gains from every drone to one user.
struct UserRow {
    serving: Option<usize>,
    gains: Vec<PathGains>,
    in_range: Vec<bool>,
}

/// Picks the drone for a newly requesting user that maximises the summed
/// throughput of all active links, evaluating one hypothesis per drone.
///
/// `drones` are the positions expected at the next allocation boundary and
/// `users` the current user positions (indexed by user id). Every other
/// user keeps its drone; drones with an empty hypothesised set are silent.
pub fn throughput_associate(
    channel: &Channel,
    new_user: usize,
    users: &[Point2D],
    drones: &[Point2D],
    assoc: &AssociationState,
) -> Result<usize> {
    if drones.is_empty() {
        return Err(Error::NoDrones);
    }
    let bw = channel.params.bandwidth_hz;
    let noise_full = crate::channel::noise_power(bw, channel.params.noise_figure_db);
    let kappa = channel.params.kappa;

    let row = |u: usize, serving: Option<usize>| {
        let (gains, in_range) = drones
            .iter()
            .map(|&d| {
                let r = ground_distance(users[u], d);
                (channel.gains(r), r <= kappa)
            })
            .unzip();
        UserRow { serving, gains, in_range }
    };
    let mut rows: Vec<UserRow> = assoc
        .active_users()
        .filter(|&(u, _)| u != new_user)
        .map(|(u, d)| row(u, Some(d)))
        .collect();
    rows.push(row(new_user, None));

    let base_active: Vec<bool> = assoc
        .active_sets
        .iter()
        .map(|set| set.iter().any(|&u| u != new_user))
        .collect();
    let base_load: Vec<usize> = assoc
        .active_sets
        .iter()
        .map(|set| set.iter().filter(|&&u| u != new_user).count())
        .collect();

    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for candidate in 0..drones.len() {
        let active = |d: usize| d == candidate || base_active.get(d).copied().unwrap_or(false);
        let load = |d: usize| base_load.get(d).copied().unwrap_or(0) + usize::from(d == candidate);
        let mut total = 0.0;
        for r in &rows {
            let serving = r.serving.unwrap_or(candidate);
            let mut interference = 0.0;
            for (i, g) in r.gains.iter().enumerate() {
                if i != serving && r.in_range[i] && active(i) {
                    interference += g.expected_w();
                }
            }
            let own = &r.gains[serving];
            let denom = interference + noise_full;
            let se = own.p_los * (1.0 + own.los_w / denom).log2()
                + own.p_nlos() * (1.0 + own.nlos_w / denom).log2();
            total += bw / load(serving) as f64 * se;
        }
        if total > best_value {
            best = candidate;
            best_value = total;
        }
    }
    Ok(best)
}
