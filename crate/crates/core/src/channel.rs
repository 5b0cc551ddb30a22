//! Probabilistic LoS/NLoS air-to-ground channel and per-link radio budget.
//!
//! All propagation-state handling is expectation based: a link is never
//! sampled as LoS or NLoS, both branches are evaluated and mixed with the
//! elevation-dependent LoS probability.

use serde::{Deserialize, Serialize};

use crate::geometry::{euclidean_3d_distance, ground_distance, Point2D};

/// Thermal noise density, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub alpha: f64,
    pub beta: f64,
    /// Path loss at 1 m, dB.
    pub a_los_db: f64,
    pub a_nlos_db: f64,
    pub gamma_los: f64,
    pub gamma_nlos: f64,
    pub p_tx_w: f64,
    pub bandwidth_hz: f64,
    /// Informational only; folded into the 1 m path-loss constants.
    pub carrier_hz: f64,
    pub noise_figure_db: f64,
    /// Interference cut-off ground distance, metres.
    pub kappa: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha: 9.61,
            beta: 0.16,
            a_los_db: 41.1,
            a_nlos_db: 33.0,
            gamma_los: 2.09,
            gamma_nlos: 3.75,
            p_tx_w: dbm_to_watts(24.0),
            bandwidth_hz: 5e6,
            carrier_hz: 2e9,
            noise_figure_db: 9.0,
            kappa: 200.0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// LoS probability for altitude `h` and ground distance `r`; the elevation
/// angle enters in degrees.
pub fn los_probability(h: f64, r: f64, alpha: f64, beta: f64) -> f64 {
    let omega = h.atan2(r).to_degrees();
    1.0 / (1.0 + alpha * (-beta * (omega - alpha)).exp())
}

pub fn nlos_probability(p_los: f64) -> f64 {
    1.0 - p_los
}

/// Log-distance path loss in dB. Distances below the 1 m reference clamp to it.
pub fn path_loss_db(d: f64, a_db: f64, gamma: f64) -> f64 {
    a_db + 10.0 * gamma * d.max(1.0).log10()
}

/// Power received over an allocated band `b_u` out of `total_bw`.
pub fn received_power(b_u: f64, total_bw: f64, p_tx_w: f64, loss_db: f64) -> f64 {
    (b_u / total_bw) * p_tx_w * 10f64.powf(-loss_db / 10.0)
}

/// Thermal plus receiver noise over `b_u` Hz, watts.
pub fn noise_power(b_u: f64, noise_figure_db: f64) -> f64 {
    10f64.powf((THERMAL_NOISE_DBM_HZ + noise_figure_db) / 10.0) * b_u * 1e-3
}

/// Full-band received powers of one drone-to-ground link in each state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGains {
    pub p_los: f64,
    pub los_w: f64,
    pub nlos_w: f64,
}

impl PathGains {
    pub fn p_nlos(&self) -> f64 {
        nlos_probability(self.p_los)
    }

    /// LoS-probability weighted full-band power.
    pub fn expected_w(&self) -> f64 {
        self.p_los * self.los_w + self.p_nlos() * self.nlos_w
    }
}

/// One transmitting (or silent) drone as seen by the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    pub position: Point2D,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LinkBudget {
    pub distance: f64,
    pub p_los: f64,
    pub s_los: f64,
    pub s_nlos: f64,
    pub noise: f64,
    pub interference: f64,
    pub snr_los: f64,
    pub snr_nlos: f64,
    pub sinr_los: f64,
    pub sinr_nlos: f64,
    pub se_avg: f64,
    pub throughput: f64,
}

impl LinkBudget {
    /// Expected received power in the allocated band.
    pub fn expected_rx(&self) -> f64 {
        self.p_los * self.s_los + (1.0 - self.p_los) * self.s_nlos
    }
}

/// The channel as seen from drones flying at a common altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub params: ChannelParams,
    pub altitude: f64,
}

impl Channel {
    pub fn new(params: ChannelParams, altitude: f64) -> Self {
        Self { params, altitude }
    }

    pub fn gains(&self, r: f64) -> PathGains {
        let p = &self.params;
        let d = euclidean_3d_distance(r, self.altitude);
        PathGains {
            p_los: los_probability(self.altitude, r, p.alpha, p.beta),
            los_w: received_power(1.0, 1.0, p.p_tx_w, path_loss_db(d, p.a_los_db, p.gamma_los)),
            nlos_w: received_power(1.0, 1.0, p.p_tx_w, path_loss_db(d, p.a_nlos_db, p.gamma_nlos)),
        }
    }

    /// Full-band expected received signal strength at ground distance `r`.
    pub fn expected_rss(&self, r: f64) -> f64 {
        self.gains(r).expected_w()
    }

    /// Expected interference at `user` over its band `b_u` from every active
    /// drone other than `serving` within the cut-off distance.
    pub fn interference_at(
        &self,
        user: Point2D,
        serving: usize,
        transmitters: &[Transmitter],
        b_u: f64,
    ) -> f64 {
        let share = b_u / self.params.bandwidth_hz;
        transmitters
            .iter()
            .enumerate()
            .filter(|&(i, tx)| i != serving && tx.active)
            .filter_map(|(_, tx)| {
                let r = ground_distance(user, tx.position);
                (r <= self.params.kappa).then(|| share * self.gains(r).expected_w())
            })
            .sum()
    }

    pub fn link_budget(
        &self,
        user: Point2D,
        serving: usize,
        transmitters: &[Transmitter],
        b_u: f64,
    ) -> LinkBudget {
        let interference = self.interference_at(user, serving, transmitters, b_u);
        self.link_budget_with_interference(user, transmitters[serving].position, b_u, interference)
    }

    /// Link budget with a precomputed interference term.
    pub fn link_budget_with_interference(
        &self,
        user: Point2D,
        drone: Point2D,
        b_u: f64,
        interference: f64,
    ) -> LinkBudget {
        let p = &self.params;
        let r = ground_distance(user, drone);
        let g = self.gains(r);
        let share = b_u / p.bandwidth_hz;
        let s_los = share * g.los_w;
        let s_nlos = share * g.nlos_w;
        let noise = noise_power(b_u, p.noise_figure_db);
        let sinr_los = s_los / (interference + noise);
        let sinr_nlos = s_nlos / (interference + noise);
        let se_avg = g.p_los * (1.0 + sinr_los).log2() + g.p_nlos() * (1.0 + sinr_nlos).log2();
        LinkBudget {
            distance: r,
            p_los: g.p_los,
            s_los,
            s_nlos,
            noise,
            interference,
            snr_los: s_los / noise,
            snr_nlos: s_nlos / noise,
            sinr_los,
            sinr_nlos,
            se_avg,
            throughput: b_u * se_avg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn los_probability_examples() {
        let p = los_probability(10.0, 0.0, 9.61, 0.16);
        assert!((p - 1.0 / (1.0 + 9.61 * (-0.16f64 * (90.0 - 9.61)).exp())).abs() < 1e-15);
        assert!((p - 0.99998).abs() < 5e-6);

        let r = 10.0 / 9.61f64.to_radians().tan();
        let p = los_probability(10.0, r, 9.61, 0.16);
        assert!(rel(p, 1.0 / 10.61) < 1e-9);
        assert!((p - 0.09425).abs() < 5e-6);

        for r in [0.0, 5.0, 80.0, 1e4] {
            assert_eq!(los_probability(10.0, r, 0.0, 0.16), 1.0);
        }
    }

    #[test]
    fn nlos_is_complement() {
        assert_eq!(nlos_probability(0.0), 1.0);
        assert_eq!(nlos_probability(1.0), 0.0);
        assert!((nlos_probability(0.09425) - 0.90575).abs() < 1e-15);
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss_db(1.0, 41.1, 2.09), 41.1);
        assert!(rel(path_loss_db(10.0, 41.1, 2.09), 62.0) < 1e-12);
        assert!(rel(path_loss_db(100.0, 33.0, 3.75), 108.0) < 1e-12);
        // sub-reference distances clamp
        assert_eq!(path_loss_db(0.2, 41.1, 2.09), 41.1);
    }

    #[test]
    fn received_power_examples() {
        assert_eq!(received_power(0.0, 5e6, 0.2512, 62.0), 0.0);
        assert_eq!(received_power(5e6, 5e6, 0.2512, 0.0), 0.2512);
        let s = received_power(5e6, 5e6, dbm_to_watts(24.0), 62.0);
        assert!(rel(s, dbm_to_watts(24.0) * 10f64.powf(-6.2)) < 1e-12);
        assert!((s - 1.585e-7).abs() < 1e-10);
    }

    #[test]
    fn noise_examples() {
        assert_eq!(noise_power(0.0, 9.0), 0.0);
        assert!((noise_power(5e6, 9.0) - 1.5811e-13).abs() < 1e-17);
        assert!((noise_power(1.0, 0.0) - 3.981e-21).abs() < 1e-24);
    }

    #[test]
    fn lone_drone_sees_no_interference() {
        let ch = Channel::new(ChannelParams::default(), 10.0);
        let tx = [Transmitter { position: Point2D::new(0.0, 0.0), active: true }];
        assert_eq!(ch.interference_at(Point2D::new(3.0, 3.0), 0, &tx, 1e6), 0.0);
    }

    #[test]
    fn interferers_beyond_cutoff_are_ignored() {
        let ch = Channel::new(ChannelParams::default(), 10.0);
        let tx = [
            Transmitter { position: Point2D::new(0.0, 0.0), active: true },
            Transmitter { position: Point2D::new(300.0, 0.0), active: true },
            Transmitter { position: Point2D::new(0.0, 200.5), active: true },
        ];
        assert_eq!(ch.interference_at(Point2D::new(0.0, 0.0), 0, &tx, 1e6), 0.0);
    }

    #[test]
    fn idle_drones_do_not_interfere() {
        let ch = Channel::new(ChannelParams::default(), 10.0);
        let tx = [
            Transmitter { position: Point2D::new(0.0, 0.0), active: true },
            Transmitter { position: Point2D::new(30.0, 0.0), active: false },
        ];
        assert_eq!(ch.interference_at(Point2D::new(0.0, 0.0), 0, &tx, 1e6), 0.0);
    }

    #[test]
    fn snr_independent_of_bandwidth() {
        let ch = Channel::new(ChannelParams::default(), 10.0);
        let tx = [Transmitter { position: Point2D::new(0.0, 0.0), active: true }];
        let a = ch.link_budget(Point2D::new(20.0, 5.0), 0, &tx, 5e6);
        let b = ch.link_budget(Point2D::new(20.0, 5.0), 0, &tx, 1e6);
        assert!(rel(a.snr_los, b.snr_los) < 1e-12);
        assert!(rel(a.snr_nlos, b.snr_nlos) < 1e-12);
        assert!(rel(a.throughput / 5e6, b.throughput / 1e6) < 1e-12);
    }

    #[test]
    fn degenerate_mixtures() {
        // α = 0 forces p_los = 1: SE equals the LoS branch
        let params = ChannelParams {
            alpha: 0.0,
            ..Default::default()
        };
        let ch = Channel::new(params, 10.0);
        let lb = ch.link_budget_with_interference(Point2D::new(50.0, 0.0), Point2D::new(0.0, 0.0), 5e6, 0.0);
        assert_eq!(lb.p_los, 1.0);
        assert_eq!(lb.se_avg, (1.0 + lb.sinr_los).log2());
    }

    #[test]
    fn unit_sinr_gives_unit_se() {
        // S_LoS = S_NLoS = N and I = 0 → log2(2) in both branches.
        let p_los = 0.37;
        let se = p_los * (1.0f64 + 1.0).log2() + (1.0 - p_los) * (1.0f64 + 1.0).log2();
        assert_eq!(se, 1.0);
    }

    proptest! {
        #[test]
        fn los_probability_falls_with_distance(r in 0.0f64..500.0, dr in 1e-3f64..50.0) {
            let a = los_probability(10.0, r, 9.61, 0.16);
            let b = los_probability(10.0, r + dr, 9.61, 0.16);
            prop_assert!(b <= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn path_loss_ordering(d in 1.0f64..5000.0, dd in 1e-3f64..100.0) {
            let l = path_loss_db(d, 41.1, 2.09);
            let n = path_loss_db(d, 33.0, 3.75);
            prop_assert!(path_loss_db(d + dd, 41.1, 2.09) > l);
            // with the default constants NLoS loss overtakes LoS past ~3.07 m
            if d >= 3.1 {
                prop_assert!(n >= l);
            }
        }

        #[test]
        fn se_is_convex_combination(ux in 0.0f64..300.0, uy in 0.0f64..300.0, ix in 0.0f64..300.0) {
            let ch = Channel::new(ChannelParams::default(), 10.0);
            let tx = [
                Transmitter { position: Point2D::new(0.0, 0.0), active: true },
                Transmitter { position: Point2D::new(ix, 100.0), active: true },
            ];
            let lb = ch.link_budget(Point2D::new(ux, uy), 0, &tx, 1e6);
            let lo = (1.0 + lb.sinr_los).log2().min((1.0 + lb.sinr_nlos).log2());
            let hi = (1.0 + lb.sinr_los).log2().max((1.0 + lb.sinr_nlos).log2());
            prop_assert!(lb.se_avg >= lo - 1e-12 && lb.se_avg <= hi + 1e-12);
        }

        #[test]
        fn interferers_never_help(ux in 0.0f64..200.0, uy in 0.0f64..200.0, ix in 0.0f64..400.0, iy in 0.0f64..400.0) {
            let ch = Channel::new(ChannelParams::default(), 10.0);
            let serving = Transmitter { position: Point2D::new(100.0, 100.0), active: true };
            let alone = ch.link_budget(Point2D::new(ux, uy), 0, &[serving], 2e6);
            let with = ch.link_budget(
                Point2D::new(ux, uy),
                0,
                &[serving, Transmitter { position: Point2D::new(ix, iy), active: true }],
                2e6,
            );
            prop_assert!(with.se_avg <= alone.se_avg);
        }

        #[test]
        fn power_linear_in_bandwidth(b in 0.0f64..5e6, loss in 40.0f64..140.0) {
            let full = received_power(5e6, 5e6, 0.25, loss);
            prop_assert!((received_power(b, 5e6, 0.25, loss) - full * b / 5e6).abs() <= 1e-12 * full);
            prop_assert!((noise_power(b, 9.0) - noise_power(1.0, 9.0) * b).abs() <= 1e-12 * noise_power(5e6, 9.0));
        }
    }
}
