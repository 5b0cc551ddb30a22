//! Packet requests with exponential reading times, and per-packet download
//! bookkeeping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits in one MByte under the default decimal convention.
pub const BITS_PER_MBYTE: f64 = 8e6;

/// Exponential quantile with the given mean at probability `u`.
pub fn reading_time_quantile(mean: f64, u: f64) -> f64 {
    -mean * (1.0 - u).ln()
}

/// Draws one reading time, exponential with mean `mean` seconds.
pub fn sample_reading_time<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    reading_time_quantile(mean, u)
}

/// Bits delivered by one serving drone over a contiguous stretch of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServingInterval {
    pub dbs: usize,
    pub start: f64,
    pub end: f64,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSession {
    pub user: usize,
    pub request_time: f64,
    pub size: f64,
    pub bits_remaining: f64,
    pub history: Vec<ServingInterval>,
    pub completion_time: Option<f64>,
    /// Highest link rate observed while the session was pending, bps.
    pub peak_rate: f64,
}

impl PacketSession {
    pub fn is_complete(&self) -> bool {
        self.completion_time.is_some()
    }

    pub fn transmission_time(&self) -> Option<f64> {
        self.completion_time.map(|c| c - self.request_time)
    }

    pub fn delivered_bits(&self) -> f64 {
        self.history.iter().map(|s| s.bits).sum()
    }

    fn record(&mut self, dbs: usize, start: f64, end: f64, bits: f64) {
        match self.history.last_mut() {
            Some(last) if last.dbs == dbs && last.end == start => {
                last.end = end;
                last.bits += bits;
            }
            _ => self.history.push(ServingInterval { dbs, start, end, bits }),
        }
    }
}

/// Per-user traffic state: the reading clock and at most one pending download.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTraffic {
    pub user: usize,
    pub next_request_time: f64,
    pub pending: Option<PacketSession>,
}

impl UserTraffic {
    pub fn new<R: Rng + ?Sized>(user: usize, mean_reading: f64, rng: &mut R) -> Self {
        Self {
            user,
            next_request_time: sample_reading_time(mean_reading, rng),
            pending: None,
        }
    }

    pub fn is_active(&self) -> bool {
        self.pending.is_some()
    }

    pub fn request_due(&self, now: f64) -> bool {
        self.pending.is_none() && self.next_request_time <= now
    }
}

/// Opens a download of `size_bits` requested at `request_time`.
///
/// A zero-size packet completes on the spot.
pub fn start_session(traffic: &mut UserTraffic, request_time: f64, size_bits: f64) -> Result<&PacketSession> {
    if traffic.pending.is_some() {
        return Err(Error::SessionPending(traffic.user));
    }
    let session = PacketSession {
        user: traffic.user,
        request_time,
        size: size_bits,
        bits_remaining: size_bits,
        history: Vec::new(),
        completion_time: (size_bits <= 0.0).then_some(request_time),
        peak_rate: 0.0,
    };
    Ok(traffic.pending.insert(session))
}

/// Transfers bits at a constant `throughput` over the step `[now - dt, now]`.
///
/// On completion the finish instant is interpolated inside the step.
pub fn advance_session(session: &mut PacketSession, dbs: usize, throughput: f64, dt: f64, now: f64) {
    if session.is_complete() || throughput <= 0.0 {
        return;
    }
    let start = now - dt;
    session.peak_rate = session.peak_rate.max(throughput);
    let capacity = throughput * dt;
    if capacity < session.bits_remaining {
        session.bits_remaining -= capacity;
        session.record(dbs, start, now, capacity);
    } else {
        let bits = session.bits_remaining;
        let done = start + bits / throughput;
        session.bits_remaining = 0.0;
        session.record(dbs, start, done, bits);
        session.completion_time = Some(done);
    }
}

/// Delivered bits over the request-to-completion time, bps.
pub fn packet_throughput(session: &PacketSession) -> Result<f64> {
    let tau = session
        .transmission_time()
        .ok_or(Error::SessionIncomplete(session.user))?;
    if tau <= 0.0 {
        return Err(Error::ZeroTransmissionTime(session.user));
    }
    Ok(session.size / tau)
}

/// Moves a finished download off the user and schedules the next request.
pub fn finish_session<R: Rng + ?Sized>(
    traffic: &mut UserTraffic,
    mean_reading: f64,
    rng: &mut R,
) -> Option<PacketSession> {
    let done = traffic.pending.as_ref()?.completion_time?;
    traffic.next_request_time = done + sample_reading_time(mean_reading, rng);
    traffic.pending.take()
}
