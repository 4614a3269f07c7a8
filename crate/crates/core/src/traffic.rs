//! Poisson packet sources.
//!
//! Offered load `lambda` is in packets per microsecond per station, so the
//! sweep `10^-5 … 10^-1` spans idle networks to far beyond saturation.

use crate::engine::{RngStream, SimTime};
use crate::error::ConfigError;

pub const DEFAULT_PAYLOAD_BYTES: u32 = 1500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    lambda: f64,
    payload_bytes: u32,
}

impl TrafficConfig {
    pub fn new(lambda: f64, payload_bytes: u32) -> Result<TrafficConfig, ConfigError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ConfigError::invalid("lambda", lambda, "must be positive and finite"));
        }
        if payload_bytes == 0 {
            return Err(ConfigError::invalid("payload", payload_bytes, "must be positive"));
        }
        Ok(TrafficConfig {
            lambda,
            payload_bytes,
        })
    }

    /// Packets per microsecond.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn payload_bytes(&self) -> u32 {
        self.payload_bytes
    }

    pub fn payload_bits(&self) -> u64 {
        self.payload_bytes as u64 * 8
    }
}

/// Exponential inter-arrival gap with mean `1 / lambda`, never zero.
pub fn next_arrival_gap(cfg: &TrafficConfig, stream: &mut RngStream) -> SimTime {
    let gap_us = stream.draw_exp(cfg.lambda);
    SimTime::from_nanos(((gap_us * 1e3).round() as u64).max(1))
}

/// Offered load of `n_stations` sources in Mbps (bits per microsecond).
pub fn offered_load(cfg: &TrafficConfig, n_stations: u32) -> f64 {
    cfg.lambda * cfg.payload_bits() as f64 * n_stations as f64
}

/// Arrival stream of one source, consumed lazily by its device.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    cfg: TrafficConfig,
    next: SimTime,
    rng: RngStream,
}

impl ArrivalProcess {
    pub fn new(cfg: TrafficConfig, mut rng: RngStream) -> ArrivalProcess {
        let next = next_arrival_gap(&cfg, &mut rng);
        ArrivalProcess { cfg, next, rng }
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.cfg
    }

    /// Time of the next not-yet-consumed arrival.
    pub fn peek(&self) -> SimTime {
        self.next
    }

    /// Consumes the pending arrival and returns its time.
    pub fn take(&mut self) -> SimTime {
        let t = self.next;
        self.next = t + next_arrival_gap(&self.cfg, &mut self.rng);
        t
    }

    /// Discards every arrival in `[peek(), until]` and returns how many there
    /// were. Only valid while every one of them would be tail-dropped; the
    /// count is drawn as a Poisson variate and the process restarts at
    /// `until` by memorylessness.
    pub fn discard_through(&mut self, until: SimTime) -> u64 {
        if self.next > until {
            return 0;
        }
        let span_us = (until - self.next).as_micros_f64();
        let extra = self.rng.draw_poisson(self.cfg.lambda * span_us);
        self.next = until + next_arrival_gap(&self.cfg, &mut self.rng);
        1 + extra
    }
}
