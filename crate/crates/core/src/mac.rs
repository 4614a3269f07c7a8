//! DCF contention state for one transmitter on one link.
//!
//! Backoff counts down on a slot grid anchored DIFS after the medium last
//! went idle. The coordinator in [`crate::network`] freezes and resumes the
//! countdown as the medium changes state; this module only owns the
//! arithmetic and the phase machine.

use crate::engine::{RngStream, SimTime};
use crate::phy::{LinkId, TxOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacParams {
    pub slot: SimTime,
    pub sifs: SimTime,
    pub difs: SimTime,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            slot: SimTime::from_micros(9),
            sifs: SimTime::from_micros(16),
            difs: SimTime::from_micros(34),
            cw_min: 15,
            cw_max: 1023,
            retry_limit: 7,
        }
    }
}

impl MacParams {
    /// Checks `difs = sifs + 2·slot` and that both windows are `2^k − 1`.
    pub fn is_consistent(&self) -> bool {
        let pow2m1 = |v: u32| (v + 1).is_power_of_two();
        self.difs == self.sifs + self.slot * 2
            && pow2m1(self.cw_min)
            && pow2m1(self.cw_max)
            && self.cw_min <= self.cw_max
    }

    /// First slot boundary at which a station that started sensing at
    /// `joined` may count, given the medium has been idle since `idle_since`.
    /// Boundaries sit at `idle_since + difs + k·slot`.
    pub fn countdown_origin(&self, idle_since: SimTime, joined: SimTime) -> SimTime {
        let anchor = idle_since + self.difs;
        let earliest = (joined + self.difs).max(anchor);
        let slot = self.slot.as_nanos();
        let k = (earliest - anchor).as_nanos().div_ceil(slot);
        anchor + SimTime::from_nanos(k * slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DcfPhase {
    /// Nothing to send.
    Idle,
    /// Contending but waiting for the medium to be idle for DIFS.
    WaitDifs,
    /// Counting idle slots.
    Backoff,
    /// Countdown held because the device's radio is busy on another link.
    Suspended,
    Transmitting,
    WaitAck,
}

/// What happens after a transmission attempt resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfterTx {
    Delivered,
    /// Re-contend with the same packet and a fresh draw from the doubled window.
    Retry,
    /// Retry limit exceeded; the packet is discarded.
    Dropped,
}

#[derive(Debug, Clone)]
pub struct DcfState {
    link: LinkId,
    contention_window: u32,
    backoff_remaining: u32,
    retries: u32,
    phase: DcfPhase,
    access_start: Option<SimTime>,
    countdown_from: Option<SimTime>,
}

impl DcfState {
    pub fn new(link: LinkId, params: &MacParams) -> DcfState {
        DcfState {
            link,
            contention_window: params.cw_min,
            backoff_remaining: 0,
            retries: 0,
            phase: DcfPhase::Idle,
            access_start: None,
            countdown_from: None,
        }
    }

    pub fn link(&self) -> LinkId {
        self.link
    }

    pub fn phase(&self) -> DcfPhase {
        self.phase
    }

    pub fn contention_window(&self) -> u32 {
        self.contention_window
    }

    pub fn backoff_remaining(&self) -> u32 {
        self.backoff_remaining
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    pub fn access_start(&self) -> Option<SimTime> {
        self.access_start
    }

    pub fn is_contending(&self) -> bool {
        matches!(self.phase, DcfPhase::WaitDifs | DcfPhase::Backoff)
    }

    /// Radio in use for this link: sending or awaiting the ACK.
    pub fn holds_radio(&self) -> bool {
        matches!(self.phase, DcfPhase::Transmitting | DcfPhase::WaitAck)
    }

    /// Begins contention for a new head-of-line packet with a fresh draw
    /// from `[0, contention_window]`.
    pub fn start_access(&mut self, now: SimTime, rng: &mut RngStream) {
        let draw = rng.draw_uniform(0, self.contention_window);
        self.start_access_with_backoff(now, draw);
    }

    pub fn start_access_with_backoff(&mut self, now: SimTime, slots: u32) {
        debug_assert_eq!(self.phase, DcfPhase::Idle, "start_access outside idle");
        debug_assert!(slots <= self.contention_window);
        self.backoff_remaining = slots;
        self.access_start = Some(now);
        self.phase = DcfPhase::WaitDifs;
        self.countdown_from = None;
    }

    /// Medium has been idle long enough: count from the slot boundary `origin`.
    pub fn resume_countdown(&mut self, origin: SimTime) {
        debug_assert!(matches!(self.phase, DcfPhase::WaitDifs | DcfPhase::Suspended));
        self.phase = DcfPhase::Backoff;
        self.countdown_from = Some(origin);
    }

    /// Decrements the counter by `idle_slots` fully elapsed idle slots.
    /// Returns true once the counter is zero.
    pub fn slot_countdown(&mut self, idle_slots: u32) -> bool {
        debug_assert!(
            idle_slots <= self.backoff_remaining,
            "counted past zero: {idle_slots} > {}",
            self.backoff_remaining
        );
        self.backoff_remaining = self.backoff_remaining.saturating_sub(idle_slots);
        self.backoff_remaining == 0
    }

    /// Instant at which the counter reaches zero, if currently counting.
    pub fn tx_due(&self, params: &MacParams) -> Option<SimTime> {
        match (self.phase, self.countdown_from) {
            (DcfPhase::Backoff, Some(from)) => Some(from + params.slot * self.backoff_remaining as u64),
            _ => None,
        }
    }

    /// Medium went busy at `at`: bank the idle slots counted so far and wait
    /// for the next idle period.
    pub fn freeze(&mut self, at: SimTime, params: &MacParams) {
        if let (DcfPhase::Backoff, Some(from)) = (self.phase, self.countdown_from) {
            let elapsed = at
                .checked_sub(from)
                .map_or(0, |d| d.as_nanos() / params.slot.as_nanos());
            let elapsed = elapsed.min(self.backoff_remaining as u64) as u32;
            self.slot_countdown(elapsed);
        }
        if self.is_contending() {
            self.phase = DcfPhase::WaitDifs;
        }
        self.countdown_from = None;
    }

    /// Holds the countdown while the radio serves another link.
    pub fn suspend(&mut self, at: SimTime, params: &MacParams) {
        self.freeze(at, params);
        self.phase = DcfPhase::Suspended;
    }

    /// Back from suspension; the caller resumes the countdown when the
    /// medium allows.
    pub fn unsuspend(&mut self) {
        debug_assert_eq!(self.phase, DcfPhase::Suspended);
        self.phase = DcfPhase::WaitDifs;
    }

    /// Replaces the remaining count with a fresh draw, restarting the count
    /// at `now` if currently counting.
    pub fn redraw(&mut self, now: SimTime, rng: &mut RngStream) {
        self.backoff_remaining = rng.draw_uniform(0, self.contention_window);
        if self.countdown_from.is_some() {
            self.countdown_from = Some(now);
        }
    }

    pub fn begin_transmit(&mut self) {
        self.phase = DcfPhase::Transmitting;
        self.countdown_from = None;
    }

    pub fn await_ack(&mut self) {
        debug_assert_eq!(self.phase, DcfPhase::Transmitting);
        self.phase = DcfPhase::WaitAck;
    }

    /// Counter expired with nothing to send.
    pub fn go_idle(&mut self) {
        self.phase = DcfPhase::Idle;
        self.countdown_from = None;
        self.access_start = None;
    }

    /// Applies binary exponential backoff to a resolved attempt.
    pub fn on_tx_outcome(
        &mut self,
        outcome: TxOutcome,
        rng: &mut RngStream,
        params: &MacParams,
    ) -> AfterTx {
        debug_assert!(matches!(self.phase, DcfPhase::WaitAck | DcfPhase::Transmitting));
        match outcome {
            TxOutcome::Success => {
                self.reset(params);
                AfterTx::Delivered
            }
            TxOutcome::Collided => {
                self.retries += 1;
                self.contention_window = (2 * self.contention_window + 1).min(params.cw_max);
                if self.retries > params.retry_limit {
                    self.reset(params);
                    AfterTx::Dropped
                } else {
                    self.backoff_remaining = rng.draw_uniform(0, self.contention_window);
                    self.phase = DcfPhase::WaitDifs;
                    AfterTx::Retry
                }
            }
        }
    }

    fn reset(&mut self, params: &MacParams) {
        self.contention_window = params.cw_min;
        self.retries = 0;
        self.go_idle();
    }
}
