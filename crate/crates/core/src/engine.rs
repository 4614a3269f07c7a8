//! Discrete-event core: an integer-nanosecond clock, a `(time, seq)` ordered
//! event queue, and seeded random streams keyed by entity and purpose.
//!
//! The scheduler is generic over the event payload. Handlers receive the
//! scheduler mutably so they can schedule follow-up events; simulation state
//! lives in the caller's closure.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

/// Simulated time in integer nanoseconds since the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Rounds to the nearest nanosecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1e9).round().max(0.0) as u64)
    }

    pub fn from_micros_f64(us: f64) -> Self {
        SimTime((us * 1e3).round().max(0.0) as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}µs", self.as_micros_f64())
    }
}

/// A dispatched event: its timestamp, insertion counter and payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event<E> {
    pub time: SimTime,
    pub seq: u64,
    pub action: E,
}

struct Entry<E>(Event<E>);

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.0.time, self.0.seq) == (other.0.time, other.0.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed so that `BinaryHeap` (a max-heap) pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.time, other.0.seq).cmp(&(self.0.time, self.0.seq))
    }
}

/// Event queue with a virtual clock. Events with equal timestamps dispatch in
/// insertion order.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    dispatched: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    /// Number of events handed out so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Queues `action` for dispatch at `time` and returns its sequence number.
    ///
    /// # Panics
    ///
    /// Scheduling before the current clock value is a programming error.
    pub fn schedule(&mut self, time: SimTime, action: E) -> u64 {
        assert!(
            time >= self.now,
            "event scheduled in the past: {time} < now {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event { time, seq, action }));
        seq
    }

    pub fn schedule_in(&mut self, delay: SimTime, action: E) -> u64 {
        self.schedule(self.now + delay, action)
    }

    /// Pops the earliest event with `time <= end`, advancing the clock to it.
    pub fn pop_until(&mut self, end: SimTime) -> Option<Event<E>> {
        match self.heap.peek() {
            Some(Entry(ev)) if ev.time <= end => {}
            _ => return None,
        }
        let Entry(ev) = self.heap.pop()?;
        self.now = ev.time;
        self.dispatched += 1;
        Some(ev)
    }

    /// Dispatches every event with `time <= end` in `(time, seq)` order and
    /// leaves the clock at `end` (or later, if it already was).
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Self, Event<E>),
    {
        while let Some(ev) = self.pop_until(end) {
            handler(self, ev);
        }
        if end > self.now {
            self.now = end;
        }
        self.now
    }
}

/// What a random stream is used for. Combined with the entity id it selects an
/// independent ChaCha stream, so adding one device never perturbs another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Arrivals,
    Backoff { link: u8 },
    /// Free-form tag for tests and tools.
    Custom(u8),
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Arrivals => 0,
            StreamPurpose::Backoff { link } => 0x10 | link as u64,
            StreamPurpose::Custom(t) => 0x100 | t as u64,
        }
    }
}

/// Seeded random stream identified by `(seed, entity, purpose)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, entity: u32, purpose: StreamPurpose) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((entity as u64) << 12) | purpose.tag());
        RngStream { rng }
    }

    /// Uniform integer in `[lo, hi]`.
    ///
    /// # Panics
    ///
    /// Panics when `lo > hi`.
    pub fn draw_uniform(&mut self, lo: u32, hi: u32) -> u32 {
        assert!(lo <= hi, "draw_uniform: empty range [{lo}, {hi}]");
        self.rng.random_range(lo..=hi)
    }

    /// Exponential sample with the given rate (events per unit).
    pub fn draw_exp(&mut self, rate: f64) -> f64 {
        Exp::new(rate)
            .expect("exponential rate must be positive and finite")
            .sample(&mut self.rng)
    }

    /// Poisson count with the given mean.
    pub fn draw_poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let v: f64 = Poisson::new(mean)
            .expect("poisson mean must be positive and finite")
            .sample(&mut self.rng);
        v as u64
    }
}

/// Mixes a base seed with an index (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
