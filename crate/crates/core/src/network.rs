//! The simulated BSS: one access point, two links, the devices under study
//! and any interfering single-link devices.
//!
//! Each link is a single collision domain. The coordinator keeps every
//! contending port's backoff on the link's slot grid, schedules one
//! "next expiry" event per link and tombstones it with an epoch counter
//! whenever the set of counters changes.

use crate::devices::{make_interferers, Device, DeviceMode, EmlsrParams, Grant, DEFAULT_QUEUE_CAPACITY};
use crate::engine::{Scheduler, SimTime};
use crate::mac::{AfterTx, DcfPhase, MacParams};
use crate::metrics::{Metrics, MetricsAccumulator, PacketOutcome, PacketRecord};
use crate::phy::{ack_airtime, frame_airtime, LinkConfig, LinkId, Medium, TxHandle, TxOutcome};
use crate::traffic::TrafficConfig;

/// Owner id used for the access point's ACKs on the medium.
const AP_ID: u32 = u32::MAX;

/// Everything needed to build one run.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub mode: DeviceMode,
    pub n_stations: u32,
    pub traffic: TrafficConfig,
    /// Load of each interfering device.
    pub sld_traffic: TrafficConfig,
    /// Interfering devices on link 1 and link 2.
    pub n_sld: [u32; 2],
    pub links: [LinkConfig; 2],
    pub mac: MacParams,
    pub emlsr: EmlsrParams,
    pub seed: u64,
    pub queue_capacity: usize,
}

impl NetworkSpec {
    /// `n` stations of `mode` on two 20 MHz MCS 6 links, no interferers.
    pub fn simple(mode: DeviceMode, n: u32, lambda: f64, seed: u64) -> NetworkSpec {
        let traffic = TrafficConfig::new(lambda, crate::traffic::DEFAULT_PAYLOAD_BYTES)
            .expect("lambda must be positive");
        NetworkSpec {
            mode,
            n_stations: n,
            traffic,
            sld_traffic: traffic,
            n_sld: [0, 0],
            links: [
                LinkConfig::new(LinkId::Link1, 20, 6).unwrap(),
                LinkConfig::new(LinkId::Link2, 20, 6).unwrap(),
            ],
            mac: MacParams::default(),
            emlsr: EmlsrParams::default(),
            seed,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    /// Data frames put on the air.
    pub attempts: u64,
    /// Data frames that overlapped another one.
    pub collisions: u64,
    /// Time with at least one frame (data or ACK) on the air.
    pub busy: SimTime,
}

impl LinkStats {
    pub fn collision_probability(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.collisions as f64 / self.attempts as f64
        }
    }
}

/// One data frame on the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxRecord {
    pub device: u32,
    pub link: LinkId,
    pub start: SimTime,
    pub end: SimTime,
    pub outcome: TxOutcome,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub tx: Vec<TxRecord>,
    pub packets: Vec<PacketRecord>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: Metrics,
    pub links: [LinkStats; 2],
    pub events: u64,
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Wake(usize),
    LinkWin { link: LinkId, epoch: u64 },
    TxEnd { link: LinkId, dev: usize, handle: TxHandle },
    AckEnd { link: LinkId, dev: usize, handle: TxHandle },
}

struct LinkState {
    medium: Medium,
    airtime: SimTime,
    exchange_tail: SimTime,
    /// Start of the current idle period; `None` while anything is on the air.
    idle_since: Option<SimTime>,
    busy_since: SimTime,
    epoch: u64,
    win_at: Option<SimTime>,
    contenders: Vec<usize>,
    stats: LinkStats,
}

pub struct Network {
    sched: Scheduler<Ev>,
    mac: MacParams,
    emlsr: EmlsrParams,
    links: [LinkState; 2],
    devices: Vec<Device>,
    metrics: MetricsAccumulator,
    trace: Option<Trace>,
}

impl Network {
    pub fn new(spec: &NetworkSpec) -> Network {
        let mut devices: Vec<Device> = (0..spec.n_stations)
            .map(|i| {
                Device::new(i, spec.mode, spec.traffic, spec.seed, &spec.mac, spec.queue_capacity)
            })
            .collect();
        devices.extend(make_interferers(
            spec.n_sld[0],
            spec.n_sld[1],
            spec.n_stations,
            spec.sld_traffic,
            spec.seed,
            &spec.mac,
        ));
        let payload = spec.traffic.payload_bytes();
        let links = LinkId::ALL.map(|l| {
            let cfg = &spec.links[l.index()];
            LinkState {
                medium: Medium::new(l),
                airtime: frame_airtime(payload, cfg),
                exchange_tail: spec.mac.sifs + ack_airtime(),
                idle_since: Some(SimTime::ZERO),
                busy_since: SimTime::ZERO,
                epoch: 0,
                win_at: None,
                contenders: devices
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| d.port(l).is_some())
                    .map(|(i, _)| i)
                    .collect(),
                stats: LinkStats::default(),
            }
        });
        let mut net = Network {
            sched: Scheduler::new(),
            mac: spec.mac,
            emlsr: spec.emlsr,
            links,
            devices,
            metrics: MetricsAccumulator::new(),
            trace: None,
        };
        for i in 0..net.devices.len() {
            net.schedule_wake(i);
        }
        net
    }

    /// Records every data frame and packet outcome. Memory grows with the run.
    pub fn with_trace(mut self) -> Network {
        self.trace = Some(Trace::default());
        self
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn devices_mut(&mut self) -> &mut [Device] {
        &mut self.devices
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    /// Advances the simulation to `end` and aggregates over `[0, end]`.
    pub fn run(mut self, end: SimTime) -> RunResult {
        self.run_until(end);
        self.finish(end)
    }

    /// Dispatches events up to `end` without finalising metrics.
    pub fn run_until(&mut self, end: SimTime) {
        while let Some(ev) = self.sched.pop_until(end) {
            self.dispatch(ev.action);
        }
    }

    pub fn finish(mut self, end: SimTime) -> RunResult {
        for i in 0..self.devices.len() {
            let d = &mut self.devices[i];
            d.catch_up(end, &mut self.metrics, self.trace.as_mut().map(|t| &mut t.packets));
        }
        if let Some(tr) = self.trace.as_mut() {
            for d in &self.devices {
                tr.packets.extend(d.pending_records());
            }
        }
        let mut stats = [self.links[0].stats, self.links[1].stats];
        for (s, l) in stats.iter_mut().zip(&self.links) {
            if l.idle_since.is_none() {
                s.busy += end.saturating_sub(l.busy_since);
            }
        }
        RunResult {
            metrics: self.metrics.finish(end),
            links: stats,
            events: self.sched.dispatched(),
            trace: self.trace,
        }
    }

    fn dispatch(&mut self, ev: Ev) {
        let now = self.sched.now();
        match ev {
            Ev::Wake(dev) => {
                self.devices[dev].wake_at = None;
                self.catch_up(dev, now);
                self.refresh_device(dev, now);
            }
            Ev::LinkWin { link, epoch } => {
                let ls = &mut self.links[link.index()];
                if epoch != ls.epoch {
                    return;
                }
                ls.win_at = None;
                self.resolve(link, now);
            }
            Ev::TxEnd { link, dev, handle } => self.on_tx_end(link, dev, handle, now),
            Ev::AckEnd { link, dev, handle } => self.on_ack_end(link, dev, handle, now),
        }
        for l in LinkId::ALL {
            self.reschedule(l);
        }
    }

    fn catch_up(&mut self, dev: usize, now: SimTime) {
        let trace = self.trace.as_mut().map(|t| &mut t.packets);
        self.devices[dev].catch_up(now, &mut self.metrics, trace);
    }

    fn schedule_wake(&mut self, dev: usize) {
        let d = &mut self.devices[dev];
        let at = d.next_arrival();
        if d.wake_at != Some(at) {
            d.wake_at = Some(at);
            self.sched.schedule(at, Ev::Wake(dev));
        }
    }

    /// Starts counting a contending port if its link is idle.
    fn arm(&mut self, dev: usize, link: LinkId, now: SimTime) {
        let Some(idle) = self.links[link.index()].idle_since else {
            return;
        };
        let origin = self.mac.countdown_origin(idle, now);
        let port = self.devices[dev].port_mut(link).unwrap();
        if port.dcf.phase() == DcfPhase::WaitDifs {
            port.dcf.resume_countdown(origin);
        }
    }

    /// Starts contention on idle ports that have work, keeps an EMLSR
    /// device's idle radio branch suspended, and arranges a wake-up for the
    /// next arrival when some port has nothing to do.
    fn refresh_device(&mut self, dev: usize, now: SimTime) {
        self.devices[dev].refresh_head(now);
        let links: Vec<LinkId> = self.devices[dev].mode().links().to_vec();
        let mut needs_wake = false;
        for link in links {
            let d = &mut self.devices[dev];
            if d.wants_access(link) {
                let radio_busy = d.mode() == DeviceMode::Emlsr && d.radio_busy();
                let port = d.port_mut(link).unwrap();
                port.dcf.start_access(now, &mut port.rng);
                if radio_busy {
                    port.dcf.suspend(now, &self.mac);
                } else {
                    self.arm(dev, link, now);
                }
            } else if d.port(link).unwrap().dcf.phase() == DcfPhase::Idle {
                needs_wake = true;
            }
        }
        if needs_wake {
            self.schedule_wake(dev);
        }
    }

    /// Handles every counter on `link` that expires at `now`.
    fn resolve(&mut self, link: LinkId, now: SimTime) {
        let li = link.index();
        let winners: Vec<usize> = self.links[li]
            .contenders
            .iter()
            .copied()
            .filter(|&d| {
                self.devices[d].port(link).unwrap().dcf.tx_due(&self.mac) == Some(now)
            })
            .collect();
        for dev in winners {
            self.on_expiry(dev, link, now);
        }
        if !self.links[li].medium.is_clear() {
            self.medium_taken(link, now);
        }
    }

    fn on_expiry(&mut self, dev: usize, link: LinkId, now: SimTime) {
        self.catch_up(dev, now);
        let d = &mut self.devices[dev];
        let unbound = d.port(link).unwrap().bound.is_none();
        if unbound && d.queue_len() == 0 {
            d.port_mut(link).unwrap().dcf.go_idle();
            self.schedule_wake(dev);
            return;
        }
        match d.emlsr_tx_grant(link, now, &self.mac, &self.emlsr) {
            Grant::Denied => {
                let port = d.port_mut(link).unwrap();
                port.dcf.redraw(now, &mut port.rng);
            }
            Grant::Granted { delay } => {
                if unbound {
                    d.dispatch_head(link, now);
                }
                if d.mode() == DeviceMode::Emlsr {
                    let other = d.port_mut(link.other()).unwrap();
                    if other.dcf.is_contending() {
                        let due_now = other.dcf.tx_due(&self.mac) == Some(now);
                        other.dcf.suspend(now, &self.mac);
                        if due_now {
                            other.dcf.redraw(now, &mut other.rng);
                        }
                    }
                }
                self.transmit(dev, link, now, delay);
                // The head may have changed and another port may be free.
                self.refresh_device(dev, now);
            }
        }
    }

    /// Puts a data frame on the air. An EMLSR radio switch holds the medium
    /// for `lead` ahead of the frame, as its initial control exchange
    /// reserves the link while the radio retunes.
    fn transmit(&mut self, dev: usize, link: LinkId, now: SimTime, lead: SimTime) {
        let li = link.index();
        let id = self.devices[dev].id();
        let airtime = lead + self.links[li].airtime;
        let handle = self.links[li]
            .medium
            .begin_tx(id, now, airtime)
            .unwrap_or_else(|e| panic!("carrier-sense violation: {e}"));
        let port = self.devices[dev].port_mut(link).unwrap();
        port.dcf.begin_transmit();
        port.tx = Some((handle, now));
        self.links[li].stats.attempts += 1;
        self.sched.schedule(now + airtime, Ev::TxEnd { link, dev, handle });
    }

    /// Something started on an idle medium: freeze every other counter.
    fn medium_taken(&mut self, link: LinkId, now: SimTime) {
        let li = link.index();
        if self.links[li].idle_since.take().is_some() {
            self.links[li].busy_since = now;
        }
        for i in 0..self.links[li].contenders.len() {
            let d = self.links[li].contenders[i];
            let port = self.devices[d].port_mut(link).unwrap();
            if port.dcf.is_contending() {
                port.dcf.freeze(now, &self.mac);
            }
        }
    }

    /// The last frame left the medium: every waiting counter resumes after
    /// DIFS.
    fn medium_cleared(&mut self, link: LinkId, now: SimTime) {
        let li = link.index();
        let ls = &mut self.links[li];
        ls.stats.busy += now - ls.busy_since;
        ls.idle_since = Some(now);
        for i in 0..ls.contenders.len() {
            let d = self.links[li].contenders[i];
            self.arm(d, link, now);
        }
    }

    fn on_tx_end(&mut self, link: LinkId, dev: usize, handle: TxHandle, now: SimTime) {
        let li = link.index();
        let outcome = self.links[li].medium.finish(handle).expect("unknown transmission");
        self.catch_up(dev, now);
        let start = {
            let port = self.devices[dev].port_mut(link).unwrap();
            port.tx.take().expect("transmission without record").1
        };
        if let Some(tr) = self.trace.as_mut() {
            tr.tx.push(TxRecord {
                device: self.devices[dev].id(),
                link,
                start,
                end: now,
                outcome,
            });
        }
        match outcome {
            TxOutcome::Success => {
                self.devices[dev].port_mut(link).unwrap().dcf.await_ack();
                let tail = self.links[li].exchange_tail;
                let ack = self.links[li].medium.occupy(AP_ID, now, tail);
                self.sched.schedule(now + tail, Ev::AckEnd { link, dev, handle: ack });
            }
            TxOutcome::Collided => {
                self.links[li].stats.collisions += 1;
                if self.links[li].medium.is_clear() {
                    self.medium_cleared(link, now);
                }
                let d = &mut self.devices[dev];
                let class = d.class();
                let port = d.port_mut(link).unwrap();
                match port.dcf.on_tx_outcome(TxOutcome::Collided, &mut port.rng, &self.mac) {
                    AfterTx::Retry => self.arm(dev, link, now),
                    AfterTx::Dropped => {
                        let pkt = port.bound.take().expect("dropped without a packet");
                        self.metrics.dropped(class, 1);
                        if let Some(tr) = self.trace.as_mut() {
                            tr.packets.push(PacketRecord {
                                id: pkt.id,
                                source: self.devices[dev].id(),
                                class,
                                enqueue: pkt.enqueue,
                                access_start: pkt.access_start,
                                delivered: None,
                                size_bytes: pkt.size_bytes,
                                outcome: PacketOutcome::DroppedRetry,
                            });
                        }
                    }
                    AfterTx::Delivered => unreachable!(),
                }
                self.release_radio(dev, link, now);
                self.refresh_device(dev, now);
            }
        }
    }

    fn on_ack_end(&mut self, link: LinkId, dev: usize, handle: TxHandle, now: SimTime) {
        let li = link.index();
        self.links[li].medium.finish(handle);
        if self.links[li].medium.is_clear() {
            self.medium_cleared(link, now);
        }
        self.catch_up(dev, now);
        let d = &mut self.devices[dev];
        let class = d.class();
        let port = d.port_mut(link).unwrap();
        port.dcf.on_tx_outcome(TxOutcome::Success, &mut port.rng, &self.mac);
        let pkt = port.bound.take().expect("delivered without a packet");
        let access_start = pkt.access_start.expect("delivered before access");
        self.metrics
            .delivered(class, pkt.size_bytes, pkt.enqueue, access_start, now);
        if let Some(tr) = self.trace.as_mut() {
            tr.packets.push(PacketRecord {
                id: pkt.id,
                source: self.devices[dev].id(),
                class,
                enqueue: pkt.enqueue,
                access_start: Some(access_start),
                delivered: Some(now),
                size_bytes: pkt.size_bytes,
                outcome: PacketOutcome::Delivered,
            });
        }
        self.release_radio(dev, link, now);
        self.refresh_device(dev, now);
    }

    /// An EMLSR exchange on `link` ended: the other branch may count again.
    fn release_radio(&mut self, dev: usize, link: LinkId, now: SimTime) {
        let d = &mut self.devices[dev];
        if d.mode() != DeviceMode::Emlsr {
            return;
        }
        let other = link.other();
        let port = d.port_mut(other).unwrap();
        if port.dcf.phase() == DcfPhase::Suspended {
            port.dcf.unsuspend();
            self.arm(dev, other, now);
        }
    }

    /// Points the link's single expiry event at the earliest counter.
    fn reschedule(&mut self, link: LinkId) {
        let li = link.index();
        let next = if self.links[li].idle_since.is_some() {
            self.links[li]
                .contenders
                .iter()
                .filter_map(|&d| self.devices[d].port(link).unwrap().dcf.tx_due(&self.mac))
                .min()
        } else {
            None
        };
        let ls = &mut self.links[li];
        if next == ls.win_at {
            return;
        }
        ls.epoch += 1;
        ls.win_at = next;
        if let Some(t) = next {
            let epoch = ls.epoch;
            self.sched.schedule(t, Ev::LinkWin { link, epoch });
        }
    }
}

/// Builds and runs one network for `duration`.
pub fn simulate(spec: &NetworkSpec, duration: SimTime) -> RunResult {
    Network::new(spec).run(duration)
}
