//! Station models: single-link (SLO), dual-radio multi-link (STR),
//! single-radio multi-link (EMLSR) and interfering single-link devices.
//!
//! Every device owns one FIFO queue. Each bound link has a port with its own
//! DCF state. A packet is bound to a port when that port wins contention,
//! so a multi-link device's queue feeds whichever link gets the medium first.
//! A packet's access clock starts once it is at the head of the queue and
//! some port is free to contend for it (for EMLSR, once the radio is free).

use std::collections::VecDeque;
use std::fmt;

use crate::engine::{RngStream, SimTime, StreamPurpose};
use crate::mac::{DcfPhase, DcfState, MacParams};
use crate::metrics::{MetricsAccumulator, PacketOutcome, PacketRecord, TrafficClass};
use crate::phy::{LinkId, TxHandle};
use crate::traffic::{ArrivalProcess, TrafficConfig};

pub const DEFAULT_QUEUE_CAPACITY: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceMode {
    Slo,
    Str,
    Emlsr,
    Sld(LinkId),
}

impl DeviceMode {
    pub fn links(self) -> &'static [LinkId] {
        match self {
            DeviceMode::Slo | DeviceMode::Sld(LinkId::Link1) => &[LinkId::Link1],
            DeviceMode::Sld(LinkId::Link2) => &[LinkId::Link2],
            DeviceMode::Str | DeviceMode::Emlsr => &LinkId::ALL,
        }
    }

    pub fn class(self) -> TrafficClass {
        match self {
            DeviceMode::Sld(l) => TrafficClass::Sld(l),
            _ => TrafficClass::Station,
        }
    }
}

impl fmt::Display for DeviceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceMode::Slo => f.write_str("slo"),
            DeviceMode::Str => f.write_str("str"),
            DeviceMode::Emlsr => f.write_str("emlsr"),
            DeviceMode::Sld(l) => write!(f, "sld{}", l.number()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmlsrParams {
    /// Radio retuning time when transmitting on a different link than last.
    pub switch_delay: SimTime,
}

impl Default for EmlsrParams {
    fn default() -> Self {
        EmlsrParams {
            switch_delay: SimTime::from_micros(128),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmlsrState {
    pub active_link: Option<LinkId>,
    pub switching_until: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub enqueue: SimTime,
    pub access_start: Option<SimTime>,
    pub size_bytes: u32,
}

/// A device's attachment to one link.
#[derive(Debug, Clone)]
pub struct LinkPort {
    pub link: LinkId,
    pub dcf: DcfState,
    pub bound: Option<Packet>,
    pub rng: RngStream,
    pub tx: Option<(TxHandle, SimTime)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grant {
    /// Transmit after `delay` (zero when no radio switch is needed).
    Granted { delay: SimTime },
    Denied,
}

#[derive(Debug, Clone)]
pub struct Device {
    id: u32,
    mode: DeviceMode,
    queue: VecDeque<Packet>,
    capacity: usize,
    ports: Vec<LinkPort>,
    pub emlsr: EmlsrState,
    arrivals: ArrivalProcess,
    next_packet_id: u64,
    waiting_area_ns: u128,
    area_mark: SimTime,
    /// Pending wake-up time, to avoid scheduling duplicates.
    pub wake_at: Option<SimTime>,
}

impl Device {
    pub fn new(
        id: u32,
        mode: DeviceMode,
        traffic: TrafficConfig,
        seed: u64,
        mac: &MacParams,
        capacity: usize,
    ) -> Device {
        let ports = mode
            .links()
            .iter()
            .map(|&link| LinkPort {
                link,
                dcf: DcfState::new(link, mac),
                bound: None,
                rng: RngStream::new(seed, id, StreamPurpose::Backoff { link: link.number() }),
                tx: None,
            })
            .collect();
        Device {
            id,
            mode,
            queue: VecDeque::new(),
            capacity,
            ports,
            emlsr: EmlsrState::default(),
            arrivals: ArrivalProcess::new(traffic, RngStream::new(seed, id, StreamPurpose::Arrivals)),
            next_packet_id: 0,
            waiting_area_ns: 0,
            area_mark: SimTime::ZERO,
            wake_at: None,
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn mode(&self) -> DeviceMode {
        self.mode
    }

    pub fn class(&self) -> TrafficClass {
        self.mode.class()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn head(&self) -> Option<&Packet> {
        self.queue.front()
    }

    pub fn ports(&self) -> &[LinkPort] {
        &self.ports
    }

    pub fn port(&self, link: LinkId) -> Option<&LinkPort> {
        self.ports.iter().find(|p| p.link == link)
    }

    pub fn port_mut(&mut self, link: LinkId) -> Option<&mut LinkPort> {
        self.ports.iter_mut().find(|p| p.link == link)
    }

    pub fn next_arrival(&self) -> SimTime {
        self.arrivals.peek()
    }

    /// Some port has no packet bound and could contend for the head. A
    /// single-radio device cannot start on a new packet while its radio is
    /// busy on either link.
    pub fn has_free_port(&self) -> bool {
        if self.mode == DeviceMode::Emlsr && self.radio_busy() {
            return false;
        }
        self.ports.iter().any(|p| p.bound.is_none())
    }

    /// EMLSR radio is serving some link.
    pub fn radio_busy(&self) -> bool {
        self.ports.iter().any(|p| p.dcf.holds_radio())
    }

    /// Packets waiting that have not begun channel access.
    fn waiting(&self) -> u64 {
        let head_in_access = self.queue.front().is_some_and(|p| p.access_start.is_some());
        self.queue.len() as u64 - head_in_access as u64
    }

    fn mark_area(&mut self, now: SimTime) {
        if now > self.area_mark {
            self.waiting_area_ns += self.waiting() as u128 * (now - self.area_mark).as_nanos() as u128;
            self.area_mark = now;
        }
    }

    /// Time-average number of packets waiting (not yet in access) over `[0, now]`.
    pub fn mean_waiting(&mut self, now: SimTime) -> f64 {
        self.mark_area(now);
        if now == SimTime::ZERO {
            return 0.0;
        }
        self.waiting_area_ns as f64 / now.as_nanos() as f64
    }

    /// Enqueues every arrival up to `now`, tail-dropping at capacity.
    ///
    /// Port states must not have changed since the last call, so a new head
    /// packet starts access at its own arrival time iff a port is free now.
    pub fn catch_up(
        &mut self,
        now: SimTime,
        metrics: &mut MetricsAccumulator,
        trace: Option<&mut Vec<PacketRecord>>,
    ) {
        let class = self.class();
        let mut trace = trace;
        while self.arrivals.peek() <= now {
            if self.queue.len() >= self.capacity {
                // The queue cannot shrink before `now`, so everything up to
                // `now` is dropped.
                let first = self.arrivals.peek();
                let n = self.arrivals.discard_through(now);
                metrics.generated(class, n);
                metrics.dropped(class, n);
                if let Some(tr) = trace.as_deref_mut() {
                    for k in 0..n {
                        tr.push(PacketRecord {
                            id: self.next_packet_id + k,
                            source: self.id,
                            class,
                            enqueue: if k == 0 { first } else { now },
                            access_start: None,
                            delivered: None,
                            size_bytes: self.arrivals.config().payload_bytes(),
                            outcome: PacketOutcome::DroppedQueue,
                        });
                    }
                }
                self.next_packet_id += n;
                break;
            }
            let t = self.arrivals.take();
            self.mark_area(t);
            metrics.generated(class, 1);
            let access_start = (self.queue.is_empty() && self.has_free_port()).then_some(t);
            self.queue.push_back(Packet {
                id: self.next_packet_id,
                enqueue: t,
                access_start,
                size_bytes: self.arrivals.config().payload_bytes(),
            });
            self.next_packet_id += 1;
        }
        self.mark_area(now);
    }

    /// Starts the head packet's access clock if a port is free to serve it.
    pub fn refresh_head(&mut self, now: SimTime) {
        if !self.has_free_port() {
            return;
        }
        self.mark_area(now);
        if let Some(head) = self.queue.front_mut() {
            head.access_start.get_or_insert(now);
        }
    }

    /// Pops the head-of-line packet and binds it to `link`'s port. The new
    /// head's access clock is left to [`Device::refresh_head`].
    pub fn dispatch_head(&mut self, link: LinkId, now: SimTime) -> Option<&Packet> {
        let idx = self.ports.iter().position(|p| p.link == link)?;
        if self.ports[idx].bound.is_some() {
            return None;
        }
        self.mark_area(now);
        let mut pkt = self.queue.pop_front()?;
        pkt.access_start.get_or_insert(now);
        self.ports[idx].bound = Some(pkt);
        self.ports[idx].bound.as_ref()
    }

    /// Single-radio arbitration when `link`'s counter expires at `now`.
    ///
    /// Denied while the radio is busy elsewhere, while switching, or when the
    /// other link expires at the same instant and has the lower id. A grant
    /// on a link other than the last one used costs `switch_delay`.
    pub fn emlsr_tx_grant(
        &mut self,
        link: LinkId,
        now: SimTime,
        mac: &MacParams,
        params: &EmlsrParams,
    ) -> Grant {
        if self.mode != DeviceMode::Emlsr {
            return Grant::Granted {
                delay: SimTime::ZERO,
            };
        }
        let others = self.ports.iter().filter(|p| p.link != link);
        for p in others {
            if p.dcf.holds_radio() {
                return Grant::Denied;
            }
            if p.link < link && p.dcf.tx_due(mac) == Some(now) {
                return Grant::Denied;
            }
        }
        if self.emlsr.switching_until.is_some_and(|t| t > now) {
            return Grant::Denied;
        }
        let delay = match self.emlsr.active_link {
            Some(active) if active != link => params.switch_delay,
            _ => SimTime::ZERO,
        };
        self.emlsr.active_link = Some(link);
        self.emlsr.switching_until = (delay > SimTime::ZERO).then_some(now + delay);
        Grant::Granted { delay }
    }

    /// Packets still in the device when a run ends, for tracing.
    pub fn pending_records(&self) -> Vec<PacketRecord> {
        let bound = self.ports.iter().filter_map(|p| p.bound.as_ref());
        bound
            .chain(self.queue.iter())
            .map(|p| PacketRecord {
                id: p.id,
                source: self.id,
                class: self.class(),
                enqueue: p.enqueue,
                access_start: p.access_start,
                delivered: None,
                size_bytes: p.size_bytes,
                outcome: PacketOutcome::Pending,
            })
            .collect()
    }

    /// True when `link`'s port is idle and there is work it could take.
    pub fn wants_access(&self, link: LinkId) -> bool {
        self.port(link)
            .is_some_and(|p| p.dcf.phase() == DcfPhase::Idle && (p.bound.is_some() || !self.queue.is_empty()))
    }
}

/// Interfering single-link devices: `n1` on link 1 then `n2` on link 2, with
/// ids counting up from `first_id`.
pub fn make_interferers(
    n1: u32,
    n2: u32,
    first_id: u32,
    traffic: TrafficConfig,
    seed: u64,
    mac: &MacParams,
) -> Vec<Device> {
    let links = std::iter::repeat_n(LinkId::Link1, n1 as usize)
        .chain(std::iter::repeat_n(LinkId::Link2, n2 as usize));
    links
        .enumerate()
        .map(|(i, link)| {
            Device::new(
                first_id + i as u32,
                DeviceMode::Sld(link),
                traffic,
                seed,
                mac,
                DEFAULT_QUEUE_CAPACITY,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device(mode: DeviceMode, lambda: f64) -> Device {
        let traffic = TrafficConfig::new(lambda, 1500).unwrap();
        Device::new(0, mode, traffic, 1, &MacParams::default(), DEFAULT_QUEUE_CAPACITY)
    }

    fn fill(d: &mut Device, until: SimTime) -> MetricsAccumulator {
        let mut m = MetricsAccumulator::new();
        d.catch_up(until, &mut m, None);
        m
    }

    #[test]
    fn str_binds_one_packet_per_link() {
        let mut d = device(DeviceMode::Str, 1.0);
        fill(&mut d, SimTime::from_micros(3));
        assert!(d.queue_len() >= 2);
        let now = SimTime::from_micros(3);
        let a = d.dispatch_head(LinkId::Link1, now).unwrap().id;
        let b = d.dispatch_head(LinkId::Link2, now).unwrap().id;
        assert_ne!(a, b);
        assert!(d.port(LinkId::Link1).unwrap().bound.is_some());
        assert!(d.port(LinkId::Link2).unwrap().bound.is_some());
        // Both ports busy: nothing else can bind.
        assert!(d.dispatch_head(LinkId::Link1, now).is_none());
    }

    #[test]
    fn slo_never_touches_link2() {
        let mut d = device(DeviceMode::Slo, 1.0);
        fill(&mut d, SimTime::from_micros(10));
        assert!(d.port(LinkId::Link2).is_none());
        assert!(d.dispatch_head(LinkId::Link2, SimTime::from_micros(10)).is_none());
        assert!(d.dispatch_head(LinkId::Link1, SimTime::from_micros(10)).is_some());
    }

    #[test]
    fn emlsr_blocks_second_link_while_transmitting() {
        let mac = MacParams::default();
        let em = EmlsrParams::default();
        let mut d = device(DeviceMode::Emlsr, 1.0);
        let now = SimTime::from_micros(50);
        assert_eq!(
            d.emlsr_tx_grant(LinkId::Link1, now, &mac, &em),
            Grant::Granted { delay: SimTime::ZERO }
        );
        d.port_mut(LinkId::Link1).unwrap().dcf.begin_transmit();
        assert_eq!(d.emlsr_tx_grant(LinkId::Link2, now, &mac, &em), Grant::Denied);
    }

    #[test]
    fn emlsr_same_slot_tie_goes_to_lower_link() {
        let mac = MacParams::default();
        let em = EmlsrParams::default();
        let mut d = device(DeviceMode::Emlsr, 1.0);
        let origin = SimTime::from_micros(34);
        for l in LinkId::ALL {
            let p = d.port_mut(l).unwrap();
            p.dcf.start_access_with_backoff(SimTime::ZERO, 0);
            p.dcf.resume_countdown(origin);
        }
        assert_eq!(d.emlsr_tx_grant(LinkId::Link2, origin, &mac, &em), Grant::Denied);
        assert!(matches!(
            d.emlsr_tx_grant(LinkId::Link1, origin, &mac, &em),
            Grant::Granted { .. }
        ));
    }

    #[test]
    fn emlsr_switch_delay_only_on_link_change() {
        let mac = MacParams::default();
        let em = EmlsrParams::default();
        let mut d = device(DeviceMode::Emlsr, 1.0);
        let t1 = SimTime::from_micros(100);
        assert_eq!(d.emlsr_tx_grant(LinkId::Link1, t1, &mac, &em), Grant::Granted { delay: SimTime::ZERO });
        let t2 = SimTime::from_micros(500);
        assert_eq!(d.emlsr_tx_grant(LinkId::Link1, t2, &mac, &em), Grant::Granted { delay: SimTime::ZERO });
        let t3 = SimTime::from_micros(900);
        assert_eq!(
            d.emlsr_tx_grant(LinkId::Link2, t3, &mac, &em),
            Grant::Granted { delay: SimTime::from_micros(128) }
        );
        assert_eq!(d.emlsr.switching_until, Some(t3 + SimTime::from_micros(128)));
        // Still switching: nothing else may be granted.
        assert_eq!(d.emlsr_tx_grant(LinkId::Link1, t3 + SimTime::from_micros(1), &mac, &em), Grant::Denied);
    }

    #[test]
    fn str_is_never_denied() {
        let mac = MacParams::default();
        let em = EmlsrParams::default();
        let mut d = device(DeviceMode::Str, 1.0);
        d.port_mut(LinkId::Link1).unwrap().dcf.begin_transmit();
        assert!(matches!(
            d.emlsr_tx_grant(LinkId::Link2, SimTime::ZERO, &mac, &em),
            Grant::Granted { .. }
        ));
    }

    #[test]
    fn interferer_sets() {
        let traffic = TrafficConfig::new(1e-3, 1500).unwrap();
        let mac = MacParams::default();
        let one = make_interferers(1, 0, 5, traffic, 1, &mac);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].mode(), DeviceMode::Sld(LinkId::Link1));
        assert_eq!(one[0].id(), 5);

        let sym = make_interferers(5, 5, 5, traffic, 1, &mac);
        let on = |l| sym.iter().filter(|d| d.mode() == DeviceMode::Sld(l)).count();
        assert_eq!((on(LinkId::Link1), on(LinkId::Link2)), (5, 5));
        assert!(sym.iter().all(|d| d.ports().len() == 1));

        assert!(make_interferers(0, 0, 5, traffic, 1, &mac).is_empty());
    }

    #[test]
    fn tail_drop_at_capacity() {
        let mut d = device(DeviceMode::Slo, 1.0);
        let m = fill(&mut d, SimTime::from_millis(10));
        assert_eq!(d.queue_len(), DEFAULT_QUEUE_CAPACITY);
        let f = m.finish(SimTime::from_millis(10));
        assert!(f.generated > 9_000, "{}", f.generated);
        assert!(f.drop_rate > 0.9);
    }

    #[test]
    fn head_access_starts_at_arrival_when_port_free() {
        let mut d = device(DeviceMode::Slo, 1e-3);
        let first = d.next_arrival();
        fill(&mut d, first);
        assert_eq!(d.head().unwrap().access_start, Some(first));
        d.dispatch_head(LinkId::Link1, first);
        let later = SimTime::from_secs(1);
        fill(&mut d, later);
        // Port is bound, so the new head has not started access yet.
        if let Some(h) = d.head() {
            assert_eq!(h.access_start, None);
        }
    }
}
