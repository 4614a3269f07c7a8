//! Per-packet records and their aggregation into one CSV row per run.
//!
//! Delay semantics, per delivered packet:
//! - queuing delay: enqueue → start of channel access for that packet,
//! - access delay: start of access → end of its ACK,
//! - end-to-end delay: their sum.
//!
//! Means are over delivered packets of the stations under study; interfering
//! single-link devices contribute throughput only.

use std::fmt::Write as _;

use crate::engine::SimTime;
use crate::phy::LinkId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficClass {
    /// A device of the mode under study (SLO, STR or EMLSR).
    Station,
    /// An interfering single-link device.
    Sld(LinkId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketOutcome {
    Delivered,
    DroppedQueue,
    DroppedRetry,
    /// Still queued or in service when the run ended.
    Pending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub id: u64,
    pub source: u32,
    pub class: TrafficClass,
    pub enqueue: SimTime,
    pub access_start: Option<SimTime>,
    pub delivered: Option<SimTime>,
    pub size_bytes: u32,
    pub outcome: PacketOutcome,
}

impl PacketRecord {
    pub fn queuing_delay(&self) -> Option<SimTime> {
        Some(self.access_start? - self.enqueue)
    }

    pub fn access_delay(&self) -> Option<SimTime> {
        Some(self.delivered? - self.access_start?)
    }

    pub fn e2e_delay(&self) -> Option<SimTime> {
        Some(self.delivered? - self.enqueue)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ClassTotals {
    generated: u64,
    delivered: u64,
    delivered_bits: u64,
    dropped: u64,
}

/// Running totals; equivalent to [`record_and_aggregate`] over the same
/// records but O(1) in memory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsAccumulator {
    station: ClassTotals,
    sld: [ClassTotals; 2],
    queue_ns: u128,
    access_ns: u128,
    e2e_ns: u128,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    fn totals(&mut self, class: TrafficClass) -> &mut ClassTotals {
        match class {
            TrafficClass::Station => &mut self.station,
            TrafficClass::Sld(l) => &mut self.sld[l.index()],
        }
    }

    pub fn generated(&mut self, class: TrafficClass, n: u64) {
        self.totals(class).generated += n;
    }

    pub fn dropped(&mut self, class: TrafficClass, n: u64) {
        self.totals(class).dropped += n;
    }

    pub fn delivered(
        &mut self,
        class: TrafficClass,
        bytes: u32,
        enqueue: SimTime,
        access_start: SimTime,
        done: SimTime,
    ) {
        let t = self.totals(class);
        t.delivered += 1;
        t.delivered_bits += bytes as u64 * 8;
        if class == TrafficClass::Station {
            self.queue_ns += (access_start - enqueue).as_nanos() as u128;
            self.access_ns += (done - access_start).as_nanos() as u128;
            self.e2e_ns += (done - enqueue).as_nanos() as u128;
        }
    }

    pub fn record(&mut self, r: &PacketRecord) {
        self.generated(r.class, 1);
        match r.outcome {
            PacketOutcome::Delivered => self.delivered(
                r.class,
                r.size_bytes,
                r.enqueue,
                r.access_start.expect("delivered packet without access start"),
                r.delivered.expect("delivered packet without delivery time"),
            ),
            PacketOutcome::DroppedQueue | PacketOutcome::DroppedRetry => self.dropped(r.class, 1),
            PacketOutcome::Pending => {}
        }
    }

    pub fn finish(&self, duration: SimTime) -> Metrics {
        assert!(duration > SimTime::ZERO, "aggregation over an empty interval");
        let us = duration.as_micros_f64();
        let mbps = |bits: u64| bits as f64 / us;
        let sld_bits = self.sld[0].delivered_bits + self.sld[1].delivered_bits;
        let n = self.station.delivered;
        let mean_ms = |ns: u128| (n > 0).then(|| ns as f64 / n as f64 / 1e6);
        Metrics {
            thpt_mbps: mbps(self.station.delivered_bits + sld_bits),
            thpt_mld_mbps: mbps(self.station.delivered_bits),
            thpt_sld1_mbps: mbps(self.sld[0].delivered_bits),
            thpt_sld2_mbps: mbps(self.sld[1].delivered_bits),
            qdelay_ms: mean_ms(self.queue_ns),
            adelay_ms: mean_ms(self.access_ns),
            e2e_ms: mean_ms(self.e2e_ns),
            drop_rate: if self.station.generated > 0 {
                self.station.dropped as f64 / self.station.generated as f64
            } else {
                0.0
            },
            delivered: n,
            generated: self.station.generated,
            sld_delivered: [self.sld[0].delivered, self.sld[1].delivered],
        }
    }
}

/// Aggregated metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub thpt_mbps: f64,
    pub thpt_mld_mbps: f64,
    pub thpt_sld1_mbps: f64,
    pub thpt_sld2_mbps: f64,
    pub qdelay_ms: Option<f64>,
    pub adelay_ms: Option<f64>,
    pub e2e_ms: Option<f64>,
    pub drop_rate: f64,
    pub delivered: u64,
    pub generated: u64,
    pub sld_delivered: [u64; 2],
}

/// Throughput and delay summary over a finished set of records.
///
/// # Panics
///
/// Panics when `duration` is zero.
pub fn record_and_aggregate(records: &[PacketRecord], duration: SimTime) -> Metrics {
    let mut acc = MetricsAccumulator::new();
    for r in records {
        acc.record(r);
    }
    acc.finish(duration)
}

pub const CSV_HEADER: &str = "scenario,mode,lambda,offered_mbps,thpt_mbps,thpt_mld_mbps,thpt_sld1_mbps,thpt_sld2_mbps,qdelay_ms,adelay_ms,e2e_ms,drop_rate,delivered,duration_s,seed";

/// One CSV row: a single (scenario, λ) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub mode: String,
    pub lambda: f64,
    pub offered_mbps: f64,
    pub thpt_mbps: f64,
    pub thpt_mld_mbps: f64,
    pub thpt_sld1_mbps: f64,
    pub thpt_sld2_mbps: f64,
    pub qdelay_ms: Option<f64>,
    pub adelay_ms: Option<f64>,
    pub e2e_ms: Option<f64>,
    pub drop_rate: f64,
    pub delivered: u64,
    pub duration_s: f64,
    pub seed: u64,
}

impl SummaryRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::new();
        write!(
            s,
            "{},{},{:e},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{:.6},{},{},{}",
            self.scenario,
            self.mode,
            self.lambda,
            self.offered_mbps,
            self.thpt_mbps,
            self.thpt_mld_mbps,
            self.thpt_sld1_mbps,
            self.thpt_sld2_mbps,
            opt(self.qdelay_ms),
            opt(self.adelay_ms),
            opt(self.e2e_ms),
            self.drop_rate,
            self.delivered,
            self.duration_s,
            self.seed
        )
        .unwrap();
        s
    }

    /// Parses a line written by [`SummaryRow::to_csv_line`].
    pub fn from_csv_line(line: &str) -> Option<SummaryRow> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 15 {
            return None;
        }
        let num = |s: &str| s.parse::<f64>().ok();
        let opt = |s: &str| if s.is_empty() { Some(None) } else { num(s).map(Some) };
        Some(SummaryRow {
            scenario: f[0].to_string(),
            mode: f[1].to_string(),
            lambda: num(f[2])?,
            offered_mbps: num(f[3])?,
            thpt_mbps: num(f[4])?,
            thpt_mld_mbps: num(f[5])?,
            thpt_sld1_mbps: num(f[6])?,
            thpt_sld2_mbps: num(f[7])?,
            qdelay_ms: opt(f[8])?,
            adelay_ms: opt(f[9])?,
            e2e_ms: opt(f[10])?,
            drop_rate: num(f[11])?,
            delivered: f[12].parse().ok()?,
            duration_s: num(f[13])?,
            seed: f[14].parse().ok()?,
        })
    }
}

/// Header plus one line per row, newline-terminated.
pub fn to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}
