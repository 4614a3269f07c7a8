use std::collections::HashMap;

use mlosim::metrics::{PacketOutcome, TrafficClass};
use mlosim::network::{Network, TxRecord};
use mlosim::phy::TxOutcome;
use mlosim::traffic::TrafficConfig;
use mlosim::{DeviceMode, LinkId, NetworkSpec, SimTime};

fn with_slds(mode: DeviceMode, n: u32, lambda: f64, n_sld: [u32; 2], seed: u64) -> NetworkSpec {
    let mut spec = NetworkSpec::simple(mode, n, lambda, seed);
    spec.n_sld = n_sld;
    spec.sld_traffic = TrafficConfig::new(1e-3, 1500).unwrap();
    spec
}

#[test]
fn emlsr_never_transmits_on_both_links_at_once() {
    let spec = NetworkSpec::simple(DeviceMode::Emlsr, 3, 1e-2, 4);
    let tr = Network::new(&spec).with_trace().run(SimTime::from_secs(2)).trace.unwrap();
    let mut by_dev: HashMap<u32, Vec<TxRecord>> = HashMap::new();
    for t in tr.tx {
        by_dev.entry(t.device).or_default().push(t);
    }
    let mut both = 0;
    for (dev, mut txs) in by_dev {
        if txs.iter().any(|t| t.link == LinkId::Link1) && txs.iter().any(|t| t.link == LinkId::Link2) {
            both += 1;
        }
        txs.sort_by_key(|t| t.start);
        for w in txs.windows(2) {
            assert!(w[0].end <= w[1].start, "device {dev} overlaps: {:?} {:?}", w[0], w[1]);
        }
    }
    assert_eq!(both, 3, "every EMLSR device should use both links");
}

#[test]
fn str_uses_both_links_concurrently() {
    let spec = NetworkSpec::simple(DeviceMode::Str, 1, 1e-1, 4);
    let tr = Network::new(&spec).with_trace().run(SimTime::from_millis(200)).trace.unwrap();
    let l1: Vec<_> = tr.tx.iter().filter(|t| t.link == LinkId::Link1).collect();
    let l2: Vec<_> = tr.tx.iter().filter(|t| t.link == LinkId::Link2).collect();
    let overlapping = l1
        .iter()
        .filter(|a| l2.iter().any(|b| a.start < b.end && b.start < a.end))
        .count();
    assert!(overlapping > l1.len() / 2, "{overlapping} of {}", l1.len());
}

#[test]
fn str_link1_unaffected_by_link2_load() {
    let link1 = |n2: u32| {
        let spec = with_slds(DeviceMode::Str, 1, 1e-1, [3, n2], 8);
        let tr = Network::new(&spec).with_trace().run(SimTime::from_secs(1)).trace.unwrap();
        tr.tx
            .into_iter()
            .filter(|t| t.link == LinkId::Link1)
            .collect::<Vec<_>>()
    };
    let quiet = link1(0);
    let loaded = link1(6);
    assert!(quiet.len() > 1000);
    assert_eq!(quiet, loaded);
}

#[test]
fn slds_stay_on_their_link() {
    let spec = with_slds(DeviceMode::Str, 2, 1e-3, [2, 3], 5);
    let tr = Network::new(&spec).with_trace().run(SimTime::from_secs(2)).trace.unwrap();
    // Ids 2..4 are on link 1, 4..7 on link 2.
    for t in &tr.tx {
        match t.device {
            2 | 3 => assert_eq!(t.link, LinkId::Link1),
            4..=6 => assert_eq!(t.link, LinkId::Link2),
            _ => {}
        }
    }
    assert!(tr.tx.iter().any(|t| t.device == 6));
    for p in &tr.packets {
        if let TrafficClass::Sld(l) = p.class {
            assert_eq!(l, if p.source < 4 { LinkId::Link1 } else { LinkId::Link2 });
        }
    }
}

#[test]
fn packets_are_conserved() {
    for (mode, lambda) in [(DeviceMode::Slo, 1e-1), (DeviceMode::Emlsr, 3e-3), (DeviceMode::Str, 1e-2)] {
        let spec = with_slds(mode, 4, lambda, [1, 1], 6);
        let r = Network::new(&spec).with_trace().run(SimTime::from_secs(1));
        let tr = r.trace.unwrap();
        let mut per_dev: HashMap<u32, (u64, u64)> = HashMap::new();
        for p in &tr.packets {
            let e = per_dev.entry(p.source).or_default();
            e.0 += 1;
            if p.outcome == PacketOutcome::Delivered {
                e.1 += 1;
            }
        }
        assert!(per_dev.values().all(|(g, d)| d <= g));
        let station_records = tr.packets.iter().filter(|p| p.class == TrafficClass::Station);
        assert_eq!(station_records.clone().count() as u64, r.metrics.generated, "{mode}");
        let delivered = station_records
            .filter(|p| p.outcome == PacketOutcome::Delivered)
            .count() as u64;
        assert_eq!(delivered, r.metrics.delivered);
        // Ids are unique per source.
        let mut ids: Vec<(u32, u64)> = tr.packets.iter().map(|p| (p.source, p.id)).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), tr.packets.len());
    }
}

#[test]
fn collision_probability_grows_with_contenders() {
    let p: Vec<f64> = [2, 5, 10]
        .iter()
        .map(|&n| {
            let spec = NetworkSpec::simple(DeviceMode::Slo, n, 1e-1, 2);
            Network::new(&spec).run(SimTime::from_secs(3)).links[0].collision_probability()
        })
        .collect();
    assert!(p[0] < p[1] && p[1] < p[2], "{p:?}");
}

#[test]
fn collisions_are_simultaneous_starts() {
    let spec = NetworkSpec::simple(DeviceMode::Slo, 5, 1e-1, 12);
    let tr = Network::new(&spec).with_trace().run(SimTime::from_millis(500)).trace.unwrap();
    let mut starts: HashMap<SimTime, Vec<TxOutcome>> = HashMap::new();
    for t in &tr.tx {
        starts.entry(t.start).or_default().push(t.outcome);
    }
    for (at, outcomes) in starts {
        if outcomes.len() > 1 {
            assert!(outcomes.iter().all(|o| *o == TxOutcome::Collided), "{at}");
        } else {
            assert_eq!(outcomes[0], TxOutcome::Success, "{at}");
        }
    }
}

#[test]
fn littles_law_for_the_waiting_line() {
    // One station at about 30% utilisation.
    let lambda = 8e-4;
    let spec = NetworkSpec::simple(DeviceMode::Slo, 1, lambda, 21);
    let end = SimTime::from_secs(100);
    let mut net = Network::new(&spec);
    net.run_until(end);
    let waiting = net.devices_mut()[0].mean_waiting(end);
    let r = net.finish(end);
    let wait_us = r.metrics.qdelay_ms.unwrap() * 1e3;
    let rel = (waiting - lambda * wait_us).abs() / (lambda * wait_us);
    assert!(rel < 0.1, "L {waiting} vs λW {}", lambda * wait_us);
}

#[test]
fn throughput_bounded_by_link_capacity() {
    for mode in [DeviceMode::Slo, DeviceMode::Str, DeviceMode::Emlsr] {
        let spec = NetworkSpec::simple(mode, 5, 1e-1, 3);
        let r = Network::new(&spec).run(SimTime::from_secs(2));
        let per_link = 12_000.0 / (34.0 + 203.2 + 16.0 + 53.6);
        assert!(r.metrics.thpt_mbps < 2.0 * per_link, "{mode}: {}", r.metrics.thpt_mbps);
        for l in r.links {
            assert!(l.busy <= SimTime::from_secs(2));
        }
    }
}

#[test]
fn same_seed_same_trace() {
    let spec = with_slds(DeviceMode::Emlsr, 3, 5e-3, [2, 2], 99);
    let a = Network::new(&spec).with_trace().run(SimTime::from_secs(1));
    let b = Network::new(&spec).with_trace().run(SimTime::from_secs(1));
    assert_eq!(a.trace.unwrap().tx, b.trace.unwrap().tx);
    assert_eq!(a.metrics, b.metrics);
}
