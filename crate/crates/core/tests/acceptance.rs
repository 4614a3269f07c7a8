//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured values, then asserts.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! the report.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mlosim::metrics::{to_csv, SummaryRow};
use mlosim::network::Network;
use mlosim::phy::{ack_airtime, frame_airtime};
use mlosim::scenario::{preset, run_scenario, Mode, ScenarioConfig, PRESET_NAMES};
use mlosim::{DeviceMode, LinkConfig, LinkId, MacParams, NetworkSpec, SimTime};

const SATURATED: f64 = 1e-1;

type Field = fn(&SummaryRow) -> Option<f64>;

fn report(n: u32, ok: bool, detail: String) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn rows(name: &'static str) -> &'static [SummaryRow] {
    static CACHE: OnceLock<BTreeMap<&'static str, Vec<SummaryRow>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        PRESET_NAMES
            .iter()
            .map(|&n| (n, preset(n).unwrap().run().unwrap()))
            .collect()
    });
    &all[name]
}

fn trace<'a>(rows: &'a [SummaryRow], scenario: &str, mode: &str) -> Vec<&'a SummaryRow> {
    let mut v: Vec<_> = rows
        .iter()
        .filter(|r| r.scenario == scenario && r.mode == mode)
        .collect();
    v.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    assert!(!v.is_empty(), "no rows for {scenario} {mode}");
    v
}

fn saturated<'a>(rows: &'a [SummaryRow], scenario: &str, mode: &str) -> &'a SummaryRow {
    trace(rows, scenario, mode)
        .into_iter()
        .find(|r| r.lambda == SATURATED)
        .expect("no saturated point")
}

/// Smallest λ whose throughput is within 5% of the value at the largest λ.
fn knee(trace: &[&SummaryRow], thpt: impl Fn(&SummaryRow) -> f64) -> f64 {
    let plateau = thpt(trace.last().unwrap());
    trace
        .iter()
        .find(|r| (thpt(r) - plateau).abs() <= 0.05 * plateau)
        .unwrap()
        .lambda
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

// Mean DCF exchange for one uncontended 1500-byte frame at 20 MHz MCS 6:
// DIFS + mean backoff (CWmin/2 slots) + data + SIFS + ACK.
fn mean_service_us() -> f64 {
    let bits: f64 = (1500.0 + 36.0) * 8.0;
    let bits_per_symbol = 234.0 * 6.0 * 0.75;
    let data = 40.0 + (bits / bits_per_symbol).ceil() * 13.6;
    let ack = 40.0 + 13.6;
    34.0 + 7.5 * 9.0 + data + 16.0 + ack
}

#[test]
fn criterion_01_base_throughput_ordering() {
    let mut wall = Vec::new();
    for mode in Mode::ALL {
        let cfg = ScenarioConfig {
            mode,
            lambda: SATURATED,
            duration_s: 10.0,
            ..ScenarioConfig::default()
        };
        let t = Instant::now();
        run_scenario(&cfg).unwrap();
        wall.push(t.elapsed());
    }
    let base = rows("base");
    let s = |m| saturated(base, "base", m).thpt_mbps;
    let (slo, strm, emlsr) = (s("slo"), s("str"), s("emlsr"));
    let slowest = wall.iter().max().copied().unwrap_or(Duration::ZERO);
    let ok = strm > emlsr && emlsr > slo && strm >= 2.0 * slo && slowest <= Duration::from_secs(120);
    report(
        1,
        ok,
        format!(
            "STR {strm:.2} EMLSR {emlsr:.2} SLO {slo:.2} Mbps, STR/SLO {:.4}, slowest run {:.2?}",
            strm / slo,
            slowest
        ),
    );
}

#[test]
fn criterion_02_delay_ordering() {
    let base = rows("base");
    let get = |m, f: Field| f(saturated(base, "base", m)).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    let metrics: [(&str, Field); 3] = [
        ("queuing", |r| r.qdelay_ms),
        ("access", |r| r.adelay_ms),
        ("e2e", |r| r.e2e_ms),
    ];
    for (name, f) in metrics {
        let (st, em, sl) = (get("str", f), get("emlsr", f), get("slo", f));
        ok &= st < em && em < sl;
        detail.push(format!("{name} {st:.3}/{em:.3}/{sl:.3}"));
    }
    report(2, ok, format!("STR/EMLSR/SLO ms: {}", detail.join(", ")));
}

#[test]
fn criterion_03_queuing_dominates_access() {
    let base = rows("base");
    let mut ok = true;
    let mut detail = Vec::new();
    for m in ["slo", "str", "emlsr"] {
        let r = saturated(base, "base", m);
        let ratio = r.qdelay_ms.unwrap() / r.adelay_ms.unwrap();
        ok &= ratio >= 10.0;
        detail.push(format!("{m} {ratio:.0}x"));
    }
    report(3, ok, detail.join(", "));
}

#[test]
fn criterion_04_mcs_monotonicity() {
    let r = rows("varied-mcs");
    let mut ok = true;
    let mut detail = Vec::new();
    for m in ["str", "emlsr"] {
        let t: Vec<f64> = [2, 4, 6, 8]
            .iter()
            .map(|k| saturated(r, &format!("varied-mcs/mcs1={k}"), m).thpt_mbps)
            .collect();
        let inc: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let lo = inc.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = inc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ok &= lo > 0.0 && hi <= 3.0 * lo;
        detail.push(format!("{m} {t:.2?} steps {inc:.2?}"));
    }
    report(4, ok, detail.join("; "));
}

#[test]
fn criterion_05_bandwidth_monotonicity() {
    let r = rows("varied-bw");
    let mut ok = true;
    let mut detail = Vec::new();
    let at = |m, w| saturated(r, &format!("varied-bw/width1={w}"), m).thpt_mbps;
    for m in ["str", "emlsr"] {
        let t: Vec<f64> = [20, 40, 80].iter().map(|&w| at(m, w)).collect();
        ok &= t.windows(2).all(|w| w[1] > w[0]);
        detail.push(format!("{m} {t:.2?}"));
    }
    for w in [20, 40, 80] {
        ok &= at("str", w) > at("emlsr", w);
    }
    report(5, ok, detail.join("; "));
}

#[test]
fn criterion_06_network_size() {
    let r = rows("network-size");
    let sc = |n: u32| format!("network-size/nStations={n}");
    let s5 = saturated(r, &sc(5), "str").thpt_mbps;
    let s30 = saturated(r, &sc(30), "str").thpt_mbps;
    let mut ok = s5 > s30;
    let mut detail = vec![format!("STR 5 STAs {s5:.2} vs 30 STAs {s30:.2} Mbps")];
    for m in ["slo", "str", "emlsr"] {
        let knees: Vec<f64> = (1..=6)
            .map(|k| knee(&trace(r, &sc(5 * k), m), |r| r.thpt_mbps))
            .collect();
        ok &= knees.windows(2).all(|w| w[1] <= w[0]);
        detail.push(format!("{m} knees {}", sci(&knees)));
    }
    report(6, ok, detail.join("; "));
}

#[test]
fn criterion_07_asymmetric_interference() {
    let r = rows("interference-asym");
    let mut ok = true;
    let mut detail = Vec::new();
    for m in ["str", "emlsr"] {
        let mld = |a, b| {
            saturated(r, &format!("interference-asym/nSldLink1={a};nSldLink2={b}"), m).thpt_mld_mbps
        };
        let clean = mld(0, 0);
        let d1 = clean - mld(1, 0);
        let d2 = clean - mld(0, 1);
        let rel = (d1 - d2).abs() / d1.abs().max(d2.abs());
        ok &= d1 > 0.0 && d2 > 0.0 && rel <= 0.2;
        detail.push(format!("{m} link1 -{d1:.2} link2 -{d2:.2} Mbps (diff {:.1}%)", rel * 100.0));
    }
    report(7, ok, detail.join("; "));
}

#[test]
fn criterion_08_symmetric_interference() {
    let r = rows("interference-sym");
    let mut ok = true;
    let mut detail = Vec::new();
    for m in ["str", "emlsr"] {
        let mut mld = Vec::new();
        for k in [5u32, 10, 15, 20] {
            let row = saturated(r, &format!("interference-sym/nSldLink1={k};nSldLink2={k}"), m);
            mld.push(row.thpt_mld_mbps);
            let (a, b) = (row.thpt_sld1_mbps / k as f64, row.thpt_sld2_mbps / k as f64);
            let rel = (a - b).abs() / a.max(b);
            ok &= rel <= 0.1;
        }
        ok &= mld.windows(2).all(|w| w[1] <= w[0]);
        detail.push(format!("{m} MLD {mld:.2?}"));
    }
    report(8, ok, detail.join("; "));
}

#[test]
fn criterion_09_single_mld_knee() {
    let base_knee = knee(&trace(rows("base"), "base", "str"), |r| r.thpt_mbps);
    let r = rows("single-mld-str");
    let mut ok = true;
    let mut knees = Vec::new();
    for k in [5u32, 10, 15, 20] {
        let kn = knee(
            &trace(r, &format!("single-mld-str/nSldLink1={k};nSldLink2={k}"), "str"),
            |r| r.thpt_mld_mbps,
        );
        ok &= kn > base_knee;
        knees.push(kn);
    }
    report(9, ok, format!("base STR knee {base_knee:.2e}, single-MLD knees {}", sci(&knees)));
}

#[test]
fn criterion_10_md1_queuing_delay() {
    let service = mean_service_us();
    let mut ok = true;
    let mut detail = Vec::new();
    for rho in [0.2, 0.5] {
        let cfg = ScenarioConfig {
            mode: Mode::Slo,
            n_stations: 1,
            lambda: rho / service,
            duration_s: 200.0,
            ..ScenarioConfig::default()
        };
        let row = run_scenario(&cfg).unwrap();
        let expect_us = rho * service / (2.0 * (1.0 - rho));
        let got_us = row.qdelay_ms.unwrap() * 1e3;
        let rel = (got_us - expect_us).abs() / expect_us;
        ok &= rel <= 0.1;
        detail.push(format!("rho {rho}: {got_us:.2} vs {expect_us:.2} us ({:.1}%)", rel * 100.0));
    }
    report(10, ok, detail.join("; "));
}

#[test]
fn criterion_11_saturated_service_time() {
    let link = LinkConfig::new(LinkId::Link1, 20, 6).unwrap();
    let mac = MacParams::default();
    // Same closed form assembled from the library's own airtime functions.
    let closed = mac.difs.as_micros_f64()
        + mac.cw_min as f64 / 2.0 * mac.slot.as_micros_f64()
        + frame_airtime(1500, &link).as_micros_f64()
        + mac.sifs.as_micros_f64()
        + ack_airtime().as_micros_f64();
    assert!((closed - mean_service_us()).abs() < 1e-9);

    let spec = NetworkSpec::simple(DeviceMode::Slo, 1, SATURATED, 11);
    let run = Network::new(&spec).with_trace().run(SimTime::from_secs(5));
    let mut done: Vec<SimTime> = run
        .trace
        .unwrap()
        .packets
        .iter()
        .filter_map(|p| p.delivered)
        .collect();
    done.sort();
    let n = done.len();
    let mean = (done[n - 1] - done[0]).as_micros_f64() / (n - 1) as f64;
    let rel = (mean - closed).abs() / closed;
    report(
        11,
        n >= 10_000 && rel <= 0.02,
        format!("{n} packets, mean inter-departure {mean:.2} vs {closed:.2} us ({:.2}%)", rel * 100.0),
    );
}

#[test]
fn criterion_12_determinism() {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in PRESET_NAMES {
        let first = to_csv(rows(name));
        let again = to_csv(&preset(name).unwrap().run().unwrap());
        let same = first == again;
        ok &= same;
        if !same {
            detail.push(format!("{name} differs"));
        }
    }
    if detail.is_empty() {
        detail.push(format!("{} presets byte-identical", PRESET_NAMES.len()));
    }
    report(12, ok, detail.join(", "));
}
