//! Run configuration, experiment presets and the λ-sweep runner.
//!
//! A configuration is a flat `key=value` file using the same names as the
//! command-line flags:
//!
//! ```text
//! mode=emlsr
//! nStations=5
//! lambda=1e-3
//! mcs1=6
//! width1=20
//! ```
//!
//! Missing keys keep their defaults; `#` starts a comment line.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::devices::{DeviceMode, EmlsrParams, DEFAULT_QUEUE_CAPACITY};
use crate::engine::{derive_seed, SimTime};
use crate::error::{ConfigError, SweepError};
use crate::mac::MacParams;
use crate::metrics::{to_csv, SummaryRow};
use crate::network::{simulate, NetworkSpec};
use crate::phy::{LinkConfig, LinkId};
use crate::traffic::{TrafficConfig, DEFAULT_PAYLOAD_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Slo,
    Str,
    Emlsr,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Slo, Mode::Str, Mode::Emlsr];

    pub fn device_mode(self) -> DeviceMode {
        match self {
            Mode::Slo => DeviceMode::Slo,
            Mode::Str => DeviceMode::Str,
            Mode::Emlsr => DeviceMode::Emlsr,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Slo => "slo",
            Mode::Str => "str",
            Mode::Emlsr => "emlsr",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Mode, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "slo" => Ok(Mode::Slo),
            "str" => Ok(Mode::Str),
            "emlsr" => Ok(Mode::Emlsr),
            _ => Err(ConfigError::invalid("mode", s, "expected slo, str or emlsr")),
        }
    }
}

/// Every recognised key, in serialisation order.
pub const CONFIG_KEYS: [&str; 14] = [
    "mode",
    "nStations",
    "lambda",
    "lambdaSld",
    "mcs1",
    "mcs2",
    "width1",
    "width2",
    "nSldLink1",
    "nSldLink2",
    "payload",
    "duration",
    "seed",
    "switchDelayUs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub n_stations: u32,
    /// Packets per µs per station.
    pub lambda: f64,
    /// Per-interferer load; `None` follows `lambda`.
    pub lambda_sld: Option<f64>,
    pub mcs1: u8,
    pub mcs2: u8,
    pub width1: u32,
    pub width2: u32,
    pub n_sld_link1: u32,
    pub n_sld_link2: u32,
    pub payload_bytes: u32,
    pub duration_s: f64,
    pub seed: u64,
    pub switch_delay_us: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: Mode::Str,
            n_stations: 5,
            lambda: 1e-3,
            lambda_sld: None,
            mcs1: 6,
            mcs2: 6,
            width1: 20,
            width2: 20,
            n_sld_link1: 0,
            n_sld_link2: 0,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            duration_s: 10.0,
            seed: 1,
            switch_delay_us: 128.0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::invalid(key, value, "not a number"))
}

impl ScenarioConfig {
    /// Sets one key from its text form. Range checks happen in [`validate`].
    ///
    /// [`validate`]: ScenarioConfig::validate
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "mode" => self.mode = v.parse()?,
            "nStations" => self.n_stations = parse_num(key, v)?,
            "lambda" => self.lambda = parse_num(key, v)?,
            "lambdaSld" => self.lambda_sld = Some(parse_num(key, v)?),
            "mcs1" => self.mcs1 = parse_num(key, v)?,
            "mcs2" => self.mcs2 = parse_num(key, v)?,
            "width1" => self.width1 = parse_num(key, v)?,
            "width2" => self.width2 = parse_num(key, v)?,
            "nSldLink1" => self.n_sld_link1 = parse_num(key, v)?,
            "nSldLink2" => self.n_sld_link2 = parse_num(key, v)?,
            "payload" => self.payload_bytes = parse_num(key, v)?,
            "duration" => self.duration_s = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "switchDelayUs" => self.switch_delay_us = parse_num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Text form of one key, `None` for an unset optional key.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "mode" => self.mode.to_string(),
            "nStations" => self.n_stations.to_string(),
            "lambda" => self.lambda.to_string(),
            "lambdaSld" => self.lambda_sld?.to_string(),
            "mcs1" => self.mcs1.to_string(),
            "mcs2" => self.mcs2.to_string(),
            "width1" => self.width1.to_string(),
            "width2" => self.width2.to_string(),
            "nSldLink1" => self.n_sld_link1.to_string(),
            "nSldLink2" => self.n_sld_link2.to_string(),
            "payload" => self.payload_bytes.to_string(),
            "duration" => self.duration_s.to_string(),
            "seed" => self.seed.to_string(),
            "switchDelayUs" => self.switch_delay_us.to_string(),
            _ => return None,
        })
    }

    /// Applies a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: line.to_string(),
                });
            };
            let k = k.trim();
            if seen.contains(&k) {
                return Err(ConfigError::Duplicate(k.to_string()));
            }
            seen.push(k);
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Parses and validates a config file, starting from the defaults.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every set key in canonical order, one `key=value` per line.
    pub fn serialize(&self) -> String {
        CONFIG_KEYS
            .iter()
            .filter_map(|k| self.get(k).map(|v| format!("{k}={v}\n")))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_stations < 1 {
            return Err(ConfigError::invalid("nStations", self.n_stations, "must be at least 1"));
        }
        LinkConfig::new(LinkId::Link1, self.width1, self.mcs1)?;
        LinkConfig::new(LinkId::Link2, self.width2, self.mcs2)?;
        TrafficConfig::new(self.lambda, self.payload_bytes)?;
        if let Some(l) = self.lambda_sld {
            TrafficConfig::new(l, self.payload_bytes)
                .map_err(|_| ConfigError::invalid("lambdaSld", l, "must be positive and finite"))?;
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ConfigError::invalid("duration", self.duration_s, "must be positive"));
        }
        if !(self.switch_delay_us.is_finite() && self.switch_delay_us >= 0.0) {
            return Err(ConfigError::invalid(
                "switchDelayUs",
                self.switch_delay_us,
                "must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn effective_lambda_sld(&self) -> f64 {
        self.lambda_sld.unwrap_or(self.lambda)
    }

    /// Aggregate offered load of stations and interferers, in Mbps.
    pub fn offered_mbps(&self) -> f64 {
        let bits = self.payload_bytes as f64 * 8.0;
        let sld = (self.n_sld_link1 + self.n_sld_link2) as f64;
        self.lambda * bits * self.n_stations as f64 + self.effective_lambda_sld() * bits * sld
    }

    pub fn network_spec(&self) -> Result<NetworkSpec, ConfigError> {
        self.validate()?;
        Ok(NetworkSpec {
            mode: self.mode.device_mode(),
            n_stations: self.n_stations,
            traffic: TrafficConfig::new(self.lambda, self.payload_bytes)?,
            sld_traffic: TrafficConfig::new(self.effective_lambda_sld(), self.payload_bytes)?,
            n_sld: [self.n_sld_link1, self.n_sld_link2],
            links: [
                LinkConfig::new(LinkId::Link1, self.width1, self.mcs1)?,
                LinkConfig::new(LinkId::Link2, self.width2, self.mcs2)?,
            ],
            mac: MacParams::default(),
            emlsr: EmlsrParams {
                switch_delay: SimTime::from_micros_f64(self.switch_delay_us),
            },
            seed: self.seed,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        })
    }
}

/// Runs one configuration and summarises it as a CSV row with scenario id
/// `custom`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SummaryRow, ConfigError> {
    let spec = cfg.network_spec()?;
    let duration = SimTime::from_secs_f64(cfg.duration_s);
    let r = simulate(&spec, duration);
    let m = r.metrics;
    Ok(SummaryRow {
        scenario: "custom".to_string(),
        mode: cfg.mode.to_string(),
        lambda: cfg.lambda,
        offered_mbps: cfg.offered_mbps(),
        thpt_mbps: m.thpt_mbps,
        thpt_mld_mbps: m.thpt_mld_mbps,
        thpt_sld1_mbps: m.thpt_sld1_mbps,
        thpt_sld2_mbps: m.thpt_sld2_mbps,
        qdelay_ms: m.qdelay_ms,
        adelay_ms: m.adelay_ms,
        e2e_ms: m.e2e_ms,
        drop_rate: m.drop_rate,
        delivered: m.delivered,
        duration_s: cfg.duration_s,
        seed: cfg.seed,
    })
}

/// Offered-load grid `10^e` for `e = lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub exponent_lo: f64,
    pub exponent_hi: f64,
    pub exponent_step: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            exponent_lo: -5.0,
            exponent_hi: -1.0,
            exponent_step: 0.25,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.exponent_step.is_nan() || self.exponent_step <= 0.0 {
            return Err(ConfigError::invalid("exponent_step", self.exponent_step, "must be positive"));
        }
        if self.exponent_lo > self.exponent_hi {
            return Err(ConfigError::invalid("exponent_lo", self.exponent_lo, "exceeds exponent_hi"));
        }
        Ok(())
    }

    pub fn exponents(&self) -> Vec<f64> {
        let n = ((self.exponent_hi - self.exponent_lo) / self.exponent_step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| self.exponent_lo + i as f64 * self.exponent_step)
            .collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.exponents().into_iter().map(|e| 10f64.powf(e)).collect()
    }
}

/// One curve of a figure: a base configuration swept over λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub traces: Vec<Trace>,
    pub sweep: SweepSpec,
}

pub const PRESET_NAMES: [&str; 8] = [
    "base",
    "network-size",
    "varied-mcs",
    "varied-bw",
    "interference-asym",
    "interference-sym",
    "single-mld-str",
    "single-mld-emlsr",
];

/// Per-interferer load in the single-MLD presets, where the MLD's λ is swept.
pub const SINGLE_MLD_SLD_LAMBDA: f64 = 1e-4;

fn traces<I>(name: &str, modes: &[Mode], variants: I) -> Vec<Trace>
where
    I: IntoIterator<Item = (String, ScenarioConfig)>,
{
    let mut out = Vec::new();
    for (label, cfg) in variants {
        for &mode in modes {
            let scenario = if label.is_empty() {
                name.to_string()
            } else {
                format!("{name}/{label}")
            };
            out.push(Trace {
                scenario,
                config: ScenarioConfig { mode, ..cfg.clone() },
            });
        }
    }
    out
}

/// The experiment family `name`: its traces and λ grid.
pub fn preset(name: &str) -> Result<Preset, SweepError> {
    let base = ScenarioConfig::default();
    let mlo = [Mode::Str, Mode::Emlsr];
    let one = |cfg: ScenarioConfig| vec![(String::new(), cfg)];
    let (name, traces, sweep) = match name {
        "base" => ("base", traces("base", &Mode::ALL, one(base)), SweepSpec::default()),
        "network-size" => {
            let v = (1..=6).map(|k| {
                let n = 5 * k;
                (format!("nStations={n}"), ScenarioConfig { n_stations: n, ..base.clone() })
            });
            ("network-size", traces("network-size", &Mode::ALL, v), SweepSpec::default())
        }
        "varied-mcs" => {
            let v = [2u8, 4, 6, 8].map(|m| (format!("mcs1={m}"), ScenarioConfig { mcs1: m, ..base.clone() }));
            ("varied-mcs", traces("varied-mcs", &mlo, v), SweepSpec::default())
        }
        "varied-bw" => {
            let v = [20u32, 40, 80].map(|w| (format!("width1={w}"), ScenarioConfig { width1: w, ..base.clone() }));
            ("varied-bw", traces("varied-bw", &mlo, v), SweepSpec::default())
        }
        "interference-asym" => {
            let v = [(0u32, 0u32), (1, 0), (0, 1)].map(|(a, b)| {
                (
                    format!("nSldLink1={a};nSldLink2={b}"),
                    ScenarioConfig { n_sld_link1: a, n_sld_link2: b, ..base.clone() },
                )
            });
            ("interference-asym", traces("interference-asym", &mlo, v), SweepSpec::default())
        }
        "interference-sym" => {
            let v = [5u32, 10, 15, 20].map(|k| {
                (
                    format!("nSldLink1={k};nSldLink2={k}"),
                    ScenarioConfig { n_sld_link1: k, n_sld_link2: k, ..base.clone() },
                )
            });
            ("interference-sym", traces("interference-sym", &mlo, v), SweepSpec::default())
        }
        "single-mld-str" | "single-mld-emlsr" => {
            let (name, mode) = if name == "single-mld-str" {
                ("single-mld-str", Mode::Str)
            } else {
                ("single-mld-emlsr", Mode::Emlsr)
            };
            let v = [5u32, 10, 15, 20].map(|k| {
                (
                    format!("nSldLink1={k};nSldLink2={k}"),
                    ScenarioConfig {
                        n_stations: 1,
                        n_sld_link1: k,
                        n_sld_link2: k,
                        lambda_sld: Some(SINGLE_MLD_SLD_LAMBDA),
                        ..base.clone()
                    },
                )
            });
            let sweep = SweepSpec {
                exponent_lo: -5.0,
                exponent_hi: -2.0,
                exponent_step: 1.0,
            };
            (name, traces(name, &[mode], v), sweep)
        }
        other => {
            return Err(SweepError::UnknownPreset {
                name: other.to_string(),
                available: PRESET_NAMES.to_vec(),
            })
        }
    };
    Ok(Preset { name, traces, sweep })
}

impl Preset {
    /// Overrides the simulated duration of every trace.
    pub fn with_duration(mut self, duration_s: f64) -> Preset {
        for t in &mut self.traces {
            t.config.duration_s = duration_s;
        }
        self
    }

    /// Overrides the base seed of every trace.
    pub fn with_seed(mut self, seed: u64) -> Preset {
        for t in &mut self.traces {
            t.config.seed = seed;
        }
        self
    }

    /// Every (trace, λ) configuration in output order. The run seed is
    /// derived from the base seed and the λ index, so traces share random
    /// streams at equal λ.
    pub fn runs(&self) -> Vec<(String, ScenarioConfig)> {
        let lambdas = self.sweep.lambdas();
        let mut out = Vec::with_capacity(self.traces.len() * lambdas.len());
        for t in &self.traces {
            for (i, &lambda) in lambdas.iter().enumerate() {
                let cfg = ScenarioConfig {
                    lambda,
                    seed: derive_seed(t.config.seed, i as u64),
                    ..t.config.clone()
                };
                out.push((t.scenario.clone(), cfg));
            }
        }
        out
    }

    /// Runs the whole grid, in parallel, returning rows in grid order.
    pub fn run(&self) -> Result<Vec<SummaryRow>, ConfigError> {
        self.sweep.validate()?;
        self.runs()
            .into_par_iter()
            .map(|(scenario, cfg)| {
                run_scenario(&cfg).map(|row| SummaryRow { scenario, ..row })
            })
            .collect()
    }
}

/// Runs `preset` and writes `<out_dir>/<name>.csv`.
pub fn sweep(preset: &Preset, out_dir: &Path) -> Result<PathBuf, SweepError> {
    let rows = preset.run()?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", preset.name));
    fs::write(&path, to_csv(&rows))?;
    Ok(path)
}
