//! Discrete-event simulator for Wi-Fi 7 multi-link operation.
//!
//! One access point and a set of uplink stations share two links. Stations
//! run in one of three modes:
//!
//! - `Slo`: a single radio on link 1,
//! - `Str`: one radio per link, both transmitting independently,
//! - `Emlsr`: listens on both links but transmits on one at a time.
//!
//! Optional single-link devices add interference on either link. Each run
//! produces one [`SummaryRow`] of throughput and delay figures.
//!
//! ```
//! use mlosim::{run_scenario, ScenarioConfig};
//!
//! let mut cfg = ScenarioConfig::default();
//! cfg.lambda = 1e-4;
//! cfg.duration_s = 0.5;
//! let row = run_scenario(&cfg).unwrap();
//! assert!(row.thpt_mbps > 0.0);
//! ```

pub mod devices;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod network;
pub mod phy;
pub mod scenario;
pub mod traffic;

pub use devices::{Device, DeviceMode, EmlsrParams};
pub use engine::{derive_seed, RngStream, Scheduler, SimTime, StreamPurpose};
pub use error::{ConfigError, MediumError, PhyError, SweepError};
pub use mac::{DcfState, MacParams};
pub use metrics::{Metrics, PacketRecord, SummaryRow, CSV_HEADER};
pub use network::{simulate, Network, NetworkSpec, RunResult};
pub use phy::{frame_airtime, LinkConfig, LinkId};
pub use scenario::{preset, run_scenario, sweep, Preset, ScenarioConfig, SweepSpec, PRESET_NAMES};
pub use traffic::TrafficConfig;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/airtime.md")]
    mod airtime {}
    #[doc = include_str!("../../../book/src/contention.md")]
    mod contention {}
    #[doc = include_str!("../../../book/src/multilink.md")]
    mod multilink {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
