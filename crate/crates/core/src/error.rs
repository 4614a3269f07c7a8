use thiserror::Error;

use crate::engine::SimTime;
use crate::phy::LinkId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhyError {
    #[error("unsupported channel width {0} MHz (expected 20, 40 or 80)")]
    UnsupportedWidth(u32),
    #[error("invalid MCS index {0} (expected 0..=11)")]
    InvalidMcs(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MediumError {
    #[error("device {device} is already transmitting on {link}")]
    AlreadyTransmitting { device: u32, link: LinkId },
    #[error("{link} busy at {at} until {busy_until}")]
    Busy {
        link: LinkId,
        at: SimTime,
        busy_until: SimTime,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

impl ConfigError {
    pub(crate) fn invalid(key: &str, value: impl ToString, reason: impl Into<String>) -> Self {
        ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown preset `{name}`; available: {}", available.join(", "))]
    UnknownPreset {
        name: String,
        available: Vec<&'static str>,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
