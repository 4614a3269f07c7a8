//! Rates, airtimes and the shared medium of each link.
//!
//! Rates follow the single-stream OFDM closed form
//! `subcarriers × bits_per_subcarrier × coding_rate / symbol_duration` with a
//! 12.8 µs symbol plus 0.8 µs guard interval. Frames carry a fixed 40 µs
//! preamble and a 36-byte MAC header.

use std::fmt;

use crate::engine::SimTime;
use crate::error::{MediumError, PhyError};

/// OFDM symbol including the 0.8 µs guard interval.
pub const SYMBOL_DURATION: SimTime = SimTime::from_nanos(13_600);
pub const PREAMBLE: SimTime = SimTime::from_micros(40);
pub const MAC_HEADER_BYTES: u32 = 36;

/// One of the two links of a multi-link setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkId {
    Link1,
    Link2,
}

impl LinkId {
    pub const ALL: [LinkId; 2] = [LinkId::Link1, LinkId::Link2];

    pub fn from_number(n: u8) -> Option<LinkId> {
        match n {
            1 => Some(LinkId::Link1),
            2 => Some(LinkId::Link2),
            _ => None,
        }
    }

    /// 1 or 2.
    pub fn number(self) -> u8 {
        match self {
            LinkId::Link1 => 1,
            LinkId::Link2 => 2,
        }
    }

    pub fn index(self) -> usize {
        self.number() as usize - 1
    }

    pub fn other(self) -> LinkId {
        match self {
            LinkId::Link1 => LinkId::Link2,
            LinkId::Link2 => LinkId::Link1,
        }
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "link{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
    Qam1024,
}

impl Modulation {
    pub fn bits_per_subcarrier(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
            Modulation::Qam1024 => 10,
        }
    }
}

/// Convolutional/LDPC code rate as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodingRate {
    pub num: u32,
    pub den: u32,
}

impl CodingRate {
    pub const HALF: CodingRate = CodingRate { num: 1, den: 2 };
    pub const TWO_THIRDS: CodingRate = CodingRate { num: 2, den: 3 };
    pub const THREE_QUARTERS: CodingRate = CodingRate { num: 3, den: 4 };
    pub const FIVE_SIXTHS: CodingRate = CodingRate { num: 5, den: 6 };

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Modulation and coding scheme, indices 0 through 11.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct McsEntry {
    pub index: u8,
    pub modulation: Modulation,
    pub coding: CodingRate,
}

const MCS_TABLE: [(Modulation, CodingRate); 12] = [
    (Modulation::Bpsk, CodingRate::HALF),
    (Modulation::Qpsk, CodingRate::HALF),
    (Modulation::Qpsk, CodingRate::THREE_QUARTERS),
    (Modulation::Qam16, CodingRate::HALF),
    (Modulation::Qam16, CodingRate::THREE_QUARTERS),
    (Modulation::Qam64, CodingRate::TWO_THIRDS),
    (Modulation::Qam64, CodingRate::THREE_QUARTERS),
    (Modulation::Qam64, CodingRate::FIVE_SIXTHS),
    // Index 8 is 256-QAM 3/4 in the standard rate table.
    (Modulation::Qam256, CodingRate::THREE_QUARTERS),
    (Modulation::Qam256, CodingRate::FIVE_SIXTHS),
    (Modulation::Qam1024, CodingRate::THREE_QUARTERS),
    (Modulation::Qam1024, CodingRate::FIVE_SIXTHS),
];

impl McsEntry {
    pub fn from_index(index: u8) -> Result<McsEntry, PhyError> {
        let (modulation, coding) = *MCS_TABLE
            .get(index as usize)
            .ok_or(PhyError::InvalidMcs(index))?;
        Ok(McsEntry {
            index,
            modulation,
            coding,
        })
    }

    pub fn bits_per_subcarrier(self) -> u32 {
        self.modulation.bits_per_subcarrier()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelWidth {
    Mhz20,
    Mhz40,
    Mhz80,
}

impl ChannelWidth {
    pub fn from_mhz(mhz: u32) -> Result<ChannelWidth, PhyError> {
        match mhz {
            20 => Ok(ChannelWidth::Mhz20),
            40 => Ok(ChannelWidth::Mhz40),
            80 => Ok(ChannelWidth::Mhz80),
            other => Err(PhyError::UnsupportedWidth(other)),
        }
    }

    pub fn mhz(self) -> u32 {
        match self {
            ChannelWidth::Mhz20 => 20,
            ChannelWidth::Mhz40 => 40,
            ChannelWidth::Mhz80 => 80,
        }
    }

    pub fn data_subcarriers(self) -> u32 {
        match self {
            ChannelWidth::Mhz20 => 234,
            ChannelWidth::Mhz40 => 468,
            ChannelWidth::Mhz80 => 980,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkConfig {
    pub link: LinkId,
    pub width: ChannelWidth,
    pub mcs: McsEntry,
}

impl LinkConfig {
    pub fn new(link: LinkId, width_mhz: u32, mcs_index: u8) -> Result<LinkConfig, PhyError> {
        Ok(LinkConfig {
            link,
            width: ChannelWidth::from_mhz(width_mhz)?,
            mcs: McsEntry::from_index(mcs_index)?,
        })
    }

    /// Data bits per OFDM symbol as an exact fraction `(num, den)`.
    fn bits_per_symbol_frac(&self) -> (u64, u64) {
        let num = self.width.data_subcarriers() as u64
            * self.mcs.bits_per_subcarrier() as u64
            * self.mcs.coding.num as u64;
        (num, self.mcs.coding.den as u64)
    }

    pub fn bits_per_symbol(&self) -> f64 {
        let (n, d) = self.bits_per_symbol_frac();
        n as f64 / d as f64
    }

    pub fn data_rate_mbps(&self) -> f64 {
        data_rate_mbps(self.mcs, self.width)
    }
}

/// PHY rate in bits per microsecond, which is numerically Mbps.
pub fn data_rate_mbps(mcs: McsEntry, width: ChannelWidth) -> f64 {
    let bits = width.data_subcarriers() as f64
        * mcs.bits_per_subcarrier() as f64
        * mcs.coding.as_f64();
    bits / SYMBOL_DURATION.as_micros_f64()
}

/// Number of OFDM symbols needed for `bits` on `link`.
pub fn symbol_count(bits: u64, link: &LinkConfig) -> u64 {
    let (num, den) = link.bits_per_symbol_frac();
    // ceil(bits / (num / den)) = ceil(bits * den / num)
    (bits * den).div_ceil(num)
}

/// Airtime of one data frame carrying `payload_bytes` of payload.
///
/// # Panics
///
/// Panics on a zero-byte payload.
pub fn frame_airtime(payload_bytes: u32, link: &LinkConfig) -> SimTime {
    assert!(payload_bytes > 0, "frame_airtime: empty payload");
    let bits = (payload_bytes as u64 + MAC_HEADER_BYTES as u64) * 8;
    PREAMBLE + SYMBOL_DURATION * symbol_count(bits, link)
}

/// ACK airtime: preamble plus one symbol at the lowest rate.
pub fn ack_airtime() -> SimTime {
    PREAMBLE + SYMBOL_DURATION
}

/// Transmission outcome reported when a frame ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxOutcome {
    Success,
    Collided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelState {
    Idle,
    Busy,
}

/// Handle for one occupancy of a medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxHandle(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Occupancy {
    Data { collided: bool },
    Ack,
}

#[derive(Debug, Clone)]
struct InFlight {
    handle: TxHandle,
    owner: u32,
    start: SimTime,
    end: SimTime,
    kind: Occupancy,
}

/// Single collision domain for one link. Every attached device senses every
/// other transmission instantly, so collisions arise only from transmissions
/// that start at the same instant.
#[derive(Debug, Clone)]
pub struct Medium {
    link: LinkId,
    in_flight: Vec<InFlight>,
    next_handle: u64,
}

impl Medium {
    pub fn new(link: LinkId) -> Medium {
        Medium {
            link,
            in_flight: Vec::new(),
            next_handle: 0,
        }
    }

    pub fn link(&self) -> LinkId {
        self.link
    }

    fn handle(&mut self) -> TxHandle {
        let h = TxHandle(self.next_handle);
        self.next_handle += 1;
        h
    }

    /// Starts a data transmission by `owner` over `[now, now + duration)`.
    ///
    /// Transmissions that start at the same instant all collide. Starting
    /// while an earlier transmission is still in the air violates the
    /// carrier-sense contract and is rejected.
    pub fn begin_tx(
        &mut self,
        owner: u32,
        now: SimTime,
        duration: SimTime,
    ) -> Result<TxHandle, MediumError> {
        let live = |f: &&mut InFlight| f.end > now;
        if self.in_flight.iter_mut().filter(live).any(|f| f.owner == owner) {
            return Err(MediumError::AlreadyTransmitting {
                device: owner,
                link: self.link,
            });
        }
        let mut overlap = false;
        for f in self.in_flight.iter_mut().filter(live) {
            match f.kind {
                Occupancy::Data { ref mut collided } if f.start == now => {
                    *collided = true;
                    overlap = true;
                }
                _ => {
                    return Err(MediumError::Busy {
                        link: self.link,
                        at: now,
                        busy_until: f.end,
                    })
                }
            }
        }
        let handle = self.handle();
        self.in_flight.push(InFlight {
            handle,
            owner,
            start: now,
            end: now + duration,
            kind: Occupancy::Data { collided: overlap },
        });
        Ok(handle)
    }

    /// Occupies the medium with a response frame. Responses never collide.
    pub fn occupy(&mut self, owner: u32, now: SimTime, duration: SimTime) -> TxHandle {
        let handle = self.handle();
        self.in_flight.push(InFlight {
            handle,
            owner,
            start: now,
            end: now + duration,
            kind: Occupancy::Ack,
        });
        handle
    }

    /// Removes an occupancy and reports how it went. `None` for unknown
    /// handles.
    pub fn finish(&mut self, handle: TxHandle) -> Option<TxOutcome> {
        let pos = self.in_flight.iter().position(|f| f.handle == handle)?;
        let f = self.in_flight.swap_remove(pos);
        Some(match f.kind {
            Occupancy::Data { collided: true } => TxOutcome::Collided,
            _ => TxOutcome::Success,
        })
    }

    /// Busy iff some occupancy covers `now`; intervals are half-open.
    pub fn carrier_sense(&self, now: SimTime) -> ChannelState {
        if self
            .in_flight
            .iter()
            .any(|f| f.start <= now && now < f.end)
        {
            ChannelState::Busy
        } else {
            ChannelState::Idle
        }
    }

    /// True when no occupancy is outstanding.
    pub fn is_clear(&self) -> bool {
        self.in_flight.is_empty()
    }

    /// True when every outstanding occupancy is a data frame that started at
    /// `now`, i.e. another start at `now` would join a collision.
    pub fn only_started_at(&self, now: SimTime) -> bool {
        self.in_flight
            .iter()
            .all(|f| f.start == now && matches!(f.kind, Occupancy::Data { .. }))
    }
}
