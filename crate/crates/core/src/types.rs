//! Domain types shared by every layer of the simulator.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulation time in integer microseconds.
pub type Micros = u64;

/// Upper bound on affiliated L-MACs (and therefore channels) in one MLD.
pub const MAX_LINKS: usize = 4;

/// Index of a radio channel, and of the L-MAC tuned on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(u8);

impl ChannelId {
    pub fn new(index: u8) -> Option<Self> {
        ((index as usize) < MAX_LINKS).then_some(Self(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn raw(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ChannelId> {
        (0..MAX_LINKS as u8).map(ChannelId)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ch{}", self.0)
    }
}

/// A set of channels, one bit per channel index (bit i = channel i).
///
/// Only the low four bits are ever set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LinkMask(u8);

impl LinkMask {
    pub const EMPTY: LinkMask = LinkMask(0);
    pub const ALL: LinkMask = LinkMask(0b1111);

    /// Builds a mask from a nibble; higher bits are discarded.
    pub fn from_bits(bits: u8) -> Self {
        Self(bits & 0x0F)
    }

    pub fn one_hot(ch: ChannelId) -> Self {
        Self(1 << ch.0)
    }

    /// Mask with the first `n` channels set.
    pub fn first(n: usize) -> Self {
        Self(((1u16 << n.min(MAX_LINKS)) - 1) as u8)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, ch: ChannelId) -> bool {
        self.0 & (1 << ch.0) != 0
    }

    pub fn union(self, other: LinkMask) -> LinkMask {
        Self(self.0 | other.0)
    }

    pub fn intersect(self, other: LinkMask) -> LinkMask {
        Self(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: LinkMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    /// Lowest-indexed channel in the set.
    pub fn lowest(self) -> Option<ChannelId> {
        (!self.is_empty()).then(|| ChannelId(self.0.trailing_zeros() as u8))
    }

    pub fn iter(self) -> impl Iterator<Item = ChannelId> {
        ChannelId::all().filter(move |c| self.contains(*c))
    }
}

impl FromIterator<ChannelId> for LinkMask {
    fn from_iter<I: IntoIterator<Item = ChannelId>>(iter: I) -> Self {
        iter.into_iter()
            .fold(LinkMask::EMPTY, |m, c| m.union(LinkMask::one_hot(c)))
    }
}

impl fmt::Display for LinkMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06b}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "2.4GHz")]
    GHz2_4,
    #[serde(rename = "5GHz")]
    GHz5,
    #[serde(rename = "6GHz")]
    GHz6,
}

impl Band {
    /// Default SIFS: 10 µs for 2.4 GHz, 16 µs for the OFDM-only bands.
    pub fn default_sifs(self) -> Micros {
        match self {
            Band::GHz2_4 => 10,
            Band::GHz5 | Band::GHz6 => 16,
        }
    }

    pub fn default_slot(self) -> Micros {
        9
    }
}

/// EDCA access category. The derived order is the priority order used
/// to settle virtual collisions.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum AccessCategory {
    Background,
    BestEffort,
    Video,
    Voice,
}

impl AccessCategory {
    pub const ALL: [AccessCategory; 4] = [
        AccessCategory::Background,
        AccessCategory::BestEffort,
        AccessCategory::Video,
        AccessCategory::Voice,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short(self) -> &'static str {
        match self {
            AccessCategory::Background => "BK",
            AccessCategory::BestEffort => "BE",
            AccessCategory::Video => "VI",
            AccessCategory::Voice => "VO",
        }
    }

    pub fn from_short(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|ac| ac.short() == s)
    }
}

impl fmt::Display for AccessCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Per-AC contention parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct EdcaParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub aifsn: u32,
    /// Zero means one frame per TXOP.
    pub txop_limit_us: Micros,
}

impl EdcaParams {
    /// 802.11 default EDCA parameter set for a non-AP station.
    pub fn default_for(ac: AccessCategory) -> Self {
        let (cw_min, cw_max, aifsn, txop_limit_us) = match ac {
            AccessCategory::Background => (15, 1023, 7, 2528),
            AccessCategory::BestEffort => (15, 1023, 3, 2528),
            AccessCategory::Video => (7, 15, 2, 4096),
            AccessCategory::Voice => (3, 7, 2, 2080),
        };
        Self {
            cw_min,
            cw_max,
            aifsn,
            txop_limit_us,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !is_pow2_minus_one(self.cw_min) {
            out.push(format!("cw_min {} is not of the form 2^k - 1", self.cw_min));
        }
        if !is_pow2_minus_one(self.cw_max) {
            out.push(format!("cw_max {} is not of the form 2^k - 1", self.cw_max));
        }
        if self.cw_min > self.cw_max {
            out.push(format!(
                "cw_min {} exceeds cw_max {}",
                self.cw_min, self.cw_max
            ));
        }
        if self.aifsn < 1 {
            out.push("aifsn must be at least 1".to_string());
        }
        out
    }
}

fn is_pow2_minus_one(v: u32) -> bool {
    v.checked_add(1).is_some_and(u32::is_power_of_two)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Membership of a packet in a fragmented frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FragmentTag {
    /// Id of the first fragment of the frame.
    pub group: u64,
    pub index: u16,
    pub count: u16,
}

/// A MAC-layer transmission request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: PacketId,
    pub flow_id: u32,
    pub tid: u8,
    pub ac: AccessCategory,
    pub receiver: u32,
    pub tos: u8,
    pub port: u16,
    pub size_bytes: u32,
    pub arrival_time: Micros,
    /// Absolute deadline.
    pub deadline: Option<Micros>,
    pub fragment: Option<FragmentTag>,
}

impl Packet {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.tid > 7 {
            out.push(format!("tid {} outside 0..=7", self.tid));
        }
        if self.size_bytes == 0 {
            out.push("size_bytes must be positive".to_string());
        }
        if let Some(d) = self.deadline {
            if d <= self.arrival_time {
                out.push("deadline must be after arrival".to_string());
            }
        }
        if let Some(f) = self.fragment {
            if f.index >= f.count {
                out.push(format!(
                    "fragment index {} not below count {}",
                    f.index, f.count
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    RetriesExhausted,
    QueueOverflow,
}

impl DropReason {
    pub fn label(self) -> &'static str {
        match self {
            DropReason::RetriesExhausted => "retries",
            DropReason::QueueOverflow => "overflow",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "retries" => Some(DropReason::RetriesExhausted),
            "overflow" => Some(DropReason::QueueOverflow),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketFate {
    Delivered {
        link: ChannelId,
        time: Micros,
        attempts: u32,
    },
    Dropped {
        reason: DropReason,
        time: Micros,
    },
    InFlight,
    Queued,
}
