//! TX descriptors carrying per-series channel bitmaps, and the 16-bit
//! bitmap word codec.
//!
//! Word layout: series `i` occupies bits `[4i, 4i + 3]`, series 0 in the
//! least-significant nibble. Within a nibble, bit `k` enables channel `k`.

use std::fmt;

use thiserror::Error;

use crate::types::{ChannelId, LinkMask, Micros};

pub const SERIES_COUNT: usize = 4;

/// One retry-chain stage: where, how many times and at which MCS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TxSeries {
    pub channels: LinkMask,
    /// Zero marks the series unused.
    pub max_attempts: u8,
    pub mcs: u8,
}

impl TxSeries {
    pub const UNUSED: TxSeries = TxSeries {
        channels: LinkMask::EMPTY,
        max_attempts: 0,
        mcs: 0,
    };

    pub fn new(channels: LinkMask, max_attempts: u8, mcs: u8) -> Self {
        Self {
            channels,
            max_attempts,
            mcs,
        }
    }

    pub fn is_used(&self) -> bool {
        self.max_attempts > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TxDescriptor {
    pub series: [TxSeries; SERIES_COUNT],
    pub created_at: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorViolation {
    ZeroBitmapOnUsedSeries { series: usize },
    NoUsableSeries,
}

impl fmt::Display for DescriptorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptorViolation::ZeroBitmapOnUsedSeries { series } => {
                write!(f, "zero bitmap on used series {series}")
            }
            DescriptorViolation::NoUsableSeries => f.write_str("no usable series"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot encode descriptor: zero bitmap on used series {series}")]
pub struct EncodeError {
    pub series: usize,
}

impl TxDescriptor {
    pub fn new(series: [TxSeries; SERIES_COUNT], created_at: Micros) -> Self {
        Self { series, created_at }
    }

    /// Same bitmap in every series that has a nonzero attempt budget.
    pub fn uniform(
        channels: LinkMask,
        max_attempts: [u8; SERIES_COUNT],
        mcs: [u8; SERIES_COUNT],
        created_at: Micros,
    ) -> Self {
        let series = std::array::from_fn(|i| {
            if max_attempts[i] == 0 {
                TxSeries::UNUSED
            } else {
                TxSeries::new(channels, max_attempts[i], mcs[i])
            }
        });
        Self { series, created_at }
    }

    pub fn bitmaps(&self) -> [LinkMask; SERIES_COUNT] {
        self.series.map(|s| s.channels)
    }

    pub fn max_attempts(&self) -> [u8; SERIES_COUNT] {
        self.series.map(|s| s.max_attempts)
    }

    /// Lifetime attempt budget of a packet carrying this descriptor.
    pub fn attempt_budget(&self) -> u32 {
        self.series.iter().map(|s| s.max_attempts as u32).sum()
    }

    /// Union of the bitmaps of all used series.
    pub fn reachable(&self) -> LinkMask {
        self.series
            .iter()
            .filter(|s| s.is_used())
            .fold(LinkMask::EMPTY, |m, s| m.union(s.channels))
    }

    /// Index of the series the next attempt belongs to, given how many
    /// attempts each series has consumed so far. `None` once every used
    /// series is exhausted.
    pub fn current_series(&self, used: &[u8; SERIES_COUNT]) -> Option<usize> {
        current_series(&self.max_attempts(), used)
    }

    pub fn encode(&self) -> Result<u16, EncodeError> {
        encode_bitmaps(self)
    }
}

pub fn current_series(max: &[u8; SERIES_COUNT], used: &[u8; SERIES_COUNT]) -> Option<usize> {
    (0..SERIES_COUNT).find(|&i| max[i] > 0 && used[i] < max[i])
}

/// Packs the four series bitmaps into one word.
pub fn encode_bitmaps(d: &TxDescriptor) -> Result<u16, EncodeError> {
    let mut word = 0u16;
    for (i, s) in d.series.iter().enumerate() {
        if s.is_used() && s.channels.is_empty() {
            return Err(EncodeError { series: i });
        }
        word |= (s.channels.bits() as u16) << (4 * i);
    }
    Ok(word)
}

pub fn decode_bitmaps(word: u16) -> [LinkMask; SERIES_COUNT] {
    std::array::from_fn(|i| LinkMask::from_bits(((word >> (4 * i)) & 0xF) as u8))
}

/// Every violated descriptor invariant; empty means valid.
pub fn validate_descriptor(d: &TxDescriptor) -> Vec<DescriptorViolation> {
    let mut out: Vec<_> = d
        .series
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_used() && s.channels.is_empty())
        .map(|(series, _)| DescriptorViolation::ZeroBitmapOnUsedSeries { series })
        .collect();
    if !d.series.iter().any(TxSeries::is_used) {
        out.push(DescriptorViolation::NoUsableSeries);
    }
    out
}

/// Whether an attempt in `series` may go out on `link`.
pub fn series_allows(d: &TxDescriptor, series: usize, link: ChannelId) -> bool {
    d.series[series].channels.contains(link)
}
