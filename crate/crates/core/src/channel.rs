//! Radio channel model: PHY rate per MCS, per-attempt Bernoulli loss and
//! scheduled external occupancy.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::types::{Band, ChannelId, Micros};

/// Default per-frame overhead (preamble, SIFS, ACK turnaround).
pub const DEFAULT_FRAME_OVERHEAD_US: Micros = 50;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("unknown MCS index {0}")]
    UnknownMcs(u8),
}

/// PHY rate in bits/µs (numerically equal to Mbit/s) per MCS index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct McsTable(BTreeMap<u8, f64>);

impl McsTable {
    pub fn new(rates: impl IntoIterator<Item = (u8, f64)>) -> Self {
        Self(rates.into_iter().collect())
    }

    pub fn rate(&self, mcs: u8) -> Option<f64> {
        self.0.get(&mcs).copied()
    }

    pub fn contains(&self, mcs: u8) -> bool {
        self.0.contains_key(&mcs)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.0.is_empty() {
            out.push("MCS table is empty".to_string());
        }
        let mut prev: Option<(u8, f64)> = None;
        for (mcs, rate) in self.iter() {
            if !(rate > 0.0 && rate.is_finite()) {
                out.push(format!("MCS {mcs} rate must be positive"));
            }
            if let Some((pm, pr)) = prev {
                if rate < pr {
                    out.push(format!("MCS {mcs} rate {rate} is below MCS {pm} rate {pr}"));
                }
            }
            prev = Some((mcs, rate));
        }
        out
    }
}

/// Airtime of one frame: payload bits at the MCS rate, rounded up, plus a
/// fixed per-frame overhead.
pub fn tx_duration(
    size_bytes: u32,
    mcs: u8,
    table: &McsTable,
    overhead: Micros,
) -> Result<Micros, ChannelError> {
    let rate = table.rate(mcs).ok_or(ChannelError::UnknownMcs(mcs))?;
    let bits = 8.0 * size_bytes as f64;
    Ok((bits / rate).ceil() as Micros + overhead)
}

/// Half-open interval `[start, end)` of abnormal channel conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outage {
    pub start: Micros,
    pub end: Micros,
    pub loss_prob: f64,
    /// Medium sensed busy for the whole interval.
    pub busy: bool,
}

impl Outage {
    pub fn contains(&self, at: Micros) -> bool {
        self.start <= at && at < self.end
    }
}

/// Sorted, non-overlapping outages.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutageSchedule(Vec<Outage>);

impl OutageSchedule {
    /// Sorts by start; overlap and ordering problems are reported by
    /// [`OutageSchedule::violations`].
    pub fn new(mut outages: Vec<Outage>) -> Self {
        outages.sort_by_key(|o| o.start);
        Self(outages)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Outage> {
        self.0.iter()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for o in &self.0 {
            if o.start >= o.end {
                out.push(format!("outage [{}, {}) is empty", o.start, o.end));
            }
            if !(0.0..=1.0).contains(&o.loss_prob) {
                out.push(format!("outage loss {} outside [0, 1]", o.loss_prob));
            }
        }
        for w in self.0.windows(2) {
            if w[1].start < w[0].end {
                out.push(format!(
                    "outages [{}, {}) and [{}, {}) overlap",
                    w[0].start, w[0].end, w[1].start, w[1].end
                ));
            }
        }
        out
    }

    pub fn at(&self, at: Micros) -> Option<&Outage> {
        let idx = self.0.partition_point(|o| o.start <= at);
        idx.checked_sub(1)
            .map(|i| &self.0[i])
            .filter(|o| o.contains(at))
    }

    /// First busy outage starting strictly after `t`.
    pub fn next_busy_after(&self, t: Micros) -> Option<&Outage> {
        let idx = self.0.partition_point(|o| o.start <= t);
        self.0[idx..].iter().find(|o| o.busy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptOutcome {
    Success,
    Lost,
}

#[derive(Debug, Clone)]
pub struct ChannelState {
    pub channel: ChannelId,
    pub band: Band,
    pub mcs_table: McsTable,
    pub base_loss: f64,
    pub frame_overhead: Micros,
    pub outages: OutageSchedule,
    /// End of the MLD's own current transmission on this channel.
    pub busy_until: Micros,
}

impl ChannelState {
    pub fn new(channel: ChannelId, band: Band, mcs_table: McsTable, base_loss: f64) -> Self {
        Self {
            channel,
            band,
            mcs_table,
            base_loss,
            frame_overhead: DEFAULT_FRAME_OVERHEAD_US,
            outages: OutageSchedule::default(),
            busy_until: 0,
        }
    }

    pub fn with_outages(mut self, outages: OutageSchedule) -> Self {
        self.outages = outages;
        self
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = self.mcs_table.violations();
        if !(0.0..=1.0).contains(&self.base_loss) {
            out.push(format!("base loss {} outside [0, 1]", self.base_loss));
        }
        out.extend(self.outages.violations());
        out
    }

    pub fn airtime(&self, size_bytes: u32, mcs: u8) -> Result<Micros, ChannelError> {
        tx_duration(size_bytes, mcs, &self.mcs_table, self.frame_overhead)
    }

    pub fn loss_prob_at(&self, at: Micros) -> f64 {
        self.outages
            .at(at)
            .map_or(self.base_loss, |o| o.loss_prob)
    }

    /// Draws exactly one value from `rng`, whatever the probability.
    pub fn sample_attempt_outcome<R: Rng + ?Sized>(&self, at: Micros, rng: &mut R) -> AttemptOutcome {
        let p = self.loss_prob_at(at);
        let u: f64 = rng.random();
        if u < p {
            AttemptOutcome::Lost
        } else {
            AttemptOutcome::Success
        }
    }

    /// End of the external occupancy covering `at`, if any.
    pub fn external_busy(&self, at: Micros) -> Option<Micros> {
        self.outages.at(at).filter(|o| o.busy).map(|o| o.end)
    }

    /// Medium busy for any reason (own TXOP or external) at `at`; returns
    /// when it frees up.
    pub fn busy_at(&self, at: Micros) -> Option<Micros> {
        let own = (self.busy_until > at).then_some(self.busy_until);
        match (own, self.external_busy(at)) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn mark_busy_until(&mut self, t: Micros) {
        self.busy_until = self.busy_until.max(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ch() -> ChannelState {
        ChannelState::new(
            ChannelId::new(0).unwrap(),
            Band::GHz5,
            McsTable::new([(0, 12.0), (7, 120.0)]),
            0.0,
        )
    }

    #[test]
    fn duration_examples() {
        let t = McsTable::new([(0, 12.0), (7, 120.0)]);
        assert_eq!(tx_duration(0, 7, &t, 50), Ok(50));
        assert_eq!(tx_duration(1500, 7, &t, 50), Ok(150));
        let slow = tx_duration(1500, 0, &t, 0).unwrap();
        let fast = tx_duration(1500, 7, &t, 0).unwrap();
        assert_eq!(slow, 10 * fast);
        assert_eq!(tx_duration(10, 3, &t, 50), Err(ChannelError::UnknownMcs(3)));
    }

    #[test]
    fn duration_rounds_up() {
        let t = McsTable::new([(0, 7.0)]);
        assert_eq!(tx_duration(1, 0, &t, 0), Ok(2));
    }

    #[test]
    fn mcs_table_must_be_monotone() {
        assert!(McsTable::new([(0, 10.0), (1, 5.0)]).violations().len() == 1);
        assert!(McsTable::new([(0, -1.0)]).violations().len() == 1);
    }

    #[test]
    fn outcome_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = ch();
        assert!((0..1000).all(|t| c.sample_attempt_outcome(t, &mut rng) == AttemptOutcome::Success));
        let c = ch().with_outages(OutageSchedule::new(vec![Outage {
            start: 0,
            end: 1000,
            loss_prob: 1.0,
            busy: false,
        }]));
        assert!((0..1000).all(|t| c.sample_attempt_outcome(t, &mut rng) == AttemptOutcome::Lost));
        assert_eq!(c.sample_attempt_outcome(1000, &mut rng), AttemptOutcome::Success);
    }

    #[test]
    fn outcome_empirical_ratio() {
        // Binomial sd at n=1e5, p=0.3 is ~0.00145; 0.01 is roughly 7 sd.
        let mut c = ch();
        c.base_loss = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let lost = (0..n)
            .filter(|_| c.sample_attempt_outcome(0, &mut rng) == AttemptOutcome::Lost)
            .count();
        let ratio = lost as f64 / n as f64;
        assert!((ratio - 0.3).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn one_draw_per_sample() {
        let mut c = ch();
        c.base_loss = 0.5;
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for t in 0..50 {
            c.sample_attempt_outcome(t, &mut a);
            let _: f64 = b.random();
        }
        let x: u64 = a.random();
        let y: u64 = b.random();
        assert_eq!(x, y);
    }

    #[test]
    fn busy_examples() {
        assert_eq!(ch().external_busy(5), None);
        let c = ch().with_outages(OutageSchedule::new(vec![Outage {
            start: 1000,
            end: 5000,
            loss_prob: 0.0,
            busy: true,
        }]));
        assert_eq!(c.external_busy(999), None);
        assert_eq!(c.external_busy(1000), Some(5000));
        assert_eq!(c.external_busy(2000), Some(5000));
        assert_eq!(c.external_busy(5000), None);
        assert_eq!(c.outages.next_busy_after(0).map(|o| o.start), Some(1000));
        assert!(c.outages.next_busy_after(1000).is_none());
    }

    #[test]
    fn overlapping_outages_rejected() {
        let s = OutageSchedule::new(vec![
            Outage { start: 0, end: 10, loss_prob: 0.5, busy: false },
            Outage { start: 5, end: 20, loss_prob: 1.5, busy: false },
        ]);
        assert_eq!(s.violations().len(), 2);
    }
}
