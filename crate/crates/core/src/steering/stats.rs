//! Per-link statistics the U-MAC derives from the event trace: mean queue
//! length, arrival rate, Little's-law wait, loss ratio and capacity.
//!
//! A packet counts toward the queue of every link enabled by its current
//! series bitmap, so shared queues are accounted per link as well.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::channel::AttemptOutcome;
use crate::descriptor::{current_series, decode_bitmaps, SERIES_COUNT};
use crate::trace::{TraceEvent, TraceRecord};
use crate::types::{ChannelId, LinkMask, Micros, PacketId, MAX_LINKS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    /// EWMA weight per arrival (rate) and per delivered frame (capacity).
    pub alpha: f64,
    /// Time constant of the queue-length average; `None` averages over the
    /// whole run.
    pub queue_window_us: Option<Micros>,
    /// Number of recent attempts in the loss-ratio window.
    pub plr_window: usize,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            queue_window_us: Some(100_000),
            plr_window: 100,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("trace record at {got} precedes already observed time {seen}")]
pub struct OutOfOrder {
    pub seen: Micros,
    pub got: Micros,
}

/// Point-in-time view of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSnapshot {
    pub link: ChannelId,
    /// Mean queue length, packets.
    pub mean_queue: f64,
    /// Packets per µs.
    pub arrival_rate: f64,
    /// Little's-law wait, µs; infinite when packets queue but none arrive.
    pub wait: f64,
    pub plr: f64,
    /// Bits per µs.
    pub capacity: f64,
}

/// W = L / λ, with W = 0 for an empty queue and +∞ when λ = 0 but L > 0.
pub fn littles_wait(mean_queue: f64, arrival_rate: f64) -> f64 {
    if mean_queue <= 0.0 {
        0.0
    } else if arrival_rate > 0.0 {
        mean_queue / arrival_rate
    } else {
        f64::INFINITY
    }
}

pub fn estimate_wait(stats: &LinkStats, link: ChannelId) -> f64 {
    littles_wait(stats.mean_queue(link), stats.arrival_rate(link))
}

#[derive(Debug, Clone, Default)]
struct LinkTrack {
    present: bool,
    queue_len: u32,
    mean_queue: f64,
    area: f64,
    elapsed: Micros,
    last_arrival: Option<Micros>,
    gap_ewma: Option<f64>,
    outcomes: VecDeque<bool>,
    losses: usize,
    capacity: f64,
}

#[derive(Debug, Clone)]
struct PacketTrack {
    bitmaps: [LinkMask; SERIES_COUNT],
    max: [u8; SERIES_COUNT],
    used: [u8; SERIES_COUNT],
    counted: LinkMask,
    size: u32,
}

#[derive(Debug, Clone)]
pub struct LinkStats {
    params: EstimatorParams,
    links: [LinkTrack; MAX_LINKS],
    sizes: HashMap<PacketId, u32>,
    packets: HashMap<PacketId, PacketTrack>,
    now: Micros,
    observed: bool,
}

impl LinkStats {
    /// `links` gives each active link with its nominal capacity (bits/µs),
    /// used until a delivery has been measured.
    pub fn new(params: EstimatorParams, links: &[(ChannelId, f64)]) -> Self {
        let mut tracks: [LinkTrack; MAX_LINKS] = Default::default();
        for &(l, cap) in links {
            tracks[l.index()].present = true;
            tracks[l.index()].capacity = cap;
        }
        Self {
            params,
            links: tracks,
            sizes: HashMap::new(),
            packets: HashMap::new(),
            now: 0,
            observed: false,
        }
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    pub fn links(&self) -> impl Iterator<Item = ChannelId> + '_ {
        ChannelId::all().filter(|l| self.links[l.index()].present)
    }

    pub fn has_observed(&self) -> bool {
        self.observed
    }

    pub fn queue_len(&self, link: ChannelId) -> u32 {
        self.links[link.index()].queue_len
    }

    pub fn mean_queue(&self, link: ChannelId) -> f64 {
        self.links[link.index()].mean_queue
    }

    pub fn arrival_rate(&self, link: ChannelId) -> f64 {
        match self.links[link.index()].gap_ewma {
            Some(g) if g > 0.0 => 1.0 / g,
            Some(_) => f64::INFINITY,
            None => 0.0,
        }
    }

    pub fn plr(&self, link: ChannelId) -> f64 {
        let t = &self.links[link.index()];
        if t.outcomes.is_empty() {
            0.0
        } else {
            t.losses as f64 / t.outcomes.len() as f64
        }
    }

    pub fn capacity(&self, link: ChannelId) -> f64 {
        self.links[link.index()].capacity
    }

    pub fn snapshot(&self) -> Vec<LinkSnapshot> {
        self.links()
            .map(|link| LinkSnapshot {
                link,
                mean_queue: self.mean_queue(link),
                arrival_rate: self.arrival_rate(link),
                wait: estimate_wait(self, link),
                plr: self.plr(link),
                capacity: self.capacity(link),
            })
            .collect()
    }

    /// Brings the time-weighted averages forward to `t` without an event.
    pub fn advance(&mut self, t: Micros) {
        if t <= self.now {
            return;
        }
        let dt = t - self.now;
        for track in self.links.iter_mut().filter(|l| l.present) {
            let len = track.queue_len as f64;
            match self.params.queue_window_us {
                None => {
                    track.area += len * dt as f64;
                    track.elapsed += dt;
                    track.mean_queue = track.area / track.elapsed as f64;
                }
                Some(tau) => {
                    let keep = (-(dt as f64) / tau.max(1) as f64).exp();
                    track.mean_queue = track.mean_queue * keep + len * (1.0 - keep);
                }
            }
        }
        self.now = t;
    }

    /// Folds one trace record into the estimators.
    pub fn observe(&mut self, rec: &TraceRecord) -> Result<(), OutOfOrder> {
        if rec.time < self.now {
            return Err(OutOfOrder {
                seen: self.now,
                got: rec.time,
            });
        }
        self.advance(rec.time);
        self.observed = true;
        match &rec.event {
            TraceEvent::Arrival { packet, size, .. } => {
                self.sizes.insert(*packet, *size);
            }
            TraceEvent::Enqueue {
                packet,
                word,
                max_attempts,
                ..
            } => {
                let size = self.sizes.remove(packet).unwrap_or(0);
                let bitmaps = decode_bitmaps(*word);
                let used = [0; SERIES_COUNT];
                let counted = current_series(max_attempts, &used)
                    .map_or(LinkMask::EMPTY, |s| bitmaps[s]);
                for l in counted.iter() {
                    self.note_arrival(l, rec.time);
                    self.links[l.index()].queue_len += 1;
                }
                self.packets.insert(
                    *packet,
                    PacketTrack {
                        bitmaps,
                        max: *max_attempts,
                        used,
                        counted,
                        size,
                    },
                );
            }
            TraceEvent::Attempt {
                packet,
                link,
                series,
                outcome,
                airtime,
                ..
            } => {
                let lost = *outcome == AttemptOutcome::Lost;
                self.note_outcome(*link, lost);
                if let Some(p) = self.packets.get_mut(packet) {
                    if lost {
                        if let Some(u) = p.used.get_mut(*series as usize) {
                            *u = u.saturating_add(1);
                        }
                        let next = current_series(&p.max, &p.used)
                            .map_or(LinkMask::EMPTY, |s| p.bitmaps[s]);
                        let old = std::mem::replace(&mut p.counted, next);
                        for l in old.iter().filter(|l| !next.contains(*l)) {
                            self.links[l.index()].queue_len -= 1;
                        }
                        for l in next.iter().filter(|l| !old.contains(*l)) {
                            self.links[l.index()].queue_len += 1;
                        }
                    } else if *airtime > 0 && p.size > 0 {
                        let measured = 8.0 * p.size as f64 / *airtime as f64;
                        let a = self.params.alpha;
                        let t = &mut self.links[link.index()];
                        t.capacity = (1.0 - a) * t.capacity + a * measured;
                    }
                }
            }
            TraceEvent::Deliver { packet, .. } | TraceEvent::Drop { packet, .. } => {
                self.sizes.remove(packet);
                if let Some(p) = self.packets.remove(packet) {
                    for l in p.counted.iter() {
                        self.links[l.index()].queue_len -= 1;
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn note_arrival(&mut self, link: ChannelId, t: Micros) {
        let a = self.params.alpha;
        let track = &mut self.links[link.index()];
        if let Some(prev) = track.last_arrival {
            let gap = (t - prev) as f64;
            track.gap_ewma = Some(match track.gap_ewma {
                None => gap,
                Some(g) => (1.0 - a) * g + a * gap,
            });
        }
        track.last_arrival = Some(t);
    }

    fn note_outcome(&mut self, link: ChannelId, lost: bool) {
        let window = self.params.plr_window.max(1);
        let track = &mut self.links[link.index()];
        track.outcomes.push_back(lost);
        track.losses += usize::from(lost);
        while track.outcomes.len() > window {
            if track.outcomes.pop_front() == Some(true) {
                track.losses -= 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::QueueScope;
    use crate::types::AccessCategory;

    fn ch(i: u8) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn stats(window: Option<Micros>) -> LinkStats {
        LinkStats::new(
            EstimatorParams { alpha: 0.05, queue_window_us: window, plr_window: 100 },
            &[(ch(0), 100.0), (ch(1), 50.0)],
        )
    }

    fn arrival(t: Micros, id: u64) -> [TraceRecord; 2] {
        [
            TraceRecord::new(t, TraceEvent::Arrival {
                packet: PacketId(id),
                flow: 0,
                ac: AccessCategory::BestEffort,
                size: 1000,
                deadline: None,
                fragment: None,
            }),
            TraceRecord::new(t, TraceEvent::Enqueue {
                packet: PacketId(id),
                flow: 0,
                word: 0x0001,
                max_attempts: [4, 0, 0, 0],
                scope: QueueScope::PerLink(ch(0)),
            }),
        ]
    }

    fn attempt(t: Micros, id: u64, outcome: AttemptOutcome) -> TraceRecord {
        TraceRecord::new(t, TraceEvent::Attempt {
            packet: PacketId(id),
            flow: 0,
            link: ch(0),
            series: 0,
            attempt: 1,
            outcome,
            airtime: 100,
        })
    }

    #[test]
    fn wait_rules() {
        assert_eq!(littles_wait(0.0, 0.0), 0.0);
        assert_eq!(littles_wait(12.0, 0.0004), 30_000.0);
        assert_eq!(littles_wait(1.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn no_arrivals_means_zero_rate() {
        let s = stats(None);
        assert_eq!(s.arrival_rate(ch(0)), 0.0);
        assert_eq!(estimate_wait(&s, ch(0)), 0.0);
    }

    #[test]
    fn constant_gap_rate_converges() {
        let mut s = stats(Some(10_000));
        for k in 0..500u64 {
            for r in arrival(k * 250, k) {
                s.observe(&r).unwrap();
            }
        }
        assert!((s.arrival_rate(ch(0)) - 1.0 / 250.0).abs() < 1e-12);
    }

    #[test]
    fn alternating_outcomes_give_half_loss() {
        let mut s = stats(None);
        for r in arrival(0, 1) {
            s.observe(&r).unwrap();
        }
        // window-count oracle: the last 100 of 301 alternating outcomes
        let outcomes: Vec<bool> = (0..301).map(|i| i % 2 == 1).collect();
        for (i, &lost) in outcomes.iter().enumerate() {
            let o = if lost { AttemptOutcome::Lost } else { AttemptOutcome::Success };
            s.observe(&attempt(i as u64, 99, o)).unwrap();
        }
        let tail = &outcomes[outcomes.len() - 100..];
        let expected = tail.iter().filter(|&&l| l).count() as f64 / 100.0;
        assert_eq!(s.plr(ch(0)), expected);
        assert_eq!(expected, 0.5);
    }

    #[test]
    fn time_weighted_queue_length() {
        let mut s = stats(None);
        for r in arrival(0, 1) {
            s.observe(&r).unwrap();
        }
        for r in arrival(100, 2) {
            s.observe(&r).unwrap();
        }
        s.observe(&TraceRecord::new(300, TraceEvent::Deliver {
            packet: PacketId(1),
            flow: 0,
            link: ch(0),
            attempts: 1,
        }))
        .unwrap();
        s.advance(400);
        // 1 pkt for 100 µs, 2 for 200 µs, 1 for 100 µs
        assert!((s.mean_queue(ch(0)) - 600.0 / 400.0).abs() < 1e-12);
        assert_eq!(s.queue_len(ch(0)), 1);
    }

    #[test]
    fn loss_moves_packet_between_link_queues() {
        let mut s = stats(None);
        s.observe(&arrival(0, 1)[0]).unwrap();
        s.observe(&TraceRecord::new(0, TraceEvent::Enqueue {
            packet: PacketId(1),
            flow: 0,
            word: 0x0021,
            max_attempts: [1, 1, 0, 0],
            scope: QueueScope::Shared,
        }))
        .unwrap();
        assert_eq!((s.queue_len(ch(0)), s.queue_len(ch(1))), (1, 0));
        s.observe(&attempt(10, 1, AttemptOutcome::Lost)).unwrap();
        assert_eq!((s.queue_len(ch(0)), s.queue_len(ch(1))), (0, 1));
    }

    #[test]
    fn rejects_out_of_order() {
        let mut s = stats(None);
        s.observe(&TraceRecord::new(50, TraceEvent::SimEnd)).unwrap();
        assert_eq!(
            s.observe(&TraceRecord::new(10, TraceEvent::SimEnd)),
            Err(OutOfOrder { seen: 50, got: 10 })
        );
    }

    #[test]
    fn capacity_tracks_deliveries() {
        let mut s = stats(None);
        for r in arrival(0, 1) {
            s.observe(&r).unwrap();
        }
        s.observe(&attempt(100, 1, AttemptOutcome::Success)).unwrap();
        // 8000 bits in 100 µs = 80 bits/µs, blended into the 100 nominal
        assert!((s.capacity(ch(0)) - (0.95 * 100.0 + 0.05 * 80.0)).abs() < 1e-9);
    }
}
