//! EDCA contention for one L-MAC: per-AC backoff with freezing, virtual
//! collision resolution and contention-window updates.

use rand::Rng;

use crate::channel::ChannelState;
use crate::sim::rng::StreamRng;
use crate::types::{AccessCategory, ChannelId, EdcaParams, Micros};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentionPhase {
    Idle,
    /// Counting down `slots` from the AIFS that begins at `since`.
    Counting {
        since: Micros,
        slots: u32,
        expires: Micros,
    },
    Transmitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcContention {
    pub cw: u32,
    pub phase: ContentionPhase,
    /// Backoff already drawn but not yet consumed.
    pub pending_slots: Option<u32>,
    /// Bumped whenever a scheduled expiry becomes stale.
    pub generation: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Countdown {
    Expires(Micros),
    Frozen(u32),
}

/// Walks a backoff countdown forward from `start` over the medium's busy
/// periods. The medium must stay idle for a full AIFS before slots are
/// counted; any busy period freezes the counter and forces a new AIFS.
/// With `stop`, the walk halts at that instant and reports the slots left.
pub fn countdown(
    medium: &ChannelState,
    aifs: Micros,
    slot: Micros,
    start: Micros,
    mut slots: u32,
    stop: Option<Micros>,
) -> Countdown {
    let mut t = start;
    loop {
        if stop.is_some_and(|s| s <= t) {
            return Countdown::Frozen(slots);
        }
        if let Some(free) = medium.busy_at(t) {
            t = free;
            continue;
        }
        let counting_from = t + aifs;
        let expires = counting_from + slots as Micros * slot;
        let next_busy = medium.outages.next_busy_after(t);
        let interrupt = match (next_busy.map(|o| o.start), stop) {
            (Some(b), Some(s)) => Some(b.min(s)),
            (b, s) => b.or(s),
        };
        match interrupt {
            Some(i) if i <= expires => {
                let elapsed = i.saturating_sub(counting_from) / slot.max(1);
                slots -= (elapsed as u32).min(slots);
                if stop == Some(i) {
                    return Countdown::Frozen(slots);
                }
                t = i;
            }
            _ => return Countdown::Expires(expires),
        }
    }
}

/// One affiliated STA: the contention state of all four ACs on a channel.
#[derive(Debug, Clone)]
pub struct LMac {
    pub channel: ChannelId,
    pub edca: [EdcaParams; 4],
    pub slot: Micros,
    pub sifs: Micros,
    pub state: [AcContention; 4],
    rngs: [StreamRng; 4],
}

impl LMac {
    pub fn new(
        channel: ChannelId,
        edca: [EdcaParams; 4],
        slot: Micros,
        sifs: Micros,
        rngs: [StreamRng; 4],
    ) -> Self {
        let state = edca.map(|p| AcContention {
            cw: p.cw_min,
            phase: ContentionPhase::Idle,
            pending_slots: None,
            generation: 0,
        });
        Self {
            channel,
            edca,
            slot,
            sifs,
            state,
            rngs,
        }
    }

    pub fn params(&self, ac: AccessCategory) -> &EdcaParams {
        &self.edca[ac.index()]
    }

    pub fn contention(&self, ac: AccessCategory) -> &AcContention {
        &self.state[ac.index()]
    }

    /// AIFS = SIFS + AIFSN slots.
    pub fn aifs(&self, ac: AccessCategory) -> Micros {
        self.sifs + self.params(ac).aifsn as Micros * self.slot
    }

    /// Uniform draw over `0..=cw_current`.
    pub fn draw_backoff(&mut self, ac: AccessCategory) -> u32 {
        let cw = self.state[ac.index()].cw;
        self.rngs[ac.index()].random_range(0..=cw)
    }

    /// Starts (or resumes) contention and returns the access time.
    pub fn edca_contend(&mut self, ac: AccessCategory, now: Micros, medium: &ChannelState) -> Micros {
        let slots = match self.state[ac.index()].pending_slots.take() {
            Some(s) => s,
            None => self.draw_backoff(ac),
        };
        self.start_countdown(ac, now, slots, medium)
    }

    fn start_countdown(
        &mut self,
        ac: AccessCategory,
        since: Micros,
        slots: u32,
        medium: &ChannelState,
    ) -> Micros {
        let aifs = self.aifs(ac);
        let expires = match countdown(medium, aifs, self.slot, since, slots, None) {
            Countdown::Expires(t) => t,
            Countdown::Frozen(_) => unreachable!("countdown without stop always expires"),
        };
        let st = &mut self.state[ac.index()];
        st.phase = ContentionPhase::Counting {
            since,
            slots,
            expires,
        };
        st.generation += 1;
        expires
    }

    /// Freezes a running countdown at `at` because the medium was taken.
    /// Call before the medium is marked busy. The remaining slots are kept
    /// as the pending backoff.
    pub fn freeze(&mut self, ac: AccessCategory, at: Micros, medium: &ChannelState) {
        if let ContentionPhase::Counting { since, slots, .. } = self.state[ac.index()].phase {
            let aifs = self.aifs(ac);
            let left = match countdown(medium, aifs, self.slot, since, slots, Some(at)) {
                Countdown::Frozen(s) => s,
                Countdown::Expires(_) => 0,
            };
            let st = &mut self.state[ac.index()];
            st.pending_slots = Some(left);
            st.phase = ContentionPhase::Idle;
            st.generation += 1;
        }
    }

    /// Highest AC wins; every loser doubles its window and redraws as if it
    /// had collided on air.
    pub fn resolve_virtual_collision(&mut self, contenders: &[AccessCategory]) -> AccessCategory {
        let winner = *contenders
            .iter()
            .max()
            .expect("virtual collision needs a contender");
        for &ac in contenders.iter().filter(|&&ac| ac != winner) {
            self.grow_cw(ac);
            let slots = self.draw_backoff(ac);
            let st = &mut self.state[ac.index()];
            st.pending_slots = Some(slots);
            st.phase = ContentionPhase::Idle;
            st.generation += 1;
        }
        winner
    }

    pub fn begin_txop(&mut self, ac: AccessCategory) {
        let st = &mut self.state[ac.index()];
        st.phase = ContentionPhase::Transmitting;
        st.pending_slots = None;
        st.generation += 1;
    }

    /// Gives up a won access that found nothing to send.
    pub fn release_empty(&mut self, ac: AccessCategory) {
        let st = &mut self.state[ac.index()];
        st.phase = ContentionPhase::Idle;
        st.pending_slots = None;
        st.generation += 1;
    }

    pub fn post_txop_reset(&mut self, ac: AccessCategory, txop_had_success: bool) {
        if txop_had_success {
            self.state[ac.index()].cw = self.params(ac).cw_min;
        } else {
            self.grow_cw(ac);
        }
        let st = &mut self.state[ac.index()];
        st.phase = ContentionPhase::Idle;
        st.pending_slots = None;
    }

    fn grow_cw(&mut self, ac: AccessCategory) {
        let max = self.params(ac).cw_max;
        let st = &mut self.state[ac.index()];
        st.cw = (2 * st.cw + 1).min(max);
    }
}
