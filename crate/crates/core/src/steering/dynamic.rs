//! Early dynamic steering from live link statistics.

use std::cmp::Ordering;

use crate::steering::stats::LinkSnapshot;
use crate::types::{ChannelId, Micros, Packet};

/// Expected airtime of the packet on a link, µs.
fn expected_airtime(packet: &Packet, s: &LinkSnapshot) -> f64 {
    8.0 * packet.size_bytes as f64 / s.capacity.max(f64::MIN_POSITIVE)
}

/// Picks a link for `packet` among `links`.
///
/// With a deadline, only links whose Little's-law wait plus expected
/// airtime fits the remaining budget are candidates. Candidates are ranked
/// by wait scaled by relative capacity (slower links look proportionally
/// longer), then loss ratio, then channel index. An empty candidate set
/// falls back to the link with the smallest wait.
///
/// Returns `None` only if `links` is empty.
pub fn steer_dynamic(packet: &Packet, links: &[LinkSnapshot], now: Micros) -> Option<ChannelId> {
    let max_cap = links.iter().map(|s| s.capacity).fold(0.0_f64, f64::max);
    let score = |s: &LinkSnapshot| {
        if s.wait == 0.0 {
            0.0
        } else {
            s.wait * max_cap / s.capacity.max(f64::MIN_POSITIVE)
        }
    };
    let rank = |a: &&LinkSnapshot, b: &&LinkSnapshot| {
        score(a)
            .partial_cmp(&score(b))
            .unwrap_or(Ordering::Equal)
            .then(a.plr.partial_cmp(&b.plr).unwrap_or(Ordering::Equal))
            .then(a.link.cmp(&b.link))
    };
    let feasible = |s: &&LinkSnapshot| match packet.deadline {
        None => true,
        Some(d) => {
            let budget = d.saturating_sub(now) as f64;
            s.wait + expected_airtime(packet, s) <= budget
        }
    };
    links
        .iter()
        .filter(feasible)
        .min_by(rank)
        .or_else(|| {
            links.iter().min_by(|a, b| {
                a.wait
                    .partial_cmp(&b.wait)
                    .unwrap_or(Ordering::Equal)
                    .then(a.link.cmp(&b.link))
            })
        })
        .map(|s| s.link)
}
