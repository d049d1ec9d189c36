//! U-MAC policy layer: picks the queue and the descriptor for each packet
//! at enqueue time.

pub mod crs;
pub mod dynamic;
pub mod rules;
pub mod stats;
pub mod tid;

pub use crs::{assign_crs_descriptor, CrsContext, CrsOverride, CrsPolicy, CrsStrategy, SteeringError};
pub use dynamic::steer_dynamic;
pub use rules::{steer_static, RuleMatch, StaticRule, StaticRules};
pub use stats::{estimate_wait, littles_wait, EstimatorParams, LinkSnapshot, LinkStats, OutOfOrder};
pub use tid::{apply_tid_map, TidLinkMap, TID_COUNT};

use serde::{Deserialize, Serialize};

use crate::descriptor::{TxDescriptor, SERIES_COUNT};
use crate::mac::QueueScope;
use crate::types::{ChannelId, LinkMask, Micros, Packet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Header rules pick one link; per-link queues.
    #[default]
    #[serde(rename = "static")]
    EarlyStatic,
    /// Live link statistics pick one link; per-link queues.
    #[serde(rename = "dynamic")]
    EarlyDynamic,
    /// One shared queue served in strict order by whichever link wins.
    LateFifo,
    /// Shared queue, per-series bitmaps, orderly scan.
    Crs,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::EarlyStatic,
        PolicyKind::EarlyDynamic,
        PolicyKind::LateFifo,
        PolicyKind::Crs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::EarlyStatic => "static",
            PolicyKind::EarlyDynamic => "dynamic",
            PolicyKind::LateFifo => "late_fifo",
            PolicyKind::Crs => "crs",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn shared_queue(self) -> bool {
        matches!(self, PolicyKind::LateFifo | PolicyKind::Crs)
    }

    /// Whether TXOP service honors bitmaps (scan) or takes the head (FIFO).
    pub fn scans(self) -> bool {
        self == PolicyKind::Crs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringConfig {
    pub policy: PolicyKind,
    pub rules: StaticRules,
    pub crs: CrsPolicy,
    pub estimator: EstimatorParams,
    /// Per-series attempt budget and MCS for the non-CRS policies.
    pub max_attempts: [u8; SERIES_COUNT],
    pub mcs: [u8; SERIES_COUNT],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub scope: QueueScope,
    pub descriptor: TxDescriptor,
}

impl SteeringConfig {
    /// Whether `decide` consults link statistics for this packet.
    pub fn needs_stats(&self, packet: &Packet) -> bool {
        match self.policy {
            PolicyKind::EarlyDynamic => true,
            PolicyKind::Crs => matches!(self.crs.strategy_for(packet), CrsStrategy::DeadlineAware { .. }),
            _ => false,
        }
    }

    /// `links` is the set of active links; `tid_map` is the mapping in force
    /// at `now`, if any.
    pub fn decide(
        &self,
        packet: &Packet,
        links: LinkMask,
        stats: &[LinkSnapshot],
        tid_map: Option<&TidLinkMap>,
        now: Micros,
    ) -> Result<Decision, SteeringError> {
        let early = |link: ChannelId| {
            let link = match tid_map.map(|m| m.mask(packet.tid).intersect(links)) {
                Some(allowed) if !allowed.contains(link) => allowed.lowest().unwrap_or(link),
                _ => link,
            };
            if !links.contains(link) {
                return Err(SteeringError::UnknownLink(link));
            }
            Ok(Decision {
                scope: QueueScope::PerLink(link),
                descriptor: TxDescriptor::uniform(LinkMask::one_hot(link), self.max_attempts, self.mcs, now),
            })
        };
        match self.policy {
            PolicyKind::EarlyStatic => early(steer_static(packet, &self.rules)),
            PolicyKind::EarlyDynamic => {
                let usable: Vec<LinkSnapshot> = stats.iter().filter(|s| links.contains(s.link)).copied().collect();
                let link = steer_dynamic(packet, &usable, now)
                    .or_else(|| links.lowest())
                    .ok_or(SteeringError::NoLinks)?;
                early(link)
            }
            PolicyKind::LateFifo => Ok(Decision {
                scope: QueueScope::Shared,
                descriptor: TxDescriptor::uniform(links, self.max_attempts, self.mcs, now),
            }),
            PolicyKind::Crs => {
                let ctx = CrsContext { links, rules: &self.rules, stats, now };
                let base = assign_crs_descriptor(packet, &self.crs, &ctx)?;
                let descriptor = match tid_map {
                    Some(m) => apply_tid_map(packet.tid, m, &base),
                    None => base,
                };
                Ok(Decision { scope: QueueScope::Shared, descriptor })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AccessCategory, PacketId};

    fn ch(i: u8) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn pkt(tid: u8, port: u16) -> Packet {
        Packet {
            id: PacketId(1),
            flow_id: 0,
            tid,
            ac: AccessCategory::Video,
            receiver: 0,
            tos: 0,
            port,
            size_bytes: 500,
            arrival_time: 0,
            deadline: None,
            fragment: None,
        }
    }

    fn config(policy: PolicyKind) -> SteeringConfig {
        SteeringConfig {
            policy,
            rules: StaticRules {
                rules: vec![StaticRule { matcher: RuleMatch { port: Some(5004), ..Default::default() }, target: ch(2) }],
                default: ch(0),
            },
            crs: CrsPolicy::new(CrsStrategy::Pin(ch(1)), [4; 4], [0; 4]),
            estimator: EstimatorParams::default(),
            max_attempts: [4, 4, 0, 0],
            mcs: [0; 4],
        }
    }

    fn bits(d: &Decision) -> [u8; 4] {
        d.descriptor.bitmaps().map(LinkMask::bits)
    }

    #[test]
    fn policy_names_roundtrip() {
        for p in PolicyKind::ALL {
            assert_eq!(PolicyKind::from_name(p.name()), Some(p));
        }
        assert_eq!(PolicyKind::from_name("split"), None);
    }

    #[test]
    fn early_static_targets_rule_link() {
        let d = config(PolicyKind::EarlyStatic).decide(&pkt(0, 5004), LinkMask::first(3), &[], None, 0).unwrap();
        assert_eq!(d.scope, QueueScope::PerLink(ch(2)));
        assert_eq!(bits(&d), [0b0100, 0b0100, 0, 0]);
    }

    #[test]
    fn early_respects_tid_map() {
        let mut map = TidLinkMap::permissive(LinkMask::first(3));
        map.remap(0, LinkMask::from_bits(0b0011));
        let d = config(PolicyKind::EarlyStatic)
            .decide(&pkt(0, 5004), LinkMask::first(3), &[], Some(&map), 0)
            .unwrap();
        assert_eq!(d.scope, QueueScope::PerLink(ch(0)));
    }

    #[test]
    fn late_fifo_uses_all_links_and_ignores_tid_map() {
        let mut map = TidLinkMap::permissive(LinkMask::first(3));
        map.remap(0, LinkMask::from_bits(0b0001));
        let d = config(PolicyKind::LateFifo)
            .decide(&pkt(0, 0), LinkMask::first(3), &[], Some(&map), 0)
            .unwrap();
        assert_eq!(d.scope, QueueScope::Shared);
        assert_eq!(bits(&d), [0b0111, 0b0111, 0, 0]);
    }

    #[test]
    fn crs_applies_tid_map_after_strategy() {
        let mut map = TidLinkMap::permissive(LinkMask::first(3));
        map.remap(3, LinkMask::from_bits(0b0001));
        let c = config(PolicyKind::Crs);
        let plain = c.decide(&pkt(0, 0), LinkMask::first(3), &[], Some(&map), 0).unwrap();
        let mapped = c.decide(&pkt(3, 0), LinkMask::first(3), &[], Some(&map), 0).unwrap();
        assert_eq!(bits(&plain), [0b0010; 4]);
        assert_eq!(bits(&mapped), [0b0001; 4]);
    }

    #[test]
    fn dynamic_prefers_shorter_wait() {
        let stats = [
            LinkSnapshot { link: ch(0), mean_queue: 4.0, arrival_rate: 0.001, wait: 4000.0, plr: 0.0, capacity: 100.0 },
            LinkSnapshot { link: ch(1), mean_queue: 0.0, arrival_rate: 0.001, wait: 0.0, plr: 0.0, capacity: 100.0 },
        ];
        let c = config(PolicyKind::EarlyDynamic);
        assert!(c.needs_stats(&pkt(0, 0)));
        let d = c.decide(&pkt(0, 0), LinkMask::first(2), &stats, None, 0).unwrap();
        assert_eq!(d.scope, QueueScope::PerLink(ch(1)));
    }
}
