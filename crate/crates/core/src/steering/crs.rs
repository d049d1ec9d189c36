//! Combined retransmission and steering: per-series channel bitmaps chosen
//! by the host at enqueue time.

use thiserror::Error;

use crate::descriptor::{TxDescriptor, TxSeries, SERIES_COUNT};
use crate::steering::dynamic::steer_dynamic;
use crate::steering::rules::{steer_static, RuleMatch, StaticRules};
use crate::steering::stats::LinkSnapshot;
use crate::types::{ChannelId, LinkMask, Micros, Packet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CrsStrategy {
    /// Every used series on one link.
    Pin(ChannelId),
    /// Pin on the link the static rules pick.
    PinStatic,
    /// Series 0 on the first preferred link; each later series adds the
    /// number of links given by `widen[i - 1]` (1 when absent) from the
    /// preference list. `last_resort` joins the final used series.
    Escalate {
        preferred: Vec<ChannelId>,
        widen: Vec<u8>,
        last_resort: Option<ChannelId>,
    },
    AllLinks,
    /// Pin on the dynamic choice for the first `pinned_series` series, all
    /// links afterwards.
    DeadlineAware { pinned_series: usize },
}

impl CrsStrategy {
    pub fn referenced_links(&self) -> Vec<ChannelId> {
        match self {
            CrsStrategy::Pin(l) => vec![*l],
            CrsStrategy::Escalate {
                preferred,
                last_resort,
                ..
            } => preferred.iter().copied().chain(*last_resort).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrsOverride {
    pub matcher: RuleMatch,
    pub strategy: CrsStrategy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrsPolicy {
    pub strategy: CrsStrategy,
    /// First matching override replaces `strategy`.
    pub overrides: Vec<CrsOverride>,
    pub max_attempts: [u8; SERIES_COUNT],
    pub mcs: [u8; SERIES_COUNT],
}

impl CrsPolicy {
    pub fn new(strategy: CrsStrategy, max_attempts: [u8; SERIES_COUNT], mcs: [u8; SERIES_COUNT]) -> Self {
        Self {
            strategy,
            overrides: Vec::new(),
            max_attempts,
            mcs,
        }
    }

    pub fn strategy_for(&self, packet: &Packet) -> &CrsStrategy {
        self.overrides
            .iter()
            .find(|o| o.matcher.matches(packet))
            .map_or(&self.strategy, |o| &o.strategy)
    }
}

/// Inputs a strategy may consult besides the packet.
#[derive(Debug, Clone, Copy)]
pub struct CrsContext<'a> {
    /// Links that exist in this MLD.
    pub links: LinkMask,
    pub rules: &'a StaticRules,
    pub stats: &'a [LinkSnapshot],
    pub now: Micros,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SteeringError {
    #[error("policy references nonexistent link {0}")]
    UnknownLink(ChannelId),
    #[error("escalation needs at least one preferred link")]
    EmptyPreference,
    #[error("no active link to steer to")]
    NoLinks,
}

fn check(link: ChannelId, links: LinkMask) -> Result<ChannelId, SteeringError> {
    if links.contains(link) {
        Ok(link)
    } else {
        Err(SteeringError::UnknownLink(link))
    }
}

/// Per-series bitmaps for a strategy, before attempt budgets are applied.
fn bitmaps(
    packet: &Packet,
    strategy: &CrsStrategy,
    max_attempts: &[u8; SERIES_COUNT],
    ctx: &CrsContext<'_>,
) -> Result<[LinkMask; SERIES_COUNT], SteeringError> {
    Ok(match strategy {
        CrsStrategy::Pin(l) => [LinkMask::one_hot(check(*l, ctx.links)?); SERIES_COUNT],
        CrsStrategy::PinStatic => {
            [LinkMask::one_hot(check(steer_static(packet, ctx.rules), ctx.links)?); SERIES_COUNT]
        }
        CrsStrategy::AllLinks => [ctx.links; SERIES_COUNT],
        CrsStrategy::Escalate {
            preferred,
            widen,
            last_resort,
        } => {
            if preferred.is_empty() {
                return Err(SteeringError::EmptyPreference);
            }
            for &l in preferred.iter().chain(last_resort) {
                check(l, ctx.links)?;
            }
            let mut out = [LinkMask::EMPTY; SERIES_COUNT];
            let mut take = 1usize;
            for (i, slot) in out.iter_mut().enumerate() {
                if i > 0 {
                    take += widen.get(i - 1).copied().unwrap_or(1) as usize;
                }
                *slot = preferred[..take.min(preferred.len())].iter().copied().collect();
            }
            if let (Some(lr), Some(last)) = (last_resort, (0..SERIES_COUNT).rev().find(|&i| max_attempts[i] > 0)) {
                out[last] = out[last].union(LinkMask::one_hot(*lr));
            }
            out
        }
        CrsStrategy::DeadlineAware { pinned_series } => {
            let usable: Vec<LinkSnapshot> = ctx
                .stats
                .iter()
                .filter(|s| ctx.links.contains(s.link))
                .copied()
                .collect();
            let pick = steer_dynamic(packet, &usable, ctx.now)
                .or_else(|| ctx.links.lowest())
                .ok_or(SteeringError::NoLinks)?;
            std::array::from_fn(|i| {
                if i < *pinned_series {
                    LinkMask::one_hot(pick)
                } else {
                    ctx.links
                }
            })
        }
    })
}

/// Builds the descriptor for `packet` under `policy`. The result always
/// passes descriptor validation when the policy has at least one series
/// with a nonzero attempt budget.
pub fn assign_crs_descriptor(
    packet: &Packet,
    policy: &CrsPolicy,
    ctx: &CrsContext<'_>,
) -> Result<TxDescriptor, SteeringError> {
    let strategy = policy.strategy_for(packet);
    let maps = bitmaps(packet, strategy, &policy.max_attempts, ctx)?;
    let series = std::array::from_fn(|i| {
        if policy.max_attempts[i] == 0 {
            TxSeries::UNUSED
        } else {
            TxSeries::new(maps[i], policy.max_attempts[i], policy.mcs[i])
        }
    });
    Ok(TxDescriptor::new(series, ctx.now))
}
