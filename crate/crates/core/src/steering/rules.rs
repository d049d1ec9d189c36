//! Early static steering from header fields.

use serde::{Deserialize, Serialize};

use crate::types::{AccessCategory, ChannelId, Packet};

/// Conjunction of optional field tests; an empty matcher matches anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tos: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ac: Option<AccessCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tid: Option<u8>,
}

impl RuleMatch {
    pub fn matches(&self, p: &Packet) -> bool {
        self.flow.is_none_or(|v| v == p.flow_id)
            && self.receiver.is_none_or(|v| v == p.receiver)
            && self.tos.is_none_or(|v| v == p.tos)
            && self.port.is_none_or(|v| v == p.port)
            && self.ac.is_none_or(|v| v == p.ac)
            && self.tid.is_none_or(|v| v == p.tid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticRule {
    pub matcher: RuleMatch,
    pub target: ChannelId,
}

/// Ordered rules with a mandatory fallback link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticRules {
    pub rules: Vec<StaticRule>,
    pub default: ChannelId,
}

impl StaticRules {
    pub fn targets(&self) -> impl Iterator<Item = ChannelId> + '_ {
        self.rules.iter().map(|r| r.target).chain(std::iter::once(self.default))
    }
}

/// First matching rule wins, else the default link.
pub fn steer_static(packet: &Packet, rules: &StaticRules) -> ChannelId {
    rules
        .rules
        .iter()
        .find(|r| r.matcher.matches(packet))
        .map_or(rules.default, |r| r.target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PacketId;

    fn ch(i: u8) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn pkt(port: u16, tos: u8) -> Packet {
        Packet {
            id: PacketId(0),
            flow_id: 1,
            tid: 5,
            ac: AccessCategory::Video,
            receiver: 3,
            tos,
            port,
            size_bytes: 100,
            arrival_time: 0,
            deadline: None,
            fragment: None,
        }
    }

    fn rules() -> StaticRules {
        StaticRules {
            rules: vec![
                StaticRule {
                    matcher: RuleMatch { port: Some(5004), ..Default::default() },
                    target: ch(2),
                },
                StaticRule {
                    matcher: RuleMatch { tos: Some(0xB8), ..Default::default() },
                    target: ch(1),
                },
            ],
            default: ch(0),
        }
    }

    #[test]
    fn port_rule_matches() {
        assert_eq!(steer_static(&pkt(5004, 0), &rules()), ch(2));
    }

    #[test]
    fn falls_back_to_default() {
        assert_eq!(steer_static(&pkt(80, 0), &rules()), ch(0));
    }

    #[test]
    fn first_match_wins() {
        assert_eq!(steer_static(&pkt(5004, 0xB8), &rules()), ch(2));
        assert_eq!(steer_static(&pkt(53, 0xB8), &rules()), ch(1));
    }

    #[test]
    fn all_fields_must_match() {
        let m = RuleMatch { ac: Some(AccessCategory::Video), tid: Some(4), ..Default::default() };
        assert!(!m.matches(&pkt(1, 1)));
        let m = RuleMatch { ac: Some(AccessCategory::Video), receiver: Some(3), flow: Some(1), ..Default::default() };
        assert!(m.matches(&pkt(1, 1)));
    }
}
