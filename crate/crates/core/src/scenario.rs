//! Scenario files (TOML): parsing with complete error reporting,
//! serialization, and conversion into runtime objects.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelState, McsTable, Outage, OutageSchedule, DEFAULT_FRAME_OVERHEAD_US};
use crate::descriptor::SERIES_COUNT;
use crate::mac::DEFAULT_QUEUE_CAPACITY;
use crate::sim::traffic::FlowSpec;
use crate::steering::{
    CrsOverride, CrsPolicy, CrsStrategy, EstimatorParams, PolicyKind, RuleMatch, StaticRule, StaticRules,
    SteeringConfig, TidLinkMap, TID_COUNT,
};
use crate::types::{AccessCategory, Band, ChannelId, EdcaParams, LinkMask, Micros, MAX_LINKS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_us: Micros,
    pub channels: Vec<ChannelSpec>,
    pub lmacs: Vec<LmacSpec>,
    #[serde(default)]
    pub queues: QueueSpec,
    #[serde(default)]
    pub descriptor: DescriptorSpec,
    #[serde(default)]
    pub steering: SteeringSpec,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: u8,
    pub band: Band,
    pub mcs: Vec<McsSpec>,
    #[serde(default)]
    pub base_loss: f64,
    #[serde(default = "default_overhead")]
    pub frame_overhead_us: Micros,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outages: Vec<OutageSpec>,
}

fn default_overhead() -> Micros {
    DEFAULT_FRAME_OVERHEAD_US
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsSpec {
    pub index: u8,
    pub rate_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageSpec {
    pub start_us: Micros,
    pub end_us: Micros,
    #[serde(default = "full_loss")]
    pub loss: f64,
    /// The medium reads busy for the whole outage (no access at all).
    #[serde(default)]
    pub busy: bool,
}

fn full_loss() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmacSpec {
    pub channel: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_us: Option<Micros>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sifs_us: Option<Micros>,
    #[serde(default)]
    pub edca: EdcaSpec,
}

/// Per-AC overrides of the standard EDCA table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EdcaSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<EdcaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_effort: Option<EdcaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<EdcaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voice: Option<EdcaParams>,
}

impl EdcaSpec {
    pub fn params(&self, ac: AccessCategory) -> EdcaParams {
        let o = match ac {
            AccessCategory::Background => self.background,
            AccessCategory::BestEffort => self.best_effort,
            AccessCategory::Video => self.video,
            AccessCategory::Voice => self.voice,
        };
        o.unwrap_or_else(|| EdcaParams::default_for(ac))
    }

    pub fn table(&self) -> [EdcaParams; 4] {
        AccessCategory::ALL.map(|ac| self.params(ac))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSpec {
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_depth: Option<usize>,
}

fn default_capacity() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

impl Default for QueueSpec {
    fn default() -> Self {
        Self { capacity: DEFAULT_QUEUE_CAPACITY, scan_depth: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSpec {
    #[serde(default = "default_attempts")]
    pub max_attempts: [u8; SERIES_COUNT],
    #[serde(default)]
    pub mcs: [u8; SERIES_COUNT],
}

fn default_attempts() -> [u8; SERIES_COUNT] {
    [4; SERIES_COUNT]
}

impl Default for DescriptorSpec {
    fn default() -> Self {
        Self { max_attempts: default_attempts(), mcs: [0; SERIES_COUNT] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    #[serde(default)]
    pub policy: PolicyKind,
    /// Target when no rule matches; the lowest channel when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_link: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<RuleSpec>,
    #[serde(default)]
    pub crs: CrsSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tid_map: Vec<TidEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tid_updates: Vec<TidUpdate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    #[serde(rename = "match", default)]
    pub matcher: RuleMatch,
    pub link: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    Pin(u8),
    PinStatic,
    Escalate {
        preferred: Vec<u8>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        widen: Vec<u8>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        last_resort: Option<u8>,
    },
    #[default]
    AllLinks,
    DeadlineAware {
        #[serde(default = "default_pinned")]
        pinned_series: usize,
    },
}

fn default_pinned() -> usize {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrsSpec {
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideSpec {
    #[serde(rename = "match", default)]
    pub matcher: RuleMatch,
    pub strategy: StrategySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueAverage {
    /// Time-weighted mean over the whole run.
    Cumulative,
    /// Exponential decay with time constant `tau_us`.
    Window { tau_us: Micros },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_queue_average")]
    pub queue_average: QueueAverage,
    #[serde(default = "default_plr_window")]
    pub plr_window: usize,
}

fn default_alpha() -> f64 {
    EstimatorParams::default().alpha
}

fn default_queue_average() -> QueueAverage {
    match EstimatorParams::default().queue_window_us {
        Some(tau_us) => QueueAverage::Window { tau_us },
        None => QueueAverage::Cumulative,
    }
}

fn default_plr_window() -> usize {
    EstimatorParams::default().plr_window
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            queue_average: default_queue_average(),
            plr_window: default_plr_window(),
        }
    }
}

impl EstimatorSpec {
    pub fn params(&self) -> EstimatorParams {
        EstimatorParams {
            alpha: self.alpha,
            queue_window_us: match self.queue_average {
                QueueAverage::Cumulative => None,
                QueueAverage::Window { tau_us } => Some(tau_us),
            },
            plr_window: self.plr_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TidEntry {
    pub tid: u8,
    pub links: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TidUpdate {
    pub at_us: Micros,
    pub tid: u8,
    pub links: Vec<u8>,
}

/// Everything wrong with a scenario text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioErrors(pub Vec<String>);

impl fmt::Display for ScenarioErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioErrors {}

/// Parses and validates. Unknown keys, type errors and semantic
/// violations are all reported together.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioErrors> {
    let de = toml::Deserializer::parse(text).map_err(|e| ScenarioErrors(vec![e.to_string().trim_end().to_string()]))?;
    let mut errors = Vec::new();
    let parsed: Result<Scenario, _> = serde_ignored::deserialize(de, |path| {
        errors.push(format!("unknown key `{path}`"));
    });
    match parsed {
        Ok(s) => {
            errors.extend(s.validate());
            if errors.is_empty() {
                Ok(s)
            } else {
                Err(ScenarioErrors(errors))
            }
        }
        Err(e) => {
            errors.push(e.to_string().trim_end().to_string());
            Err(ScenarioErrors(errors))
        }
    }
}

fn ch(raw: u8) -> Option<ChannelId> {
    ChannelId::new(raw)
}

impl Scenario {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Hash of everything except the steering section.
    pub fn fingerprint(&self) -> String {
        let mut s = self.clone();
        s.steering = SteeringSpec::default();
        let digest = Sha256::digest(s.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_policy(mut self, policy: PolicyKind) -> Self {
        self.steering.policy = policy;
        self
    }

    pub fn links(&self) -> LinkMask {
        self.channels.iter().filter_map(|c| ch(c.id)).collect()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.duration_us == 0 {
            e.push("duration_us must be positive".to_string());
        }

        let mut ids = BTreeSet::new();
        for (i, c) in self.channels.iter().enumerate() {
            let at = format!("channels[{i}]");
            if ch(c.id).is_none() {
                e.push(format!("{at}: channel id {} outside 0..{}", c.id, MAX_LINKS - 1));
            }
            if !ids.insert(c.id) {
                e.push(format!("{at}: duplicate channel id {}", c.id));
            }
            let mut seen = BTreeSet::new();
            for m in &c.mcs {
                if !seen.insert(m.index) {
                    e.push(format!("{at}: duplicate MCS index {}", m.index));
                }
            }
            e.extend(self.channel_state(c).violations().into_iter().map(|v| format!("{at}: {v}")));
        }

        if self.lmacs.is_empty() {
            e.push("at least one L-MAC is required".to_string());
        }
        if self.lmacs.len() > MAX_LINKS {
            e.push(format!("at most four L-MACs (got {})", self.lmacs.len()));
        }
        let mut bound = BTreeMap::new();
        for (i, l) in self.lmacs.iter().enumerate() {
            let at = format!("lmacs[{i}]");
            if !ids.contains(&l.channel) {
                e.push(format!("{at}: references undefined channel {}", l.channel));
            }
            if let Some(prev) = bound.insert(l.channel, i) {
                e.push(format!("{at}: channel {} already bound to lmacs[{prev}]", l.channel));
            }
            if l.slot_us == Some(0) {
                e.push(format!("{at}: slot_us must be positive"));
            }
            for ac in AccessCategory::ALL {
                for v in l.edca.params(ac).violations() {
                    e.push(format!("{at}.edca.{}: {v}", ac.short()));
                }
            }
        }
        for c in &self.channels {
            if !bound.contains_key(&c.id) {
                e.push(format!("channel {} has no L-MAC", c.id));
            }
        }

        if self.queues.capacity == 0 {
            e.push("queues.capacity must be positive".to_string());
        }
        if self.queues.scan_depth == Some(0) {
            e.push("queues.scan_depth must be positive".to_string());
        }

        let d = &self.descriptor;
        if d.max_attempts.iter().all(|&m| m == 0) {
            e.push("descriptor.max_attempts: no usable series".to_string());
        }
        if d.max_attempts.iter().any(|&m| m > 15) {
            e.push("descriptor.max_attempts: at most 15 attempts per series".to_string());
        }
        for (s, (&m, &mcs)) in d.max_attempts.iter().zip(&d.mcs).enumerate() {
            if m == 0 {
                continue;
            }
            for c in &self.channels {
                if !c.mcs.iter().any(|x| x.index == mcs) {
                    e.push(format!("descriptor.mcs[{s}]: MCS {mcs} missing on channel {}", c.id));
                }
            }
        }

        let exists = |raw: u8| ids.contains(&raw) && ch(raw).is_some();
        let st = &self.steering;
        if let Some(l) = st.default_link {
            if !exists(l) {
                e.push(format!("steering.default_link: undefined channel {l}"));
            }
        }
        for (i, r) in st.rules.iter().enumerate() {
            if !exists(r.link) {
                e.push(format!("steering.rules[{i}]: undefined channel {}", r.link));
            }
        }
        let mut check_strategy = |at: String, s: &StrategySpec| match s {
            StrategySpec::Pin(l) if !exists(*l) => e.push(format!("{at}: undefined channel {l}")),
            StrategySpec::Escalate { preferred, last_resort, .. } => {
                if preferred.is_empty() {
                    e.push(format!("{at}: escalation needs at least one preferred link"));
                }
                let mut seen = BTreeSet::new();
                for &l in preferred.iter().chain(last_resort) {
                    if !exists(l) {
                        e.push(format!("{at}: undefined channel {l}"));
                    }
                }
                for &l in preferred {
                    if !seen.insert(l) {
                        e.push(format!("{at}: channel {l} listed twice"));
                    }
                }
            }
            StrategySpec::DeadlineAware { pinned_series } if *pinned_series > SERIES_COUNT => {
                e.push(format!("{at}: pinned_series {pinned_series} exceeds {SERIES_COUNT}"))
            }
            _ => {}
        };
        check_strategy("steering.crs.strategy".to_string(), &st.crs.strategy);
        for (i, o) in st.crs.overrides.iter().enumerate() {
            check_strategy(format!("steering.crs.overrides[{i}]"), &o.strategy);
        }
        let est = &st.estimator;
        if !(est.alpha > 0.0 && est.alpha <= 1.0) {
            e.push(format!("steering.estimator.alpha {} outside (0, 1]", est.alpha));
        }
        if est.plr_window == 0 {
            e.push("steering.estimator.plr_window must be positive".to_string());
        }
        if est.queue_average == (QueueAverage::Window { tau_us: 0 }) {
            e.push("steering.estimator.queue_average window must be positive".to_string());
        }
        let mut tids = BTreeSet::new();
        let check_links = |at: String, links: &[u8], e: &mut Vec<String>| {
            if links.is_empty() {
                e.push(format!("{at}: link set must not be empty"));
            }
            for &l in links {
                if !exists(l) {
                    e.push(format!("{at}: undefined channel {l}"));
                }
            }
        };
        for (i, t) in st.tid_map.iter().enumerate() {
            let at = format!("steering.tid_map[{i}]");
            if t.tid as usize >= TID_COUNT {
                e.push(format!("{at}: tid {} out of range", t.tid));
            }
            if !tids.insert(t.tid) {
                e.push(format!("{at}: tid {} mapped twice", t.tid));
            }
            check_links(at, &t.links, &mut e);
        }
        for (i, u) in st.tid_updates.iter().enumerate() {
            let at = format!("steering.tid_updates[{i}]");
            if !tids.contains(&u.tid) {
                e.push(format!("{at}: tid {} has no tid_map entry", u.tid));
            }
            check_links(at, &u.links, &mut e);
        }

        let mut flow_ids = BTreeSet::new();
        for (i, f) in self.flows.iter().enumerate() {
            let at = format!("flows[{i}]");
            if !flow_ids.insert(f.id) {
                e.push(format!("{at}: duplicate flow id {}", f.id));
            }
            e.extend(f.violations(self.duration_us).into_iter().map(|v| format!("{at}: {v}")));
            if !st.tid_map.is_empty() && !tids.contains(&f.tid) {
                e.push(format!("{at}: tid {} has no tid_map entry", f.tid));
            }
        }
        e
    }

    fn channel_state(&self, c: &ChannelSpec) -> ChannelState {
        let id = ch(c.id).unwrap_or(ChannelId::new(0).expect("channel 0"));
        let table = McsTable::new(c.mcs.iter().map(|m| (m.index, m.rate_mbps)));
        let outages = OutageSchedule::new(
            c.outages
                .iter()
                .map(|o| Outage { start: o.start_us, end: o.end_us, loss_prob: o.loss, busy: o.busy })
                .collect(),
        );
        let mut s = ChannelState::new(id, c.band, table, c.base_loss).with_outages(outages);
        s.frame_overhead = c.frame_overhead_us;
        s
    }

    /// Runtime channel models, ordered by channel id. Call on validated
    /// scenarios only.
    pub fn channel_states(&self) -> Vec<ChannelState> {
        let mut v: Vec<_> = self.channels.iter().map(|c| self.channel_state(c)).collect();
        v.sort_by_key(|c| c.channel);
        v
    }

    pub fn lmac_for(&self, channel: ChannelId) -> Option<&LmacSpec> {
        self.lmacs.iter().find(|l| l.channel == channel.raw())
    }

    /// Capacity (bits/µs) of each link at the first used series' MCS.
    pub fn nominal_capacities(&self) -> Vec<(ChannelId, f64)> {
        let s0 = self.descriptor.max_attempts.iter().position(|&m| m > 0).unwrap_or(0);
        let mcs = self.descriptor.mcs[s0];
        self.channel_states()
            .iter()
            .map(|c| (c.channel, c.mcs_table.rate(mcs).unwrap_or(1.0)))
            .collect()
    }

    pub fn tid_map(&self) -> Option<TidLinkMap> {
        if self.steering.tid_map.is_empty() {
            return None;
        }
        let links = self.links();
        let mut m = TidLinkMap::permissive(links);
        for t in &self.steering.tid_map {
            m.remap(t.tid, mask(&t.links));
        }
        Some(m)
    }

    pub fn steering_config(&self) -> SteeringConfig {
        let st = &self.steering;
        let links = self.links();
        let default = st
            .default_link
            .and_then(ch)
            .or_else(|| links.lowest())
            .unwrap_or(ChannelId::new(0).expect("channel 0"));
        let d = &self.descriptor;
        let mut crs = CrsPolicy::new(strategy(&st.crs.strategy), d.max_attempts, d.mcs);
        crs.overrides = st
            .crs
            .overrides
            .iter()
            .map(|o| CrsOverride { matcher: o.matcher.clone(), strategy: strategy(&o.strategy) })
            .collect();
        SteeringConfig {
            policy: st.policy,
            rules: StaticRules {
                rules: st
                    .rules
                    .iter()
                    .filter_map(|r| Some(StaticRule { matcher: r.matcher.clone(), target: ch(r.link)? }))
                    .collect(),
                default,
            },
            crs,
            estimator: st.estimator.params(),
            max_attempts: d.max_attempts,
            mcs: d.mcs,
        }
    }
}

pub fn mask(links: &[u8]) -> LinkMask {
    links.iter().filter_map(|&l| ch(l)).collect()
}

fn strategy(s: &StrategySpec) -> CrsStrategy {
    let c = |l: u8| ch(l).expect("validated channel id");
    match s {
        StrategySpec::Pin(l) => CrsStrategy::Pin(c(*l)),
        StrategySpec::PinStatic => CrsStrategy::PinStatic,
        StrategySpec::Escalate { preferred, widen, last_resort } => CrsStrategy::Escalate {
            preferred: preferred.iter().map(|&l| c(l)).collect(),
            widen: widen.clone(),
            last_resort: last_resort.map(c),
        },
        StrategySpec::AllLinks => CrsStrategy::AllLinks,
        StrategySpec::DeadlineAware { pinned_series } => CrsStrategy::DeadlineAware { pinned_series: *pinned_series },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::traffic::{ArrivalProcess, SizeDist};
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
duration_us = 1000000

[[channels]]
id = 0
band = "5GHz"
mcs = [{ index = 0, rate_mbps = 24.0 }]

[[lmacs]]
channel = 0

[[flows]]
id = 1
ac = "video"
size = { fixed = 1200 }
arrival = { cbr = { period_us = 10000 } }
"#;

    fn errors(text: &str) -> Vec<String> {
        parse_scenario(text).unwrap_err().0
    }

    #[test]
    fn minimal_parses() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.flows.len(), 1);
        assert_eq!(s.queues.capacity, 256);
        assert_eq!(s.descriptor.max_attempts, [4; 4]);
        assert_eq!(s.steering.policy, PolicyKind::EarlyStatic);
    }

    #[test]
    fn five_lmacs_rejected() {
        let mut text = String::from("duration_us = 1000\n");
        for i in 0..5 {
            text += &format!("[[channels]]\nid = {i}\nband = \"5GHz\"\nmcs = [{{ index = 0, rate_mbps = 6.0 }}]\n");
            text += &format!("[[lmacs]]\nchannel = {i}\n");
        }
        let e = errors(&text);
        assert!(e.iter().any(|m| m.contains("at most four L-MACs")), "{e:?}");
    }

    #[test]
    fn dangling_tid_reported() {
        let text = format!("{MINIMAL}\n[[steering.tid_map]]\ntid = 3\nlinks = [0]\n");
        let e = errors(&text);
        assert!(e.iter().any(|m| m.contains("flows[0]: tid 0 has no tid_map entry")), "{e:?}");
    }

    #[test]
    fn every_problem_listed() {
        let text = MINIMAL
            .replace("[[lmacs]]\nchannel = 0", "[[lmacs]]\nchannel = 2\nslot = 9")
            .replace("period_us = 10000", "period_us = 10000, jitter_us = 6000");
        let e = errors(&text);
        assert!(e.iter().any(|m| m.contains("unknown key `lmacs.0.slot`")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("undefined channel 2")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("channel 0 has no L-MAC")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("jitter")), "{e:?}");
    }

    #[test]
    fn syntax_error_is_reported() {
        assert_eq!(errors("duration_us = = 3").len(), 1);
    }

    #[test]
    fn fingerprint_ignores_steering() {
        let s = parse_scenario(MINIMAL).unwrap();
        let t = s.clone().with_policy(PolicyKind::Crs);
        assert_eq!(s.fingerprint(), t.fingerprint());
        let mut u = s.clone();
        u.duration_us += 1;
        assert_ne!(s.fingerprint(), u.fingerprint());
    }

    #[test]
    fn unit_strategy_from_string() {
        let text = format!("{MINIMAL}\n[steering]\npolicy = \"crs\"\ncrs = {{ strategy = \"pin_static\" }}\n");
        assert_eq!(parse_scenario(&text).unwrap().steering.crs.strategy, StrategySpec::PinStatic);
    }

    fn strategy_spec() -> impl Strategy<Value = StrategySpec> {
        prop_oneof![
            (0u8..2).prop_map(StrategySpec::Pin),
            Just(StrategySpec::PinStatic),
            Just(StrategySpec::AllLinks),
            (0usize..=4).prop_map(|n| StrategySpec::DeadlineAware { pinned_series: n }),
            (Just(vec![1u8, 0]).prop_shuffle(), prop::collection::vec(0u8..2, 0..3), prop::option::of(0u8..2))
                .prop_map(|(preferred, widen, last_resort)| StrategySpec::Escalate { preferred, widen, last_resort }),
        ]
    }

    fn scenario() -> impl Strategy<Value = Scenario> {
        (
            1u64..10_000_000,
            prop::collection::vec((1.0f64..1000.0, 0.0f64..1.0, 0u64..100), 2..=2),
            prop::option::of(1usize..64),
            strategy_spec(),
            prop::sample::select(PolicyKind::ALL.to_vec()),
            prop::collection::vec((0u8..4, 1u32..2000, 1u64..50_000, prop::option::of(1u64..100_000)), 0..4),
            any::<bool>(),
        )
            .prop_map(|(duration_us, chans, scan_depth, strat, policy, flows, cumulative)| Scenario {
                duration_us,
                channels: chans
                    .iter()
                    .enumerate()
                    .map(|(i, &(rate, loss, overhead))| ChannelSpec {
                        id: i as u8,
                        band: if i == 0 { Band::GHz5 } else { Band::GHz6 },
                        mcs: vec![McsSpec { index: 0, rate_mbps: rate }],
                        base_loss: loss,
                        frame_overhead_us: overhead,
                        outages: vec![OutageSpec { start_us: 10, end_us: 20, loss: 0.5, busy: i == 1 }],
                    })
                    .collect(),
                lmacs: (0..chans.len())
                    .map(|i| LmacSpec {
                        channel: i as u8,
                        slot_us: (i == 1).then_some(9),
                        sifs_us: None,
                        edca: EdcaSpec { voice: Some(EdcaParams::default_for(AccessCategory::Voice)), ..Default::default() },
                    })
                    .collect(),
                queues: QueueSpec { capacity: 10, scan_depth },
                descriptor: DescriptorSpec { max_attempts: [2, 2, 0, 1], mcs: [0; 4] },
                steering: SteeringSpec {
                    policy,
                    default_link: Some(0),
                    rules: vec![RuleSpec { matcher: RuleMatch { port: Some(80), ..Default::default() }, link: 0 }],
                    crs: CrsSpec {
                        strategy: strat,
                        overrides: vec![OverrideSpec {
                            matcher: RuleMatch { ac: Some(AccessCategory::Background), ..Default::default() },
                            strategy: StrategySpec::Pin(0),
                        }],
                    },
                    estimator: EstimatorSpec {
                        alpha: 0.1,
                        queue_average: if cumulative { QueueAverage::Cumulative } else { QueueAverage::Window { tau_us: 500 } },
                        plr_window: 7,
                    },
                    tid_map: vec![],
                    tid_updates: vec![],
                },
                flows: flows
                    .iter()
                    .enumerate()
                    .map(|(i, &(ac, size, period, deadline))| FlowSpec {
                        id: i as u32,
                        ac: AccessCategory::ALL[ac as usize],
                        tid: ac,
                        receiver: 0,
                        tos: 0,
                        port: 80,
                        size: if i % 2 == 0 { SizeDist::Fixed(size) } else { SizeDist::Uniform { min: 1, max: size } },
                        arrival: match i % 3 {
                            0 => ArrivalProcess::Cbr { period_us: period, jitter_us: period / 2 },
                            1 => ArrivalProcess::Poisson { rate_pps: 1e6 / period as f64 },
                            _ => ArrivalProcess::Bursty { burst_size: 3, period_us: period },
                        },
                        deadline_us: deadline,
                        fragments: 1,
                        start_us: 0,
                        stop_us: None,
                    })
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(s in scenario()) {
            let text = s.to_toml();
            let back = parse_scenario(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, s);
        }
    }
}
