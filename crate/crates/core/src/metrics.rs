//! Per-flow and per-link figures computed from a finished trace, their CSV
//! form, and run-to-run comparison.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::channel::AttemptOutcome;
use crate::steering::PolicyKind;
use crate::trace::{TraceEvent, TraceRecord};
use crate::types::{ChannelId, DropReason, Micros, PacketId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub mean: f64,
    pub p50: Micros,
    pub p95: Micros,
    pub p99: Micros,
    pub max: Micros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub flow: u32,
    pub generated: u64,
    pub delivered: u64,
    pub dropped_retries: u64,
    pub dropped_overflow: u64,
    pub residual: u64,
    pub deadline_misses: u64,
    /// `None` when nothing was delivered.
    pub latency: Option<LatencySummary>,
    pub jitter: f64,
    pub reordered: u64,
}

impl FlowReport {
    fn new(flow: u32) -> Self {
        Self {
            flow,
            generated: 0,
            delivered: 0,
            dropped_retries: 0,
            dropped_overflow: 0,
            residual: 0,
            deadline_misses: 0,
            latency: None,
            jitter: 0.0,
            reordered: 0,
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped_retries + self.dropped_overflow
    }

    pub fn conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped() + self.residual
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub link: ChannelId,
    pub attempts: u64,
    pub successes: u64,
    pub losses: u64,
    pub plr: f64,
    pub busy_fraction: f64,
    pub txops: u64,
    pub frames_per_txop: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reports {
    pub flows: Vec<FlowReport>,
    pub links: Vec<LinkReport>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{kind} record for packet {packet} without a preceding arrival")]
    MissingArrival { packet: PacketId, kind: &'static str },
    #[error("trace does not end with sim_end")]
    Incomplete,
}

/// Nearest-rank percentile of an ascending sample. `p` in (0, 100].
pub fn percentile(sorted: &[Micros], p: f64) -> Micros {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn summarize(samples: &[Micros]) -> Option<LatencySummary> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_unstable();
    Some(LatencySummary {
        mean: s.iter().map(|&x| x as f64).sum::<f64>() / s.len() as f64,
        p50: percentile(&s, 50.0),
        p95: percentile(&s, 95.0),
        p99: percentile(&s, 99.0),
        max: *s.last().expect("nonempty"),
    })
}

/// Mean absolute difference of consecutive samples.
pub fn jitter(samples: &[Micros]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let total: u64 = samples.windows(2).map(|w| w[0].abs_diff(w[1])).sum();
    total as f64 / (samples.len() - 1) as f64
}

struct PacketInfo {
    flow: u32,
    arrival: Micros,
    deadline: Option<Micros>,
    group: Option<(u64, u16)>,
}

#[derive(Default)]
struct FlowAcc {
    samples: Vec<Micros>,
    max_id: Option<PacketId>,
}

pub fn build_reports(trace: &[TraceRecord]) -> Result<Reports, MetricsError> {
    let end = match trace.last() {
        Some(r) if r.event == TraceEvent::SimEnd => r.time,
        _ => return Err(MetricsError::Incomplete),
    };
    let mut packets: HashMap<PacketId, PacketInfo> = HashMap::new();
    let mut flows: BTreeMap<u32, (FlowReport, FlowAcc)> = BTreeMap::new();
    let mut links: BTreeMap<ChannelId, (LinkReport, u64, u64)> = BTreeMap::new();
    // group -> deliveries so far
    let mut groups: HashMap<u64, u16> = HashMap::new();

    let link_entry = |links: &mut BTreeMap<ChannelId, (LinkReport, u64, u64)>, link: ChannelId| {
        links.entry(link).or_insert_with(|| {
            (
                LinkReport {
                    link,
                    attempts: 0,
                    successes: 0,
                    losses: 0,
                    plr: 0.0,
                    busy_fraction: 0.0,
                    txops: 0,
                    frames_per_txop: 0.0,
                },
                0,
                0,
            )
        });
    };

    for rec in trace {
        let lookup = |packets: &HashMap<PacketId, PacketInfo>, packet: PacketId| {
            packets.get(&packet).map(|p| p.flow).ok_or(MetricsError::MissingArrival { packet, kind: rec.kind() })
        };
        match &rec.event {
            TraceEvent::Arrival { packet, flow, deadline, fragment, .. } => {
                packets.insert(
                    *packet,
                    PacketInfo {
                        flow: *flow,
                        arrival: rec.time,
                        deadline: *deadline,
                        group: fragment.map(|f| (f.group, f.count)),
                    },
                );
                flows.entry(*flow).or_insert_with(|| (FlowReport::new(*flow), FlowAcc::default())).0.generated += 1;
            }
            TraceEvent::Deliver { packet, .. } => {
                let flow = lookup(&packets, *packet)?;
                let p = &packets[packet];
                let (report, acc) = flows.get_mut(&flow).expect("flow seen at arrival");
                report.delivered += 1;
                if p.deadline.is_some_and(|d| rec.time > d) {
                    report.deadline_misses += 1;
                }
                if acc.max_id.is_some_and(|m| *packet < m) {
                    report.reordered += 1;
                }
                acc.max_id = acc.max_id.max(Some(*packet));
                match p.group {
                    None => acc.samples.push(rec.time - p.arrival),
                    Some((group, count)) => {
                        let done = groups.entry(group).or_insert(0);
                        *done += 1;
                        if *done == count {
                            groups.remove(&group);
                            acc.samples.push(rec.time - p.arrival);
                        }
                    }
                }
            }
            TraceEvent::Drop { packet, reason, .. } => {
                let flow = lookup(&packets, *packet)?;
                let missed = packets[packet].deadline.is_some();
                let report = &mut flows.get_mut(&flow).expect("flow seen at arrival").0;
                match reason {
                    DropReason::RetriesExhausted => report.dropped_retries += 1,
                    DropReason::QueueOverflow => report.dropped_overflow += 1,
                }
                if missed {
                    report.deadline_misses += 1;
                }
            }
            TraceEvent::Residual { packet, .. } => {
                let flow = lookup(&packets, *packet)?;
                flows.get_mut(&flow).expect("flow seen at arrival").0.residual += 1;
            }
            TraceEvent::Attempt { packet, link, outcome, .. } => {
                lookup(&packets, *packet)?;
                link_entry(&mut links, *link);
                let l = &mut links.get_mut(link).expect("inserted").0;
                l.attempts += 1;
                match outcome {
                    AttemptOutcome::Success => l.successes += 1,
                    AttemptOutcome::Lost => l.losses += 1,
                }
            }
            TraceEvent::Txop { link, duration, frames, .. } => {
                link_entry(&mut links, *link);
                let (l, busy, nframes) = links.get_mut(link).expect("inserted");
                l.txops += 1;
                *busy += (rec.time + duration).min(end).saturating_sub(rec.time);
                *nframes += *frames as u64;
            }
            _ => {}
        }
    }

    let flows = flows
        .into_values()
        .map(|(mut r, acc)| {
            r.latency = summarize(&acc.samples);
            r.jitter = jitter(&acc.samples);
            r
        })
        .collect();
    let links = links
        .into_values()
        .map(|(mut l, busy, nframes)| {
            l.plr = if l.attempts == 0 { 0.0 } else { l.losses as f64 / l.attempts as f64 };
            l.busy_fraction = if end == 0 { 0.0 } else { busy as f64 / end as f64 };
            l.frames_per_txop = if l.txops == 0 { 0.0 } else { nframes as f64 / l.txops as f64 };
            l
        })
        .collect();
    Ok(Reports { flows, links })
}

/// Flows breaking generated = delivered + dropped + residual.
pub fn conservation_violations(reports: &Reports) -> Vec<u32> {
    reports.flows.iter().filter(|f| !f.conserved()).map(|f| f.flow).collect()
}

pub const FLOW_HEADER: &str = "flow,generated,delivered,dropped_retries,dropped_overflow,residual,deadline_misses,\
latency_mean_us,latency_p50_us,latency_p95_us,latency_p99_us,latency_max_us,jitter_us,reordered";

pub const LINK_HEADER: &str = "link,attempts,successes,losses,plr,busy_fraction,txops,frames_per_txop";

pub const META_HEADER: &str = "fingerprint,seed,policy";

fn opt(v: Option<Micros>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn flows_csv(flows: &[FlowReport]) -> String {
    let mut s = format!("{FLOW_HEADER}\n");
    for f in flows {
        let l = f.latency;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
            f.flow,
            f.generated,
            f.delivered,
            f.dropped_retries,
            f.dropped_overflow,
            f.residual,
            f.deadline_misses,
            l.map_or_else(|| "-".to_string(), |l| format!("{:.3}", l.mean)),
            opt(l.map(|l| l.p50)),
            opt(l.map(|l| l.p95)),
            opt(l.map(|l| l.p99)),
            opt(l.map(|l| l.max)),
            f.jitter,
            f.reordered,
        );
    }
    s
}

pub fn links_csv(links: &[LinkReport]) -> String {
    let mut s = format!("{LINK_HEADER}\n");
    for l in links {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3},{:.3},{},{:.3}",
            l.link.raw(),
            l.attempts,
            l.successes,
            l.losses,
            l.plr,
            l.busy_fraction,
            l.txops,
            l.frames_per_txop,
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub fingerprint: String,
    pub seed: u64,
    pub policy: String,
}

pub fn meta_csv(m: &RunMeta) -> String {
    format!("{META_HEADER}\n{},{},{}\n", m.fingerprint, m.seed, m.policy)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

fn rows<'a>(text: &'a str, header: &str, width: usize) -> Result<Vec<(usize, Vec<&'a str>)>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(CsvError { line: 1, message: "missing or unexpected header".into() }),
    }
    lines
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() == width {
                Ok((i + 1, f))
            } else {
                Err(CsvError { line: i + 1, message: format!("expected {width} fields, got {}", f.len()) })
            }
        })
        .collect()
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T, CsvError> {
    s.parse().map_err(|_| CsvError { line, message: format!("bad {name} `{s}`") })
}

fn decimal(line: usize, name: &str, s: &str) -> Result<f64, CsvError> {
    let v: f64 = field(line, name, s)?;
    if !v.is_finite() || format!("{v:.3}") != s {
        return Err(CsvError { line, message: format!("{name} `{s}` is not a 3-decimal number") });
    }
    Ok(v)
}

fn int(line: usize, name: &str, s: &str) -> Result<u64, CsvError> {
    let v: u64 = field(line, name, s)?;
    if v.to_string() != s {
        return Err(CsvError { line, message: format!("{name} `{s}` is not canonical") });
    }
    Ok(v)
}

pub fn parse_flows_csv(text: &str) -> Result<Vec<FlowReport>, CsvError> {
    rows(text, FLOW_HEADER, 14)?
        .into_iter()
        .map(|(n, f)| {
            let latency = if f[7..12].iter().all(|&x| x == "-") {
                None
            } else {
                Some(LatencySummary {
                    mean: decimal(n, "latency_mean_us", f[7])?,
                    p50: int(n, "latency_p50_us", f[8])?,
                    p95: int(n, "latency_p95_us", f[9])?,
                    p99: int(n, "latency_p99_us", f[10])?,
                    max: int(n, "latency_max_us", f[11])?,
                })
            };
            Ok(FlowReport {
                flow: int(n, "flow", f[0])?
                    .try_into()
                    .map_err(|_| CsvError { line: n, message: "flow id too large".into() })?,
                generated: int(n, "generated", f[1])?,
                delivered: int(n, "delivered", f[2])?,
                dropped_retries: int(n, "dropped_retries", f[3])?,
                dropped_overflow: int(n, "dropped_overflow", f[4])?,
                residual: int(n, "residual", f[5])?,
                deadline_misses: int(n, "deadline_misses", f[6])?,
                latency,
                jitter: decimal(n, "jitter_us", f[12])?,
                reordered: int(n, "reordered", f[13])?,
            })
        })
        .collect()
}

pub fn parse_links_csv(text: &str) -> Result<Vec<LinkReport>, CsvError> {
    rows(text, LINK_HEADER, 8)?
        .into_iter()
        .map(|(n, f)| {
            let raw: u8 = field(n, "link", f[0])?;
            Ok(LinkReport {
                link: ChannelId::new(raw)
                    .filter(|_| raw.to_string() == f[0])
                    .ok_or(CsvError { line: n, message: format!("bad link `{}`", f[0]) })?,
                attempts: int(n, "attempts", f[1])?,
                successes: int(n, "successes", f[2])?,
                losses: int(n, "losses", f[3])?,
                plr: decimal(n, "plr", f[4])?,
                busy_fraction: decimal(n, "busy_fraction", f[5])?,
                txops: int(n, "txops", f[6])?,
                frames_per_txop: decimal(n, "frames_per_txop", f[7])?,
            })
        })
        .collect()
}

pub fn parse_meta_csv(text: &str) -> Result<RunMeta, CsvError> {
    let r = rows(text, META_HEADER, 3)?;
    let [(n, f)] = r.as_slice() else {
        return Err(CsvError { line: 2, message: "expected exactly one row".into() });
    };
    let bad = |message: String| CsvError { line: *n, message };
    if f[0].len() != 64 || !f[0].bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(bad(format!("fingerprint {:?} is not 64 lowercase hex digits", f[0])));
    }
    if PolicyKind::from_name(f[2]).is_none() {
        return Err(bad(format!("unknown policy {:?}", f[2])));
    }
    Ok(RunMeta { fingerprint: f[0].to_string(), seed: int(*n, "seed", f[1])?, policy: f[2].to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Better,
    Worse,
    Same,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Better => "better",
            Verdict::Worse => "worse",
            Verdict::Same => "same",
        }
    }
}

/// One metric of one flow or link: B relative to A.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub scope: String,
    pub metric: &'static str,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReports {
    pub meta: RunMeta,
    pub reports: Reports,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("runs used different scenarios")]
    ScenarioMismatch,
    #[error("runs used different seeds ({0} vs {1})")]
    SeedMismatch(u64, u64),
}

pub const COMPARE_HEADER: &str = "scope,metric,a,b,delta,verdict";

fn push(out: &mut Vec<Delta>, scope: &str, metric: &'static str, a: f64, b: f64, lower_is_better: bool) {
    let delta = b - a;
    let verdict = if delta == 0.0 {
        Verdict::Same
    } else if (delta < 0.0) == lower_is_better {
        Verdict::Better
    } else {
        Verdict::Worse
    };
    out.push(Delta { scope: scope.to_string(), metric, a, b, delta, verdict });
}

/// Per-metric deltas of B against A. Flows or links present in only one run
/// are compared against zeros.
pub fn compare_policies(a: &RunReports, b: &RunReports) -> Result<Vec<Delta>, CompareError> {
    if a.meta.fingerprint != b.meta.fingerprint {
        return Err(CompareError::ScenarioMismatch);
    }
    if a.meta.seed != b.meta.seed {
        return Err(CompareError::SeedMismatch(a.meta.seed, b.meta.seed));
    }
    let mut out = Vec::new();
    let mut ids: Vec<u32> = a.reports.flows.iter().chain(&b.reports.flows).map(|f| f.flow).collect();
    ids.sort_unstable();
    ids.dedup();
    for id in ids {
        let blank = FlowReport::new(id);
        let fa = a.reports.flows.iter().find(|f| f.flow == id).unwrap_or(&blank);
        let fb = b.reports.flows.iter().find(|f| f.flow == id).unwrap_or(&blank);
        let scope = format!("flow {id}");
        let lat = |f: &FlowReport, g: fn(&LatencySummary) -> f64| f.latency.as_ref().map_or(0.0, g);
        push(&mut out, &scope, "delivered", fa.delivered as f64, fb.delivered as f64, false);
        push(&mut out, &scope, "dropped", fa.dropped() as f64, fb.dropped() as f64, true);
        push(&mut out, &scope, "deadline_misses", fa.deadline_misses as f64, fb.deadline_misses as f64, true);
        push(&mut out, &scope, "latency_mean_us", lat(fa, |l| l.mean), lat(fb, |l| l.mean), true);
        push(&mut out, &scope, "latency_p99_us", lat(fa, |l| l.p99 as f64), lat(fb, |l| l.p99 as f64), true);
        push(&mut out, &scope, "jitter_us", fa.jitter, fb.jitter, true);
        push(&mut out, &scope, "reordered", fa.reordered as f64, fb.reordered as f64, true);
    }
    let mut links: Vec<ChannelId> = a.reports.links.iter().chain(&b.reports.links).map(|l| l.link).collect();
    links.sort_unstable();
    links.dedup();
    for link in links {
        let get = |r: &Reports| r.links.iter().find(|l| l.link == link).cloned();
        let (la, lb) = (get(&a.reports), get(&b.reports));
        let v = |l: &Option<LinkReport>, g: fn(&LinkReport) -> f64| l.as_ref().map_or(0.0, g);
        let scope = link.to_string();
        push(&mut out, &scope, "plr", v(&la, |l| l.plr), v(&lb, |l| l.plr), true);
        push(&mut out, &scope, "busy_fraction", v(&la, |l| l.busy_fraction), v(&lb, |l| l.busy_fraction), true);
    }
    Ok(out)
}

pub fn compare_csv(deltas: &[Delta]) -> String {
    let mut s = format!("{COMPARE_HEADER}\n");
    for d in deltas {
        let _ = writeln!(
            s,
            "{},{},{:.3},{:.3},{:.3},{}",
            d.scope,
            d.metric,
            d.a,
            d.b,
            d.delta,
            d.verdict.label()
        );
    }
    s
}
