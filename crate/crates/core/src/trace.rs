//! Structured event trace.
//!
//! One record per line, comma-separated, fixed field order:
//!
//! ```text
//! time,kind,packet,flow,link,series,attempt,aux
//! ```
//!
//! Absent fields are written as `-`. `aux` holds kind-specific
//! `key=value` pairs joined by `;`. The descriptor bitmap word appears in
//! `enqueue` records verbatim as `word=0xHHHH`.

use std::fmt::{self, Write as _};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::channel::AttemptOutcome;
use crate::descriptor::SERIES_COUNT;
use crate::mac::QueueScope;
use crate::types::{AccessCategory, ChannelId, DropReason, FragmentTag, Micros, PacketId};

pub const TRACE_HEADER: &str = "time,kind,packet,flow,link,series,attempt,aux";

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Arrival {
        packet: PacketId,
        flow: u32,
        ac: AccessCategory,
        size: u32,
        deadline: Option<Micros>,
        fragment: Option<FragmentTag>,
    },
    Enqueue {
        packet: PacketId,
        flow: u32,
        word: u16,
        max_attempts: [u8; SERIES_COUNT],
        scope: QueueScope,
    },
    Txop {
        link: ChannelId,
        ac: AccessCategory,
        duration: Micros,
        frames: u32,
    },
    Attempt {
        packet: PacketId,
        flow: u32,
        link: ChannelId,
        series: u8,
        attempt: u32,
        outcome: AttemptOutcome,
        airtime: Micros,
    },
    Deliver {
        packet: PacketId,
        flow: u32,
        link: ChannelId,
        attempts: u32,
    },
    Drop {
        packet: PacketId,
        flow: u32,
        reason: DropReason,
        attempts: u32,
    },
    OutageStart {
        link: ChannelId,
        loss: f64,
        busy: bool,
    },
    OutageEnd {
        link: ChannelId,
    },
    /// Still queued when the run ended.
    Residual {
        packet: PacketId,
        flow: u32,
    },
    SimEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: Micros,
    pub event: TraceEvent,
}

impl TraceRecord {
    pub fn new(time: Micros, event: TraceEvent) -> Self {
        Self { time, event }
    }

    pub fn kind(&self) -> &'static str {
        match self.event {
            TraceEvent::Arrival { .. } => "arrival",
            TraceEvent::Enqueue { .. } => "enqueue",
            TraceEvent::Txop { .. } => "txop",
            TraceEvent::Attempt { .. } => "attempt",
            TraceEvent::Deliver { .. } => "deliver",
            TraceEvent::Drop { .. } => "drop",
            TraceEvent::OutageStart { .. } => "outage_start",
            TraceEvent::OutageEnd { .. } => "outage_end",
            TraceEvent::Residual { .. } => "residual",
            TraceEvent::SimEnd => "sim_end",
        }
    }

    pub fn packet(&self) -> Option<PacketId> {
        use TraceEvent::*;
        match self.event {
            Arrival { packet, .. }
            | Enqueue { packet, .. }
            | Attempt { packet, .. }
            | Deliver { packet, .. }
            | Drop { packet, .. }
            | Residual { packet, .. } => Some(packet),
            _ => None,
        }
    }

    pub fn flow(&self) -> Option<u32> {
        use TraceEvent::*;
        match self.event {
            Arrival { flow, .. }
            | Enqueue { flow, .. }
            | Attempt { flow, .. }
            | Deliver { flow, .. }
            | Drop { flow, .. }
            | Residual { flow, .. } => Some(flow),
            _ => None,
        }
    }

    pub fn link(&self) -> Option<ChannelId> {
        use TraceEvent::*;
        match self.event {
            Txop { link, .. }
            | Attempt { link, .. }
            | Deliver { link, .. }
            | OutageStart { link, .. }
            | OutageEnd { link } => Some(link),
            Enqueue {
                scope: QueueScope::PerLink(l),
                ..
            } => Some(l),
            _ => None,
        }
    }
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TraceEvent::*;
        let (series, attempt, aux): (Option<u8>, Option<u32>, String) = match &self.event {
            Arrival {
                ac,
                size,
                deadline,
                fragment,
                ..
            } => {
                let mut aux = format!("ac={ac};size={size}");
                if let Some(d) = deadline {
                    let _ = write!(aux, ";deadline={d}");
                }
                if let Some(t) = fragment {
                    let _ = write!(aux, ";frag={}/{}/{}", t.group, t.index, t.count);
                }
                (None, None, aux)
            }
            Enqueue {
                word,
                max_attempts: m,
                scope,
                ..
            } => {
                let scope = match scope {
                    QueueScope::Shared => "shared",
                    QueueScope::PerLink(_) => "link",
                };
                let aux = format!(
                    "word=0x{word:04X};max={}/{}/{}/{};queue={scope}",
                    m[0], m[1], m[2], m[3]
                );
                (None, None, aux)
            }
            Txop {
                ac,
                duration,
                frames,
                ..
            } => (None, None, format!("ac={ac};dur={duration};frames={frames}")),
            Attempt {
                series,
                attempt,
                outcome,
                airtime,
                ..
            } => {
                let o = match outcome {
                    AttemptOutcome::Success => "ok",
                    AttemptOutcome::Lost => "lost",
                };
                (
                    Some(*series),
                    Some(*attempt),
                    format!("outcome={o};airtime={airtime}"),
                )
            }
            Deliver { attempts, .. } => (None, Some(*attempts), String::new()),
            Drop {
                reason, attempts, ..
            } => (None, Some(*attempts), format!("reason={}", reason.label())),
            OutageStart { loss, busy, .. } => {
                (None, None, format!("loss={loss};busy={}", u8::from(*busy)))
            }
            OutageEnd { .. } | Residual { .. } | SimEnd => (None, None, String::new()),
        };
        write!(
            f,
            "{},{},{},{},{},{},{},{}",
            self.time,
            self.kind(),
            opt(self.packet()),
            opt(self.flow()),
            opt(self.link().map(ChannelId::raw)),
            opt(series),
            opt(attempt),
            aux
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

fn err(message: impl Into<String>) -> TraceParseError {
    TraceParseError {
        line: 0,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, TraceParseError> {
    let canonical = field.len() == 1 || !field.starts_with('0');
    if field.is_empty() || !canonical || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(format!("bad {what} {field:?}")));
    }
    field
        .parse()
        .map_err(|_| err(format!("bad {what} {field:?}")))
}

fn opt_num<T: std::str::FromStr>(field: &str, what: &str) -> Result<Option<T>, TraceParseError> {
    if field == "-" {
        Ok(None)
    } else {
        num(field, what).map(Some)
    }
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, TraceParseError> {
    v.ok_or_else(|| err(format!("missing {what}")))
}

fn forbid<T>(v: Option<T>, what: &str) -> Result<(), TraceParseError> {
    match v {
        Some(_) => Err(err(format!("unexpected {what}"))),
        None => Ok(()),
    }
}

/// `key=value` pairs in their written order; keys must match `keys`
/// exactly, optional ones may be omitted.
struct Aux<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    pos: usize,
}

impl<'a> Aux<'a> {
    fn parse(s: &'a str) -> Result<Self, TraceParseError> {
        let pairs = if s.is_empty() {
            Vec::new()
        } else {
            s.split(';')
                .map(|kv| kv.split_once('=').ok_or_else(|| err(format!("bad aux pair {kv:?}"))))
                .collect::<Result<_, _>>()?
        };
        Ok(Self { pairs, pos: 0 })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        match self.pairs.get(self.pos) {
            Some((k, v)) if *k == key => {
                self.pos += 1;
                Some(*v)
            }
            _ => None,
        }
    }

    fn req(&mut self, key: &str) -> Result<&'a str, TraceParseError> {
        self.take(key).ok_or_else(|| err(format!("missing aux key {key}")))
    }

    fn finish(self) -> Result<(), TraceParseError> {
        match self.pairs.get(self.pos) {
            Some((k, _)) => Err(err(format!("unexpected aux key {k}"))),
            None => Ok(()),
        }
    }
}

fn channel(raw: Option<u8>) -> Result<Option<ChannelId>, TraceParseError> {
    raw.map(|r| ChannelId::new(r).ok_or_else(|| err(format!("channel {r} out of range"))))
        .transpose()
}

fn ac(s: &str) -> Result<AccessCategory, TraceParseError> {
    AccessCategory::from_short(s).ok_or_else(|| err(format!("bad access category {s:?}")))
}

/// Parses one trace line (no trailing newline).
pub fn parse_line(line: &str) -> Result<TraceRecord, TraceParseError> {
    let fields: Vec<&str> = line.split(',').collect();
    let [time, kind, packet, flow, link, series, attempt, aux] = fields[..] else {
        return Err(err(format!("expected 8 fields, got {}", fields.len())));
    };
    let time: Micros = num(time, "time")?;
    let packet = opt_num::<u64>(packet, "packet")?.map(PacketId);
    let flow = opt_num::<u32>(flow, "flow")?;
    let link = channel(opt_num::<u8>(link, "link")?)?;
    let series = opt_num::<u8>(series, "series")?;
    let attempt = opt_num::<u32>(attempt, "attempt")?;
    let mut aux = Aux::parse(aux)?;

    let event = match kind {
        "arrival" => {
            forbid(link, "link")?;
            forbid(series, "series")?;
            forbid(attempt, "attempt")?;
            let ac = ac(aux.req("ac")?)?;
            let size = num(aux.req("size")?, "size")?;
            let deadline = aux.take("deadline").map(|d| num(d, "deadline")).transpose()?;
            let fragment = aux.take("frag").map(parse_frag).transpose()?;
            TraceEvent::Arrival {
                packet: need(packet, "packet")?,
                flow: need(flow, "flow")?,
                ac,
                size,
                deadline,
                fragment,
            }
        }
        "enqueue" => {
            forbid(series, "series")?;
            forbid(attempt, "attempt")?;
            let word = parse_word(aux.req("word")?)?;
            let max_attempts = parse_max(aux.req("max")?)?;
            let scope = match (aux.req("queue")?, link) {
                ("shared", None) => QueueScope::Shared,
                ("link", Some(l)) => QueueScope::PerLink(l),
                (q, _) => return Err(err(format!("bad queue scope {q:?}"))),
            };
            TraceEvent::Enqueue {
                packet: need(packet, "packet")?,
                flow: need(flow, "flow")?,
                word,
                max_attempts,
                scope,
            }
        }
        "txop" => {
            forbid(packet, "packet")?;
            forbid(flow, "flow")?;
            forbid(series, "series")?;
            forbid(attempt, "attempt")?;
            TraceEvent::Txop {
                link: need(link, "link")?,
                ac: ac(aux.req("ac")?)?,
                duration: num(aux.req("dur")?, "duration")?,
                frames: num(aux.req("frames")?, "frames")?,
            }
        }
        "attempt" => {
            let outcome = match aux.req("outcome")? {
                "ok" => AttemptOutcome::Success,
                "lost" => AttemptOutcome::Lost,
                o => return Err(err(format!("bad outcome {o:?}"))),
            };
            let series = need(series, "series")?;
            if series as usize >= SERIES_COUNT {
                return Err(err(format!("series {series} out of range")));
            }
            TraceEvent::Attempt {
                packet: need(packet, "packet")?,
                flow: need(flow, "flow")?,
                link: need(link, "link")?,
                series,
                attempt: need(attempt, "attempt")?,
                outcome,
                airtime: num(aux.req("airtime")?, "airtime")?,
            }
        }
        "deliver" => {
            forbid(series, "series")?;
            TraceEvent::Deliver {
                packet: need(packet, "packet")?,
                flow: need(flow, "flow")?,
                link: need(link, "link")?,
                attempts: need(attempt, "attempt")?,
            }
        }
        "drop" => {
            forbid(link, "link")?;
            forbid(series, "series")?;
            let reason = aux.req("reason")?;
            TraceEvent::Drop {
                packet: need(packet, "packet")?,
                flow: need(flow, "flow")?,
                reason: DropReason::from_label(reason)
                    .ok_or_else(|| err(format!("bad drop reason {reason:?}")))?,
                attempts: need(attempt, "attempt")?,
            }
        }
        "outage_start" | "outage_end" => {
            forbid(packet, "packet")?;
            forbid(flow, "flow")?;
            forbid(series, "series")?;
            forbid(attempt, "attempt")?;
            let link = need(link, "link")?;
            if kind == "outage_end" {
                TraceEvent::OutageEnd { link }
            } else {
                let loss_s = aux.req("loss")?;
                let loss: f64 = loss_s
                    .parse()
                    .ok()
                    .filter(|l: &f64| (0.0..=1.0).contains(l) && format!("{l}") == loss_s)
                    .ok_or_else(|| err(format!("bad loss {loss_s:?}")))?;
                let busy = match aux.req("busy")? {
                    "0" => false,
                    "1" => true,
                    b => return Err(err(format!("bad busy flag {b:?}"))),
                };
                TraceEvent::OutageStart { link, loss, busy }
            }
        }
        "residual" => {
            forbid(link, "link")?;
            forbid(series, "series")?;
            forbid(attempt, "attempt")?;
            TraceEvent::Residual {
                packet: need(packet, "packet")?,
                flow: need(flow, "flow")?,
            }
        }
        "sim_end" => {
            forbid(packet, "packet")?;
            forbid(flow, "flow")?;
            forbid(link, "link")?;
            forbid(series, "series")?;
            forbid(attempt, "attempt")?;
            TraceEvent::SimEnd
        }
        other => return Err(err(format!("unknown kind {other:?}"))),
    };
    aux.finish()?;
    let record = TraceRecord { time, event };
    // Fields that the record does not carry must have been written as "-".
    if record.packet() != packet || record.flow() != flow || record.link() != link {
        return Err(err("field not used by this kind"));
    }
    Ok(record)
}

fn parse_frag(s: &str) -> Result<FragmentTag, TraceParseError> {
    let parts: Vec<&str> = s.split('/').collect();
    let [g, i, n] = parts[..] else {
        return Err(err(format!("bad fragment tag {s:?}")));
    };
    let tag = FragmentTag {
        group: num(g, "fragment group")?,
        index: num(i, "fragment index")?,
        count: num(n, "fragment count")?,
    };
    if tag.index >= tag.count {
        return Err(err("fragment index not below count"));
    }
    Ok(tag)
}

fn parse_word(s: &str) -> Result<u16, TraceParseError> {
    s.strip_prefix("0x")
        .filter(|h| h.len() == 4 && h.bytes().all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b)))
        .and_then(|h| u16::from_str_radix(h, 16).ok())
        .ok_or_else(|| err(format!("bad descriptor word {s:?}")))
}

fn parse_max(s: &str) -> Result<[u8; SERIES_COUNT], TraceParseError> {
    let parts: Vec<&str> = s.split('/').collect();
    if parts.len() != SERIES_COUNT {
        return Err(err(format!("bad attempt budget {s:?}")));
    }
    let mut out = [0u8; SERIES_COUNT];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(p, "max attempts")?;
    }
    Ok(out)
}

/// Parses a whole trace, header included.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, TRACE_HEADER)) => {}
        _ => {
            return Err(TraceParseError {
                line: 1,
                message: "missing header".to_string(),
            })
        }
    }
    lines
        .map(|(i, l)| parse_line(l).map_err(|e| TraceParseError { line: i + 1, ..e }))
        .collect()
}

pub fn read_trace<R: BufRead>(r: R) -> io::Result<Vec<TraceRecord>> {
    let text = io::read_to_string(r)?;
    parse_trace(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn write_trace<W: Write>(mut w: W, records: &[TraceRecord]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(i: u8) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn samples() -> Vec<TraceRecord> {
        use TraceEvent::*;
        vec![
            TraceRecord::new(0, Arrival {
                packet: PacketId(1),
                flow: 2,
                ac: AccessCategory::Video,
                size: 1200,
                deadline: Some(5000),
                fragment: Some(FragmentTag { group: 1, index: 0, count: 2 }),
            }),
            TraceRecord::new(0, Enqueue {
                packet: PacketId(1),
                flow: 2,
                word: 0xF622,
                max_attempts: [4, 4, 2, 0],
                scope: QueueScope::Shared,
            }),
            TraceRecord::new(0, Enqueue {
                packet: PacketId(1),
                flow: 2,
                word: 0x0001,
                max_attempts: [4, 0, 0, 0],
                scope: QueueScope::PerLink(ch(0)),
            }),
            TraceRecord::new(40, Txop { link: ch(1), ac: AccessCategory::Video, duration: 300, frames: 2 }),
            TraceRecord::new(190, Attempt {
                packet: PacketId(1),
                flow: 2,
                link: ch(1),
                series: 0,
                attempt: 1,
                outcome: AttemptOutcome::Lost,
                airtime: 150,
            }),
            TraceRecord::new(190, Deliver { packet: PacketId(1), flow: 2, link: ch(1), attempts: 3 }),
            TraceRecord::new(190, Drop {
                packet: PacketId(1),
                flow: 2,
                reason: DropReason::QueueOverflow,
                attempts: 0,
            }),
            TraceRecord::new(200, OutageStart { link: ch(2), loss: 0.25, busy: true }),
            TraceRecord::new(300, OutageEnd { link: ch(2) }),
            TraceRecord::new(900, Residual { packet: PacketId(7), flow: 0 }),
            TraceRecord::new(1000, SimEnd),
        ]
    }

    #[test]
    fn line_layout() {
        let s = samples();
        assert_eq!(s[0].to_string(), "0,arrival,1,2,-,-,-,ac=VI;size=1200;deadline=5000;frag=1/0/2");
        assert_eq!(s[1].to_string(), "0,enqueue,1,2,-,-,-,word=0xF622;max=4/4/2/0;queue=shared");
        assert_eq!(s[4].to_string(), "190,attempt,1,2,1,0,1,outcome=lost;airtime=150");
        assert_eq!(s[10].to_string(), "1000,sim_end,-,-,-,-,-,");
    }

    #[test]
    fn lines_parse_back() {
        for r in samples() {
            assert_eq!(parse_line(&r.to_string()), Ok(r));
        }
    }

    #[test]
    fn whole_trace_round_trip() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &samples()).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(back, samples());
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "1,sim_end,-,-,-,-,-",
            "x,sim_end,-,-,-,-,-,",
            "1,warp,-,-,-,-,-,",
            "1,sim_end,3,-,-,-,-,",
            "1,txop,-,-,9,-,-,ac=VO;dur=1;frames=1",
            "1,txop,-,-,1,-,-,ac=VO;frames=1;dur=1",
            "1,enqueue,1,1,-,-,-,word=0xf622;max=4/4/4/4;queue=shared",
            "1,enqueue,1,1,-,-,-,word=0xF622;max=4/4/4;queue=shared",
            "1,outage_start,-,-,0,-,-,loss=1.50;busy=1",
            "1,arrival,1,1,-,-,-,ac=VI;size=+5",
            "1,arrival,1,1,-,-,-,ac=VI;size=5;frag=1/2/2",
        ] {
            assert!(parse_line(bad).is_err(), "{bad:?} parsed");
        }
    }
}
