//! The event loop: arrivals, steering, EDCA contention, TXOP service and
//! attempt outcomes, producing the trace.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::channel::ChannelState;
use crate::mac::{
    fifo_select, txop_scan, ContentionPhase, EnqueueError, FragmentLedger, LMac, PlannedFrame, QueueEntry,
    QueueScope, ScanConfig, TxQueue, TxopGrant,
};
use crate::scenario::{mask, Scenario, ScenarioErrors, TidUpdate};
use crate::sim::rng::{RngPlan, StreamRng};
use crate::sim::traffic::{expand, ArrivalGen, FlowSpec};
use crate::steering::{LinkStats, SteeringConfig, SteeringError, TidLinkMap};
use crate::trace::{TraceEvent, TraceRecord};
use crate::types::{AccessCategory, ChannelId, DropReason, LinkMask, Micros, PacketFate, PacketId, MAX_LINKS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    PacketArrival { flow: usize },
    MediumIdle { link: ChannelId },
    BackoffExpiry { link: ChannelId, ac: AccessCategory, generation: u64 },
    TxComplete { link: ChannelId, ac: AccessCategory, packet: PacketId, start: Micros },
    OutageStart { link: ChannelId, loss: f64, busy: bool },
    OutageEnd { link: ChannelId },
    SimEnd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: Micros,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid scenario:\n{0}")]
    Invalid(ScenarioErrors),
    #[error("steering failed: {0}")]
    Steering(#[from] SteeringError),
    #[error("steering produced an invalid descriptor for packet {0}")]
    Descriptor(PacketId),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub end: Micros,
}

pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput, RunError> {
    let errors = scenario.validate();
    if !errors.is_empty() {
        return Err(RunError::Invalid(ScenarioErrors(errors)));
    }
    let mut engine = Engine::new(scenario, seed);
    engine.run()?;
    Ok(RunOutput { trace: engine.trace, end: engine.end })
}

struct LinkRt {
    lmac: LMac,
    chan: ChannelState,
    rng: StreamRng,
    txop: Option<(AccessCategory, bool)>,
}

struct FlowRt {
    spec: FlowSpec,
    arrivals: ArrivalGen<StreamRng>,
    sizes: StreamRng,
}

struct Engine {
    end: Micros,
    seq: u64,
    heap: BinaryHeap<Event>,
    links: [Option<LinkRt>; MAX_LINKS],
    link_mask: LinkMask,
    shared: bool,
    scans: bool,
    scan_depth: Option<usize>,
    queues: Vec<TxQueue>,
    steering: SteeringConfig,
    tid_map: Option<TidLinkMap>,
    tid_updates: Vec<TidUpdate>,
    stats: LinkStats,
    flows: Vec<FlowRt>,
    ledger: FragmentLedger,
    next_packet: u64,
    trace: Vec<TraceRecord>,
}

fn queue_index(shared: bool, link: ChannelId, ac: AccessCategory) -> usize {
    if shared {
        ac.index()
    } else {
        4 + 4 * link.index() + ac.index()
    }
}

impl Engine {
    fn new(s: &Scenario, seed: u64) -> Self {
        let plan = RngPlan::new(seed);
        let steering = s.steering_config();
        let shared = steering.policy.shared_queue();
        let mut links: [Option<LinkRt>; MAX_LINKS] = Default::default();
        for chan in s.channel_states() {
            let link = chan.channel;
            let spec = s.lmac_for(link).expect("validated binding");
            let lmac = LMac::new(
                link,
                spec.edca.table(),
                spec.slot_us.unwrap_or(chan.band.default_slot()),
                spec.sifs_us.unwrap_or(chan.band.default_sifs()),
                AccessCategory::ALL.map(|ac| plan.backoff(link, ac)),
            );
            links[link.index()] = Some(LinkRt { lmac, chan, rng: plan.channel(link), txop: None });
        }
        let mut queues = Vec::with_capacity(4 + 4 * MAX_LINKS);
        for ac in AccessCategory::ALL {
            queues.push(TxQueue::new(ac, QueueScope::Shared, s.queues.capacity));
        }
        for link in ChannelId::all() {
            for ac in AccessCategory::ALL {
                queues.push(TxQueue::new(ac, QueueScope::PerLink(link), s.queues.capacity));
            }
        }
        let flows = s
            .flows
            .iter()
            .map(|f| FlowRt {
                spec: f.clone(),
                arrivals: ArrivalGen::new(f.arrival, f.start_us, f.stop(s.duration_us), plan.arrivals(f.id)),
                sizes: plan.sizes(f.id),
            })
            .collect();
        let mut tid_updates = s.steering.tid_updates.clone();
        tid_updates.sort_by_key(|u| u.at_us);
        tid_updates.reverse();
        Self {
            end: s.duration_us,
            seq: 0,
            heap: BinaryHeap::new(),
            links,
            link_mask: s.links(),
            shared,
            scans: steering.policy.scans(),
            scan_depth: s.queues.scan_depth,
            queues,
            stats: LinkStats::new(steering.estimator, &s.nominal_capacities()),
            steering,
            tid_map: s.tid_map(),
            tid_updates,
            flows,
            ledger: FragmentLedger::default(),
            next_packet: 0,
            trace: Vec::new(),
        }
    }

    fn schedule(&mut self, time: Micros, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    fn emit(&mut self, time: Micros, event: TraceEvent) {
        let rec = TraceRecord::new(time, event);
        self.stats.observe(&rec).expect("engine emits in time order");
        self.trace.push(rec);
    }

    fn link(&mut self, link: ChannelId) -> &mut LinkRt {
        self.links[link.index()].as_mut().expect("active link")
    }

    fn run(&mut self) -> Result<(), RunError> {
        self.schedule(self.end, EventKind::SimEnd);
        let mut outages = Vec::new();
        for rt in self.links.iter().flatten() {
            for o in rt.chan.outages.iter() {
                outages.push((rt.chan.channel, *o));
            }
        }
        for (link, o) in outages {
            if o.start < self.end {
                self.schedule(o.start, EventKind::OutageStart { link, loss: o.loss_prob, busy: o.busy });
                if o.end < self.end {
                    self.schedule(o.end, EventKind::OutageEnd { link });
                }
            }
        }
        for i in 0..self.flows.len() {
            self.schedule_next_arrival(i);
        }
        while let Some(ev) = self.heap.pop() {
            let now = ev.time;
            match ev.kind {
                EventKind::SimEnd => {
                    self.finish(now);
                    return Ok(());
                }
                EventKind::PacketArrival { flow } => self.on_arrival(flow, now)?,
                EventKind::BackoffExpiry { link, ac, generation } => self.on_backoff(link, ac, generation, now),
                EventKind::TxComplete { link, ac, packet, start } => self.on_complete(link, ac, packet, start, now),
                EventKind::MediumIdle { link } => {
                    let rt = self.link(link);
                    if let Some((ac, success)) = rt.txop.take() {
                        rt.lmac.post_txop_reset(ac, success);
                    }
                }
                EventKind::OutageStart { link, loss, busy } => {
                    self.emit(now, TraceEvent::OutageStart { link, loss, busy })
                }
                EventKind::OutageEnd { link } => self.emit(now, TraceEvent::OutageEnd { link }),
            }
            self.kick(now);
        }
        unreachable!("SimEnd is always scheduled")
    }

    fn schedule_next_arrival(&mut self, flow: usize) {
        if let Some(t) = self.flows[flow].arrivals.next() {
            if t < self.end {
                self.schedule(t, EventKind::PacketArrival { flow });
            }
        }
    }

    fn on_arrival(&mut self, flow: usize, now: Micros) -> Result<(), RunError> {
        while self.tid_updates.last().is_some_and(|u| u.at_us <= now) {
            let u = self.tid_updates.pop().expect("checked");
            if let Some(m) = self.tid_map.as_mut() {
                m.remap(u.tid, mask(&u.links));
            }
        }
        let f = &mut self.flows[flow];
        let size = f.spec.size.sample(&mut f.sizes);
        let packets = expand(&f.spec, self.next_packet, now, size);
        self.next_packet += packets.len() as u64;
        for p in packets {
            self.emit(
                now,
                TraceEvent::Arrival {
                    packet: p.id,
                    flow: p.flow_id,
                    ac: p.ac,
                    size: p.size_bytes,
                    deadline: p.deadline,
                    fragment: p.fragment,
                },
            );
            let snapshot = if self.steering.needs_stats(&p) { self.stats.snapshot() } else { Vec::new() };
            let d = self.steering.decide(&p, self.link_mask, &snapshot, self.tid_map.as_ref(), now)?;
            let word = d.descriptor.encode().map_err(|_| RunError::Descriptor(p.id))?;
            let max_attempts = d.descriptor.max_attempts();
            let link = match d.scope {
                QueueScope::PerLink(l) => l,
                QueueScope::Shared => ChannelId::new(0).expect("channel 0"),
            };
            let qi = queue_index(self.shared, link, p.ac);
            let (id, flow_id, tag) = (p.id, p.flow_id, p.fragment);
            match self.queues[qi].enqueue(p, d.descriptor, now) {
                Ok(_) => self.emit(
                    now,
                    TraceEvent::Enqueue { packet: id, flow: flow_id, word, max_attempts, scope: d.scope },
                ),
                Err(EnqueueError::Overflow(_)) => {
                    if let Some(tag) = tag {
                        self.ledger.resolve(&tag, None);
                    }
                    self.emit(
                        now,
                        TraceEvent::Drop { packet: id, flow: flow_id, reason: DropReason::QueueOverflow, attempts: 0 },
                    );
                }
                Err(EnqueueError::InvalidDescriptor(_)) => return Err(RunError::Descriptor(id)),
            }
        }
        self.schedule_next_arrival(flow);
        Ok(())
    }

    /// Frames `link` would send for `ac` in a TXOP starting at `start`.
    fn select(&self, link: ChannelId, ac: AccessCategory, start: Micros, max_frames: Option<usize>) -> Vec<PlannedFrame> {
        let rt = self.links[link.index()].as_ref().expect("active link");
        let queue = &self.queues[queue_index(self.shared, link, ac)];
        let grant = TxopGrant { link, ac, start, limit: rt.lmac.params(ac).txop_limit_us };
        let cfg = ScanConfig { sifs: rt.lmac.sifs, scan_depth: self.scan_depth };
        let airtime = |e: &QueueEntry| {
            rt.chan
                .airtime(e.packet.size_bytes, e.descriptor.series[e.series()].mcs)
                .expect("validated MCS")
        };
        if self.scans {
            txop_scan(&grant, queue.entries(), &cfg, &self.ledger, max_frames, airtime)
        } else {
            fifo_select(&grant, queue.entries(), &cfg, max_frames, airtime)
        }
    }

    /// Starts contention for every idle AC that has something to send.
    fn kick(&mut self, now: Micros) {
        for link in self.link_mask.iter() {
            for ac in AccessCategory::ALL {
                if self.link(link).lmac.contention(ac).phase != ContentionPhase::Idle {
                    continue;
                }
                if self.select(link, ac, now, Some(1)).is_empty() {
                    continue;
                }
                let rt = self.link(link);
                let at = rt.lmac.edca_contend(ac, now, &rt.chan);
                let generation = rt.lmac.contention(ac).generation;
                self.schedule(at, EventKind::BackoffExpiry { link, ac, generation });
            }
        }
    }

    fn on_backoff(&mut self, link: ChannelId, ac: AccessCategory, generation: u64, now: Micros) {
        if self.link(link).lmac.contention(ac).generation != generation {
            return;
        }
        let due: Vec<AccessCategory> = AccessCategory::ALL
            .into_iter()
            .filter(|&a| {
                matches!(self.link(link).lmac.contention(a).phase,
                    ContentionPhase::Counting { expires, .. } if expires == now)
            })
            .collect();
        let mut ready = Vec::new();
        for a in due {
            if self.select(link, a, now, Some(1)).is_empty() {
                self.link(link).lmac.release_empty(a);
            } else {
                ready.push(a);
            }
        }
        if ready.is_empty() {
            return;
        }
        let winner = self.link(link).lmac.resolve_virtual_collision(&ready);
        let frames = self.select(link, winner, now, None);
        let txop_end = frames.last().expect("winner has a frame").end;
        let rt = self.link(link);
        for a in AccessCategory::ALL.into_iter().filter(|&a| a != winner) {
            rt.lmac.freeze(a, now, &rt.chan);
        }
        rt.lmac.begin_txop(winner);
        rt.chan.mark_busy_until(txop_end);
        rt.txop = Some((winner, false));
        let qi = queue_index(self.shared, link, winner);
        for f in &frames {
            self.queues[qi].claim(f.packet, link);
            self.schedule(f.end, EventKind::TxComplete { link, ac: winner, packet: f.packet, start: f.start });
        }
        self.schedule(txop_end, EventKind::MediumIdle { link });
        self.emit(
            now,
            TraceEvent::Txop { link, ac: winner, duration: txop_end - now, frames: frames.len() as u32 },
        );
    }

    fn on_complete(&mut self, link: ChannelId, ac: AccessCategory, packet: PacketId, start: Micros, now: Micros) {
        let qi = queue_index(self.shared, link, ac);
        let entry = self.queues[qi].get(packet).expect("in-flight entry stays queued");
        let (flow, tag) = (entry.packet.flow_id, entry.packet.fragment);
        let rt = self.link(link);
        let outcome = rt.chan.sample_attempt_outcome(start, &mut rt.rng);
        let report = self.queues[qi]
            .complete_attempt(packet, link, outcome, now)
            .expect("entry present");
        self.emit(
            now,
            TraceEvent::Attempt {
                packet,
                flow,
                link,
                series: report.series as u8,
                attempt: report.attempt,
                outcome,
                airtime: now - start,
            },
        );
        match report.fate {
            PacketFate::Delivered { attempts, .. } => {
                if let Some(tag) = tag {
                    self.ledger.resolve(&tag, Some(link));
                }
                if let Some(t) = self.link(link).txop.as_mut() {
                    t.1 = true;
                }
                self.emit(now, TraceEvent::Deliver { packet, flow, link, attempts });
            }
            PacketFate::Dropped { reason, .. } => {
                if let Some(tag) = tag {
                    self.ledger.resolve(&tag, None);
                }
                self.emit(now, TraceEvent::Drop { packet, flow, reason, attempts: report.attempt });
            }
            PacketFate::Queued | PacketFate::InFlight => {}
        }
    }

    fn finish(&mut self, now: Micros) {
        let residual: Vec<(PacketId, u32)> = self
            .queues
            .iter()
            .flat_map(|q| q.entries().iter().map(|e| (e.packet.id, e.packet.flow_id)))
            .collect();
        for (packet, flow) in residual {
            self.emit(now, TraceEvent::Residual { packet, flow });
        }
        self.emit(now, TraceEvent::SimEnd);
    }
}
