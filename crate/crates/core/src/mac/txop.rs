//! Frame selection when a TXOP is won: the orderly bitmap scan and the
//! strict-FIFO reference service.

use std::collections::HashMap;

use crate::mac::queue::QueueEntry;
use crate::types::{AccessCategory, ChannelId, FragmentTag, Micros, PacketId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxopGrant {
    pub link: ChannelId,
    pub ac: AccessCategory,
    pub start: Micros,
    pub limit: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanConfig {
    /// Gap between consecutive frames of one TXOP.
    pub sifs: Micros,
    /// Maximum number of queue entries examined per scan.
    pub scan_depth: Option<usize>,
}

/// A frame placed on the TXOP timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedFrame {
    pub packet: PacketId,
    pub series: usize,
    pub start: Micros,
    pub end: Micros,
}

impl PlannedFrame {
    pub fn airtime(&self) -> Micros {
        self.end - self.start
    }
}

/// Tracks which fragments of each frame have been resolved (delivered or
/// dropped) and the link the first delivered fragment used.
#[derive(Debug, Clone, Default)]
pub struct FragmentLedger {
    groups: HashMap<u64, GroupProgress>,
}

#[derive(Debug, Clone)]
struct GroupProgress {
    resolved: Vec<bool>,
    link: Option<ChannelId>,
}

impl FragmentLedger {
    pub fn next_unresolved(&self, tag: &FragmentTag) -> u16 {
        match self.groups.get(&tag.group) {
            Some(g) => next_false(&g.resolved, 0),
            None => 0,
        }
    }

    fn next_unresolved_after(&self, tag: &FragmentTag, index: u16) -> u16 {
        match self.groups.get(&tag.group) {
            Some(g) => next_false(&g.resolved, index + 1),
            None => index + 1,
        }
    }

    pub fn affinity(&self, group: u64) -> Option<ChannelId> {
        self.groups.get(&group).and_then(|g| g.link)
    }

    /// Marks a fragment resolved. `delivered_on` is `None` for drops.
    pub fn resolve(&mut self, tag: &FragmentTag, delivered_on: Option<ChannelId>) {
        let g = self.groups.entry(tag.group).or_insert_with(|| GroupProgress {
            resolved: vec![false; tag.count as usize],
            link: None,
        });
        if let Some(r) = g.resolved.get_mut(tag.index as usize) {
            *r = true;
        }
        if g.link.is_none() {
            g.link = delivered_on;
        }
        if g.resolved.iter().all(|&r| r) {
            self.groups.remove(&tag.group);
        }
    }
}

fn next_false(v: &[bool], from: u16) -> u16 {
    (from as usize..v.len())
        .find(|&i| !v[i])
        .unwrap_or(v.len()) as u16
}

/// Lays frames back to back within the TXOP limit. The first frame always
/// fits; a zero limit admits exactly one frame.
struct Packer {
    start: Micros,
    limit: Micros,
    sifs: Micros,
    used: Option<Micros>,
}

impl Packer {
    fn new(grant: &TxopGrant, sifs: Micros) -> Self {
        Self {
            start: grant.start,
            limit: grant.limit,
            sifs,
            used: None,
        }
    }

    fn place(&mut self, airtime: Micros) -> Option<(Micros, Micros)> {
        let offset = match self.used {
            None => 0,
            Some(_) if self.limit == 0 => return None,
            Some(u) if u + self.sifs + airtime > self.limit => return None,
            Some(u) => u + self.sifs,
        };
        self.used = Some(offset + airtime);
        Some((self.start + offset, self.start + offset + airtime))
    }
}

/// Walks the queue head to tail and picks every entry whose current-series
/// bitmap enables `grant.link`, keeping queue order, until the TXOP limit,
/// the end of the queue, the scan depth, or `max_frames` is reached.
/// Entries that are not eligible stay where they are.
///
/// A fragment qualifies only as the next unresolved fragment of its frame,
/// and only on the link its already delivered siblings used.
pub fn txop_scan(
    grant: &TxopGrant,
    entries: &[QueueEntry],
    cfg: &ScanConfig,
    ledger: &FragmentLedger,
    max_frames: Option<usize>,
    mut airtime: impl FnMut(&QueueEntry) -> Micros,
) -> Vec<PlannedFrame> {
    let mut packer = Packer::new(grant, cfg.sifs);
    let mut out = Vec::new();
    // group -> (next fragment index expected in this scan, link pinned so far)
    let mut local: HashMap<u64, (u16, Option<ChannelId>)> = HashMap::new();
    let depth = cfg.scan_depth.unwrap_or(usize::MAX);
    for entry in entries.iter().take(depth) {
        if max_frames.is_some_and(|m| out.len() >= m) {
            break;
        }
        if !entry.eligible_on(grant.link) {
            continue;
        }
        if let Some(tag) = entry.packet.fragment {
            let (next, pinned) = *local
                .entry(tag.group)
                .or_insert_with(|| (ledger.next_unresolved(&tag), ledger.affinity(tag.group)));
            if tag.index != next || pinned.is_some_and(|l| l != grant.link) {
                continue;
            }
        }
        let Some((start, end)) = packer.place(airtime(entry)) else {
            break;
        };
        if let Some(tag) = entry.packet.fragment {
            local.insert(
                tag.group,
                (ledger.next_unresolved_after(&tag, tag.index), Some(grant.link)),
            );
        }
        out.push(PlannedFrame {
            packet: entry.packet.id,
            series: entry.series(),
            start,
            end,
        });
    }
    out
}

/// Strict FIFO service: unclaimed entries in queue order, bitmaps ignored.
pub fn fifo_select(
    grant: &TxopGrant,
    entries: &[QueueEntry],
    cfg: &ScanConfig,
    max_frames: Option<usize>,
    mut airtime: impl FnMut(&QueueEntry) -> Micros,
) -> Vec<PlannedFrame> {
    let mut packer = Packer::new(grant, cfg.sifs);
    let mut out = Vec::new();
    let depth = cfg.scan_depth.unwrap_or(usize::MAX);
    for entry in entries.iter().take(depth) {
        if max_frames.is_some_and(|m| out.len() >= m) {
            break;
        }
        if entry.claimed_by.is_some() {
            continue;
        }
        let Some((start, end)) = packer.place(airtime(entry)) else {
            break;
        };
        out.push(PlannedFrame {
            packet: entry.packet.id,
            series: entry.series(),
            start,
            end,
        });
    }
    out
}
