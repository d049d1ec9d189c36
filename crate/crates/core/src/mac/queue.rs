//! Per-AC transmission queues and attempt bookkeeping.

use thiserror::Error;

use crate::channel::AttemptOutcome;
use crate::descriptor::{validate_descriptor, DescriptorViolation, TxDescriptor, SERIES_COUNT};
use crate::types::{AccessCategory, ChannelId, DropReason, Micros, Packet, PacketFate, PacketId};

pub const DEFAULT_QUEUE_CAPACITY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueueScope {
    PerLink(ChannelId),
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueEntry {
    pub packet: Packet,
    pub descriptor: TxDescriptor,
    pub attempts_used: [u8; SERIES_COUNT],
    /// `None` only transiently, right before the entry is dropped.
    pub current_series: Option<usize>,
    pub enqueued_at: Micros,
    /// Link currently transmitting this entry.
    pub claimed_by: Option<ChannelId>,
}

impl QueueEntry {
    pub fn total_attempts(&self) -> u32 {
        self.attempts_used.iter().map(|&a| a as u32).sum()
    }

    /// Series the next attempt of this entry will belong to.
    pub fn series(&self) -> usize {
        self.current_series
            .expect("queued entry always has a live series")
    }

    pub fn eligible_on(&self, link: ChannelId) -> bool {
        self.claimed_by.is_none() && self.descriptor.series[self.series()].channels.contains(link)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EnqueueError {
    #[error("queue full, packet {0} tail-dropped")]
    Overflow(PacketId),
    #[error("invalid descriptor: {0:?}")]
    InvalidDescriptor(Vec<DescriptorViolation>),
}

/// What happened to an entry after one attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttemptReport {
    pub packet: PacketId,
    /// Series the attempt belonged to.
    pub series: usize,
    /// Lifetime attempt number, starting at 1.
    pub attempt: u32,
    pub fate: PacketFate,
}

#[derive(Debug, Clone)]
pub struct TxQueue {
    pub ac: AccessCategory,
    pub scope: QueueScope,
    pub capacity: usize,
    entries: Vec<QueueEntry>,
}

impl TxQueue {
    pub fn new(ac: AccessCategory, scope: QueueScope, capacity: usize) -> Self {
        Self {
            ac,
            scope,
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }

    pub fn get(&self, id: PacketId) -> Option<&QueueEntry> {
        self.entries.iter().find(|e| e.packet.id == id)
    }

    fn position(&self, id: PacketId) -> Option<usize> {
        self.entries.iter().position(|e| e.packet.id == id)
    }

    /// Appends at the tail; a full queue drops the new packet.
    pub fn enqueue(
        &mut self,
        packet: Packet,
        descriptor: TxDescriptor,
        now: Micros,
    ) -> Result<usize, EnqueueError> {
        let violations = validate_descriptor(&descriptor);
        if !violations.is_empty() {
            return Err(EnqueueError::InvalidDescriptor(violations));
        }
        if self.entries.len() >= self.capacity {
            return Err(EnqueueError::Overflow(packet.id));
        }
        let used = [0; SERIES_COUNT];
        self.entries.push(QueueEntry {
            current_series: descriptor.current_series(&used),
            packet,
            descriptor,
            attempts_used: used,
            enqueued_at: now,
            claimed_by: None,
        });
        Ok(self.entries.len() - 1)
    }

    pub fn claim(&mut self, id: PacketId, link: ChannelId) {
        if let Some(i) = self.position(id) {
            self.entries[i].claimed_by = Some(link);
        }
    }

    /// Books the outcome of one attempt on `link`. Delivered and exhausted
    /// entries leave the queue; anything else stays where it was.
    pub fn complete_attempt(
        &mut self,
        id: PacketId,
        link: ChannelId,
        outcome: AttemptOutcome,
        now: Micros,
    ) -> Option<AttemptReport> {
        let i = self.position(id)?;
        let entry = &mut self.entries[i];
        let series = entry.series();
        entry.attempts_used[series] += 1;
        entry.claimed_by = None;
        let attempt = entry.total_attempts();
        let fate = match outcome {
            AttemptOutcome::Success => {
                self.entries.remove(i);
                PacketFate::Delivered {
                    link,
                    time: now,
                    attempts: attempt,
                }
            }
            AttemptOutcome::Lost => {
                entry.current_series = entry.descriptor.current_series(&entry.attempts_used);
                if entry.current_series.is_none() {
                    self.entries.remove(i);
                    PacketFate::Dropped {
                        reason: DropReason::RetriesExhausted,
                        time: now,
                    }
                } else {
                    PacketFate::Queued
                }
            }
        };
        Some(AttemptReport {
            packet: id,
            series,
            attempt,
            fate,
        })
    }

    pub fn drain(&mut self) -> Vec<QueueEntry> {
        std::mem::take(&mut self.entries)
    }
}
