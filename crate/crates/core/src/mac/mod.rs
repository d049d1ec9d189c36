//! MLD MAC engine pieces: per-AC queues (QCU role), per-link EDCA
//! contention (DCU role) and TXOP frame selection (PCU role).

pub mod edca;
pub mod queue;
pub mod txop;

pub use edca::{countdown, AcContention, ContentionPhase, Countdown, LMac};
pub use queue::{AttemptReport, EnqueueError, QueueEntry, QueueScope, TxQueue, DEFAULT_QUEUE_CAPACITY};
pub use txop::{fifo_select, txop_scan, FragmentLedger, PlannedFrame, ScanConfig, TxopGrant};
