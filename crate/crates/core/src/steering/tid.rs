//! TID-to-link mapping.

use crate::descriptor::TxDescriptor;
use crate::types::LinkMask;

pub const TID_COUNT: usize = 8;

/// Allowed links per TID, with a version bumped on every remap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TidLinkMap {
    masks: [LinkMask; TID_COUNT],
    version: u64,
}

impl TidLinkMap {
    /// Every TID allowed on every link of `links`.
    pub fn permissive(links: LinkMask) -> Self {
        Self {
            masks: [links; TID_COUNT],
            version: 0,
        }
    }

    pub fn mask(&self, tid: u8) -> LinkMask {
        self.masks[tid as usize % TID_COUNT]
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Moves a TID to a new link set. Empty sets are refused.
    pub fn remap(&mut self, tid: u8, links: LinkMask) -> bool {
        if links.is_empty() || tid as usize >= TID_COUNT {
            return false;
        }
        self.masks[tid as usize] = links;
        self.version += 1;
        true
    }
}

/// Restricts every used series to the TID's links. A series left with no
/// link takes the TID mask itself.
pub fn apply_tid_map(tid: u8, map: &TidLinkMap, base: &TxDescriptor) -> TxDescriptor {
    let mask = map.mask(tid);
    let mut out = *base;
    for s in out.series.iter_mut().filter(|s| s.is_used()) {
        let narrowed = s.channels.intersect(mask);
        s.channels = if narrowed.is_empty() { mask } else { narrowed };
    }
    out
}
