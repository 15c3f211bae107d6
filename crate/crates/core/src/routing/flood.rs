use std::collections::HashMap;

use crate::routing::message::ControlKind;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freshness {
    /// Newer than anything seen from this originator: process and rebroadcast.
    New,
    /// Same sequence number arriving via another neighbor: process only.
    Duplicate,
    /// Older than the newest seen: ignore.
    Stale,
}

/// Newest sequence number seen per (originator, kind). Since originators
/// number messages strictly increasing, this is enough to rebroadcast each
/// flooded message at most once.
#[derive(Debug, Clone, Default)]
pub struct FloodFilter {
    newest: HashMap<(NodeId, ControlKind), u32>,
}

impl FloodFilter {
    pub fn classify(&mut self, originator: NodeId, kind: ControlKind, seq: u32) -> Freshness {
        match self.newest.get_mut(&(originator, kind)) {
            None => {
                self.newest.insert((originator, kind), seq);
                Freshness::New
            }
            Some(newest) if seq > *newest => {
                *newest = seq;
                Freshness::New
            }
            Some(newest) if seq == *newest => Freshness::Duplicate,
            Some(_) => Freshness::Stale,
        }
    }
}
