//! Passive load balancing over the neighbor ranking.
//!
//! Every forwarding node (source and relays alike) takes the set of one-hop
//! neighbors whose score for the destination is within a factor `lambda` of
//! the best score and hands packets to them in round-robin order. Nothing is
//! signalled to other nodes; the decision uses only the local ranking.
//!
//! The hook sits after the route lookup: the routing layer proposes its best
//! forwarder and [`postrouting_hook`] may replace it.

use std::collections::HashMap;

use crate::routing::{best_forwarder, NeighborRanking};
use crate::NodeId;

/// Neighbors eligible to forward towards `dest`, ascending by id.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulableSet {
    pub dest: NodeId,
    pub members: Vec<NodeId>,
    pub lambda: f64,
    pub phi_max: f64,
    /// True when no neighbor cleared the threshold and the set is the
    /// best forwarder alone.
    pub fallback: bool,
}

impl SchedulableSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}

/// Neighbors `r` for `dest` with `score(r) >= lambda * phi_max` and a
/// positive score, minus `exclude`. `phi_max` is taken over all entries,
/// including the excluded one. If nothing qualifies the set falls back to the
/// plain best forwarder; with no entries at all it is empty (no route).
pub fn schedulable_set(
    ranking: &NeighborRanking,
    dest: NodeId,
    lambda: f64,
    exclude: Option<NodeId>,
) -> SchedulableSet {
    let phi_max = ranking.phi_max(dest);
    let Some(phi_max) = phi_max else {
        return SchedulableSet { dest, members: Vec::new(), lambda, phi_max: 0.0, fallback: false };
    };
    let threshold = lambda * phi_max;
    let members: Vec<NodeId> = ranking
        .entries(dest)
        .filter(|&(n, s)| s > 0.0 && s >= threshold && Some(n) != exclude)
        .map(|(n, _)| n)
        .collect();
    if members.is_empty() {
        let best = best_forwarder(ranking, dest).into_iter().collect();
        return SchedulableSet { dest, members: best, lambda, phi_max, fallback: true };
    }
    SchedulableSet { dest, members, lambda, phi_max, fallback: false }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Cursor {
    members: Vec<NodeId>,
    next: usize,
}

/// Round-robin cursors, one per destination. A cursor restarts at the first
/// member whenever the set it rotates over changes.
#[derive(Debug, Clone, Default)]
pub struct RrState {
    cursors: HashMap<NodeId, Cursor>,
}

impl RrState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current cursor position for `dest`.
    pub fn cursor(&self, dest: NodeId) -> Option<usize> {
        self.cursors.get(&dest).map(|c| c.next)
    }
}

/// Picks the member under the cursor and advances it. `None` for an empty set.
pub fn next_forwarder(rr: &mut RrState, set: &SchedulableSet) -> Option<NodeId> {
    if set.members.is_empty() {
        return None;
    }
    let cursor = rr.cursors.entry(set.dest).or_default();
    if cursor.members != set.members {
        cursor.members.clone_from(&set.members);
        cursor.next = 0;
    }
    let pick = cursor.members[cursor.next];
    cursor.next = (cursor.next + 1) % cursor.members.len();
    Some(pick)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardingPolicy {
    /// Always the routing layer's best forwarder.
    Plain,
    Balanced {
        lambda: f64,
        /// Keep the previous hop out of the set.
        exclude_previous_hop: bool,
    },
}

impl ForwardingPolicy {
    pub fn is_balanced(&self) -> bool {
        matches!(self, ForwardingPolicy::Balanced { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    NoRoute,
    TtlExpired,
}

/// Header fields the hook reads and rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoutingHeader {
    pub dest: NodeId,
    /// `None` when the packet originates here.
    pub previous_hop: Option<NodeId>,
    pub next_hop: Option<NodeId>,
    pub ttl: u8,
}

/// Result of one forwarding decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub forwarder: NodeId,
    /// The balanced set the forwarder was drawn from (absent for plain).
    pub set: Option<SchedulableSet>,
}

/// Forwarding decision for a data packet at a source or relay: spend one
/// hop of TTL, look up the best forwarder, then let the balancing policy
/// replace it. Rewrites `next_hop` and `ttl` on success.
pub fn postrouting_hook(
    header: &mut RoutingHeader,
    ranking: &NeighborRanking,
    rr: &mut RrState,
    policy: ForwardingPolicy,
) -> Result<Dispatch, DropReason> {
    if header.ttl <= 1 {
        return Err(DropReason::TtlExpired);
    }
    let proposed = best_forwarder(ranking, header.dest).ok_or(DropReason::NoRoute)?;
    let dispatch = match policy {
        ForwardingPolicy::Plain => Dispatch { forwarder: proposed, set: None },
        ForwardingPolicy::Balanced { lambda, exclude_previous_hop } => {
            let exclude = if exclude_previous_hop { header.previous_hop } else { None };
            let set = schedulable_set(ranking, header.dest, lambda, exclude);
            let forwarder = next_forwarder(rr, &set).ok_or(DropReason::NoRoute)?;
            Dispatch { forwarder, set: Some(set) }
        }
    };
    header.ttl -= 1;
    header.next_hop = Some(dispatch.forwarder);
    Ok(dispatch)
}
