use std::collections::BTreeMap;

use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    /// Path quality towards the destination via this neighbor, in [0, 1].
    pub score: f64,
    pub last_update: SimTime,
}

/// Per-destination scores for every one-hop neighbor that could forward
/// towards it. Unlike a plain routing table this keeps all candidates, not
/// just the best gateway.
///
/// Maps are ordered so iteration (and therefore every decision derived from
/// it) is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRanking {
    owner: NodeId,
    expiry: SimTime,
    table: BTreeMap<NodeId, BTreeMap<NodeId, RankEntry>>,
}

impl NeighborRanking {
    pub fn new(owner: NodeId, expiry: SimTime) -> Self {
        NeighborRanking { owner, expiry, table: BTreeMap::new() }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn expiry(&self) -> SimTime {
        self.expiry
    }

    /// Inserts or refreshes an entry. Scores are clamped into [0, 1].
    pub fn update(&mut self, dest: NodeId, neighbor: NodeId, score: f64, now: SimTime) {
        if dest == self.owner || neighbor == self.owner {
            return;
        }
        let score = if score.is_nan() { 0.0 } else { score.clamp(0.0, 1.0) };
        self.table
            .entry(dest)
            .or_default()
            .insert(neighbor, RankEntry { score, last_update: now });
    }

    /// Replaces all entries for `dest`.
    pub fn replace(&mut self, dest: NodeId, entries: impl IntoIterator<Item = (NodeId, RankEntry)>) {
        let map: BTreeMap<_, _> = entries
            .into_iter()
            .filter(|(n, _)| *n != self.owner)
            .map(|(n, mut e)| {
                e.score = e.score.clamp(0.0, 1.0);
                (n, e)
            })
            .collect();
        if map.is_empty() {
            self.table.remove(&dest);
        } else {
            self.table.insert(dest, map);
        }
    }

    /// Drops every entry not refreshed within the expiry window.
    pub fn purge(&mut self, now: SimTime) {
        let expiry = self.expiry;
        self.table.retain(|_, per_dest| {
            per_dest.retain(|_, e| now.saturating_sub(e.last_update) <= expiry);
            !per_dest.is_empty()
        });
    }

    /// Drops entries that go through `neighbor`, for every destination.
    pub fn forget_neighbor(&mut self, neighbor: NodeId) {
        self.table.retain(|_, per_dest| {
            per_dest.remove(&neighbor);
            !per_dest.is_empty()
        });
    }

    pub fn get(&self, dest: NodeId, neighbor: NodeId) -> Option<&RankEntry> {
        self.table.get(&dest)?.get(&neighbor)
    }

    /// `(neighbor, score)` pairs for `dest`, ascending by neighbor id.
    pub fn entries(&self, dest: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.table
            .get(&dest)
            .into_iter()
            .flat_map(|m| m.iter().map(|(n, e)| (*n, e.score)))
    }

    pub fn destinations(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.table.keys().copied()
    }

    pub fn phi_max(&self, dest: NodeId) -> Option<f64> {
        self.entries(dest).map(|(_, s)| s).reduce(f64::max)
    }

    pub fn len(&self) -> usize {
        self.table.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Argmax of the score for `dest`; ties go to the lowest node id.
pub fn best_forwarder(ranking: &NeighborRanking, dest: NodeId) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for (n, s) in ranking.entries(dest) {
        // entries are ascending by id, so strict > keeps the lowest id on ties
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((n, s));
        }
    }
    best.map(|(n, _)| n)
}
