//! Geographic link-state routing: HELLO for neighbor sensing, flooded TC for
//! topology, and a score that falls linearly with the forwarder's distance to
//! the destination.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::mobility::Position;
use crate::routing::flood::{FloodFilter, Freshness};
use crate::routing::message::{ControlKind, ControlMessage, ControlPayload};
use crate::routing::ranking::{NeighborRanking, RankEntry};
use crate::routing::NodeCtx;
use crate::time::SimTime;
use crate::NodeId;

/// Floor for geographic scores so a reachable forwarder never scores zero.
pub const GEO_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GolsrParams {
    pub hello_interval: SimTime,
    pub tc_interval: SimTime,
    /// Mission-area diagonal used to normalise distances.
    pub diagonal: f64,
    /// Neighbor and topology hold time.
    pub hold_time: SimTime,
    pub ttl: u8,
}

impl Default for GolsrParams {
    fn default() -> Self {
        GolsrParams {
            hello_interval: SimTime::from_millis(500),
            tc_interval: SimTime::from_millis(1_000),
            diagonal: (500.0f64 * 500.0 + 500.0 * 500.0 + 10.0 * 10.0).sqrt(),
            hold_time: SimTime::from_secs(3),
            ttl: 16,
        }
    }
}

/// `clamp(1 - d / diag, eps, 1)`.
pub fn geo_score(forwarder: &Position, dest: &Position, diagonal: f64) -> f64 {
    (1.0 - forwarder.distance(dest) / diagonal).clamp(GEO_EPSILON, 1.0)
}

#[derive(Debug, Clone)]
struct NeighborInfo {
    last_heard: SimTime,
    position: Position,
}

#[derive(Debug, Clone)]
struct LinkSet {
    neighbors: Vec<NodeId>,
    updated: SimTime,
}

#[derive(Debug, Clone)]
pub struct GolsrState {
    params: GolsrParams,
    hello_seq: u32,
    tc_seq: u32,
    neighbors: BTreeMap<NodeId, NeighborInfo>,
    topology: BTreeMap<NodeId, LinkSet>,
    positions: BTreeMap<NodeId, (SimTime, Position)>,
    flood: FloodFilter,
}

impl GolsrState {
    pub fn new(params: GolsrParams) -> Self {
        GolsrState {
            params,
            hello_seq: 0,
            tc_seq: 0,
            neighbors: BTreeMap::new(),
            topology: BTreeMap::new(),
            positions: BTreeMap::new(),
            flood: FloodFilter::default(),
        }
    }

    pub fn params(&self) -> &GolsrParams {
        &self.params
    }

    fn fresh(&self, t: SimTime, now: SimTime) -> bool {
        now.saturating_sub(t) <= self.params.hold_time
    }

    /// One-hop neighbors heard within the hold time, ascending.
    pub fn current_neighbors(&self, now: SimTime) -> Vec<NodeId> {
        self.neighbors
            .iter()
            .filter(|(_, n)| self.fresh(n.last_heard, now))
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn emit(&mut self, kind: ControlKind, ctx: &NodeCtx<'_>) -> ControlMessage {
        let seq = match kind {
            ControlKind::Tc => {
                self.tc_seq += 1;
                self.tc_seq
            }
            _ => {
                self.hello_seq += 1;
                self.hello_seq
            }
        };
        let kind = if kind == ControlKind::Tc { ControlKind::Tc } else { ControlKind::Hello };
        ControlMessage {
            kind,
            originator: ctx.id,
            seq,
            ttl: if kind == ControlKind::Tc { self.params.ttl } else { 1 },
            hops: 0,
            sender: ctx.id,
            sender_position: ctx.position,
            payload: ControlPayload::Neighbors {
                neighbors: self.current_neighbors(ctx.now),
                origin_position: ctx.position,
            },
        }
    }

    fn note_position(&mut self, node: NodeId, at: SimTime, pos: Position) {
        let slot = self.positions.entry(node).or_insert((at, pos));
        if at >= slot.0 {
            *slot = (at, pos);
        }
    }

    pub fn process(&mut self, msg: &ControlMessage, ctx: &NodeCtx<'_>) -> Option<ControlMessage> {
        if msg.originator == ctx.id || msg.sender == ctx.id {
            return None;
        }
        let ControlPayload::Neighbors { neighbors, origin_position } = &msg.payload else {
            return None;
        };
        // Any frame from the sender proves it is a one-hop neighbor.
        self.neighbors.insert(
            msg.sender,
            NeighborInfo { last_heard: ctx.now, position: msg.sender_position },
        );
        self.note_position(msg.sender, ctx.now, msg.sender_position);
        match msg.kind {
            ControlKind::Hello => {
                self.topology
                    .insert(msg.sender, LinkSet { neighbors: neighbors.clone(), updated: ctx.now });
                None
            }
            ControlKind::Tc => {
                if self.flood.classify(msg.originator, msg.kind, msg.seq) != Freshness::New {
                    return None;
                }
                self.topology
                    .insert(msg.originator, LinkSet { neighbors: neighbors.clone(), updated: ctx.now });
                self.note_position(msg.originator, ctx.now, *origin_position);
                msg.forwarded_by(ctx.id, ctx.position, msg.payload.clone())
            }
            ControlKind::Ogm => None,
        }
    }

    /// Nodes that can reach `dest` over fresh advertised links without
    /// passing through `exclude`.
    fn reachable_from(&self, dest: NodeId, exclude: NodeId, now: SimTime) -> BTreeSet<NodeId> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for (node, links) in &self.topology {
            if !self.fresh(links.updated, now) {
                continue;
            }
            for &n in &links.neighbors {
                adj.entry(*node).or_default().insert(n);
                adj.entry(n).or_default().insert(*node);
            }
        }
        let mut seen = BTreeSet::from([dest]);
        let mut queue = VecDeque::from([dest]);
        while let Some(u) = queue.pop_front() {
            for &v in adj.get(&u).into_iter().flatten() {
                if v != exclude && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Rebuilds the ranking entries for `dest`: every current neighbor with a
    /// known path to `dest` is scored by its distance to `dest`.
    pub fn refresh_ranking(&self, dest: NodeId, ctx: &NodeCtx<'_>, ranking: &mut NeighborRanking) {
        let Some(&(_, dest_pos)) = self.positions.get(&dest) else {
            ranking.replace(dest, []);
            return;
        };
        let reach = self.reachable_from(dest, ctx.id, ctx.now);
        let entries: Vec<_> = self
            .neighbors
            .iter()
            .filter(|(id, n)| self.fresh(n.last_heard, ctx.now) && reach.contains(id))
            .map(|(id, n)| {
                let score = if *id == dest { 1.0 } else { geo_score(&n.position, &dest_pos, self.params.diagonal) };
                (*id, RankEntry { score, last_update: n.last_heard })
            })
            .collect();
        ranking.replace(dest, entries);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::MobilityHistory;

    const DIAG: f64 = 707.177_488_2;

    #[test]
    fn diagonal_default() {
        assert!((GolsrParams::default().diagonal - DIAG).abs() < 1e-6);
    }

    #[test]
    fn colocated_scores_one() {
        let p = Position::new(3.0, 4.0, 5.0);
        assert_eq!(geo_score(&p, &p, DIAG), 1.0);
    }

    #[test]
    fn full_diagonal_hits_floor() {
        let a = Position::new(0.0, 0.0, 0.0);
        let b = Position::new(500.0, 500.0, 10.0);
        assert_eq!(geo_score(&a, &b, GolsrParams::default().diagonal), GEO_EPSILON);
    }

    #[test]
    fn strictly_decreasing_with_distance() {
        let dest = Position::default();
        let mut prev = f64::INFINITY;
        for i in 1..700 {
            let s = geo_score(&Position::new(i as f64, 0.0, 0.0), &dest, DIAG);
            assert!(s < prev);
            prev = s;
        }
    }

    fn ctx(id: NodeId, now: SimTime, history: &MobilityHistory, position: Position) -> NodeCtx<'_> {
        NodeCtx { id, now, position, history }
    }

    fn hello(from: NodeId, pos: Position, neighbors: Vec<NodeId>) -> ControlMessage {
        ControlMessage {
            kind: ControlKind::Hello,
            originator: from,
            seq: 1,
            ttl: 1,
            hops: 0,
            sender: from,
            sender_position: pos,
            payload: ControlPayload::Neighbors { neighbors, origin_position: pos },
        }
    }

    #[test]
    fn ranking_lists_only_neighbors_with_a_path() {
        // 0 hears 1 and 2. 1 is linked to 3, 2 is a dead end.
        let h = MobilityHistory::new(8);
        let now = SimTime::from_secs(1);
        let mut g = GolsrState::new(GolsrParams::default());
        let c = ctx(0, now, &h, Position::default());
        g.process(&hello(1, Position::new(40.0, 0.0, 0.0), vec![0, 3]), &c);
        g.process(&hello(2, Position::new(0.0, 40.0, 0.0), vec![0]), &c);
        let mut tc = hello(3, Position::new(80.0, 0.0, 0.0), vec![1]);
        tc.kind = ControlKind::Tc;
        tc.ttl = 16;
        tc.sender = 1;
        tc.sender_position = Position::new(40.0, 0.0, 0.0);
        let fwd = g.process(&tc, &c).unwrap();
        assert_eq!((fwd.sender, fwd.ttl), (0, 15));
        assert!(g.process(&tc, &c).is_none(), "TC rebroadcast once");

        let mut r = NeighborRanking::new(0, SimTime::from_secs(3));
        g.refresh_ranking(3, &c, &mut r);
        let e: Vec<_> = r.entries(3).collect();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].0, 1);
        assert!((e[0].1 - (1.0 - 40.0 / DIAG)).abs() < 1e-6);

        g.refresh_ranking(1, &c, &mut r);
        assert_eq!(r.entries(1).collect::<Vec<_>>(), vec![(1, 1.0)]);
    }

    #[test]
    fn stale_neighbors_vanish() {
        let h = MobilityHistory::new(8);
        let mut g = GolsrState::new(GolsrParams::default());
        g.process(&hello(1, Position::new(10.0, 0.0, 0.0), vec![0]), &ctx(0, SimTime::ZERO, &h, Position::default()));
        let later = ctx(0, SimTime::from_secs(4), &h, Position::default());
        let mut r = NeighborRanking::new(0, SimTime::from_secs(3));
        g.refresh_ranking(1, &later, &mut r);
        assert!(r.entries(1).next().is_none());
        assert!(g.current_neighbors(SimTime::from_secs(4)).is_empty());
    }
}
