//! Transmission-quality metric: per-neighbor receive windows over the
//! neighbor's own OGMs, multiplied along the path with a penalty per extra hop.

use std::collections::HashMap;

use crate::routing::flood::{FloodFilter, Freshness};
use crate::routing::message::{ControlKind, ControlMessage, ControlPayload};
use crate::routing::ranking::NeighborRanking;
use crate::routing::NodeCtx;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatmanParams {
    pub ogm_interval: SimTime,
    pub window_size: u32,
    pub hop_penalty: f64,
    pub ttl: u8,
}

impl Default for BatmanParams {
    fn default() -> Self {
        BatmanParams {
            ogm_interval: SimTime::from_millis(500),
            window_size: 8,
            hop_penalty: 0.95,
            ttl: 16,
        }
    }
}

/// Sliding bitmap of the last `size` OGM sequence numbers of one neighbor;
/// bit 0 is the newest expected sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct TqWindow {
    size: u32,
    bits: u32,
    newest_seq: Option<u32>,
    last_heard: SimTime,
}

impl TqWindow {
    pub fn new(size: u32) -> Self {
        assert!((1..=32).contains(&size));
        TqWindow { size, bits: 0, newest_seq: None, last_heard: SimTime::ZERO }
    }

    fn mask(&self) -> u32 {
        if self.size == 32 {
            u32::MAX
        } else {
            (1 << self.size) - 1
        }
    }

    /// Records receipt of the neighbor's OGM with sequence number `seq`.
    pub fn observe(&mut self, seq: u32, now: SimTime) {
        match self.newest_seq {
            None => {
                self.bits = 1;
                self.newest_seq = Some(seq);
            }
            Some(newest) if seq > newest => {
                let shift = seq - newest;
                self.bits = if shift >= self.size { 0 } else { self.bits << shift };
                self.bits = (self.bits | 1) & self.mask();
                self.newest_seq = Some(seq);
            }
            Some(newest) => {
                let age = newest - seq;
                if age < self.size {
                    self.bits |= 1 << age;
                }
            }
        }
        self.last_heard = self.last_heard.max(now);
    }

    pub fn received(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Fraction of the window that was received.
    pub fn link_quality(&self) -> f64 {
        f64::from(self.received()) / f64::from(self.size)
    }

    /// Link quality with every interval elapsed since the last receipt,
    /// beyond the first, counted as a missed OGM.
    pub fn link_quality_at(&self, now: SimTime, interval: SimTime) -> f64 {
        let elapsed = now.saturating_sub(self.last_heard).as_micros() / interval.as_micros().max(1);
        let missed = elapsed.saturating_sub(1);
        if missed >= u64::from(self.size) {
            return 0.0;
        }
        let bits = (self.bits << missed) & self.mask();
        f64::from(bits.count_ones()) / f64::from(self.size)
    }
}

/// Path quality from per-link qualities: their product times
/// `hop_penalty^(hops - 1)`.
pub fn tq_score(link_qualities: &[f64], hop_penalty: f64) -> f64 {
    let product: f64 = link_qualities.iter().product();
    tq_path(product, link_qualities.len().max(1) as u32, hop_penalty)
}

/// Same as [`tq_score`] with the product already accumulated.
pub fn tq_path(product: f64, hops: u32, hop_penalty: f64) -> f64 {
    let penalty = hop_penalty.powi(hops.saturating_sub(1) as i32);
    (product * penalty).clamp(0.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct BatmanState {
    params: BatmanParams,
    seq: u32,
    windows: HashMap<NodeId, TqWindow>,
    flood: FloodFilter,
}

impl BatmanState {
    pub fn new(params: BatmanParams) -> Self {
        BatmanState { params, seq: 0, windows: HashMap::new(), flood: FloodFilter::default() }
    }

    pub fn params(&self) -> &BatmanParams {
        &self.params
    }

    pub fn window(&self, neighbor: NodeId) -> Option<&TqWindow> {
        self.windows.get(&neighbor)
    }

    pub fn emit(&mut self, ctx: &NodeCtx<'_>) -> ControlMessage {
        self.seq += 1;
        ControlMessage {
            kind: ControlKind::Ogm,
            originator: ctx.id,
            seq: self.seq,
            ttl: self.params.ttl,
            hops: 0,
            sender: ctx.id,
            sender_position: ctx.position,
            payload: ControlPayload::Tq { score: 1.0 },
        }
    }

    pub fn process(
        &mut self,
        msg: &ControlMessage,
        ctx: &NodeCtx<'_>,
        ranking: &mut NeighborRanking,
    ) -> Option<ControlMessage> {
        let ControlPayload::Tq { score } = msg.payload else {
            return None;
        };
        if msg.originator == ctx.id || msg.sender == ctx.id {
            return None;
        }
        if msg.sender == msg.originator {
            self.windows
                .entry(msg.sender)
                .or_insert_with(|| TqWindow::new(self.params.window_size))
                .observe(msg.seq, ctx.now);
        }
        let freshness = self.flood.classify(msg.originator, msg.kind, msg.seq);
        if freshness == Freshness::Stale {
            return None;
        }
        let lq = self
            .windows
            .get(&msg.sender)
            .map_or(0.0, |w| w.link_quality_at(ctx.now, self.params.ogm_interval));
        let product = score * lq;
        let hops = u32::from(msg.hops) + 1;
        ranking.update(msg.originator, msg.sender, tq_path(product, hops, self.params.hop_penalty), ctx.now);
        if freshness == Freshness::New {
            msg.forwarded_by(ctx.id, ctx.position, ControlPayload::Tq { score: product })
        } else {
            None
        }
    }
}
