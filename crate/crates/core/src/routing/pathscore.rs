//! Mobility-aware path score. Each link is scored from the current and the
//! predicted distance between its endpoints; a path scores the product of its
//! links. Per-neighbor score changes are rate limited by a trend clamp.

use std::collections::{HashMap, VecDeque};

use crate::mobility::{MobilityHistory, Position};
use crate::routing::flood::{FloodFilter, Freshness};
use crate::routing::message::{ControlKind, ControlMessage, ControlPayload};
use crate::routing::ranking::NeighborRanking;
use crate::routing::NodeCtx;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathScoreParams {
    pub ogm_interval: SimTime,
    pub score_buffer: usize,
    /// Sampling period of the mobility history.
    pub mobility_update: SimTime,
    /// Samples used for the extrapolation fit.
    pub extrapolation_size: usize,
    /// Prediction horizon in mobility-update periods.
    pub prediction_width: u32,
    /// Weight (out of 8) given to the predicted distance.
    pub alpha: f64,
    pub max_trend: f64,
    /// Communication range used to normalise distances, meters.
    pub range: f64,
    pub ttl: u8,
}

impl Default for PathScoreParams {
    fn default() -> Self {
        PathScoreParams {
            ogm_interval: SimTime::from_millis(500),
            score_buffer: 8,
            mobility_update: SimTime::from_millis(250),
            extrapolation_size: 5,
            prediction_width: 15,
            alpha: 7.0,
            max_trend: 0.1,
            range: crate::channel::ChannelParams::default().max_range(),
            ttl: 16,
        }
    }
}

impl PathScoreParams {
    pub fn predict(&self, history: &MobilityHistory) -> Option<Position> {
        history
            .predict(self.extrapolation_size, self.prediction_width, self.mobility_update)
            .ok()
    }

    fn distance_score(&self, d: f64) -> f64 {
        (1.0 - d / self.range).clamp(0.0, 1.0)
    }
}

/// Link score before the trend clamp:
/// `(alpha * s_pred + (8 - alpha) * s_now) / 8` with `s = clamp(1 - d/R, 0, 1)`.
/// Falls back to `s_now` when either prediction is missing.
pub fn pathscore_link(
    own_history: &MobilityHistory,
    neighbor_now: &Position,
    neighbor_predicted: Option<&Position>,
    params: &PathScoreParams,
) -> f64 {
    let Some(&(_, own_now)) = own_history.last() else {
        return 0.0;
    };
    link_score(&own_now, params.predict(own_history).as_ref(), neighbor_now, neighbor_predicted, params)
}

/// [`pathscore_link`] with both of the node's own positions given directly.
pub fn link_score(
    own_now: &Position,
    own_predicted: Option<&Position>,
    neighbor_now: &Position,
    neighbor_predicted: Option<&Position>,
    params: &PathScoreParams,
) -> f64 {
    let s_now = params.distance_score(own_now.distance(neighbor_now));
    match (own_predicted, neighbor_predicted) {
        (Some(a), Some(b)) => {
            let s_pred = params.distance_score(a.distance(b));
            (params.alpha * s_pred + (8.0 - params.alpha) * s_now) / 8.0
        }
        _ => s_now,
    }
}

/// Product of link scores; the empty path scores 1.
pub fn pathscore_path(link_scores: &[f64]) -> f64 {
    link_scores.iter().product()
}

/// Recent scores per (destination, neighbor) and the clamp they impose.
#[derive(Debug, Clone, Default)]
pub struct TrendBuffer {
    capacity: usize,
    max_step: f64,
    scores: HashMap<(NodeId, NodeId), VecDeque<f64>>,
}

impl TrendBuffer {
    pub fn new(capacity: usize, max_step: f64) -> Self {
        TrendBuffer { capacity: capacity.max(1), max_step, scores: HashMap::new() }
    }

    /// Clamps `raw` to within `max_step` of the last buffered score for this
    /// pair, records it, and returns it.
    pub fn apply(&mut self, dest: NodeId, neighbor: NodeId, raw: f64) -> f64 {
        let buf = self.scores.entry((dest, neighbor)).or_default();
        let score = match buf.back() {
            Some(&last) => raw.clamp(last - self.max_step, last + self.max_step),
            None => raw,
        }
        .clamp(0.0, 1.0);
        if buf.len() == self.capacity {
            buf.pop_front();
        }
        buf.push_back(score);
        score
    }

    pub fn history(&self, dest: NodeId, neighbor: NodeId) -> Option<&VecDeque<f64>> {
        self.scores.get(&(dest, neighbor))
    }
}

#[derive(Debug, Clone)]
pub struct BatMobileState {
    params: PathScoreParams,
    seq: u32,
    trend: TrendBuffer,
    flood: FloodFilter,
}

impl BatMobileState {
    pub fn new(params: PathScoreParams) -> Self {
        BatMobileState {
            params,
            seq: 0,
            trend: TrendBuffer::new(params.score_buffer, params.max_trend),
            flood: FloodFilter::default(),
        }
    }

    pub fn params(&self) -> &PathScoreParams {
        &self.params
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
            payload: ControlPayload::PathScore { score: 1.0, predicted: self.params.predict(ctx.history) },
        }
    }

    pub fn process(
        &mut self,
        msg: &ControlMessage,
        ctx: &NodeCtx<'_>,
        ranking: &mut NeighborRanking,
    ) -> Option<ControlMessage> {
        let ControlPayload::PathScore { score, predicted } = msg.payload else {
            return None;
        };
        if msg.originator == ctx.id || msg.sender == ctx.id {
            return None;
        }
        let freshness = self.flood.classify(msg.originator, msg.kind, msg.seq);
        if freshness == Freshness::Stale {
            return None;
        }
        let own_pred = self.params.predict(ctx.history);
        let link = link_score(
            &ctx.position,
            own_pred.as_ref(),
            &msg.sender_position,
            predicted.as_ref(),
            &self.params,
        );
        let phi = self.trend.apply(msg.originator, msg.sender, score * link);
        ranking.update(msg.originator, msg.sender, phi, ctx.now);
        if freshness == Freshness::New {
            msg.forwarded_by(
                ctx.id,
                ctx.position,
                ControlPayload::PathScore { score: phi, predicted: own_pred },
            )
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> PathScoreParams {
        PathScoreParams { range: 55.4, ..PathScoreParams::default() }
    }

    fn at(x: f64) -> Position {
        Position::new(x, 0.0, 0.0)
    }

    #[test]
    fn colocated_link_scores_one() {
        let p = params();
        assert_eq!(link_score(&at(0.0), Some(&at(0.0)), &at(0.0), Some(&at(0.0)), &p), 1.0);
    }

    #[test]
    fn predicted_departure_dominates() {
        let p = params();
        let s = link_score(&at(0.0), Some(&at(0.0)), &at(20.0), Some(&at(60.0)), &p);
        // s_now = 1 - 20/55.4, s_pred = 0, weighted 1/8 vs 7/8
        let s_now: f64 = 1.0 - 20.0 / p.range;
        assert!((s_now - 0.639).abs() < 1e-3);
        assert!((s - s_now / 8.0).abs() < 1e-12);
        assert!((s - 0.080).abs() < 1e-3);
    }

    #[test]
    fn missing_prediction_uses_current_distance() {
        let p = params();
        let s = link_score(&at(0.0), None, &at(20.0), Some(&at(60.0)), &p);
        assert!((s - (1.0 - 20.0 / 55.4)).abs() < 1e-12);
    }

    #[test]
    fn history_based_link() {
        let p = params();
        let mut h = MobilityHistory::new(8);
        for i in 0..5u64 {
            h.record(SimTime::from_millis(250 * i), at(0.0)).unwrap();
        }
        let s = pathscore_link(&h, &at(20.0), Some(&at(20.0)), &p);
        assert!((s - (1.0 - 20.0 / 55.4)).abs() < 1e-12);
        assert_eq!(pathscore_link(&MobilityHistory::new(8), &at(1.0), None, &p), 0.0);
    }

    #[test]
    fn path_products() {
        assert!((pathscore_path(&[0.9, 0.8]) - 0.72).abs() < 1e-15);
        assert_eq!(pathscore_path(&[0.9, 0.0, 0.8]), 0.0);
        assert_eq!(pathscore_path(&[]), 1.0);
    }

    #[test]
    fn trend_clamp_limits_steps() {
        let mut t = TrendBuffer::new(8, 0.1);
        assert_eq!(t.apply(1, 2, 0.9), 0.9);
        assert!((t.apply(1, 2, 0.2) - 0.8).abs() < 1e-12);
        assert!((t.apply(1, 2, 0.95) - 0.9).abs() < 1e-12);
        // independent pairs
        assert_eq!(t.apply(1, 3, 0.2), 0.2);
        for _ in 0..20 {
            t.apply(1, 2, 0.0);
        }
        assert_eq!(t.history(1, 2).unwrap().len(), 8);
        assert_eq!(*t.history(1, 2).unwrap().back().unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn nonincreasing_in_predicted_distance(d_now in 0.0f64..80.0, a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let p = params();
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            let s_near = link_score(&at(0.0), Some(&at(0.0)), &at(d_now), Some(&at(near)), &p);
            let s_far = link_score(&at(0.0), Some(&at(0.0)), &at(d_now), Some(&at(far)), &p);
            prop_assert!(s_far <= s_near);
        }

        #[test]
        fn product_is_multiplicative(xs in prop::collection::vec(0.0f64..=1.0, 0..6), ys in prop::collection::vec(0.0f64..=1.0, 0..6)) {
            let joined: Vec<f64> = xs.iter().chain(&ys).copied().collect();
            let lhs = pathscore_path(&joined);
            let rhs = pathscore_path(&xs) * pathscore_path(&ys);
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            let min = joined.iter().copied().fold(1.0, f64::min);
            prop_assert!(lhs <= min + 1e-15);
        }

        #[test]
        fn trend_steps_bounded(raws in prop::collection::vec(0.0f64..=1.0, 1..40)) {
            let mut t = TrendBuffer::new(8, 0.1);
            let mut prev: Option<f64> = None;
            for r in raws {
                let s = t.apply(0, 1, r);
                prop_assert!((0.0..=1.0).contains(&s));
                if let Some(p) = prev {
                    prop_assert!((s - p).abs() <= 0.1 + 1e-12);
                }
                prev = Some(s);
            }
        }
    }
}
