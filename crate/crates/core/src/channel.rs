//! Radio channel and abstract CSMA medium.
//!
//! Reception is a hard threshold on received power under a single-slope
//! log-distance Friis law. Frames that overlap in time at a receiver are both
//! lost there (no capture). Senders defer while they can hear an ongoing
//! transmission.

use std::collections::VecDeque;

use crate::mobility::Position;
use crate::time::SimTime;
use crate::NodeId;

/// Rounded value conventionally used in link-budget arithmetic.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Distances at or below zero are clamped to this many meters.
pub const MIN_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub tx_power_dbm: f64,
    /// Path-loss exponent applied to the whole `4*pi*d/lambda` term.
    pub gamma: f64,
    pub frequency_hz: f64,
    pub sensitivity_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            tx_power_dbm: mw_to_dbm(100.0),
            gamma: 2.75,
            frequency_hz: 2.4e9,
            sensitivity_dbm: -83.0,
        }
    }
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

impl ChannelParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// `10 * gamma * log10(4 * pi * d / lambda)`.
    pub fn path_loss_db(&self, distance: f64) -> f64 {
        let d = if distance > 0.0 { distance } else { MIN_DISTANCE };
        10.0 * self.gamma * (4.0 * std::f64::consts::PI * d / self.wavelength()).log10()
    }

    pub fn received_dbm(&self, distance: f64) -> f64 {
        self.tx_power_dbm - self.path_loss_db(distance)
    }

    pub fn receivable(&self, distance: f64) -> bool {
        self.received_dbm(distance) >= self.sensitivity_dbm
    }

    /// Largest distance at which a frame is still received, from inverting
    /// the path-loss law.
    pub fn max_range(&self) -> f64 {
        let budget = self.tx_power_dbm - self.sensitivity_dbm;
        self.wavelength() / (4.0 * std::f64::consts::PI) * 10f64.powf(budget / (10.0 * self.gamma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacParams {
    /// bits per second
    pub rate_bps: f64,
    pub header_overhead_bytes: u32,
    /// Upper bound of the uniform access jitter.
    pub max_jitter: SimTime,
    pub queue_capacity: usize,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            rate_bps: 24e6,
            header_overhead_bytes: 64,
            max_jitter: SimTime::from_micros(200),
            queue_capacity: 50,
        }
    }
}

impl MacParams {
    /// Seconds on air for a frame carrying `size_bytes` of payload.
    pub fn airtime_secs(&self, size_bytes: u32) -> f64 {
        f64::from(size_bytes + self.header_overhead_bytes) * 8.0 / self.rate_bps
    }

    /// Airtime rounded up to whole microseconds.
    pub fn airtime(&self, size_bytes: u32) -> SimTime {
        SimTime::from_micros((self.airtime_secs(size_bytes) * 1e6).ceil() as u64)
    }
}

/// Bounded FIFO with drop-tail.
#[derive(Debug, Clone)]
pub struct TxQueue<T> {
    capacity: usize,
    items: VecDeque<T>,
    drops: u64,
}

impl<T> TxQueue<T> {
    pub fn new(capacity: usize) -> Self {
        TxQueue { capacity, items: VecDeque::new(), drops: 0 }
    }

    /// Returns the item back when the queue is full.
    pub fn enqueue(&mut self, item: T) -> Result<(), T> {
        if self.items.len() >= self.capacity {
            self.drops += 1;
            return Err(item);
        }
        self.items.push_back(item);
        Ok(())
    }

    pub fn dequeue(&mut self) -> Option<T> {
        self.items.pop_front()
    }

    pub fn front(&self) -> Option<&T> {
        self.items.front()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reception {
    pub node: NodeId,
    pub collided: bool,
}

#[derive(Debug, Clone)]
struct ActiveTx {
    id: TxId,
    sender: NodeId,
    end: SimTime,
    receptions: Vec<Reception>,
}

/// Outcome of a finished transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Finished {
    pub id: TxId,
    pub sender: NodeId,
    pub receptions: Vec<Reception>,
}

impl Finished {
    pub fn delivered_to(&self, node: NodeId) -> bool {
        self.receptions.iter().any(|r| r.node == node && !r.collided)
    }

    pub fn heard_by(&self, node: NodeId) -> bool {
        self.receptions.iter().any(|r| r.node == node)
    }
}

/// Shared broadcast medium. Positions are sampled when a transmission starts
/// and held for its duration.
#[derive(Debug, Default)]
pub struct Medium {
    next_id: u64,
    active: Vec<ActiveTx>,
}

impl Medium {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// True if `node` is transmitting or can hear an ongoing transmission.
    pub fn busy_at(&self, node: NodeId) -> bool {
        self.active
            .iter()
            .any(|tx| tx.sender == node || tx.receptions.iter().any(|r| r.node == node))
    }

    /// Latest end time among transmissions `node` can sense.
    pub fn busy_until(&self, node: NodeId) -> Option<SimTime> {
        self.active
            .iter()
            .filter(|tx| tx.sender == node || tx.receptions.iter().any(|r| r.node == node))
            .map(|tx| tx.end)
            .max()
    }

    /// Starts a transmission from `sender` lasting until `end`. Every node in
    /// range gets a reception record; overlaps at a receiver mark both
    /// receptions collided, and a node that starts sending loses whatever it
    /// was receiving.
    pub fn begin(
        &mut self,
        sender: NodeId,
        start: SimTime,
        end: SimTime,
        positions: &[Position],
        params: &ChannelParams,
    ) -> TxId {
        let id = TxId(self.next_id);
        self.next_id += 1;
        let origin = positions[sender];
        let mut receptions = Vec::new();
        for (node, pos) in positions.iter().enumerate() {
            if node == sender || !params.receivable(origin.distance(pos)) {
                continue;
            }
            let mut collided = false;
            for other in self.active.iter_mut().filter(|o| o.end > start) {
                if other.sender == node {
                    // receiver is itself on air
                    collided = true;
                }
                if let Some(r) = other.receptions.iter_mut().find(|r| r.node == node) {
                    r.collided = true;
                    collided = true;
                }
            }
            receptions.push(Reception { node, collided });
        }
        // Half duplex: the sender stops hearing anything in progress.
        for other in self.active.iter_mut().filter(|o| o.end > start) {
            if let Some(r) = other.receptions.iter_mut().find(|r| r.node == sender) {
                r.collided = true;
            }
        }
        self.active.push(ActiveTx { id, sender, end, receptions });
        id
    }

    pub fn finish(&mut self, id: TxId) -> Option<Finished> {
        let idx = self.active.iter().position(|tx| tx.id == id)?;
        let tx = self.active.swap_remove(idx);
        Some(Finished { id: tx.id, sender: tx.sender, receptions: tx.receptions })
    }

    /// Transmissions still on air, as (sender, receptions).
    pub fn in_flight(&self) -> impl Iterator<Item = (TxId, NodeId)> + '_ {
        self.active.iter().map(|tx| (tx.id, tx.sender))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on received power minus sensitivity, written against the
    /// raw formula rather than `max_range`.
    fn bisect_range() -> f64 {
        let f = |d: f64| {
            20.0 - 27.5 * (4.0 * std::f64::consts::PI * d * 2.4e9 / SPEED_OF_LIGHT).log10() + 83.0
        };
        let (mut lo, mut hi) = (1.0, 1000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn path_loss_reference_values() {
        let p = ChannelParams::default();
        assert!((p.tx_power_dbm - 20.0).abs() < 1e-12);
        // 27.5 * log10(4*pi*d*f/c) evaluated by hand.
        assert!((p.path_loss_db(10.0) - 82.56).abs() < 0.01, "{}", p.path_loss_db(10.0));
        assert!((p.path_loss_db(100.0) - 110.06).abs() < 0.01, "{}", p.path_loss_db(100.0));
    }

    #[test]
    fn path_loss_is_increasing() {
        let p = ChannelParams::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..2000 {
            let l = p.path_loss_db(i as f64 * 0.37);
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn nonpositive_distance_clamped() {
        let p = ChannelParams::default();
        assert_eq!(p.path_loss_db(0.0), p.path_loss_db(MIN_DISTANCE));
        assert_eq!(p.path_loss_db(-3.0), p.path_loss_db(MIN_DISTANCE));
    }

    #[test]
    fn receivable_thresholds() {
        let p = ChannelParams::default();
        assert!(p.receivable(10.0));
        assert!((p.received_dbm(10.0) + 62.56).abs() < 0.01);
        assert!(!p.receivable(100.0));
        assert!((p.received_dbm(100.0) + 90.06).abs() < 0.01);
    }

    #[test]
    fn max_range_matches_root_finder() {
        let oracle = bisect_range();
        assert!((oracle - 55.4).abs() < 0.5, "{oracle}");
        let r = ChannelParams::default().max_range();
        assert!((r - oracle).abs() < 1e-6, "{r} vs {oracle}");
        let p = ChannelParams::default();
        assert!(p.receivable(r - 1e-6));
        assert!(!p.receivable(r + 1e-6));
    }

    #[test]
    fn airtime_constants() {
        let m = MacParams::default();
        assert!((m.airtime_secs(1460) - 508e-6).abs() < 1e-12);
        assert!((m.airtime_secs(64) - 1024.0 / 24e6).abs() < 1e-15);
        assert_eq!(m.airtime(1460), SimTime::from_micros(508));
        assert_eq!(m.airtime(64), SimTime::from_micros(43));
        // linear in size
        let d1 = m.airtime_secs(200) - m.airtime_secs(100);
        let d2 = m.airtime_secs(1300) - m.airtime_secs(1200);
        assert!((d1 - d2).abs() < 1e-15);
    }

    #[test]
    fn queue_drop_tail() {
        let mut q = TxQueue::new(50);
        for i in 0..49 {
            q.enqueue(i).unwrap();
        }
        assert!(q.enqueue(49).is_ok());
        assert_eq!(q.enqueue(50), Err(50));
        assert_eq!((q.len(), q.drops()), (50, 1));
        let drained: Vec<_> = std::iter::from_fn(|| q.dequeue()).collect();
        assert_eq!(drained, (0..50).collect::<Vec<_>>());
    }

    fn line(xs: &[f64]) -> Vec<Position> {
        xs.iter().map(|&x| Position::new(x, 0.0, 0.0)).collect()
    }

    #[test]
    fn single_transmitter_delivers_in_range_only() {
        let p = ChannelParams::default();
        let pos = line(&[0.0, 30.0, 80.0]);
        let mut m = Medium::new();
        let id = m.begin(0, SimTime::ZERO, SimTime::from_micros(508), &pos, &p);
        assert!(m.busy_at(1) && !m.busy_at(2));
        let done = m.finish(id).unwrap();
        assert!(done.delivered_to(1));
        assert!(!done.heard_by(2));
    }

    #[test]
    fn overlap_at_receiver_loses_both() {
        let p = ChannelParams::default();
        // 0 and 2 cannot hear each other; both reach 1.
        let pos = line(&[0.0, 40.0, 80.0]);
        let mut m = Medium::new();
        let a = m.begin(0, SimTime::ZERO, SimTime::from_micros(500), &pos, &p);
        let b = m.begin(2, SimTime::from_micros(100), SimTime::from_micros(600), &pos, &p);
        let fa = m.finish(a).unwrap();
        let fb = m.finish(b).unwrap();
        assert!(!fa.delivered_to(1) && fa.heard_by(1));
        assert!(!fb.delivered_to(1) && fb.heard_by(1));
    }

    #[test]
    fn back_to_back_frames_do_not_collide() {
        let p = ChannelParams::default();
        let pos = line(&[0.0, 40.0, 80.0]);
        let mut m = Medium::new();
        let a = m.begin(0, SimTime::ZERO, SimTime::from_micros(500), &pos, &p);
        let fa = m.finish(a).unwrap();
        let b = m.begin(2, SimTime::from_micros(500), SimTime::from_micros(900), &pos, &p);
        let fb = m.finish(b).unwrap();
        assert!(fa.delivered_to(1) && fb.delivered_to(1));
    }

    #[test]
    fn sender_loses_frame_it_was_receiving() {
        let p = ChannelParams::default();
        let pos = line(&[0.0, 30.0]);
        let mut m = Medium::new();
        let a = m.begin(0, SimTime::ZERO, SimTime::from_micros(500), &pos, &p);
        let b = m.begin(1, SimTime::from_micros(10), SimTime::from_micros(400), &pos, &p);
        assert!(!m.finish(b).unwrap().delivered_to(0));
        assert!(!m.finish(a).unwrap().delivered_to(1));
    }
}
