//! Constant-bitrate streams and delivery accounting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no packets were sent")]
    NothingSent,
    #[error("need at least 2 samples for an interval, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub src: NodeId,
    pub dst: NodeId,
    /// bits per second
    pub bitrate: f64,
    pub payload_bytes: u32,
    pub start: SimTime,
    pub stop: SimTime,
}

impl StreamSpec {
    /// Gap between datagrams, `payload * 8 / bitrate`, in whole microseconds.
    pub fn interval(&self) -> SimTime {
        SimTime::from_secs_f64(f64::from(self.payload_bytes) * 8.0 / self.bitrate)
    }

    /// Send times `start + k * interval` strictly before `stop`.
    pub fn send_times(&self) -> impl Iterator<Item = SimTime> + '_ {
        let step = self.interval().as_micros().max(1);
        (0..)
            .map(move |k| SimTime::from_micros(self.start.as_micros() + k * step))
            .take_while(move |t| *t < self.stop)
    }

    pub fn packet_count(&self) -> u64 {
        if self.stop <= self.start {
            return 0;
        }
        let span = (self.stop - self.start).as_micros();
        let step = self.interval().as_micros().max(1);
        span.div_ceil(step)
    }
}

/// Draws `count` stream endpoint pairs with no node shared between pairs.
/// Returns fewer pairs if there are not enough nodes.
pub fn draw_endpoints<R: Rng + ?Sized>(nodes: usize, count: usize, rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let mut ids: Vec<NodeId> = (0..nodes).collect();
    ids.shuffle(rng);
    ids.chunks_exact(2).take(count).map(|c| (c[0], c[1])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropCause {
    Collision,
    QueueOverflow,
    NoRoute,
    Ttl,
    /// The chosen next hop was out of radio range when the frame went out.
    OutOfRange,
}

impl DropCause {
    pub const ALL: [DropCause; 5] = [
        DropCause::Collision,
        DropCause::QueueOverflow,
        DropCause::NoRoute,
        DropCause::Ttl,
        DropCause::OutOfRange,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropCause::Collision => "collision",
            DropCause::QueueOverflow => "queue_overflow",
            DropCause::NoRoute => "no_route",
            DropCause::Ttl => "ttl",
            DropCause::OutOfRange => "out_of_range",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub collision: u64,
    pub queue_overflow: u64,
    pub no_route: u64,
    pub ttl: u64,
    pub out_of_range: u64,
}

impl DropCounts {
    pub fn add(&mut self, cause: DropCause) {
        *self.slot(cause) += 1;
    }

    fn slot(&mut self, cause: DropCause) -> &mut u64 {
        match cause {
            DropCause::Collision => &mut self.collision,
            DropCause::QueueOverflow => &mut self.queue_overflow,
            DropCause::NoRoute => &mut self.no_route,
            DropCause::Ttl => &mut self.ttl,
            DropCause::OutOfRange => &mut self.out_of_range,
        }
    }

    pub fn get(&self, cause: DropCause) -> u64 {
        match cause {
            DropCause::Collision => self.collision,
            DropCause::QueueOverflow => self.queue_overflow,
            DropCause::NoRoute => self.no_route,
            DropCause::Ttl => self.ttl,
            DropCause::OutOfRange => self.out_of_range,
        }
    }

    pub fn total(&self) -> u64 {
        DropCause::ALL.iter().map(|c| self.get(*c)).sum()
    }

    pub fn merge(&mut self, other: &DropCounts) {
        for c in DropCause::ALL {
            *self.slot(c) += other.get(c);
        }
    }
}

/// One current-PDR sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdrSample {
    pub window_end: SimTime,
    pub sent: u64,
    pub received: u64,
    /// `None` when nothing was sent in the window.
    pub pdr: Option<f64>,
}

/// Send/receive counters for one stream, overall and per time window.
/// Receptions are binned by arrival time, so a window can receive more than
/// it sent when earlier packets arrive late.
#[derive(Debug, Clone)]
pub struct StreamStats {
    window: SimTime,
    pub sent: u64,
    pub received: u64,
    pub drops: DropCounts,
    sent_w: BTreeMap<u64, u64>,
    received_w: BTreeMap<u64, u64>,
}

impl StreamStats {
    pub fn new(window: SimTime) -> Self {
        assert!(window > SimTime::ZERO);
        StreamStats {
            window,
            sent: 0,
            received: 0,
            drops: DropCounts::default(),
            sent_w: BTreeMap::new(),
            received_w: BTreeMap::new(),
        }
    }

    pub fn window(&self) -> SimTime {
        self.window
    }

    fn bin(&self, t: SimTime) -> u64 {
        t.as_micros() / self.window.as_micros()
    }

    pub fn record_sent(&mut self, t: SimTime) {
        self.sent += 1;
        *self.sent_w.entry(self.bin(t)).or_default() += 1;
    }

    pub fn record_received(&mut self, t: SimTime) {
        self.received += 1;
        *self.received_w.entry(self.bin(t)).or_default() += 1;
    }

    pub fn record_drop(&mut self, cause: DropCause) {
        self.drops.add(cause);
    }

    /// Current PDR for the window ending at `window_end` (which should be on
    /// the window grid).
    pub fn current_pdr(&self, window_end: SimTime) -> PdrSample {
        let idx = (window_end.as_micros() / self.window.as_micros()).saturating_sub(1);
        let sent = self.sent_w.get(&idx).copied().unwrap_or(0);
        let received = self.received_w.get(&idx).copied().unwrap_or(0);
        let pdr = (sent > 0).then(|| received as f64 / sent as f64);
        PdrSample { window_end, sent, received, pdr }
    }

    /// Samples for every window ending in `(0, until]`.
    pub fn series(&self, until: SimTime) -> Vec<PdrSample> {
        let n = until.as_micros() / self.window.as_micros();
        (1..=n)
            .map(|k| self.current_pdr(SimTime::from_micros(k * self.window.as_micros())))
            .collect()
    }

    pub fn overall_pdr(&self) -> Result<f64, StatsError> {
        overall_pdr(self.sent, self.received)
    }
}

pub fn overall_pdr(sent: u64, received: u64) -> Result<f64, StatsError> {
    if sent == 0 {
        return Err(StatsError::NothingSent);
    }
    Ok(received as f64 / sent as f64)
}

/// Mean of the present current-PDR samples.
pub fn mean_current_pdr(samples: &[PdrSample]) -> Option<f64> {
    let present: Vec<f64> = samples.iter().filter_map(|s| s.pdr).collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ConfidenceInterval {
    pub fn half_width(&self) -> f64 {
        self.hi - self.mean
    }
}

/// Student-t interval `mean +- t(1 - (1-level)/2, n-1) * s / sqrt(n)`.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<ConfidenceInterval, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 {
        return Ok(ConfidenceInterval { mean, lo: mean, hi: mean });
    }
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("valid degrees of freedom")
        .inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let half = t * var.sqrt() / nf.sqrt();
    Ok(ConfidenceInterval { mean, lo: mean - half, hi: mean + half })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn spec(secs: u64) -> StreamSpec {
        StreamSpec {
            src: 0,
            dst: 1,
            bitrate: 2e6,
            payload_bytes: 1460,
            start: SimTime::ZERO,
            stop: SimTime::from_secs(secs),
        }
    }

    #[test]
    fn interval_is_5_84_ms() {
        assert_eq!(spec(1).interval(), SimTime::from_micros(5_840));
    }

    #[test]
    fn one_second_packet_count() {
        // floor(1 s / 5.84 ms) = 171 full intervals, plus the packet at t = 0
        let oracle = (1.0f64 / 0.00584).floor() as u64;
        let n = spec(1).send_times().count() as u64;
        assert!(n == oracle || n == oracle + 1, "{n}");
        assert_eq!(n, spec(1).packet_count());
    }

    #[test]
    fn six_hundred_second_packet_count() {
        let s = spec(600);
        let n = s.send_times().count() as u64;
        assert_eq!(n, s.packet_count());
        assert!((n as f64 - 600.0 / 0.00584).abs() <= 1.0, "{n}");
    }

    #[test]
    fn endpoints_are_disjoint() {
        let mut rng = RngStream::new("traffic", 5);
        let pairs = draw_endpoints(15, 3, &mut rng);
        assert_eq!(pairs.len(), 3);
        let mut all: Vec<_> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 6);
        let mut again = RngStream::new("traffic", 5);
        assert_eq!(draw_endpoints(15, 3, &mut again), pairs);
    }

    fn window_with(sent: u64, received: u64) -> StreamStats {
        let mut s = StreamStats::new(SimTime::from_secs(1));
        for i in 0..sent {
            s.record_sent(SimTime::from_micros(i));
        }
        for i in 0..received {
            s.record_received(SimTime::from_micros(500_000 + i));
        }
        s
    }

    #[test]
    fn current_pdr_values() {
        let w = window_with(171, 171).current_pdr(SimTime::from_secs(1));
        assert_eq!(w.pdr, Some(1.0));
        let late = window_with(171, 180).current_pdr(SimTime::from_secs(1)).pdr.unwrap();
        assert!((late - 180.0 / 171.0).abs() < 1e-12 && late > 1.05);
        assert_eq!(window_with(0, 3).current_pdr(SimTime::from_secs(1)).pdr, None);
    }

    #[test]
    fn overall_pdr_values() {
        assert_eq!(overall_pdr(100, 90), Ok(0.9));
        assert_eq!(overall_pdr(100, 0), Ok(0.0));
        assert_eq!(overall_pdr(0, 0), Err(StatsError::NothingSent));
    }

    #[test]
    fn series_and_mean() {
        let mut s = StreamStats::new(SimTime::from_secs(1));
        s.record_sent(SimTime::from_millis(100));
        s.record_sent(SimTime::from_millis(200));
        s.record_received(SimTime::from_millis(300));
        s.record_received(SimTime::from_millis(2_100));
        let series = s.series(SimTime::from_secs(3));
        assert_eq!(series.len(), 3);
        assert_eq!(series[0].pdr, Some(0.5));
        assert_eq!(series[1].pdr, None);
        assert_eq!(series[2].pdr, None);
        assert_eq!(series[2].received, 1);
        assert_eq!(mean_current_pdr(&series), Some(0.5));
    }

    #[test]
    fn ci_zero_variance() {
        let ci = confidence_interval(&[0.8; 5], 0.95).unwrap();
        assert_eq!((ci.mean, ci.lo, ci.hi), (0.8, 0.8, 0.8));
    }

    #[test]
    fn ci_two_samples_against_t_table() {
        // t(0.975, 1) = 12.706 from a printed table.
        let ci = confidence_interval(&[0.6, 0.8], 0.95).unwrap();
        assert!((ci.mean - 0.7).abs() < 1e-12);
        let s = (0.02f64).sqrt();
        let half = 12.706 * s / 2f64.sqrt();
        assert!((ci.half_width() - half).abs() < 1e-3, "{}", ci.half_width());
        assert!((ci.lo - (-0.571)).abs() < 1e-3 && (ci.hi - 1.971).abs() < 1e-3);
        assert!(ci.lo <= ci.mean && ci.mean <= ci.hi);
    }

    #[test]
    fn ci_needs_two() {
        assert_eq!(confidence_interval(&[1.0], 0.95), Err(StatsError::TooFewSamples(1)));
    }
}
