//! Waypoint mobility at constant speed inside a box, position history, and
//! least-squares position prediction.

use std::collections::VecDeque;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (*self - *other).norm()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, o: Position) -> Position {
        Position::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, o: Position) -> Position {
        Position::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, k: f64) -> Position {
        Position::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Axis-aligned mission area with its origin at (0, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Area {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Area { x, y, z }
    }

    pub fn diagonal(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.x).contains(&p.x) && (0.0..=self.y).contains(&p.y) && (0.0..=self.z).contains(&p.z)
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(
            rng.gen::<f64>() * self.x,
            rng.gen::<f64>() * self.y,
            rng.gen::<f64>() * self.z,
        )
    }
}

impl Default for Area {
    fn default() -> Self {
        Area::new(500.0, 500.0, 10.0)
    }
}

/// 50 km/h in m/s.
pub const DEFAULT_SPEED: f64 = 50.0 / 3.6;

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub position: Position,
    pub waypoint: Position,
    /// meters per second
    pub speed: f64,
}

impl MobilityState {
    pub fn new(position: Position, waypoint: Position, speed: f64) -> Self {
        MobilityState { position, waypoint, speed }
    }

    pub fn stationary(position: Position) -> Self {
        MobilityState { position, waypoint: position, speed: 0.0 }
    }
}

/// Advances the node `speed * dt` along its waypoint chain. Each reached
/// waypoint is replaced by a uniform draw from `area` and the leftover
/// distance is spent toward it, so total travel is exactly `speed * dt`.
pub fn step_waypoint<R: Rng + ?Sized>(
    state: &MobilityState,
    dt: f64,
    area: &Area,
    rng: &mut R,
) -> MobilityState {
    debug_assert!(dt > 0.0);
    let mut next = state.clone();
    if state.speed <= 0.0 {
        return next;
    }
    let mut remaining = state.speed * dt;
    // A freshly drawn waypoint can coincide with the position; bound the loop.
    for _ in 0..64 {
        let to_go = next.waypoint - next.position;
        let dist = to_go.norm();
        if dist > remaining {
            next.position = next.position + to_go * (remaining / dist);
            break;
        }
        next.position = next.waypoint;
        remaining -= dist;
        next.waypoint = area.random_point(rng);
        if remaining <= 0.0 {
            break;
        }
    }
    next
}

#[derive(Debug, Error, PartialEq)]
pub enum HistoryError {
    #[error("sample at {at} does not follow last sample at {last}")]
    NonIncreasing { at: SimTime, last: SimTime },
    #[error("prediction needs at least 2 samples, have {0}")]
    InsufficientHistory(usize),
}

/// Fixed-capacity ring of timestamped positions, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityHistory {
    capacity: usize,
    samples: VecDeque<(SimTime, Position)>,
}

impl MobilityHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        MobilityHistory { capacity, samples: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &(SimTime, Position)> {
        self.samples.iter()
    }

    pub fn last(&self) -> Option<&(SimTime, Position)> {
        self.samples.back()
    }

    pub fn record(&mut self, t: SimTime, p: Position) -> Result<(), HistoryError> {
        if let Some(&(last, _)) = self.samples.back() {
            if t <= last {
                return Err(HistoryError::NonIncreasing { at: t, last });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, p));
        Ok(())
    }

    /// Fits each coordinate against time over the newest `min(n_fit, len)`
    /// samples and evaluates the fit `n_ahead * step` after the newest sample.
    /// The result is not clamped to any area.
    pub fn predict(&self, n_fit: usize, n_ahead: u32, step: SimTime) -> Result<Position, HistoryError> {
        let n = n_fit.min(self.samples.len());
        if n < 2 {
            return Err(HistoryError::InsufficientHistory(self.samples.len()));
        }
        let window: Vec<_> = self.samples.iter().skip(self.samples.len() - n).collect();
        let (t_last, _) = *window[n - 1];
        // Times relative to the newest sample keep the normal equations well conditioned.
        let ts: Vec<f64> = window
            .iter()
            .map(|(t, _)| t.as_secs_f64() - t_last.as_secs_f64())
            .collect();
        let horizon = f64::from(n_ahead) * step.as_secs_f64();
        let fit = |coord: fn(&Position) -> f64| {
            let ys: Vec<f64> = window.iter().map(|(_, p)| coord(p)).collect();
            let (slope, intercept) = least_squares(&ts, &ys);
            intercept + slope * horizon
        };
        Ok(Position::new(fit(|p| p.x), fit(|p| p.y), fit(|p| p.z)))
    }
}

/// Ordinary least squares `y = slope * x + intercept`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}
