//! Discrete-event engine: a clock plus a priority queue ordered by
//! `(fire_time, seq)`.
//!
//! The engine is generic over the event payload. It owns nothing but the
//! queue and the clock; dispatch is done by whoever pops events, which keeps
//! the borrow of the model state separate from the borrow of the queue.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("event at {at} is in the past (clock is {now})")]
    InPast { at: SimTime, now: SimTime },
}

/// Handle returned by [`Engine::schedule`]; used for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; reverse so the earliest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Entry<E>>,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events handed out by [`Engine::pop_until`] so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Pending entries, including cancelled ones not yet popped.
    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<EventHandle, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry { at, seq, event });
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current clock. Cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, event).expect("future event")
    }

    /// Marks the event as cancelled; it is discarded when it reaches the head.
    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.0 < self.next_seq {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pops the next live event with `fire_time <= t_end`, advancing the clock
    /// to its fire time.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.queue.peek()?;
            if head.at > t_end {
                return None;
            }
            let entry = self.queue.pop().expect("peeked");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.at >= self.now);
            self.now = entry.at;
            self.processed += 1;
            return Some((entry.at, entry.event));
        }
    }

    /// Moves the clock forward to `t` without processing anything. Used once
    /// the queue holds nothing at or before `t`.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Processes every event with `fire_time <= t_end` through `handler`, then
    /// sets the clock to `t_end`. Returns the number of events processed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Engine<E>, SimTime, E),
    {
        let mut count = 0;
        while let Some((t, ev)) = self.pop_until(t_end) {
            handler(self, t, ev);
            count += 1;
        }
        self.advance_to(t_end);
        count
    }
}
