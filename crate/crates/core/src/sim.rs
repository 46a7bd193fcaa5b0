//! Deterministic discrete-event engine.
//!
//! Virtual time is kept as integer nanoseconds so that arithmetic on
//! milestones telescopes exactly; the public API speaks seconds.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An instant on the simulation clock, measured from genesis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VirtualTime(u64);

impl VirtualTime {
    pub const ZERO: VirtualTime = VirtualTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        VirtualTime(ns)
    }

    /// Negative or non-finite inputs clamp to zero.
    pub fn from_secs(secs: f64) -> Self {
        VirtualTime(secs_to_nanos(secs))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e9
    }

    /// Time elapsed since `earlier`, saturating at zero.
    pub fn since(self, earlier: VirtualTime) -> Duration {
        Duration::from_nanos(self.0.saturating_sub(earlier.0))
    }
}

pub(crate) fn secs_to_nanos(secs: f64) -> u64 {
    if secs.is_finite() && secs > 0.0 {
        (secs * 1e9).round() as u64
    } else {
        0
    }
}

/// Duration from seconds, clamping negatives to zero.
pub fn secs(secs: f64) -> Duration {
    Duration::from_nanos(secs_to_nanos(secs))
}

impl Add<Duration> for VirtualTime {
    type Output = VirtualTime;

    fn add(self, rhs: Duration) -> VirtualTime {
        VirtualTime(self.0 + rhs.as_nanos() as u64)
    }
}

impl Sub for VirtualTime {
    type Output = Duration;

    fn sub(self, rhs: VirtualTime) -> Duration {
        self.since(rhs)
    }
}

impl fmt::Display for VirtualTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}s", self.as_secs())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("clock violation: cannot schedule at {at} when the clock reads {now}")]
    ClockViolation { at: VirtualTime, now: VirtualTime },
}

/// Returned by [`Engine::schedule`]; pass to [`Engine::cancel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// A queued event. Equal `fire_at` values are ordered by `seq`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimEvent<E> {
    pub fire_at: VirtualTime,
    pub seq: u64,
    pub kind: E,
}

/// One processed event as recorded in the optional trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub fire_at: VirtualTime,
    pub seq: u64,
    pub kind: String,
}

struct Queued<E> {
    key: Reverse<(VirtualTime, u64)>,
    kind: E,
}

impl<E> PartialEq for Queued<E> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl<E> Eq for Queued<E> {}

impl<E> PartialOrd for Queued<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Queued<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub scheduled: u64,
    pub cancelled: u64,
    pub processed: u64,
}

/// Single-threaded event queue with a virtual clock.
pub struct Engine<E> {
    now: VirtualTime,
    next_seq: u64,
    queue: BinaryHeap<Queued<E>>,
    cancelled: HashSet<u64>,
    stats: EngineStats,
    halted: bool,
    trace: Option<Vec<TraceEntry>>,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Engine {
            now: VirtualTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            stats: EngineStats::default(),
            halted: false,
            trace: None,
        }
    }

    /// Like [`Engine::new`], but records every processed event.
    pub fn with_trace() -> Self {
        Engine {
            trace: Some(Vec::new()),
            ..Self::new()
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.now
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    /// Number of live (not cancelled) events still queued.
    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    pub fn schedule(&mut self, fire_at: VirtualTime, kind: E) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::ClockViolation { at: fire_at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued { key: Reverse((fire_at, seq)), kind });
        self.stats.scheduled += 1;
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current clock; never violates causality.
    pub fn schedule_in(&mut self, delay: Duration, kind: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, kind).expect("relative schedule is never in the past")
    }

    /// Returns `false` if the event already fired or was cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let live = self.queue.iter().any(|q| q.key.0 .1 == handle.0);
        if live && self.cancelled.insert(handle.0) {
            self.stats.cancelled += 1;
            true
        } else {
            false
        }
    }

    /// Stops the current [`Engine::run_until`] loop after the running handler returns.
    pub fn halt(&mut self) {
        self.halted = true;
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    fn pop_live(&mut self, end: VirtualTime) -> Option<SimEvent<E>> {
        loop {
            let head = self.queue.peek()?;
            if head.key.0 .0 > end {
                return None;
            }
            let q = self.queue.pop()?;
            let (fire_at, seq) = q.key.0;
            if self.cancelled.remove(&seq) {
                continue;
            }
            return Some(SimEvent { fire_at, seq, kind: q.kind });
        }
    }
}

impl<E: fmt::Debug> Engine<E> {
    /// Processes every event with `fire_at <= end` in `(fire_at, seq)` order.
    ///
    /// On normal termination the clock is left at `end`; after [`Engine::halt`]
    /// it stays at the time of the halting event. Returns the number of events
    /// handled by this call.
    pub fn run_until<F>(&mut self, end: VirtualTime, mut handler: F) -> Result<u64, SimError>
    where
        F: FnMut(&mut Engine<E>, SimEvent<E>),
    {
        if end < self.now {
            return Err(SimError::ClockViolation { at: end, now: self.now });
        }
        self.halted = false;
        let mut steps = 0;
        while let Some(ev) = self.pop_live(end) {
            self.now = ev.fire_at;
            self.stats.processed += 1;
            steps += 1;
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceEntry {
                    fire_at: ev.fire_at,
                    seq: ev.seq,
                    kind: format!("{:?}", ev.kind),
                });
            }
            handler(self, ev);
            if self.halted {
                return Ok(steps);
            }
        }
        self.now = end;
        Ok(steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: f64) -> VirtualTime {
        VirtualTime::from_secs(s)
    }

    #[test]
    fn schedule_future_and_present_ok_past_rejected() {
        let mut e: Engine<&str> = Engine::new();
        e.run_until(t(3.0), |_, _| {}).unwrap();
        assert!(e.schedule(t(5.0), "later").is_ok());
        assert!(e.schedule(t(3.0), "now").is_ok());
        assert_eq!(
            e.schedule(t(2.0), "past"),
            Err(SimError::ClockViolation { at: t(2.0), now: t(3.0) })
        );
        let mut fired = Vec::new();
        e.run_until(t(10.0), |e, ev| fired.push((e.now(), ev.kind))).unwrap();
        assert_eq!(fired, vec![(t(3.0), "now"), (t(5.0), "later")]);
    }

    #[test]
    fn same_instant_fires_after_earlier_seq() {
        let mut e: Engine<u32> = Engine::new();
        e.run_until(t(3.0), |_, _| {}).unwrap();
        e.schedule(t(3.0), 1).unwrap();
        e.schedule(t(3.0), 2).unwrap();
        let mut order = Vec::new();
        e.run_until(t(3.0), |_, ev| order.push(ev.kind)).unwrap();
        assert_eq!(order, vec![1, 2]);
    }

    #[test]
    fn empty_queue_advances_clock_to_end() {
        let mut e: Engine<()> = Engine::new();
        assert_eq!(e.run_until(t(10.0), |_, _| {}).unwrap(), 0);
        assert_eq!(e.now(), t(10.0));
    }

    #[test]
    fn run_until_stops_before_later_events() {
        let mut e: Engine<()> = Engine::new();
        e.schedule(t(1.0), ()).unwrap();
        e.schedule(t(4.0), ()).unwrap();
        assert_eq!(e.run_until(t(3.0), |_, _| {}).unwrap(), 1);
        assert_eq!(e.now(), t(3.0));
        assert_eq!(e.pending(), 1);
    }

    #[test]
    fn fifo_among_simultaneous_events() {
        let mut e: Engine<char> = Engine::new();
        e.schedule(t(2.0), 'A').unwrap();
        e.schedule(t(2.0), 'B').unwrap();
        let mut order = Vec::new();
        e.run_until(t(5.0), |_, ev| order.push(ev.kind)).unwrap();
        assert_eq!(order, vec!['A', 'B']);
    }

    #[test]
    fn end_before_now_is_rejected() {
        let mut e: Engine<()> = Engine::new();
        e.run_until(t(5.0), |_, _| {}).unwrap();
        assert!(e.run_until(t(4.0), |_, _| {}).is_err());
    }

    #[test]
    fn cancel_removes_event_and_counts() {
        let mut e: Engine<u8> = Engine::new();
        let a = e.schedule(t(1.0), 1).unwrap();
        e.schedule(t(2.0), 2).unwrap();
        assert!(e.cancel(a));
        assert!(!e.cancel(a));
        let mut seen = Vec::new();
        e.run_until(t(3.0), |_, ev| seen.push(ev.kind)).unwrap();
        assert_eq!(seen, vec![2]);
        let s = e.stats();
        assert_eq!((s.scheduled, s.cancelled, s.processed), (2, 1, 1));
        assert!(!e.cancel(a));
    }

    #[test]
    fn handler_can_schedule_and_halt() {
        let mut e: Engine<u32> = Engine::new();
        e.schedule(t(1.0), 0).unwrap();
        let steps = e
            .run_until(t(100.0), |e, ev| {
                if ev.kind < 4 {
                    e.schedule_in(secs(1.0), ev.kind + 1);
                } else {
                    e.halt();
                }
            })
            .unwrap();
        assert_eq!(steps, 5);
        assert_eq!(e.now(), t(5.0));
    }

    #[test]
    fn trace_records_processed_events() {
        let mut e: Engine<&str> = Engine::with_trace();
        e.schedule(t(1.5), "x").unwrap();
        e.run_until(t(2.0), |_, _| {}).unwrap();
        let tr = e.trace().unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr[0].fire_at, t(1.5));
        assert_eq!(tr[0].kind, "\"x\"");
    }

    #[test]
    fn seconds_roundtrip_and_clamp() {
        assert_eq!(t(1.25).as_nanos(), 1_250_000_000);
        assert_eq!(t(-3.0), VirtualTime::ZERO);
        assert_eq!(t(f64::NAN), VirtualTime::ZERO);
        assert_eq!(t(2.0) - t(0.5), secs(1.5));
        assert_eq!(t(0.5) - t(2.0), Duration::ZERO);
    }
}
