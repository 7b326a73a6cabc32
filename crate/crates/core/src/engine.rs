//! Deterministic discrete-event core.
//!
//! Events are ordered by `(at, sequence)`. The sequence is a global insertion
//! counter, so simultaneous events fire in the order they were scheduled and
//! events scheduled by a handler at the current instant fire later in the same
//! instant.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::time::SimTime;

/// Something the engine can dispatch and log.
pub trait EventPayload {
    /// Stable kind name, used for per-kind counts and the event log.
    fn kind(&self) -> &'static str;
    /// Entity references as `key=value` pairs joined by `;`.
    fn payload_ids(&self) -> String;
}

/// Opaque identifier for a scheduled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle {
    at: SimTime,
    sequence: u64,
}

impl EventHandle {
    pub fn at(&self) -> SimTime {
        self.at
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("past-scheduling: event at {at} requested when clock is {now}")]
    PastScheduling { at: SimTime, now: SimTime },
}

/// A run aborted by a handler error.
#[derive(Debug, Error)]
#[error("run aborted at t={at} by {kind} event (sequence {sequence}): {source}")]
pub struct Aborted<E: std::error::Error + 'static> {
    pub at: SimTime,
    pub sequence: u64,
    pub kind: &'static str,
    #[source]
    pub source: E,
}

/// How a handler disposed of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Handled,
    /// The payload referenced an entity that no longer accepts it.
    Dropped,
}

/// A dispatched event as seen by the handler.
#[derive(Debug, Clone, PartialEq)]
pub struct Fired<E> {
    pub at: SimTime,
    pub sequence: u64,
    pub event: E,
}

/// The clock plus pending-event set. Handlers receive this to schedule follow-ups.
pub struct Scheduler<E> {
    now: SimTime,
    next_sequence: u64,
    pending: BTreeMap<(SimTime, u64), E>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self { now: SimTime::ZERO, next_sequence: 0, pending: BTreeMap::new() }
    }
}

impl<E> Scheduler<E> {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn schedule(&mut self, event: E, at: SimTime) -> Result<EventHandle, EngineError> {
        if at < self.now {
            return Err(EngineError::PastScheduling { at, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.pending.insert((at, sequence), event);
        Ok(EventHandle { at, sequence })
    }

    /// Schedules at the current instant, after everything already pending now.
    pub fn schedule_now(&mut self, event: E) -> EventHandle {
        self.schedule(event, self.now).expect("current time is never in the past")
    }

    /// Returns `true` if the event was pending and has been removed.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&(handle.at, handle.sequence)).is_some()
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains_key(&(handle.at, handle.sequence))
    }

    pub fn next_time(&self) -> Option<SimTime> {
        self.pending.keys().next().map(|(at, _)| *at)
    }

    fn pop_due(&mut self, end: SimTime) -> Option<Fired<E>> {
        let entry = self.pending.first_entry()?;
        if entry.key().0 > end {
            return None;
        }
        let ((at, sequence), event) = entry.remove_entry();
        self.now = at;
        Some(Fired { at, sequence, event })
    }
}

/// Receives dispatched events.
pub trait Handler<E> {
    type Error: std::error::Error + 'static;

    fn handle(&mut self, sched: &mut Scheduler<E>, fired: Fired<E>) -> Result<Disposition, Self::Error>;
}

/// Counts and timing for one `run_until` call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationSummary {
    pub dispatched: u64,
    pub dropped: u64,
    pub per_kind: BTreeMap<&'static str, u64>,
    pub final_clock: SimTime,
    pub wall_clock: Duration,
}

impl fmt::Display for SimulationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} events dispatched ({} dropped) up to t={} in {:.3}s",
            self.dispatched,
            self.dropped,
            self.final_clock,
            self.wall_clock.as_secs_f64()
        )
    }
}

/// Event loop owning a scheduler and an optional event log sink.
pub struct Engine<E> {
    sched: Scheduler<E>,
    log: Option<Box<dyn Write>>,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self { sched: Scheduler::default(), log: None }
    }
}

impl<E: EventPayload> Engine<E> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Enables the CSV event log (`time_s,sequence,kind,payload`); writes the header.
    pub fn with_event_log(mut self, mut sink: Box<dyn Write>) -> std::io::Result<Self> {
        writeln!(sink, "time_s,sequence,kind,payload")?;
        self.log = Some(sink);
        Ok(self)
    }

    pub fn now(&self) -> SimTime {
        self.sched.now
    }

    /// Flushes the event log, if any.
    pub fn flush_log(&mut self) -> std::io::Result<()> {
        match self.log.as_mut() {
            Some(log) => log.flush(),
            None => Ok(()),
        }
    }

    pub fn scheduler(&mut self) -> &mut Scheduler<E> {
        &mut self.sched
    }

    pub fn schedule(&mut self, event: E, at: SimTime) -> Result<EventHandle, EngineError> {
        self.sched.schedule(event, at)
    }

    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.sched.cancel(handle)
    }

    /// Dispatches every pending event with `at <= end` in `(at, sequence)` order,
    /// then advances the clock to `end`.
    pub fn run_until<H: Handler<E>>(&mut self, end: SimTime, handler: &mut H) -> Result<SimulationSummary, Aborted<H::Error>>
    where
        H::Error: From<std::io::Error>,
    {
        let started = Instant::now();
        let mut summary = SimulationSummary::default();
        while let Some(fired) = self.sched.pop_due(end) {
            let kind = fired.event.kind();
            let (at, sequence) = (fired.at, fired.sequence);
            if let Some(log) = self.log.as_mut() {
                let line = format!("{},{},{},{}", at, sequence, kind, fired.event.payload_ids());
                writeln!(log, "{line}").map_err(|e| Aborted { at, sequence, kind, source: H::Error::from(e) })?;
            }
            let disposition = handler.handle(&mut self.sched, fired).map_err(|source| Aborted { at, sequence, kind, source })?;
            summary.dispatched += 1;
            *summary.per_kind.entry(kind).or_insert(0) += 1;
            if disposition == Disposition::Dropped {
                summary.dropped += 1;
            }
        }
        if end > self.sched.now {
            self.sched.now = end;
        }
        if let Some(log) = self.log.as_mut() {
            log.flush().map_err(|e| Aborted { at: self.sched.now, sequence: u64::MAX, kind: "flush", source: H::Error::from(e) })?;
        }
        summary.final_clock = self.sched.now;
        summary.wall_clock = started.elapsed();
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Tag(u32);

    impl EventPayload for Tag {
        fn kind(&self) -> &'static str {
            "Tag"
        }
        fn payload_ids(&self) -> String {
            format!("tag={}", self.0)
        }
    }

    #[derive(Default)]
    struct Recorder {
        seen: Vec<(SimTime, u32)>,
        respawn_at_same_instant: bool,
    }

    impl Handler<Tag> for Recorder {
        type Error = std::io::Error;
        fn handle(&mut self, sched: &mut Scheduler<Tag>, fired: Fired<Tag>) -> Result<Disposition, Self::Error> {
            self.seen.push((fired.at, fired.event.0));
            if self.respawn_at_same_instant && fired.event.0 < 100 {
                sched.schedule_now(Tag(fired.event.0 + 100));
            }
            Ok(Disposition::Handled)
        }
    }

    #[test]
    fn schedule_fires_at_time() {
        let mut engine = Engine::new();
        engine.schedule(Tag(1), SimTime::from_secs(5)).unwrap();
        let mut rec = Recorder::default();
        engine.run_until(SimTime::from_secs(4), &mut rec).unwrap();
        assert!(rec.seen.is_empty());
        engine.run_until(SimTime::from_secs(5), &mut rec).unwrap();
        assert_eq!(rec.seen, vec![(SimTime::from_secs(5), 1)]);
    }

    #[test]
    fn ties_break_by_insertion_order() {
        let mut engine = Engine::new();
        engine.schedule(Tag(1), SimTime::from_secs(5)).unwrap();
        engine.schedule(Tag(2), SimTime::from_secs(5)).unwrap();
        let mut rec = Recorder::default();
        engine.run_until(SimTime::from_secs(10), &mut rec).unwrap();
        assert_eq!(rec.seen.iter().map(|s| s.1).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn past_scheduling_is_rejected() {
        let mut engine: Engine<Tag> = Engine::new();
        let mut rec = Recorder::default();
        engine.run_until(SimTime::from_secs(4), &mut rec).unwrap();
        let err = engine.schedule(Tag(1), SimTime::from_secs(3)).unwrap_err();
        assert!(err.to_string().starts_with("past-scheduling"));
    }

    #[test]
    fn cancel_is_idempotent() {
        let mut engine = Engine::new();
        let h = engine.schedule(Tag(1), SimTime::from_secs(1)).unwrap();
        assert!(engine.cancel(h));
        assert!(!engine.cancel(h));

        let fired = engine.schedule(Tag(2), SimTime::from_secs(1)).unwrap();
        let mut rec = Recorder::default();
        engine.run_until(SimTime::from_secs(2), &mut rec).unwrap();
        assert!(!engine.cancel(fired));
        assert_eq!(rec.seen.len(), 1);
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut engine: Engine<Tag> = Engine::new();
        let summary = engine.run_until(SimTime::from_secs(100), &mut Recorder::default()).unwrap();
        assert_eq!(summary.dispatched, 0);
        assert_eq!(engine.now(), SimTime::from_secs(100));
    }

    #[test]
    fn run_until_is_inclusive() {
        let mut engine = Engine::new();
        for s in 1..=3 {
            engine.schedule(Tag(s), SimTime::from_secs(s as u64)).unwrap();
        }
        let summary = engine.run_until(SimTime::from_secs(2), &mut Recorder::default()).unwrap();
        assert_eq!(summary.dispatched, 2);
        assert_eq!(summary.per_kind["Tag"], 2);
    }

    #[test]
    fn same_instant_followups_fire_after_existing_events() {
        let mut engine = Engine::new();
        engine.schedule(Tag(1), SimTime::from_secs(1)).unwrap();
        engine.schedule(Tag(2), SimTime::from_secs(1)).unwrap();
        let mut rec = Recorder { respawn_at_same_instant: true, ..Default::default() };
        engine.run_until(SimTime::from_secs(1), &mut rec).unwrap();
        assert_eq!(rec.seen.iter().map(|s| s.1).collect::<Vec<_>>(), vec![1, 2, 101, 102]);
    }

    #[test]
    fn event_log_lines() {
        use std::sync::{Arc, Mutex};
        #[derive(Clone, Default)]
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let buf = Shared::default();
        let mut engine = Engine::new().with_event_log(Box::new(buf.clone())).unwrap();
        engine.schedule(Tag(7), SimTime::from_millis(1500)).unwrap();
        engine.run_until(SimTime::from_secs(2), &mut Recorder::default()).unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        assert_eq!(text, "time_s,sequence,kind,payload\n1.500,0,Tag,tag=7\n");
    }
}
