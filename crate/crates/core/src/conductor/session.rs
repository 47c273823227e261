//! The session loop: pulls envelopes from a source, drives the state machine,
//! runs timers, and publishes effects. Time only ever advances to envelope
//! timestamps or timer deadlines, so a recorded log replays exactly.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde_json::Map;

use super::codec::{effect_to_envelope, event_from_envelope, event_to_envelope, CONDUCTOR_SRC, SESSION_SRC, TIMER_SRC};
use super::machine::{handle_event, init_session, interrupt, ConductorError};
use super::model::*;
use crate::msgbus::{Bus, Envelope, LogWriter, SessionLog, Subscription, Topic, TopicFilter};
use crate::taskmodel::{StepId, TaskGraph};

pub enum Poll {
    Input(Envelope),
    /// The requested deadline passed with no input.
    Deadline,
    /// No more input will ever arrive.
    Closed,
}

pub trait EventSource {
    /// Waits for the next input, but no later than `deadline` (epoch ms).
    fn poll(&mut self, deadline: Option<u64>) -> Poll;
    fn now_ms(&self) -> u64;
}

pub trait EffectSink {
    /// Receives every envelope the loop produces. Synchronous services
    /// (mocks) may answer with envelopes that are fed back as inputs at their
    /// own timestamps.
    fn deliver(&mut self, env: &Envelope) -> Vec<Envelope>;
}

pub struct NullSink;

impl EffectSink for NullSink {
    fn deliver(&mut self, _env: &Envelope) -> Vec<Envelope> {
        Vec::new()
    }
}

/// Publishes everything on a bus; peripheral services answer over the bus.
pub struct BusSink {
    bus: Bus,
}

impl BusSink {
    pub fn new(bus: Bus) -> Self {
        BusSink { bus }
    }
}

impl EffectSink for BusSink {
    fn deliver(&mut self, env: &Envelope) -> Vec<Envelope> {
        self.bus.publish(env);
        Vec::new()
    }
}

impl<S: EffectSink + ?Sized> EffectSink for &mut S {
    fn deliver(&mut self, env: &Envelope) -> Vec<Envelope> {
        (**self).deliver(env)
    }
}

/// Pre-recorded inputs on a virtual clock.
pub struct ScriptedSource {
    events: VecDeque<Envelope>,
    clock: u64,
    horizon_ms: u64,
}

impl ScriptedSource {
    /// Default horizon: ten minutes after the last scripted input.
    pub fn new(start_ms: u64, events: Vec<Envelope>) -> Self {
        let last = events.iter().map(|e| e.ts_ms).max().unwrap_or(start_ms).max(start_ms);
        Self::with_horizon(start_ms, events, last + 600_000)
    }

    /// Deadlines beyond `horizon_ms` with nothing left to deliver close the
    /// source instead of advancing time.
    pub fn with_horizon(start_ms: u64, mut events: Vec<Envelope>, horizon_ms: u64) -> Self {
        events.sort_by_key(|e| e.ts_ms);
        ScriptedSource {
            events: events.into(),
            clock: start_ms,
            horizon_ms,
        }
    }
}

impl EventSource for ScriptedSource {
    fn poll(&mut self, deadline: Option<u64>) -> Poll {
        match (self.events.front(), deadline) {
            (Some(e), d) if d.is_none_or(|d| e.ts_ms <= d) => {
                self.clock = self.clock.max(e.ts_ms);
                Poll::Input(self.events.pop_front().unwrap())
            }
            (next, Some(d)) => {
                if next.is_none() && d > self.horizon_ms {
                    Poll::Closed
                } else {
                    self.clock = self.clock.max(d);
                    Poll::Deadline
                }
            }
            (None, None) => Poll::Closed,
            (Some(_), None) => unreachable!(),
        }
    }

    fn now_ms(&self) -> u64 {
        self.clock
    }
}

pub fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Live bus input on the wall clock. Envelopes produced by the loop itself
/// are filtered out.
pub struct LiveSource {
    sub: Subscription,
    shutdown: Arc<AtomicBool>,
}

impl LiveSource {
    pub fn new(bus: &Bus, shutdown: Arc<AtomicBool>) -> Self {
        LiveSource {
            sub: bus.subscribe(TopicFilter::All),
            shutdown,
        }
    }
}

impl EventSource for LiveSource {
    fn poll(&mut self, deadline: Option<u64>) -> Poll {
        loop {
            if self.shutdown.load(Ordering::SeqCst) {
                return Poll::Closed;
            }
            let now = wall_clock_ms();
            if deadline.is_some_and(|d| now >= d) {
                return Poll::Deadline;
            }
            let wait = deadline.map_or(100, |d| (d - now).min(100));
            match self.sub.recv_timeout(Duration::from_millis(wait)) {
                Ok(Some(env)) if [CONDUCTOR_SRC, TIMER_SRC, SESSION_SRC].contains(&env.src.as_str()) => {}
                Ok(Some(env)) => return Poll::Input(env),
                Ok(None) => {}
                Err(_) => return Poll::Closed,
            }
        }
    }

    fn now_ms(&self) -> u64 {
        wall_clock_ms()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SessionMeta {
    pub session_id: String,
    pub participant: Option<String>,
    pub attempt_index: Option<u32>,
}

struct Loop<'a, K: EffectSink> {
    sink: K,
    writer: Option<&'a mut LogWriter>,
    log: SessionLog,
    clock: u64,
    seq: BTreeMap<&'static str, u64>,
    timers: BTreeMap<StepId, u64>,
    pending: BinaryHeap<Reverse<(u64, u64, PendingEnvelope)>>,
    pending_counter: u64,
}

/// Heap payload ordered only by its position key.
struct PendingEnvelope(Envelope);

impl PartialEq for PendingEnvelope {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for PendingEnvelope {}
impl PartialOrd for PendingEnvelope {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PendingEnvelope {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

impl<K: EffectSink> Loop<'_, K> {
    fn next_seq(&mut self, src: &'static str) -> u64 {
        let n = self.seq.entry(src).or_insert(0);
        let s = *n;
        *n += 1;
        s
    }

    fn record(&mut self, env: &Envelope) -> Result<(), ConductorError> {
        if let Some(w) = self.writer.as_deref_mut() {
            w.append(env)?;
        }
        self.log.entries.push(env.clone());
        Ok(())
    }

    /// Logs and publishes an envelope produced by the loop.
    fn emit(&mut self, env: Envelope) -> Result<(), ConductorError> {
        self.record(&env)?;
        for reply in self.sink.deliver(&env) {
            self.pending_counter += 1;
            self.pending
                .push(Reverse((reply.ts_ms, self.pending_counter, PendingEnvelope(reply))));
        }
        Ok(())
    }

    fn apply(&mut self, effects: Vec<Effect>) -> Result<(), ConductorError> {
        for effect in effects {
            match &effect {
                Effect::StartTimer { step_id, threshold_sec } => {
                    let due = self.clock + (threshold_sec * 1000.0).round().max(0.0) as u64;
                    self.timers.insert(*step_id, due);
                }
                Effect::CancelTimer { step_id } => {
                    self.timers.remove(step_id);
                }
                _ => {}
            }
            let seq = self.next_seq(CONDUCTOR_SRC);
            let env = effect_to_envelope(&effect, seq, self.clock);
            self.emit(env)?;
        }
        Ok(())
    }

    fn next_deadline(&self) -> Option<u64> {
        let t = self.timers.values().min().copied();
        let p = self.pending.peek().map(|Reverse((ts, _, _))| *ts);
        match (t, p) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// Runs one session to completion. Every envelope seen or produced is
/// appended to the returned log (and to `writer`, line by line, if given).
pub fn run_session<E: EventSource, K: EffectSink>(
    mut source: E,
    sink: K,
    task: Arc<TaskGraph>,
    condition: Condition,
    config: ConductorConfig,
    meta: SessionMeta,
    writer: Option<&mut LogWriter>,
) -> Result<SessionLog, ConductorError> {
    let start_ms = source.now_ms();
    let mut lp = Loop {
        sink,
        writer,
        log: SessionLog::new(meta.session_id.clone()),
        clock: start_ms,
        seq: BTreeMap::new(),
        timers: BTreeMap::new(),
        pending: BinaryHeap::new(),
        pending_counter: 0,
    };

    let start = StartInfo {
        session_id: meta.session_id.clone(),
        task: task.to_def(),
        condition,
        config: config.clone(),
        participant: meta.participant.clone(),
        attempt_index: meta.attempt_index,
    };
    let seq = lp.next_seq(SESSION_SRC);
    lp.emit(event_to_envelope(&Event::Start(Box::new(start)), Topic::Ui, SESSION_SRC, seq, start_ms))?;
    let (mut state, effects) = init_session(task, condition, config, meta.session_id.clone(), start_ms)?;
    lp.apply(effects)?;
    tracing::debug!(session = %meta.session_id, %condition, "session started");

    while !state.mode.is_terminal() {
        let pending_due = lp.pending.peek().is_some_and(|Reverse((ts, _, _))| *ts <= lp.clock);
        let input = if pending_due {
            let Reverse((_, _, PendingEnvelope(env))) = lp.pending.pop().unwrap();
            lp.emit(env.clone())?;
            env
        } else if let Some((&step_id, &due)) = lp.timers.iter().find(|(_, due)| **due <= lp.clock) {
            lp.timers.remove(&step_id);
            let seq = lp.next_seq(TIMER_SRC);
            let env = event_to_envelope(&Event::TimerExpired { step_id }, Topic::Timer, TIMER_SRC, seq, due);
            lp.emit(env.clone())?;
            env
        } else {
            match source.poll(lp.next_deadline()) {
                Poll::Input(env) => {
                    lp.record(&env)?;
                    env
                }
                Poll::Deadline => {
                    if let Some(d) = lp.next_deadline() {
                        lp.clock = lp.clock.max(d);
                    }
                    continue;
                }
                Poll::Closed => {
                    let seq = lp.next_seq(SESSION_SRC);
                    let env = Envelope::new(Topic::Log, SESSION_SRC, "source_closed", seq, lp.clock, Map::new());
                    lp.emit(env)?;
                    let (next, effects) = interrupt(&state, lp.clock);
                    state = next;
                    lp.apply(effects)?;
                    tracing::info!(session = %meta.session_id, "input closed; session interrupted");
                    break;
                }
            }
        };
        lp.clock = lp.clock.max(input.ts_ms);
        match event_from_envelope(&input) {
            Some(Ok(event)) => {
                let (next, effects) = handle_event(&state, &event, lp.clock)?;
                state = next;
                lp.apply(effects)?;
            }
            Some(Err(e)) => tracing::warn!(src = %input.src, kind = %input.kind, "ignoring malformed event: {e}"),
            None => {}
        }
    }
    tracing::debug!(session = %meta.session_id, mode = ?state.mode, entries = lp.log.entries.len(), "session ended");
    Ok(lp.log)
}
