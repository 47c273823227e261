//! Re-derives the conductor's output from the inputs recorded in a session
//! log and compares it byte for byte with what was recorded.

use std::sync::Arc;

use super::codec::{effect_to_envelope, event_from_envelope, CONDUCTOR_SRC, SESSION_SRC};
use super::machine::{handle_event, init_session, interrupt, ConductorError};
use super::model::{Effect, Event};
use crate::msgbus::{Envelope, SessionLog};
use crate::taskmodel::build_task_graph;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("log has no session start envelope")]
    MissingStart,
    #[error("unreadable session start: {0}")]
    BadStart(String),
    #[error(transparent)]
    Conductor(#[from] ConductorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    /// Index among conductor envelopes.
    pub index: usize,
    pub recorded: Option<String>,
    pub recomputed: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub session_id: String,
    pub events_replayed: usize,
    pub effects_compared: usize,
    pub mismatch: Option<Mismatch>,
}

impl ReplayReport {
    pub fn matches(&self) -> bool {
        self.mismatch.is_none()
    }
}

pub fn replay_log(log: &SessionLog) -> Result<ReplayReport, ReplayError> {
    let start_pos = log
        .entries
        .iter()
        .position(|e| e.src == SESSION_SRC && e.kind == "start")
        .ok_or(ReplayError::MissingStart)?;
    let start_env = &log.entries[start_pos];
    let info = match event_from_envelope(start_env) {
        Some(Ok(Event::Start(info))) => info,
        Some(Err(e)) => return Err(ReplayError::BadStart(e)),
        _ => return Err(ReplayError::BadStart("not a start event".into())),
    };
    let graph = build_task_graph(&info.task).map_err(ConductorError::from)?;

    let mut clock = start_env.ts_ms;
    let mut recomputed: Vec<Envelope> = Vec::new();
    let push = |effects: Vec<Effect>, clock: u64, out: &mut Vec<Envelope>| {
        for fx in effects {
            let seq = out.len() as u64;
            out.push(effect_to_envelope(&fx, seq, clock));
        }
    };
    let (mut state, fx) = init_session(
        Arc::new(graph),
        info.condition,
        info.config.clone(),
        info.session_id.clone(),
        clock,
    )?;
    push(fx, clock, &mut recomputed);

    let mut events_replayed = 0;
    for env in &log.entries[start_pos + 1..] {
        if env.src == CONDUCTOR_SRC || state.mode.is_terminal() {
            continue;
        }
        if env.src == SESSION_SRC && env.kind == "source_closed" {
            let (next, fx) = interrupt(&state, clock);
            state = next;
            push(fx, clock, &mut recomputed);
            continue;
        }
        clock = clock.max(env.ts_ms);
        if let Some(Ok(event)) = event_from_envelope(env) {
            let (next, fx) = handle_event(&state, &event, clock)?;
            state = next;
            events_replayed += 1;
            push(fx, clock, &mut recomputed);
        }
    }

    let recorded: Vec<&Envelope> = log.entries.iter().filter(|e| e.src == CONDUCTOR_SRC).collect();
    let n = recorded.len().max(recomputed.len());
    let mismatch = (0..n).find_map(|i| {
        let a = recorded.get(i).map(|e| e.to_canonical_json());
        let b = recomputed.get(i).map(|e| e.to_canonical_json());
        (a != b).then_some(Mismatch {
            index: i,
            recorded: a,
            recomputed: b,
        })
    });
    Ok(ReplayReport {
        session_id: log.session_id.clone(),
        events_replayed,
        effects_compared: recorded.len().min(recomputed.len()),
        mismatch,
    })
}
