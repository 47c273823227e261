//! The session state machine.
//!
//! [`init_session`] and [`handle_event`] are pure: given the same state, event
//! and `now_ms` they return the same next state and effects, which is what
//! makes recorded sessions replayable. [`run_session`] wraps them in an event
//! loop that owns timers and the session log.

mod codec;
mod machine;
mod model;
mod replay;
mod session;

pub use codec::{
    effect_from_envelope, effect_to_envelope, event_from_envelope, event_to_envelope, CONDUCTOR_SRC, SESSION_SRC, TIMER_SRC,
};
pub use machine::{handle_event, init_session, interrupt, ConductorError};
pub use model::{
    AlertKind, Condition, ConductorConfig, ConductorState, ContextSummary, ConversationReason, Effect, Event,
    Intent, Mode, Outcome, StartInfo,
};
pub use replay::{replay_log, Mismatch, ReplayError, ReplayReport};
pub use session::{
    run_session, BusSink, EffectSink, EventSource, LiveSource, NullSink, Poll, ScriptedSource, SessionMeta, wall_clock_ms,
};
