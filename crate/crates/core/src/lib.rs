//! Core of the taskpilot guidance engine.
//!
//! A [`conductor`] state machine walks a [`taskmodel::TaskGraph`] and reacts to
//! perception, speech and timer events carried over the [`msgbus`]. Every
//! envelope on the bus is written to an append-only JSONL session log, which
//! [`annotations`] and [`evalkit`] turn into success/error/alignment metrics.
//! [`simharness`] produces synthetic sessions that exercise the whole path.

pub mod annotations;
pub mod conductor;
pub mod evalkit;
pub mod msgbus;
pub mod services;
pub mod simharness;
pub mod taskmodel;

pub use conductor::Condition;
pub use taskmodel::{StepId, TaskDef, TaskGraph};
