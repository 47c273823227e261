//! Envelopes, wire framing, topic pub/sub, the shared blackboard and the
//! JSONL session log.
//!
//! Every component talks through [`Envelope`]s. On the wire an envelope is a
//! 4-byte big-endian length followed by its canonical JSON; in a session log
//! it is one canonical JSON line.

mod blackboard;
mod bus;
mod envelope;
mod frame;
mod log;
mod tcp;

pub use blackboard::Blackboard;
pub use bus::{Bus, Disconnected, Subscription, TopicFilter};
pub use envelope::{Envelope, Topic, PROTOCOL_VERSION};
pub use frame::{decode_frame, encode_frame, FrameDecoder, FrameError, MAX_FRAME_BODY};
pub use log::{append_log, read_log, write_log, LogError, LogRead, LogWarning, LogWriter, SessionLog};
pub use tcp::{bridge_tcp, BridgeHandle};
