use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const PROTOCOL_VERSION: u32 = 1;

/// The closed set of bus topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topic {
    Perception,
    Asr,
    Tts,
    Ui,
    Conductor,
    Timer,
    Log,
}

impl Topic {
    pub const ALL: [Topic; 7] = [
        Topic::Perception,
        Topic::Asr,
        Topic::Tts,
        Topic::Ui,
        Topic::Conductor,
        Topic::Timer,
        Topic::Log,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::Perception => "perception",
            Topic::Asr => "asr",
            Topic::Tts => "tts",
            Topic::Ui => "ui",
            Topic::Conductor => "conductor",
            Topic::Timer => "timer",
            Topic::Log => "log",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topic::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown topic `{s}`"))
    }
}

/// A timestamped, sequenced bus message.
///
/// Field order here is the canonical JSON key order; `data` is a JSON object
/// whose keys serialize sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub v: u32,
    /// Monotone per `src` within a session.
    pub seq: u64,
    pub ts_ms: u64,
    pub topic: Topic,
    pub src: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub data: Map<String, Value>,
}

impl Envelope {
    pub fn new(
        topic: Topic,
        src: impl Into<String>,
        kind: impl Into<String>,
        seq: u64,
        ts_ms: u64,
        data: Map<String, Value>,
    ) -> Self {
        Envelope {
            v: PROTOCOL_VERSION,
            seq,
            ts_ms,
            topic,
            src: src.into(),
            kind: kind.into(),
            data,
        }
    }

    /// Compact JSON with keys in canonical order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("envelopes always serialize")
    }

    /// Parses and validates one envelope (schema and protocol version).
    pub fn from_json(text: &str) -> Result<Self, String> {
        let env: Envelope = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if env.v != PROTOCOL_VERSION {
            return Err(format!("unsupported protocol version {}", env.v));
        }
        Ok(env)
    }
}
