//! Speech mocks: scripted transcripts stand in for ASR, and TTS echoes the
//! requested text back as a spoken notice.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ServiceError;
use crate::conductor::{event_to_envelope, Event};
use crate::msgbus::{Envelope, Topic};

pub const ASR_SRC: &str = "asr";
pub const TTS_SRC: &str = "tts";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub ts_ms: u64,
    pub text: String,
}

/// Reads a JSONL transcript script; lines come back sorted by time (stable
/// for equal timestamps).
pub fn load_transcript(path: impl AsRef<Path>) -> Result<Vec<TranscriptLine>, ServiceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::Config(format!("transcript {}: {e}", path.display())))?;
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: TranscriptLine = serde_json::from_str(line)
            .map_err(|e| ServiceError::Config(format!("transcript {} line {}: {e}", path.display(), i + 1)))?;
        lines.push(l);
    }
    lines.sort_by_key(|l| l.ts_ms);
    Ok(lines)
}

/// One `utterance` envelope per transcript line, at its scripted time.
pub fn transcript_envelopes(lines: &[TranscriptLine]) -> Vec<Envelope> {
    let mut sorted: Vec<&TranscriptLine> = lines.iter().collect();
    sorted.sort_by_key(|l| l.ts_ms);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            event_to_envelope(
                &Event::Utterance { text: l.text.clone() },
                Topic::Asr,
                ASR_SRC,
                i as u64,
                l.ts_ms,
            )
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct TtsEcho {
    seq: u64,
}

impl TtsEcho {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn synthesize(&mut self, text: &str, ts_ms: u64) -> Result<Envelope, ServiceError> {
        if text.trim().is_empty() {
            tracing::warn!("tts request with empty text rejected");
            return Err(ServiceError::EmptyText);
        }
        let mut data = Map::new();
        data.insert("text".into(), Value::String(text.to_string()));
        let env = Envelope::new(Topic::Tts, TTS_SRC, "spoken_notice", self.seq, ts_ms, data);
        self.seq += 1;
        Ok(env)
    }
}
