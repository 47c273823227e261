//! Contracts for the peripheral services (step classifier, scene-description
//! aggregation, language service, speech) and their deterministic mocks.
//!
//! Real models run as external processes speaking the wire protocol; only
//! the mocks live here.

mod classifier;
mod language;
mod mock;
mod scene;
mod speech;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::taskmodel::StepId;

pub use classifier::{uniform_distribution, ReplayClassifier, ReplayMockConfig, StepClassifier, StepTracker};
pub use language::{rephrase_instruction, IntentService, KeywordIntentMock, RephraseStyle, KEYWORD_TABLE};
pub use mock::{estimate_tokens, CallUsage, MockServices, LLM_SRC};
pub use scene::{build_scene_prompt, parse_scene_response, SceneStep};
pub use speech::{load_transcript, transcript_envelopes, TranscriptLine, TtsEcho, ASR_SRC, TTS_SRC};

/// Intent categorization result: `{"intent": ..., "argument": ...}`.
pub type IntentResult = crate::conductor::Intent;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("empty text")]
    EmptyText,
    #[error("invalid region: {0}")]
    InvalidRegion(String),
}

/// A video frame by reference; no pixel data passes through the core.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub session_id: String,
    /// Milliseconds since the start of the recording.
    pub ts_ms: u64,
    pub media_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCaption {
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub caption: String,
}

impl RegionCaption {
    pub fn new(bbox: [f64; 4], caption: impl Into<String>) -> Result<Self, ServiceError> {
        let [x, y, w, h] = bbox;
        if !bbox.iter().all(|v| v.is_finite() && *v >= 0.0) || w <= 0.0 || h <= 0.0 {
            return Err(ServiceError::InvalidRegion(format!("bbox {x},{y},{w},{h}")));
        }
        Ok(RegionCaption {
            bbox,
            caption: caption.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPrediction {
    pub ts_ms: u64,
    pub distribution: BTreeMap<StepId, f64>,
}

impl StepPrediction {
    /// Most probable step; ties go to the lowest id.
    pub fn argmax(&self) -> Option<(StepId, f64)> {
        self.distribution
            .iter()
            .fold(None, |best: Option<(StepId, f64)>, (s, p)| match best {
                Some((_, bp)) if bp >= *p => best,
                _ => Some((*s, *p)),
            })
    }
}
