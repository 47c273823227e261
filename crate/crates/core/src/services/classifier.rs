use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FrameRef, ServiceError, StepPrediction};
use crate::annotations::{load_annotation, SessionAnnotation, StepSegment};
use crate::taskmodel::{StepId, TaskGraph};

pub trait StepClassifier {
    fn classify_frame(&self, frame: &FrameRef, task: &TaskGraph) -> Result<StepPrediction, ServiceError>;
}

pub fn uniform_distribution(task: &TaskGraph) -> BTreeMap<StepId, f64> {
    let p = 1.0 / task.len() as f64;
    task.step_ids().map(|s| (s, p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMockConfig {
    pub annotation_file: PathBuf,
    #[serde(default)]
    pub noise_epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Classifier that replays ground-truth step segments. With probability
/// `1 - noise_epsilon` the most likely step is the annotated one, otherwise
/// a uniformly chosen other step. Every frame draws from its own generator,
/// seeded from `(seed, session, ts)`, so results do not depend on call order.
#[derive(Debug, Clone)]
pub struct ReplayClassifier {
    task: String,
    segments: Vec<StepSegment>,
    noise_epsilon: f64,
    seed: u64,
}

impl ReplayClassifier {
    pub fn new(ann: &SessionAnnotation, noise_epsilon: f64, seed: u64) -> Result<Self, ServiceError> {
        if !(0.0..=1.0).contains(&noise_epsilon) {
            return Err(ServiceError::Config(format!("noise_epsilon {noise_epsilon} outside [0, 1]")));
        }
        let mut segments = ann.steps.clone();
        segments.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
        Ok(ReplayClassifier {
            task: ann.task.clone(),
            segments,
            noise_epsilon,
            seed,
        })
    }

    pub fn from_config(config: &ReplayMockConfig) -> Result<Self, ServiceError> {
        let ann = load_annotation(&config.annotation_file)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", config.annotation_file.display())))?;
        Self::new(&ann, config.noise_epsilon, config.seed)
    }

    /// Annotated step covering `ts_ms`; segments are half-open.
    pub fn ground_truth(&self, ts_ms: u64) -> Option<StepId> {
        let t = ts_ms as f64 / 1000.0;
        self.segments
            .iter()
            .find(|s| s.start_sec <= t && t < s.end_sec)
            .map(|s| s.step)
    }

    fn frame_rng(&self, frame: &FrameRef) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(frame.session_id.as_bytes());
        h.update([0]);
        h.update(frame.ts_ms.to_le_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

impl StepClassifier for ReplayClassifier {
    fn classify_frame(&self, frame: &FrameRef, task: &TaskGraph) -> Result<StepPrediction, ServiceError> {
        if task.task_id() != self.task {
            return Err(ServiceError::UnknownTask(task.task_id().to_string()));
        }
        let truth = self.ground_truth(frame.ts_ms).filter(|s| task.contains(*s));
        let distribution = match truth {
            None => uniform_distribution(task),
            Some(_) if task.len() == 1 => uniform_distribution(task),
            Some(truth) => {
                let mut rng = self.frame_rng(frame);
                let others: Vec<StepId> = task.step_ids().filter(|s| *s != truth).collect();
                let predicted = if rng.random::<f64>() < self.noise_epsilon {
                    others[rng.random_range(0..others.len())]
                } else {
                    truth
                };
                let mass: f64 = rng.random_range(0.55..=0.95);
                let rest = (1.0 - mass) / others.len() as f64;
                task.step_ids()
                    .map(|s| (s, if s == predicted { mass } else { rest }))
                    .collect()
            }
        };
        Ok(StepPrediction {
            ts_ms: frame.ts_ms,
            distribution,
        })
    }
}

/// Turns a stream of frame predictions into step observations: a step is
/// reported once its label has been the argmax for `stable_frames`
/// consecutive frames. Uniform (uninformative) frames reset the count.
#[derive(Debug, Clone)]
pub struct StepTracker {
    stable_frames: usize,
    candidate: Option<(StepId, usize)>,
    last_reported: Option<StepId>,
}

impl StepTracker {
    pub fn new(stable_frames: usize) -> Self {
        StepTracker {
            stable_frames: stable_frames.max(1),
            candidate: None,
            last_reported: None,
        }
    }

    pub fn push(&mut self, pred: &StepPrediction) -> Option<(StepId, f64)> {
        let n = pred.distribution.len();
        let (step, p) = pred.argmax()?;
        if n > 1 && p <= 1.0 / n as f64 + 1e-12 {
            self.candidate = None;
            return None;
        }
        let count = match self.candidate {
            Some((s, c)) if s == step => c + 1,
            _ => 1,
        };
        self.candidate = Some((step, count));
        if count == self.stable_frames && self.last_reported != Some(step) {
            self.last_reported = Some(step);
            return Some((step, p));
        }
        None
    }
}
