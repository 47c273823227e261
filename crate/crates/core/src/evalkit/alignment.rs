//! Step-guidance alignment and perception accuracy, both scored against
//! annotated step segments.

use serde::Serialize;

use super::EvalError;
use crate::annotations::{SessionAnnotation, StepSegment};
use crate::conductor::{effect_from_envelope, event_from_envelope, Effect, Event, CONDUCTOR_SRC};
use crate::msgbus::SessionLog;
use crate::services::StepPrediction;
use crate::taskmodel::StepId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AlignmentStats {
    pub aligned: u64,
    pub total: u64,
}

impl AlignmentStats {
    pub fn percentage(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.aligned as f64 / self.total as f64
        }
    }

    pub fn merge(self, other: AlignmentStats) -> AlignmentStats {
        AlignmentStats {
            aligned: self.aligned + other.aligned,
            total: self.total + other.total,
        }
    }
}

fn sorted_segments(ann: &SessionAnnotation) -> Vec<StepSegment> {
    let mut segs = ann.steps.clone();
    segs.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
    segs
}

/// The step the user is on at `t`: the segment containing it, else the next
/// segment to start, else (after the last segment) the last one.
fn step_at(segs: &[StepSegment], t: f64) -> Option<StepId> {
    segs.iter()
        .find(|s| s.start_sec <= t && t < s.end_sec)
        .or_else(|| segs.iter().find(|s| s.start_sec > t))
        .or_else(|| segs.last())
        .map(|s| s.step)
}

/// Share of step-tagged Display/Say effects whose step matches what the
/// user is actually doing at that moment. Times are seconds since the
/// session start envelope.
pub fn step_guidance_alignment(log: &SessionLog, ann: &SessionAnnotation) -> Result<AlignmentStats, EvalError> {
    let start_ts = log
        .entries
        .iter()
        .find(|e| matches!(event_from_envelope(e), Some(Ok(Event::Start(_)))))
        .map(|e| e.ts_ms)
        .unwrap_or_else(|| log.entries.first().map_or(0, |e| e.ts_ms));
    let segs = sorted_segments(ann);
    let mut stats = AlignmentStats::default();
    for env in log.entries.iter().filter(|e| e.src == CONDUCTOR_SRC) {
        let step = match effect_from_envelope(env) {
            Ok(Effect::Display { step_id: Some(s), .. }) | Ok(Effect::Say { step_id: Some(s), .. }) => s,
            _ => continue,
        };
        let t = env.ts_ms.saturating_sub(start_ts) as f64 / 1000.0;
        stats.total += 1;
        if step_at(&segs, t) == Some(step) {
            stats.aligned += 1;
        }
    }
    if stats.total == 0 {
        return Err(EvalError::NoInstructions);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyStats {
    pub task: String,
    pub correct: u64,
    pub total: u64,
}

impl AccuracyStats {
    pub fn percentage(&self) -> f64 {
        100.0 * self.correct as f64 / self.total as f64
    }
}

/// Frame-level accuracy of argmax predictions against the annotated
/// segments; frames in gaps are not scored.
pub fn perception_accuracy(predictions: &[StepPrediction], ann: &SessionAnnotation) -> Result<AccuracyStats, EvalError> {
    let segs = sorted_segments(ann);
    let (mut correct, mut total) = (0, 0);
    for p in predictions {
        let t = p.ts_ms as f64 / 1000.0;
        let Some(seg) = segs.iter().find(|s| s.start_sec <= t && t < s.end_sec) else {
            continue;
        };
        total += 1;
        if p.argmax().map(|(s, _)| s) == Some(seg.step) {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::EmptyGroup("no frames inside annotated segments".into()));
    }
    Ok(AccuracyStats {
        task: ann.task.clone(),
        correct,
        total,
    })
}
