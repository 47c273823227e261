//! Per-session ground-truth annotations: parsing, validation, derived
//! fields, ego/exo clock sync, and drafts built from conductor logs.
//!
//! Mistake entries accept the short legacy form `{"<step>": "description"}`
//! (category `other`, not critical) alongside the full object form.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::conductor::{effect_from_envelope, event_from_envelope, AlertKind, Condition, Effect, Event};
use crate::msgbus::SessionLog;
use crate::taskmodel::{StepId, TaskGraph};

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at `{field}`: {detail}")]
    Schema { field: String, detail: String },
    #[error("invalid annotation: {0}")]
    Validation(String),
    #[error("step {0} is not part of the task")]
    UnknownStep(StepId),
    #[error("annotation has no sync offset")]
    NoSync,
    #[error("log has no session start")]
    IncompleteLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MistakeCategory {
    WrongAction,
    WrongObject,
    WrongState,
    Other,
}

impl MistakeCategory {
    pub const ALL: [MistakeCategory; 4] = [
        MistakeCategory::WrongAction,
        MistakeCategory::WrongObject,
        MistakeCategory::WrongState,
        MistakeCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MistakeCategory::WrongAction => "wrong_action",
            MistakeCategory::WrongObject => "wrong_object",
            MistakeCategory::WrongState => "wrong_state",
            MistakeCategory::Other => "other",
        }
    }
}

impl fmt::Display for MistakeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_sec: f64,
    pub end_sec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSegment {
    pub step: StepId,
    pub start_sec: f64,
    pub end_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMistake {
    pub step: StepId,
    pub category: MistakeCategory,
    pub critical: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAnnotation {
    pub session_id: String,
    pub participant: String,
    pub task: String,
    pub condition: Condition,
    pub attempt_index: u32,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub duration: Interval,
    pub steps: Vec<StepSegment>,
    pub out_of_order: bool,
    pub step_mistakes: Vec<StepMistake>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync_offset_sec: Option<f64>,
}

const REQUIRED: [&str; 10] = [
    "session_id",
    "participant",
    "task",
    "condition",
    "attempt_index",
    "success",
    "duration",
    "steps",
    "out_of_order",
    "step_mistakes",
];

fn schema(field: impl Into<String>, detail: impl Into<String>) -> AnnotationError {
    AnnotationError::Schema {
        field: field.into(),
        detail: detail.into(),
    }
}

fn require(obj: &Map<String, Value>, keys: &[&str], prefix: &str) -> Result<(), AnnotationError> {
    match keys.iter().find(|k| !obj.contains_key(**k)) {
        Some(k) => Err(schema(format!("{prefix}{k}"), "missing field")),
        None => Ok(()),
    }
}

fn legacy_step_key(key: &str) -> Option<StepId> {
    let k = key.trim();
    let k = k
        .strip_prefix("step")
        .or_else(|| k.strip_prefix("Step"))
        .unwrap_or(k)
        .trim_start()
        .trim_start_matches('#')
        .trim();
    k.parse().ok().map(StepId)
}

fn legacy_mistake(step: StepId, description: &Value, field: &str) -> Result<Value, AnnotationError> {
    let Value::String(d) = description else {
        return Err(schema(field, "legacy mistake description must be a string"));
    };
    Ok(serde_json::json!({
        "step": step,
        "category": "other",
        "critical": false,
        "description": d,
    }))
}

/// Rewrites legacy mistake entries into the full form.
fn normalize_mistakes(value: &Value) -> Result<Value, AnnotationError> {
    let mut out = Vec::new();
    match value {
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                let field = format!("step_mistakes[{i}]");
                let Value::Object(obj) = item else {
                    return Err(schema(field, "expected an object"));
                };
                if obj.contains_key("step") {
                    require(obj, &["step", "category", "critical", "description"], &format!("{field}."))?;
                    out.push(item.clone());
                } else if obj.len() == 1 {
                    let (k, v) = obj.iter().next().unwrap();
                    let step = legacy_step_key(k).ok_or_else(|| schema(&field, format!("unrecognized step key `{k}`")))?;
                    out.push(legacy_mistake(step, v, &field)?);
                } else {
                    return Err(schema(format!("{field}.step"), "missing field"));
                }
            }
        }
        Value::Object(obj) => {
            for (k, v) in obj {
                let field = format!("step_mistakes.{k}");
                let step = legacy_step_key(k).ok_or_else(|| schema(&field, "unrecognized step key"))?;
                out.push(legacy_mistake(step, v, &field)?);
            }
        }
        _ => return Err(schema("step_mistakes", "expected a list or an object")),
    }
    Ok(Value::Array(out))
}

/// Parses and validates one annotation document.
pub fn parse_annotation(json: &str) -> Result<SessionAnnotation, AnnotationError> {
    let mut doc: Value = serde_json::from_str(json).map_err(|e| schema("$", e.to_string()))?;
    let Value::Object(obj) = &mut doc else {
        return Err(schema("$", "expected a JSON object"));
    };
    require(obj, &REQUIRED, "")?;
    match &obj["duration"] {
        Value::Object(d) => require(d, &["start_sec", "end_sec"], "duration.")?,
        _ => return Err(schema("duration", "expected an object")),
    }
    match &obj["steps"] {
        Value::Array(steps) => {
            for (i, s) in steps.iter().enumerate() {
                let Value::Object(s) = s else {
                    return Err(schema(format!("steps[{i}]"), "expected an object"));
                };
                require(s, &["step", "start_sec", "end_sec"], &format!("steps[{i}]."))?;
            }
        }
        _ => return Err(schema("steps", "expected a list")),
    }
    let mistakes = normalize_mistakes(&obj["step_mistakes"])?;
    obj.insert("step_mistakes".into(), mistakes);

    let ann: SessionAnnotation = serde_json::from_value(doc).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("missing field") || msg.starts_with("unknown"))
            .unwrap_or("$")
            .to_string();
        schema(field, msg)
    })?;
    ann.validate()?;
    Ok(ann)
}

pub fn load_annotation(path: impl AsRef<Path>) -> Result<SessionAnnotation, AnnotationError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| AnnotationError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_annotation(&text)
}

fn invalid(msg: impl Into<String>) -> AnnotationError {
    AnnotationError::Validation(msg.into())
}

impl SessionAnnotation {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        if self.session_id.is_empty() {
            return Err(invalid("session_id is empty"));
        }
        if self.attempt_index < 1 {
            return Err(invalid("attempt_index must be at least 1"));
        }
        let d = self.duration;
        if !(d.start_sec.is_finite() && d.end_sec.is_finite()) || d.start_sec < 0.0 {
            return Err(invalid("duration.start_sec must be finite and non-negative"));
        }
        if d.end_sec <= d.start_sec {
            return Err(invalid(format!(
                "duration ends at {} before it starts at {}",
                d.end_sec, d.start_sec
            )));
        }
        let mut sorted: Vec<&StepSegment> = self.steps.iter().collect();
        for s in &sorted {
            if !(s.start_sec.is_finite() && s.end_sec.is_finite()) || s.start_sec < 0.0 {
                return Err(invalid(format!("step {} has a bad start time", s.step)));
            }
            if s.end_sec <= s.start_sec {
                return Err(invalid(format!("step {} ends before it starts", s.step)));
            }
        }
        sorted.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
        for w in sorted.windows(2) {
            if w[1].start_sec < w[0].end_sec {
                return Err(invalid(format!(
                    "segments for steps {} and {} overlap",
                    w[0].step, w[1].step
                )));
            }
        }
        if self.success && self.step_mistakes.iter().any(|m| m.critical) {
            return Err(invalid("a session with a critical mistake cannot be successful"));
        }
        if let Some(off) = self.sync_offset_sec {
            if !off.is_finite() {
                return Err(invalid("sync_offset_sec must be finite"));
            }
        }
        Ok(())
    }

    /// Mistakes whose step has no annotated segment.
    pub fn dangling_mistakes(&self) -> Vec<StepId> {
        let annotated: BTreeSet<StepId> = self.steps.iter().map(|s| s.step).collect();
        self.step_mistakes
            .iter()
            .map(|m| m.step)
            .filter(|s| !annotated.contains(s))
            .collect()
    }

    pub fn duration_sec(&self) -> f64 {
        self.duration.end_sec - self.duration.start_sec
    }

    /// Step ids ordered by segment start.
    pub fn observed_sequence(&self) -> Vec<StepId> {
        let mut segs = self.steps.clone();
        segs.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
        segs.into_iter().map(|s| s.step).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotations serialize")
    }
}

/// Whether the annotated step order breaks the task's prerequisites. A step
/// started before all of its prerequisites were seen counts, including the
/// case where a prerequisite was skipped altogether.
pub fn derive_out_of_order(ann: &SessionAnnotation, graph: &TaskGraph) -> Result<bool, AnnotationError> {
    let seq = ann.observed_sequence();
    if let Some(s) = seq.iter().find(|s| !graph.contains(**s)) {
        return Err(AnnotationError::UnknownStep(*s));
    }
    let valid = graph
        .is_valid_execution(&seq)
        .map_err(|_| AnnotationError::UnknownStep(seq[0]))?;
    Ok(!valid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncedTime {
    pub sec: f64,
    /// The mapped time falls before the start of the target recording.
    pub out_of_range: bool,
}

/// Egocentric to exocentric time: `exo = ego + offset`.
pub fn map_ego_to_exo(t_ego_sec: f64, ann: &SessionAnnotation) -> Result<SyncedTime, AnnotationError> {
    let off = ann.sync_offset_sec.ok_or(AnnotationError::NoSync)?;
    Ok(synced(t_ego_sec + off, &ann.session_id))
}

pub fn map_exo_to_ego(t_exo_sec: f64, ann: &SessionAnnotation) -> Result<SyncedTime, AnnotationError> {
    let off = ann.sync_offset_sec.ok_or(AnnotationError::NoSync)?;
    Ok(synced(t_exo_sec - off, &ann.session_id))
}

fn synced(sec: f64, session: &str) -> SyncedTime {
    let out_of_range = sec < 0.0;
    if out_of_range {
        tracing::warn!(session, sec, "synced time falls before the recording starts");
    }
    SyncedTime { sec, out_of_range }
}

/// Annotation skeleton derived from a conductor log. Success and mistakes
/// are left for human annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftAnnotation {
    pub session_id: String,
    pub participant: Option<String>,
    pub task: String,
    pub condition: Condition,
    pub attempt_index: Option<u32>,
    pub success: Option<bool>,
    pub duration: Interval,
    pub steps: Vec<StepSegment>,
    pub out_of_order: bool,
    pub step_mistakes: Option<Vec<StepMistake>>,
}

impl DraftAnnotation {
    /// Completes the draft with the human-judged fields.
    pub fn finalize(self, success: bool, step_mistakes: Vec<StepMistake>) -> Result<SessionAnnotation, AnnotationError> {
        let ann = SessionAnnotation {
            session_id: self.session_id,
            participant: self.participant.unwrap_or_default(),
            task: self.task,
            condition: self.condition,
            attempt_index: self.attempt_index.unwrap_or(1),
            success,
            comment: None,
            duration: self.duration,
            steps: self.steps,
            out_of_order: self.out_of_order,
            step_mistakes,
            sync_offset_sec: None,
        };
        ann.validate()?;
        Ok(ann)
    }
}

fn rel_sec(ts: u64, start: u64) -> f64 {
    ts.saturating_sub(start) as f64 / 1000.0
}

/// Times are seconds since the session start envelope. Each step segment
/// runs from the previous completion (or the session start) to its own.
pub fn annotation_from_log(log: &SessionLog, graph: &TaskGraph) -> Result<DraftAnnotation, AnnotationError> {
    let (start_ts, info) = log
        .entries
        .iter()
        .find_map(|e| match event_from_envelope(e) {
            Some(Ok(Event::Start(info))) => Some((e.ts_ms, info)),
            _ => None,
        })
        .ok_or(AnnotationError::IncompleteLog)?;

    let mut steps = Vec::new();
    let mut prev = start_ts;
    let mut out_of_order = false;
    let mut end_ts = None;
    for env in &log.entries {
        if env.src != crate::conductor::CONDUCTOR_SRC {
            continue;
        }
        match effect_from_envelope(env) {
            Ok(Effect::StepCompleted { step_id }) => {
                if !graph.contains(step_id) {
                    return Err(AnnotationError::UnknownStep(step_id));
                }
                steps.push(StepSegment {
                    step: step_id,
                    start_sec: rel_sec(prev, start_ts),
                    end_sec: rel_sec(env.ts_ms, start_ts),
                });
                prev = env.ts_ms;
            }
            Ok(Effect::Alert {
                kind: AlertKind::OutOfOrder,
            }) => out_of_order = true,
            Ok(Effect::EndSession { .. }) => end_ts = Some(env.ts_ms),
            _ => {}
        }
    }
    let end_ts = end_ts.unwrap_or_else(|| log.entries.iter().map(|e| e.ts_ms).max().unwrap_or(start_ts));
    Ok(DraftAnnotation {
        session_id: info.session_id.clone(),
        participant: info.participant.clone(),
        task: info.task.task_id.clone(),
        condition: info.condition,
        attempt_index: info.attempt_index,
        success: None,
        duration: Interval {
            start_sec: 0.0,
            end_sec: rel_sec(end_ts, start_ts),
        },
        steps,
        out_of_order,
        step_mistakes: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskmodel::test_graphs::{chain, diamond};
    use proptest::prelude::*;

    const FIXTURE: &str = r#"{
        "session_id": "p03_tea_2",
        "participant": "p03",
        "task": "tea",
        "condition": "AI",
        "attempt_index": 2,
        "success": true,
        "comment": "hesitated at the kettle",
        "duration": {"start_sec": 1.5, "end_sec": 190.25},
        "steps": [
            {"step": 1, "start_sec": 1.5, "end_sec": 20.0},
            {"step": 2, "start_sec": 20.0, "end_sec": 41.0},
            {"step": 3, "start_sec": 41.0, "end_sec": 60.5},
            {"step": 4, "start_sec": 60.5, "end_sec": 170.0},
            {"step": 5, "start_sec": 170.0, "end_sec": 190.25}
        ],
        "out_of_order": false,
        "step_mistakes": [
            {"step": 2, "category": "wrong_object", "critical": false, "description": "picked up the sugar jar"}
        ],
        "sync_offset_sec": 2.5
    }"#;

    fn fixture() -> SessionAnnotation {
        parse_annotation(FIXTURE).unwrap()
    }

    fn edit(f: impl FnOnce(&mut Map<String, Value>)) -> String {
        let mut v: Value = serde_json::from_str(FIXTURE).unwrap();
        f(v.as_object_mut().unwrap());
        v.to_string()
    }

    #[test]
    fn parses_complete_fixture() {
        let a = fixture();
        assert_eq!(a.condition, Condition::AI);
        assert_eq!(a.attempt_index, 2);
        assert_eq!(a.steps.len(), 5);
        assert_eq!(a.step_mistakes[0].category, MistakeCategory::WrongObject);
        assert_eq!(a.sync_offset_sec, Some(2.5));
        assert!((a.duration_sec() - 188.75).abs() < 1e-12);
        assert!(a.dangling_mistakes().is_empty());
    }

    #[test]
    fn missing_fields_name_the_field() {
        for field in REQUIRED {
            let doc = edit(|o| {
                o.remove(field);
            });
            match parse_annotation(&doc) {
                Err(AnnotationError::Schema { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
        let doc = edit(|o| {
            o["steps"][1].as_object_mut().unwrap().remove("end_sec");
        });
        assert!(matches!(parse_annotation(&doc), Err(AnnotationError::Schema { field, .. }) if field == "steps[1].end_sec"));
    }

    #[test]
    fn invariant_violations() {
        let reversed = edit(|o| o["duration"] = serde_json::json!({"start_sec": 10.0, "end_sec": 5.0}));
        assert!(matches!(parse_annotation(&reversed), Err(AnnotationError::Validation(_))));
        let critical = edit(|o| o["step_mistakes"][0]["critical"] = Value::Bool(true));
        assert!(matches!(parse_annotation(&critical), Err(AnnotationError::Validation(_))));
        let overlap = edit(|o| o["steps"][2]["start_sec"] = serde_json::json!(30.0));
        assert!(matches!(parse_annotation(&overlap), Err(AnnotationError::Validation(_))));
        let zero = edit(|o| o["attempt_index"] = serde_json::json!(0));
        assert!(matches!(parse_annotation(&zero), Err(AnnotationError::Validation(_))));
        let cond = edit(|o| o["condition"] = serde_json::json!("XX"));
        assert!(matches!(parse_annotation(&cond), Err(AnnotationError::Schema { .. })));
    }

    #[test]
    fn critical_failure_is_consistent() {
        let doc = edit(|o| {
            o["step_mistakes"][0]["critical"] = Value::Bool(true);
            o["success"] = Value::Bool(false);
        });
        assert!(parse_annotation(&doc).is_ok());
    }

    #[test]
    fn legacy_mistakes_import_as_other() {
        let list = edit(|o| o["step_mistakes"] = serde_json::json!([{"3": "poured too early"}]));
        let a = parse_annotation(&list).unwrap();
        assert_eq!(
            a.step_mistakes,
            vec![StepMistake {
                step: StepId(3),
                category: MistakeCategory::Other,
                critical: false,
                description: "poured too early".into()
            }]
        );
        let map = edit(|o| o["step_mistakes"] = serde_json::json!({"step 4": "left the bag in", "#9": "?"}));
        let a = parse_annotation(&map).unwrap();
        assert_eq!(a.step_mistakes.len(), 2);
        assert_eq!(a.dangling_mistakes(), vec![StepId(9)]);
    }

    #[test]
    fn out_of_order_derivation() {
        let mut a = fixture();
        let g = chain(5);
        assert!(!derive_out_of_order(&a, &g).unwrap());
        assert_eq!(derive_out_of_order(&a, &g).unwrap(), a.out_of_order);
        // Swap the start times of steps 2 and 3: observed 1,3,2,4,5.
        a.steps[1].step = StepId(3);
        a.steps[2].step = StepId(2);
        assert!(derive_out_of_order(&a, &g).unwrap());
        a.steps.truncate(3);
        a.steps[1].step = StepId(3);
        a.steps[2].step = StepId(2);
        a.steps.push(StepSegment {
            step: StepId(4),
            start_sec: 61.0,
            end_sec: 70.0,
        });
        // 1,3,2,4 is a valid execution of the diamond.
        assert!(!derive_out_of_order(&a, &diamond()).unwrap());
        a.steps[0].step = StepId(7);
        assert!(matches!(derive_out_of_order(&a, &g), Err(AnnotationError::UnknownStep(StepId(7)))));
    }

    #[test]
    fn ego_exo_mapping() {
        let mut a = fixture();
        assert_eq!(map_ego_to_exo(10.0, &a).unwrap(), SyncedTime { sec: 12.5, out_of_range: false });
        a.sync_offset_sec = Some(-1.0);
        assert_eq!(map_ego_to_exo(0.0, &a).unwrap(), SyncedTime { sec: -1.0, out_of_range: true });
        a.sync_offset_sec = None;
        assert!(matches!(map_ego_to_exo(1.0, &a), Err(AnnotationError::NoSync)));
    }

    fn arb_annotation() -> impl Strategy<Value = SessionAnnotation> {
        (
            prop::collection::vec((1u32..20, 0.001f64..50.0, 0.0f64..5.0), 0..8),
            prop::collection::vec((1u32..20, 0usize..4, any::<bool>(), "[a-z ]{0,12}"), 0..4),
            any::<bool>(),
            prop::option::of(-5.0f64..5.0),
            prop::option::of("[a-z]{1,8}"),
            0usize..3,
        )
            .prop_map(|(segs, mistakes, success, sync, comment, c)| {
                let mut t = 0.25;
                let steps: Vec<StepSegment> = segs
                    .into_iter()
                    .map(|(step, len, gap)| {
                        let start = t + gap;
                        t = start + len;
                        StepSegment {
                            step: StepId(step),
                            start_sec: start,
                            end_sec: t,
                        }
                    })
                    .collect();
                let step_mistakes: Vec<StepMistake> = mistakes
                    .into_iter()
                    .map(|(step, cat, critical, description)| StepMistake {
                        step: StepId(step),
                        category: MistakeCategory::ALL[cat],
                        critical: critical && !success,
                        description,
                    })
                    .collect();
                SessionAnnotation {
                    session_id: "s".into(),
                    participant: "p".into(),
                    task: "t".into(),
                    condition: Condition::ALL[c],
                    attempt_index: 1 + c as u32,
                    success,
                    comment,
                    duration: Interval {
                        start_sec: 0.25,
                        end_sec: t + 1.0,
                    },
                    steps,
                    out_of_order: false,
                    step_mistakes,
                    sync_offset_sec: sync,
                }
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(a in arb_annotation()) {
            prop_assert!(a.validate().is_ok());
            let back = parse_annotation(&a.to_json_pretty()).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn agrees_with_stepwise_out_of_order(seq in prop::collection::vec(1u32..=4, 1..8)) {
            let g = diamond();
            let steps = seq.iter().enumerate().map(|(i, s)| StepSegment {
                step: StepId(*s),
                start_sec: i as f64,
                end_sec: i as f64 + 0.5,
            }).collect();
            let mut a = fixture();
            a.steps = steps;
            let mut done = BTreeSet::new();
            let mut stepwise = false;
            for s in &seq {
                stepwise |= g.is_out_of_order(&done, StepId(*s)).unwrap();
                done.insert(StepId(*s));
            }
            prop_assert_eq!(derive_out_of_order(&a, &g).unwrap(), stepwise);
        }

        #[test]
        fn ego_exo_round_trip(t in -1e4f64..1e4, off in -100.0f64..100.0) {
            let mut a = fixture();
            a.sync_offset_sec = Some(off);
            let exo = map_ego_to_exo(t, &a).unwrap().sec;
            let back = map_exo_to_ego(exo, &a).unwrap().sec;
            prop_assert!((back - t).abs() <= 1e-9 * (1.0 + t.abs()));
        }
    }

    #[test]
    fn draft_from_log() {
        use crate::conductor::{event_to_envelope, run_session, ConductorConfig, NullSink, ScriptedSource, SessionMeta};
        use crate::msgbus::Topic;
        use std::sync::Arc;

        let ends = [4_000u64, 9_500, 15_000];
        let events = ends
            .iter()
            .enumerate()
            .map(|(i, ts)| {
                event_to_envelope(
                    &Event::StepObserved {
                        step_id: StepId(i as u32 + 1),
                        confidence: 1.0,
                    },
                    Topic::Perception,
                    "perception",
                    i as u64,
                    *ts,
                )
            })
            .collect();
        let g = chain(3);
        let log = run_session(
            ScriptedSource::new(1_000, events),
            NullSink,
            Arc::new(g.clone()),
            Condition::AI,
            ConductorConfig::default(),
            SessionMeta {
                session_id: "d".into(),
                participant: Some("p1".into()),
                attempt_index: Some(1),
            },
            None,
        )
        .unwrap();
        let draft = annotation_from_log(&log, &g).unwrap();
        assert_eq!(draft.success, None);
        assert_eq!(draft.step_mistakes, None);
        assert!(!draft.out_of_order);
        assert_eq!(draft.duration, Interval { start_sec: 0.0, end_sec: 14.0 });
        let bounds: Vec<(u32, f64, f64)> = draft.steps.iter().map(|s| (s.step.0, s.start_sec, s.end_sec)).collect();
        assert_eq!(bounds, vec![(1, 0.0, 3.0), (2, 3.0, 8.5), (3, 8.5, 14.0)]);
        let ann = draft.finalize(true, Vec::new()).unwrap();
        assert_eq!(ann.participant, "p1");

        assert!(matches!(
            annotation_from_log(&SessionLog::new("e"), &g),
            Err(AnnotationError::IncompleteLog)
        ));
    }
}
