//! Mapping between conductor events/effects and bus envelopes.

use serde_json::{Map, Value};

use super::model::{Effect, Event};
use crate::msgbus::{Envelope, Topic};

pub const CONDUCTOR_SRC: &str = "conductor";
pub const SESSION_SRC: &str = "session";
pub const TIMER_SRC: &str = "timer";

/// Splits an adjacently tagged value into its `type` string and `data` object.
fn split_tagged(value: Value) -> (String, Map<String, Value>) {
    let Value::Object(mut obj) = value else {
        unreachable!("events and effects serialize as objects")
    };
    let kind = match obj.remove("type") {
        Some(Value::String(s)) => s,
        _ => unreachable!("tagged enums carry a type"),
    };
    let data = match obj.remove("data") {
        Some(Value::Object(m)) => m,
        Some(other) => unreachable!("non-object payload {other}"),
        None => Map::new(),
    };
    (kind, data)
}

pub fn effect_to_envelope(effect: &Effect, seq: u64, ts_ms: u64) -> Envelope {
    let (kind, data) = split_tagged(serde_json::to_value(effect).expect("effects serialize"));
    Envelope::new(Topic::Conductor, CONDUCTOR_SRC, kind, seq, ts_ms, data)
}

pub fn effect_from_envelope(env: &Envelope) -> Result<Effect, String> {
    from_parts(&env.kind, &env.data)
}

pub fn event_to_envelope(event: &Event, topic: Topic, src: &str, seq: u64, ts_ms: u64) -> Envelope {
    let (kind, data) = split_tagged(serde_json::to_value(event).expect("events serialize"));
    Envelope::new(topic, src, kind, seq, ts_ms, data)
}

/// Decodes a conductor input. Returns `None` for envelopes that are not
/// conductor events at all (wrong topic or an unrelated `type`), and an error
/// when the type is an event name but the payload does not fit.
pub fn event_from_envelope(env: &Envelope) -> Option<Result<Event, String>> {
    if !matches!(
        env.topic,
        Topic::Perception | Topic::Asr | Topic::Timer | Topic::Ui
    ) {
        return None;
    }
    if !EVENT_TYPES.contains(&env.kind.as_str()) {
        return None;
    }
    Some(from_parts(&env.kind, &env.data))
}

const EVENT_TYPES: [&str; 7] = [
    "step_observed",
    "utterance",
    "intent_resolved",
    "timer_expired",
    "user_confirm",
    "start",
    "answer_ready",
];

fn from_parts<T: serde::de::DeserializeOwned>(kind: &str, data: &Map<String, Value>) -> Result<T, String> {
    let mut obj = Map::new();
    obj.insert("type".into(), Value::String(kind.to_string()));
    obj.insert("data".into(), Value::Object(data.clone()));
    serde_json::from_value(Value::Object(obj)).map_err(|e| format!("bad `{kind}` payload: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductor::model::{AlertKind, Intent};
    use crate::taskmodel::StepId;

    #[test]
    fn effect_envelope_shape() {
        let env = effect_to_envelope(
            &Effect::StartTimer {
                step_id: StepId(2),
                threshold_sec: 30.0,
            },
            4,
            1000,
        );
        assert_eq!(
            env.to_canonical_json(),
            r#"{"v":1,"seq":4,"ts_ms":1000,"topic":"conductor","src":"conductor","type":"start_timer","data":{"step_id":2,"threshold_sec":30.0}}"#
        );
        let alert = effect_to_envelope(&Effect::Alert { kind: AlertKind::OutOfOrder }, 0, 0);
        assert_eq!(alert.kind, "alert");
        assert_eq!(alert.data["kind"], "out_of_order");
    }

    #[test]
    fn event_round_trip() {
        let events = [
            Event::StepObserved {
                step_id: StepId(3),
                confidence: 0.75,
            },
            Event::Utterance { text: "hi".into() },
            Event::IntentResolved(Intent::Question("why".into())),
            Event::IntentResolved(Intent::Abort),
            Event::TimerExpired { step_id: StepId(1) },
            Event::UserConfirm { step_id: StepId(1) },
            Event::AnswerReady { text: "yes".into() },
        ];
        for e in events {
            let env = event_to_envelope(&e, Topic::Asr, "t", 0, 0);
            assert_eq!(event_from_envelope(&env).unwrap().unwrap(), e);
        }
    }

    #[test]
    fn intent_payload_layout() {
        let env = event_to_envelope(&Event::IntentResolved(Intent::Repeat), Topic::Asr, "llm", 0, 0);
        assert_eq!(serde_json::to_string(&env.data).unwrap(), r#"{"intent":"repeat"}"#);
        let env = event_to_envelope(
            &Event::IntentResolved(Intent::ReportProblem("burnt".into())),
            Topic::Asr,
            "llm",
            0,
            0,
        );
        assert_eq!(
            serde_json::to_string(&env.data).unwrap(),
            r#"{"argument":"burnt","intent":"report_problem"}"#
        );
    }

    #[test]
    fn non_events_are_skipped() {
        let mut env = event_to_envelope(&Event::Utterance { text: "x".into() }, Topic::Tts, "tts", 0, 0);
        assert!(event_from_envelope(&env).is_none());
        env.topic = Topic::Asr;
        env.kind = "partial".into();
        assert!(event_from_envelope(&env).is_none());
        env.kind = "utterance".into();
        env.data.clear();
        assert!(event_from_envelope(&env).unwrap().is_err());
    }
}
