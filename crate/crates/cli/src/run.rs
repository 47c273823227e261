//! `taskpilot run`: one guided session, either on a virtual clock from
//! scripted inputs or live behind the console stream.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use taskpilot_core::annotations::{load_annotation, SessionAnnotation};
use taskpilot_core::conductor::{
    effect_from_envelope, event_to_envelope, run_session, ConductorConfig, Effect, Event, Outcome, ScriptedSource,
    SessionMeta, CONDUCTOR_SRC,
};
use taskpilot_core::msgbus::{Envelope, LogWriter, SessionLog, Topic};
use taskpilot_core::services::{
    load_transcript, transcript_envelopes, FrameRef, MockServices, ReplayClassifier, StepClassifier, StepTracker,
    TranscriptLine,
};
use taskpilot_core::simharness::PERCEPTION_SRC;
use taskpilot_core::taskmodel::{build_task_graph, load_task_library, StepId, TaskGraph};

use crate::{fail, RunArgs};

/// Sampling interval of the replayed camera stream.
pub const FRAME_INTERVAL_MS: u64 = 200;
/// Consecutive frames a step must win before perception believes it.
const STABLE_FRAMES: usize = 3;

/// Where a service comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServiceSpec {
    Mock,
    /// External process speaking the framed protocol at `host:port`.
    Tcp(String),
}

fn parse_service(flag: &str, value: &str, mock: &str) -> anyhow::Result<ServiceSpec> {
    if let Some(name) = value.strip_prefix("mock:") {
        if name == mock {
            return Ok(ServiceSpec::Mock);
        }
        return Err(fail(2, format!("--{flag}: unknown mock `{name}` (expected mock:{mock})")));
    }
    if let Some(addr) = value.strip_prefix("tcp://") {
        if !addr.is_empty() {
            return Ok(ServiceSpec::Tcp(addr.to_string()));
        }
    }
    Err(fail(2, format!("--{flag}: expected mock:{mock} or tcp://host:port, got `{value}`")))
}

#[derive(Debug, Clone)]
pub struct Services {
    pub perception: ServiceSpec,
    pub asr: ServiceSpec,
    pub llm: ServiceSpec,
    pub tts: ServiceSpec,
}

impl Services {
    fn from_args(args: &RunArgs) -> anyhow::Result<Self> {
        Ok(Services {
            perception: parse_service("perception", &args.perception, "replay")?,
            asr: parse_service("asr", &args.asr, "script")?,
            llm: parse_service("llm", &args.llm, "rules")?,
            tts: parse_service("tts", &args.tts, "echo")?,
        })
    }

    pub fn mocks(&self) -> MockServices {
        let mut m = MockServices::default();
        if self.llm != ServiceSpec::Mock {
            m = m.without_llm();
        }
        if self.tts != ServiceSpec::Mock {
            m = m.without_tts();
        }
        m
    }
}

/// Replays an annotated recording through the mock classifier. A step is
/// reported done when perception settles on a different step, or when the
/// recording ends.
pub struct PerceptionFeed {
    classifier: ReplayClassifier,
    tracker: StepTracker,
    current: Option<(StepId, f64)>,
    session_id: String,
    pub end_ms: u64,
}

impl PerceptionFeed {
    pub fn new(ann: &SessionAnnotation, noise: f64, seed: u64, session_id: &str) -> anyhow::Result<Self> {
        let classifier = ReplayClassifier::new(ann, noise, seed).map_err(|e| fail(2, e.to_string()))?;
        Ok(PerceptionFeed {
            classifier,
            tracker: StepTracker::new(STABLE_FRAMES),
            current: None,
            session_id: session_id.to_string(),
            end_ms: (ann.duration.end_sec * 1000.0).round() as u64,
        })
    }

    /// Steps finished as of the frame at `ts_ms` (ms since recording start).
    pub fn frame(&mut self, ts_ms: u64, task: &TaskGraph) -> anyhow::Result<Option<(StepId, f64)>> {
        let frame = FrameRef {
            session_id: self.session_id.clone(),
            ts_ms,
            media_id: "ego".into(),
        };
        let pred = self
            .classifier
            .classify_frame(&frame, task)
            .map_err(|e| fail(2, format!("perception: {e}")))?;
        Ok(match self.tracker.push(&pred) {
            Some(next) => self.current.replace(next).filter(|(s, _)| *s != next.0),
            None => None,
        })
    }

    pub fn finish(&mut self) -> Option<(StepId, f64)> {
        self.current.take()
    }
}

pub fn observation(step: StepId, confidence: f64, seq: u64, ts_ms: u64) -> Envelope {
    event_to_envelope(
        &Event::StepObserved { step_id: step, confidence },
        Topic::Perception,
        PERCEPTION_SRC,
        seq,
        ts_ms,
    )
}

fn perception_script(feed: &mut PerceptionFeed, task: &TaskGraph) -> anyhow::Result<Vec<Envelope>> {
    let mut out = Vec::new();
    let mut ts = 0;
    while ts <= feed.end_ms {
        if let Some((step, conf)) = feed.frame(ts, task)? {
            out.push(observation(step, conf, out.len() as u64, ts));
        }
        ts += FRAME_INTERVAL_MS;
    }
    if let Some((step, conf)) = feed.finish() {
        out.push(observation(step, conf, out.len() as u64, feed.end_ms));
    }
    Ok(out)
}

/// Everything a run needs besides the clock.
pub struct Prepared {
    pub graph: Arc<TaskGraph>,
    pub meta: SessionMeta,
    pub services: Services,
    pub perception: Option<PerceptionFeed>,
    pub transcript: Vec<TranscriptLine>,
    pub log_path: PathBuf,
}

fn prepare(args: &RunArgs) -> anyhow::Result<Prepared> {
    let library = load_task_library(&args.taskdir)
        .map_err(|e| fail(2, format!("task library {}: {e}", args.taskdir.display())))?;
    let def = library.get(&args.task).ok_or_else(|| {
        let known: Vec<&str> = library.keys().map(String::as_str).collect();
        fail(2, format!("unknown task `{}` (available: {})", args.task, known.join(", ")))
    })?;
    let graph = Arc::new(build_task_graph(def)?);
    let services = Services::from_args(args)?;
    let session_id = args.session_id.clone().unwrap_or_else(|| {
        format!("{}-{}-{}", args.task, args.condition.as_str().to_ascii_lowercase(), args.seed)
    });

    let perception = match (&services.perception, &args.annotation) {
        (ServiceSpec::Mock, Some(path)) => {
            let ann = load_annotation(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))?;
            if ann.task != args.task {
                return Err(fail(2, format!("{} annotates task `{}`, not `{}`", path.display(), ann.task, args.task)));
            }
            Some(PerceptionFeed::new(&ann, args.noise, args.seed, &session_id)?)
        }
        (ServiceSpec::Mock, None) => {
            tracing::warn!("mock:replay perception has no --annotation; no steps will be observed");
            None
        }
        _ => None,
    };
    let transcript = match (&services.asr, &args.transcript) {
        (ServiceSpec::Mock, Some(path)) => load_transcript(path).map_err(|e| fail(2, e.to_string()))?,
        _ => Vec::new(),
    };

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let log_path = args.out.join(format!("{session_id}.jsonl"));
    if log_path.exists() {
        tracing::warn!(path = %log_path.display(), "replacing existing session log");
        std::fs::remove_file(&log_path).with_context(|| format!("removing {}", log_path.display()))?;
    }
    Ok(Prepared {
        graph,
        meta: SessionMeta {
            session_id,
            participant: args.participant.clone(),
            attempt_index: args.attempt,
        },
        services,
        perception,
        transcript,
        log_path,
    })
}

pub fn outcome_of(log: &SessionLog) -> Option<Outcome> {
    log.entries
        .iter()
        .rev()
        .filter(|e| e.src == CONDUCTOR_SRC)
        .find_map(|e| match effect_from_envelope(e) {
            Ok(Effect::EndSession { outcome }) => Some(outcome),
            _ => None,
        })
}

pub fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut prepared = prepare(&args)?;
    if let Some(addr) = &args.listen {
        return crate::live::serve(addr, &args, prepared);
    }
    let s = &prepared.services;
    if [&s.perception, &s.asr, &s.llm, &s.tts].iter().any(|x| **x != ServiceSpec::Mock) {
        return Err(fail(2, "external services need a live session (--listen)"));
    }

    let mut events = match prepared.perception.as_mut() {
        Some(feed) => perception_script(feed, &prepared.graph)?,
        None => Vec::new(),
    };
    events.extend(transcript_envelopes(&prepared.transcript));
    let mut mocks = prepared.services.mocks();
    let mut writer = LogWriter::open(&prepared.log_path)?;
    let log = run_session(
        ScriptedSource::new(0, events),
        &mut mocks,
        prepared.graph.clone(),
        args.condition,
        ConductorConfig::default(),
        prepared.meta.clone(),
        Some(&mut writer),
    )?;
    eprintln!(
        "session {} ended: {:?} ({} envelopes)",
        prepared.meta.session_id,
        outcome_of(&log),
        log.entries.len()
    );
    println!("{}", prepared.log_path.display());
    Ok(())
}
