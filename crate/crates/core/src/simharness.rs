//! Seeded user/perception simulator and experiment driver.
//!
//! A simulated user walks the task in canonical order on a virtual clock,
//! optionally swapping one adjacent pair of dependent steps, making
//! mistakes at per-category rates, or abandoning the task. Each session
//! yields the perception/speech input script and a ground-truth annotation;
//! [`run_experiment`] then drives those scripts through the conductor with
//! mock services and collects a corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotations::{derive_out_of_order, Interval, MistakeCategory, SessionAnnotation, StepMistake, StepSegment};
use crate::conductor::{
    effect_from_envelope, event_to_envelope, run_session, AlertKind, ConductorConfig, ConductorError, Condition,
    Effect, EffectSink, Event, ScriptedSource, SessionMeta,
};
use crate::evalkit::{CostRecord, PriceTable};
use crate::msgbus::{write_log, Envelope, LogError, SessionLog, Topic};
use crate::services::{CallUsage, MockServices, ASR_SRC};
use crate::taskmodel::{StepId, TaskError, TaskGraph};

pub const PERCEPTION_SRC: &str = "perception";
pub const SIM_USER_SRC: &str = "sim_user";

/// Confidence attached to every simulated step observation.
const OBSERVATION_CONFIDENCE: f64 = 0.9;
/// Delay before perception re-reports a step it saw too early.
const REDETECT_DELAY_MS: u64 = 200;
/// Delay between finishing a step and a scripted remark.
const UTTERANCE_DELAY_MS: u64 = 500;
/// Delay before the simulated user answers a timeout alert.
const TIMEOUT_REPLY_DELAY_MS: u64 = 1_500;
const TIMEOUT_REPLY: &str = "I'm still working on it";
/// Shortest simulated step.
const MIN_STEP_MS: u64 = 1_000;
/// Idle time after the last scripted input before the source closes.
const CLOSE_GRACE_MS: u64 = 1_000;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("experiment needs at least one participant")]
    NoParticipants,
    #[error("experiment config: {0}")]
    Config(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Conductor(#[from] ConductorError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationSpec {
    pub mean: f64,
    /// Half-width of the uniform jitter around the mean.
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedRemark {
    pub after_step: StepId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    pub step_duration_sec: DurationSpec,
    /// Per-step probability of a mistake in each category, drawn
    /// independently.
    #[serde(default)]
    pub p_step_error: BTreeMap<MistakeCategory, f64>,
    /// Chance that an injected mistake is critical.
    #[serde(default)]
    pub p_critical: f64,
    #[serde(default)]
    pub p_out_of_order: f64,
    #[serde(default)]
    pub p_abort: f64,
    #[serde(default)]
    pub utterance_script: Vec<ScriptedRemark>,
    #[serde(default)]
    pub seed: u64,
    /// Error-probability multiplier for attempt k at index k-1; missing
    /// entries mean 1.
    #[serde(default)]
    pub attempt_error_multipliers: Vec<f64>,
}

impl Default for UserProfile {
    fn default() -> Self {
        UserProfile {
            step_duration_sec: DurationSpec {
                mean: 20.0,
                jitter: 5.0,
            },
            p_step_error: BTreeMap::new(),
            p_critical: 0.0,
            p_out_of_order: 0.0,
            p_abort: 0.0,
            utterance_script: Vec::new(),
            seed: 0,
            attempt_error_multipliers: Vec::new(),
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::InvalidProfile(format!("{name} = {p} is outside [0, 1]")))
    }
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let d = self.step_duration_sec;
        if !(d.mean.is_finite() && d.mean > 0.0) {
            return Err(SimError::InvalidProfile(format!("step duration mean {} must be positive", d.mean)));
        }
        if !(d.jitter.is_finite() && d.jitter >= 0.0) {
            return Err(SimError::InvalidProfile(format!("step duration jitter {} must be non-negative", d.jitter)));
        }
        for (c, p) in &self.p_step_error {
            check_probability(&format!("p_step_error.{}", c.as_str()), *p)?;
        }
        check_probability("p_critical", self.p_critical)?;
        check_probability("p_out_of_order", self.p_out_of_order)?;
        check_probability("p_abort", self.p_abort)?;
        if let Some(m) = self.attempt_error_multipliers.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(SimError::InvalidProfile(format!("attempt error multiplier {m} must be non-negative")));
        }
        Ok(())
    }

    fn error_probability(&self, category: MistakeCategory, attempt_index: u32) -> f64 {
        let base = self.p_step_error.get(&category).copied().unwrap_or(0.0);
        let mult = self
            .attempt_error_multipliers
            .get(attempt_index.saturating_sub(1) as usize)
            .copied()
            .unwrap_or(1.0);
        (base * mult).clamp(0.0, 1.0)
    }
}

/// Identity of one simulated session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSpec {
    pub session_id: String,
    pub participant: String,
    pub attempt_index: u32,
}

/// Perception/speech inputs for one session plus what really happened.
#[derive(Debug, Clone)]
pub struct SimSession {
    pub script: Vec<Envelope>,
    pub annotation: SessionAnnotation,
    /// Time of the last scripted input, ms since session start.
    pub end_ms: u64,
}

/// Canonical execution: always the lowest permitted step.
fn canonical_order(task: &TaskGraph) -> Result<Vec<StepId>, SimError> {
    let mut done = BTreeSet::new();
    let mut order = Vec::with_capacity(task.len());
    while let Some(next) = task.next_target(&done)? {
        done.insert(next);
        order.push(next);
    }
    Ok(order)
}

pub fn simulate_session(
    task: &TaskGraph,
    condition: Condition,
    profile: &UserProfile,
    spec: &SessionSpec,
) -> Result<SimSession, SimError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut order = canonical_order(task)?;

    if rng.random::<f64>() < profile.p_out_of_order {
        let mut swaps = Vec::new();
        for i in 0..order.len().saturating_sub(1) {
            let mut swapped = order.clone();
            swapped.swap(i, i + 1);
            if !task.is_valid_execution(&swapped)? {
                swaps.push(i);
            }
        }
        if let Some(&i) = swaps.choose(&mut rng) {
            order.swap(i, i + 1);
        }
    }
    let aborted = order.len() >= 2 && rng.random::<f64>() < profile.p_abort;
    if aborted {
        let keep = rng.random_range(1..order.len());
        order.truncate(keep);
    }

    let d = profile.step_duration_sec;
    let mut obs_seq = 0u64;
    let mut asr_seq = 0u64;
    let mut script = Vec::new();
    let mut observe = |step: StepId, ts: u64, script: &mut Vec<Envelope>| {
        script.push(event_to_envelope(
            &Event::StepObserved {
                step_id: step,
                confidence: OBSERVATION_CONFIDENCE,
            },
            Topic::Perception,
            PERCEPTION_SRC,
            obs_seq,
            ts,
        ));
        obs_seq += 1;
    };

    let mut segments = Vec::new();
    let mut mistakes = Vec::new();
    // Steps the conductor will have accepted, tracked to re-report early
    // observations once their prerequisites are met.
    let mut accepted = BTreeSet::new();
    let mut early: BTreeSet<StepId> = BTreeSet::new();
    let mut clock = 0u64;
    let mut last_input = 0u64;
    for &step in &order {
        let secs = d.mean + d.jitter * (2.0 * rng.random::<f64>() - 1.0);
        let dur = ((secs * 1000.0).round().max(0.0) as u64).max(MIN_STEP_MS);
        let (start, end) = (clock, clock + dur);
        clock = end;
        segments.push(StepSegment {
            step,
            start_sec: start as f64 / 1000.0,
            end_sec: end as f64 / 1000.0,
        });

        for c in MistakeCategory::ALL {
            if rng.random::<f64>() < profile.error_probability(c, spec.attempt_index) {
                let critical = rng.random::<f64>() < profile.p_critical;
                mistakes.push(StepMistake {
                    step,
                    category: c,
                    critical,
                    description: format!("injected {} on step {step}", c.as_str()),
                });
            }
        }

        observe(step, end, &mut script);
        last_input = end;
        if task.is_out_of_order(&accepted, step)? {
            early.insert(step);
        } else {
            accepted.insert(step);
            let mut t = end;
            while let Some(&ready) = early.iter().find(|s| !task.is_out_of_order(&accepted, **s).unwrap_or(true)) {
                early.remove(&ready);
                accepted.insert(ready);
                t += REDETECT_DELAY_MS;
                observe(ready, t, &mut script);
                last_input = t;
            }
        }

        for remark in profile.utterance_script.iter().filter(|r| r.after_step == step) {
            let ts = end + UTTERANCE_DELAY_MS;
            script.push(event_to_envelope(
                &Event::Utterance {
                    text: remark.text.clone(),
                },
                Topic::Asr,
                ASR_SRC,
                asr_seq,
                ts,
            ));
            asr_seq += 1;
            last_input = last_input.max(ts);
        }
    }

    let success = !aborted && !mistakes.iter().any(|m| m.critical);
    let mut annotation = SessionAnnotation {
        session_id: spec.session_id.clone(),
        participant: spec.participant.clone(),
        task: task.task_id().to_string(),
        condition,
        attempt_index: spec.attempt_index,
        success,
        comment: aborted.then(|| "abandoned before finishing".to_string()),
        duration: Interval {
            start_sec: 0.0,
            end_sec: clock as f64 / 1000.0,
        },
        steps: segments,
        out_of_order: false,
        step_mistakes: mistakes,
        sync_offset_sec: None,
    };
    annotation.out_of_order = derive_out_of_order(&annotation, task).map_err(|e| SimError::Config(e.to_string()))?;
    script.sort_by_key(|e| e.ts_ms);
    Ok(SimSession {
        script,
        annotation,
        end_ms: last_input,
    })
}

/// Wraps the service mocks with a simulated user who answers timeout
/// alerts after a short pause.
pub struct SimUserResponder<S> {
    inner: S,
    seq: u64,
}

impl<S> SimUserResponder<S> {
    pub fn new(inner: S) -> Self {
        SimUserResponder { inner, seq: 0 }
    }

    pub fn inner_mut(&mut self) -> &mut S {
        &mut self.inner
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: EffectSink> EffectSink for SimUserResponder<S> {
    fn deliver(&mut self, env: &Envelope) -> Vec<Envelope> {
        let mut out = self.inner.deliver(env);
        if env.topic == Topic::Conductor
            && matches!(effect_from_envelope(env), Ok(Effect::Alert { kind: AlertKind::Timeout }))
        {
            out.push(event_to_envelope(
                &Event::Utterance {
                    text: TIMEOUT_REPLY.into(),
                },
                Topic::Asr,
                SIM_USER_SRC,
                self.seq,
                env.ts_ms + TIMEOUT_REPLY_DELAY_MS,
            ));
            self.seq += 1;
        }
        out
    }
}

/// A simulated session after it has been driven through the conductor.
#[derive(Debug, Clone)]
pub struct SimRecord {
    pub annotation: SessionAnnotation,
    pub log: SessionLog,
    pub usage: Vec<CallUsage>,
}

/// Simulates one session and runs it through the conductor with all mocks.
pub fn run_simulated_session(
    task: Arc<TaskGraph>,
    condition: Condition,
    profile: &UserProfile,
    spec: &SessionSpec,
) -> Result<SimRecord, SimError> {
    let sim = simulate_session(&task, condition, profile, spec)?;
    let mut sink = SimUserResponder::new(MockServices::default());
    let log = run_session(
        ScriptedSource::with_horizon(0, sim.script, sim.end_ms + CLOSE_GRACE_MS),
        &mut sink,
        task,
        condition,
        ConductorConfig::default(),
        SessionMeta {
            session_id: spec.session_id.clone(),
            participant: Some(spec.participant.clone()),
            attempt_index: Some(spec.attempt_index),
        },
        None,
    )?;
    Ok(SimRecord {
        annotation: sim.annotation,
        log,
        usage: sink.inner_mut().take_usage(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub participant: String,
    pub order: [Condition; 3],
}

/// The six orderings of the three conditions.
pub fn condition_permutations() -> [[Condition; 3]; 6] {
    use Condition::*;
    [
        [UA, PI, AI],
        [UA, AI, PI],
        [PI, UA, AI],
        [PI, AI, UA],
        [AI, UA, PI],
        [AI, PI, UA],
    ]
}

pub fn participant_id(index: usize, n: usize) -> String {
    let width = n.to_string().len().max(2);
    format!("p{:0width$}", index + 1)
}

/// Every permutation ⌊n/6⌋ times, plus a seeded choice of n mod 6 distinct
/// extra permutations, in seeded order.
pub fn generate_counterbalanced_orders(n_participants: usize, seed: u64) -> Vec<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms = condition_permutations();
    let mut orders: Vec<[Condition; 3]> = Vec::with_capacity(n_participants);
    for _ in 0..n_participants / 6 {
        orders.extend(perms);
    }
    orders.extend(perms.choose_multiple(&mut rng, n_participants % 6).copied());
    orders.shuffle(&mut rng);
    orders
        .into_iter()
        .enumerate()
        .map(|(i, order)| Assignment {
            participant: participant_id(i, n_participants),
            order,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Every participant does every task once per condition.
    #[default]
    FullCrossed,
    /// Each participant does one task (assigned round-robin) three times.
    SingleTask,
}

fn default_price() -> PriceTable {
    PriceTable {
        per_1k_prompt: 0.0005,
        per_1k_completion: 0.0015,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub participants: usize,
    #[serde(default)]
    pub design: Design,
    pub tasks: Vec<String>,
    #[serde(default)]
    pub default_profile: UserProfile,
    /// Per-condition overrides of the default profile.
    #[serde(default)]
    pub profiles: BTreeMap<Condition, UserProfile>,
    #[serde(default = "default_price")]
    pub price: PriceTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware_capex: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn profile_for(&self, condition: Condition) -> &UserProfile {
        self.profiles.get(&condition).unwrap_or(&self.default_profile)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.participants == 0 {
            return Err(SimError::NoParticipants);
        }
        if self.tasks.is_empty() {
            return Err(SimError::Config("no tasks listed".into()));
        }
        self.default_profile.validate()?;
        for p in self.profiles.values() {
            p.validate()?;
        }
        Ok(())
    }
}

/// Per-session seed: a hash of the experiment seed and the session's
/// coordinates.
pub fn session_seed(seed: u64, participant: &str, task: &str, attempt_index: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(participant.as_bytes());
    h.update([0]);
    h.update(task.as_bytes());
    h.update([0]);
    h.update(attempt_index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone)]
pub struct SimCorpus {
    pub sessions: Vec<SimRecord>,
    pub assignments: Vec<Assignment>,
    pub price: PriceTable,
    pub hardware_capex: Option<f64>,
}

pub fn run_experiment(config: &ExperimentConfig, tasks: &BTreeMap<String, Arc<TaskGraph>>) -> Result<SimCorpus, SimError> {
    config.validate()?;
    let graphs: Vec<(&str, Arc<TaskGraph>)> = config
        .tasks
        .iter()
        .map(|id| {
            tasks
                .get(id)
                .map(|g| (id.as_str(), g.clone()))
                .ok_or_else(|| SimError::UnknownTask(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let assignments = generate_counterbalanced_orders(config.participants, config.seed);
    let mut sessions = Vec::new();
    for (i, a) in assignments.iter().enumerate() {
        let own: Vec<&(&str, Arc<TaskGraph>)> = match config.design {
            Design::FullCrossed => graphs.iter().collect(),
            Design::SingleTask => vec![&graphs[i % graphs.len()]],
        };
        for (task_id, graph) in own {
            for (k, condition) in a.order.iter().enumerate() {
                let attempt_index = k as u32 + 1;
                let spec = SessionSpec {
                    session_id: format!("{}-{task_id}-a{attempt_index}", a.participant),
                    participant: a.participant.clone(),
                    attempt_index,
                };
                let mut profile = config.profile_for(*condition).clone();
                profile.seed = session_seed(config.seed, &a.participant, task_id, attempt_index);
                sessions.push(run_simulated_session(graph.clone(), *condition, &profile, &spec)?);
            }
        }
    }
    tracing::info!(sessions = sessions.len(), "experiment simulated");
    Ok(SimCorpus {
        sessions,
        assignments,
        price: config.price,
        hardware_capex: config.hardware_capex,
    })
}

impl SimCorpus {
    /// Usage records for the sessions that called the language model.
    pub fn cost_records(&self) -> Vec<CostRecord> {
        self.sessions
            .iter()
            .filter(|s| s.annotation.condition == Condition::AI)
            .map(|s| CostRecord {
                session_id: s.annotation.session_id.clone(),
                calls: s.usage.clone(),
                price: self.price,
                hardware_capex: self.hardware_capex,
            })
            .collect()
    }

    /// Writes `<session_id>.jsonl`, `<session_id>.annotation.json` and
    /// `costs.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), SimError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SimError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for s in &self.sessions {
            let id = &s.annotation.session_id;
            write_log(dir.join(format!("{id}.jsonl")), &s.log)?;
            let ann_path = dir.join(format!("{id}.annotation.json"));
            std::fs::write(&ann_path, s.annotation.to_json_pretty()).map_err(io(&ann_path))?;
        }
        let mut costs = String::new();
        for r in self.cost_records() {
            costs.push_str(&serde_json::to_string(&r).expect("cost records serialize"));
            costs.push('\n');
        }
        let cost_path = dir.join(crate::evalkit::COSTS_FILE);
        std::fs::write(&cost_path, costs).map_err(io(&cost_path))?;
        Ok(())
    }
}

/// SHA-256 over every file in `dir` (names and contents, sorted by name),
/// as lowercase hex.
pub fn corpus_hash(dir: impl AsRef<Path>) -> Result<String, SimError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Io { path, source }
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        h.update(name.as_bytes());
        h.update([0]);
        h.update(std::fs::read(&f).map_err(io(&f))?);
        h.update([0]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
