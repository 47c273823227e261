use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::taskmodel::{StepId, TaskDef, TaskGraph};

/// Guidance condition: unassisted, paper instructions, or the AI agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    UA,
    PI,
    AI,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::UA, Condition::PI, Condition::AI];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::UA => "UA",
            Condition::PI => "PI",
            Condition::AI => "AI",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "UA" => Ok(Condition::UA),
            "PI" => Ok(Condition::PI),
            "AI" => Ok(Condition::AI),
            _ => Err(format!("unknown condition `{s}` (expected ua, pi or ai)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Passive conditions (UA, PI): steps are tracked, no guidance is given.
    Idle,
    Guiding,
    Conversation,
    Completed,
    Aborted,
}

impl Mode {
    pub fn is_terminal(self) -> bool {
        matches!(self, Mode::Completed | Mode::Aborted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationReason {
    OutOfOrder,
    Timeout,
    UserQuestion,
    UserProblem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConductorConfig {
    /// Step observations below this confidence are ignored.
    pub min_confidence: f64,
    /// Treat "I'm done" from the user as a completed-step observation.
    pub trust_user: bool,
}

impl Default for ConductorConfig {
    fn default() -> Self {
        ConductorConfig {
            min_confidence: 0.5,
            trust_user: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConductorState {
    pub session_id: String,
    pub task: Arc<TaskGraph>,
    pub condition: Condition,
    pub config: ConductorConfig,
    pub mode: Mode,
    pub target_step: Option<StepId>,
    pub completed: BTreeSet<StepId>,
    pub conversation_reason: Option<ConversationReason>,
    /// Step whose timer is currently armed.
    pub armed_timer: Option<StepId>,
    pub started_ts_ms: u64,
    pub last_event_ts_ms: u64,
}

impl ConductorState {
    pub fn summary(&self) -> ContextSummary {
        ContextSummary {
            task_id: self.task.task_id().to_string(),
            mode: self.mode,
            target_step: self.target_step,
            target_instruction: self
                .target_step
                .and_then(|t| self.task.step(t))
                .map(|s| s.instruction.clone()),
            completed: self.completed.iter().copied().collect(),
            reason: self.conversation_reason,
        }
    }
}

/// What language services are told about the session when asked to
/// categorize an utterance or compose an answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub task_id: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_step: Option<StepId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_instruction: Option<String>,
    pub completed: Vec<StepId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<ConversationReason>,
}

/// Categorized user input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "intent", content = "argument", rename_all = "snake_case")]
pub enum Intent {
    Repeat,
    Question(String),
    ReportDone,
    ReportProblem(String),
    Abort,
    OffTopic,
}

/// Everything needed to start (or replay) a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartInfo {
    pub session_id: String,
    pub task: TaskDef,
    pub condition: Condition,
    pub config: ConductorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt_index: Option<u32>,
}

/// Conductor inputs. The envelope `type` is the snake_case variant name and
/// `data` holds the fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum Event {
    StepObserved { step_id: StepId, confidence: f64 },
    Utterance { text: String },
    IntentResolved(Intent),
    TimerExpired { step_id: StepId },
    UserConfirm { step_id: StepId },
    Start(Box<StartInfo>),
    AnswerReady { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    OutOfOrder,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Every step was completed; success is judged later by annotators.
    Completed,
    Aborted,
    Interrupted,
}

/// Conductor outputs, published on the `conductor` topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum Effect {
    /// Speech request. Instruction prompts carry their step id.
    Say {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_id: Option<StepId>,
    },
    /// Card shown to the user; `step_id` is absent for the goal or the
    /// full instruction sheet.
    Display {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_id: Option<StepId>,
        instruction: String,
    },
    Alert { kind: AlertKind },
    StartTimer { step_id: StepId, threshold_sec: f64 },
    CancelTimer { step_id: StepId },
    AskIntent { text: String, context: ContextSummary },
    AskAnswer { question: String, context: ContextSummary },
    LogNote { note: String },
    StepCompleted { step_id: StepId },
    EndSession { outcome: Outcome },
}
