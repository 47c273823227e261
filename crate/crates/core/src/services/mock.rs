//! All mock services behind one effect sink, answering conductor requests
//! synchronously with envelopes stamped at request time plus a fixed latency.

use serde::{Deserialize, Serialize};

use super::language::{rephrase_instruction, IntentService, KeywordIntentMock, RephraseStyle};
use super::speech::TtsEcho;
use crate::conductor::{
    effect_from_envelope, event_to_envelope, ContextSummary, ConversationReason, EffectSink, Effect, Event,
};
use crate::msgbus::{Envelope, Topic};

pub const LLM_SRC: &str = "llm";

/// Fixed prompt scaffolding counted on every language-model call.
const PROMPT_OVERHEAD_TOKENS: u64 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CallUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub struct MockServices {
    intent: Box<dyn IntentService + Send>,
    style: RephraseStyle,
    tts: TtsEcho,
    llm_seq: u64,
    llm_latency_ms: u64,
    usage: Vec<CallUsage>,
    llm: bool,
    speak: bool,
}

impl Default for MockServices {
    fn default() -> Self {
        Self::new(RephraseStyle::Plain)
    }
}

impl MockServices {
    pub fn new(style: RephraseStyle) -> Self {
        MockServices {
            intent: Box::new(KeywordIntentMock::builtin()),
            style,
            tts: TtsEcho::new(),
            llm_seq: 0,
            llm_latency_ms: 400,
            usage: Vec::new(),
            llm: true,
            speak: true,
        }
    }

    pub fn with_intent_service(mut self, svc: Box<dyn IntentService + Send>) -> Self {
        self.intent = svc;
        self
    }

    pub fn with_llm_latency_ms(mut self, ms: u64) -> Self {
        self.llm_latency_ms = ms;
        self
    }

    /// Leaves language-model requests to an external service.
    pub fn without_llm(mut self) -> Self {
        self.llm = false;
        self
    }

    /// Leaves speech output to an external service.
    pub fn without_tts(mut self) -> Self {
        self.speak = false;
        self
    }

    /// Language-model calls made so far.
    pub fn usage(&self) -> &[CallUsage] {
        &self.usage
    }

    pub fn take_usage(&mut self) -> Vec<CallUsage> {
        std::mem::take(&mut self.usage)
    }

    fn charge(&mut self, prompt: &str, completion: &str) {
        self.usage.push(CallUsage {
            prompt_tokens: PROMPT_OVERHEAD_TOKENS + estimate_tokens(prompt),
            completion_tokens: estimate_tokens(completion),
        });
    }

    fn llm_reply(&mut self, event: Event, request_ts: u64) -> Envelope {
        let env = event_to_envelope(&event, Topic::Asr, LLM_SRC, self.llm_seq, request_ts + self.llm_latency_ms);
        self.llm_seq += 1;
        env
    }
}

fn context_text(ctx: &ContextSummary) -> String {
    serde_json::to_string(ctx).expect("context serializes")
}

/// Canned answer that acknowledges the situation and restates the target.
fn compose_answer(ctx: &ContextSummary) -> String {
    let ack = match ctx.reason {
        Some(ConversationReason::OutOfOrder) => "That step seems to have come early, so let's keep to the recipe order.",
        Some(ConversationReason::Timeout) => "No rush, take the time you need.",
        Some(ConversationReason::UserQuestion) => "Good question. Follow the instruction as written and you will be fine.",
        Some(ConversationReason::UserProblem) => "Sorry about that. Sort it out and then carry on.",
        None => "Let's carry on.",
    };
    match (ctx.target_step, &ctx.target_instruction) {
        (Some(id), Some(instr)) => format!("{ack} We are on step {id}: {instr}"),
        _ => ack.to_string(),
    }
}

impl EffectSink for MockServices {
    fn deliver(&mut self, env: &Envelope) -> Vec<Envelope> {
        if env.topic != Topic::Conductor {
            return Vec::new();
        }
        let Ok(effect) = effect_from_envelope(env) else {
            return Vec::new();
        };
        match effect {
            Effect::Say { text, step_id } => {
                if !self.speak {
                    return Vec::new();
                }
                let spoken = if step_id.is_some() && self.llm {
                    let out = rephrase_instruction(&text, self.style);
                    self.charge(&text, &out);
                    out
                } else {
                    text
                };
                self.tts.synthesize(&spoken, env.ts_ms).into_iter().collect()
            }
            Effect::AskIntent { .. } | Effect::AskAnswer { .. } if !self.llm => Vec::new(),
            Effect::AskIntent { text, context } => {
                let intent = self.intent.categorize(&text, &context);
                let label = serde_json::to_string(&intent).expect("intent serializes");
                self.charge(&format!("{text}\n{}", context_text(&context)), &label);
                vec![self.llm_reply(Event::IntentResolved(intent), env.ts_ms)]
            }
            Effect::AskAnswer { question, context } => {
                let answer = compose_answer(&context);
                self.charge(&format!("{question}\n{}", context_text(&context)), &answer);
                vec![self.llm_reply(Event::AnswerReady { text: answer }, env.ts_ms)]
            }
            _ => Vec::new(),
        }
    }
}
