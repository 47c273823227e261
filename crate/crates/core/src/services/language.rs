//! Language service: intent categorization and instruction rephrasing.

use serde::{Deserialize, Serialize};

use super::{IntentResult, ServiceError};
use crate::conductor::{ContextSummary, Intent, Mode};

/// The keyword table shipped with the rule-based mock.
pub const KEYWORD_TABLE: &str = include_str!("../../data/intent_keywords.tsv");

pub trait IntentService {
    fn categorize(&self, utterance: &str, context: &ContextSummary) -> IntentResult;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Repeat,
    Question,
    ReportDone,
    ReportProblem,
    Abort,
}

/// Rule-based categorizer: the longest whole-word keyword phrase found in
/// the utterance decides the intent.
#[derive(Debug, Clone)]
pub struct KeywordIntentMock {
    /// Normalized phrase (space padded) and its intent, in table order.
    table: Vec<(String, Kind)>,
}

/// Lowercases, turns punctuation other than apostrophes into spaces and
/// collapses whitespace; the result is padded with one space on each side.
fn normalize(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect();
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    format!(" {} ", words.join(" "))
}

impl KeywordIntentMock {
    pub fn from_table(text: &str) -> Result<Self, ServiceError> {
        let mut table = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, intent) = line
                .split_once('\t')
                .ok_or_else(|| ServiceError::Config(format!("keyword table line {}: missing tab", i + 1)))?;
            let kind = match intent.trim() {
                "repeat" => Kind::Repeat,
                "question" => Kind::Question,
                "report_done" => Kind::ReportDone,
                "report_problem" => Kind::ReportProblem,
                "abort" => Kind::Abort,
                other => {
                    return Err(ServiceError::Config(format!(
                        "keyword table line {}: unknown intent `{other}`",
                        i + 1
                    )))
                }
            };
            let phrase = normalize(phrase);
            if phrase.trim().is_empty() {
                return Err(ServiceError::Config(format!("keyword table line {}: empty phrase", i + 1)));
            }
            table.push((phrase, kind));
        }
        Ok(KeywordIntentMock { table })
    }

    pub fn builtin() -> Self {
        Self::from_table(KEYWORD_TABLE).expect("bundled keyword table is valid")
    }
}

impl Default for KeywordIntentMock {
    fn default() -> Self {
        Self::builtin()
    }
}

impl IntentService for KeywordIntentMock {
    fn categorize(&self, utterance: &str, context: &ContextSummary) -> IntentResult {
        let text = utterance.trim();
        let norm = normalize(text);
        if norm.trim().is_empty() {
            return Intent::OffTopic;
        }
        let best = self
            .table
            .iter()
            .filter(|(phrase, _)| norm.contains(phrase.as_str()))
            .fold(None, |best: Option<&(String, Kind)>, cand| match best {
                Some(b) if b.0.len() >= cand.0.len() => Some(b),
                _ => Some(cand),
            });
        match best.map(|(_, k)| *k) {
            Some(Kind::Repeat) => Intent::Repeat,
            Some(Kind::Question) => Intent::Question(text.to_string()),
            Some(Kind::ReportDone) => Intent::ReportDone,
            Some(Kind::ReportProblem) => Intent::ReportProblem(text.to_string()),
            Some(Kind::Abort) => Intent::Abort,
            // Mid-conversation, free text is taken as part of the exchange.
            None if text.ends_with('?') || context.mode == Mode::Conversation => Intent::Question(text.to_string()),
            None => Intent::OffTopic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RephraseStyle {
    #[default]
    Plain,
    Verbose,
}

pub fn rephrase_instruction(canonical: &str, style: RephraseStyle) -> String {
    match style {
        RephraseStyle::Plain => canonical.to_string(),
        RephraseStyle::Verbose => format!("Next, {canonical}"),
    }
}
