//! Scene-description aggregation: region captions and the step list go into
//! one language-model prompt; the reply names a step as `STEP: <id>`.

use std::fmt::Write;

use super::RegionCaption;
use crate::taskmodel::{StepDef, StepId, TaskGraph};

const NO_REGIONS: &str = "no regions detected";
const INSTRUCTION: &str = "Which step is the user performing right now? \
Answer with \"STEP: <id>\" on the first line, followed by a one-line description of the scene.";

pub fn build_scene_prompt(regions: &[RegionCaption], steps: &[StepDef]) -> String {
    let mut out = String::from("Regions of interest in the current frame:\n");
    if regions.is_empty() {
        out.push_str(NO_REGIONS);
        out.push('\n');
    }
    for (k, r) in regions.iter().enumerate() {
        let [x, y, w, h] = r.bbox;
        writeln!(out, "region {} at ({x},{y},{w},{h}): {}", k + 1, r.caption).unwrap();
    }
    out.push_str("Task steps:\n");
    for s in steps {
        writeln!(out, "{}. {}", s.id, s.instruction).unwrap();
    }
    out.push_str(INSTRUCTION);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneStep {
    Known(StepId),
    Unknown,
}

/// Reads the first integer after the first `STEP:` marker. A known step
/// comes back with the rest of the text as its description; anything else
/// is `Unknown` with the full text.
pub fn parse_scene_response(text: &str, task: &TaskGraph) -> (SceneStep, String) {
    let unknown = || (SceneStep::Unknown, text.to_string());
    let Some(pos) = text.find("STEP:") else {
        return unknown();
    };
    let after = &text[pos + "STEP:".len()..];
    let digits_at = after.len() - after.trim_start_matches([' ', '\t']).len();
    let digits: String = after[digits_at..].chars().take_while(|c| c.is_ascii_digit()).collect();
    let Ok(id) = digits.parse::<u32>() else {
        return unknown();
    };
    if !task.contains(StepId(id)) {
        return unknown();
    }
    let before = text[..pos].trim();
    let rest = after[digits_at + digits.len()..].trim();
    let description = match (before.is_empty(), rest.is_empty()) {
        (true, _) => rest.to_string(),
        (false, true) => before.to_string(),
        (false, false) => format!("{before} {rest}"),
    };
    (SceneStep::Known(StepId(id)), description)
}
