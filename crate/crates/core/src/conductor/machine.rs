use std::collections::BTreeSet;
use std::sync::Arc;

use super::model::*;
use crate::taskmodel::{StepId, TaskGraph};

#[derive(Debug, thiserror::Error)]
pub enum ConductorError {
    #[error("session is already {0:?}")]
    TerminalState(Mode),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Task(#[from] crate::taskmodel::TaskError),
    #[error("session log: {0}")]
    Log(#[from] crate::msgbus::LogError),
}

/// Starts a session. AI sessions target the lowest-id permitted step; UA shows
/// only the goal; PI shows the full instruction sheet once.
pub fn init_session(
    task: Arc<TaskGraph>,
    condition: Condition,
    config: ConductorConfig,
    session_id: impl Into<String>,
    now_ms: u64,
) -> Result<(ConductorState, Vec<Effect>), ConductorError> {
    if task.is_empty() {
        return Err(ConductorError::InvalidTask(format!(
            "task `{}` has no steps",
            task.task_id()
        )));
    }
    let mut state = ConductorState {
        session_id: session_id.into(),
        task,
        condition,
        config,
        mode: Mode::Idle,
        target_step: None,
        completed: BTreeSet::new(),
        conversation_reason: None,
        armed_timer: None,
        started_ts_ms: now_ms,
        last_event_ts_ms: now_ms,
    };
    let mut fx = Vec::new();
    match condition {
        Condition::UA => fx.push(Effect::Display {
            step_id: None,
            instruction: format!("{}: {}", state.task.title(), state.task.goal()),
        }),
        Condition::PI => fx.push(Effect::Display {
            step_id: None,
            instruction: instruction_sheet(&state.task),
        }),
        Condition::AI => {
            state.mode = Mode::Guiding;
            retarget(&mut state, &mut fx)?;
        }
    }
    Ok((state, fx))
}

fn instruction_sheet(task: &TaskGraph) -> String {
    let mut sheet = task.title().to_string();
    for s in task.steps() {
        sheet.push_str(&format!("\n{}. {}", s.id, s.instruction));
    }
    sheet
}

/// One transition. Never reads a clock; `now_ms` is the only notion of time.
pub fn handle_event(
    state: &ConductorState,
    event: &Event,
    now_ms: u64,
) -> Result<(ConductorState, Vec<Effect>), ConductorError> {
    if state.mode.is_terminal() {
        return Err(ConductorError::TerminalState(state.mode));
    }
    let mut s = state.clone();
    s.last_event_ts_ms = now_ms;
    let mut fx = Vec::new();

    if let Event::Start(_) = event {
        note(&mut fx, "session already started");
        return Ok((s, fx));
    }
    match (s.condition, s.mode) {
        (Condition::UA | Condition::PI, _) => passive(&mut s, event, &mut fx)?,
        (Condition::AI, Mode::Guiding) => guiding(&mut s, event, &mut fx)?,
        (Condition::AI, Mode::Conversation) => conversation(&mut s, event, &mut fx)?,
        (Condition::AI, mode) => note(&mut fx, &format!("ignored event in {mode:?} mode")),
    }
    Ok((s, fx))
}

/// Ends a live session whose input stream went away.
pub fn interrupt(state: &ConductorState, now_ms: u64) -> (ConductorState, Vec<Effect>) {
    let mut s = state.clone();
    let mut fx = Vec::new();
    if s.mode.is_terminal() {
        return (s, fx);
    }
    s.last_event_ts_ms = now_ms;
    disarm(&mut s, &mut fx);
    finish(&mut s, Mode::Aborted, Outcome::Interrupted, &mut fx);
    (s, fx)
}

fn note(fx: &mut Vec<Effect>, text: &str) {
    fx.push(Effect::LogNote {
        note: text.to_string(),
    });
}

fn disarm(s: &mut ConductorState, fx: &mut Vec<Effect>) {
    if let Some(step_id) = s.armed_timer.take() {
        fx.push(Effect::CancelTimer { step_id });
    }
}

fn finish(s: &mut ConductorState, mode: Mode, outcome: Outcome, fx: &mut Vec<Effect>) {
    s.mode = mode;
    s.target_step = None;
    s.conversation_reason = None;
    fx.push(Effect::EndSession { outcome });
}

fn instruction(s: &ConductorState, step: StepId) -> String {
    s.task
        .step(step)
        .map(|d| d.instruction.clone())
        .unwrap_or_default()
}

/// Presents `step`: card, spoken prompt and (when the step has one) timer.
fn present(s: &mut ConductorState, step: StepId, fx: &mut Vec<Effect>) {
    let text = instruction(s, step);
    fx.push(Effect::Display {
        step_id: Some(step),
        instruction: text.clone(),
    });
    fx.push(Effect::Say {
        text,
        step_id: Some(step),
    });
    arm(s, step, fx);
}

fn arm(s: &mut ConductorState, step: StepId, fx: &mut Vec<Effect>) {
    if let Some(threshold_sec) = s.task.step(step).and_then(|d| d.timer_threshold_sec) {
        s.armed_timer = Some(step);
        fx.push(Effect::StartTimer {
            step_id: step,
            threshold_sec,
        });
    }
}

/// Moves the target to the lowest-id permitted step, presenting it if it
/// changed.
fn retarget(s: &mut ConductorState, fx: &mut Vec<Effect>) -> Result<(), ConductorError> {
    let next = s.task.next_target(&s.completed)?;
    if next == s.target_step {
        return Ok(());
    }
    disarm(s, fx);
    s.target_step = next;
    if let Some(step) = next {
        present(s, step, fx);
    }
    Ok(())
}

/// Records `step` as done. Returns true when that finished the task.
fn complete(s: &mut ConductorState, step: StepId, fx: &mut Vec<Effect>) -> bool {
    s.completed.insert(step);
    if s.armed_timer == Some(step) {
        disarm(s, fx);
    }
    fx.push(Effect::StepCompleted { step_id: step });
    if s.completed.len() == s.task.len() {
        disarm(s, fx);
        finish(s, Mode::Completed, Outcome::Completed, fx);
        return true;
    }
    false
}

fn enter_conversation(
    s: &mut ConductorState,
    reason: ConversationReason,
    fx: &mut Vec<Effect>,
) {
    disarm(s, fx);
    s.mode = Mode::Conversation;
    s.conversation_reason = Some(reason);
}

fn ask_answer(s: &ConductorState, question: String, fx: &mut Vec<Effect>) {
    fx.push(Effect::AskAnswer {
        question,
        context: s.summary(),
    });
}

fn out_of_order(s: &mut ConductorState, step: StepId, fx: &mut Vec<Effect>) {
    enter_conversation(s, ConversationReason::OutOfOrder, fx);
    fx.push(Effect::Alert {
        kind: AlertKind::OutOfOrder,
    });
    let question = match s.target_step {
        Some(t) => format!(
            "The user appears to have performed step {step} ({}) before step {t} ({}). Check with the user what happened.",
            instruction(s, step),
            instruction(s, t)
        ),
        None => format!("The user appears to have performed step {step} out of sequence."),
    };
    ask_answer(s, question, fx);
}

/// Common gatekeeping for step observations; returns the step if it should
/// be acted on.
fn accept_observation(
    s: &ConductorState,
    step: StepId,
    confidence: f64,
    fx: &mut Vec<Effect>,
) -> Option<StepId> {
    if !s.task.contains(step) {
        note(fx, &format!("observation of unknown step {step}"));
        return None;
    }
    // NaN confidence fails this check too.
    if confidence.is_nan() || confidence < s.config.min_confidence {
        note(fx, &format!("low-confidence observation of step {step} ({confidence})"));
        return None;
    }
    if s.completed.contains(&step) {
        note(fx, &format!("step {step} observed again"));
        return None;
    }
    Some(step)
}

fn passive(s: &mut ConductorState, event: &Event, fx: &mut Vec<Effect>) -> Result<(), ConductorError> {
    let (step, confidence) = match *event {
        Event::StepObserved { step_id, confidence } => (step_id, confidence),
        Event::UserConfirm { step_id } => (step_id, 1.0),
        _ => {
            note(fx, &format!("no guidance in the {} condition", s.condition));
            return Ok(());
        }
    };
    if let Some(step) = accept_observation(s, step, confidence, fx) {
        complete(s, step, fx);
    }
    Ok(())
}

fn observe_while_guiding(
    s: &mut ConductorState,
    step: StepId,
    confidence: f64,
    fx: &mut Vec<Effect>,
) -> Result<(), ConductorError> {
    let Some(step) = accept_observation(s, step, confidence, fx) else {
        return Ok(());
    };
    let permitted = s.task.permitted_next_steps(&s.completed)?;
    if Some(step) == s.target_step {
        if !complete(s, step, fx) {
            retarget(s, fx)?;
        }
    } else if permitted.contains(&step) {
        if !complete(s, step, fx) {
            note(fx, &format!("parallel step {step} completed"));
            retarget(s, fx)?;
        }
    } else {
        out_of_order(s, step, fx);
    }
    Ok(())
}

fn guiding(s: &mut ConductorState, event: &Event, fx: &mut Vec<Effect>) -> Result<(), ConductorError> {
    let target = s.target_step.expect("guiding always has a target");
    match event {
        Event::StepObserved { step_id, confidence } => {
            observe_while_guiding(s, *step_id, *confidence, fx)?
        }
        Event::UserConfirm { step_id } => observe_while_guiding(s, *step_id, 1.0, fx)?,
        Event::TimerExpired { step_id } if s.armed_timer == Some(*step_id) && *step_id == target => {
            s.armed_timer = None;
            enter_conversation(s, ConversationReason::Timeout, fx);
            fx.push(Effect::Alert {
                kind: AlertKind::Timeout,
            });
            fx.push(Effect::Say {
                text: format!(
                    "You have been on step {target} for a while. Is everything going all right, or do you need help?"
                ),
                step_id: None,
            });
        }
        Event::TimerExpired { step_id } => note(fx, &format!("stale timer for step {step_id}")),
        Event::Utterance { text } => fx.push(Effect::AskIntent {
            text: text.clone(),
            context: s.summary(),
        }),
        Event::IntentResolved(intent) => match intent {
            Intent::Repeat => fx.push(Effect::Say {
                text: instruction(s, target),
                step_id: Some(target),
            }),
            Intent::Question(q) => {
                enter_conversation(s, ConversationReason::UserQuestion, fx);
                ask_answer(s, q.clone(), fx);
            }
            Intent::ReportDone if s.config.trust_user => observe_while_guiding(s, target, 1.0, fx)?,
            Intent::ReportDone => note(fx, "user reports done; awaiting perception"),
            Intent::ReportProblem(p) => {
                enter_conversation(s, ConversationReason::UserProblem, fx);
                ask_answer(s, p.clone(), fx);
            }
            Intent::Abort => {
                disarm(s, fx);
                finish(s, Mode::Aborted, Outcome::Aborted, fx);
            }
            Intent::OffTopic => fx.push(Effect::Say {
                text: format!(
                    "Let's stay with the task. Step {target}: {}",
                    instruction(s, target)
                ),
                step_id: None,
            }),
        },
        Event::AnswerReady { text } => fx.push(Effect::Say {
            text: text.clone(),
            step_id: None,
        }),
        Event::Start(_) => unreachable!("handled by handle_event"),
    }
    Ok(())
}

fn conversation(s: &mut ConductorState, event: &Event, fx: &mut Vec<Effect>) -> Result<(), ConductorError> {
    match event {
        Event::AnswerReady { text } => {
            fx.push(Effect::Say {
                text: text.clone(),
                step_id: None,
            });
            s.mode = Mode::Guiding;
            s.conversation_reason = None;
            let before = s.target_step;
            retarget(s, fx)?;
            // Same target: only the timer needs re-arming.
            if s.target_step == before {
                if let Some(t) = s.target_step {
                    arm(s, t, fx);
                }
            }
        }
        Event::Utterance { text } => fx.push(Effect::AskIntent {
            text: text.clone(),
            context: s.summary(),
        }),
        Event::IntentResolved(Intent::Abort) => finish(s, Mode::Aborted, Outcome::Aborted, fx),
        Event::IntentResolved(intent) => {
            let question = match intent {
                Intent::Question(q) | Intent::ReportProblem(q) => q.clone(),
                Intent::Repeat => "The user asked to hear that again.".to_string(),
                Intent::ReportDone => "The user says the step is done.".to_string(),
                _ => "The user replied without a specific request.".to_string(),
            };
            ask_answer(s, question, fx);
        }
        Event::StepObserved { step_id, confidence } => {
            let Some(step) = accept_observation(s, *step_id, *confidence, fx) else {
                return Ok(());
            };
            if s.task.permitted_next_steps(&s.completed)?.contains(&step) {
                if !complete(s, step, fx) {
                    note(fx, &format!("step {step} completed during conversation"));
                }
            } else {
                s.conversation_reason = Some(ConversationReason::OutOfOrder);
                fx.push(Effect::Alert {
                    kind: AlertKind::OutOfOrder,
                });
                ask_answer(
                    s,
                    format!("The user appears to have performed step {step} out of sequence."),
                    fx,
                );
            }
        }
        Event::UserConfirm { step_id } => {
            note(fx, &format!("confirmation of step {step_id} held until the conversation ends"))
        }
        Event::TimerExpired { step_id } => note(fx, &format!("stale timer for step {step_id}")),
        Event::Start(_) => unreachable!("handled by handle_event"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskmodel::test_graphs::{chain, diamond};

    fn ai(task: TaskGraph) -> (ConductorState, Vec<Effect>) {
        init_session(Arc::new(task), Condition::AI, ConductorConfig::default(), "s", 0).unwrap()
    }

    fn obs(step: u32, confidence: f64) -> Event {
        Event::StepObserved {
            step_id: StepId(step),
            confidence,
        }
    }

    fn step(s: &ConductorState, e: Event) -> (ConductorState, Vec<Effect>) {
        handle_event(s, &e, 1000).unwrap()
    }

    fn has_display(fx: &[Effect], id: u32) -> bool {
        fx.iter()
            .any(|e| matches!(e, Effect::Display { step_id: Some(s), .. } if s.0 == id))
    }

    #[test]
    fn init_on_chain_targets_step_one() {
        let (s, fx) = ai(chain(5));
        assert_eq!(s.mode, Mode::Guiding);
        assert_eq!(s.target_step, Some(StepId(1)));
        assert!(has_display(&fx, 1));
        assert!(fx.contains(&Effect::StartTimer {
            step_id: StepId(1),
            threshold_sec: 10.0
        }));
    }

    #[test]
    fn init_on_diamond_targets_lowest_permitted() {
        let (s, _) = ai(diamond());
        assert_eq!(s.target_step, Some(StepId(1)));
        let (s, _) = step(&s, obs(1, 1.0));
        // Both 2 and 3 are permitted; the lowest id wins.
        assert_eq!(s.target_step, Some(StepId(2)));
    }

    #[test]
    fn unassisted_shows_goal_only() {
        let (s, fx) =
            init_session(Arc::new(chain(5)), Condition::UA, ConductorConfig::default(), "s", 0).unwrap();
        assert_eq!(s.mode, Mode::Idle);
        assert_eq!(fx.len(), 1);
        assert!(matches!(&fx[0], Effect::Display { step_id: None, instruction } if instruction.contains("test goal")));
    }

    #[test]
    fn paper_condition_shows_static_sheet_and_tracks_silently() {
        let (s, fx) =
            init_session(Arc::new(chain(3)), Condition::PI, ConductorConfig::default(), "s", 0).unwrap();
        assert_eq!(fx.len(), 1);
        let (s, fx) = step(&s, obs(3, 0.9));
        // No alert in passive conditions even when out of order.
        assert!(!fx.iter().any(|e| matches!(e, Effect::Alert { .. })));
        assert!(s.completed.contains(&StepId(3)));
        let (s, _) = step(&s, obs(1, 0.9));
        let (s, fx) = step(&s, obs(2, 0.9));
        assert_eq!(s.mode, Mode::Completed);
        assert_eq!(fx.last(), Some(&Effect::EndSession { outcome: Outcome::Completed }));
        assert!(handle_event(&s, &obs(1, 0.9), 5).is_err());
    }

    #[test]
    fn target_observation_advances() {
        let (s, _) = ai(chain(5));
        let (s, _) = step(&s, obs(1, 0.9));
        assert_eq!(s.target_step, Some(StepId(2)));
        let (s, fx) = step(&s, obs(2, 0.9));
        assert_eq!(s.target_step, Some(StepId(3)));
        assert_eq!(
            fx,
            vec![
                Effect::CancelTimer { step_id: StepId(2) },
                Effect::StepCompleted { step_id: StepId(2) },
                Effect::Display {
                    step_id: Some(StepId(3)),
                    instruction: "do step 3".into()
                },
                Effect::Say {
                    text: "do step 3".into(),
                    step_id: Some(StepId(3))
                },
                Effect::StartTimer {
                    step_id: StepId(3),
                    threshold_sec: 30.0
                },
            ]
        );
    }

    #[test]
    fn out_of_order_enters_conversation() {
        let (s, _) = ai(chain(5));
        let (s, _) = step(&s, obs(1, 0.9));
        let (s, fx) = step(&s, obs(4, 0.9));
        assert_eq!(s.mode, Mode::Conversation);
        assert_eq!(s.conversation_reason, Some(ConversationReason::OutOfOrder));
        assert!(fx.contains(&Effect::Alert {
            kind: AlertKind::OutOfOrder
        }));
        assert!(fx.contains(&Effect::CancelTimer { step_id: StepId(2) }));
        assert!(fx.iter().any(|e| matches!(e, Effect::AskAnswer { .. })));
        assert!(!s.completed.contains(&StepId(4)));

        // The answer resumes the same target and re-arms its timer.
        let (s, fx) = step(&s, Event::AnswerReady { text: "ok".into() });
        assert_eq!(s.mode, Mode::Guiding);
        assert_eq!(s.target_step, Some(StepId(2)));
        assert_eq!(s.conversation_reason, None);
        assert!(fx.contains(&Effect::StartTimer {
            step_id: StepId(2),
            threshold_sec: 20.0
        }));
    }

    #[test]
    fn timeout_enters_conversation() {
        let (s, _) = ai(chain(5));
        let (s, fx) = step(&s, Event::TimerExpired { step_id: StepId(1) });
        assert_eq!(s.mode, Mode::Conversation);
        assert_eq!(s.conversation_reason, Some(ConversationReason::Timeout));
        assert_eq!(s.armed_timer, None);
        assert_eq!(fx[0], Effect::Alert { kind: AlertKind::Timeout });
        assert!(matches!(fx[1], Effect::Say { step_id: None, .. }));
    }

    #[test]
    fn stale_timer_is_ignored() {
        let (s, _) = ai(chain(5));
        let (s2, fx) = step(&s, Event::TimerExpired { step_id: StepId(3) });
        assert_eq!(s2.mode, Mode::Guiding);
        assert!(matches!(fx[0], Effect::LogNote { .. }));
    }

    #[test]
    fn low_confidence_and_repeats_are_noops() {
        let (s, _) = ai(chain(5));
        let (s, fx) = step(&s, obs(1, 0.2));
        assert_eq!(s.target_step, Some(StepId(1)));
        assert!(matches!(fx[..], [Effect::LogNote { .. }]));
        let (s, _) = step(&s, obs(1, 0.9));
        let (s, fx) = step(&s, obs(1, 0.9));
        assert_eq!(s.mode, Mode::Guiding);
        assert!(matches!(fx[..], [Effect::LogNote { .. }]));
    }

    #[test]
    fn parallel_step_on_diamond() {
        let (s, _) = ai(diamond());
        let (s, _) = step(&s, obs(1, 1.0));
        let (s, fx) = step(&s, obs(3, 1.0));
        assert!(s.completed.contains(&StepId(3)));
        assert_eq!(s.target_step, Some(StepId(2)));
        assert!(fx.iter().any(|e| matches!(e, Effect::LogNote { note } if note.contains("parallel"))));
        let (s, fx) = step(&s, obs(2, 1.0));
        assert_eq!(s.target_step, Some(StepId(4)));
        assert!(has_display(&fx, 4));
    }

    #[test]
    fn intents_while_guiding() {
        let (s, _) = ai(chain(3));
        let (_, fx) = step(&s, Event::Utterance { text: "hm".into() });
        assert!(matches!(fx[..], [Effect::AskIntent { .. }]));
        let (_, fx) = step(&s, Event::IntentResolved(Intent::Repeat));
        assert_eq!(
            fx,
            vec![Effect::Say {
                text: "do step 1".into(),
                step_id: Some(StepId(1))
            }]
        );
        let (q, _) = step(&s, Event::IntentResolved(Intent::Question("why?".into())));
        assert_eq!(q.conversation_reason, Some(ConversationReason::UserQuestion));
        let (p, _) = step(&s, Event::IntentResolved(Intent::ReportProblem("spilled".into())));
        assert_eq!(p.conversation_reason, Some(ConversationReason::UserProblem));
        let (d, _) = step(&s, Event::IntentResolved(Intent::ReportDone));
        assert_eq!(d.target_step, Some(StepId(2)));
        let (a, fx) = step(&s, Event::IntentResolved(Intent::Abort));
        assert_eq!(a.mode, Mode::Aborted);
        assert_eq!(fx.last(), Some(&Effect::EndSession { outcome: Outcome::Aborted }));
        let (o, fx) = step(&s, Event::IntentResolved(Intent::OffTopic));
        assert_eq!(o.mode, Mode::Guiding);
        assert!(matches!(fx[..], [Effect::Say { step_id: None, .. }]));
    }

    #[test]
    fn distrusted_done_waits_for_perception() {
        let config = ConductorConfig {
            trust_user: false,
            ..Default::default()
        };
        let (s, _) = init_session(Arc::new(chain(3)), Condition::AI, config, "s", 0).unwrap();
        let (s, fx) = step(&s, Event::IntentResolved(Intent::ReportDone));
        assert_eq!(s.target_step, Some(StepId(1)));
        assert!(matches!(fx[..], [Effect::LogNote { .. }]));
    }

    #[test]
    fn conversation_turns() {
        let (s, _) = ai(chain(3));
        let (s, _) = step(&s, Event::IntentResolved(Intent::Question("why?".into())));
        let (s, fx) = step(&s, Event::Utterance { text: "and?".into() });
        assert_eq!(s.mode, Mode::Conversation);
        assert!(matches!(fx[..], [Effect::AskIntent { .. }]));
        let (s, fx) = step(&s, Event::UserConfirm { step_id: StepId(1) });
        assert!(s.completed.is_empty());
        assert!(matches!(fx[..], [Effect::LogNote { .. }]));
        // Progress seen during the conversation is recorded; the new target
        // is presented when guidance resumes.
        let (s, fx) = step(&s, obs(1, 0.9));
        assert!(s.completed.contains(&StepId(1)));
        assert!(!has_display(&fx, 2));
        let (s, fx) = step(&s, Event::AnswerReady { text: "sure".into() });
        assert_eq!(s.target_step, Some(StepId(2)));
        assert!(has_display(&fx, 2));
        let (s, _) = step(&s, Event::IntentResolved(Intent::Question("?".into())));
        let (s, fx) = step(&s, Event::IntentResolved(Intent::Abort));
        assert_eq!(s.mode, Mode::Aborted);
        assert_eq!(fx, vec![Effect::EndSession { outcome: Outcome::Aborted }]);
    }

    #[test]
    fn terminal_state_rejects_events() {
        let (s, _) = ai(chain(1));
        let (s, fx) = step(&s, obs(1, 1.0));
        assert_eq!(s.mode, Mode::Completed);
        assert_eq!(s.completed.len(), 1);
        assert_eq!(fx.last(), Some(&Effect::EndSession { outcome: Outcome::Completed }));
        assert!(matches!(
            handle_event(&s, &obs(1, 1.0), 5),
            Err(ConductorError::TerminalState(Mode::Completed))
        ));
    }

    #[test]
    fn interrupt_closes_session() {
        let (s, _) = ai(chain(3));
        let (s, fx) = interrupt(&s, 50);
        assert_eq!(s.mode, Mode::Aborted);
        assert_eq!(
            fx,
            vec![
                Effect::CancelTimer { step_id: StepId(1) },
                Effect::EndSession { outcome: Outcome::Interrupted }
            ]
        );
        assert!(interrupt(&s, 60).1.is_empty());
    }

    #[test]
    fn transitions_are_deterministic() {
        let (s, _) = ai(chain(4));
        let events = [obs(1, 0.9), obs(3, 0.8), Event::AnswerReady { text: "x".into() }, obs(2, 0.7)];
        let run = || {
            let mut st = s.clone();
            let mut all = Vec::new();
            for (i, e) in events.iter().enumerate() {
                let (n, fx) = handle_event(&st, e, i as u64 * 100).unwrap();
                st = n;
                all.extend(fx);
            }
            all
        };
        assert_eq!(run(), run());
    }
}
