//! Evaluation: success and error rates, completion time, step-guidance
//! alignment, survey aggregation, cost accounting, Pareto efficiency,
//! perception accuracy, and the grouped report.
//!
//! Rates are percentages kept unrounded; rounding happens only when
//! rendering.

mod alignment;
mod cost;
mod report;
mod survey;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotations::{MistakeCategory, SessionAnnotation};
use crate::conductor::Condition;

pub use alignment::{perception_accuracy, step_guidance_alignment, AccuracyStats, AlignmentStats};
pub use cost::{
    cost_summary, format_sig, load_cost_records, pareto_frontier, pareto_frontier_brute_force, round_sig, CostRecord, CostSummary,
    ParetoPoint, PriceTable,
};
pub use report::{
    build_report, evaluate_corpus, load_corpus, render_csv, render_micro_csv, render_text, write_report, Corpus,
    ConditionRow, GroupRow, HistoryRow, MetricsReport, MicroRow, ReportInputs, COSTS_FILE, SURVEY_FILE, TABLE1_ORDER,
};
pub use survey::{aggregate_survey, load_survey_csv, CategoricalSummary, QuestionSummary, SurveyResponse, SurveySummary, LIKERT_QUESTIONS};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("log has no instruction effects")]
    NoInstructions,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {detail}")]
    Parse { file: String, detail: String },
    #[error("{} invalid annotation file(s)", .0.len())]
    InvalidAnnotations(Vec<(String, String)>),
}

/// One session reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub session_id: String,
    pub participant: String,
    pub task: String,
    pub condition: Condition,
    pub attempt_index: u32,
    /// Condition of the participant's first attempt at this task; absent
    /// for the first attempt itself.
    pub training: Option<Condition>,
    /// Conditions of the earlier attempts, in attempt order.
    pub history: Vec<Condition>,
    /// Every earlier attempt is present in the corpus.
    pub history_complete: bool,
    pub success: bool,
    pub duration_sec: f64,
    pub n_steps_attempted: u32,
    pub n_erroneous_steps: u32,
    pub has_critical: bool,
    pub mistakes_by_category: BTreeMap<MistakeCategory, u32>,
}

impl SessionOutcome {
    /// Single-session outcome with the given exposure history.
    pub fn from_annotation(ann: &SessionAnnotation, history: Vec<Condition>) -> Self {
        let attempted: BTreeSet<_> = ann.steps.iter().map(|s| s.step).collect();
        let erroneous: BTreeSet<_> = ann
            .step_mistakes
            .iter()
            .map(|m| m.step)
            .filter(|s| attempted.contains(s))
            .collect();
        let mut by_cat = BTreeMap::new();
        for m in &ann.step_mistakes {
            *by_cat.entry(m.category).or_insert(0) += 1;
        }
        let history_complete = history.len() + 1 == ann.attempt_index as usize;
        SessionOutcome {
            session_id: ann.session_id.clone(),
            participant: ann.participant.clone(),
            task: ann.task.clone(),
            condition: ann.condition,
            attempt_index: ann.attempt_index,
            training: if ann.attempt_index > 1 && history_complete {
                history.first().copied()
            } else {
                None
            },
            history,
            history_complete,
            success: ann.success,
            duration_sec: ann.duration_sec(),
            n_steps_attempted: attempted.len() as u32,
            n_erroneous_steps: erroneous.len() as u32,
            has_critical: ann.step_mistakes.iter().any(|m| m.critical),
            mistakes_by_category: by_cat,
        }
    }
}

/// Outcomes for a corpus, with each session's history taken from the same
/// participant's earlier attempts at the same task.
pub fn derive_outcomes(annotations: &[SessionAnnotation]) -> Vec<SessionOutcome> {
    let mut attempts: BTreeMap<(&str, &str), Vec<(u32, Condition)>> = BTreeMap::new();
    for a in annotations {
        attempts
            .entry((a.participant.as_str(), a.task.as_str()))
            .or_default()
            .push((a.attempt_index, a.condition));
    }
    for v in attempts.values_mut() {
        v.sort();
    }
    annotations
        .iter()
        .map(|a| {
            let prior = &attempts[&(a.participant.as_str(), a.task.as_str())];
            let history: Vec<Condition> = prior
                .iter()
                .filter(|(i, _)| *i < a.attempt_index)
                .map(|(_, c)| *c)
                .collect();
            // Only a gap-free 1..n-1 sequence counts as a complete history.
            let contiguous = prior
                .iter()
                .filter(|(i, _)| *i < a.attempt_index)
                .enumerate()
                .all(|(k, (i, _))| *i == k as u32 + 1);
            let mut o = SessionOutcome::from_annotation(a, history);
            if !contiguous {
                o.history_complete = false;
                o.training = None;
            }
            o
        })
        .collect()
}

fn non_empty<'a>(group: &'a [SessionOutcome], what: &str) -> Result<&'a [SessionOutcome], EvalError> {
    if group.is_empty() {
        Err(EvalError::EmptyGroup(what.to_string()))
    } else {
        Ok(group)
    }
}

/// Pooled success rate over all sessions.
pub fn macro_success_rate(group: &[SessionOutcome]) -> Result<f64, EvalError> {
    let g = non_empty(group, "macro success rate")?;
    Ok(100.0 * g.iter().filter(|o| o.success).count() as f64 / g.len() as f64)
}

/// Mean of per-task success rates, weighting each task equally.
pub fn micro_success_rate(group: &[SessionOutcome]) -> Result<f64, EvalError> {
    let g = non_empty(group, "micro success rate")?;
    let mut per_task: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for o in g {
        let e = per_task.entry(o.task.as_str()).or_default();
        e.0 += o.success as u32;
        e.1 += 1;
    }
    let sum: f64 = per_task.values().map(|(s, n)| *s as f64 / *n as f64).sum();
    Ok(100.0 * sum / per_task.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepErrorRate {
    pub overall: f64,
    /// Mistakes per category over attempted steps; a step may count in
    /// several categories.
    pub by_category: BTreeMap<MistakeCategory, f64>,
    pub erroneous_steps: u64,
    pub attempted_steps: u64,
}

/// Pooled step error rate: erroneous steps over attempted steps.
pub fn step_error_rate(group: &[SessionOutcome]) -> Result<StepErrorRate, EvalError> {
    let attempted: u64 = group.iter().map(|o| o.n_steps_attempted as u64).sum();
    if attempted == 0 {
        return Err(EvalError::EmptyGroup("no attempted steps".into()));
    }
    let erroneous: u64 = group.iter().map(|o| o.n_erroneous_steps as u64).sum();
    let by_category = MistakeCategory::ALL
        .iter()
        .map(|c| {
            let n: u64 = group
                .iter()
                .map(|o| *o.mistakes_by_category.get(c).unwrap_or(&0) as u64)
                .sum();
            (*c, 100.0 * n as f64 / attempted as f64)
        })
        .collect();
    Ok(StepErrorRate {
        overall: 100.0 * erroneous as f64 / attempted as f64,
        by_category,
        erroneous_steps: erroneous,
        attempted_steps: attempted,
    })
}

/// S-ER(a) − S-ER(b) in percentage points; positive when `b` errs less.
pub fn error_reduction(a: &[SessionOutcome], b: &[SessionOutcome]) -> Result<f64, EvalError> {
    Ok(step_error_rate(a)?.overall - step_error_rate(b)?.overall)
}

pub fn mean_completion_time(group: &[SessionOutcome]) -> Result<f64, EvalError> {
    let g = non_empty(group, "completion time")?;
    Ok(g.iter().map(|o| o.duration_sec).sum::<f64>() / g.len() as f64)
}

/// Two-decimal rendering used by every rate and time column.
pub fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}


#[cfg(test)]
mod tests {
    use super::test_support::outcome;
    use super::*;
    use proptest::prelude::*;

    fn with_steps(attempted: u32, erroneous: u32) -> SessionOutcome {
        SessionOutcome {
            n_steps_attempted: attempted,
            n_erroneous_steps: erroneous,
            ..outcome("t", Condition::AI, true)
        }
    }

    #[test]
    fn macro_rates() {
        let mut g: Vec<_> = (0..10).map(|i| outcome("t", Condition::AI, i < 7)).collect();
        assert_eq!(fmt2(macro_success_rate(&g).unwrap()), "70.00");
        g.iter_mut().for_each(|o| o.success = false);
        assert_eq!(macro_success_rate(&g).unwrap(), 0.0);
        assert_eq!(macro_success_rate(&[outcome("t", Condition::AI, true)]).unwrap(), 100.0);
        assert!(matches!(macro_success_rate(&[]), Err(EvalError::EmptyGroup(_))));
    }

    #[test]
    fn micro_weights_tasks_equally() {
        let balanced = [
            outcome("a", Condition::AI, true),
            outcome("a", Condition::AI, true),
            outcome("b", Condition::AI, false),
            outcome("b", Condition::AI, false),
        ];
        assert_eq!(micro_success_rate(&balanced).unwrap(), 50.0);
        assert_eq!(macro_success_rate(&balanced).unwrap(), 50.0);
        let skewed = [
            outcome("a", Condition::AI, true),
            outcome("a", Condition::AI, true),
            outcome("a", Condition::AI, true),
            outcome("b", Condition::AI, false),
        ];
        assert_eq!(micro_success_rate(&skewed).unwrap(), 50.0);
        assert_eq!(macro_success_rate(&skewed).unwrap(), 75.0);
    }

    #[test]
    fn step_error_examples() {
        // 23 of 140 = 0.164285...
        let mut g: Vec<_> = (0..10).map(|_| with_steps(14, 0)).collect();
        for (i, e) in [3, 3, 3, 2, 2, 2, 2, 2, 2, 2].iter().enumerate() {
            g[i].n_erroneous_steps = *e;
        }
        let r = step_error_rate(&g).unwrap();
        assert_eq!((r.erroneous_steps, r.attempted_steps), (23, 140));
        assert_eq!(fmt2(r.overall), "16.43");
        assert_eq!(step_error_rate(&[with_steps(5, 0)]).unwrap().overall, 0.0);
        assert_eq!(step_error_rate(&[with_steps(1, 1)]).unwrap().overall, 100.0);
        assert!(step_error_rate(&[with_steps(0, 0)]).is_err());
    }

    #[test]
    fn error_reduction_examples() {
        // 38.75% = 31/80; 16.43% = 23/140.
        let ua = [with_steps(80, 31)];
        let ai = [with_steps(140, 23)];
        assert_eq!(fmt2(error_reduction(&ua, &ai).unwrap()), "22.32");
        assert_eq!(error_reduction(&ai, &ai).unwrap(), 0.0);
        assert_eq!(error_reduction(&[with_steps(1, 0)], &[with_steps(1, 1)]).unwrap(), -100.0);
    }

    #[test]
    fn completion_time() {
        let mut a = outcome("t", Condition::AI, true);
        let mut b = a.clone();
        a.duration_sec = 180.0;
        b.duration_sec = 193.08;
        assert_eq!(fmt2(mean_completion_time(&[a.clone(), b]).unwrap()), "186.54");
        a.duration_sec = 100.0;
        assert_eq!(mean_completion_time(&[a]).unwrap(), 100.0);
        assert!(mean_completion_time(&[]).is_err());
    }

    #[test]
    fn outcomes_carry_training() {
        use crate::annotations::{Interval, StepMistake, StepSegment};
        use crate::taskmodel::StepId;
        let ann = |attempt: u32, condition: Condition| SessionAnnotation {
            session_id: format!("p1_tea_{attempt}"),
            participant: "p1".into(),
            task: "tea".into(),
            condition,
            attempt_index: attempt,
            success: false,
            comment: None,
            duration: Interval {
                start_sec: 0.0,
                end_sec: 10.0,
            },
            steps: vec![
                StepSegment {
                    step: StepId(1),
                    start_sec: 0.0,
                    end_sec: 5.0,
                },
                StepSegment {
                    step: StepId(2),
                    start_sec: 5.0,
                    end_sec: 10.0,
                },
            ],
            out_of_order: false,
            step_mistakes: vec![
                StepMistake {
                    step: StepId(1),
                    category: MistakeCategory::WrongAction,
                    critical: false,
                    description: String::new(),
                },
                StepMistake {
                    step: StepId(1),
                    category: MistakeCategory::WrongObject,
                    critical: true,
                    description: String::new(),
                },
            ],
            sync_offset_sec: None,
        };
        let anns = vec![ann(3, Condition::PI), ann(1, Condition::AI), ann(2, Condition::UA)];
        let out = derive_outcomes(&anns);
        assert_eq!(out[0].history, vec![Condition::AI, Condition::UA]);
        assert_eq!(out[0].training, Some(Condition::AI));
        assert_eq!(out[1].training, None);
        assert_eq!(out[2].training, Some(Condition::AI));
        assert_eq!((out[1].n_steps_attempted, out[1].n_erroneous_steps), (2, 1));
        assert!(out[1].has_critical);
        assert_eq!(out[1].mistakes_by_category.values().sum::<u32>(), 2);

        // Attempt 2 without attempt 1 has no known training.
        let out = derive_outcomes(&[ann(2, Condition::UA)]);
        assert!(!out[0].history_complete);
        assert_eq!(out[0].training, None);
    }

    fn arb_group() -> impl Strategy<Value = Vec<SessionOutcome>> {
        prop::collection::vec((0usize..4, any::<bool>(), 1u32..20, 0u32..20), 1..40).prop_map(|v| {
            v.into_iter()
                .map(|(t, s, att, err)| SessionOutcome {
                    n_steps_attempted: att,
                    n_erroneous_steps: err.min(att),
                    ..outcome(&format!("task{t}"), Condition::AI, s)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn rates_are_bounded(g in arb_group()) {
            for r in [macro_success_rate(&g).unwrap(), micro_success_rate(&g).unwrap(), step_error_rate(&g).unwrap().overall] {
                prop_assert!((0.0..=100.0).contains(&r));
            }
        }

        #[test]
        fn step_error_rate_ignores_order(mut g in arb_group(), seed: u64) {
            let before = step_error_rate(&g).unwrap();
            let n = g.len();
            g.rotate_left((seed % n as u64) as usize);
            g.reverse();
            prop_assert_eq!(step_error_rate(&g).unwrap(), before);
        }

        #[test]
        fn micro_equals_macro_for_equal_task_sizes(per_task in 1usize..6, tasks in 1usize..5, bits in prop::collection::vec(any::<bool>(), 30)) {
            let g: Vec<_> = (0..tasks)
                .flat_map(|t| (0..per_task).map(move |i| (t, i)))
                .map(|(t, i)| outcome(&format!("t{t}"), Condition::AI, bits[(t * per_task + i) % bits.len()]))
                .collect();
            let (mi, ma) = (micro_success_rate(&g).unwrap(), macro_success_rate(&g).unwrap());
            prop_assert!((mi - ma).abs() < 1e-9);
        }
    }
}
