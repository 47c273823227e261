//! Grouped metrics report over a session corpus, plus its text and CSV
//! renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    aggregate_survey, cost_summary, derive_outcomes, fmt2, format_sig, load_cost_records, load_survey_csv,
    macro_success_rate, mean_completion_time, micro_success_rate, pareto_frontier, step_error_rate,
    step_guidance_alignment, AlignmentStats, CostRecord, CostSummary, EvalError, ParetoPoint, SessionOutcome,
    SurveyResponse, SurveySummary,
};
use crate::annotations::{load_annotation, MistakeCategory, SessionAnnotation};
use crate::conductor::Condition;
use crate::msgbus::{read_log, SessionLog};

/// (training, guidance) rows in report order. `None` training means a
/// first attempt.
pub const TABLE1_ORDER: [(Option<Condition>, Condition); 9] = [
    (None, Condition::UA),
    (None, Condition::PI),
    (None, Condition::AI),
    (Some(Condition::AI), Condition::UA),
    (Some(Condition::AI), Condition::PI),
    (Some(Condition::PI), Condition::UA),
    (Some(Condition::PI), Condition::AI),
    (Some(Condition::UA), Condition::AI),
    (Some(Condition::UA), Condition::PI),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub training: Option<Condition>,
    pub guidance: Condition,
    pub n: usize,
    pub m_sr: f64,
    /// Absent when no session in the group attempted a step.
    pub s_er: Option<f64>,
    pub mean_time_sec: f64,
}

/// Sessions beyond the second attempt, or with earlier attempts missing,
/// grouped by their full exposure history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    /// Earlier conditions joined with `>`, or `?` where unknown.
    pub history: String,
    pub guidance: Condition,
    pub n: usize,
    pub m_sr: f64,
    pub s_er: Option<f64>,
    pub mean_time_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroRow {
    pub task: String,
    pub condition: Condition,
    pub n: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Per-guidance totals over every attempt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub condition: Condition,
    pub n: usize,
    pub m_sr: f64,
    pub mu_sr: f64,
    pub s_er: Option<f64>,
    pub by_category: BTreeMap<MistakeCategory, f64>,
    pub critical_sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sessions: usize,
    pub table1: Vec<GroupRow>,
    pub history: Vec<HistoryRow>,
    pub conditions: Vec<ConditionRow>,
    pub micro: Vec<MicroRow>,
    /// First-attempt S-ER of each unassisted baseline minus that of AI, in
    /// percentage points.
    pub error_reduction: Vec<(Condition, f64)>,
    pub alignment: Option<AlignmentStats>,
    pub survey: Option<SurveySummary>,
    pub cost: Option<CostSummary>,
    pub pareto_candidates: Vec<ParetoPoint>,
    pub pareto_frontier: Vec<ParetoPoint>,
}

#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub outcomes: Vec<SessionOutcome>,
    pub surveys: Vec<SurveyResponse>,
    pub costs: Vec<CostRecord>,
    pub alignment: Vec<AlignmentStats>,
}

fn group_stats(group: &[SessionOutcome]) -> Result<(f64, Option<f64>, f64), EvalError> {
    let s_er = match step_error_rate(group) {
        Ok(r) => Some(r.overall),
        Err(EvalError::EmptyGroup(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((macro_success_rate(group)?, s_er, mean_completion_time(group)?))
}

fn history_label(o: &SessionOutcome) -> String {
    if o.history_complete {
        o.history.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(">")
    } else {
        let mut known: Vec<&str> = o.history.iter().map(|c| c.as_str()).collect();
        known.push("?");
        known.join(">")
    }
}

pub fn build_report(inputs: &ReportInputs) -> Result<MetricsReport, EvalError> {
    let outcomes = &inputs.outcomes;
    if outcomes.is_empty() {
        return Err(EvalError::EmptyGroup("no sessions".into()));
    }

    let mut by_key: BTreeMap<(Option<Condition>, Condition), Vec<SessionOutcome>> = BTreeMap::new();
    let mut by_history: BTreeMap<(String, Condition), Vec<SessionOutcome>> = BTreeMap::new();
    for o in outcomes {
        if o.attempt_index == 1 {
            by_key.entry((None, o.condition)).or_default().push(o.clone());
        } else if o.attempt_index == 2 && o.history_complete {
            by_key.entry((o.training, o.condition)).or_default().push(o.clone());
        } else {
            by_history.entry((history_label(o), o.condition)).or_default().push(o.clone());
        }
    }
    let mut keys: Vec<(Option<Condition>, Condition)> =
        TABLE1_ORDER.iter().copied().filter(|k| by_key.contains_key(k)).collect();
    keys.extend(by_key.keys().copied().filter(|k| !TABLE1_ORDER.contains(k)));
    let mut table1 = Vec::new();
    for (training, guidance) in keys {
        let g = &by_key[&(training, guidance)];
        let (m_sr, s_er, t) = group_stats(g)?;
        table1.push(GroupRow {
            training,
            guidance,
            n: g.len(),
            m_sr,
            s_er,
            mean_time_sec: t,
        });
    }
    let mut history = Vec::new();
    for ((label, guidance), g) in &by_history {
        let (m_sr, s_er, t) = group_stats(g)?;
        history.push(HistoryRow {
            history: label.clone(),
            guidance: *guidance,
            n: g.len(),
            m_sr,
            s_er,
            mean_time_sec: t,
        });
    }

    let mut conditions = Vec::new();
    let mut micro = Vec::new();
    for c in Condition::ALL {
        let g: Vec<SessionOutcome> = outcomes.iter().filter(|o| o.condition == c).cloned().collect();
        if g.is_empty() {
            continue;
        }
        let ser = step_error_rate(&g).ok();
        conditions.push(ConditionRow {
            condition: c,
            n: g.len(),
            m_sr: macro_success_rate(&g)?,
            mu_sr: micro_success_rate(&g)?,
            s_er: ser.as_ref().map(|r| r.overall),
            by_category: ser.map(|r| r.by_category).unwrap_or_default(),
            critical_sessions: g.iter().filter(|o| o.has_critical).count(),
        });
        let mut per_task: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for o in &g {
            let e = per_task.entry(o.task.as_str()).or_default();
            e.0 += 1;
            e.1 += o.success as usize;
        }
        for (task, (n, successes)) in per_task {
            micro.push(MicroRow {
                task: task.to_string(),
                condition: c,
                n,
                successes,
                rate: 100.0 * successes as f64 / n as f64,
            });
        }
    }
    micro.sort_by(|a, b| (&a.task, a.condition).cmp(&(&b.task, b.condition)));

    let first = |c: Condition| -> Vec<SessionOutcome> {
        outcomes
            .iter()
            .filter(|o| o.attempt_index == 1 && o.condition == c)
            .cloned()
            .collect()
    };
    let ai_first = first(Condition::AI);
    let error_reduction = [Condition::UA, Condition::PI]
        .into_iter()
        .filter_map(|c| super::error_reduction(&first(c), &ai_first).ok().map(|pp| (c, pp)))
        .collect();

    let alignment = inputs.alignment.iter().copied().reduce(AlignmentStats::merge);
    let survey = if inputs.surveys.is_empty() {
        None
    } else {
        Some(aggregate_survey(&inputs.surveys)?)
    };

    let cost_of: BTreeMap<&str, f64> = inputs
        .costs
        .iter()
        .map(|r| (r.session_id.as_str(), r.session_cost()))
        .collect();
    let cost = if inputs.costs.is_empty() {
        None
    } else {
        let joined: Vec<SessionOutcome> = outcomes
            .iter()
            .filter(|o| cost_of.contains_key(o.session_id.as_str()))
            .cloned()
            .collect();
        let m_sr = if joined.is_empty() {
            macro_success_rate(outcomes)?
        } else {
            macro_success_rate(&joined)?
        };
        Some(cost_summary(&inputs.costs, m_sr)?)
    };

    let pareto_candidates: Vec<ParetoPoint> = conditions
        .iter()
        .map(|row| {
            let g: Vec<&SessionOutcome> = outcomes.iter().filter(|o| o.condition == row.condition).collect();
            let total: f64 = g.iter().map(|o| cost_of.get(o.session_id.as_str()).copied().unwrap_or(0.0)).sum();
            ParetoPoint {
                label: row.condition.to_string(),
                cost: total / g.len() as f64,
                success: row.m_sr,
            }
        })
        .collect();
    let pareto_frontier = pareto_frontier(&pareto_candidates);

    Ok(MetricsReport {
        sessions: outcomes.len(),
        table1,
        history,
        conditions,
        micro,
        error_reduction,
        alignment,
        survey,
        cost,
        pareto_candidates,
        pareto_frontier,
    })
}

fn opt2(x: Option<f64>) -> String {
    x.map(fmt2).unwrap_or_else(|| "-".into())
}

fn training_label(t: Option<Condition>) -> &'static str {
    t.map_or("None", Condition::as_str)
}

pub fn render_text(r: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Sessions: {}", r.sessions);
    let _ = writeln!(out);
    let _ = writeln!(out, "Task performance by training and guidance");
    let _ = writeln!(
        out,
        "{:<10}{:<10}{:>5}{:>10}{:>10}{:>10}",
        "Training", "Guidance", "n", "M-SR(%)", "S-ER(%)", "Time(s)"
    );
    for row in &r.table1 {
        let _ = writeln!(
            out,
            "{:<10}{:<10}{:>5}{:>10}{:>10}{:>10}",
            training_label(row.training),
            row.guidance.as_str(),
            row.n,
            fmt2(row.m_sr),
            opt2(row.s_er),
            fmt2(row.mean_time_sec)
        );
    }
    if !r.history.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Later attempts by exposure history");
        let _ = writeln!(
            out,
            "{:<14}{:<10}{:>5}{:>10}{:>10}{:>10}",
            "History", "Guidance", "n", "M-SR(%)", "S-ER(%)", "Time(s)"
        );
        for row in &r.history {
            let _ = writeln!(
                out,
                "{:<14}{:<10}{:>5}{:>10}{:>10}{:>10}",
                row.history,
                row.guidance.as_str(),
                row.n,
                fmt2(row.m_sr),
                opt2(row.s_er),
                fmt2(row.mean_time_sec)
            );
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "By guidance condition, all attempts");
    let mut header = format!("{:<10}{:>5}{:>10}{:>10}{:>10}", "Guidance", "n", "M-SR(%)", "mu-SR(%)", "S-ER(%)");
    for c in MistakeCategory::ALL {
        let _ = write!(header, "{:>14}", c.as_str());
    }
    let _ = writeln!(header, "{:>10}", "critical");
    out.push_str(&header);
    for row in &r.conditions {
        let _ = write!(
            out,
            "{:<10}{:>5}{:>10}{:>10}{:>10}",
            row.condition.as_str(),
            row.n,
            fmt2(row.m_sr),
            fmt2(row.mu_sr),
            opt2(row.s_er)
        );
        for c in MistakeCategory::ALL {
            let _ = write!(out, "{:>14}", opt2(row.by_category.get(&c).copied()));
        }
        let _ = writeln!(out, "{:>10}", row.critical_sessions);
    }
    for (baseline, pp) in &r.error_reduction {
        let _ = writeln!(out, "Error reduction {baseline} -> AI (first attempts): {} pp", fmt2(*pp));
    }

    if let Some(a) = &r.alignment {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Step-guidance alignment: {}% ({} of {} instructions)",
            fmt2(a.percentage()),
            a.aligned,
            a.total
        );
    }

    if let Some(s) = &r.survey {
        let _ = writeln!(out);
        let _ = writeln!(out, "Survey");
        let _ = writeln!(out, "{:<16}{:>5}{:>8}{:>10}", "Question", "n", "Mean", "Pct(%)");
        for q in &s.questions {
            let _ = writeln!(out, "{:<16}{:>5}{:>8}{:>10}", q.question, q.n, fmt2(q.mean), fmt2(q.percentage));
        }
        let _ = writeln!(
            out,
            "{:<16}{:>5}{:>8}{:>10}",
            "overall",
            "",
            fmt2(s.overall_mean),
            fmt2(s.overall_percentage)
        );
        for c in &s.categorical {
            let shares: Vec<String> = c
                .shares
                .iter()
                .map(|(label, k, pct)| format!("{label} {k} ({pct:.1}%)"))
                .collect();
            let _ = writeln!(out, "{} (n={}): {}", c.question, c.n, shares.join(", "));
        }
    }

    if let Some(c) = &r.cost {
        let _ = writeln!(out);
        let _ = writeln!(out, "Cost");
        let _ = writeln!(out, "Sessions with usage records: {}", c.sessions);
        let _ = writeln!(out, "Mean cost per session: ${}", format_sig(c.mean_cost_per_session, 2));
        let _ = writeln!(out, "Cost per success-rate point: ${}", format_sig(c.cost_to_success, 2));
        if let Some(h) = c.hardware_capex {
            let _ = writeln!(out, "Hardware (one-off): ${h:.0}");
        }
    }

    if !r.pareto_candidates.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Cost/success frontier");
        for p in &r.pareto_candidates {
            let on = r.pareto_frontier.iter().any(|f| f.label == p.label);
            let _ = writeln!(
                out,
                "{:<10}${:<12}{:>8}%{}",
                p.label,
                format_sig(p.cost, 2),
                fmt2(p.success),
                if on { "  efficient" } else { "" }
            );
        }
    }
    out
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing csv to memory");
    String::from_utf8(w.into_inner().expect("flushing csv to memory")).expect("csv is utf-8")
}

/// Grouped rows as CSV: `section` is `table1`, `history` or `condition`.
pub fn render_csv(r: &MetricsReport) -> String {
    csv_string(|w| {
        w.write_record(["section", "training", "guidance", "n", "m_sr", "s_er", "mean_time_sec"])?;
        for row in &r.table1 {
            w.write_record([
                "table1",
                training_label(row.training),
                row.guidance.as_str(),
                &row.n.to_string(),
                &fmt2(row.m_sr),
                &opt2(row.s_er),
                &fmt2(row.mean_time_sec),
            ])?;
        }
        for row in &r.history {
            w.write_record([
                "history",
                &row.history,
                row.guidance.as_str(),
                &row.n.to_string(),
                &fmt2(row.m_sr),
                &opt2(row.s_er),
                &fmt2(row.mean_time_sec),
            ])?;
        }
        for row in &r.conditions {
            w.write_record([
                "condition",
                "",
                row.condition.as_str(),
                &row.n.to_string(),
                &fmt2(row.m_sr),
                &opt2(row.s_er),
                "",
            ])?;
        }
        Ok(())
    })
}

pub fn render_micro_csv(r: &MetricsReport) -> String {
    csv_string(|w| {
        w.write_record(["task", "condition", "n", "successes", "success_rate"])?;
        for row in &r.micro {
            w.write_record([
                row.task.as_str(),
                row.condition.as_str(),
                &row.n.to_string(),
                &row.successes.to_string(),
                &fmt2(row.rate),
            ])?;
        }
        Ok(())
    })
}

/// Writes `report.txt`, `report.csv` and `micro.csv` into `out_dir`.
pub fn write_report(r: &MetricsReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, EvalError> {
    let dir = out_dir.as_ref();
    let io_err = |path: &Path, source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in [
        ("report.txt", render_text(r)),
        ("report.csv", render_csv(r)),
        ("micro.csv", render_micro_csv(r)),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Everything found in a corpus directory.
#[derive(Debug, Default)]
pub struct Corpus {
    pub annotations: Vec<SessionAnnotation>,
    pub logs: BTreeMap<String, SessionLog>,
    pub surveys: Vec<SurveyResponse>,
    pub costs: Vec<CostRecord>,
    /// Annotation files that failed to load, with the reason.
    pub invalid: Vec<(String, String)>,
}

pub const SURVEY_FILE: &str = "survey.csv";
pub const COSTS_FILE: &str = "costs.jsonl";
const ANNOTATION_SUFFIX: &str = ".annotation.json";

/// Reads `<session>.annotation.json` and `<session>.jsonl` files plus the
/// optional `survey.csv` and `costs.jsonl`. Broken annotations are
/// collected rather than aborting the load; a broken log is an error.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus, EvalError> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| EvalError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    let mut corpus = Corpus::default();
    for path in paths {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if name.ends_with(ANNOTATION_SUFFIX) {
            match load_annotation(&path) {
                Ok(a) => corpus.annotations.push(a),
                Err(e) => corpus.invalid.push((name.to_string(), e.to_string())),
            }
        } else if name == COSTS_FILE {
            corpus.costs = load_cost_records(&path)?;
        } else if name == SURVEY_FILE {
            corpus.surveys = load_survey_csv(&path)?;
        } else if name.ends_with(".jsonl") {
            let read = read_log(&path).map_err(|e| EvalError::Parse {
                file: name.to_string(),
                detail: e.to_string(),
            })?;
            corpus.logs.insert(read.log.session_id.clone(), read.log);
        }
    }
    Ok(corpus)
}

/// Loads a corpus and builds its report. Any invalid annotation fails the
/// whole evaluation; so does a corpus without annotations.
pub fn evaluate_corpus(dir: impl AsRef<Path>) -> Result<MetricsReport, EvalError> {
    let corpus = load_corpus(dir)?;
    if !corpus.invalid.is_empty() {
        return Err(EvalError::InvalidAnnotations(corpus.invalid));
    }
    if corpus.annotations.is_empty() {
        return Err(EvalError::EmptyGroup("corpus has no annotations".into()));
    }
    for a in &corpus.annotations {
        let dangling = a.dangling_mistakes();
        if !dangling.is_empty() {
            tracing::warn!(session = %a.session_id, ?dangling, "mistakes on steps without a segment are not counted");
        }
    }
    let mut alignment = Vec::new();
    for a in &corpus.annotations {
        let Some(log) = corpus.logs.get(&a.session_id) else {
            continue;
        };
        match step_guidance_alignment(log, a) {
            Ok(s) => alignment.push(s),
            Err(EvalError::NoInstructions) => {}
            Err(e) => return Err(e),
        }
    }
    build_report(&ReportInputs {
        outcomes: derive_outcomes(&corpus.annotations),
        surveys: corpus.surveys,
        costs: corpus.costs,
        alignment,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::outcome;
    use super::*;
    use crate::services::CallUsage;

    fn with(task: &str, cond: Condition, training: Option<Condition>, attempt: u32, success: bool) -> SessionOutcome {
        let history = match (attempt, training) {
            (1, _) => Vec::new(),
            (_, Some(t)) => vec![t],
            _ => Vec::new(),
        };
        SessionOutcome {
            session_id: format!("{task}-{cond}-{attempt}-{success}"),
            attempt_index: attempt,
            training,
            history_complete: history.len() + 1 == attempt as usize,
            history,
            ..outcome(task, cond, success)
        }
    }

    #[test]
    fn rows_follow_canonical_order() {
        let outcomes = vec![
            with("a", Condition::AI, Some(Condition::UA), 2, true),
            with("a", Condition::UA, None, 1, false),
            with("a", Condition::AI, None, 1, true),
            with("a", Condition::PI, Some(Condition::AI), 2, true),
        ];
        let r = build_report(&ReportInputs {
            outcomes,
            ..Default::default()
        })
        .unwrap();
        let keys: Vec<_> = r.table1.iter().map(|g| (g.training, g.guidance)).collect();
        assert_eq!(
            keys,
            vec![
                (None, Condition::UA),
                (None, Condition::AI),
                (Some(Condition::AI), Condition::PI),
                (Some(Condition::UA), Condition::AI),
            ]
        );
        assert!(r.history.is_empty());
    }

    #[test]
    fn later_attempts_go_to_history_table() {
        let mut third = with("a", Condition::AI, None, 3, true);
        third.history = vec![Condition::UA, Condition::PI];
        third.history_complete = true;
        let mut orphan = with("a", Condition::PI, None, 2, false);
        orphan.history_complete = false;
        let r = build_report(&ReportInputs {
            outcomes: vec![third, orphan],
            ..Default::default()
        })
        .unwrap();
        assert!(r.table1.is_empty());
        let labels: Vec<_> = r.history.iter().map(|h| (h.history.as_str(), h.guidance)).collect();
        assert_eq!(labels, vec![("?", Condition::PI), ("UA>PI", Condition::AI)]);
    }

    #[test]
    fn micro_rows_and_csv() {
        let outcomes = vec![
            with("a", Condition::AI, None, 1, true),
            with("a", Condition::AI, None, 1, false),
            with("b", Condition::AI, None, 1, true),
        ];
        let r = build_report(&ReportInputs {
            outcomes,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(r.conditions[0].mu_sr, 75.0);
        let csv = render_micro_csv(&r);
        assert_eq!(
            csv,
            "task,condition,n,successes,success_rate\na,AI,2,1,50.00\nb,AI,1,1,100.00\n"
        );
        let grouped = render_csv(&r);
        assert!(grouped.starts_with("section,training,guidance,n,m_sr,s_er,mean_time_sec\ntable1,None,AI,3,66.67,0.00,100.00\n"));
    }

    #[test]
    fn cost_and_frontier() {
        let outcomes = vec![with("a", Condition::AI, None, 1, true), with("a", Condition::UA, None, 1, false)];
        let costs = vec![CostRecord {
            session_id: outcomes[0].session_id.clone(),
            calls: vec![CallUsage {
                prompt_tokens: 2500,
                completion_tokens: 500,
            }],
            price: super::super::PriceTable {
                per_1k_prompt: 0.0005,
                per_1k_completion: 0.0015,
            },
            hardware_capex: None,
        }];
        let r = build_report(&ReportInputs {
            outcomes,
            costs,
            ..Default::default()
        })
        .unwrap();
        let c = r.cost.unwrap();
        assert!((c.cost_to_success - 0.002 / 100.0).abs() < 1e-15);
        let labels: Vec<_> = r.pareto_frontier.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["UA", "AI"]);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(build_report(&ReportInputs::default()), Err(EvalError::EmptyGroup(_))));
    }

    #[test]
    fn corpus_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(evaluate_corpus(dir.path()), Err(EvalError::EmptyGroup(_))));
        std::fs::write(dir.path().join("bad.annotation.json"), "{}").unwrap();
        match evaluate_corpus(dir.path()) {
            Err(EvalError::InvalidAnnotations(v)) => assert_eq!(v[0].0, "bad.annotation.json"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(evaluate_corpus(dir.path().join("missing")), Err(EvalError::Io { .. })));
    }
}
