//! Batch commands: replay, eval, report and simulate.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use taskpilot_core::conductor::{replay_log, ReplayError};
use taskpilot_core::evalkit::{evaluate_corpus, render_text, write_report, EvalError, MetricsReport, COSTS_FILE};
use taskpilot_core::msgbus::{read_log, LogError};
use taskpilot_core::simharness::{corpus_hash, run_experiment, ExperimentConfig, SimError};
use taskpilot_core::taskmodel::{build_task_graph, load_task_library};

use crate::{fail, SimulateArgs};

pub fn cmd_replay(path: &Path) -> anyhow::Result<()> {
    let read = read_log(path).map_err(|e| match e {
        LogError::Io { .. } => fail(2, e.to_string()),
        LogError::LogCorrupt { .. } => fail(4, format!("{}: {e}", path.display())),
    })?;
    let report = replay_log(&read.log).map_err(|e| match e {
        ReplayError::Conductor(_) => anyhow::Error::new(e).context(format!("replaying {}", path.display())),
        _ => fail(4, format!("{}: {e}", path.display())),
    })?;
    if let Some(m) = &report.mismatch {
        println!("mismatch at effect #{}", m.index);
        println!("- recorded:   {}", m.recorded.as_deref().unwrap_or("<none>"));
        println!("+ recomputed: {}", m.recomputed.as_deref().unwrap_or("<none>"));
        return Err(fail(1, format!("{}: replay diverged from the recorded effects", path.display())));
    }
    println!(
        "replay ok: {} ({} inputs, {} effects identical)",
        report.session_id, report.events_replayed, report.effects_compared
    );
    Ok(())
}

fn evaluate(corpus: &Path) -> anyhow::Result<MetricsReport> {
    if !corpus.is_dir() {
        return Err(fail(2, format!("corpus directory {} does not exist", corpus.display())));
    }
    evaluate_corpus(corpus).map_err(|e| match e {
        EvalError::InvalidAnnotations(files) => {
            for (file, why) in &files {
                eprintln!("invalid annotation {file}: {why}");
            }
            let names: Vec<&str> = files.iter().map(|(f, _)| f.as_str()).collect();
            fail(1, format!("invalid annotation file(s): {}", names.join(", ")))
        }
        EvalError::EmptyGroup(why) => fail(2, format!("{}: {why}", corpus.display())),
        EvalError::Io { .. } => fail(2, e.to_string()),
        other => anyhow::Error::new(other),
    })
}

pub fn cmd_eval(corpus: &Path) -> anyhow::Result<()> {
    print!("{}", render_text(&evaluate(corpus)?));
    Ok(())
}

pub fn cmd_report(corpus: &Path, out: &Path) -> anyhow::Result<()> {
    let report = evaluate(corpus)?;
    for path in write_report(&report, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn is_corpus_file(name: &str) -> bool {
    name.ends_with(".jsonl") || name.ends_with(".annotation.json") || name == COSTS_FILE
}

pub fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| fail(2, format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_toml_str(&text).map_err(|e| fail(2, e.to_string()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.participants {
        config.participants = n;
    }
    if config.participants == 0 {
        return Err(fail(2, "the experiment has no participants"));
    }
    let library = load_task_library(&args.taskdir)
        .map_err(|e| fail(2, format!("task library {}: {e}", args.taskdir.display())))?;
    let mut graphs = BTreeMap::new();
    for id in &config.tasks {
        let def = library.get(id).ok_or_else(|| {
            let known: Vec<&str> = library.keys().map(String::as_str).collect();
            fail(2, format!("unknown task `{id}` (available: {})", known.join(", ")))
        })?;
        graphs.insert(id.clone(), Arc::new(build_task_graph(def)?));
    }

    if args.out.is_dir() {
        let existing: Vec<_> = std::fs::read_dir(&args.out)?
            .filter_map(|e| e.ok())
            .filter(|e| is_corpus_file(&e.file_name().to_string_lossy()))
            .map(|e| e.path())
            .collect();
        if !existing.is_empty() {
            if !args.force {
                return Err(fail(
                    2,
                    format!("{} already holds a corpus; pass --force to replace it", args.out.display()),
                ));
            }
            for p in existing {
                std::fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
            }
        }
    }

    let corpus = run_experiment(&config, &graphs).map_err(|e| match e {
        SimError::NoParticipants | SimError::InvalidProfile(_) | SimError::Config(_) | SimError::UnknownTask(_) => {
            fail(2, e.to_string())
        }
        other => anyhow::Error::new(other),
    })?;
    corpus.write(&args.out)?;
    println!("{} sessions", corpus.sessions.len());
    println!("corpus hash: {}", corpus_hash(&args.out)?);
    Ok(())
}
