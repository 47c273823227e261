//! Task definitions, the task library and the prerequisite graph the
//! conductor walks.
//!
//! A task is a list of steps in canonical (recipe) order, numbered `1..=N`.
//! Each step may name prerequisite steps; the canonical order must be a
//! topological order of that relation. Task definitions live one per file in
//! a library directory as TOML documents:
//!
//! ```toml
//! task_id = "tea"
//! title = "Make a cup of tea"
//! goal = "Brew one mug of black tea."
//!
//! [[steps]]
//! id = 1
//! instruction = "Fill the kettle with water"
//! prerequisites = []
//! timer_threshold_sec = 30
//! perception_label = "fill_kettle"
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Canonical 1-based index of a step within its task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepId(pub u32);

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for StepId {
    fn from(v: u32) -> Self {
        StepId(v)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {}{message}", field.as_ref().map(|f| format!("field `{f}`: ")).unwrap_or_default())]
    Parse {
        file: PathBuf,
        field: Option<String>,
        message: String,
    },
    #[error("task `{task_id}` is defined in both {first} and {second}")]
    DuplicateTask {
        task_id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("prerequisite cycle: {}", fmt_cycle(.cycle))]
    Cycle { cycle: Vec<StepId> },
    #[error("step {step} requires later step {prerequisite}; canonical order must be topological")]
    NonCanonicalOrder { step: StepId, prerequisite: StepId },
    #[error("unknown step {0}")]
    UnknownStep(StepId),
}

fn fmt_cycle(cycle: &[StepId]) -> String {
    cycle.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" -> ")
}

/// One step of a task definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDef {
    pub id: StepId,
    /// Canonical phrasing; language services may rephrase it for speech.
    pub instruction: String,
    pub prerequisites: BTreeSet<StepId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timer_threshold_sec: Option<f64>,
    /// Label emitted by step classifiers for this step.
    pub perception_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDef {
    pub task_id: String,
    pub title: String,
    /// Brief description, the only guidance shown in the unassisted condition.
    pub goal: String,
    pub steps: Vec<StepDef>,
}

impl TaskDef {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("task definitions always serialize")
    }

    /// Checks the per-definition invariants (ids, prerequisite ranges, labels,
    /// thresholds). Acyclicity is checked by [`build_task_graph`].
    pub fn validate(&self) -> Result<(), TaskError> {
        let invalid = |field: String, reason: &str| TaskError::Invalid {
            field,
            reason: reason.to_string(),
        };
        if self.task_id.trim().is_empty() {
            return Err(invalid("task_id".into(), "must not be empty"));
        }
        if self.steps.is_empty() {
            return Err(invalid("steps".into(), "a task needs at least one step"));
        }
        let n = self.steps.len() as u32;
        let mut labels = HashSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            let expected = StepId(i as u32 + 1);
            if step.id != expected {
                return Err(invalid(
                    format!("steps[{i}].id"),
                    &format!("expected {expected}, ids must be 1..N in order"),
                ));
            }
            for p in &step.prerequisites {
                if *p == step.id {
                    return Err(invalid(
                        format!("steps[{i}].prerequisites"),
                        "a step cannot require itself",
                    ));
                }
                if p.0 == 0 || p.0 > n {
                    return Err(invalid(
                        format!("steps[{i}].prerequisites"),
                        &format!("step {p} is not in 1..{n}"),
                    ));
                }
            }
            if let Some(t) = step.timer_threshold_sec {
                if !(t.is_finite() && t > 0.0) {
                    return Err(invalid(
                        format!("steps[{i}].timer_threshold_sec"),
                        "must be a positive number",
                    ));
                }
            }
            if !labels.insert(step.perception_label.as_str()) {
                return Err(invalid(
                    format!("steps[{i}].perception_label"),
                    &format!("label `{}` is used twice", step.perception_label),
                ));
            }
        }
        Ok(())
    }
}

/// Loads every `*.toml` file in `dir` as a task definition.
pub fn load_task_library(dir: impl AsRef<Path>) -> Result<BTreeMap<String, TaskDef>, TaskError> {
    let dir = dir.as_ref();
    let io_err = |source| TaskError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "toml") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut library = BTreeMap::new();
    let mut origin: HashMap<String, PathBuf> = HashMap::new();
    for path in paths {
        let def = load_task_file(&path)?;
        if let Some(first) = origin.get(&def.task_id) {
            return Err(TaskError::DuplicateTask {
                task_id: def.task_id,
                first: first.clone(),
                second: path,
            });
        }
        origin.insert(def.task_id.clone(), path);
        library.insert(def.task_id.clone(), def);
    }
    Ok(library)
}

pub fn load_task_file(path: &Path) -> Result<TaskDef, TaskError> {
    let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let def = TaskDef::from_toml_str(&text).map_err(|e| TaskError::Parse {
        file: path.to_path_buf(),
        field: field_from_toml_error(&e),
        message: e.message().to_string(),
    })?;
    def.validate().map_err(|e| match e {
        TaskError::Invalid { field, reason } => TaskError::Parse {
            file: path.to_path_buf(),
            field: Some(field),
            message: reason,
        },
        other => other,
    })?;
    Ok(def)
}

// toml reports unknown/missing keys as "unknown field `x`" / "missing field `x`".
fn field_from_toml_error(e: &toml::de::Error) -> Option<String> {
    let msg = e.message();
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// Validated prerequisite graph of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    task_id: String,
    title: String,
    goal: String,
    nodes: BTreeMap<StepId, StepDef>,
}

/// Validates `def` and builds its graph. Fails on prerequisite cycles, and on
/// acyclic graphs whose canonical order is not topological.
pub fn build_task_graph(def: &TaskDef) -> Result<TaskGraph, TaskError> {
    def.validate()?;
    let nodes: BTreeMap<StepId, StepDef> =
        def.steps.iter().map(|s| (s.id, s.clone())).collect();
    if let Some(cycle) = find_cycle(&nodes) {
        return Err(TaskError::Cycle { cycle });
    }
    for step in nodes.values() {
        if let Some(&p) = step.prerequisites.iter().find(|p| **p > step.id) {
            return Err(TaskError::NonCanonicalOrder {
                step: step.id,
                prerequisite: p,
            });
        }
    }
    Ok(TaskGraph {
        task_id: def.task_id.clone(),
        title: def.title.clone(),
        goal: def.goal.clone(),
        nodes,
    })
}

/// Depth-first search over prerequisite edges; returns one cycle, closed
/// (first element repeated at the end), if any exists.
fn find_cycle(nodes: &BTreeMap<StepId, StepDef>) -> Option<Vec<StepId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        id: StepId,
        nodes: &BTreeMap<StepId, StepDef>,
        marks: &mut BTreeMap<StepId, Mark>,
        path: &mut Vec<StepId>,
    ) -> Option<Vec<StepId>> {
        marks.insert(id, Mark::Active);
        path.push(id);
        for &p in &nodes[&id].prerequisites {
            match marks[&p] {
                Mark::Active => {
                    let pos = path.iter().position(|s| *s == p).unwrap();
                    let mut cycle = path[pos..].to_vec();
                    cycle.push(p);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = visit(p, nodes, marks, path) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        path.pop();
        marks.insert(id, Mark::Done);
        None
    }

    let mut marks: BTreeMap<StepId, Mark> = nodes.keys().map(|k| (*k, Mark::New)).collect();
    for &id in nodes.keys() {
        if marks[&id] == Mark::New {
            let mut path = Vec::new();
            if let Some(c) = visit(id, nodes, &mut marks, &mut path) {
                return Some(c);
            }
        }
    }
    None
}

impl TaskGraph {
    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: StepId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn step(&self, id: StepId) -> Option<&StepDef> {
        self.nodes.get(&id)
    }

    /// Steps in canonical order.
    pub fn steps(&self) -> impl Iterator<Item = &StepDef> {
        self.nodes.values()
    }

    pub fn step_ids(&self) -> impl Iterator<Item = StepId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn step_by_label(&self, label: &str) -> Option<&StepDef> {
        self.nodes.values().find(|s| s.perception_label == label)
    }

    /// Prerequisite edges as `(prerequisite, step)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (StepId, StepId)> + '_ {
        self.nodes
            .values()
            .flat_map(|s| s.prerequisites.iter().map(move |p| (*p, s.id)))
    }

    pub fn to_def(&self) -> TaskDef {
        TaskDef {
            task_id: self.task_id.clone(),
            title: self.title.clone(),
            goal: self.goal.clone(),
            steps: self.nodes.values().cloned().collect(),
        }
    }

    fn check_known<'a>(&self, ids: impl IntoIterator<Item = &'a StepId>) -> Result<(), TaskError> {
        match ids.into_iter().find(|s| !self.contains(**s)) {
            Some(s) => Err(TaskError::UnknownStep(*s)),
            None => Ok(()),
        }
    }

    /// Uncompleted steps whose prerequisites are all completed.
    pub fn permitted_next_steps(
        &self,
        completed: &BTreeSet<StepId>,
    ) -> Result<BTreeSet<StepId>, TaskError> {
        self.check_known(completed)?;
        Ok(self
            .nodes
            .values()
            .filter(|s| !completed.contains(&s.id))
            .filter(|s| s.prerequisites.is_subset(completed))
            .map(|s| s.id)
            .collect())
    }

    /// Lowest canonical id among the permitted steps, the conductor's target.
    pub fn next_target(&self, completed: &BTreeSet<StepId>) -> Result<Option<StepId>, TaskError> {
        Ok(self.permitted_next_steps(completed)?.into_iter().next())
    }

    /// True when `observed` is neither completed nor currently permitted.
    /// Repeating a completed step is not a sequence violation.
    pub fn is_out_of_order(
        &self,
        completed: &BTreeSet<StepId>,
        observed: StepId,
    ) -> Result<bool, TaskError> {
        self.check_known(std::iter::once(&observed))?;
        if completed.contains(&observed) {
            self.check_known(completed)?;
            return Ok(false);
        }
        Ok(!self.permitted_next_steps(completed)?.contains(&observed))
    }

    /// Whether executing `sequence` in order never violates a prerequisite.
    pub fn is_valid_execution(&self, sequence: &[StepId]) -> Result<bool, TaskError> {
        let mut done = BTreeSet::new();
        for &s in sequence {
            if self.is_out_of_order(&done, s)? {
                return Ok(false);
            }
            done.insert(s);
        }
        Ok(true)
    }
}
