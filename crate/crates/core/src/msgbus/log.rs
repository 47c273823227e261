use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::envelope::Envelope;

/// Ordered record of every envelope seen in one session.
///
/// Entries keep append order, which is causal order: within a millisecond an
/// effect always follows the input that caused it even when the two come from
/// sources with unrelated sequence counters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    pub session_id: String,
    pub entries: Vec<Envelope>,
}

impl SessionLog {
    pub fn new(session_id: impl Into<String>) -> Self {
        SessionLog {
            session_id: session_id.into(),
            entries: Vec::new(),
        }
    }

    /// Checks that `seq` strictly increases per `src` (which also rules out
    /// duplicate `(src, seq)` pairs). Returns the offending entry index.
    pub fn check_sequencing(&self) -> Result<(), (usize, String)> {
        let mut last: HashMap<&str, u64> = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if let Some(prev) = last.get(e.src.as_str()) {
                if e.seq <= *prev {
                    return Err((
                        i,
                        format!("seq {} from `{}` does not follow {}", e.seq, e.src, prev),
                    ));
                }
            }
            last.insert(&e.src, e.seq);
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_canonical_json());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("log corrupt at line {line}: {detail}")]
    LogCorrupt { line: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogWarning {
    /// The final line was cut off mid-write and was skipped.
    PartialTrailingLine { line: usize },
}

#[derive(Debug, Clone)]
pub struct LogRead {
    pub log: SessionLog,
    pub warnings: Vec<LogWarning>,
}

/// Single-writer JSONL appender; every line is flushed as written.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    /// Opens `path` for appending, creating it if needed.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| LogError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(LogWriter {
            path,
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, env: &Envelope) -> Result<(), LogError> {
        let mut line = env.to_canonical_json();
        line.push('\n');
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn append_log(path: impl AsRef<Path>, env: &Envelope) -> Result<(), LogError> {
    LogWriter::open(path)?.append(env)
}

/// Writes `log` to `path`, replacing any existing file.
pub fn write_log(path: impl AsRef<Path>, log: &SessionLog) -> Result<(), LogError> {
    let path = path.as_ref();
    std::fs::write(path, log.to_jsonl()).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a JSONL session log. The session id is the file name without the
/// `.jsonl` extension. A final line without a newline that does not parse is
/// treated as a torn write: skipped and reported as a warning.
pub fn read_log(path: impl AsRef<Path>) -> Result<LogRead, LogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let session_id = path
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.strip_suffix(".jsonl").unwrap_or(n).to_string())
        .unwrap_or_default();
    let mut log = SessionLog::new(session_id);
    let mut warnings = Vec::new();

    let ends_clean = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match Envelope::from_json(line) {
            Ok(env) => log.entries.push(env),
            Err(_) if i + 1 == lines.len() && !ends_clean => {
                tracing::warn!(path = %path.display(), line = line_no, "skipping partial trailing line");
                warnings.push(LogWarning::PartialTrailingLine { line: line_no });
            }
            Err(detail) => return Err(LogError::LogCorrupt { line: line_no, detail }),
        }
    }
    if let Err((idx, detail)) = log.check_sequencing() {
        // Map the entry index back to its line number.
        let line = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .nth(idx)
            .map(|(i, _)| i + 1)
            .unwrap_or(idx + 1);
        return Err(LogError::LogCorrupt { line, detail });
    }
    Ok(LogRead { log, warnings })
}
