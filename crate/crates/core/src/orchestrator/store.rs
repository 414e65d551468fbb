//! Append-only JSON-lines event log plus periodic snapshots.
//!
//! Each line is one committed batch `{"seq": n, "events": [...]}`. A torn
//! final line (crash mid-write) is dropped on recovery; a bad line anywhere
//! else is corruption.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::state::{Event, State};
use super::OrchestratorError;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const REPORTS_DIR: &str = "reports";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub state: State,
}

/// Where an injected crash hits relative to the write of batch `at_seq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashMode {
    BeforeWrite,
    TornWrite,
    AfterWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashPlan {
    pub at_seq: u64,
    pub mode: CrashMode,
}

enum Backend {
    File { root: PathBuf, file: File },
    Memory { lines: Vec<String> },
}

pub struct EventStore {
    backend: Backend,
    crash: Option<CrashPlan>,
    sync: bool,
}

/// What `append` did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Appended {
    Durable,
    /// Durable, but the process "dies" right after.
    DurableThenCrash,
}

impl EventStore {
    pub fn memory() -> Self {
        EventStore {
            backend: Backend::Memory { lines: Vec::new() },
            crash: None,
            sync: false,
        }
    }

    /// Opens (or creates) a store directory and recovers its state.
    pub fn open(root: &Path, sync: bool) -> Result<(EventStore, State), OrchestratorError> {
        fs::create_dir_all(root)?;
        let snapshot = read_snapshot(root)?;
        let log_path = root.join(EVENTS_FILE);
        let lines = if log_path.exists() {
            let f = BufReader::new(File::open(&log_path)?);
            f.lines().collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        let (state, good) = replay(snapshot, &lines)?;
        if good < lines.len() {
            // Drop the torn tail so later appends start on a clean line.
            let keep: usize = lines[..good].iter().map(|l| l.len() + 1).sum();
            let f = OpenOptions::new().write(true).open(&log_path)?;
            f.set_len(keep as u64)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)?;
        Ok((
            EventStore {
                backend: Backend::File {
                    root: root.to_path_buf(),
                    file,
                },
                crash: None,
                sync,
            },
            state,
        ))
    }

    pub fn root(&self) -> Option<&Path> {
        match &self.backend {
            Backend::File { root, .. } => Some(root),
            Backend::Memory { .. } => None,
        }
    }

    pub fn inject_crash(&mut self, plan: Option<CrashPlan>) {
        self.crash = plan;
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<Appended, OrchestratorError> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let crash = self
            .crash
            .filter(|c| c.at_seq == record.seq)
            .map(|c| c.mode);
        let bytes = match crash {
            Some(CrashMode::BeforeWrite) => return Err(OrchestratorError::Crashed),
            Some(CrashMode::TornWrite) => &line[..line.len() / 2],
            _ => &line[..],
        };
        match &mut self.backend {
            Backend::File { file, .. } => {
                file.write_all(bytes.as_bytes())?;
                file.flush()?;
                if self.sync {
                    file.sync_data()?;
                }
            }
            Backend::Memory { lines } => lines.push(bytes.trim_end_matches('\n').to_string()),
        }
        match crash {
            Some(CrashMode::TornWrite) => Err(OrchestratorError::Crashed),
            Some(CrashMode::AfterWrite) => Ok(Appended::DurableThenCrash),
            _ => Ok(Appended::Durable),
        }
    }

    /// Raw log lines as stored, torn tail included.
    pub fn lines(&self) -> Result<Vec<String>, OrchestratorError> {
        match &self.backend {
            Backend::Memory { lines } => Ok(lines.clone()),
            Backend::File { root, .. } => {
                let text = fs::read_to_string(root.join(EVENTS_FILE))?;
                Ok(text.lines().map(str::to_string).collect())
            }
        }
    }

    pub fn write_snapshot(&self, state: &State) -> Result<(), OrchestratorError> {
        let Backend::File { root, .. } = &self.backend else {
            return Ok(());
        };
        let snap = Snapshot {
            seq: state.seq,
            state: state.clone(),
        };
        let tmp = root.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec(&snap)?)?;
        fs::rename(tmp, root.join(SNAPSHOT_FILE))?;
        Ok(())
    }
}

fn read_snapshot(root: &Path) -> Result<Option<Snapshot>, OrchestratorError> {
    let path = root.join(SNAPSHOT_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let snap: Snapshot = serde_json::from_slice(&fs::read(path)?)?;
    Ok(Some(snap))
}

/// Rebuilds state from an optional snapshot and the log lines. Returns the
/// state and how many leading lines were well formed.
pub fn replay(
    snapshot: Option<Snapshot>,
    lines: &[String],
) -> Result<(State, usize), OrchestratorError> {
    let mut state = snapshot.map(|s| s.state).unwrap_or_default();
    for (i, line) in lines.iter().enumerate() {
        let record: LogRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(_) if i + 1 == lines.len() => return Ok((state, i)),
            Err(e) => return Err(OrchestratorError::Corrupt(format!("line {}: {e}", i + 1))),
        };
        if record.seq <= state.seq {
            continue;
        }
        if record.seq != state.seq + 1 {
            return Err(OrchestratorError::Corrupt(format!(
                "line {}: seq {} follows {}",
                i + 1,
                record.seq,
                state.seq
            )));
        }
        for event in record.events {
            state
                .apply(event)
                .map_err(|e| OrchestratorError::Corrupt(format!("line {}: {e}", i + 1)))?;
        }
        state.seq = record.seq;
    }
    Ok((state, lines.len()))
}
