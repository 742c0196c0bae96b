//! Annotation records and their append-only log.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Yes,
    No,
    Incomprehensible,
}

impl Label {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Label::Yes => Some(true),
            Label::No => Some(false),
            Label::Incomprehensible => None,
        }
    }
}

/// One worker's judgment of one candidate. `time` is seconds since the
/// Unix epoch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub worker: String,
    pub cand: String,
    pub label: Label,
    #[serde(default)]
    pub premise_flagged: bool,
    pub time: u64,
}

impl AnnotationRecord {
    /// The yes/no vote this record contributes, if any.
    pub fn vote(&self) -> Option<bool> {
        if self.premise_flagged {
            None
        } else {
            self.label.as_bool()
        }
    }
}

pub const LOG_FILE: &str = "records.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    records: Vec<AnnotationRecord>,
}

/// All records in arrival order, optionally persisted as a JSON-lines log
/// with a periodic full snapshot.
#[derive(Debug, Default)]
pub struct RecordLog {
    records: Vec<AnnotationRecord>,
    seen: HashSet<(String, String)>,
    file: Option<File>,
    dir: Option<PathBuf>,
    snapshot_every: usize,
}

impl RecordLog {
    pub fn in_memory() -> Self {
        RecordLog::default()
    }

    /// Opens or creates the log in `dir`. Records are restored from the
    /// snapshot and then from the log entries after it; a truncated final
    /// log line is dropped.
    pub fn open(dir: &Path, snapshot_every: usize) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut log = RecordLog {
            dir: Some(dir.to_path_buf()),
            snapshot_every,
            ..Default::default()
        };
        let snap_path = dir.join(SNAPSHOT_FILE);
        let mut restored = if snap_path.exists() {
            serde_json::from_str::<Snapshot>(&std::fs::read_to_string(&snap_path)?)?.records
        } else {
            Vec::new()
        };
        let log_path = dir.join(LOG_FILE);
        if log_path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(&log_path)?).lines().collect::<std::io::Result<_>>()?;
            let last = lines.len().saturating_sub(1);
            let mut from_log = Vec::with_capacity(lines.len());
            let mut truncated = false;
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<AnnotationRecord>(line) {
                    Ok(r) => from_log.push(r),
                    Err(e) if i == last => {
                        warn!("dropping truncated last log line: {e}");
                        truncated = true;
                    }
                    Err(e) => return Err(Error::Format(format!("{} line {}: {e}", LOG_FILE, i + 1))),
                }
            }
            if from_log.len() < restored.len() {
                return Err(Error::Format(format!(
                    "log holds {} records but the snapshot holds {}",
                    from_log.len(),
                    restored.len()
                )));
            }
            if truncated {
                let text: String = from_log
                    .iter()
                    .map(|r| serde_json::to_string(r).map(|l| l + "\n"))
                    .collect::<serde_json::Result<_>>()?;
                std::fs::write(&log_path, text)?;
            }
            restored.extend(from_log.into_iter().skip(restored.len()));
        }
        for r in restored {
            log.push_memory(r);
        }
        log.file = Some(OpenOptions::new().create(true).append(true).open(&log_path)?);
        Ok(log)
    }

    fn push_memory(&mut self, r: AnnotationRecord) -> bool {
        if !self.seen.insert((r.worker.clone(), r.cand.clone())) {
            return false;
        }
        self.records.push(r);
        true
    }

    pub fn contains(&self, worker: &str, cand: &str) -> bool {
        self.seen.contains(&(worker.to_string(), cand.to_string()))
    }

    /// Appends records after checking that none repeats a (worker, cand)
    /// pair; either all are written or none.
    pub fn append(&mut self, batch: Vec<AnnotationRecord>) -> Result<()> {
        let mut keys = HashSet::new();
        for r in &batch {
            if self.contains(&r.worker, &r.cand) || !keys.insert((&r.worker, &r.cand)) {
                return Err(Error::Format(format!("worker {} already labeled {}", r.worker, r.cand)));
            }
        }
        if let Some(f) = self.file.as_mut() {
            let mut text = String::new();
            for r in &batch {
                text.push_str(&serde_json::to_string(r)?);
                text.push('\n');
            }
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        let before = self.records.len();
        for r in batch {
            self.push_memory(r);
        }
        if self.snapshot_every > 0 && before / self.snapshot_every != self.records.len() / self.snapshot_every {
            self.snapshot()?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Result<()> {
        if let Some(dir) = &self.dir {
            let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
            let snap = Snapshot {
                records: self.records.clone(),
            };
            std::fs::write(&tmp, serde_json::to_vec(&snap)?)?;
            std::fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
