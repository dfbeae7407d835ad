//! Append-only JSON-lines session journal. The first line records the
//! upload, every further line one history entry.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

pub const SESSIONS_DIR: &str = "sessions";
pub const TABLES_DIR: &str = "tables";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadRecord {
    pub session_id: String,
    pub table_id: String,
    pub table_name: String,
    /// Stored upload, relative to the data directory.
    pub csv_file: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Query,
    Commands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: usize,
    pub timestamp: String,
    pub kind: EntryKind,
    /// Query text or chain text as submitted.
    pub input: String,
    pub table_id: String,
    /// New table version created by a mutating chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_table_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vagueness_threshold: Option<f64>,
    pub summary: ResultSummary,
    /// The response exactly as it was sent.
    pub outcome: Box<RawValue>,
}

impl PartialEq for HistoryEntry {
    fn eq(&self, o: &Self) -> bool {
        self.seq == o.seq
            && self.timestamp == o.timestamp
            && self.kind == o.kind
            && self.input == o.input
            && self.table_id == o.table_id
            && self.result_table_id == o.result_table_id
            && self.vagueness_threshold == o.vagueness_threshold
            && self.summary == o.summary
            && self.outcome.get() == o.outcome.get()
    }
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
}

fn append_line(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut line = serde_json::to_vec(value).map_err(io::Error::other)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.sync_data()
}

impl Journal {
    pub fn path_for(data_dir: &Path, session_id: &str) -> PathBuf {
        data_dir.join(SESSIONS_DIR).join(format!("{session_id}.jsonl"))
    }

    /// Starts a new journal with its upload record.
    pub fn create(data_dir: &Path, upload: &UploadRecord) -> io::Result<Journal> {
        let path = Self::path_for(data_dir, &upload.session_id);
        std::fs::create_dir_all(path.parent().expect("journal path has a parent"))?;
        if path.exists() {
            return Err(io::Error::new(io::ErrorKind::AlreadyExists, path.display().to_string()));
        }
        append_line(&path, upload)?;
        Ok(Journal { path })
    }

    pub fn open(path: PathBuf) -> Journal {
        Journal { path }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &HistoryEntry) -> io::Result<()> {
        append_line(&self.path, entry)
    }
}

#[derive(Debug, Clone)]
pub struct SessionLog {
    pub path: PathBuf,
    pub upload: UploadRecord,
    pub entries: Vec<HistoryEntry>,
}

fn invalid(path: &Path, line: usize, e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {e}", path.display()))
}

pub fn read_session(path: &Path) -> io::Result<SessionLog> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| invalid(path, 1, "empty journal"))??;
    let upload: UploadRecord = serde_json::from_str(&first).map_err(|e| invalid(path, 1, e))?;
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line).map_err(|e| invalid(path, i + 2, e))?);
    }
    Ok(SessionLog {
        path: path.to_path_buf(),
        upload,
        entries,
    })
}

/// Every session journal under `data_dir`, ordered by file name.
pub fn read_all(data_dir: &Path) -> io::Result<Vec<SessionLog>> {
    let dir = data_dir.join(SESSIONS_DIR);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "jsonl"));
    paths.sort();
    paths.iter().map(|p| read_session(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upload() -> UploadRecord {
        UploadRecord {
            session_id: "s1".into(),
            table_id: "t1".into(),
            table_name: "movies".into(),
            csv_file: "tables/t1.csv".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
        }
    }

    fn entry(seq: usize, outcome: &str) -> HistoryEntry {
        HistoryEntry {
            seq,
            timestamp: "2026-01-01T00:00:01Z".into(),
            kind: EntryKind::Commands,
            input: "SLICE TOP 1".into(),
            table_id: "t1".into(),
            result_table_id: None,
            vagueness_threshold: None,
            summary: ResultSummary {
                status: "answered".into(),
                rows: Some(1),
                columns: Some(3),
            },
            outcome: RawValue::from_string(outcome.to_string()).unwrap(),
        }
    }

    #[test]
    fn round_trip_preserves_raw_outcome() {
        let dir = tempfile::tempdir().unwrap();
        let j = Journal::create(dir.path(), &upload()).unwrap();
        let raw = r#"{"b":1.0000000000000002,"a":[1e300,-0.0]}"#;
        j.append(&entry(0, raw)).unwrap();
        j.append(&entry(1, "{}")).unwrap();
        let log = read_session(j.path()).unwrap();
        assert_eq!(log.upload, upload());
        assert_eq!(log.entries.len(), 2);
        assert_eq!(log.entries[0].outcome.get(), raw);
        assert_eq!(log.entries[0], entry(0, raw));
        assert!(Journal::create(dir.path(), &upload()).is_err());
        assert_eq!(read_all(dir.path()).unwrap().len(), 1);
    }

    #[test]
    fn corrupt_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let j = Journal::create(dir.path(), &upload()).unwrap();
        std::fs::OpenOptions::new()
            .append(true)
            .open(j.path())
            .unwrap()
            .write_all(b"{not json\n")
            .unwrap();
        let err = read_session(j.path()).unwrap_err();
        assert!(err.to_string().contains(":2:"));
    }
}
