//! Append-only session logs.
//!
//! One file per session, `<id>.jsonl`. The first line is the session header
//! and every further line is one event. Each append is flushed to disk
//! before the call returns. On reading, an incomplete final line is dropped,
//! so a crash at any point leaves a prefix of the event sequence.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::session::{Event, SessionHeader};
use crate::ServiceError;

#[derive(Debug, Clone)]
pub struct EventStore {
    dir: PathBuf,
}

/// Contents of one session log.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub events: Vec<Event>,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

impl EventStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Creates the log with its header line. Fails if it already exists.
    pub fn create(&self, header: &SessionHeader) -> Result<File, ServiceError> {
        let path = self.path(&header.id);
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(|e| storage(&path, e))?;
        write_line(&mut file, header).map_err(|e| storage(&path, e))?;
        // Make the new directory entry durable too.
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        Ok(file)
    }

    pub fn append(&self, file: &mut File, id: &str, event: &Event) -> Result<(), ServiceError> {
        write_line(file, event).map_err(|e| storage(&self.path(id), e))
    }

    /// Reopens an existing log for appending, cutting off anything past
    /// its valid prefix first.
    pub fn reopen(&self, log: &SessionLog) -> Result<File, ServiceError> {
        let path = self.path(&log.header.id);
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| storage(&path, e))?;
        if file.metadata().map_err(|e| storage(&path, e))?.len() > log.valid_len {
            file.set_len(log.valid_len).map_err(|e| storage(&path, e))?;
            file.sync_data().map_err(|e| storage(&path, e))?;
        }
        Ok(file)
    }

    pub fn read(&self, id: &str) -> Result<Option<SessionLog>, ServiceError> {
        read_log(&self.path(id))
    }

    /// Every readable session log in the directory, in file-name order.
    pub fn read_all(&self) -> Result<Vec<SessionLog>, ServiceError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)
            .map_err(|e| storage(&self.dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut out = Vec::new();
        for p in paths {
            if let Some(log) = read_log(&p)? {
                out.push(log);
            }
        }
        Ok(out)
    }
}

fn write_line<T: Serialize>(file: &mut File, value: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(value).map_err(std::io::Error::other)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()
}

fn parse<T: DeserializeOwned>(line: &[u8]) -> Option<T> {
    serde_json::from_slice(line).ok()
}

/// Reads a log, keeping the longest valid prefix of complete lines. A log
/// without a complete header was never acknowledged and reads as absent.
pub fn read_log(path: &Path) -> Result<Option<SessionLog>, ServiceError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(storage(path, e)),
    };
    // Only newline-terminated lines count; a torn tail has no newline.
    let mut lines = Vec::new();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            lines.push(&bytes[start..i]);
            start = i + 1;
        }
    }
    let Some(header) = lines.first().and_then(|l| parse::<SessionHeader>(l)) else {
        tracing::warn!("{}: no readable header, skipping", path.display());
        return Ok(None);
    };
    let mut valid_len = lines[0].len() as u64 + 1;
    let mut events: Vec<Event> = Vec::new();
    for line in &lines[1..] {
        match parse::<Event>(line) {
            Some(ev) if ev.seq == events.len() as u64 => {
                valid_len += line.len() as u64 + 1;
                events.push(ev);
            }
            _ => break,
        }
    }
    if valid_len < bytes.len() as u64 {
        tracing::warn!("{}: dropping log tail after event {}", path.display(), events.len());
    }
    Ok(Some(SessionLog {
        header,
        events,
        valid_len,
    }))
}
