//! Append-only JSONL session log, one event per line:
//! `{"v":1,"seq":0,"event":{"type":"session_started",...}}`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{DesignSession, SessionError, SessionEvent};

const LOG_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogLine {
    v: u32,
    seq: u64,
    event: SessionEvent,
}

#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl SessionLog {
    /// Creates a new log; fails if the file already exists.
    pub fn create(path: &Path) -> Result<Self, SessionError> {
        let file = OpenOptions::new()
            .append(true)
            .create_new(true)
            .open(path)
            .map_err(|e| SessionError::Log(format!("{}: {e}", path.display())))?;
        Ok(Self { path: path.into(), file, next_seq: 0 })
    }

    /// Reopens an existing log for appending and returns its events.
    pub fn open(path: &Path) -> Result<(Self, Vec<SessionEvent>), SessionError> {
        let (events, valid_len) = read_valid(path)?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .and_then(|f| {
                // drop a torn tail so the next append starts on a fresh line
                f.set_len(valid_len)?;
                Ok(f)
            })
            .map_err(|e| SessionError::Log(format!("{}: {e}", path.display())))?;
        let next_seq = events.len() as u64;
        Ok((Self { path: path.into(), file, next_seq }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one line and fsyncs before returning.
    pub fn append(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        let line = LogLine { v: LOG_VERSION, seq: self.next_seq, event: event.clone() };
        let mut text = serde_json::to_string(&line).expect("event serializes");
        text.push('\n');
        self.file
            .write_all(text.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| SessionError::Log(format!("{}: {e}", self.path.display())))?;
        self.next_seq += 1;
        Ok(())
    }
}

/// Reads every event. A torn final line (crash mid-write) is ignored; any
/// other malformed line is an error.
pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>, SessionError> {
    read_valid(path).map(|(events, _)| events)
}

/// Events plus the byte length of the well-formed prefix.
fn read_valid(path: &Path) -> Result<(Vec<SessionEvent>, u64), SessionError> {
    let text = std::fs::read_to_string(path).map_err(|e| SessionError::Log(format!("{}: {e}", path.display())))?;
    let mut events = Vec::new();
    let mut valid_len = 0u64;
    let mut offset = 0usize;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        offset += raw.len();
        let line = raw.trim_end_matches('\n');
        if line.trim().is_empty() {
            valid_len = offset as u64;
            continue;
        }
        let complete = raw.ends_with('\n');
        match serde_json::from_str::<LogLine>(line) {
            Ok(parsed) if complete && parsed.v == LOG_VERSION && parsed.seq == events.len() as u64 => {
                events.push(parsed.event);
                valid_len = offset as u64;
            }
            Ok(parsed) if complete => {
                return Err(SessionError::Log(format!(
                    "line {}: unexpected version {} or seq {}",
                    i + 1,
                    parsed.v,
                    parsed.seq
                )))
            }
            _ if i + 1 == lines.len() && !complete => log::warn!("ignoring torn final line in {}", path.display()),
            Ok(_) => unreachable!("complete lines are handled above"),
            Err(e) => return Err(SessionError::Log(format!("line {}: {e}", i + 1))),
        }
    }
    Ok((events, valid_len))
}

/// Rebuilds the session recorded in a log file.
pub fn replay_log(path: &Path) -> Result<DesignSession, SessionError> {
    DesignSession::replay(&read_events(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SessionConfig;
    use crate::types::ImageRef;

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let start = DesignSession::start_event("s", "p", ImageRef::for_bytes(b"b"), SessionConfig::default());
        let mut log = SessionLog::create(&path).unwrap();
        log.append(&start).unwrap();
        assert!(SessionLog::create(&path).is_err());
        let (_, events) = SessionLog::open(&path).unwrap();
        assert_eq!(events, vec![start.clone()]);
        assert_eq!(replay_log(&path).unwrap(), DesignSession::from_start(&start).unwrap());
    }

    #[test]
    fn torn_tail_is_ignored_but_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let start = DesignSession::start_event("s", "p", ImageRef::for_bytes(b"b"), SessionConfig::default());
        let mut log = SessionLog::create(&path).unwrap();
        log.append(&start).unwrap();
        drop(log);
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"v\":1,\"seq\":1,\"ev");
        std::fs::write(&path, &text).unwrap();
        assert_eq!(read_events(&path).unwrap().len(), 1);
        let (mut log, events) = SessionLog::open(&path).unwrap();
        log.append(&events[0]).unwrap();
        assert_eq!(read_events(&path).unwrap().len(), 2);
        text.push_str("\n{}\n");
        std::fs::write(&path, &text).unwrap();
        assert!(read_events(&path).is_err());
    }
}
