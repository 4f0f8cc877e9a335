//! Append-only JSON-lines event log with a per-line hash chain, and a
//! reorder buffer so parallel workers produce the same file as a serial run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tasks::iowa::Draw;
use crate::tasks::protocols::{GambleRecord, IntervalRecord, ItemFailure, ProbabilityRecord, ScenarioStep, TaskKind};

const CHECK_HEX_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Probability(ProbabilityRecord),
    Interval(IntervalRecord),
    Gamble(GambleRecord),
    Scenario(ScenarioStep),
    Draw(Draw),
    Failure(ItemFailure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub run_id: String,
    pub seed: u64,
    pub task: TaskKind,
    pub episode: usize,
    pub step: usize,
    pub agent: String,
    pub payload: Payload,
    /// Hash of the previous line's check and this line's content.
    #[serde(default)]
    pub check: String,
}

fn chain(prev: &str, body: &str) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(b"\n");
    h.update(body.as_bytes());
    let mut hex = hex::encode(h.finalize());
    hex.truncate(CHECK_HEX_LEN);
    hex
}

fn body_of(event: &Event) -> Result<String> {
    let mut unsigned = event.clone();
    unsigned.check.clear();
    Ok(serde_json::to_string(&unsigned)?)
}

/// Writes events in sequence order regardless of the order batches arrive in.
pub struct EventWriter {
    path: PathBuf,
    out: BufWriter<File>,
    last_check: String,
    lines: usize,
    next_batch: usize,
    pending: BTreeMap<usize, Vec<Event>>,
}

impl EventWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            last_check: String::new(),
            lines: 0,
            next_batch: 0,
            pending: BTreeMap::new(),
        })
    }

    /// Queues batch `seq` and writes every batch that is now contiguous.
    pub fn submit(&mut self, seq: usize, events: Vec<Event>) -> Result<()> {
        self.pending.insert(seq, events);
        while let Some(batch) = self.pending.remove(&self.next_batch) {
            for event in batch {
                self.append(event)?;
            }
            self.next_batch += 1;
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }

    fn append(&mut self, mut event: Event) -> Result<()> {
        let body = body_of(&event)?;
        event.check = chain(&self.last_check, &body);
        let line = serde_json::to_string(&event)?;
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))?;
        self.last_check = event.check;
        self.lines += 1;
        Ok(())
    }

    pub fn pending_batches(&self) -> usize {
        self.pending.len()
    }

    /// Flushes and returns `(line count, final check)`.
    pub fn finish(mut self) -> Result<(usize, String)> {
        if !self.pending.is_empty() {
            return Err(Error::Integrity {
                line: self.lines + 1,
                message: format!("{} event batches never became contiguous", self.pending.len()),
            });
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok((self.lines, self.last_check))
    }
}

/// Reads and verifies a log. Errors name the 1-based offending line.
pub fn read_events(path: &Path) -> Result<(Vec<Event>, String)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    let mut last = String::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::Integrity {
            line: n,
            message: format!("unreadable line: {e}"),
        })?;
        let event: Event = serde_json::from_str(&line).map_err(|e| Error::Integrity {
            line: n,
            message: format!("malformed event: {e}"),
        })?;
        let expected = chain(&last, &body_of(&event)?);
        if event.check != expected {
            return Err(Error::Integrity {
                line: n,
                message: "hash chain mismatch; the line was altered, inserted or reordered".into(),
            });
        }
        last = event.check.clone();
        events.push(event);
    }
    Ok((events, last))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::protocols::GambleRecord;

    fn event(step: usize) -> Event {
        Event {
            run_id: "r".into(),
            seed: 1,
            task: TaskKind::Gambles,
            episode: 0,
            step,
            agent: "a".into(),
            payload: Payload::Gamble(GambleRecord {
                pair: format!("g{step}"),
                chose_risky: step.is_multiple_of(2),
            }),
            check: String::new(),
        }
    }

    #[test]
    fn out_of_order_batches_write_in_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let write = |order: &[usize], name: &str| {
            let path = dir.path().join(name);
            let mut w = EventWriter::create(&path).unwrap();
            for &seq in order {
                w.submit(seq, vec![event(2 * seq), event(2 * seq + 1)]).unwrap();
            }
            w.finish().unwrap();
            std::fs::read(&path).unwrap()
        };
        assert_eq!(write(&[0, 1, 2], "a"), write(&[2, 0, 1], "b"));
    }

    #[test]
    fn tampering_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut w = EventWriter::create(&path).unwrap();
        w.submit(0, (0..5).map(event).collect()).unwrap();
        let (lines, last) = w.finish().unwrap();
        assert_eq!(lines, 5);
        let (events, check) = read_events(&path).unwrap();
        assert_eq!((events.len(), check), (5, last));

        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("\"g2\"", "\"g9\"", 1);
        std::fs::write(&path, tampered).unwrap();
        match read_events(&path) {
            Err(Error::Integrity { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected integrity error, got {other:?}"),
        }
        std::fs::write(&path, text.replacen("{", "[", 1)).unwrap();
        assert!(matches!(read_events(&path), Err(Error::Integrity { line: 1, .. })));
    }

    #[test]
    fn gaps_are_detected_at_finish() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = EventWriter::create(&dir.path().join("e")).unwrap();
        w.submit(1, vec![event(0)]).unwrap();
        assert_eq!(w.pending_batches(), 1);
        assert!(matches!(w.finish(), Err(Error::Integrity { .. })));
    }
}
