//! Simulation events and the canonical JSON Lines event log.
//!
//! Canonical line form: `t`, `seq`, `kind`, then whichever payload fields are
//! present in alphabetical order; compact separators, integers only.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::{JobId, Millis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    JobSubmitted,
    JobQueued,
    JobStarted,
    JobFinished,
    JobFailed,
    JobTimedOut,
    JobCancelled,
    NodeDown,
    NodeUp,
    RescaleApplied,
}

impl EventKind {
    /// Events that end a job's run for good.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            EventKind::JobFinished
                | EventKind::JobFailed
                | EventKind::JobTimedOut
                | EventKind::JobCancelled
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

// Field order is the serialization order; keep payload fields alphabetical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEvent {
    pub t: Millis,
    pub seq: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<JobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<u32>,
}

impl SimEvent {
    pub fn new(t: Millis, seq: u64, kind: EventKind) -> Self {
        SimEvent {
            t,
            seq,
            kind,
            cluster: None,
            job: None,
            node: None,
            nodes: None,
            reason: None,
            workers: None,
        }
    }

    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Append-only, totally ordered record of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<SimEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Appends an event stamped with the next sequence number.
    pub(crate) fn push(&mut self, mut event: SimEvent) -> &SimEvent {
        event.seq = self.events.len() as u64;
        debug_assert!(self.events.last().is_none_or(|last| last.t <= event.t));
        self.events.push(event);
        self.events.last().expect("just pushed")
    }

    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_canonical());
            out.push('\n');
        }
        out
    }

    pub fn write_canonical<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            w.write_all(e.to_canonical().as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    /// Reads a JSON Lines log. Blank lines are skipped.
    pub fn read<R: BufRead>(r: R) -> io::Result<Self> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: SimEvent = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
            })?;
            events.push(e);
        }
        Ok(EventLog { events })
    }
}

impl From<Vec<SimEvent>> for EventLog {
    fn from(events: Vec<SimEvent>) -> Self {
        EventLog { events }
    }
}
