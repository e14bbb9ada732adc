//! Line-oriented execution trace: `t=<ms> ev=<kind> k=v ...`.

use std::fmt;

use thiserror::Error;

use crate::value::{ChannelId, DriverId, ThreadId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Async pending slot already held a payload.
    Slot,
    /// Bridge message queue at capacity.
    Queue,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::Slot => "slot",
            DropReason::Queue => "queue",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Spawn {
        ctx: ThreadId,
        parent: ThreadId,
    },
    Dispatch {
        ctx: ThreadId,
    },
    Block {
        ctx: ThreadId,
        entries: usize,
    },
    Finish {
        ctx: ThreadId,
    },
    Rendezvous {
        ch: ChannelId,
        sender: ThreadId,
        receiver: ThreadId,
        msg: Value,
    },
    DriverWrite {
        drv: DriverId,
        ch: ChannelId,
        ctx: ThreadId,
        val: Value,
    },
    DriverRead {
        drv: DriverId,
        ch: ChannelId,
        ctx: ThreadId,
        val: Value,
    },
    /// Interrupt payload handed straight to a blocked receiver.
    Deliver {
        drv: DriverId,
        ch: ChannelId,
        ctx: ThreadId,
        val: Value,
    },
    /// Interrupt payload parked in the driver's pending slot.
    Latch {
        drv: DriverId,
        val: Value,
    },
    Drop {
        drv: DriverId,
        val: Value,
        reason: DropReason,
    },
    Bind {
        ch: ChannelId,
        drv: DriverId,
    },
    Sleep {
        steps: u64,
    },
    Wake {
        drv: DriverId,
        steps: u64,
    },
    Gc {
        n: u64,
        marked: usize,
        mark_steps: u64,
    },
    /// `ch` is `None` for a context blocked on the empty event.
    Deadlock {
        ctx: ThreadId,
        ch: Option<ChannelId>,
    },
    Quiescent {
        blocked: usize,
    },
    Halt {
        steps: u64,
    },
}

/// Record kinds and their keys, in emission order.
pub const SCHEMA: &[(&str, &[&str])] = &[
    ("spawn", &["ctx", "parent"]),
    ("dispatch", &["ctx"]),
    ("block", &["ctx", "entries"]),
    ("finish", &["ctx"]),
    ("rendezvous", &["ch", "snd", "rcv", "msg"]),
    ("drv_write", &["drv", "ch", "ctx", "val"]),
    ("drv_read", &["drv", "ch", "ctx", "val"]),
    ("deliver", &["drv", "ch", "ctx", "val"]),
    ("latch", &["drv", "val"]),
    ("drop", &["drv", "val", "reason"]),
    ("bind", &["ch", "drv"]),
    ("sleep", &["steps"]),
    ("wake", &["drv", "steps"]),
    ("gc", &["n", "marked", "mark_steps"]),
    ("deadlock", &["ctx", "ch"]),
    ("quiescent", &["blocked"]),
    ("halt", &["steps"]),
];

impl TraceEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceEvent::Spawn { .. } => "spawn",
            TraceEvent::Dispatch { .. } => "dispatch",
            TraceEvent::Block { .. } => "block",
            TraceEvent::Finish { .. } => "finish",
            TraceEvent::Rendezvous { .. } => "rendezvous",
            TraceEvent::DriverWrite { .. } => "drv_write",
            TraceEvent::DriverRead { .. } => "drv_read",
            TraceEvent::Deliver { .. } => "deliver",
            TraceEvent::Latch { .. } => "latch",
            TraceEvent::Drop { .. } => "drop",
            TraceEvent::Bind { .. } => "bind",
            TraceEvent::Sleep { .. } => "sleep",
            TraceEvent::Wake { .. } => "wake",
            TraceEvent::Gc { .. } => "gc",
            TraceEvent::Deadlock { .. } => "deadlock",
            TraceEvent::Quiescent { .. } => "quiescent",
            TraceEvent::Halt { .. } => "halt",
        }
    }

    /// Channel and driver traffic, the part of a trace a program can observe.
    pub fn is_observable(&self) -> bool {
        matches!(
            self,
            TraceEvent::Rendezvous { .. }
                | TraceEvent::DriverWrite { .. }
                | TraceEvent::DriverRead { .. }
                | TraceEvent::Deliver { .. }
        )
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ev={}", self.kind())?;
        match self {
            TraceEvent::Spawn { ctx, parent } => write!(f, " ctx={ctx} parent={parent}"),
            TraceEvent::Dispatch { ctx } | TraceEvent::Finish { ctx } => write!(f, " ctx={ctx}"),
            TraceEvent::Block { ctx, entries } => write!(f, " ctx={ctx} entries={entries}"),
            TraceEvent::Rendezvous { ch, sender, receiver, msg } => {
                write!(f, " ch={} snd={sender} rcv={receiver} msg={msg}", ch.0)
            }
            TraceEvent::DriverWrite { drv, ch, ctx, val }
            | TraceEvent::DriverRead { drv, ch, ctx, val }
            | TraceEvent::Deliver { drv, ch, ctx, val } => {
                write!(f, " drv={} ch={} ctx={ctx} val={val}", drv.0, ch.0)
            }
            TraceEvent::Latch { drv, val } => write!(f, " drv={} val={val}", drv.0),
            TraceEvent::Drop { drv, val, reason } => write!(f, " drv={} val={val} reason={reason}", drv.0),
            TraceEvent::Bind { ch, drv } => write!(f, " ch={} drv={}", ch.0, drv.0),
            TraceEvent::Sleep { steps } | TraceEvent::Halt { steps } => write!(f, " steps={steps}"),
            TraceEvent::Wake { drv, steps } => write!(f, " drv={} steps={steps}", drv.0),
            TraceEvent::Gc { n, marked, mark_steps } => {
                write!(f, " n={n} marked={marked} mark_steps={mark_steps}")
            }
            TraceEvent::Deadlock { ctx, ch: Some(ch) } => write!(f, " ctx={ctx} ch={}", ch.0),
            TraceEvent::Deadlock { ctx, ch: None } => write!(f, " ctx={ctx} ch=none"),
            TraceEvent::Quiescent { blocked } => write!(f, " blocked={blocked}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time_ms: u64,
    pub event: TraceEvent,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} {}", self.time_ms, self.event)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push(&mut self, time_ms: u64, event: TraceEvent) {
        self.records.push(TraceRecord { time_ms, event });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.records.iter().map(|r| &r.event)
    }

    pub fn observable(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.event.is_observable())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceSchemaError {
    #[error("record does not start with t=<ms>")]
    MissingTime,
    #[error("missing ev=<kind>")]
    MissingKind,
    #[error("unknown record kind `{0}`")]
    UnknownKind(String),
    #[error("malformed field `{0}`")]
    Malformed(String),
    #[error("`{kind}` record has fields {got:?}, schema says {want:?}")]
    FieldMismatch { kind: String, got: Vec<String>, want: Vec<String> },
}

/// A trace line split into its parts and checked against [`SCHEMA`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRecord {
    pub time_ms: u64,
    pub kind: String,
    pub fields: Vec<(String, String)>,
}

impl ParsedRecord {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn parse_record(line: &str) -> Result<ParsedRecord, TraceSchemaError> {
    let mut parts = line.split(' ');
    let time_ms = parts
        .next()
        .and_then(|p| p.strip_prefix("t="))
        .and_then(|t| t.parse().ok())
        .ok_or(TraceSchemaError::MissingTime)?;
    let kind = parts.next().and_then(|p| p.strip_prefix("ev=")).ok_or(TraceSchemaError::MissingKind)?;
    let want = SCHEMA
        .iter()
        .find(|(k, _)| *k == kind)
        .map(|(_, keys)| *keys)
        .ok_or_else(|| TraceSchemaError::UnknownKind(kind.to_string()))?;
    let mut fields = Vec::new();
    for p in parts {
        match p.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => fields.push((k.to_string(), v.to_string())),
            _ => return Err(TraceSchemaError::Malformed(p.to_string())),
        }
    }
    if fields.len() != want.len() || fields.iter().zip(want).any(|((k, _), w)| k != w) {
        return Err(TraceSchemaError::FieldMismatch {
            kind: kind.to_string(),
            got: fields.into_iter().map(|(k, _)| k).collect(),
            want: want.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(ParsedRecord { time_ms, kind: kind.to_string(), fields })
}
