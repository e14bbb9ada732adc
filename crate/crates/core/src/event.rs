//! Channels and first-class events.
//!
//! An event value is a linked list of base events built from heap pairs:
//!
//! ```text
//! Event(spine0) -> (rec0, spine1) -> (rec1, unit)
//! rec  = (message, info)
//! info = (Chan(id), info2)
//! info2 = (Int(kind), wrap)
//! ```
//!
//! `choose` appends lists, so every event built from combinators stays a
//! flat list. `wrap` rewrites every record's post-synchronization function,
//! composing onto any existing one. Records are never mutated in place:
//! both combinators copy the spine (and `wrap` the records) they change.

use std::collections::VecDeque;

use crate::value::{CellRef, ChannelId, DriverId, ThreadId, Value};
use crate::vm::{Vm, VmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Send,
    Recv,
}

impl EventKind {
    fn tag(self) -> i32 {
        match self {
            EventKind::Send => 0,
            EventKind::Recv => 1,
        }
    }

    fn from_tag(v: Value) -> Option<EventKind> {
        match v {
            Value::Int(0) => Some(EventKind::Send),
            Value::Int(1) => Some(EventKind::Recv),
            _ => None,
        }
    }
}

/// A decoded base-event record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseEvent {
    pub record: CellRef,
    pub message: Value,
    pub channel: ChannelId,
    pub kind: EventKind,
    /// `Value::Unit` is the identity wrap.
    pub wrap: Value,
}

/// A blocked context's interest in one base event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueEntry {
    pub thread: ThreadId,
    pub event: CellRef,
    /// Cell whose flag bit is the sync attempt's dirty flag.
    pub flag: CellRef,
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub id: ChannelId,
    pub sendq: VecDeque<QueueEntry>,
    pub recvq: VecDeque<QueueEntry>,
    pub binding: Option<DriverId>,
}

impl Channel {
    pub fn queue(&self, kind: EventKind) -> &VecDeque<QueueEntry> {
        match kind {
            EventKind::Send => &self.sendq,
            EventKind::Recv => &self.recvq,
        }
    }

    pub(crate) fn queue_mut(&mut self, kind: EventKind) -> &mut VecDeque<QueueEntry> {
        match kind {
            EventKind::Send => &mut self.sendq,
            EventKind::Recv => &mut self.recvq,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelTable {
    channels: Vec<Channel>,
    capacity: usize,
    queue_bound: usize,
}

impl ChannelTable {
    pub fn new(capacity: usize, queue_bound: usize) -> Self {
        ChannelTable { channels: Vec::new(), capacity, queue_bound }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn queue_bound(&self) -> usize {
        self.queue_bound
    }

    pub fn get(&self, id: ChannelId) -> Result<&Channel, VmError> {
        self.channels.get(id.0 as usize).ok_or(VmError::UnknownChannel(id.0))
    }

    pub(crate) fn get_mut(&mut self, id: ChannelId) -> Result<&mut Channel, VmError> {
        self.channels.get_mut(id.0 as usize).ok_or(VmError::UnknownChannel(id.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Channel> {
        self.channels.iter()
    }

    fn allocate(&mut self) -> Result<ChannelId, VmError> {
        if self.channels.len() >= self.capacity {
            return Err(VmError::NoFreeChannel(self.capacity));
        }
        let id = ChannelId(self.channels.len() as u32);
        self.channels.push(Channel { id, sendq: VecDeque::new(), recvq: VecDeque::new(), binding: None });
        Ok(id)
    }

    pub(crate) fn push_roots(&self, out: &mut Vec<Value>) {
        for ch in &self.channels {
            for e in ch.sendq.iter().chain(&ch.recvq) {
                out.push(Value::Cell(e.event));
                out.push(Value::Cell(e.flag));
            }
        }
    }
}

impl Vm {
    /// Allocates the next channel, counting from 0.
    pub fn channel(&mut self) -> Result<ChannelId, VmError> {
        self.channels.allocate()
    }

    pub fn send_evt(&mut self, chan: ChannelId, msg: Value) -> Result<Value, VmError> {
        self.base_event(chan, EventKind::Send, msg)
    }

    pub fn recv_evt(&mut self, chan: ChannelId) -> Result<Value, VmError> {
        self.base_event(chan, EventKind::Recv, Value::Unit)
    }

    fn base_event(&mut self, chan: ChannelId, kind: EventKind, msg: Value) -> Result<Value, VmError> {
        self.channels.get(chan)?;
        self.scratch.push(msg);
        let info2 = self.alloc(Value::Int(kind.tag()), Value::Unit)?;
        let info = self.alloc(Value::Chan(chan), Value::Cell(info2))?;
        let rec = self.alloc(msg, Value::Cell(info))?;
        let spine = self.alloc(Value::Cell(rec), Value::Unit)?;
        Ok(Value::Event(spine))
    }

    /// Concatenation `e1 ++ e2`. Records are shared; `e1`'s spine is copied.
    pub fn choose(&mut self, e1: Value, e2: Value) -> Result<Value, VmError> {
        let first = self.event_records(e1)?;
        self.event_records(e2)?;
        let tail = match e2 {
            Value::Unit => return Ok(e1),
            Value::Event(r) => Value::Cell(r),
            _ => unreachable!("checked by event_records"),
        };
        if first.is_empty() {
            return Ok(e2);
        }
        self.scratch.push(e1);
        self.scratch.push(e2);
        let mut acc = tail;
        for &rec in first.iter().rev() {
            acc = Value::Cell(self.alloc(Value::Cell(rec), acc)?);
        }
        Ok(acc.into_event())
    }

    /// Attaches `f` as post-synchronization function of every base event,
    /// composing it after any wrap already present.
    pub fn wrap(&mut self, e: Value, f: Value) -> Result<Value, VmError> {
        if !f.is_applicable() {
            return Err(self.type_confusion(format!("wrap expects a function, got {}", f.tag_name())));
        }
        let recs = self.event_records(e)?;
        if recs.is_empty() {
            return Ok(Value::Unit);
        }
        self.scratch.push(e);
        self.scratch.push(f);
        let mut acc = Value::Unit;
        for &rec in recs.iter().rev() {
            let be = self.base_event_at(rec)?;
            let wrap = match be.wrap {
                Value::Unit => f,
                inner => Value::Composed(self.alloc(f, inner)?),
            };
            let info2 = self.alloc(Value::Int(be.kind.tag()), wrap)?;
            let info = self.alloc(Value::Chan(be.channel), Value::Cell(info2))?;
            let new_rec = self.alloc(be.message, Value::Cell(info))?;
            acc = Value::Cell(self.alloc(Value::Cell(new_rec), acc)?);
            self.scratch.push(acc);
        }
        Ok(acc.into_event())
    }

    /// Record cells of an event list, in order. `Unit` is the empty event.
    pub fn event_records(&self, e: Value) -> Result<Vec<CellRef>, VmError> {
        let mut node = match e {
            Value::Unit => return Ok(Vec::new()),
            Value::Event(r) => r,
            other => return Err(self.type_confusion(format!("expected an event, got {}", other.tag_name()))),
        };
        let mut out = Vec::new();
        loop {
            if out.len() > self.heap.capacity() {
                return Err(self.type_confusion("cyclic event list".into()));
            }
            match self.heap.fst(node) {
                Value::Cell(rec) => out.push(rec),
                _ => return Err(self.type_confusion("malformed event list".into())),
            }
            match self.heap.snd(node) {
                Value::Unit => return Ok(out),
                Value::Cell(next) => node = next,
                _ => return Err(self.type_confusion("malformed event list".into())),
            }
        }
    }

    pub fn base_event_at(&self, rec: CellRef) -> Result<BaseEvent, VmError> {
        let malformed = || self.type_confusion("malformed base event".into());
        let message = self.heap.fst(rec);
        let Value::Cell(info) = self.heap.snd(rec) else { return Err(malformed()) };
        let Value::Chan(channel) = self.heap.fst(info) else { return Err(malformed()) };
        let Value::Cell(info2) = self.heap.snd(info) else { return Err(malformed()) };
        let kind = EventKind::from_tag(self.heap.fst(info2)).ok_or_else(malformed)?;
        let wrap = self.heap.snd(info2);
        Ok(BaseEvent { record: rec, message, channel, kind, wrap })
    }

    /// Decoded base events of an event value.
    pub fn base_events(&self, e: Value) -> Result<Vec<BaseEvent>, VmError> {
        self.event_records(e)?.into_iter().map(|r| self.base_event_at(r)).collect()
    }
}

trait IntoEvent {
    fn into_event(self) -> Value;
}

impl IntoEvent for Value {
    fn into_event(self) -> Value {
        match self {
            Value::Cell(r) => Value::Event(r),
            other => other,
        }
    }
}
