//! Synchronization engine and cooperative scheduler.
//!
//! A sync either completes immediately against a waiting partner or a ready
//! driver, or blocks the context on every base event of its list. All
//! entries of one blocked attempt share a flag cell; once any of them fires
//! the flag is set and the rest become inert, to be discarded when a later
//! scan reaches them.

use std::collections::VecDeque;

use crate::bridge::{DriverEvent, DriverMessage};
use crate::event::{BaseEvent, EventKind, QueueEntry};
use crate::trace::{DropReason, TraceEvent};
use crate::value::{ChannelId, ThreadId, Value};
use crate::vm::{ContextState, StepOutcome, Vm, VmError};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchedStats {
    pub dispatches: u64,
    pub rendezvous: u64,
    pub driver_writes: u64,
    pub driver_reads: u64,
    pub deliveries: u64,
    pub sleeps: u64,
    pub wakes: u64,
    /// Payloads lost to an occupied pending slot.
    pub dropped_slot: u64,
    /// Dirty entries discarded by scans.
    pub purged: u64,
}

#[derive(Debug, Default)]
pub struct Scheduler {
    pub(crate) ready: VecDeque<ThreadId>,
    /// Slot of the running context.
    pub(crate) current: Option<usize>,
    pub(crate) asleep: bool,
    pub(crate) stats: SchedStats,
}

impl Scheduler {
    pub fn ready(&self) -> &VecDeque<ThreadId> {
        &self.ready
    }

    pub fn is_asleep(&self) -> bool {
        self.asleep
    }

    pub fn stats(&self) -> &SchedStats {
        &self.stats
    }
}

/// Why an idle VM with no future input cannot make progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdleState {
    /// Every context has finished.
    Halted,
    /// Every blocked context waits on at least one driver-bound channel.
    Quiescent { blocked: usize },
    /// `ctx` waits only on software channels nobody else can serve.
    Deadlock { ctx: ThreadId, channels: Vec<ChannelId> },
}

impl Vm {
    pub(crate) fn sync(&mut self, slot: usize, e: Value) -> Result<StepOutcome, VmError> {
        self.scratch.push(e);
        let records = self.event_records(e)?;
        match self.find_synchronisable_event(&records)? {
            Some(be) => {
                self.sync_now(slot, be)?;
                Ok(StepOutcome::Continued)
            }
            None => {
                self.block(slot, &records)?;
                Ok(StepOutcome::ContextBlocked)
            }
        }
    }

    /// First base event that can complete now, in list order.
    pub(crate) fn find_synchronisable_event(
        &mut self,
        records: &[crate::value::CellRef],
    ) -> Result<Option<BaseEvent>, VmError> {
        for &rec in records {
            let be = self.base_event_at(rec)?;
            let ready = match self.channels.get(be.channel)?.binding {
                Some(d) => {
                    let h = self.bridge.driver(d)?;
                    match be.kind {
                        EventKind::Send => h.ll_data_writeable() > 0,
                        EventKind::Recv => h.ll_data_readable() > 0,
                    }
                }
                None => {
                    let partner = match be.kind {
                        EventKind::Send => EventKind::Recv,
                        EventKind::Recv => EventKind::Send,
                    };
                    self.purge_dirty(be.channel, partner)?;
                    !self.channels.get(be.channel)?.queue(partner).is_empty()
                }
            };
            if ready {
                return Ok(Some(be));
            }
        }
        Ok(None)
    }

    /// Drops inert entries from the front of a queue.
    fn purge_dirty(&mut self, ch: ChannelId, kind: EventKind) -> Result<(), VmError> {
        let Vm { channels, heap, sched, .. } = self;
        let q = channels.get_mut(ch)?.queue_mut(kind);
        while q.front().is_some_and(|e| heap.flag(e.flag)) {
            q.pop_front();
            sched.stats.purged += 1;
        }
        Ok(())
    }

    fn pop_partner(&mut self, ch: ChannelId, kind: EventKind) -> Result<(QueueEntry, BaseEvent, usize), VmError> {
        self.purge_dirty(ch, kind)?;
        let entry = self.channels.get_mut(ch)?.queue_mut(kind).pop_front().expect("scan found a live partner");
        self.scratch.push(Value::Cell(entry.event));
        self.heap.set_flag(entry.flag, true);
        let be = self.base_event_at(entry.event)?;
        let slot = self.slot_of(entry.thread).expect("queued context is live");
        Ok((entry, be, slot))
    }

    pub(crate) fn block(&mut self, slot: usize, records: &[crate::value::CellRef]) -> Result<(), VmError> {
        let id = self.ctx(slot).id;
        let flag = self.alloc(Value::Thread(id), Value::Unit)?;
        let bound = self.channels.queue_bound();
        for &rec in records {
            let be = self.base_event_at(rec)?;
            let Vm { channels, heap, sched, .. } = self;
            let q = channels.get_mut(be.channel)?.queue_mut(be.kind);
            if q.len() >= bound {
                // inert entries may sit behind live ones; compact before refusing
                let before = q.len();
                q.retain(|e| !heap.flag(e.flag));
                sched.stats.purged += (before - q.len()) as u64;
            }
            if q.len() >= bound {
                return Err(VmError::ChannelQueueFull { ch: be.channel.0, bound });
            }
            q.push_back(QueueEntry { thread: id, event: rec, flag });
        }
        self.ctx_mut(slot).state = ContextState::Blocked;
        self.sched.current = None;
        self.trace.push(self.now(), TraceEvent::Block { ctx: id, entries: records.len() });
        Ok(())
    }

    /// Hands the processor to the next ready context, draining driver
    /// messages first. Returns false when the VM goes to sleep.
    pub(crate) fn dispatch_new_thread(&mut self) -> Result<bool, VmError> {
        self.drain_bridge()?;
        while let Some(id) = self.sched.ready.pop_front() {
            if let Some(slot) = self.slot_of(id) {
                self.ctx_mut(slot).state = ContextState::Running;
                self.sched.current = Some(slot);
                self.sched.asleep = false;
                self.sched.stats.dispatches += 1;
                self.trace.push(self.now(), TraceEvent::Dispatch { ctx: id });
                return Ok(true);
            }
        }
        if !self.sched.asleep && self.live_contexts() > 0 {
            self.sched.asleep = true;
            self.sched.stats.sleeps += 1;
            self.trace.push(self.now(), TraceEvent::Sleep { steps: self.steps() });
        }
        Ok(false)
    }

    fn drain_bridge(&mut self) -> Result<(), VmError> {
        while let Some(msg) = self.bridge.queue().try_take() {
            if self.sched.asleep {
                self.sched.asleep = false;
                self.sched.stats.wakes += 1;
                self.trace.push(self.now(), TraceEvent::Wake { drv: msg.driver, steps: self.steps() });
            }
            self.wake_on_driver_msg(msg)?;
        }
        Ok(())
    }

    pub(crate) fn sync_now(&mut self, slot: usize, be: BaseEvent) -> Result<(), VmError> {
        let id = self.ctx(slot).id;
        let now = self.now();
        match (self.channels.get(be.channel)?.binding, be.kind) {
            (None, EventKind::Send) => {
                let (entry, partner, rslot) = self.pop_partner(be.channel, EventKind::Recv)?;
                self.resume(rslot, be.message, partner.wrap)?;
                self.resume(slot, Value::Unit, be.wrap)?;
                self.ctx_mut(slot).state = ContextState::Ready;
                self.sched.ready.push_back(id);
                self.ctx_mut(rslot).state = ContextState::Running;
                self.sched.current = Some(rslot);
                self.sched.stats.rendezvous += 1;
                let ev = TraceEvent::Rendezvous { ch: be.channel, sender: id, receiver: entry.thread, msg: be.message };
                self.trace.push(now, ev);
            }
            (None, EventKind::Recv) => {
                let (entry, partner, sslot) = self.pop_partner(be.channel, EventKind::Send)?;
                self.resume(slot, partner.message, be.wrap)?;
                self.resume(sslot, Value::Unit, partner.wrap)?;
                self.ctx_mut(sslot).state = ContextState::Ready;
                self.sched.ready.push_back(entry.thread);
                self.sched.stats.rendezvous += 1;
                let ev =
                    TraceEvent::Rendezvous { ch: be.channel, sender: entry.thread, receiver: id, msg: partner.message };
                self.trace.push(now, ev);
            }
            (Some(d), EventKind::Send) => {
                self.bridge.driver_mut(d)?.ll_write(be.message)?;
                self.sched.stats.driver_writes += 1;
                self.trace.push(now, TraceEvent::DriverWrite { drv: d, ch: be.channel, ctx: id, val: be.message });
                self.resume(slot, Value::Unit, be.wrap)?;
            }
            (Some(d), EventKind::Recv) => {
                let v = self.bridge.driver_mut(d)?.ll_read()?;
                self.sched.stats.driver_reads += 1;
                self.trace.push(now, TraceEvent::DriverRead { drv: d, ch: be.channel, ctx: id, val: v });
                self.resume(slot, v, be.wrap)?;
            }
        }
        Ok(())
    }

    pub(crate) fn wake_on_driver_msg(&mut self, msg: DriverMessage) -> Result<(), VmError> {
        let now = self.now();
        let d = msg.driver;
        let bound = self.bridge.driver(d)?.bound_channel();
        match msg.event {
            DriverEvent::Input(_) => {
                if let Some(ch) = bound {
                    self.purge_dirty(ch, EventKind::Recv)?;
                    if !self.channels.get(ch)?.recvq.is_empty() {
                        let Some(v) = self.bridge.driver_mut(d)?.interrupt_direct(&msg.event) else {
                            return Ok(());
                        };
                        let (entry, be, rslot) = self.pop_partner(ch, EventKind::Recv)?;
                        self.resume(rslot, v, be.wrap)?;
                        self.ctx_mut(rslot).state = ContextState::Ready;
                        self.sched.ready.push_back(entry.thread);
                        self.sched.stats.deliveries += 1;
                        self.trace.push(now, TraceEvent::Deliver { drv: d, ch, ctx: entry.thread, val: v });
                        return Ok(());
                    }
                }
                let h = self.bridge.driver_mut(d)?;
                let before = h.pending();
                match h.interrupt(&msg.event) {
                    Ok(()) => {
                        if let Some(v) = h.pending().filter(|_| before.is_none()) {
                            self.trace.push(now, TraceEvent::Latch { drv: d, val: v });
                        }
                    }
                    Err(v) => {
                        self.sched.stats.dropped_slot += 1;
                        self.trace.push(now, TraceEvent::Drop { drv: d, val: v, reason: DropReason::Slot });
                    }
                }
            }
            DriverEvent::Drain(_) => {
                // a drain produces no payload, so it can never overflow the slot
                let _ = self.bridge.driver_mut(d)?.interrupt(&msg.event);
                let Some(ch) = bound else { return Ok(()) };
                loop {
                    self.purge_dirty(ch, EventKind::Send)?;
                    if self.channels.get(ch)?.sendq.is_empty() || self.bridge.driver(d)?.ll_data_writeable() == 0 {
                        break;
                    }
                    let (entry, be, sslot) = self.pop_partner(ch, EventKind::Send)?;
                    self.bridge.driver_mut(d)?.ll_write(be.message)?;
                    self.sched.stats.driver_writes += 1;
                    self.trace.push(now, TraceEvent::DriverWrite { drv: d, ch, ctx: entry.thread, val: be.message });
                    self.resume(sslot, Value::Unit, be.wrap)?;
                    self.ctx_mut(sslot).state = ContextState::Ready;
                    self.sched.ready.push_back(entry.thread);
                }
            }
        }
        Ok(())
    }

    /// Binds `chan` to driver `drv`; events on it now go through the bridge.
    pub fn spawn_external(&mut self, chan: ChannelId, drv: crate::value::DriverId) -> Result<ThreadId, VmError> {
        let ch = self.channels.get(chan)?;
        if ch.binding.is_some() {
            return Err(crate::bridge::BridgeError::AlreadyBound(chan.0).into());
        }
        let tid = self.bridge.bind(chan, drv)?;
        self.channels.get_mut(chan)?.binding = Some(drv);
        self.trace.push(self.now(), TraceEvent::Bind { ch: chan, drv });
        Ok(tid)
    }

    /// Channels each blocked context still waits on, from live entries.
    pub fn blocked_interest(&self) -> Vec<(ThreadId, Vec<ChannelId>)> {
        let mut out: Vec<(ThreadId, Vec<ChannelId>)> =
            self.contexts().filter(|c| c.state == ContextState::Blocked).map(|c| (c.id, Vec::new())).collect();
        for ch in self.channels.iter() {
            for e in ch.sendq.iter().chain(&ch.recvq) {
                if self.heap.flag(e.flag) {
                    continue;
                }
                if let Some((_, chans)) = out.iter_mut().find(|(t, _)| *t == e.thread) {
                    if !chans.contains(&ch.id) {
                        chans.push(ch.id);
                    }
                }
            }
        }
        out
    }

    /// Classifies a sleeping VM that will receive no further input.
    pub fn idle_state(&self) -> IdleState {
        let blocked = self.blocked_interest();
        if blocked.is_empty() {
            return IdleState::Halted;
        }
        for (ctx, chans) in &blocked {
            let external = chans.iter().any(|c| self.channels.get(*c).is_ok_and(|ch| ch.binding.is_some()));
            if !external {
                return IdleState::Deadlock { ctx: *ctx, channels: chans.clone() };
            }
        }
        IdleState::Quiescent { blocked: blocked.len() }
    }
}
