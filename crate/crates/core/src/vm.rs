//! The interpreter: contexts, the step function, and CAM semantics.
//!
//! Calling convention. A closure is `Closure(c)` with `c = (Label(l), env)`.
//! Applying it to `arg` sets `env = (env, arg)` and jumps to `l` after
//! pushing the return address. `ACC n` therefore reads the argument bound
//! `n` levels out. `RETURN` pops the top of stack: a label is jumped to, a
//! function value is applied to the current env (this is how composed wraps
//! chain), and an empty stack finishes the context.

use thiserror::Error;

use crate::bridge::{Bridge, BridgeError, Peripheral};
use crate::config::{ConfigError, RunConfig};
use crate::event::ChannelTable;
use crate::heap::{Heap, OutOfMemory};
use crate::image::Program;
use crate::isa::{Instruction, Opcode};
use crate::sched::Scheduler;
use crate::sim::VirtualClock;
use crate::trace::{Trace, TraceEvent};
use crate::value::{CellRef, ChannelId, DriverId, ThreadId, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VmError {
    #[error("context {ctx}: stack overflow ({slots} slots)")]
    StackOverflow { ctx: ThreadId, slots: usize },
    #[error("context {ctx}: stack underflow at pc {pc}")]
    StackUnderflow { ctx: ThreadId, pc: u32 },
    #[error("context {ctx} at pc {pc}: {what}")]
    TypeConfusion { ctx: ThreadId, pc: u32, what: String },
    #[error(transparent)]
    OutOfMemory(#[from] OutOfMemory),
    #[error("no free context slot ({0} configured)")]
    NoFreeContext(usize),
    #[error("no free channel slot ({0} configured)")]
    NoFreeChannel(usize),
    #[error("unknown channel {0}")]
    UnknownChannel(u32),
    #[error("channel {ch} queue full ({bound} entries)")]
    ChannelQueueFull { ch: u32, bound: usize },
    #[error("driver {driver} at instruction {index} exceeds the driver capacity {capacity}")]
    DriverOperandOutOfRange { index: usize, driver: u16, capacity: usize },
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl VmError {
    /// Errors caused by a static budget running out.
    pub fn is_resource_exhaustion(&self) -> bool {
        matches!(
            self,
            VmError::StackOverflow { .. }
                | VmError::OutOfMemory(_)
                | VmError::NoFreeContext(_)
                | VmError::NoFreeChannel(_)
                | VmError::ChannelQueueFull { .. }
                | VmError::Bridge(BridgeError::TooManyDrivers(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextState {
    Ready,
    Running,
    Blocked,
    Done,
}

#[derive(Debug, Clone)]
pub struct Context {
    pub id: ThreadId,
    pub env: Value,
    pub(crate) stack: Vec<Value>,
    pub pc: u32,
    pub state: ContextState,
    pub instructions: u64,
    /// Post-synchronization resumptions, identity wraps included.
    pub wraps_run: u64,
    pub peak_stack: usize,
}

impl Context {
    pub fn stack(&self) -> &[Value] {
        &self.stack
    }
}

/// Summary kept for a context after its slot is freed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextRecord {
    pub id: ThreadId,
    pub instructions: u64,
    pub wraps_run: u64,
    pub peak_stack: usize,
    /// Env register at finish; `None` while still live.
    pub result: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continued,
    ContextBlocked,
    ContextFinished,
    AllAsleep,
    Halted,
}

#[derive(Debug)]
pub struct Vm {
    program: Program,
    pool: Vec<Value>,
    config: RunConfig,
    pub(crate) heap: Heap,
    pub(crate) slots: Vec<Option<Context>>,
    pub(crate) channels: ChannelTable,
    pub(crate) bridge: Bridge,
    pub(crate) sched: Scheduler,
    pub(crate) clock: VirtualClock,
    pub(crate) trace: Trace,
    /// Temporaries that must survive an allocation within the current step.
    pub(crate) scratch: Vec<Value>,
    finished: Vec<ContextRecord>,
    next_thread: u32,
    steps: u64,
    idle_steps: u64,
    collections_traced: u64,
}

impl Vm {
    pub fn new(program: Program, config: RunConfig) -> Result<Vm, VmError> {
        config.validate()?;
        for (index, ins) in program.code.iter().enumerate() {
            if ins.op == Opcode::SpawnX && ins.operand as usize >= config.drivers {
                return Err(VmError::DriverOperandOutOfRange { index, driver: ins.operand, capacity: config.drivers });
            }
        }
        let pool = program.constant_pool.iter().map(|l| l.to_value()).collect();
        let mut vm = Vm {
            heap: Heap::with_capacity(config.heap_cells()),
            slots: (0..config.contexts).map(|_| None).collect(),
            channels: ChannelTable::new(config.channels, config.channel_queue_bound),
            bridge: Bridge::new(config.drivers, config.bridge_queue_capacity),
            sched: Scheduler::default(),
            clock: VirtualClock::new(),
            trace: Trace::default(),
            scratch: Vec::new(),
            finished: Vec::new(),
            next_thread: 1,
            steps: 0,
            idle_steps: 0,
            collections_traced: 0,
            pool,
            config,
            program,
        };
        let main = ThreadId(0);
        vm.slots[0] = Some(Context {
            id: main,
            env: Value::Unit,
            stack: Vec::new(),
            pc: vm.program.entry_point,
            state: ContextState::Ready,
            instructions: 0,
            wraps_run: 0,
            peak_stack: 0,
        });
        vm.sched.ready.push_back(main);
        vm.trace.push(0, TraceEvent::Spawn { ctx: main, parent: main });
        Ok(vm)
    }

    pub fn register_driver(&mut self, name: &str, device: Box<dyn Peripheral>) -> Result<DriverId, VmError> {
        Ok(self.bridge.register(name, device)?)
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    pub fn bridge(&self) -> &Bridge {
        &self.bridge
    }

    pub fn channels(&self) -> &ChannelTable {
        &self.channels
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.sched
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn clock_mut(&mut self) -> &mut VirtualClock {
        &mut self.clock
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn trace_mut(&mut self) -> &mut Trace {
        &mut self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Instructions executed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Instructions executed while no context was running. Always 0.
    pub fn idle_steps(&self) -> u64 {
        self.idle_steps
    }

    pub fn contexts(&self) -> impl Iterator<Item = &Context> {
        self.slots.iter().flatten()
    }

    pub fn context(&self, id: ThreadId) -> Option<&Context> {
        self.contexts().find(|c| c.id == id)
    }

    pub fn current(&self) -> Option<&Context> {
        self.sched.current.and_then(|s| self.slots[s].as_ref())
    }

    pub fn finished(&self) -> &[ContextRecord] {
        &self.finished
    }

    /// Per-context counters for every context ever spawned, ordered by id.
    pub fn context_records(&self) -> Vec<ContextRecord> {
        let mut all: Vec<ContextRecord> = self.finished.clone();
        all.extend(self.contexts().map(|c| ContextRecord {
            id: c.id,
            instructions: c.instructions,
            wraps_run: c.wraps_run,
            peak_stack: c.peak_stack,
            result: None,
        }));
        all.sort_by_key(|r| r.id);
        all
    }

    /// Final env of the main context, once it has finished.
    pub fn main_result(&self) -> Option<Value> {
        self.finished.iter().find(|r| r.id == ThreadId(0)).and_then(|r| r.result)
    }

    pub fn live_contexts(&self) -> usize {
        self.contexts().count()
    }

    /// True between instructions when no context holds the processor.
    pub fn at_dispatch_boundary(&self) -> bool {
        self.sched.current.is_none()
    }

    pub(crate) fn slot_of(&self, id: ThreadId) -> Option<usize> {
        self.slots.iter().position(|s| s.as_ref().is_some_and(|c| c.id == id))
    }

    pub(crate) fn ctx(&self, slot: usize) -> &Context {
        self.slots[slot].as_ref().expect("live context slot")
    }

    pub(crate) fn ctx_mut(&mut self, slot: usize) -> &mut Context {
        self.slots[slot].as_mut().expect("live context slot")
    }

    pub(crate) fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    pub(crate) fn type_confusion(&self, what: String) -> VmError {
        let (ctx, pc) = self.current().map_or((ThreadId(u32::MAX), 0), |c| (c.id, c.pc));
        VmError::TypeConfusion { ctx, pc, what }
    }

    /// Allocates a cell, collecting over every VM root if the sweep runs dry.
    pub fn alloc(&mut self, fst: Value, snd: Value) -> Result<CellRef, VmError> {
        let Vm { heap, slots, channels, bridge, scratch, .. } = self;
        let r = heap.alloc(fst, snd, |out| {
            for ctx in slots.iter().flatten() {
                out.push(ctx.env);
                out.extend_from_slice(&ctx.stack);
            }
            channels.push_roots(out);
            out.extend(bridge.pending_values());
            out.extend_from_slice(scratch);
        })?;
        let stats = self.heap.stats();
        if stats.collections != self.collections_traced {
            self.collections_traced = stats.collections;
            let ev = TraceEvent::Gc {
                n: stats.collections,
                marked: stats.last_marked,
                mark_steps: stats.mark_steps.last().copied().unwrap_or(0),
            };
            self.trace.push(self.now(), ev);
        }
        Ok(r)
    }

    pub(crate) fn push(&mut self, slot: usize, v: Value) -> Result<(), VmError> {
        let limit = self.config.stack_slots();
        let ctx = self.ctx_mut(slot);
        if ctx.stack.len() >= limit {
            return Err(VmError::StackOverflow { ctx: ctx.id, slots: limit });
        }
        ctx.stack.push(v);
        ctx.peak_stack = ctx.peak_stack.max(ctx.stack.len());
        Ok(())
    }

    fn pop(&mut self, slot: usize) -> Result<Value, VmError> {
        let ctx = self.ctx_mut(slot);
        ctx.stack.pop().ok_or(VmError::StackUnderflow { ctx: ctx.id, pc: ctx.pc })
    }

    /// Enters function `f` with argument `arg`. The caller has already
    /// pushed whatever the function should return to.
    pub(crate) fn enter(&mut self, slot: usize, mut f: Value, arg: Value) -> Result<(), VmError> {
        loop {
            match f {
                Value::Closure(c) => {
                    let Value::Label(l) = self.heap.fst(c) else {
                        return Err(self.type_confusion("closure without code label".into()));
                    };
                    let cenv = self.heap.snd(c);
                    self.scratch.push(arg);
                    let env = self.alloc(cenv, arg)?;
                    let ctx = self.ctx_mut(slot);
                    ctx.env = Value::Cell(env);
                    ctx.pc = l;
                    return Ok(());
                }
                Value::Composed(c) => {
                    // outer after inner
                    let (outer, inner) = (self.heap.fst(c), self.heap.snd(c));
                    self.push(slot, outer)?;
                    f = inner;
                }
                other => {
                    return Err(self.type_confusion(format!("cannot apply {}", other.tag_name())));
                }
            }
        }
    }

    /// Resumes a context after synchronization: `value` goes to the env and
    /// the event's wrap runs before control returns to the saved pc.
    pub(crate) fn resume(&mut self, slot: usize, value: Value, wrap: Value) -> Result<(), VmError> {
        let ctx = self.ctx_mut(slot);
        ctx.env = value;
        ctx.wraps_run += 1;
        let ret = ctx.pc;
        match wrap {
            Value::Unit => Ok(()),
            f => {
                self.push(slot, Value::Label(ret))?;
                self.enter(slot, f, value)
            }
        }
    }

    /// Creates a context that will apply `closure` to unit.
    pub fn spawn(&mut self, closure: Value) -> Result<ThreadId, VmError> {
        if !closure.is_applicable() {
            return Err(self.type_confusion(format!("spawn expects a function, got {}", closure.tag_name())));
        }
        let slot = self.slots.iter().position(Option::is_none).ok_or(VmError::NoFreeContext(self.config.contexts))?;
        let id = ThreadId(self.next_thread);
        self.next_thread += 1;
        self.slots[slot] = Some(Context {
            id,
            env: Value::Unit,
            stack: Vec::new(),
            pc: 0,
            state: ContextState::Ready,
            instructions: 0,
            wraps_run: 0,
            peak_stack: 0,
        });
        self.scratch.push(closure);
        if let Err(e) = self.enter(slot, closure, Value::Unit) {
            self.slots[slot] = None;
            return Err(e);
        }
        self.sched.ready.push_back(id);
        let parent = self.current().map_or(id, |c| c.id);
        self.trace.push(self.now(), TraceEvent::Spawn { ctx: id, parent });
        Ok(id)
    }

    fn finish(&mut self, slot: usize) -> StepOutcome {
        let ctx = self.slots[slot].take().expect("live context slot");
        self.finished.push(ContextRecord {
            id: ctx.id,
            instructions: ctx.instructions,
            wraps_run: ctx.wraps_run,
            peak_stack: ctx.peak_stack,
            result: Some(ctx.env),
        });
        self.sched.current = None;
        self.trace.push(self.now(), TraceEvent::Finish { ctx: ctx.id });
        StepOutcome::ContextFinished
    }

    /// Executes one instruction of the running context, dispatching one
    /// first if none is running.
    pub fn step(&mut self) -> Result<StepOutcome, VmError> {
        if self.sched.current.is_none() && !self.dispatch_new_thread()? {
            return Ok(if self.live_contexts() == 0 { StepOutcome::Halted } else { StepOutcome::AllAsleep });
        }
        let Some(slot) = self.sched.current else {
            self.idle_steps += 1;
            return Ok(StepOutcome::AllAsleep);
        };
        self.steps += 1;
        self.clock.tick(self.config.instruction_cost_ms);
        self.ctx_mut(slot).instructions += 1;
        let result = self.execute(slot);
        self.scratch.clear();
        result
    }

    fn execute(&mut self, slot: usize) -> Result<StepOutcome, VmError> {
        use Value::*;
        let pc = self.ctx(slot).pc;
        let Some(&Instruction { op, operand }) = self.program.code.get(pc as usize) else {
            return Err(self.type_confusion(format!("pc {pc} outside code")));
        };
        let next = pc + 1;
        let env = self.ctx(slot).env;
        let mut new_pc = next;
        let new_env = match op {
            Opcode::Fst | Opcode::Snd => match env {
                Cell(r) => {
                    if op == Opcode::Fst {
                        self.heap.fst(r)
                    } else {
                        self.heap.snd(r)
                    }
                }
                other => return Err(self.type_confusion(format!("{} on {}", op.mnemonic(), other.tag_name()))),
            },
            Opcode::Acc | Opcode::Rest => {
                let mut v = env;
                for _ in 0..operand {
                    v = self.project(v, true, op)?;
                }
                if op == Opcode::Acc {
                    self.project(v, false, op)?
                } else {
                    v
                }
            }
            Opcode::Push => {
                self.push(slot, env)?;
                env
            }
            Opcode::Pop => self.pop(slot)?,
            Opcode::Swap => {
                let top = self.pop(slot)?;
                self.push(slot, env)?;
                top
            }
            Opcode::LoadI => self.pool[operand as usize],
            Opcode::Clear => Unit,
            Opcode::Cur => Closure(self.alloc(Label(operand as u32), env)?),
            Opcode::Comb => Closure(self.alloc(Label(operand as u32), Unit)?),
            Opcode::App => {
                let Cell(p) = env else {
                    return Err(self.type_confusion(format!("APP on {}", env.tag_name())));
                };
                let (f, arg) = (self.heap.fst(p), self.heap.snd(p));
                self.push(slot, Label(next))?;
                self.ctx_mut(slot).pc = next;
                self.enter(slot, f, arg)?;
                return Ok(StepOutcome::Continued);
            }
            Opcode::Return => match self.ctx_mut(slot).stack.pop() {
                None => return Ok(self.finish(slot)),
                Some(Label(l)) => {
                    new_pc = l;
                    env
                }
                Some(f) if f.is_applicable() => {
                    self.enter(slot, f, env)?;
                    return Ok(StepOutcome::Continued);
                }
                Some(other) => {
                    return Err(self.type_confusion(format!("RETURN to {}", other.tag_name())));
                }
            },
            Opcode::Call => {
                self.push(slot, Label(next))?;
                new_pc = operand as u32;
                env
            }
            Opcode::Goto => {
                new_pc = operand as u32;
                env
            }
            Opcode::GotoFalse => {
                let saved = self.pop(slot)?;
                match env {
                    Bool(false) => new_pc = operand as u32,
                    Bool(true) => {}
                    other => return Err(self.type_confusion(format!("GOTOFALSE on {}", other.tag_name()))),
                }
                saved
            }
            Opcode::Cons => {
                let a = self.pop(slot)?;
                Cell(self.alloc(a, env)?)
            }
            Opcode::Stop => return Ok(self.finish(slot)),
            Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Eq | Opcode::Lt => {
                let a = self.pop(slot)?;
                self.primitive(op, a, env)?
            }
            Opcode::Channel => Chan(self.channel()?),
            Opcode::SendEvt => {
                let ch = self.pop(slot)?;
                let ch = self.expect_chan(ch)?;
                self.send_evt(ch, env)?
            }
            Opcode::RecvEvt => {
                let ch = self.expect_chan(env)?;
                self.recv_evt(ch)?
            }
            Opcode::Choose => {
                let e1 = self.pop(slot)?;
                self.choose(e1, env)?
            }
            Opcode::Wrap => {
                let e = self.pop(slot)?;
                self.wrap(e, env)?
            }
            Opcode::Sync => {
                self.ctx_mut(slot).pc = next;
                return self.sync(slot, env);
            }
            Opcode::Spawn => {
                let clo = Closure(self.alloc(Label(operand as u32), env)?);
                Thread(self.spawn(clo)?)
            }
            Opcode::SpawnX => {
                let ch = self.expect_chan(env)?;
                Thread(self.spawn_external(ch, DriverId(operand as u32))?)
            }
        };
        let ctx = self.ctx_mut(slot);
        ctx.env = new_env;
        ctx.pc = new_pc;
        Ok(StepOutcome::Continued)
    }

    fn project(&self, v: Value, first: bool, op: Opcode) -> Result<Value, VmError> {
        match v {
            Value::Cell(r) => Ok(if first { self.heap.fst(r) } else { self.heap.snd(r) }),
            other => Err(self.type_confusion(format!("{} through {}", op.mnemonic(), other.tag_name()))),
        }
    }

    fn expect_chan(&self, v: Value) -> Result<ChannelId, VmError> {
        match v {
            Value::Chan(c) => Ok(c),
            other => Err(self.type_confusion(format!("expected a channel, got {}", other.tag_name()))),
        }
    }

    fn primitive(&self, op: Opcode, a: Value, b: Value) -> Result<Value, VmError> {
        use Value::*;
        Ok(match (op, a, b) {
            (Opcode::Add, Int(x), Int(y)) => Int(x.wrapping_add(y)),
            (Opcode::Sub, Int(x), Int(y)) => Int(x.wrapping_sub(y)),
            (Opcode::Mul, Int(x), Int(y)) => Int(x.wrapping_mul(y)),
            (Opcode::Lt, Int(x), Int(y)) => Bool(x < y),
            (Opcode::Eq, x, y) if x.cell_ref().is_none() && y.cell_ref().is_none() => Bool(x == y),
            _ => {
                return Err(self.type_confusion(format!("{} on {} and {}", op.mnemonic(), a.tag_name(), b.tag_name())))
            }
        })
    }
}
