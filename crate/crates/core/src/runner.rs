//! Drives a VM against a scenario until it halts, idles, or fails.

use std::fmt;

use crate::config::RunConfig;
use crate::image::Program;
use crate::sched::{IdleState, SchedStats};
use crate::sim::{make_peripheral, Scenario, ScenarioEngine};
use crate::trace::{DropReason, Trace, TraceEvent};
use crate::value::{ChannelId, ThreadId};
use crate::vm::{ContextRecord, StepOutcome, Vm, VmError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Every context finished.
    Halted,
    /// Input ran out while every blocked context waits on a driver.
    Quiescent {
        blocked: usize,
    },
    Deadlock {
        ctx: ThreadId,
        channels: Vec<ChannelId>,
    },
    MaxSteps(u64),
    Fault(VmError),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Halted | Outcome::Quiescent { .. } => 0,
            Outcome::Deadlock { .. } => 2,
            Outcome::Fault(e) if e.is_resource_exhaustion() => 3,
            Outcome::MaxSteps(_) => 4,
            Outcome::Fault(_) => 5,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Halted => f.write_str("halted"),
            Outcome::Quiescent { blocked: 1 } => f.write_str("quiescent (1 context waiting on drivers)"),
            Outcome::Quiescent { blocked } => write!(f, "quiescent ({blocked} contexts waiting on drivers)"),
            Outcome::Deadlock { ctx, channels } if channels.is_empty() => {
                write!(f, "deadlock: context {ctx} blocked on the empty event")
            }
            Outcome::Deadlock { ctx, channels } => {
                let chans: Vec<String> = channels.iter().map(|c| c.0.to_string()).collect();
                write!(f, "deadlock: context {ctx} blocked on channel {}", chans.join(","))
            }
            Outcome::MaxSteps(n) => write!(f, "step limit reached after {n} steps"),
            Outcome::Fault(e) => write!(f, "error: {e}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub steps: u64,
    pub idle_steps: u64,
    pub sched: SchedStats,
    pub collections: u64,
    pub cells_reclaimed: u64,
    pub max_live_cells: usize,
    pub mark_steps: Vec<u64>,
    /// Messages rejected by the full bridge queue.
    pub dropped_queue: u64,
    pub channels_in_use: usize,
    pub contexts: Vec<ContextRecord>,
    pub final_time_ms: u64,
}

impl RunStats {
    pub fn dropped(&self) -> u64 {
        self.sched.dropped_slot + self.dropped_queue
    }
}

impl fmt::Display for RunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps: {}", self.steps)?;
        writeln!(f, "virtual time: {} ms", self.final_time_ms)?;
        writeln!(f, "rendezvous: {}", self.sched.rendezvous)?;
        writeln!(f, "driver writes: {}", self.sched.driver_writes)?;
        writeln!(f, "driver reads: {}", self.sched.driver_reads)?;
        writeln!(f, "deliveries: {}", self.sched.deliveries)?;
        writeln!(f, "dispatches: {}", self.sched.dispatches)?;
        writeln!(f, "gc collections: {}", self.collections)?;
        writeln!(f, "cells reclaimed: {}", self.cells_reclaimed)?;
        let marks: Vec<String> = self.mark_steps.iter().map(u64::to_string).collect();
        writeln!(f, "mark steps: [{}]", marks.join(","))?;
        writeln!(f, "peak live cells: {}", self.max_live_cells)?;
        writeln!(f, "sleeps: {}", self.sched.sleeps)?;
        writeln!(f, "wakes: {}", self.sched.wakes)?;
        writeln!(
            f,
            "dropped messages: {} (slot {}, queue {})",
            self.dropped(),
            self.sched.dropped_slot,
            self.dropped_queue
        )?;
        writeln!(f, "idle steps: {}", self.idle_steps)?;
        for c in &self.contexts {
            writeln!(
                f,
                "context {}: instructions {}, wraps {}, peak stack {}",
                c.id, c.instructions, c.wraps_run, c.peak_stack
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: Outcome,
    pub config: RunConfig,
    pub stats: RunStats,
    pub trace: Trace,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.outcome.exit_code()
    }

    /// Effective configuration, outcome, and statistics.
    pub fn summary(&self) -> String {
        format!("{}\noutcome: {}\n{}", self.config.report(self.stats.channels_in_use), self.outcome, self.stats)
    }
}

fn post_due(engine: &mut ScenarioEngine, vm: &mut Vm, asleep: bool) {
    let poster = vm.bridge().queue().poster();
    let now = vm.clock().now_ms();
    for posted in engine.advance(vm.clock_mut(), asleep, &poster) {
        if let Err(full) = posted {
            let val = match full.0.event {
                crate::bridge::DriverEvent::Input(v) => v,
                crate::bridge::DriverEvent::Drain(n) => crate::value::Value::Int(n as i32),
            };
            let t = vm.clock().now_ms().max(now);
            vm.trace_mut().push(t, TraceEvent::Drop { drv: full.0.driver, val, reason: DropReason::Queue });
        }
    }
}

fn collect(vm: Vm, outcome: Outcome, config: &RunConfig) -> RunReport {
    let heap = vm.heap().stats();
    let stats = RunStats {
        steps: vm.steps(),
        idle_steps: vm.idle_steps(),
        sched: vm.scheduler().stats().clone(),
        collections: heap.collections,
        cells_reclaimed: heap.cells_reclaimed,
        max_live_cells: heap.max_live,
        mark_steps: heap.mark_steps.clone(),
        dropped_queue: vm.bridge().queue().dropped(),
        channels_in_use: vm.channels().len(),
        contexts: vm.context_records(),
        final_time_ms: vm.clock().now_ms(),
    };
    RunReport { outcome, config: config.clone(), stats, trace: vm.into_trace() }
}

/// Runs `program` against `scenario` to completion.
pub fn run(program: &Program, scenario: &Scenario, config: &RunConfig) -> RunReport {
    let mut vm = match Vm::new(program.clone(), config.clone()) {
        Ok(vm) => vm,
        Err(e) => {
            let stats = RunStats::default();
            return RunReport { outcome: Outcome::Fault(e), config: config.clone(), stats, trace: Trace::default() };
        }
    };
    for d in &scenario.drivers {
        if let Err(e) = vm.register_driver(&d.name, make_peripheral(d.kind, d.uart_buffer)) {
            return collect(vm, Outcome::Fault(e), config);
        }
    }
    let mut engine = ScenarioEngine::new(scenario);
    let outcome = loop {
        if config.max_steps.is_some_and(|max| vm.steps() >= max) {
            break Outcome::MaxSteps(vm.steps());
        }
        if vm.at_dispatch_boundary() {
            post_due(&mut engine, &mut vm, false);
        }
        match vm.step() {
            Ok(StepOutcome::Halted) => break Outcome::Halted,
            Ok(StepOutcome::AllAsleep) => {
                if engine.is_exhausted() {
                    break match vm.idle_state() {
                        IdleState::Halted => Outcome::Halted,
                        IdleState::Quiescent { blocked } => Outcome::Quiescent { blocked },
                        IdleState::Deadlock { ctx, channels } => Outcome::Deadlock { ctx, channels },
                    };
                }
                post_due(&mut engine, &mut vm, true);
            }
            Ok(_) => {}
            Err(e) => break Outcome::Fault(e),
        }
    };
    let now = vm.clock().now_ms();
    let steps = vm.steps();
    match &outcome {
        Outcome::Halted => vm.trace_mut().push(now, TraceEvent::Halt { steps }),
        Outcome::Quiescent { blocked } => vm.trace_mut().push(now, TraceEvent::Quiescent { blocked: *blocked }),
        Outcome::Deadlock { ctx, channels } => {
            vm.trace_mut().push(now, TraceEvent::Deadlock { ctx: *ctx, ch: channels.first().copied() })
        }
        _ => {}
    }
    collect(vm, outcome, config)
}
