//! A bytecode virtual machine for microcontroller-style programs with
//! first-class synchronous events, cooperative green threads, a small
//! mark/lazy-sweep heap, and a driver bridge backed by simulated
//! peripherals.

pub mod asm;
pub mod bridge;
pub mod config;
pub mod event;
pub mod heap;
pub mod image;
pub mod isa;
pub mod runner;
pub mod sched;
pub mod sim;
pub mod trace;
pub mod value;
pub mod vm;

pub use config::RunConfig;
pub use image::{load_program, Program};
pub use value::{CellRef, ChannelId, DriverId, ThreadId, Value};
pub use vm::{StepOutcome, Vm, VmError};
