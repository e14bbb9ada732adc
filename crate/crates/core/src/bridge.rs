//! Low-level bridge: the five-operation driver interface, driver handles,
//! and the message queue through which interrupt-side code talks to the
//! scheduler.
//!
//! Synchronous drivers (the LED) can be read or written at any time.
//! Asynchronous drivers (button, UART) report availability: an interrupt
//! payload is latched in a single pending slot until a `recv` consumes it,
//! and writes are refused while the device cannot accept data.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::sim::PeripheralState;
use crate::value::{ChannelId, DriverId, ThreadId, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BridgeError {
    #[error("driver {0} has no data to read")]
    NotReadable(u32),
    #[error("driver {0} cannot accept data")]
    NotWriteable(u32),
    #[error("driver {driver} rejects datum {datum}")]
    BadDatum { driver: u32, datum: String },
    #[error("unknown driver {0}")]
    UnknownDriver(u32),
    #[error("driver table full ({0} slots)")]
    TooManyDrivers(usize),
    #[error("channel {0} is already bound to a driver")]
    AlreadyBound(u32),
    #[error("driver {0} is already bound to a channel")]
    DriverAlreadyBound(u32),
}

/// Device side of a driver, implemented by each peripheral model.
pub trait Peripheral: std::fmt::Debug + Send {
    fn is_synchronous(&self) -> bool;
    /// Current state for synchronous devices; `None` for async ones, whose
    /// readable data arrives through interrupts.
    fn sample(&self) -> Option<Value>;
    fn writeable(&self) -> u32;
    /// Called only when `writeable() > 0`.
    fn write(&mut self, data: Value) -> Result<(), String>;
    /// Interrupt-side state change. Returns the payload to latch, if any.
    fn interrupt(&mut self, event: &DriverEvent) -> Option<Value>;
    fn state(&self) -> PeripheralState;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverEvent {
    /// Data produced by the device (button level, received byte).
    Input(Value),
    /// Device freed output space (UART transmitted `n` bytes).
    Drain(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriverMessage {
    pub driver: DriverId,
    pub event: DriverEvent,
    pub timestamp_ms: u64,
}

#[derive(Debug)]
pub struct DriverHandle {
    pub id: DriverId,
    pub name: String,
    device: Box<dyn Peripheral>,
    synchronous: bool,
    pending: Option<Value>,
    bound: Option<ChannelId>,
}

impl DriverHandle {
    pub fn new(id: DriverId, name: impl Into<String>, device: Box<dyn Peripheral>) -> Self {
        let synchronous = device.is_synchronous();
        DriverHandle { id, name: name.into(), device, synchronous, pending: None, bound: None }
    }

    pub fn ll_read(&mut self) -> Result<Value, BridgeError> {
        let v = if self.synchronous { self.device.sample() } else { self.pending.take() };
        v.ok_or(BridgeError::NotReadable(self.id.0))
    }

    pub fn ll_write(&mut self, data: Value) -> Result<u32, BridgeError> {
        if self.device.writeable() == 0 {
            return Err(BridgeError::NotWriteable(self.id.0));
        }
        self.device.write(data).map_err(|datum| BridgeError::BadDatum { driver: self.id.0, datum })?;
        Ok(1)
    }

    pub fn ll_data_readable(&self) -> u32 {
        if self.synchronous {
            self.device.sample().is_some() as u32
        } else {
            self.pending.is_some() as u32
        }
    }

    pub fn ll_data_writeable(&self) -> u32 {
        self.device.writeable()
    }

    pub fn ll_is_synchronous(&self) -> bool {
        self.synchronous
    }

    pub fn bound_channel(&self) -> Option<ChannelId> {
        self.bound
    }

    pub fn pending(&self) -> Option<Value> {
        self.pending
    }

    pub fn state(&self) -> PeripheralState {
        self.device.state()
    }

    /// Applies an interrupt to the device. A produced payload goes to the
    /// pending slot; if the slot is occupied the new payload is returned as
    /// dropped.
    pub fn interrupt(&mut self, event: &DriverEvent) -> Result<(), Value> {
        match self.device.interrupt(event) {
            Some(v) => self.latch(v),
            None => Ok(()),
        }
    }

    /// Runs the device side of an interrupt without latching, for payloads
    /// handed directly to a waiting receiver.
    pub(crate) fn interrupt_direct(&mut self, event: &DriverEvent) -> Option<Value> {
        self.device.interrupt(event)
    }

    pub(crate) fn latch(&mut self, v: Value) -> Result<(), Value> {
        if self.pending.is_some() {
            return Err(v);
        }
        self.pending = Some(v);
        Ok(())
    }
}

/// Driver table plus the message queue.
#[derive(Debug)]
pub struct Bridge {
    drivers: Vec<DriverHandle>,
    capacity: usize,
    queue: BridgeQueue,
}

impl Bridge {
    pub fn new(capacity: usize, queue_capacity: usize) -> Self {
        Bridge { drivers: Vec::new(), capacity, queue: BridgeQueue::new(queue_capacity) }
    }

    /// Registers a driver under the next id, counting from 0.
    pub fn register(&mut self, name: &str, device: Box<dyn Peripheral>) -> Result<DriverId, BridgeError> {
        if self.drivers.len() >= self.capacity {
            return Err(BridgeError::TooManyDrivers(self.capacity));
        }
        let id = DriverId(self.drivers.len() as u32);
        self.drivers.push(DriverHandle::new(id, name, device));
        Ok(id)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.drivers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drivers.is_empty()
    }

    pub fn driver(&self, id: DriverId) -> Result<&DriverHandle, BridgeError> {
        self.drivers.get(id.0 as usize).ok_or(BridgeError::UnknownDriver(id.0))
    }

    pub fn driver_mut(&mut self, id: DriverId) -> Result<&mut DriverHandle, BridgeError> {
        self.drivers.get_mut(id.0 as usize).ok_or(BridgeError::UnknownDriver(id.0))
    }

    pub fn drivers(&self) -> &[DriverHandle] {
        &self.drivers
    }

    pub fn queue(&self) -> &BridgeQueue {
        &self.queue
    }

    /// Binds `driver` to `chan`. The caller checks that `chan` exists.
    pub(crate) fn bind(&mut self, chan: ChannelId, driver: DriverId) -> Result<ThreadId, BridgeError> {
        if self.drivers.iter().any(|d| d.bound == Some(chan)) {
            return Err(BridgeError::AlreadyBound(chan.0));
        }
        let handle = self.driver_mut(driver)?;
        if handle.bound.is_some() {
            return Err(BridgeError::DriverAlreadyBound(driver.0));
        }
        handle.bound = Some(chan);
        Ok(ThreadId::external(driver))
    }

    pub(crate) fn pending_values(&self) -> impl Iterator<Item = Value> + '_ {
        self.drivers.iter().filter_map(|d| d.pending)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("bridge queue full, message from driver {} dropped", .0.driver.0)]
pub struct QueueFull(pub DriverMessage);

#[derive(Debug)]
struct QueueShared {
    messages: Mutex<VecDeque<DriverMessage>>,
    available: Condvar,
    capacity: usize,
    dropped: AtomicU64,
}

/// Bounded multi-producer, single-consumer FIFO of driver messages.
///
/// Posting never blocks: a full queue rejects the message and counts it.
/// The scheduler is the only consumer and blocks only while asleep.
#[derive(Debug)]
pub struct BridgeQueue {
    shared: Arc<QueueShared>,
}

/// Producer handle for interrupt-side code. Cheap to clone, `Send + Sync`.
#[derive(Debug, Clone)]
pub struct BridgePoster {
    shared: Arc<QueueShared>,
}

impl BridgeQueue {
    pub fn new(capacity: usize) -> Self {
        BridgeQueue {
            shared: Arc::new(QueueShared {
                messages: Mutex::new(VecDeque::with_capacity(capacity)),
                available: Condvar::new(),
                capacity,
                dropped: AtomicU64::new(0),
            }),
        }
    }

    pub fn poster(&self) -> BridgePoster {
        BridgePoster { shared: Arc::clone(&self.shared) }
    }

    pub fn try_take(&self) -> Option<DriverMessage> {
        self.shared.messages.lock().unwrap().pop_front()
    }

    /// Blocks until a message arrives or `timeout` elapses.
    pub fn take_timeout(&self, timeout: Duration) -> Option<DriverMessage> {
        let guard = self.shared.messages.lock().unwrap();
        let (mut guard, _) = self.shared.available.wait_timeout_while(guard, timeout, |q| q.is_empty()).unwrap();
        guard.pop_front()
    }

    pub fn len(&self) -> usize {
        self.shared.messages.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }
}

impl BridgePoster {
    pub fn post(&self, msg: DriverMessage) -> Result<(), QueueFull> {
        let mut q = self.shared.messages.lock().unwrap();
        if q.len() >= self.shared.capacity {
            self.shared.dropped.fetch_add(1, Ordering::Relaxed);
            return Err(QueueFull(msg));
        }
        q.push_back(msg);
        drop(q);
        self.shared.available.notify_one();
        Ok(())
    }
}
