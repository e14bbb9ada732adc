use std::collections::VecDeque;
use std::fmt;

use crate::bridge::{DriverEvent, Peripheral};
use crate::value::Value;

pub const DEFAULT_UART_BUFFER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverKind {
    Led,
    Button,
    Uart,
}

impl DriverKind {
    pub fn parse(s: &str) -> Option<DriverKind> {
        match s {
            "led" => Some(DriverKind::Led),
            "button" => Some(DriverKind::Button),
            "uart" => Some(DriverKind::Uart),
            _ => None,
        }
    }
}

impl fmt::Display for DriverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriverKind::Led => "led",
            DriverKind::Button => "button",
            DriverKind::Uart => "uart",
        })
    }
}

/// Observable state of a peripheral model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeripheralState {
    Led { level: u8 },
    Button { last_level: u8 },
    Uart { buffered: usize, capacity: usize, written: u64, drained: u64, received: u64 },
}

#[derive(Debug, Default)]
pub struct Led {
    level: u8,
}

impl Peripheral for Led {
    fn is_synchronous(&self) -> bool {
        true
    }

    fn sample(&self) -> Option<Value> {
        Some(Value::Int(self.level as i32))
    }

    fn writeable(&self) -> u32 {
        1
    }

    fn write(&mut self, data: Value) -> Result<(), String> {
        self.level = match data {
            Value::Int(0) | Value::Bool(false) => 0,
            Value::Int(1) | Value::Bool(true) => 1,
            other => return Err(other.to_string()),
        };
        Ok(())
    }

    fn interrupt(&mut self, _event: &DriverEvent) -> Option<Value> {
        None
    }

    fn state(&self) -> PeripheralState {
        PeripheralState::Led { level: self.level }
    }
}

/// Push button. Each press or release arrives as an interrupt carrying the
/// new level.
#[derive(Debug, Default)]
pub struct Button {
    last_level: u8,
}

impl Peripheral for Button {
    fn is_synchronous(&self) -> bool {
        false
    }

    fn sample(&self) -> Option<Value> {
        None
    }

    fn writeable(&self) -> u32 {
        0
    }

    fn write(&mut self, data: Value) -> Result<(), String> {
        Err(data.to_string())
    }

    fn interrupt(&mut self, event: &DriverEvent) -> Option<Value> {
        match *event {
            DriverEvent::Input(v) => {
                if let Value::Int(level) = v {
                    self.last_level = (level != 0) as u8;
                }
                Some(v)
            }
            DriverEvent::Drain(_) => None,
        }
    }

    fn state(&self) -> PeripheralState {
        PeripheralState::Button { last_level: self.last_level }
    }
}

/// Serial port with a bounded transmit buffer. Bytes leave the buffer only
/// when the scenario drains it; received bytes arrive as interrupts.
#[derive(Debug)]
pub struct Uart {
    tx: VecDeque<u8>,
    capacity: usize,
    written: u64,
    drained: u64,
    received: u64,
}

impl Uart {
    pub fn new(capacity: usize) -> Self {
        Uart { tx: VecDeque::with_capacity(capacity), capacity, written: 0, drained: 0, received: 0 }
    }
}

impl Default for Uart {
    fn default() -> Self {
        Uart::new(DEFAULT_UART_BUFFER)
    }
}

impl Peripheral for Uart {
    fn is_synchronous(&self) -> bool {
        false
    }

    fn sample(&self) -> Option<Value> {
        None
    }

    fn writeable(&self) -> u32 {
        (self.capacity - self.tx.len()) as u32
    }

    fn write(&mut self, data: Value) -> Result<(), String> {
        match data {
            Value::Int(b) if (0..=255).contains(&b) && self.tx.len() < self.capacity => {
                self.tx.push_back(b as u8);
                self.written += 1;
                Ok(())
            }
            other => Err(other.to_string()),
        }
    }

    fn interrupt(&mut self, event: &DriverEvent) -> Option<Value> {
        match *event {
            DriverEvent::Drain(n) => {
                let n = (n as usize).min(self.tx.len());
                self.tx.drain(..n);
                self.drained += n as u64;
                None
            }
            DriverEvent::Input(v) => {
                self.received += 1;
                Some(v)
            }
        }
    }

    fn state(&self) -> PeripheralState {
        PeripheralState::Uart {
            buffered: self.tx.len(),
            capacity: self.capacity,
            written: self.written,
            drained: self.drained,
            received: self.received,
        }
    }
}

pub fn make_peripheral(kind: DriverKind, uart_buffer: usize) -> Box<dyn Peripheral> {
    match kind {
        DriverKind::Led => Box::new(Led::default()),
        DriverKind::Button => Box::new(Button::default()),
        DriverKind::Uart => Box::new(Uart::new(uart_buffer)),
    }
}
