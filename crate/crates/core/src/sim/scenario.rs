//! Scenario files: a driver table followed by timestamped peripheral events.
//!
//! ```text
//! # comment
//! driver led0 led
//! driver but0 button
//! driver uart0 uart buffer=8
//! 100 but0 press
//! 400 but0 release
//! 500 uart0 drain 3
//! 510 uart0 rx 65
//! ```
//!
//! Drivers are numbered from 0 in declaration order.

use thiserror::Error;

use super::peripheral::{DriverKind, DEFAULT_UART_BUFFER};
use super::VirtualClock;
use crate::bridge::{BridgePoster, DriverEvent, DriverMessage, QueueFull};
use crate::value::{DriverId, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown driver kind `{kind}`")]
    UnknownDriverKind { line: usize, kind: String },
    #[error("line {line}: time {time} is earlier than the previous event at {prev}")]
    NonMonotoneTime { line: usize, time: u64, prev: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriverDecl {
    pub name: String,
    pub kind: DriverKind,
    pub uart_buffer: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Press,
    Release,
    Drain(u32),
    Rx(u8),
}

impl Action {
    pub fn driver_event(self) -> DriverEvent {
        match self {
            Action::Press => DriverEvent::Input(Value::Int(1)),
            Action::Release => DriverEvent::Input(Value::Int(0)),
            Action::Drain(n) => DriverEvent::Drain(n),
            Action::Rx(b) => DriverEvent::Input(Value::Int(b as i32)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioEvent {
    pub time_ms: u64,
    pub driver: DriverId,
    pub action: Action,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub drivers: Vec<DriverDecl>,
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn driver_id(&self, name: &str) -> Option<DriverId> {
        self.drivers.iter().position(|d| d.name == name).map(|i| DriverId(i as u32))
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, msg: msg.into() }
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut scenario = Scenario::default();
    let mut prev_time = 0u64;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some(&first) = words.first() else { continue };

        if first == "driver" {
            if !scenario.events.is_empty() {
                return Err(parse_err(line, "driver declarations must precede events"));
            }
            let (name, kind) = match words.as_slice() {
                [_, name, kind, ..] => (*name, *kind),
                _ => return Err(parse_err(line, "expected `driver <name> <kind> [param=value ...]`")),
            };
            let kind = DriverKind::parse(kind)
                .ok_or_else(|| ScenarioError::UnknownDriverKind { line, kind: kind.to_string() })?;
            if scenario.driver_id(name).is_some() {
                return Err(parse_err(line, format!("driver `{name}` declared twice")));
            }
            let mut uart_buffer = DEFAULT_UART_BUFFER;
            for param in &words[3..] {
                match (kind, param.split_once('=')) {
                    (DriverKind::Uart, Some(("buffer", v))) => {
                        uart_buffer = v
                            .parse()
                            .ok()
                            .filter(|&n: &usize| n > 0)
                            .ok_or_else(|| parse_err(line, format!("bad buffer size `{v}`")))?;
                    }
                    _ => return Err(parse_err(line, format!("unknown parameter `{param}` for {kind}"))),
                }
            }
            scenario.drivers.push(DriverDecl { name: name.to_string(), kind, uart_buffer });
            continue;
        }

        let time_ms: u64 = first.parse().map_err(|_| parse_err(line, format!("expected a time, got `{first}`")))?;
        if time_ms < prev_time {
            return Err(ScenarioError::NonMonotoneTime { line, time: time_ms, prev: prev_time });
        }
        let (name, action, arg) = match words.as_slice() {
            [_, name, action] => (*name, *action, None),
            [_, name, action, arg] => (*name, *action, Some(*arg)),
            _ => return Err(parse_err(line, "expected `<time_ms> <driver> <action> [<int>]`")),
        };
        let driver = scenario.driver_id(name).ok_or_else(|| parse_err(line, format!("undeclared driver `{name}`")))?;
        let kind = scenario.drivers[driver.0 as usize].kind;
        let action = match (kind, action, arg) {
            (DriverKind::Button, "press", None) => Action::Press,
            (DriverKind::Button, "release", None) => Action::Release,
            (DriverKind::Uart, "drain", Some(n)) => {
                Action::Drain(n.parse().map_err(|_| parse_err(line, format!("bad drain count `{n}`")))?)
            }
            (DriverKind::Uart, "rx", Some(b)) => {
                Action::Rx(b.parse().map_err(|_| parse_err(line, format!("bad byte `{b}`")))?)
            }
            _ => return Err(parse_err(line, format!("`{}` is not a valid {kind} action", words[2..].join(" ")))),
        };
        prev_time = time_ms;
        scenario.events.push(ScenarioEvent { time_ms, driver, action, line });
    }
    Ok(scenario)
}

/// Feeds scenario events into the bridge queue as virtual time passes.
#[derive(Debug, Clone)]
pub struct ScenarioEngine {
    events: Vec<ScenarioEvent>,
    next: usize,
}

impl ScenarioEngine {
    pub fn new(scenario: &Scenario) -> Self {
        ScenarioEngine { events: scenario.events.clone(), next: 0 }
    }

    pub fn next_time(&self) -> Option<u64> {
        self.events.get(self.next).map(|e| e.time_ms)
    }

    pub fn is_exhausted(&self) -> bool {
        self.next >= self.events.len()
    }

    /// Posts every event due at the current time, in file order. When the VM
    /// is asleep the clock first jumps to the next event time.
    pub fn advance(
        &mut self,
        clock: &mut VirtualClock,
        asleep: bool,
        poster: &BridgePoster,
    ) -> Vec<Result<DriverMessage, QueueFull>> {
        if asleep {
            if let Some(t) = self.next_time() {
                clock.advance_to(t);
            }
        }
        let mut posted = Vec::new();
        while let Some(ev) = self.events.get(self.next) {
            if ev.time_ms > clock.now_ms() {
                break;
            }
            self.next += 1;
            let msg = DriverMessage { driver: ev.driver, event: ev.action.driver_event(), timestamp_ms: ev.time_ms };
            posted.push(poster.post(msg).map(|()| msg));
        }
        posted
    }
}
