//! Simulated peripherals, the virtual clock and the scenario engine.

mod clock;
mod peripheral;
mod scenario;

pub use clock::VirtualClock;
pub use peripheral::{make_peripheral, Button, DriverKind, Led, PeripheralState, Uart, DEFAULT_UART_BUFFER};
pub use scenario::{load_scenario, Action, DriverDecl, Scenario, ScenarioEngine, ScenarioError, ScenarioEvent};
