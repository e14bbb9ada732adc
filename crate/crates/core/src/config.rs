//! Static memory configuration.

use std::fmt;

use thiserror::Error;

use crate::heap::CELL_BYTES;

/// Bytes of channel metadata reserved per channel slot.
pub const CHANNEL_METADATA_BYTES: usize = 96;
/// Accounting size of one stack slot.
pub const STACK_SLOT_BYTES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub heap_bytes: usize,
    pub stack_bytes_per_context: usize,
    pub contexts: usize,
    pub channels: usize,
    pub drivers: usize,
    pub bridge_queue_capacity: usize,
    /// Blocked entries allowed per channel direction.
    pub channel_queue_bound: usize,
    pub max_steps: Option<u64>,
    /// Virtual milliseconds charged per executed instruction.
    pub instruction_cost_ms: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            heap_bytes: 1024,
            stack_bytes_per_context: 1024,
            contexts: 4,
            channels: 100,
            drivers: 16,
            bridge_queue_capacity: 16,
            channel_queue_bound: 16,
            max_steps: None,
            instruction_cost_ms: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("config field `{0}` must be positive")]
pub struct ConfigError(pub &'static str);

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("heap_bytes", self.heap_bytes),
            ("stack_bytes_per_context", self.stack_bytes_per_context),
            ("contexts", self.contexts),
            ("channels", self.channels),
            ("drivers", self.drivers),
            ("bridge_queue_capacity", self.bridge_queue_capacity),
            ("channel_queue_bound", self.channel_queue_bound),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ConfigError(name));
            }
        }
        if self.heap_bytes < CELL_BYTES {
            return Err(ConfigError("heap_bytes"));
        }
        if self.stack_bytes_per_context < STACK_SLOT_BYTES {
            return Err(ConfigError("stack_bytes_per_context"));
        }
        Ok(())
    }

    pub fn heap_cells(&self) -> usize {
        self.heap_bytes / CELL_BYTES
    }

    pub fn stack_slots(&self) -> usize {
        self.stack_bytes_per_context / STACK_SLOT_BYTES
    }

    pub fn channel_arena_bytes(&self) -> usize {
        self.channels * CHANNEL_METADATA_BYTES
    }

    /// Config echo with arena usage for `channels_in_use` channels.
    pub fn report(&self, channels_in_use: usize) -> ConfigReport<'_> {
        ConfigReport { config: self, channels_in_use }
    }
}

pub struct ConfigReport<'a> {
    config: &'a RunConfig,
    channels_in_use: usize,
}

impl fmt::Display for ConfigReport<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.config;
        let used = self.channels_in_use * CHANNEL_METADATA_BYTES;
        writeln!(f, "heap: {} B ({} cells x {} B)", c.heap_bytes, c.heap_cells(), CELL_BYTES)?;
        writeln!(
            f,
            "stacks: {} B x {} contexts ({} slots each)",
            c.stack_bytes_per_context,
            c.contexts,
            c.stack_slots()
        )?;
        writeln!(
            f,
            "channels: {} x {} B = {} B arena, {} in use = {} B, {} B unused",
            c.channels,
            CHANNEL_METADATA_BYTES,
            c.channel_arena_bytes(),
            self.channels_in_use,
            used,
            c.channel_arena_bytes().saturating_sub(used)
        )?;
        writeln!(f, "drivers: {} slots", c.drivers)?;
        write!(f, "bridge queue: {} messages", c.bridge_queue_capacity)
    }
}
