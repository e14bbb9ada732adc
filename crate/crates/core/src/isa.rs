//! Instruction set.
//!
//! The core group is the usual Categorical Abstract Machine repertoire
//! (term register `env`, a value stack, closures as `(code, env)` pairs).
//! The concurrency group maps one-to-one onto the event API: channel
//! creation, base events, `choose`, `wrap`, `sync`, `spawn` and driver
//! binding. Every operand is a single `u16`.

use std::fmt;

/// What an instruction's operand refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandKind {
    None,
    /// Access depth for `ACC`/`REST`.
    Depth,
    /// Constant-pool index.
    Pool,
    /// Absolute instruction index.
    Label,
    /// Driver number.
    Driver,
}

macro_rules! opcodes {
    ($($name:ident = $byte:literal, $mnemonic:literal, $kind:ident;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        #[repr(u8)]
        pub enum Opcode {
            $($name = $byte,)*
        }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$name,)*];

            pub fn from_byte(b: u8) -> Option<Opcode> {
                match b {
                    $($byte => Some(Opcode::$name),)*
                    _ => None,
                }
            }

            pub fn mnemonic(self) -> &'static str {
                match self {
                    $(Opcode::$name => $mnemonic,)*
                }
            }

            pub fn operand_kind(self) -> OperandKind {
                match self {
                    $(Opcode::$name => OperandKind::$kind,)*
                }
            }

            pub fn from_mnemonic(s: &str) -> Option<Opcode> {
                $(if s.eq_ignore_ascii_case($mnemonic) { return Some(Opcode::$name); })*
                None
            }
        }
    };
}

opcodes! {
    Fst = 0x01, "FST", None;
    Snd = 0x02, "SND", None;
    Acc = 0x03, "ACC", Depth;
    Rest = 0x04, "REST", Depth;
    Push = 0x05, "PUSH", None;
    Swap = 0x06, "SWAP", None;
    LoadI = 0x07, "LOADI", Pool;
    Clear = 0x08, "CLEAR", None;
    Cur = 0x09, "CUR", Label;
    Comb = 0x0a, "COMB", Label;
    App = 0x0b, "APP", None;
    Return = 0x0c, "RETURN", None;
    Call = 0x0d, "CALL", Label;
    Goto = 0x0e, "GOTO", Label;
    GotoFalse = 0x0f, "GOTOFALSE", Label;
    Cons = 0x10, "CONS", None;
    Stop = 0x11, "STOP", None;
    Pop = 0x12, "POP", None;
    Add = 0x20, "ADD", None;
    Sub = 0x21, "SUB", None;
    Mul = 0x22, "MUL", None;
    Eq = 0x23, "EQ", None;
    Lt = 0x24, "LT", None;
    Channel = 0x40, "CHANNEL", None;
    SendEvt = 0x41, "SENDEVT", None;
    RecvEvt = 0x42, "RECVEVT", None;
    Choose = 0x43, "CHOOSE", None;
    Wrap = 0x44, "WRAP", None;
    Sync = 0x45, "SYNC", None;
    Spawn = 0x46, "SPAWN", Label;
    SpawnX = 0x47, "SPAWNX", Driver;
}

impl Opcode {
    pub fn has_operand(self) -> bool {
        self.operand_kind() != OperandKind::None
    }

    /// Instructions after which control never falls through to `pc + 1`.
    pub fn is_terminal(self) -> bool {
        matches!(self, Opcode::Stop | Opcode::Goto | Opcode::Return)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub op: Opcode,
    /// Zero when the opcode takes no operand.
    pub operand: u16,
}

impl Instruction {
    pub const fn new(op: Opcode, operand: u16) -> Self {
        Instruction { op, operand }
    }

    pub const fn bare(op: Opcode) -> Self {
        Instruction { op, operand: 0 }
    }

    /// Branch or closure target, for opcodes whose operand is a label.
    pub fn target(&self) -> Option<u32> {
        (self.op.operand_kind() == OperandKind::Label).then_some(self.operand as u32)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.op.has_operand() {
            write!(f, "{} {}", self.op.mnemonic(), self.operand)
        } else {
            f.write_str(self.op.mnemonic())
        }
    }
}
