//! Bytecode image format and program loading.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "SVMB" | version u8 = 1 | pool_count u16 | pool entries
//! | code_count u32 | instructions | entry_point u32
//! ```
//!
//! Pool entries are a tag byte (0 unit, 1 int + i32, 2 bool + u8).
//! Instructions are an opcode byte followed by one `u16` for opcodes that
//! take an operand.

use thiserror::Error;

use crate::isa::{Instruction, Opcode, OperandKind};
use crate::value::Value;

pub const MAGIC: &[u8; 4] = b"SVMB";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Literal {
    Unit,
    Int(i32),
    Bool(bool),
}

impl Literal {
    pub fn to_value(self) -> Value {
        match self {
            Literal::Unit => Value::Unit,
            Literal::Int(i) => Value::Int(i),
            Literal::Bool(b) => Value::Bool(b),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoadError {
    #[error("bad magic: expected \"SVMB\"")]
    BadMagic,
    #[error("unsupported image version {0}")]
    UnsupportedVersion(u8),
    #[error("image truncated at byte {0}")]
    TruncatedImage(usize),
    #[error("{count} trailing bytes after entry point")]
    TrailingBytes { count: usize },
    #[error("unknown pool tag {tag} at byte {offset}")]
    BadPoolTag { tag: u8, offset: usize },
    #[error("unknown opcode 0x{byte:02x} at instruction {index}")]
    UnknownOpcode { byte: u8, index: usize },
    #[error("instruction {index} targets {target}, outside code of length {len}")]
    DanglingLabel { index: usize, target: u32, len: usize },
    #[error("instruction {index} references pool entry {pool_index}, pool has {pool_len}")]
    PoolIndexOutOfRange { index: usize, pool_index: u16, pool_len: usize },
    #[error("code section is empty")]
    EmptyCode,
    #[error("code section has {0} instructions, labels address at most 65536")]
    CodeTooLarge(usize),
    #[error("last instruction {0} falls through past the end of code")]
    FallsOffEnd(String),
}

/// A validated program: every label and pool index is in range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub constant_pool: Vec<Literal>,
    pub code: Vec<Instruction>,
    pub entry_point: u32,
}

impl Program {
    /// Checks the structural invariants that `load_program` guarantees.
    pub fn new(constant_pool: Vec<Literal>, code: Vec<Instruction>, entry_point: u32) -> Result<Self, LoadError> {
        let program = Program { constant_pool, code, entry_point };
        program.validate()?;
        Ok(program)
    }

    fn validate(&self) -> Result<(), LoadError> {
        let len = self.code.len();
        let last = self.code.last().ok_or(LoadError::EmptyCode)?;
        if len > u16::MAX as usize + 1 {
            return Err(LoadError::CodeTooLarge(len));
        }
        if self.constant_pool.len() > u16::MAX as usize {
            return Err(LoadError::PoolIndexOutOfRange {
                index: 0,
                pool_index: u16::MAX,
                pool_len: self.constant_pool.len(),
            });
        }
        if self.entry_point as usize >= len {
            return Err(LoadError::DanglingLabel { index: len, target: self.entry_point, len });
        }
        for (index, ins) in self.code.iter().enumerate() {
            match ins.op.operand_kind() {
                OperandKind::Label if ins.operand as usize >= len => {
                    return Err(LoadError::DanglingLabel { index, target: ins.operand as u32, len });
                }
                OperandKind::Pool if ins.operand as usize >= self.constant_pool.len() => {
                    return Err(LoadError::PoolIndexOutOfRange {
                        index,
                        pool_index: ins.operand,
                        pool_len: self.constant_pool.len(),
                    });
                }
                _ => {}
            }
        }
        if !last.op.is_terminal() {
            return Err(LoadError::FallsOffEnd(last.to_string()));
        }
        Ok(())
    }

    /// Serializes to the image format. `load_program(&p.to_bytes())` yields `p`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.code.len() * 3);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.constant_pool.len() as u16).to_le_bytes());
        for lit in &self.constant_pool {
            match *lit {
                Literal::Unit => out.push(0),
                Literal::Int(i) => {
                    out.push(1);
                    out.extend_from_slice(&i.to_le_bytes());
                }
                Literal::Bool(b) => {
                    out.push(2);
                    out.push(b as u8);
                }
            }
        }
        out.extend_from_slice(&(self.code.len() as u32).to_le_bytes());
        for ins in &self.code {
            out.push(ins.op as u8);
            if ins.op.has_operand() {
                out.extend_from_slice(&ins.operand.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.entry_point.to_le_bytes());
        out
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LoadError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(LoadError::TruncatedImage(self.bytes.len())),
        }
    }

    fn u8(&mut self) -> Result<u8, LoadError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, LoadError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, LoadError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Decodes and validates a bytecode image.
pub fn load_program(bytes: &[u8]) -> Result<Program, LoadError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < 4 {
        return Err(if MAGIC.starts_with(bytes) {
            LoadError::TruncatedImage(bytes.len())
        } else {
            LoadError::BadMagic
        });
    }
    if r.take(4)? != MAGIC {
        return Err(LoadError::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(LoadError::UnsupportedVersion(version));
    }

    let pool_count = r.u16()? as usize;
    let mut pool = Vec::with_capacity(pool_count.min(bytes.len()));
    for _ in 0..pool_count {
        let offset = r.pos;
        let lit = match r.u8()? {
            0 => Literal::Unit,
            1 => Literal::Int(r.u32()? as i32),
            2 => Literal::Bool(r.u8()? != 0),
            tag => return Err(LoadError::BadPoolTag { tag, offset }),
        };
        pool.push(lit);
    }

    let code_count = r.u32()? as usize;
    // every instruction is at least one byte
    if code_count > bytes.len() - r.pos {
        return Err(LoadError::TruncatedImage(bytes.len()));
    }
    let mut code = Vec::with_capacity(code_count);
    for index in 0..code_count {
        let byte = r.u8()?;
        let op = Opcode::from_byte(byte).ok_or(LoadError::UnknownOpcode { byte, index })?;
        let operand = if op.has_operand() { r.u16()? } else { 0 };
        code.push(Instruction::new(op, operand));
    }
    let entry_point = r.u32()?;
    if r.pos != bytes.len() {
        return Err(LoadError::TrailingBytes { count: bytes.len() - r.pos });
    }
    Program::new(pool, code, entry_point)
}
