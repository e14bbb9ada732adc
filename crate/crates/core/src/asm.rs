//! Textual assembly for the bytecode image.
//!
//! ```text
//! ; comments run from `;` or `#` to end of line
//! .const one 1          ; pool entries, numbered in declaration order
//! .const yes true       ; literals: integers, true, false, unit
//! .entry main           ; defaults to `main` if defined, else instruction 0
//! main:
//!     LOADI one
//!     SPAWNX but0       ; named drivers: led0=0 led1=1 but0=2 but1=3
//!     GOTO main
//! ```
//!
//! Operands may also be written as plain numbers. Mnemonics are
//! case-insensitive; labels and constant names are not.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::image::{load_program, Literal, LoadError, Program};
use crate::isa::{Instruction, Opcode, OperandKind};

/// Driver numbering of the reference board.
pub const DRIVER_NAMES: &[(&str, u16)] = &[("led0", 0), ("led1", 1), ("but0", 2), ("but1", 3)];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: label `{name}` defined twice")]
    DuplicateLabel { line: usize, name: String },
    #[error("line {line}: undefined label `{name}`")]
    UndefinedLabel { line: usize, name: String },
    #[error("line {line}: {msg}")]
    BadOperand { line: usize, msg: String },
    #[error("line {line}: unknown mnemonic `{name}`")]
    UnknownMnemonic { line: usize, name: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("assembled program is invalid: {0}")]
    Invalid(#[from] LoadError),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_literal(s: &str) -> Option<Literal> {
    match s {
        "unit" => Some(Literal::Unit),
        "true" => Some(Literal::Bool(true)),
        "false" => Some(Literal::Bool(false)),
        _ => s.parse().ok().map(Literal::Int),
    }
}

enum Operand<'a> {
    None,
    Resolved(u16),
    Label(&'a str),
}

pub fn assemble_program(src: &str) -> Result<Program, AsmError> {
    let mut pool = Vec::new();
    let mut consts: HashMap<&str, u16> = HashMap::new();
    let mut labels: HashMap<&str, u32> = HashMap::new();
    let mut entry: Option<(usize, &str)> = None;
    let mut pending: Vec<(usize, Opcode, Operand)> = Vec::new();

    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let mut rest = raw.split([';', '#']).next().unwrap_or("").trim();
        while let Some((head, tail)) = rest.split_once(':') {
            let name = head.trim();
            if !is_ident(name) {
                break;
            }
            if labels.insert(name, pending.len() as u32).is_some() {
                return Err(AsmError::DuplicateLabel { line, name: name.to_string() });
            }
            rest = tail.trim();
        }
        let words: Vec<&str> = rest.split_whitespace().collect();
        let Some(&head) = words.first() else { continue };
        let syntax = |msg: String| AsmError::Syntax { line, msg };

        match head {
            ".const" => {
                let [_, name, lit] = words[..] else {
                    return Err(syntax("expected `.const <name> <literal>`".into()));
                };
                if !is_ident(name) {
                    return Err(syntax(format!("bad constant name `{name}`")));
                }
                let lit = parse_literal(lit).ok_or_else(|| syntax(format!("bad literal `{lit}`")))?;
                if pool.len() >= u16::MAX as usize {
                    return Err(syntax("constant pool full".into()));
                }
                if consts.insert(name, pool.len() as u16).is_some() {
                    return Err(syntax(format!("constant `{name}` defined twice")));
                }
                pool.push(lit);
            }
            ".entry" => {
                let [_, name] = words[..] else { return Err(syntax("expected `.entry <label>`".into())) };
                if entry.replace((line, name)).is_some() {
                    return Err(syntax("`.entry` given twice".into()));
                }
            }
            _ => {
                let op = Opcode::from_mnemonic(head)
                    .ok_or_else(|| AsmError::UnknownMnemonic { line, name: head.to_string() })?;
                let bad = |msg: String| AsmError::BadOperand { line, msg };
                let operand = match (op.operand_kind(), &words[1..]) {
                    (OperandKind::None, []) => Operand::None,
                    (OperandKind::None, _) => return Err(bad(format!("{} takes no operand", op.mnemonic()))),
                    (_, [arg]) => {
                        let arg = *arg;
                        match (op.operand_kind(), arg.parse::<u16>()) {
                            (_, Ok(n)) => Operand::Resolved(n),
                            (OperandKind::Label, _) if is_ident(arg) => Operand::Label(arg),
                            (OperandKind::Pool, _) => Operand::Resolved(
                                *consts.get(arg).ok_or_else(|| bad(format!("undefined constant `{arg}`")))?,
                            ),
                            (OperandKind::Driver, _) => Operand::Resolved(
                                DRIVER_NAMES
                                    .iter()
                                    .find(|(n, _)| *n == arg)
                                    .map(|&(_, id)| id)
                                    .ok_or_else(|| bad(format!("unknown driver `{arg}`")))?,
                            ),
                            _ => return Err(bad(format!("bad operand `{arg}` for {}", op.mnemonic()))),
                        }
                    }
                    _ => return Err(bad(format!("{} takes exactly one operand", op.mnemonic()))),
                };
                pending.push((line, op, operand));
            }
        }
    }

    let resolve = |line: usize, name: &str| {
        labels
            .get(name)
            .copied()
            .filter(|&l| (l as usize) < pending.len())
            .ok_or_else(|| AsmError::UndefinedLabel { line, name: name.to_string() })
    };
    let mut code = Vec::with_capacity(pending.len());
    for (line, op, operand) in &pending {
        let operand = match *operand {
            Operand::None => 0,
            Operand::Resolved(n) => n,
            Operand::Label(name) => {
                let target = resolve(*line, name)?;
                u16::try_from(target).map_err(|_| AsmError::BadOperand {
                    line: *line,
                    msg: format!("label `{name}` at {target} is out of operand range"),
                })?
            }
        };
        code.push(Instruction::new(*op, operand));
    }
    let entry_point = match entry {
        Some((line, name)) => match name.parse::<u32>() {
            Ok(n) => n,
            Err(_) => resolve(line, name)?,
        },
        None => labels.get("main").copied().unwrap_or(0),
    };
    Ok(Program::new(pool, code, entry_point)?)
}

/// Assembles source text into an image.
pub fn assemble(src: &str) -> Result<Vec<u8>, AsmError> {
    assemble_program(src).map(|p| p.to_bytes())
}

/// Renders an image as assembly that reassembles to the same bytes.
pub fn disassemble(image: &[u8]) -> Result<String, LoadError> {
    load_program(image).map(|p| disassemble_program(&p))
}

pub fn disassemble_program(p: &Program) -> String {
    let mut targets = vec![false; p.code.len()];
    targets[p.entry_point as usize] = true;
    for ins in &p.code {
        if let Some(t) = ins.target() {
            targets[t as usize] = true;
        }
    }
    let mut out = String::new();
    for (i, lit) in p.constant_pool.iter().enumerate() {
        let lit = match lit {
            Literal::Unit => "unit".to_string(),
            Literal::Int(n) => n.to_string(),
            Literal::Bool(b) => b.to_string(),
        };
        let _ = writeln!(out, ".const c{i} {lit}");
    }
    let _ = writeln!(out, ".entry L{}", p.entry_point);
    for (i, ins) in p.code.iter().enumerate() {
        if targets[i] {
            let _ = writeln!(out, "L{i}:");
        }
        let m = ins.op.mnemonic();
        let _ = match ins.op.operand_kind() {
            OperandKind::None => writeln!(out, "    {m}"),
            OperandKind::Label => writeln!(out, "    {m} L{}", ins.operand),
            OperandKind::Pool => writeln!(out, "    {m} c{}", ins.operand),
            OperandKind::Depth | OperandKind::Driver => writeln!(out, "    {m} {}", ins.operand),
        };
    }
    out
}
