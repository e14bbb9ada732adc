//! Runtime values shared by the interpreter, the heap and the bridge.

use std::fmt;

/// Index of a cell in the fixed heap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef(pub u32);

impl CellRef {
    /// Parent sentinel used while link-reversal marking walks back up.
    pub(crate) const NIL: CellRef = CellRef(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DriverId(pub u32);

/// Thread identifier. Real contexts count up from 0; the pseudo thread
/// returned by `spawn_external` sets the top bit and carries the driver id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadId(pub u32);

impl ThreadId {
    const EXTERNAL: u32 = 1 << 31;

    pub fn external(driver: DriverId) -> Self {
        ThreadId(Self::EXTERNAL | driver.0)
    }

    pub fn is_external(self) -> bool {
        self.0 & Self::EXTERNAL != 0
    }
}

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_external() {
            write!(f, "x{}", self.0 & !Self::EXTERNAL)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Tagged runtime value.
///
/// Heap references carry their role in the tag (`Cell`, `Closure`,
/// `Composed`, `Event`) so the collector never has to guess from addresses.
/// `Unit` doubles as the empty event and as the identity wrap marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Value {
    #[default]
    Unit,
    Int(i32),
    Bool(bool),
    /// Plain pair cell.
    Cell(CellRef),
    /// Closure cell: `(Label(code), env)`.
    Closure(CellRef),
    /// Wrap composition cell: `(outer, inner)`, applied as `outer(inner(x))`.
    Composed(CellRef),
    /// Head pair of a non-empty event list.
    Event(CellRef),
    Label(u32),
    Chan(ChannelId),
    Thread(ThreadId),
}

impl Value {
    /// The heap cell this value points at, if any.
    pub fn cell_ref(self) -> Option<CellRef> {
        match self {
            Value::Cell(r) | Value::Closure(r) | Value::Composed(r) | Value::Event(r) => Some(r),
            _ => None,
        }
    }

    /// Same tag, different referent. Non-reference values are returned as is.
    pub(crate) fn with_ref(self, r: CellRef) -> Value {
        match self {
            Value::Cell(_) => Value::Cell(r),
            Value::Closure(_) => Value::Closure(r),
            Value::Composed(_) => Value::Composed(r),
            Value::Event(_) => Value::Event(r),
            other => other,
        }
    }

    pub fn is_applicable(self) -> bool {
        matches!(self, Value::Closure(_) | Value::Composed(_))
    }

    pub fn tag_name(self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Cell(_) => "pair",
            Value::Closure(_) => "closure",
            Value::Composed(_) => "composed",
            Value::Event(_) => "event",
            Value::Label(_) => "label",
            Value::Chan(_) => "channel",
            Value::Thread(_) => "thread",
        }
    }
}

/// Trace rendering. Heap references print only their tag so traces do not
/// depend on where the allocator happened to place a cell.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Value::Unit => f.write_str("unit"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Label(l) => write!(f, "@{l}"),
            Value::Chan(c) => write!(f, "ch{}", c.0),
            Value::Thread(t) => write!(f, "t{t}"),
            other => write!(f, "<{}>", other.tag_name()),
        }
    }
}
