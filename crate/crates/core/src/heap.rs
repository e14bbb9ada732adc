//! Fixed-size two-field cell heap.
//!
//! Allocation is driven by a lazy sweep cursor: each `alloc` advances the
//! cursor past marked cells (clearing their mark) until it finds an unmarked
//! one. When the cursor runs off the end, a stop-the-world mark phase runs
//! over the caller's roots and the sweep restarts from cell 0. Marking uses
//! Deutsch-Schorr-Waite link reversal, so it needs no stack: the path back to
//! the root is threaded through the cells' own fields and restored on the way
//! back up.

use thiserror::Error;

use crate::value::{CellRef, Value};

/// Accounting size of one cell: two 32-bit tagged words. The per-cell bits
/// are folded into the tag words on a real target.
pub const CELL_BYTES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HeapCell {
    pub fst: Value,
    pub snd: Value,
    pub mark: bool,
    /// Dirty flag for cells used as sync-attempt flags. The collector never
    /// touches it.
    pub flag: bool,
    /// Which field holds the reversed parent link while marking.
    phase: bool,
    used: bool,
}

impl HeapCell {
    const FREE: HeapCell =
        HeapCell { fst: Value::Unit, snd: Value::Unit, mark: false, flag: false, phase: false, used: false };
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("out of memory: all {capacity} heap cells are live")]
pub struct OutOfMemory {
    pub capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Free(CellRef),
    Exhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeapStats {
    pub allocations: u64,
    pub collections: u64,
    pub cells_reclaimed: u64,
    pub max_live: usize,
    /// Cells marked by the most recent collection.
    pub last_marked: usize,
    /// Traversal steps of each mark phase, in order.
    pub mark_steps: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Heap {
    cells: Vec<HeapCell>,
    cursor: usize,
    live_at_mark: usize,
    allocs_since_mark: usize,
    roots_scratch: Vec<Value>,
    stats: HeapStats,
}

impl Heap {
    pub fn with_capacity(cells: usize) -> Self {
        Heap {
            cells: vec![HeapCell::FREE; cells],
            cursor: 0,
            live_at_mark: 0,
            allocs_since_mark: 0,
            roots_scratch: Vec::new(),
            stats: HeapStats::default(),
        }
    }

    /// Heap sized from a byte budget, `bytes / CELL_BYTES` cells.
    pub fn from_bytes(bytes: usize) -> Self {
        Self::with_capacity(bytes / CELL_BYTES)
    }

    pub fn capacity(&self) -> usize {
        self.cells.len()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn stats(&self) -> &HeapStats {
        &self.stats
    }

    pub fn cell(&self, r: CellRef) -> &HeapCell {
        &self.cells[r.index()]
    }

    pub fn fst(&self, r: CellRef) -> Value {
        self.cells[r.index()].fst
    }

    pub fn snd(&self, r: CellRef) -> Value {
        self.cells[r.index()].snd
    }

    pub fn set_fst(&mut self, r: CellRef, v: Value) {
        self.cells[r.index()].fst = v;
    }

    pub fn set_snd(&mut self, r: CellRef, v: Value) {
        self.cells[r.index()].snd = v;
    }

    pub fn flag(&self, r: CellRef) -> bool {
        self.cells[r.index()].flag
    }

    pub fn set_flag(&mut self, r: CellRef, flag: bool) {
        self.cells[r.index()].flag = flag;
    }

    /// Allocates a cell holding `(fst, snd)`.
    ///
    /// `roots` is only called if a collection is needed; it must push every
    /// live value. `fst` and `snd` are rooted automatically.
    pub fn alloc(
        &mut self,
        fst: Value,
        snd: Value,
        roots: impl FnOnce(&mut Vec<Value>),
    ) -> Result<CellRef, OutOfMemory> {
        let r = match self.sweep_next_free() {
            Sweep::Free(r) => r,
            Sweep::Exhausted => {
                let mut scratch = std::mem::take(&mut self.roots_scratch);
                scratch.clear();
                scratch.push(fst);
                scratch.push(snd);
                roots(&mut scratch);
                self.mark(&scratch);
                self.roots_scratch = scratch;
                match self.sweep_next_free() {
                    Sweep::Free(r) => r,
                    Sweep::Exhausted => return Err(OutOfMemory { capacity: self.capacity() }),
                }
            }
        };
        let cell = &mut self.cells[r.index()];
        if cell.used {
            self.stats.cells_reclaimed += 1;
        }
        *cell = HeapCell { fst, snd, mark: false, flag: false, phase: false, used: true };
        self.stats.allocations += 1;
        self.allocs_since_mark += 1;
        self.stats.max_live = self.stats.max_live.max(self.live_at_mark + self.allocs_since_mark);
        Ok(r)
    }

    /// Advances the sweep cursor to the next unmarked cell, clearing the
    /// mark bits of the live cells it passes.
    pub fn sweep_next_free(&mut self) -> Sweep {
        while self.cursor < self.cells.len() {
            let i = self.cursor;
            self.cursor += 1;
            let cell = &mut self.cells[i];
            if cell.mark {
                cell.mark = false;
            } else {
                return Sweep::Free(CellRef(i as u32));
            }
        }
        Sweep::Exhausted
    }

    /// Marks every cell reachable from `roots` and restarts the sweep.
    /// Returns the number of marked cells.
    pub fn mark(&mut self, roots: &[Value]) -> usize {
        // Marks left ahead of an unfinished sweep are stale.
        for cell in &mut self.cells[self.cursor..] {
            cell.mark = false;
        }
        let mut steps = 0u64;
        let mut marked = 0;
        for root in roots {
            if let Some(r) = root.cell_ref() {
                marked += self.mark_from(r, &mut steps);
            }
        }
        self.cursor = 0;
        self.live_at_mark = marked;
        self.allocs_since_mark = 0;
        self.stats.collections += 1;
        self.stats.last_marked = marked;
        self.stats.mark_steps.push(steps);
        self.stats.max_live = self.stats.max_live.max(marked);
        marked
    }

    fn unmarked_child(&self, v: Value) -> Option<CellRef> {
        v.cell_ref().filter(|r| r.index() < self.cells.len() && !self.cells[r.index()].mark)
    }

    fn mark_from(&mut self, root: CellRef, steps: &mut u64) -> usize {
        if root.index() >= self.cells.len() || self.cells[root.index()].mark {
            return 0;
        }
        self.cells[root.index()].mark = true;
        let mut marked = 1;
        let mut prev = CellRef::NIL;
        let mut cur = root;
        'descend: loop {
            *steps += 1;
            if let Some(child) = self.unmarked_child(self.cells[cur.index()].fst) {
                self.cells[child.index()].mark = true;
                marked += 1;
                let c = &mut self.cells[cur.index()];
                c.phase = false;
                c.fst = c.fst.with_ref(prev);
                prev = cur;
                cur = child;
                continue 'descend;
            }
            'second: loop {
                if let Some(child) = self.unmarked_child(self.cells[cur.index()].snd) {
                    self.cells[child.index()].mark = true;
                    marked += 1;
                    let c = &mut self.cells[cur.index()];
                    c.phase = true;
                    c.snd = c.snd.with_ref(prev);
                    prev = cur;
                    cur = child;
                    continue 'descend;
                }
                // both fields done: retreat along the reversed links
                loop {
                    if prev == CellRef::NIL {
                        return marked;
                    }
                    *steps += 1;
                    let parent = prev;
                    let p = &mut self.cells[parent.index()];
                    if !p.phase {
                        prev = p.fst.cell_ref().expect("reversed fst link");
                        p.fst = p.fst.with_ref(cur);
                        cur = parent;
                        continue 'second;
                    }
                    prev = p.snd.cell_ref().expect("reversed snd link");
                    p.snd = p.snd.with_ref(cur);
                    cur = parent;
                }
            }
        }
    }
}
