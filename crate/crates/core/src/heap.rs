//! Simulated private memory.
//!
//! Addresses are public integers in a flat space with bump allocation; 0 is
//! the null sentinel and no address is ever reused. Every program object
//! (heap allocations, but also variables and static arrays) lives in a
//! registered block so that private indexing can discover bounds.
//!
//! Writes made while a private branch executes go to an overlay instead of
//! the blocks; the interpreter later merges overlays obliviously.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::privptr::PrivPtr;
use crate::shamir::Shared;

pub type Address = u64;
pub type TypeId = u32;

pub const NULL: Address = 0;
const FIRST_ADDRESS: Address = 16;

/// Content of one addressable cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cell {
    Priv(Shared),
    Pub(i128),
    Ptr(PrivPtr),
    /// A function id; functions occupy one cell each so they have addresses.
    Fn(u32),
}

impl Cell {
    pub fn as_priv(&self) -> Option<&Shared> {
        match self {
            Cell::Priv(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_ptr(&self) -> Option<&PrivPtr> {
        match self {
            Cell::Ptr(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub base: Address,
    /// Element count.
    pub count: usize,
    /// Cells per element.
    pub elem_size: usize,
    pub ty: TypeId,
    /// Allocated through `pmalloc` (as opposed to a variable).
    pub dynamic: bool,
    pub cells: Vec<Cell>,
}

impl Block {
    pub fn len_cells(&self) -> usize {
        self.count * self.elem_size
    }

    pub fn end(&self) -> Address {
        self.base + self.len_cells() as Address
    }

    pub fn contains(&self, addr: Address) -> bool {
        addr >= self.base && addr < self.end()
    }
}

/// Why an address could not be accessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemFault {
    Null,
    Released(Address),
    Unallocated(Address),
}

impl fmt::Display for MemFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemFault::Null => write!(f, "null address"),
            MemFault::Released(a) => write!(f, "address {a} was released"),
            MemFault::Unallocated(a) => write!(f, "address {a} is not allocated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeapError {
    DoubleRelease(Address),
    NotABase(Address),
    ZeroCount,
}

impl fmt::Display for HeapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeapError::DoubleRelease(a) => write!(f, "block at {a} released twice"),
            HeapError::NotABase(a) => write!(f, "address {a} is not the base of a live block"),
            HeapError::ZeroCount => write!(f, "allocation of zero elements"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Heap {
    blocks: BTreeMap<Address, Block>,
    /// Released ranges, base to end.
    released: BTreeMap<Address, Address>,
    next: Address,
    overlays: Vec<BTreeMap<Address, Cell>>,
}

impl Default for Heap {
    fn default() -> Self {
        Heap::new()
    }
}

impl Heap {
    pub fn new() -> Self {
        Heap {
            blocks: BTreeMap::new(),
            released: BTreeMap::new(),
            next: FIRST_ADDRESS,
            overlays: Vec::new(),
        }
    }

    /// Registers a block of `count` elements, each initialized from `elem`.
    pub fn alloc(
        &mut self,
        count: usize,
        elem: &[Cell],
        ty: TypeId,
        dynamic: bool,
    ) -> Result<Address, HeapError> {
        if count == 0 || elem.is_empty() {
            return Err(HeapError::ZeroCount);
        }
        let base = self.next;
        let mut cells = Vec::with_capacity(count * elem.len());
        for _ in 0..count {
            cells.extend_from_slice(elem);
        }
        // One unused address between blocks keeps one-past-the-end
        // addresses out of the neighbouring block.
        self.next += cells.len() as Address + 1;
        self.blocks.insert(
            base,
            Block {
                base,
                count,
                elem_size: elem.len(),
                ty,
                dynamic,
                cells,
            },
        );
        Ok(base)
    }

    pub fn release(&mut self, base: Address) -> Result<(), HeapError> {
        match self.blocks.remove(&base) {
            Some(b) => {
                self.released.insert(base, b.end());
                Ok(())
            }
            None if self.released.contains_key(&base) => Err(HeapError::DoubleRelease(base)),
            None => Err(HeapError::NotABase(base)),
        }
    }

    pub fn block(&self, base: Address) -> Option<&Block> {
        self.blocks.get(&base)
    }

    fn containing(&self, addr: Address) -> Option<&Block> {
        self.blocks
            .range(..=addr)
            .next_back()
            .map(|(_, b)| b)
            .filter(|b| b.contains(addr))
    }

    fn containing_mut(&mut self, addr: Address) -> Option<&mut Block> {
        self.blocks
            .range_mut(..=addr)
            .next_back()
            .map(|(_, b)| b)
            .filter(|b| b.contains(addr))
    }

    /// The live block holding `addr` and the element index of `addr`, if
    /// `addr` sits on an element boundary.
    pub fn find_block(&self, addr: Address) -> Option<(&Block, usize)> {
        let b = self.containing(addr)?;
        let off = (addr - b.base) as usize;
        (off % b.elem_size == 0).then_some((b, off / b.elem_size))
    }

    fn fault(&self, addr: Address) -> MemFault {
        if addr == NULL {
            return MemFault::Null;
        }
        match self.released.range(..=addr).next_back() {
            Some((_, &end)) if addr < end => MemFault::Released(addr),
            _ => MemFault::Unallocated(addr),
        }
    }

    /// True when `addr` belongs to a live block.
    pub fn is_live(&self, addr: Address) -> bool {
        self.containing(addr).is_some()
    }

    pub fn check(&self, addr: Address) -> Result<(), MemFault> {
        if self.is_live(addr) {
            Ok(())
        } else {
            Err(self.fault(addr))
        }
    }

    pub fn read(&self, addr: Address) -> Result<Cell, MemFault> {
        for o in self.overlays.iter().rev() {
            if let Some(c) = o.get(&addr) {
                return Ok(c.clone());
            }
        }
        match self.containing(addr) {
            Some(b) => Ok(b.cells[(addr - b.base) as usize].clone()),
            None => Err(self.fault(addr)),
        }
    }

    /// The committed content of `addr`, ignoring overlays.
    pub fn read_committed(&self, addr: Address) -> Result<&Cell, MemFault> {
        match self.containing(addr) {
            Some(b) => Ok(&b.cells[(addr - b.base) as usize]),
            None => Err(self.fault(addr)),
        }
    }

    pub fn write(&mut self, addr: Address, cell: Cell) -> Result<(), MemFault> {
        if let Some(top) = self.overlays.last_mut() {
            if self
                .blocks
                .range(..=addr)
                .next_back()
                .is_some_and(|(_, b)| b.contains(addr))
            {
                top.insert(addr, cell);
                return Ok(());
            }
            return Err(self.fault(addr));
        }
        let fault = self.fault(addr);
        match self.containing_mut(addr) {
            Some(b) => {
                let i = (addr - b.base) as usize;
                b.cells[i] = cell;
                Ok(())
            }
            None => Err(fault),
        }
    }

    // ----- overlays ----------------------------------------------------

    pub fn push_overlay(&mut self) {
        self.overlays.push(BTreeMap::new());
    }

    pub fn pop_overlay(&mut self) -> BTreeMap<Address, Cell> {
        self.overlays.pop().expect("no overlay to pop")
    }

    pub fn overlay_depth(&self) -> usize {
        self.overlays.len()
    }

    // ----- registry walks ----------------------------------------------

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    pub fn live_block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Visits every pointer stored in a committed cell.
    pub fn for_each_ptr_mut(&mut self, mut f: impl FnMut(Address, &mut PrivPtr)) {
        for b in self.blocks.values_mut() {
            let base = b.base;
            for (i, c) in b.cells.iter_mut().enumerate() {
                if let Cell::Ptr(p) = c {
                    f(base + i as Address, p);
                }
            }
        }
    }

    pub fn for_each_ptr(&self, mut f: impl FnMut(Address, &PrivPtr)) {
        for b in self.blocks.values() {
            for (i, c) in b.cells.iter().enumerate() {
                if let Cell::Ptr(p) = c {
                    f(b.base + i as Address, p);
                }
            }
        }
    }
}
