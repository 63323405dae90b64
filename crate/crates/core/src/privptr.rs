//! Pointers to private data.
//!
//! A [`PrivPtr`] stores a public list of candidate addresses and, when there
//! is more than one candidate, a secret-shared one-hot tag vector marking the
//! true location. A pointer with a single candidate and a public tag behaves
//! like an ordinary pointer and costs nothing to use.
//!
//! Conditional assignment, writes through multi-location pointers, branch
//! merges, and function-pointer merges all reduce to one primitive, a
//! weighted merge (see [`merge_cells`]): for a base value `b` and
//! alternatives `a_i` with secret weights `w_i`,
//! `result = b + sum w_i * (a_i - b)`, applied to values directly and to
//! pointers tag by tag. Every weighted merge needs a single round.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::field::FieldElement;
use crate::harness::{Engine, EngineError};
use crate::heap::{Address, Cell, Heap, HeapError, MemFault, TypeId, NULL};
use crate::mpcops::{self, MpcError};
use crate::shamir::Shared;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tags {
    /// A single location known to be the true one.
    Public,
    /// One shared bit per location.
    Private(Vec<Shared>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivPtr {
    pub locs: Vec<Address>,
    pub tags: Tags,
    /// Base (non-pointer) type the pointer ultimately refers to.
    pub ty: TypeId,
    /// Indirection level, at least 1.
    pub level: u32,
    /// Layout type of the data when the pointer was cast.
    pub cast_from: Option<TypeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PtrError {
    NullDereference,
    InvalidAddress(Address),
    TypeMismatch(&'static str),
    /// A cast read reaches past the end of the source block.
    CastOutOfRange {
        index: i64,
    },
    FreeSizeMismatch,
    NotABlockBase(Address),
    Unsupported(&'static str),
    Heap(HeapError),
    Mpc(MpcError),
}

impl fmt::Display for PtrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PtrError::NullDereference => write!(f, "dereference of a null pointer"),
            PtrError::InvalidAddress(a) => write!(f, "invalid address {a}"),
            PtrError::TypeMismatch(m) => write!(f, "type mismatch: {m}"),
            PtrError::CastOutOfRange { index } => {
                write!(f, "cast element {index} extends past the source block")
            }
            PtrError::FreeSizeMismatch => write!(f, "pfree over blocks of different sizes"),
            PtrError::NotABlockBase(a) => write!(f, "address {a} is not an allocated block"),
            PtrError::Unsupported(m) => write!(f, "unsupported: {m}"),
            PtrError::Heap(e) => write!(f, "{e}"),
            PtrError::Mpc(e) => write!(f, "{e}"),
        }
    }
}

impl From<MpcError> for PtrError {
    fn from(e: MpcError) -> Self {
        PtrError::Mpc(e)
    }
}

impl From<EngineError> for PtrError {
    fn from(e: EngineError) -> Self {
        PtrError::Mpc(MpcError::Engine(e))
    }
}

impl From<HeapError> for PtrError {
    fn from(e: HeapError) -> Self {
        PtrError::Heap(e)
    }
}

pub type Result<T> = core::result::Result<T, PtrError>;

/// Outcome of a pointer predicate; whether it is public is itself public.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pred {
    Public(bool),
    Private(Shared),
}

/// A public or private integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Num {
    Public(i128),
    Private(Shared),
}

/// A tag during merging: a known constant or a shared value.
#[derive(Debug, Clone)]
enum TagVal {
    Const(FieldElement),
    Sh(Shared),
}

impl PrivPtr {
    pub fn null(ty: TypeId, level: u32) -> Self {
        PrivPtr::to(NULL, ty, level)
    }

    pub fn to(addr: Address, ty: TypeId, level: u32) -> Self {
        PrivPtr {
            locs: vec![addr],
            tags: Tags::Public,
            ty,
            level,
            cast_from: None,
        }
    }

    pub fn alpha(&self) -> usize {
        self.locs.len()
    }

    pub fn is_public(&self) -> bool {
        matches!(self.tags, Tags::Public)
    }

    pub fn is_null(&self) -> bool {
        self.is_public() && self.locs[0] == NULL
    }

    /// The single public location, if there is one.
    pub fn public_loc(&self) -> Option<Address> {
        self.is_public().then(|| self.locs[0])
    }

    pub fn contains(&self, addr: Address) -> bool {
        self.locs.contains(&addr)
    }

    fn tag_val(&self, i: usize) -> TagVal {
        match &self.tags {
            Tags::Public => TagVal::Const(FieldElement::ONE),
            Tags::Private(t) => TagVal::Sh(t[i].clone()),
        }
    }

    /// Shared tags, with the public case expanded to a constant 1.
    pub fn tag_shares(&self, eng: &Engine) -> Vec<Shared> {
        match &self.tags {
            Tags::Public => vec![eng.constant(FieldElement::ONE)],
            Tags::Private(t) => t.clone(),
        }
    }

    /// Every location moved by `delta` cells; null stays null.
    pub fn shifted(&self, delta: i64) -> Result<PrivPtr> {
        let mut out = self.clone();
        for l in out.locs.iter_mut() {
            if *l != NULL {
                let v = *l as i64 + delta;
                if v <= 0 {
                    return Err(PtrError::InvalidAddress(0));
                }
                *l = v as Address;
            }
        }
        Ok(out)
    }

    /// Reconstructed tag sum (1 for well-formed pointers, 0 for dangling).
    pub fn tag_sum(&self, eng: &Engine) -> i128 {
        match &self.tags {
            Tags::Public => 1,
            Tags::Private(t) => eng.reveal_signed(&eng.sum(t)),
        }
    }

    /// The true location according to the reconstructed tags.
    pub fn true_loc(&self, eng: &Engine) -> Option<Address> {
        match &self.tags {
            Tags::Public => Some(self.locs[0]),
            Tags::Private(t) => self
                .locs
                .iter()
                .zip(t)
                .find(|(_, s)| eng.reveal(s) == FieldElement::ONE)
                .map(|(l, _)| *l),
        }
    }
}

// ----- weighted merge ---------------------------------------------------

/// `base` combined with alternatives under secret weights.
#[derive(Debug, Clone)]
pub struct MergeItem {
    pub base: Cell,
    pub alts: Vec<(Shared, Cell)>,
}

enum Plan {
    Value {
        base: Shared,
        item: Option<usize>,
    },
    Ptr {
        proto: PrivPtr,
        locs: Vec<Address>,
        /// Per location: local part and optional batch item.
        tags: Vec<(TagVal, Option<usize>)>,
    },
    Keep(Cell),
}

fn tag_at(p: &PrivPtr, pos: &BTreeMap<Address, usize>, addr: Address) -> TagVal {
    match pos.get(&addr) {
        Some(&i) => p.tag_val(i),
        None => TagVal::Const(FieldElement::ZERO),
    }
}

fn index_of(p: &PrivPtr) -> BTreeMap<Address, usize> {
    p.locs.iter().enumerate().map(|(i, &a)| (a, i)).collect()
}

/// Computes all merges in a single round.
pub fn merge_cells(eng: &mut Engine, items: Vec<MergeItem>) -> Result<Vec<Cell>> {
    let f = *eng.field();
    let mut batch = eng.batch();
    let mut plans = Vec::with_capacity(items.len());
    for it in items {
        if it.alts.is_empty() {
            plans.push(Plan::Keep(it.base));
            continue;
        }
        match &it.base {
            Cell::Priv(b) => {
                let mut diffs = Vec::with_capacity(it.alts.len());
                for (w, a) in &it.alts {
                    let a = a
                        .as_priv()
                        .ok_or(PtrError::TypeMismatch("merging a value with a non-value"))?;
                    diffs.push((w, eng.sub(a, b)));
                }
                let k = batch.dot(diffs.iter().map(|(w, d)| (*w, d)));
                plans.push(Plan::Value {
                    base: b.clone(),
                    item: Some(k),
                });
            }
            Cell::Ptr(bp) => {
                let mut alts = Vec::with_capacity(it.alts.len());
                for (w, a) in &it.alts {
                    let a = a.as_ptr().ok_or(PtrError::TypeMismatch(
                        "merging a pointer with a non-pointer",
                    ))?;
                    alts.push((w, a, index_of(a)));
                }
                let bpos = index_of(bp);
                let mut locs: Vec<Address> = bp.locs.clone();
                let mut seen: BTreeMap<Address, ()> = bp.locs.iter().map(|&a| (a, ())).collect();
                for (_, a, _) in &alts {
                    for &l in &a.locs {
                        if seen.insert(l, ()).is_none() {
                            locs.push(l);
                        }
                    }
                }
                let mut tags = Vec::with_capacity(locs.len());
                for &l in &locs {
                    let b = tag_at(bp, &bpos, l);
                    let mut local = match &b {
                        TagVal::Const(c) => eng.constant(*c),
                        TagVal::Sh(s) => s.clone(),
                    };
                    let mut local_is_const = matches!(b, TagVal::Const(_));
                    let mut products: Vec<(&Shared, Shared)> = Vec::new();
                    for (w, a, apos) in &alts {
                        let at = tag_at(a, apos, l);
                        match (&at, &b) {
                            (TagVal::Const(x), TagVal::Const(y)) => {
                                let d = f.sub(*x, *y);
                                if !d.is_zero() {
                                    local = eng.add(&local, &eng.scale(d, w));
                                    local_is_const = false;
                                }
                            }
                            (TagVal::Sh(x), TagVal::Const(y)) => {
                                products.push((w, eng.add_const(x, f.neg(*y))));
                            }
                            (TagVal::Const(x), TagVal::Sh(y)) => {
                                products.push((w, eng.add_const(&eng.neg(y), *x)));
                            }
                            (TagVal::Sh(x), TagVal::Sh(y)) => {
                                products.push((w, eng.sub(x, y)));
                            }
                        }
                    }
                    let item = if products.is_empty() {
                        None
                    } else {
                        Some(batch.dot(products.iter().map(|(w, d)| (*w, d))))
                    };
                    let tv = if local_is_const && item.is_none() {
                        match b {
                            TagVal::Const(c) => TagVal::Const(c),
                            TagVal::Sh(_) => unreachable!(),
                        }
                    } else {
                        TagVal::Sh(local)
                    };
                    tags.push((tv, item));
                }
                plans.push(Plan::Ptr {
                    proto: bp.clone(),
                    locs,
                    tags,
                });
            }
            other => {
                // Public cells never change under a secret weight.
                plans.push(Plan::Keep(other.clone()));
            }
        }
    }
    let out = eng.run(batch)?;
    Ok(plans
        .into_iter()
        .map(|p| match p {
            Plan::Keep(c) => c,
            Plan::Value { base, item } => match item {
                Some(k) => Cell::Priv(eng.add(&base, &out[k])),
                None => Cell::Priv(base),
            },
            Plan::Ptr { proto, locs, tags } => {
                let single_public = locs.len() == 1
                    && matches!(&tags[0], (TagVal::Const(c), None) if *c == FieldElement::ONE);
                let tags = if single_public {
                    Tags::Public
                } else {
                    Tags::Private(
                        tags.into_iter()
                            .map(|(tv, item)| {
                                let base = match tv {
                                    TagVal::Const(c) => eng.constant(c),
                                    TagVal::Sh(s) => s,
                                };
                                match item {
                                    Some(k) => eng.add(&base, &out[k]),
                                    None => base,
                                }
                            })
                            .collect(),
                    )
                };
                Cell::Ptr(PrivPtr {
                    locs,
                    tags,
                    ty: proto.ty,
                    level: proto.level,
                    cast_from: proto.cast_from,
                })
            }
        })
        .collect())
}

/// CondAssign: `v2` where `c = 1`, `v1` where `c = 0`.
pub fn cond_assign(eng: &mut Engine, v1: &PrivPtr, v2: &PrivPtr, c: &Shared) -> Result<PrivPtr> {
    if v1.level != v2.level {
        return Err(PtrError::TypeMismatch("indirection levels differ"));
    }
    let item = MergeItem {
        base: Cell::Ptr(v1.clone()),
        alts: vec![(c.clone(), Cell::Ptr(v2.clone()))],
    };
    match merge_cells(eng, vec![item])?.pop() {
        Some(Cell::Ptr(p)) => Ok(p),
        _ => unreachable!(),
    }
}

/// Merges the overlays of a private if/else into the enclosing memory.
///
/// Addresses for which `skip` holds are dropped (dead after the branch).
pub fn merge_branches(
    eng: &mut Engine,
    mem: &mut Heap,
    c: &Shared,
    then_ov: BTreeMap<Address, Cell>,
    else_ov: BTreeMap<Address, Cell>,
    skip: impl Fn(Address) -> bool,
) -> Result<()> {
    let not_c = eng.one_minus(c);
    let mut addrs: Vec<Address> = then_ov.keys().chain(else_ov.keys()).copied().collect();
    addrs.sort_unstable();
    addrs.dedup();
    let mut items = Vec::with_capacity(addrs.len());
    let mut targets = Vec::with_capacity(addrs.len());
    for a in addrs {
        if skip(a) || !mem.is_live(a) {
            continue;
        }
        let item = match (then_ov.get(&a), else_ov.get(&a)) {
            (Some(t), Some(e)) => MergeItem {
                base: e.clone(),
                alts: vec![(c.clone(), t.clone())],
            },
            (Some(t), None) => MergeItem {
                base: mem.read(a).map_err(fault_err)?,
                alts: vec![(c.clone(), t.clone())],
            },
            (None, Some(e)) => MergeItem {
                base: mem.read(a).map_err(fault_err)?,
                alts: vec![(not_c.clone(), e.clone())],
            },
            (None, None) => unreachable!(),
        };
        items.push(item);
        targets.push(a);
    }
    if items.is_empty() {
        return Ok(());
    }
    let merged = merge_cells(eng, items)?;
    for (a, cell) in targets.into_iter().zip(merged) {
        mem.write(a, cell).map_err(fault_err)?;
    }
    Ok(())
}

/// Merges the overlays left by the candidates of a private function-pointer
/// call: each written cell becomes `orig + sum t_i * (a_i - orig)` over the
/// candidates that wrote it.
pub fn merge_candidates(
    eng: &mut Engine,
    mem: &mut Heap,
    tags: &[Shared],
    overlays: Vec<BTreeMap<Address, Cell>>,
) -> Result<()> {
    let mut addrs: Vec<Address> = overlays.iter().flat_map(|o| o.keys().copied()).collect();
    addrs.sort_unstable();
    addrs.dedup();
    let mut items = Vec::new();
    let mut targets = Vec::new();
    for a in addrs {
        if !mem.is_live(a) {
            continue;
        }
        let alts = overlays
            .iter()
            .zip(tags)
            .filter_map(|(o, t)| o.get(&a).map(|c| (t.clone(), c.clone())))
            .collect();
        items.push(MergeItem {
            base: mem.read(a).map_err(fault_err)?,
            alts,
        });
        targets.push(a);
    }
    let merged = merge_cells(eng, items)?;
    for (a, cell) in targets.into_iter().zip(merged) {
        mem.write(a, cell).map_err(fault_err)?;
    }
    Ok(())
}

fn fault_err(f: MemFault) -> PtrError {
    match f {
        MemFault::Null => PtrError::NullDereference,
        MemFault::Released(a) | MemFault::Unallocated(a) => PtrError::InvalidAddress(a),
    }
}

// ----- dereference ------------------------------------------------------

/// Reads a cell at a candidate location of a multi-location pointer.
/// Null and dead locations read as `None` (zero); dead ones are flagged.
fn candidate_cell(eng: &mut Engine, mem: &Heap, addr: Address) -> Option<Cell> {
    match mem.read(addr) {
        Ok(c) => Some(c),
        Err(MemFault::Null) => None,
        Err(e) => {
            eng.diagnostic(&alloc::format!("read of {e} through a private pointer"));
            None
        }
    }
}

/// Reads the cell `offset` cells past the location of a public pointer.
pub fn load_public(eng: &mut Engine, mem: &Heap, p: &PrivPtr, offset: u64) -> Result<Option<Cell>> {
    let l = p
        .public_loc()
        .ok_or(PtrError::Unsupported("load_public on a private pointer"))?;
    if l == NULL {
        return Err(PtrError::NullDereference);
    }
    match mem.read(l + offset) {
        Ok(c) => Ok(Some(c)),
        Err(MemFault::Released(a)) => {
            eng.diagnostic(&alloc::format!("read of released address {a}"));
            Ok(None)
        }
        Err(MemFault::Unallocated(a)) => Err(PtrError::InvalidAddress(a)),
        Err(MemFault::Null) => Err(PtrError::NullDereference),
    }
}

/// Writes through a public pointer. Writes to released memory are dropped
/// and flagged.
pub fn store_public(
    eng: &mut Engine,
    mem: &mut Heap,
    p: &PrivPtr,
    offset: u64,
    cell: Cell,
) -> Result<()> {
    let l = p
        .public_loc()
        .ok_or(PtrError::Unsupported("store_public on a private pointer"))?;
    if l == NULL {
        return Err(PtrError::NullDereference);
    }
    match mem.write(l + offset, cell) {
        Ok(()) => Ok(()),
        Err(MemFault::Released(a)) => {
            eng.diagnostic(&alloc::format!("write to released address {a}"));
            Ok(())
        }
        Err(e) => Err(fault_err(e)),
    }
}

/// `*p` for a pointer to a private integer (field `offset` for structs).
pub fn deref_read(eng: &mut Engine, mem: &Heap, p: &PrivPtr, offset: u64) -> Result<Shared> {
    match &p.tags {
        Tags::Public => match load_public(eng, mem, p, offset)? {
            Some(Cell::Priv(s)) => Ok(s),
            Some(Cell::Pub(v)) => Ok(eng.const_i(v)),
            Some(_) => Err(PtrError::TypeMismatch(
                "dereferenced cell is not an integer",
            )),
            None => Ok(eng.zero()),
        },
        Tags::Private(ts) => {
            let mut xs = Vec::with_capacity(ts.len());
            let mut ys = Vec::with_capacity(ts.len());
            for (&l, t) in p.locs.iter().zip(ts) {
                if l == NULL {
                    continue;
                }
                match candidate_cell(eng, mem, l + offset) {
                    Some(Cell::Priv(s)) => {
                        xs.push(s);
                        ys.push(t.clone());
                    }
                    Some(Cell::Pub(v)) => {
                        xs.push(eng.const_i(v));
                        ys.push(t.clone());
                    }
                    Some(_) => {
                        return Err(PtrError::TypeMismatch(
                            "dereferenced cell is not an integer",
                        ))
                    }
                    None => {}
                }
            }
            if xs.is_empty() {
                return Ok(eng.zero());
            }
            Ok(eng.inner_product(&xs, &ys)?)
        }
    }
}

/// `*p = v` for a pointer to a private integer.
pub fn deref_write(
    eng: &mut Engine,
    mem: &mut Heap,
    p: &PrivPtr,
    offset: u64,
    v: &Shared,
) -> Result<()> {
    write_cells(eng, mem, p, offset, Cell::Priv(v.clone()))
}

/// `*p = q` for a pointer to a pointer.
pub fn deref_write_ptr(
    eng: &mut Engine,
    mem: &mut Heap,
    p: &PrivPtr,
    offset: u64,
    q: &PrivPtr,
) -> Result<()> {
    write_cells(eng, mem, p, offset, Cell::Ptr(q.clone()))
}

fn write_cells(
    eng: &mut Engine,
    mem: &mut Heap,
    p: &PrivPtr,
    offset: u64,
    cell: Cell,
) -> Result<()> {
    match &p.tags {
        Tags::Public => store_public(eng, mem, p, offset, cell),
        Tags::Private(ts) => {
            let mut items = Vec::with_capacity(ts.len());
            let mut targets = Vec::with_capacity(ts.len());
            for (&l, t) in p.locs.iter().zip(ts) {
                if l == NULL {
                    continue;
                }
                let a = l + offset;
                if let Some(cur) = candidate_cell(eng, mem, a) {
                    items.push(MergeItem {
                        base: cur,
                        alts: vec![(t.clone(), cell.clone())],
                    });
                    targets.push(a);
                }
            }
            let merged = merge_cells(eng, items)?;
            for (a, c) in targets.into_iter().zip(merged) {
                mem.write(a, c).map_err(fault_err)?;
            }
            Ok(())
        }
    }
}

/// `*p` for a pointer whose pointee is itself a pointer. The candidate
/// lists are merged (addresses ascending) with tags `t_i * t^(i)_j`.
pub fn deref_read_ptr(eng: &mut Engine, mem: &Heap, p: &PrivPtr, offset: u64) -> Result<PrivPtr> {
    let null_child = PrivPtr::null(p.ty, p.level.saturating_sub(1).max(1));
    match &p.tags {
        Tags::Public => match load_public(eng, mem, p, offset)? {
            Some(Cell::Ptr(q)) => Ok(q),
            Some(_) => Err(PtrError::TypeMismatch("dereferenced cell is not a pointer")),
            None => Ok(null_child),
        },
        Tags::Private(ts) => {
            let mut children = Vec::with_capacity(ts.len());
            for (&l, t) in p.locs.iter().zip(ts) {
                let child = if l == NULL {
                    null_child.clone()
                } else {
                    match candidate_cell(eng, mem, l + offset) {
                        Some(Cell::Ptr(q)) => q,
                        Some(_) => {
                            return Err(PtrError::TypeMismatch(
                                "dereferenced cell is not a pointer",
                            ))
                        }
                        None => null_child.clone(),
                    }
                };
                children.push((t, child));
            }
            let proto = children
                .iter()
                .find(|(_, c)| !c.is_null())
                .map(|(_, c)| c.clone())
                .unwrap_or(null_child);
            let mut batch = eng.batch();
            // Per location: local sum plus batch items.
            let mut acc: BTreeMap<Address, (Shared, Vec<usize>)> = BTreeMap::new();
            for (t, c) in &children {
                for (j, &l) in c.locs.iter().enumerate() {
                    let e = acc.entry(l).or_insert_with(|| (eng.zero(), Vec::new()));
                    match &c.tags {
                        Tags::Public => e.0 = eng.add(&e.0, t),
                        Tags::Private(ct) => e.1.push(batch.mul(t, &ct[j])),
                    }
                }
            }
            let out = eng.run(batch)?;
            let mut locs = Vec::with_capacity(acc.len());
            let mut tags = Vec::with_capacity(acc.len());
            for (l, (local, items)) in acc {
                locs.push(l);
                tags.push(
                    eng.sum(
                        items
                            .iter()
                            .map(|&k| &out[k])
                            .chain(core::iter::once(&local)),
                    ),
                );
            }
            Ok(PrivPtr {
                locs,
                tags: Tags::Private(tags),
                ty: proto.ty,
                level: proto.level,
                cast_from: proto.cast_from,
            })
        }
    }
}

// ----- indexing and arithmetic ------------------------------------------

/// `p[i]` with a public index over elements of `elem_size` cells.
pub fn index_read(
    eng: &mut Engine,
    mem: &Heap,
    p: &PrivPtr,
    i: i64,
    elem_size: usize,
    offset: u64,
) -> Result<Shared> {
    let q = p.shifted(i * elem_size as i64)?;
    deref_read(eng, mem, &q, offset)
}

pub fn index_write(
    eng: &mut Engine,
    mem: &mut Heap,
    p: &PrivPtr,
    i: i64,
    elem_size: usize,
    offset: u64,
    v: &Shared,
) -> Result<()> {
    let q = p.shifted(i * elem_size as i64)?;
    deref_write(eng, mem, &q, offset, v)
}

/// Per-location selector vectors for a private index: for each candidate
/// location that starts an element of a live block, the cell addresses of
/// that block and `[i == j - o]` for every element `j`.
type Selection = Vec<(usize, Vec<Address>, Vec<Shared>)>;

fn private_selectors(
    eng: &mut Engine,
    mem: &Heap,
    p: &PrivPtr,
    i: &Shared,
    bitlen: u32,
) -> Result<Selection> {
    let mut plans = Vec::new();
    let mut consts = Vec::new();
    for (k, &l) in p.locs.iter().enumerate() {
        if l == NULL {
            continue;
        }
        if let Some((b, o)) = mem.find_block(l) {
            if b.elem_size != 1 {
                return Err(PtrError::Unsupported(
                    "private indexing of non-integer elements",
                ));
            }
            let addrs: Vec<Address> = (0..b.count).map(|j| b.base + j as Address).collect();
            for j in 0..b.count {
                consts.push(eng.const_i(j as i128 - o as i128));
            }
            plans.push((k, addrs));
        }
    }
    let pairs: Vec<(&Shared, &Shared)> = consts.iter().map(|c| (i, c)).collect();
    let sels = mpcops::eq_many(eng, &pairs, bitlen)?;
    let mut it = sels.into_iter();
    Ok(plans
        .into_iter()
        .map(|(k, addrs)| {
            let s: Vec<Shared> = it.by_ref().take(addrs.len()).collect();
            (k, addrs, s)
        })
        .collect())
}

/// `p[i]` with a private index. Locations that do not start an element of a
/// live block are skipped; if none qualifies the result is 0 and a
/// diagnostic is raised.
pub fn index_read_private(
    eng: &mut Engine,
    mem: &Heap,
    p: &PrivPtr,
    i: &Shared,
    bitlen: u32,
) -> Result<Shared> {
    let sel = private_selectors(eng, mem, p, i, bitlen)?;
    if sel.is_empty() {
        eng.diagnostic("private index through a pointer with no allocated block");
        return Ok(eng.zero());
    }
    let mut batch = eng.batch();
    let mut ks = Vec::with_capacity(sel.len());
    for (k, addrs, s) in &sel {
        let vals: Vec<Shared> = addrs
            .iter()
            .map(|&a| match mem.read(a) {
                Ok(Cell::Priv(v)) => Ok(v),
                Ok(Cell::Pub(v)) => Ok(eng.const_i(v)),
                _ => Err(PtrError::Unsupported(
                    "private indexing of non-integer elements",
                )),
            })
            .collect::<Result<_>>()?;
        let item = batch.dot(s.iter().zip(vals.iter()).map(|(a, b)| (a, b)));
        ks.push((*k, item, vals));
    }
    let per_loc = eng.run(batch)?;
    match &p.tags {
        Tags::Public => Ok(per_loc[ks[0].1].clone()),
        Tags::Private(ts) => {
            let xs: Vec<Shared> = ks
                .iter()
                .map(|(_, item, _)| per_loc[*item].clone())
                .collect();
            let ys: Vec<Shared> = ks.iter().map(|(k, _, _)| ts[*k].clone()).collect();
            Ok(eng.inner_product(&xs, &ys)?)
        }
    }
}

/// `p[i] = v` with a private index.
pub fn index_write_private(
    eng: &mut Engine,
    mem: &mut Heap,
    p: &PrivPtr,
    i: &Shared,
    v: &Shared,
    bitlen: u32,
) -> Result<()> {
    let sel = private_selectors(eng, mem, p, i, bitlen)?;
    if sel.is_empty() {
        eng.diagnostic("private index through a pointer with no allocated block");
        return Ok(());
    }
    // Weight of each cell: t_k * sel_kj, summed over locations sharing it.
    let weights: Vec<(Address, Shared)> = match &p.tags {
        Tags::Public => sel
            .into_iter()
            .flat_map(|(_, addrs, s)| addrs.into_iter().zip(s))
            .collect(),
        Tags::Private(ts) => {
            let mut batch = eng.batch();
            let mut idx = Vec::new();
            for (k, addrs, s) in &sel {
                for (a, sj) in addrs.iter().zip(s) {
                    idx.push((*a, batch.mul(&ts[*k], sj)));
                }
            }
            let out = eng.run(batch)?;
            idx.into_iter().map(|(a, k)| (a, out[k].clone())).collect()
        }
    };
    let mut by_cell: BTreeMap<Address, Shared> = BTreeMap::new();
    for (a, w) in weights {
        match by_cell.get_mut(&a) {
            Some(acc) => *acc = eng.add(acc, &w),
            None => {
                by_cell.insert(a, w);
            }
        }
    }
    let mut items = Vec::with_capacity(by_cell.len());
    let mut targets = Vec::with_capacity(by_cell.len());
    for (a, w) in by_cell {
        items.push(MergeItem {
            base: mem.read(a).map_err(fault_err)?,
            alts: vec![(w, Cell::Priv(v.clone()))],
        });
        targets.push(a);
    }
    let merged = merge_cells(eng, items)?;
    for (a, c) in targets.into_iter().zip(merged) {
        mem.write(a, c).map_err(fault_err)?;
    }
    Ok(())
}

/// `p + k` (elements); requires pointer arithmetic to be enabled upstream.
pub fn ptr_offset(p: &PrivPtr, k: i64, elem_size: usize) -> Result<PrivPtr> {
    p.shifted(k * elem_size as i64)
}

/// `p1 - p2` in elements: public when both are public pointers, otherwise
/// the private difference of the true locations (computed locally).
pub fn ptr_diff(eng: &Engine, p1: &PrivPtr, p2: &PrivPtr, elem_size: usize) -> Num {
    let es = elem_size.max(1) as i128;
    if let (Some(a), Some(b)) = (p1.public_loc(), p2.public_loc()) {
        return Num::Public((a as i128 - b as i128) / es);
    }
    let f = *eng.field();
    let loc_sum = |p: &PrivPtr| {
        let ts = p.tag_shares(eng);
        let terms: Vec<(FieldElement, &Shared)> = p
            .locs
            .iter()
            .map(|&l| f.elem(l as u128))
            .zip(ts.iter())
            .collect();
        eng.lincomb(&terms, FieldElement::ZERO)
    };
    let d = eng.sub(&loc_sum(p1), &loc_sum(p2));
    let inv = f.inv(f.elem(es as u128)).expect("element size is nonzero");
    Num::Private(eng.scale(inv, &d))
}

/// `p1 == p2`.
pub fn ptr_pred_equal(eng: &mut Engine, p1: &PrivPtr, p2: &PrivPtr) -> Result<Pred> {
    if let (Some(a), Some(b)) = (p1.public_loc(), p2.public_loc()) {
        return Ok(Pred::Public(a == b));
    }
    let pos2 = index_of(p2);
    let mut local = eng.zero();
    let mut pairs: Vec<(Shared, Shared)> = Vec::new();
    let mut any = false;
    for (i, l) in p1.locs.iter().enumerate() {
        if let Some(&j) = pos2.get(l) {
            any = true;
            match (p1.tag_val(i), p2.tag_val(j)) {
                (TagVal::Sh(a), TagVal::Sh(b)) => pairs.push((a, b)),
                (TagVal::Sh(a), TagVal::Const(_)) | (TagVal::Const(_), TagVal::Sh(a)) => {
                    local = eng.add(&local, &a)
                }
                (TagVal::Const(_), TagVal::Const(_)) => unreachable!("both public handled above"),
            }
        }
    }
    if !any {
        return Ok(Pred::Public(false));
    }
    if pairs.is_empty() {
        return Ok(Pred::Private(local));
    }
    let mut b = eng.batch();
    let k = b.dot(pairs.iter().map(|(a, b)| (a, b)));
    let out = eng.run(b)?;
    Ok(Pred::Private(eng.add(&local, &out[k])))
}

// ----- casts ------------------------------------------------------------

/// Reinterprets the pointee type. The layout type of the data is recorded
/// once; casting back to it clears the record.
pub fn cast_ptr(p: &PrivPtr, to: TypeId) -> PrivPtr {
    let mut q = p.clone();
    let orig = p.cast_from.unwrap_or(p.ty);
    q.ty = to;
    q.cast_from = (orig != to).then_some(orig);
    q
}

/// Two's-complement bits (LSB first) of a signed `bits`-bit shared value.
fn signed_bits(eng: &mut Engine, x: &Shared, bits: u32) -> Result<Vec<Shared>> {
    let f = *eng.field();
    let biased = eng.add_const(x, f.pow2(bits - 1));
    let mut out = mpcops::bit_decompose(eng, &biased, bits)?;
    let top = out.len() - 1;
    out[top] = eng.one_minus(&out[top]);
    Ok(out)
}

/// Element `i` of a cast pointer: the `dst_bits`-wide slice starting at bit
/// `i * dst_bits` of the source data, whose elements are `src_bits` wide.
/// The result is read as a signed integer.
pub fn deref_cast(
    eng: &mut Engine,
    mem: &Heap,
    p: &PrivPtr,
    i: i64,
    src_bits: u32,
    dst_bits: u32,
) -> Result<Shared> {
    if i < 0 || src_bits == 0 || dst_bits == 0 {
        return Err(PtrError::CastOutOfRange { index: i });
    }
    let f = *eng.field();
    let start = i as u64 * dst_bits as u64;
    let end = start + dst_bits as u64;
    let first = start / src_bits as u64;
    let last = (end - 1) / src_bits as u64;
    let ts = p.tag_shares(eng);
    let mut vals = Vec::with_capacity(p.alpha());
    let mut weights = Vec::with_capacity(p.alpha());
    for (&l, t) in p.locs.iter().zip(&ts) {
        if l == NULL {
            if p.is_public() {
                return Err(PtrError::NullDereference);
            }
            continue;
        }
        let (b, o) = mem.find_block(l).ok_or(PtrError::InvalidAddress(l))?;
        if o as u64 + last >= b.count as u64 {
            return Err(PtrError::CastOutOfRange { index: i });
        }
        let mut bits = Vec::new();
        for e in first..=last {
            let x = match mem.read(l + e) {
                Ok(Cell::Priv(s)) => s,
                Ok(Cell::Pub(v)) => eng.const_i(v),
                _ => return Err(PtrError::Unsupported("cast of non-integer data")),
            };
            bits.extend(signed_bits(eng, &x, src_bits)?);
        }
        let lo = (start - first * src_bits as u64) as usize;
        let slice = &bits[lo..lo + dst_bits as usize];
        let mut terms: Vec<(FieldElement, &Shared)> = slice
            .iter()
            .enumerate()
            .map(|(j, b)| (f.pow2(j as u32), b))
            .collect();
        let top = terms.len() - 1;
        terms[top].0 = f.neg(f.pow2(top as u32));
        vals.push(eng.lincomb(&terms, FieldElement::ZERO));
        weights.push(t.clone());
    }
    if vals.is_empty() {
        return Ok(eng.zero());
    }
    if p.is_public() {
        return Ok(vals.pop().unwrap());
    }
    Ok(eng.inner_product(&vals, &weights)?)
}

// ----- deallocation -----------------------------------------------------

/// `pfree(p)`.
///
/// A null candidate cancels the call. A public pointer releases its block.
/// Otherwise the first candidate is released: its data moves to the true
/// location (`a_i = a_i + t_i (a_1 - a_i)`), and every pointer that stores
/// an address inside the released block is redirected to the remaining
/// candidates with tags `t' * t_i`.
pub fn dealloc(eng: &mut Engine, mem: &mut Heap, p: &PrivPtr) -> Result<()> {
    if p.locs.contains(&NULL) {
        return Ok(());
    }
    let victim = p.locs[0];
    let check_base = |mem: &Heap, l: Address| -> Result<usize> {
        match mem.block(l) {
            Some(b) if b.dynamic => Ok(b.len_cells()),
            _ => Err(PtrError::NotABlockBase(l)),
        }
    };
    let size = check_base(mem, victim)?;
    let vend = victim + size as Address;
    let in_victim = |a: Address| a >= victim && a < vend;
    let ts = match &p.tags {
        Tags::Public => {
            // Aliases lose the released candidates; a pointer left with
            // none dangles with tag sum 0.
            let (zero, one) = (eng.zero(), eng.constant(FieldElement::ONE));
            mem.for_each_ptr_mut(|_, q| {
                if !q.locs.iter().any(|&l| in_victim(l)) {
                    return;
                }
                let tags = match &q.tags {
                    Tags::Public => vec![one.clone()],
                    Tags::Private(t) => t.clone(),
                };
                let (locs, tags): (Vec<Address>, Vec<Shared>) = q
                    .locs
                    .iter()
                    .zip(tags)
                    .filter(|(l, _)| !in_victim(**l))
                    .map(|(&l, t)| (l, t))
                    .unzip();
                if locs.is_empty() {
                    q.locs = vec![NULL];
                    q.tags = Tags::Private(vec![zero.clone()]);
                } else {
                    q.locs = locs;
                    q.tags = Tags::Private(tags);
                }
            });
            mem.release(victim)?;
            return Ok(());
        }
        Tags::Private(ts) => ts.clone(),
    };
    for &l in &p.locs[1..] {
        if check_base(mem, l)? != size {
            return Err(PtrError::FreeSizeMismatch);
        }
    }

    eng.par_begin();
    eng.par_next();
    // Relocation of the victim's data to the true location.
    let mut items = Vec::new();
    let mut targets = Vec::new();
    for k in 0..size as Address {
        let src = mem.read(victim + k).map_err(fault_err)?;
        for (&l, t) in p.locs[1..].iter().zip(&ts[1..]) {
            items.push(MergeItem {
                base: mem.read(l + k).map_err(fault_err)?,
                alts: vec![(t.clone(), src.clone())],
            });
            targets.push(l + k);
        }
    }
    let merged = merge_cells(eng, items)?;
    let mut dependent = false;
    for (a, c) in targets.into_iter().zip(merged) {
        if let Cell::Ptr(q) = &c {
            dependent |= q.locs.iter().any(|&l| in_victim(l));
        }
        mem.write(a, c).map_err(fault_err)?;
    }
    // Redirection runs in the same round unless it has to read relocated
    // pointers, which would need products of degree three.
    if dependent {
        eng.par_end();
    } else {
        eng.par_next();
    }
    let grouped = !dependent;

    let mut holders: Vec<(Address, PrivPtr)> = Vec::new();
    mem.for_each_ptr(|addr, q| {
        if !in_victim(addr) && q.locs.iter().any(|&l| in_victim(l)) {
            holders.push((addr, q.clone()));
        }
    });
    let mut batch = eng.batch();
    let mut rebuilt = Vec::with_capacity(holders.len());
    for (_, q) in &holders {
        // Per location: local part and batch items, in first-seen order.
        let mut order: Vec<Address> = Vec::new();
        let mut acc: BTreeMap<Address, (Shared, Vec<usize>)> = BTreeMap::new();
        let add_local = |eng: &Engine,
                         acc: &mut BTreeMap<Address, (Shared, Vec<usize>)>,
                         order: &mut Vec<Address>,
                         l: Address,
                         s: &Shared| {
            match acc.get_mut(&l) {
                Some(e) => e.0 = eng.add(&e.0, s),
                None => {
                    order.push(l);
                    acc.insert(l, (s.clone(), Vec::new()));
                }
            }
        };
        let qt = q.tag_shares(eng);
        for (j, &l) in q.locs.iter().enumerate() {
            if !in_victim(l) {
                add_local(eng, &mut acc, &mut order, l, &qt[j]);
                continue;
            }
            let k = l - victim;
            for (&li, ti) in p.locs[1..].iter().zip(&ts[1..]) {
                let dst = li + k;
                if q.is_public() {
                    add_local(eng, &mut acc, &mut order, dst, ti);
                } else {
                    let item = batch.mul(&qt[j], ti);
                    if !acc.contains_key(&dst) {
                        order.push(dst);
                        acc.insert(dst, (eng.zero(), Vec::new()));
                    }
                    acc.get_mut(&dst).unwrap().1.push(item);
                }
            }
        }
        rebuilt.push((order, acc));
    }
    let out = eng.run(batch)?;
    if grouped {
        eng.par_end();
    }
    for ((addr, q), (order, mut acc)) in holders.into_iter().zip(rebuilt) {
        let mut locs = Vec::with_capacity(order.len());
        let mut tags = Vec::with_capacity(order.len());
        for l in order {
            let (local, items) = acc.remove(&l).unwrap();
            locs.push(l);
            tags.push(
                eng.sum(
                    items
                        .iter()
                        .map(|&k| &out[k])
                        .chain(core::iter::once(&local)),
                ),
            );
        }
        if locs.is_empty() {
            locs.push(NULL);
            tags.push(eng.zero());
        }
        let np = PrivPtr {
            locs,
            tags: Tags::Private(tags),
            ty: q.ty,
            level: q.level,
            cast_from: q.cast_from,
        };
        mem.write(addr, Cell::Ptr(np)).map_err(fault_err)?;
    }
    mem.release(victim)?;
    Ok(())
}
