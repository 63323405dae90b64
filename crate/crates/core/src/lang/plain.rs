//! Reference execution on clear values.
//!
//! Branches are taken for real and pointers hold one address. Private
//! integers are reduced modulo the prime of the secure run so that overflow
//! behaves identically; public integers use wrapping 128-bit arithmetic.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::interp::{public_arith, public_cmp, take_inputs};
use super::ir::*;
use super::{Inputs, Options, Phase, RunError, RunOutput};
use crate::field::{Field, FieldParams};
use crate::heap::{Address, Cell, Heap, MemFault, NULL};
use crate::privptr::{cast_ptr, PrivPtr};

const MAX_DEPTH: usize = 4096;

#[derive(Debug, Clone)]
enum V {
    Int(i128),
    Ptr(PrivPtr),
    Void,
}

/// Where a place lives.
enum Loc {
    At(Address),
    Null,
    /// Element of a cast pointer.
    Cast(PrivPtr, i64),
    /// A private index outside the block: reads 0, writes are dropped.
    Nothing,
}

enum Flow {
    Next,
    Ret(V),
}

type R<T> = Result<T, RunError>;

fn abort(span: Span, msg: impl ToString) -> RunError {
    RunError::Abort {
        span,
        msg: msg.to_string(),
    }
}

pub struct Plain<'a> {
    prog: &'a Program,
    opts: &'a Options,
    inputs: &'a Inputs,
    field: Field,
    mem: Heap,
    globals: Vec<Address>,
    frames: Vec<Vec<Address>>,
    fn_base: Address,
    out: RunOutput,
}

impl<'a> Plain<'a> {
    pub fn new(
        prog: &'a Program,
        params: &FieldParams,
        opts: &'a Options,
        inputs: &'a Inputs,
    ) -> R<Self> {
        let field = Field::new(*params).map_err(|e| RunError::Input(format!("{e:?}")))?;
        Ok(Plain {
            prog,
            opts,
            inputs,
            field,
            mem: Heap::new(),
            globals: vec![NULL; prog.globals.len()],
            frames: Vec::new(),
            fn_base: NULL,
            out: RunOutput::default(),
        })
    }

    pub fn run(mut self) -> R<RunOutput> {
        if !self.prog.funcs.is_empty() {
            self.fn_base = self
                .mem
                .alloc(self.prog.funcs.len(), &[Cell::Fn(0)], FN_TYPE, false)
                .map_err(|e| abort(Span::default(), e))?;
            for i in 0..self.prog.funcs.len() {
                let _ = self
                    .mem
                    .write(self.fn_base + i as Address, Cell::Fn(i as u32));
            }
        }
        self.frames.push(Vec::new());
        for s in &self.prog.init {
            self.exec(s)?;
        }
        self.frames.pop();
        let main = self.prog.main;
        self.call(main, Vec::new(), self.prog.funcs[main].span)?;
        Ok(self.out)
    }

    fn reduce(&self, v: i128) -> i128 {
        self.field.to_signed(self.field.from_i128(v))
    }

    fn diag(&mut self) {
        self.out.diagnostics += 1;
    }

    fn shape(&self, ty: &Ty) -> (u32, u32) {
        self.prog.ptr_shape(ty)
    }

    fn null_of(&self, ty: &Ty) -> PrivPtr {
        let (t, l) = self.shape(ty);
        PrivPtr::null(t, l)
    }

    fn zero_of(&self, ty: &Ty) -> V {
        match ty {
            Ty::Ptr(_) | Ty::Null => V::Ptr(self.null_of(ty)),
            _ => V::Int(0),
        }
    }

    fn to_cell(v: V) -> Cell {
        match v {
            V::Int(x) => Cell::Pub(x),
            V::Ptr(p) => Cell::Ptr(p),
            V::Void => Cell::Pub(0),
        }
    }

    fn from_cell(c: Cell) -> V {
        match c {
            Cell::Pub(x) => V::Int(x),
            Cell::Ptr(p) => V::Ptr(p),
            Cell::Fn(f) => V::Int(f as i128),
            Cell::Priv(_) => V::Int(0),
        }
    }

    fn alloc(&mut self, ty: &Ty, count: usize, dynamic: bool, span: Span) -> R<Address> {
        let elem = match ty {
            Ty::Array(t) => &**t,
            t => t,
        };
        let cells: Vec<Cell> = self
            .prog
            .layout(elem)
            .into_iter()
            .map(|k| match k {
                CellKind::Ptr { ty, level } => Cell::Ptr(PrivPtr::null(ty, level)),
                _ => Cell::Pub(0),
            })
            .collect();
        let id = self.prog.type_id(elem);
        self.mem
            .alloc(count, &cells, id, dynamic)
            .map_err(|e| abort(span, e))
    }

    fn addr(&self, v: VarRef) -> Address {
        match v {
            VarRef::Global(g) => self.globals[g],
            VarRef::Local(s) => self.frames.last().map_or(NULL, |f| f[s]),
        }
    }

    fn release(&mut self, a: Address) {
        if a != NULL {
            let _ = self.mem.release(a);
        }
    }

    fn null_access(&mut self, span: Span, what: &str) -> R<()> {
        if self.opts.strict_null {
            return Err(abort(span, format!("{what} through a null pointer")));
        }
        self.diag();
        Ok(())
    }

    // ----- memory -------------------------------------------------------------

    fn place_addr(&mut self, pl: &Place, span: Span) -> R<Loc> {
        match &pl.base {
            PlaceBase::Var(v) => Ok(Loc::At(self.addr(*v) + pl.offset)),
            PlaceBase::Deref(e) => {
                let p = self.ptr(e)?;
                if p.cast_from.is_some() {
                    return Ok(Loc::Cast(p, 0));
                }
                if p.is_null() {
                    return Ok(Loc::Null);
                }
                Ok(Loc::At(shift(&p, pl.offset as i64, span)?.locs[0]))
            }
            PlaceBase::Index { ptr, index, elem } => {
                let p = self.ptr(ptr)?;
                let i = self.int(index)?;
                if p.cast_from.is_some() {
                    return Ok(Loc::Cast(p, i as i64));
                }
                if index.ty.is_private_int() {
                    // Out-of-block private indices select nothing.
                    let Some((b, o)) = self.mem.find_block(p.locs[0]) else {
                        self.diag();
                        return Ok(Loc::Nothing);
                    };
                    let j = o as i128 + i;
                    if j < 0 || j >= b.count as i128 {
                        return Ok(Loc::Nothing);
                    }
                    return Ok(Loc::At(b.base + j as Address));
                }
                if p.is_null() {
                    return Ok(Loc::Null);
                }
                let q = shift(&p, i as i64 * *elem as i64 + pl.offset as i64, span)?;
                Ok(Loc::At(q.locs[0]))
            }
        }
    }

    fn read(&mut self, pl: &Place, span: Span) -> R<V> {
        match self.place_addr(pl, span)? {
            Loc::Null => {
                self.null_access(span, "read")?;
                Ok(self.zero_of(&pl.ty))
            }
            Loc::Nothing => Ok(V::Int(0)),
            Loc::Cast(p, i) => self.read_cast(&p, i, span).map(V::Int),
            Loc::At(a) => self.load(a, &pl.ty, span),
        }
    }

    fn load(&mut self, a: Address, ty: &Ty, span: Span) -> R<V> {
        match self.mem.read(a) {
            Ok(c) => Ok(Self::from_cell(c)),
            Err(MemFault::Released(_)) => {
                self.diag();
                Ok(self.zero_of(ty))
            }
            Err(MemFault::Null) => {
                self.null_access(span, "read")?;
                Ok(self.zero_of(ty))
            }
            Err(e) => Err(abort(span, e)),
        }
    }

    fn write(&mut self, pl: &Place, v: V, span: Span) -> R<()> {
        match self.place_addr(pl, span)? {
            Loc::Null => self.null_access(span, "write"),
            Loc::Nothing => Ok(()),
            Loc::Cast(..) => Err(abort(span, "write through a cast pointer")),
            Loc::At(a) => match self.mem.write(a, Self::to_cell(v)) {
                Ok(()) => Ok(()),
                Err(MemFault::Released(_)) => {
                    self.diag();
                    Ok(())
                }
                Err(MemFault::Null) => self.null_access(span, "write"),
                Err(e) => Err(abort(span, e)),
            },
        }
    }

    /// Element `i` of a cast pointer, read as a signed integer.
    fn read_cast(&mut self, p: &PrivPtr, i: i64, span: Span) -> R<i128> {
        let (Some(src), Some(dst)) = (
            p.cast_from.and_then(Program::int_bits),
            Program::int_bits(p.ty),
        ) else {
            return Err(abort(span, "cast between non-integer types"));
        };
        let l = p.locs[0];
        if l == NULL {
            self.null_access(span, "read")?;
            return Ok(0);
        }
        let oob = || {
            abort(
                span,
                format!("cast element {i} extends past the source block"),
            )
        };
        if i < 0 {
            return Err(oob());
        }
        let start = i as u64 * dst as u64;
        let end = start + dst as u64;
        let first = start / src as u64;
        let last = (end - 1) / src as u64;
        let (b, o) = self
            .mem
            .find_block(l)
            .ok_or_else(|| abort(span, format!("invalid address {l}")))?;
        if o as u64 + last >= b.count as u64 {
            return Err(oob());
        }
        let mut bits = Vec::new();
        for e in first..=last {
            let x = match self.mem.read(l + e) {
                Ok(Cell::Pub(x)) => x,
                _ => return Err(abort(span, "cast of non-integer data")),
            };
            for k in 0..src {
                bits.push((x >> k) & 1 == 1);
            }
        }
        let lo = (start - first * src as u64) as usize;
        let slice = &bits[lo..lo + dst as usize];
        let mut v: i128 = 0;
        for (k, &bit) in slice.iter().enumerate() {
            if bit {
                if k + 1 == slice.len() {
                    v -= 1i128 << k;
                } else {
                    v += 1i128 << k;
                }
            }
        }
        Ok(v)
    }

    fn ptr(&mut self, e: &Expr) -> R<PrivPtr> {
        match self.eval(e)? {
            V::Ptr(p) => Ok(p),
            _ => Err(abort(e.span, "expected a pointer")),
        }
    }

    fn int(&mut self, e: &Expr) -> R<i128> {
        match self.eval(e)? {
            V::Int(x) => Ok(x),
            _ => Err(abort(e.span, "expected an integer")),
        }
    }

    // ----- statements -----------------------------------------------------------

    fn exec_block(&mut self, ss: &[Stmt]) -> R<Flow> {
        for s in ss {
            if let Flow::Ret(v) = self.exec(s)? {
                return Ok(Flow::Ret(v));
            }
        }
        Ok(Flow::Next)
    }

    fn exec(&mut self, s: &Stmt) -> R<Flow> {
        match s {
            Stmt::Decl {
                var,
                ty,
                len,
                init,
                span,
            } => {
                let count = match len {
                    Some(l) => match self.int(l)? {
                        k if k >= 1 => k as usize,
                        _ => return Err(abort(*span, "array length must be positive")),
                    },
                    None => 1,
                };
                let a = self.alloc(ty, count, false, *span)?;
                match var {
                    VarRef::Global(g) => self.globals[*g] = a,
                    VarRef::Local(l) => {
                        let old = core::mem::replace(&mut self.frames.last_mut().unwrap()[*l], a);
                        self.release(old);
                    }
                }
                let define = match var {
                    VarRef::Global(g) if matches!(ty, Ty::Int { private: false, .. }) => {
                        self.opts.defines.get(&self.prog.globals[*g].name).copied()
                    }
                    _ => None,
                };
                let v = match (define, init) {
                    (Some(d), _) => Some(V::Int(d)),
                    (None, Some(e)) => Some(self.eval(e)?),
                    (None, None) => None,
                };
                if let Some(v) = v {
                    let v = match (ty, v) {
                        (Ty::Int { private: true, .. }, V::Int(x)) => V::Int(self.reduce(x)),
                        (_, v) => v,
                    };
                    self.mem
                        .write(a, Self::to_cell(v))
                        .map_err(|e| abort(*span, e))?;
                }
                Ok(Flow::Next)
            }
            Stmt::Expr(e) => {
                self.eval(e)?;
                Ok(Flow::Next)
            }
            Stmt::If {
                cond,
                then_,
                else_,
                kind,
                ..
            } => {
                let c = self.int(cond)?;
                if *kind != CondKind::Public {
                    self.out.branch_bodies += 1;
                }
                self.exec_block(if c != 0 { then_ } else { else_ })
            }
            Stmt::Loop {
                cond, body, step, ..
            } => loop {
                if let Some(c) = cond {
                    if self.int(c)? == 0 {
                        return Ok(Flow::Next);
                    }
                }
                if let Flow::Ret(v) = self.exec_block(body)? {
                    return Ok(Flow::Ret(v));
                }
                self.exec_block(step)?;
            },
            Stmt::Scope(body, locals) => {
                let r = self.exec_block(body);
                for &l in locals {
                    let a = core::mem::replace(&mut self.frames.last_mut().unwrap()[l], NULL);
                    self.release(a);
                }
                r
            }
            Stmt::Batch(groups) => {
                for g in groups {
                    if let Flow::Ret(v) = self.exec_block(g)? {
                        return Ok(Flow::Ret(v));
                    }
                }
                Ok(Flow::Next)
            }
            Stmt::Return(e, _) => Ok(Flow::Ret(match e {
                Some(e) => self.eval(e)?,
                None => V::Void,
            })),
        }
    }

    fn call(&mut self, f: usize, args: Vec<V>, span: Span) -> R<V> {
        if self.frames.len() >= MAX_DEPTH {
            return Err(abort(span, "call depth limit exceeded"));
        }
        let func = &self.prog.funcs[f];
        self.frames.push(vec![NULL; func.locals.len()]);
        for (&slot, v) in func.params.iter().zip(args) {
            let ty = func.locals[slot].ty.clone();
            let a = self.alloc(&ty, 1, false, span)?;
            self.mem
                .write(a, Self::to_cell(v))
                .map_err(|e| abort(span, e))?;
            self.frames.last_mut().unwrap()[slot] = a;
        }
        let r = self.exec_block(&func.body);
        for a in self.frames.pop().unwrap() {
            self.release(a);
        }
        let ret = &self.prog.sigs[func.sig].ret;
        match r? {
            Flow::Ret(v) if !matches!(v, V::Void) => Ok(v),
            _ => Ok(match ret {
                Ty::Void => V::Void,
                t => self.zero_of(t),
            }),
        }
    }

    // ----- expressions ----------------------------------------------------------

    fn eval(&mut self, e: &Expr) -> R<V> {
        let span = e.span;
        let private = e.ty.is_private_int();
        match &e.kind {
            ExprKind::Const(v) => Ok(V::Int(*v)),
            ExprKind::Null => Ok(V::Ptr(self.null_of(&e.ty))),
            ExprKind::Load(pl) => self.read(pl, span),
            ExprKind::AddrOf(pl) | ExprKind::Decay(pl) => match self.place_addr(pl, span)? {
                Loc::At(a) => {
                    let (t, l) = self.shape(&e.ty);
                    Ok(V::Ptr(PrivPtr::to(a, t, l)))
                }
                Loc::Null => Ok(V::Ptr(self.null_of(&e.ty))),
                _ => Err(abort(
                    span,
                    "address of an element selected by a private or cast index",
                )),
            },
            ExprKind::FnAddr(i) => Ok(V::Ptr(PrivPtr::to(
                self.fn_base + *i as Address,
                FN_TYPE,
                1,
            ))),
            ExprKind::Neg(a) => {
                let x = self.int(a)?;
                Ok(V::Int(if private {
                    self.reduce(x.wrapping_neg())
                } else {
                    x.wrapping_neg()
                }))
            }
            ExprKind::BitNot(a) => Ok(V::Int(!self.int(a)?)),
            ExprKind::Not(a) => Ok(V::Int((self.int(a)? == 0) as i128)),
            ExprKind::Arith(op, a, b) => {
                let x = self.int(a)?;
                let y = self.int(b)?;
                if private {
                    let f = self.field;
                    let (fx, fy) = (f.from_i128(x), f.from_i128(y));
                    let r = match op {
                        ArithOp::Add => f.add(fx, fy),
                        ArithOp::Sub => f.sub(fx, fy),
                        ArithOp::Mul => f.mul(fx, fy),
                        _ => return Err(abort(span, "operator needs public operands")),
                    };
                    return Ok(V::Int(f.to_signed(r)));
                }
                public_arith(*op, x, y)
                    .map(V::Int)
                    .ok_or_else(|| abort(span, "division by zero"))
            }
            ExprKind::Cmp(op, a, b, _) => {
                let x = self.int(a)?;
                let y = self.int(b)?;
                Ok(V::Int(public_cmp(*op, x, y) as i128))
            }
            ExprKind::And(a, b) => {
                if self.int(a)? == 0 {
                    return Ok(V::Int(0));
                }
                Ok(V::Int((self.int(b)? != 0) as i128))
            }
            ExprKind::Or(a, b) => {
                if self.int(a)? != 0 {
                    return Ok(V::Int(1));
                }
                Ok(V::Int((self.int(b)? != 0) as i128))
            }
            ExprKind::Truth(a, _) => Ok(V::Int((self.int(a)? != 0) as i128)),
            ExprKind::PtrEq(eq, a, b) => {
                let p = self.ptr(a)?;
                let q = self.ptr(b)?;
                Ok(V::Int(((p.locs[0] == q.locs[0]) == *eq) as i128))
            }
            ExprKind::PtrAdd(p, k, elem) => {
                let p = self.ptr(p)?;
                let k = self.int(k)?;
                Ok(V::Ptr(shift(&p, k as i64 * *elem as i64, span)?))
            }
            ExprKind::PtrDiff(a, b, elem) => {
                let p = self.ptr(a)?;
                let q = self.ptr(b)?;
                let d = (p.locs[0] as i128 - q.locs[0] as i128) / (*elem).max(1) as i128;
                Ok(V::Int(if private { self.reduce(d) } else { d }))
            }
            ExprKind::CastPtr(a, to) => {
                let p = self.ptr(a)?;
                Ok(V::Ptr(cast_ptr(&p, *to)))
            }
            ExprKind::Call(callee, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                let f = match callee {
                    Callee::Direct(f) => *f,
                    Callee::Indirect(fe) => {
                        let p = self.ptr(fe)?;
                        if p.is_null() {
                            return Err(abort(span, "call through a null function pointer"));
                        }
                        match self.mem.read(p.locs[0]) {
                            Ok(Cell::Fn(f)) => f as usize,
                            _ => {
                                return Err(abort(
                                    span,
                                    "call through a pointer that does not hold a function",
                                ))
                            }
                        }
                    }
                };
                self.call(f, vals, span)
            }
            ExprKind::Pmalloc(n, ty) => {
                let count = match self.int(n)? {
                    k if k >= 1 => k as usize,
                    _ => return Err(abort(span, "pmalloc count must be positive")),
                };
                let a = self.alloc(ty, count, true, span)?;
                let (t, l) = self.shape(&e.ty);
                Ok(V::Ptr(PrivPtr::to(a, t, l)))
            }
            ExprKind::Pfree(p) => {
                let p = self.ptr(p)?;
                let l = p.locs[0];
                if l == NULL {
                    return Ok(V::Void);
                }
                match self.mem.block(l) {
                    Some(b) if b.dynamic => {}
                    _ => {
                        return Err(abort(
                            span,
                            format!("address {l} is not an allocated block"),
                        ))
                    }
                }
                self.mem.release(l).map_err(|e| abort(span, e))?;
                Ok(V::Void)
            }
            ExprKind::Assign(pl, v) => {
                let v = self.eval(v)?;
                let v = match (&pl.ty, v) {
                    (Ty::Int { private: true, .. }, V::Int(x)) => V::Int(self.reduce(x)),
                    (_, v) => v,
                };
                self.write(pl, v.clone(), span)?;
                Ok(v)
            }
            ExprKind::Input {
                var,
                name,
                elem,
                count,
            } => {
                let n = match count {
                    Some(c) => match self.int(c)? {
                        k if k >= 0 => k as usize,
                        _ => {
                            return Err(abort(
                                span,
                                "input count must be a non-negative public integer",
                            ))
                        }
                    },
                    None => 1,
                };
                let vals = take_inputs(self.inputs, name, n, elem)?;
                let base = self.addr(*var);
                for (j, v) in vals.into_iter().enumerate() {
                    let v = if elem.is_private_int() {
                        self.reduce(v)
                    } else {
                        v
                    };
                    self.mem
                        .write(base + j as Address, Cell::Pub(v))
                        .map_err(|_| {
                            abort(span, format!("input '{name}' overflows its variable"))
                        })?;
                }
                Ok(V::Void)
            }
            ExprKind::Output { name, value, count } => {
                let vals = match count {
                    None => vec![self.int(value)?],
                    Some(c) => {
                        let k = self.int(c)?;
                        if k < 0 {
                            return Err(abort(
                                span,
                                "output count must be a non-negative public integer",
                            ));
                        }
                        let p = self.ptr(value)?;
                        let elem = value.ty.pointee().cloned().unwrap_or(Ty::int(false, 32));
                        let mut vs = Vec::with_capacity(k as usize);
                        for j in 0..k {
                            if p.is_null() {
                                self.null_access(span, "read")?;
                                vs.push(0);
                                continue;
                            }
                            let q = shift(&p, j as i64, span)?;
                            match self.load(q.locs[0], &elem, span)? {
                                V::Int(x) => vs.push(x),
                                _ => vs.push(0),
                            }
                        }
                        vs
                    }
                };
                self.out.outputs.push((name.clone(), vals));
                Ok(V::Void)
            }
            ExprKind::Phase(id) => {
                self.out.phases.push(Phase {
                    id: *id,
                    interactive_ops: 0,
                    rounds: 0,
                    bytes: 0,
                });
                Ok(V::Void)
            }
        }
    }
}

fn shift(p: &PrivPtr, delta: i64, span: Span) -> R<PrivPtr> {
    p.shifted(delta).map_err(|e| abort(span, e))
}
