//! Execution over secret shares.
//!
//! Every variable lives in a heap block, so `&x` and pointer dereference use
//! one code path. Private `if` bodies both run, each against its own write
//! overlay; the overlays are then merged under the condition.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::ir::*;
use super::{Inputs, Options, Phase, RunError, RunOutput};
use crate::field::Field;
use crate::harness::Engine;
use crate::heap::{Address, Cell, Heap, NULL};
use crate::mpcops;
use crate::privptr::{self as pp, MergeItem, Num, Pred, PrivPtr, PtrError, Tags};
use crate::shamir::Shared;

const MAX_DEPTH: usize = 4096;

#[derive(Debug, Clone)]
pub enum Val {
    Pub(i128),
    Priv(Shared),
    Ptr(PrivPtr),
    Void,
}

enum Target {
    /// The cell `offset` past each location of a pointer.
    At(PrivPtr, u64),
    /// Element `i` of a cast pointer.
    Cast(PrivPtr, i64),
    /// Private index into the block of a pointer.
    PrivIdx(PrivPtr, Shared),
}

enum Flow {
    Next,
    Ret(Val),
}

struct Frame {
    slots: Vec<Address>,
}

type R<T> = Result<T, RunError>;

fn abort(span: Span, msg: impl ToString) -> RunError {
    RunError::Abort {
        span,
        msg: msg.to_string(),
    }
}

fn perr(span: Span) -> impl Fn(PtrError) -> RunError {
    move |e| abort(span, e)
}

pub struct Mpc<'a> {
    prog: &'a Program,
    eng: &'a mut Engine,
    opts: &'a Options,
    inputs: &'a Inputs,
    mem: Heap,
    field: Field,
    globals: Vec<Address>,
    frames: Vec<Frame>,
    fn_base: Address,
    out: RunOutput,
}

impl<'a> Mpc<'a> {
    pub fn new(
        prog: &'a Program,
        eng: &'a mut Engine,
        opts: &'a Options,
        inputs: &'a Inputs,
    ) -> Self {
        let field = *eng.field();
        Mpc {
            prog,
            eng,
            opts,
            inputs,
            mem: Heap::new(),
            field,
            globals: vec![NULL; prog.globals.len()],
            frames: Vec::new(),
            fn_base: NULL,
            out: RunOutput::default(),
        }
    }

    pub fn run(mut self) -> R<RunOutput> {
        let diag0 = self.eng.stats().diagnostics;
        if !self.prog.funcs.is_empty() {
            let cells: Vec<Cell> = (0..self.prog.funcs.len())
                .map(|i| Cell::Fn(i as u32))
                .collect();
            // One block of one-cell elements, so every function has an address.
            self.fn_base = self
                .mem
                .alloc(cells.len(), &[Cell::Fn(0)], FN_TYPE, false)
                .map_err(|e| abort(Span::default(), e))?;
            for (i, c) in cells.into_iter().enumerate() {
                let _ = self.mem.write(self.fn_base + i as Address, c);
            }
        }
        self.frames.push(Frame { slots: Vec::new() });
        for s in &self.prog.init {
            self.exec(s)?;
        }
        self.frames.pop();
        self.call(
            self.prog.main,
            Vec::new(),
            self.prog.funcs[self.prog.main].span,
        )?;
        self.out.diagnostics = self.eng.stats().diagnostics - diag0;
        Ok(self.out)
    }

    // ----- values ---------------------------------------------------------

    fn share(&self, v: &Val) -> Shared {
        match v {
            Val::Priv(s) => s.clone(),
            Val::Pub(x) => self.eng.const_i(*x),
            _ => self.eng.zero(),
        }
    }

    fn shape(&self, ty: &Ty) -> (u32, u32) {
        self.prog.ptr_shape(ty)
    }

    fn null_of(&self, ty: &Ty) -> PrivPtr {
        let (t, l) = self.shape(ty);
        PrivPtr::null(t, l)
    }

    fn zero_of(&self, ty: &Ty) -> Val {
        match ty {
            Ty::Int { private: true, .. } => Val::Priv(self.eng.zero()),
            Ty::Ptr(_) | Ty::Null => Val::Ptr(self.null_of(ty)),
            _ => Val::Pub(0),
        }
    }

    fn to_cell(&self, v: Val, ty: &Ty) -> Cell {
        match (ty, v) {
            (Ty::Int { private: true, .. }, v @ (Val::Pub(_) | Val::Priv(_))) => {
                Cell::Priv(self.share(&v))
            }
            (_, Val::Priv(s)) => Cell::Priv(s),
            (_, Val::Pub(x)) => Cell::Pub(x),
            (_, Val::Ptr(p)) => Cell::Ptr(p),
            (_, Val::Void) => Cell::Pub(0),
        }
    }

    fn from_cell(c: Cell) -> Val {
        match c {
            Cell::Priv(s) => Val::Priv(s),
            Cell::Pub(x) => Val::Pub(x),
            Cell::Ptr(p) => Val::Ptr(p),
            Cell::Fn(f) => Val::Pub(f as i128),
        }
    }

    fn init_cells(&self, ty: &Ty) -> Vec<Cell> {
        self.prog
            .layout(ty)
            .into_iter()
            .map(|k| match k {
                CellKind::PrivInt => Cell::Priv(self.eng.zero()),
                CellKind::PubInt => Cell::Pub(0),
                CellKind::Ptr { ty, level } => Cell::Ptr(PrivPtr::null(ty, level)),
            })
            .collect()
    }

    fn alloc(&mut self, ty: &Ty, count: usize, dynamic: bool, span: Span) -> R<Address> {
        let elem = match ty {
            Ty::Array(t) => &**t,
            t => t,
        };
        let cells = self.init_cells(elem);
        let id = self.prog.type_id(elem);
        self.mem
            .alloc(count, &cells, id, dynamic)
            .map_err(|e| abort(span, e))
    }

    fn addr(&self, v: VarRef) -> Address {
        match v {
            VarRef::Global(g) => self.globals[g],
            VarRef::Local(s) => self.frames.last().map_or(NULL, |f| f.slots[s]),
        }
    }

    fn null_access(&mut self, span: Span, what: &str) -> R<()> {
        if self.opts.strict_null {
            return Err(abort(span, format!("{what} through a null pointer")));
        }
        self.eng
            .diagnostic(&format!("{what} through a null pointer at {span}"));
        Ok(())
    }

    // ----- places -----------------------------------------------------------

    fn target(&mut self, pl: &Place, span: Span) -> R<Target> {
        match &pl.base {
            PlaceBase::Var(v) => {
                let a = self.addr(*v);
                let (t, l) = self.shape(&Ty::Ptr(alloc::boxed::Box::new(pl.ty.clone())));
                Ok(Target::At(PrivPtr::to(a, t, l), pl.offset))
            }
            PlaceBase::Deref(e) => {
                let p = self.ptr(e)?;
                Ok(Target::At(p, pl.offset))
            }
            PlaceBase::Index { ptr, index, elem } => {
                let p = self.ptr(ptr)?;
                match self.eval(index)? {
                    Val::Pub(k) => {
                        if p.cast_from.is_some() {
                            return Ok(Target::Cast(p, k as i64));
                        }
                        let q = p.shifted(k as i64 * *elem as i64).map_err(perr(span))?;
                        Ok(Target::At(q, pl.offset))
                    }
                    Val::Priv(s) => {
                        if p.cast_from.is_some() {
                            return Err(abort(span, "private index into a cast pointer"));
                        }
                        Ok(Target::PrivIdx(p, s))
                    }
                    _ => Err(abort(span, "index is not an integer")),
                }
            }
        }
    }

    fn ptr(&mut self, e: &Expr) -> R<PrivPtr> {
        match self.eval(e)? {
            Val::Ptr(p) => Ok(p),
            _ => Err(abort(e.span, "expected a pointer")),
        }
    }

    fn read(&mut self, t: Target, ty: &Ty, span: Span) -> R<Val> {
        let bits = self.prog.max_bits;
        match t {
            Target::At(p, off) => {
                if p.cast_from.is_some() && ty.is_int() {
                    return self.read(Target::Cast(p, 0), ty, span);
                }
                if p.is_null() {
                    self.null_access(span, "read")?;
                    return Ok(self.zero_of(ty));
                }
                if ty.is_ptr() {
                    let q = pp::deref_read_ptr(self.eng, &self.mem, &p, off).map_err(perr(span))?;
                    return Ok(Val::Ptr(q));
                }
                if p.is_public() {
                    return match pp::load_public(self.eng, &self.mem, &p, off)
                        .map_err(perr(span))?
                    {
                        Some(c) => Ok(Self::from_cell(c)),
                        None => Ok(self.zero_of(ty)),
                    };
                }
                let s = pp::deref_read(self.eng, &self.mem, &p, off).map_err(perr(span))?;
                Ok(Val::Priv(s))
            }
            Target::Cast(p, i) => {
                let src = p.cast_from.and_then(Program::int_bits);
                let dst = Program::int_bits(p.ty);
                let (Some(src), Some(dst)) = (src, dst) else {
                    return Err(abort(span, "cast between non-integer types"));
                };
                let s = pp::deref_cast(self.eng, &self.mem, &p, i, src, dst).map_err(perr(span))?;
                Ok(Val::Priv(s))
            }
            Target::PrivIdx(p, i) => {
                let s = pp::index_read_private(self.eng, &self.mem, &p, &i, bits)
                    .map_err(perr(span))?;
                Ok(Val::Priv(s))
            }
        }
    }

    fn write(&mut self, t: Target, ty: &Ty, v: Val, span: Span) -> R<()> {
        let bits = self.prog.max_bits;
        match t {
            Target::At(p, off) => {
                if p.cast_from.is_some() {
                    return Err(abort(span, "write through a cast pointer"));
                }
                if p.is_null() {
                    return self.null_access(span, "write");
                }
                if p.is_public() {
                    let c = self.to_cell(v, ty);
                    return pp::store_public(self.eng, &mut self.mem, &p, off, c)
                        .map_err(perr(span));
                }
                match v {
                    Val::Ptr(q) => pp::deref_write_ptr(self.eng, &mut self.mem, &p, off, &q),
                    v => {
                        let s = self.share(&v);
                        pp::deref_write(self.eng, &mut self.mem, &p, off, &s)
                    }
                }
                .map_err(perr(span))
            }
            Target::Cast(..) => Err(abort(span, "write through a cast pointer")),
            Target::PrivIdx(p, i) => {
                let s = self.share(&v);
                pp::index_write_private(self.eng, &mut self.mem, &p, &i, &s, bits)
                    .map_err(perr(span))
            }
        }
    }

    fn address_of(&mut self, pl: &Place, ty: &Ty, span: Span) -> R<Val> {
        match self.target(pl, span)? {
            Target::At(p, off) => {
                let mut q = p.shifted(off as i64).map_err(perr(span))?;
                let (t, l) = self.shape(ty);
                q.ty = t;
                q.level = l;
                q.cast_from = None;
                Ok(Val::Ptr(q))
            }
            _ => Err(abort(
                span,
                "address of an element selected by a private or cast index",
            )),
        }
    }

    // ----- statements -------------------------------------------------------

    fn exec_block(&mut self, ss: &[Stmt]) -> R<Flow> {
        for s in ss {
            if let Flow::Ret(v) = self.exec(s)? {
                return Ok(Flow::Ret(v));
            }
        }
        Ok(Flow::Next)
    }

    fn release(&mut self, a: Address) {
        if a != NULL {
            let _ = self.mem.release(a);
        }
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
                    Some(l) => match self.eval(l)? {
                        Val::Pub(k) if k >= 1 => k as usize,
                        _ => return Err(abort(*span, "array length must be positive")),
                    },
                    None => 1,
                };
                let a = self.alloc(ty, count, false, *span)?;
                match var {
                    VarRef::Global(g) => self.globals[*g] = a,
                    VarRef::Local(l) => {
                        let f = self.frames.last_mut().unwrap();
                        let old = core::mem::replace(&mut f.slots[*l], a);
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
                    (Some(d), _) => Some(Val::Pub(d)),
                    (None, Some(e)) => Some(self.eval(e)?),
                    (None, None) => None,
                };
                if let Some(v) = v {
                    let c = self.to_cell(v, ty);
                    self.mem.write(a, c).map_err(|e| abort(*span, e))?;
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
                guard,
                dead,
                span,
                ..
            } => match self.eval(cond)? {
                Val::Pub(c) => self.exec_block(if c != 0 { then_ } else { else_ }),
                Val::Priv(c) => {
                    if *guard {
                        return Err(abort(
                            *span,
                            "public side effect under a pointer predicate that turned out private",
                        ));
                    }
                    self.private_if(&c, then_, else_, dead, *span)?;
                    Ok(Flow::Next)
                }
                _ => Err(abort(*span, "condition is not an integer")),
            },
            Stmt::Loop {
                cond,
                body,
                step,
                batched,
                span,
            } => {
                if *batched {
                    self.eng.par_begin();
                }
                let r = self.run_loop(cond.as_ref(), body, step, *batched, *span);
                if *batched {
                    self.eng.par_end();
                }
                r
            }
            Stmt::Scope(body, locals) => {
                let r = self.exec_block(body);
                for &l in locals {
                    let a = core::mem::replace(&mut self.frames.last_mut().unwrap().slots[l], NULL);
                    self.release(a);
                }
                r
            }
            Stmt::Batch(groups) => {
                self.eng.par_begin();
                let mut r = Ok(Flow::Next);
                for g in groups {
                    self.eng.par_next();
                    r = self.exec_block(g);
                    if !matches!(r, Ok(Flow::Next)) {
                        break;
                    }
                }
                self.eng.par_end();
                r
            }
            Stmt::Return(e, _) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Val::Void,
                };
                Ok(Flow::Ret(v))
            }
        }
    }

    fn run_loop(
        &mut self,
        cond: Option<&Expr>,
        body: &[Stmt],
        step: &[Stmt],
        batched: bool,
        span: Span,
    ) -> R<Flow> {
        loop {
            if let Some(c) = cond {
                match self.eval(c)? {
                    Val::Pub(0) => return Ok(Flow::Next),
                    Val::Pub(_) => {}
                    _ => return Err(abort(span, "loop condition turned out private")),
                }
            }
            if batched {
                self.eng.par_next();
            }
            if let Flow::Ret(v) = self.exec_block(body)? {
                return Ok(Flow::Ret(v));
            }
            self.exec_block(step)?;
        }
    }

    fn private_if(
        &mut self,
        c: &Shared,
        then_: &[Stmt],
        else_: &[Stmt],
        dead: &[usize],
        span: Span,
    ) -> R<()> {
        self.out.branch_bodies += 2;
        self.eng.par_begin();
        self.eng.par_next();
        self.mem.push_overlay();
        let r1 = self.exec_block(then_);
        let t_ov = self.mem.pop_overlay();
        self.eng.par_next();
        self.mem.push_overlay();
        let r2 = self.exec_block(else_);
        let e_ov = self.mem.pop_overlay();
        self.eng.par_end();
        for r in [r1, r2] {
            if let Flow::Ret(_) = r? {
                return Err(abort(span, "return under a private condition"));
            }
        }
        let skip: BTreeSet<Address> = match self.frames.last() {
            Some(f) => dead
                .iter()
                .map(|&l| f.slots[l])
                .filter(|&a| a != NULL)
                .collect(),
            None => BTreeSet::new(),
        };
        pp::merge_branches(self.eng, &mut self.mem, c, t_ov, e_ov, |a| {
            skip.contains(&a)
        })
        .map_err(perr(span))
    }

    // ----- calls --------------------------------------------------------------

    fn call(&mut self, f: usize, args: Vec<Val>, span: Span) -> R<Val> {
        if self.frames.len() >= MAX_DEPTH {
            return Err(abort(span, "call depth limit exceeded"));
        }
        let func = &self.prog.funcs[f];
        self.frames.push(Frame {
            slots: vec![NULL; func.locals.len()],
        });
        for (&slot, v) in func.params.iter().zip(args) {
            let ty = func.locals[slot].ty.clone();
            let a = self.alloc(&ty, 1, false, span)?;
            let c = self.to_cell(v, &ty);
            self.mem.write(a, c).map_err(|e| abort(span, e))?;
            self.frames.last_mut().unwrap().slots[slot] = a;
        }
        let r = self.exec_block(&func.body);
        let frame = self.frames.pop().unwrap();
        for a in frame.slots {
            self.release(a);
        }
        let ret = &self.prog.sigs[func.sig].ret;
        match r? {
            Flow::Ret(v) if !matches!(v, Val::Void) => Ok(v),
            _ => Ok(match ret {
                Ty::Void => Val::Void,
                t => self.zero_of(t),
            }),
        }
    }

    fn fn_at(&self, a: Address, span: Span) -> R<usize> {
        match self.mem.read(a) {
            Ok(Cell::Fn(f)) => Ok(f as usize),
            _ => Err(abort(
                span,
                "call through a pointer that does not hold a function",
            )),
        }
    }

    fn call_indirect(&mut self, p: PrivPtr, args: Vec<Val>, ret: &Ty, span: Span) -> R<Val> {
        let ts = match &p.tags {
            Tags::Public => {
                if p.locs[0] == NULL {
                    return Err(abort(span, "call through a null function pointer"));
                }
                let f = self.fn_at(p.locs[0], span)?;
                return self.call(f, args, span);
            }
            Tags::Private(ts) => ts.clone(),
        };
        let mut cands = Vec::new();
        for (&l, t) in p.locs.iter().zip(ts) {
            if l == NULL {
                continue;
            }
            let f = self.fn_at(l, span)?;
            if self.prog.funcs[f].public_effects {
                return Err(abort(
                    span,
                    format!(
                        "'{}' has public side effects and is called through a private pointer",
                        self.prog.funcs[f].name
                    ),
                ));
            }
            cands.push((f, t));
        }
        if cands.is_empty() {
            return Err(abort(span, "call through a null function pointer"));
        }
        self.eng.par_begin();
        let mut rets = Vec::with_capacity(cands.len());
        let mut overlays = Vec::with_capacity(cands.len());
        let mut err = None;
        for (f, _) in &cands {
            self.eng.par_next();
            self.mem.push_overlay();
            let r = self.call(*f, args.clone(), span);
            overlays.push(self.mem.pop_overlay());
            match r {
                Ok(v) => rets.push(v),
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        self.eng.par_end();
        if let Some(e) = err {
            return Err(e);
        }
        let tags: Vec<Shared> = cands.iter().map(|(_, t)| t.clone()).collect();
        self.eng.par_begin();
        self.eng.par_next();
        pp::merge_candidates(self.eng, &mut self.mem, &tags, overlays).map_err(perr(span))?;
        let out = if matches!(ret, Ty::Void) {
            Val::Void
        } else {
            self.eng.par_next();
            let mut cells = rets.into_iter().map(|v| self.to_cell(v, ret));
            let base = cells.next().unwrap();
            let alts = tags[1..].iter().cloned().zip(cells).collect();
            let merged =
                pp::merge_cells(self.eng, vec![MergeItem { base, alts }]).map_err(perr(span))?;
            Self::from_cell(merged.into_iter().next().unwrap())
        };
        self.eng.par_end();
        Ok(out)
    }

    // ----- expressions --------------------------------------------------------

    fn eval(&mut self, e: &Expr) -> R<Val> {
        let span = e.span;
        let f = self.field;
        match &e.kind {
            ExprKind::Const(v) => Ok(Val::Pub(*v)),
            ExprKind::Null => Ok(Val::Ptr(self.null_of(&e.ty))),
            ExprKind::Load(pl) => {
                let t = self.target(pl, span)?;
                self.read(t, &pl.ty, span)
            }
            ExprKind::AddrOf(pl) | ExprKind::Decay(pl) => self.address_of(pl, &e.ty, span),
            ExprKind::FnAddr(i) => Ok(Val::Ptr(PrivPtr::to(
                self.fn_base + *i as Address,
                FN_TYPE,
                1,
            ))),
            ExprKind::Neg(a) => Ok(match self.eval(a)? {
                Val::Pub(x) => Val::Pub(x.wrapping_neg()),
                v => Val::Priv(self.eng.neg(&self.share(&v))),
            }),
            ExprKind::BitNot(a) => match self.eval(a)? {
                Val::Pub(x) => Ok(Val::Pub(!x)),
                _ => Err(abort(span, "'~' on a private value")),
            },
            ExprKind::Not(a) => Ok(match self.eval(a)? {
                Val::Pub(x) => Val::Pub((x == 0) as i128),
                v => Val::Priv(self.eng.one_minus(&self.share(&v))),
            }),
            ExprKind::Arith(op, a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                self.arith(*op, x, y, span)
            }
            ExprKind::Cmp(op, a, b, bits) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                self.compare(*op, x, y, *bits, span)
            }
            ExprKind::And(a, b) => match self.eval(a)? {
                Val::Pub(0) => Ok(Val::Pub(0)),
                Val::Pub(_) => self.eval(b),
                x => match self.eval(b)? {
                    Val::Pub(0) => Ok(Val::Pub(0)),
                    Val::Pub(_) => Ok(x),
                    y => {
                        let r = self
                            .eng
                            .mul(&self.share(&x), &self.share(&y))
                            .map_err(|e| abort(span, e))?;
                        Ok(Val::Priv(r))
                    }
                },
            },
            ExprKind::Or(a, b) => match self.eval(a)? {
                Val::Pub(0) => self.eval(b),
                Val::Pub(_) => Ok(Val::Pub(1)),
                x => match self.eval(b)? {
                    Val::Pub(0) => Ok(x),
                    Val::Pub(_) => Ok(Val::Pub(1)),
                    y => {
                        let (sx, sy) = (self.share(&x), self.share(&y));
                        let r = mpcops::or(self.eng, &sx, &sy).map_err(|e| abort(span, e))?;
                        Ok(Val::Priv(r))
                    }
                },
            },
            ExprKind::Truth(a, bits) => match self.eval(a)? {
                Val::Pub(x) => Ok(Val::Pub((x != 0) as i128)),
                v => {
                    let s = self.share(&v);
                    let z = self.eng.zero();
                    let eq =
                        mpcops::eq_test(self.eng, &s, &z, *bits).map_err(|e| abort(span, e))?;
                    Ok(Val::Priv(self.eng.one_minus(&eq)))
                }
            },
            ExprKind::PtrEq(eq, a, b) => {
                let p = self.ptr(a)?;
                let q = self.ptr(b)?;
                match pp::ptr_pred_equal(self.eng, &p, &q).map_err(perr(span))? {
                    Pred::Public(r) => Ok(Val::Pub((r == *eq) as i128)),
                    Pred::Private(s) => Ok(Val::Priv(if *eq { s } else { self.eng.one_minus(&s) })),
                }
            }
            ExprKind::PtrAdd(p, k, elem) => {
                let p = self.ptr(p)?;
                match self.eval(k)? {
                    Val::Pub(k) => Ok(Val::Ptr(
                        pp::ptr_offset(&p, k as i64, *elem).map_err(perr(span))?,
                    )),
                    _ => Err(abort(span, "private pointer offset")),
                }
            }
            ExprKind::PtrDiff(a, b, elem) => {
                let p = self.ptr(a)?;
                let q = self.ptr(b)?;
                Ok(match pp::ptr_diff(self.eng, &p, &q, *elem) {
                    Num::Public(v) => Val::Pub(v),
                    Num::Private(s) => Val::Priv(s),
                })
            }
            ExprKind::CastPtr(a, to) => {
                let p = self.ptr(a)?;
                Ok(Val::Ptr(pp::cast_ptr(&p, *to)))
            }
            ExprKind::Call(callee, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                match callee {
                    Callee::Direct(fi) => self.call(*fi, vals, span),
                    Callee::Indirect(fe) => {
                        let p = self.ptr(fe)?;
                        self.call_indirect(p, vals, &e.ty, span)
                    }
                }
            }
            ExprKind::Pmalloc(n, ty) => {
                let count = match self.eval(n)? {
                    Val::Pub(k) if k >= 1 => k as usize,
                    _ => return Err(abort(span, "pmalloc count must be positive")),
                };
                let a = self.alloc(ty, count, true, span)?;
                let (t, l) = self.shape(&e.ty);
                Ok(Val::Ptr(PrivPtr::to(a, t, l)))
            }
            ExprKind::Pfree(p) => {
                let p = self.ptr(p)?;
                pp::dealloc(self.eng, &mut self.mem, &p).map_err(perr(span))?;
                Ok(Val::Void)
            }
            ExprKind::Assign(pl, v) => {
                let v = self.eval(v)?;
                let t = self.target(pl, span)?;
                self.write(t, &pl.ty, v.clone(), span)?;
                Ok(v)
            }
            ExprKind::Input {
                var,
                name,
                elem,
                count,
            } => {
                let n = match count {
                    Some(c) => match self.eval(c)? {
                        Val::Pub(k) if k >= 0 => k as usize,
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
                    let c = match elem {
                        Ty::Int { private: true, .. } => Cell::Priv(self.eng.input(f.from_i128(v))),
                        _ => Cell::Pub(v),
                    };
                    self.mem.write(base + j as Address, c).map_err(|_| {
                        abort(span, format!("input '{name}' overflows its variable"))
                    })?;
                }
                Ok(Val::Void)
            }
            ExprKind::Output { name, value, count } => {
                let vals = match count {
                    None => vec![self.eval(value)?],
                    Some(c) => {
                        let k = match self.eval(c)? {
                            Val::Pub(k) if k >= 0 => k,
                            _ => {
                                return Err(abort(
                                    span,
                                    "output count must be a non-negative public integer",
                                ))
                            }
                        };
                        let p = self.ptr(value)?;
                        let elem = value.ty.pointee().cloned().unwrap_or(Ty::int(false, 32));
                        let mut vs = Vec::with_capacity(k as usize);
                        for j in 0..k {
                            let q = p.shifted(j as i64).map_err(perr(span))?;
                            vs.push(self.read(Target::At(q, 0), &elem, span)?);
                        }
                        vs
                    }
                };
                let privs: Vec<Shared> = vals
                    .iter()
                    .filter_map(|v| match v {
                        Val::Priv(s) => Some(s.clone()),
                        _ => None,
                    })
                    .collect();
                let opened = if privs.is_empty() {
                    Vec::new()
                } else {
                    self.eng.open_many(&privs).map_err(|e| abort(span, e))?
                };
                let mut it = opened.into_iter();
                let out = vals
                    .iter()
                    .map(|v| match v {
                        Val::Pub(x) => *x,
                        Val::Priv(_) => f.to_signed(it.next().unwrap()),
                        _ => 0,
                    })
                    .collect();
                self.out.outputs.push((name.clone(), out));
                Ok(Val::Void)
            }
            ExprKind::Phase(id) => {
                let st = self.eng.stats();
                self.out.phases.push(Phase {
                    id: *id,
                    interactive_ops: st.interactive_ops,
                    rounds: st.rounds,
                    bytes: st.total_bytes(),
                });
                Ok(Val::Void)
            }
        }
    }

    fn arith(&mut self, op: ArithOp, x: Val, y: Val, span: Span) -> R<Val> {
        if let (Val::Pub(a), Val::Pub(b)) = (&x, &y) {
            return public_arith(op, *a, *b)
                .map(Val::Pub)
                .ok_or_else(|| abort(span, "division by zero"));
        }
        let f = self.field;
        Ok(Val::Priv(match op {
            ArithOp::Add => self.eng.add(&self.share(&x), &self.share(&y)),
            ArithOp::Sub => self.eng.sub(&self.share(&x), &self.share(&y)),
            ArithOp::Mul => match (&x, &y) {
                (Val::Pub(k), v) | (v, Val::Pub(k)) => {
                    self.eng.scale(f.from_i128(*k), &self.share(v))
                }
                _ => {
                    let (a, b) = (self.share(&x), self.share(&y));
                    self.eng.mul(&a, &b).map_err(|e| abort(span, e))?
                }
            },
            _ => return Err(abort(span, "operator needs public operands")),
        }))
    }

    fn compare(&mut self, op: CmpOp, x: Val, y: Val, bits: u32, span: Span) -> R<Val> {
        if let (Val::Pub(a), Val::Pub(b)) = (&x, &y) {
            return Ok(Val::Pub(public_cmp(op, *a, *b) as i128));
        }
        let (a, b) = (self.share(&x), self.share(&y));
        let m = |e| abort(span, e);
        let r = match op {
            CmpOp::Eq => mpcops::eq_test(self.eng, &a, &b, bits).map_err(m)?,
            CmpOp::Ne => {
                let t = mpcops::eq_test(self.eng, &a, &b, bits).map_err(m)?;
                self.eng.one_minus(&t)
            }
            CmpOp::Lt => mpcops::lt_test(self.eng, &a, &b, bits).map_err(m)?,
            CmpOp::Gt => mpcops::lt_test(self.eng, &b, &a, bits).map_err(m)?,
            CmpOp::Le => {
                let t = mpcops::lt_test(self.eng, &b, &a, bits).map_err(m)?;
                self.eng.one_minus(&t)
            }
            CmpOp::Ge => {
                let t = mpcops::lt_test(self.eng, &a, &b, bits).map_err(m)?;
                self.eng.one_minus(&t)
            }
        };
        Ok(Val::Priv(r))
    }
}

/// Clear arithmetic on public integers; `None` on division by zero.
pub(crate) fn public_arith(op: ArithOp, a: i128, b: i128) -> Option<i128> {
    Some(match op {
        ArithOp::Add => a.wrapping_add(b),
        ArithOp::Sub => a.wrapping_sub(b),
        ArithOp::Mul => a.wrapping_mul(b),
        ArithOp::Div => {
            if b == 0 {
                return None;
            }
            a.wrapping_div(b)
        }
        ArithOp::Mod => {
            if b == 0 {
                return None;
            }
            a.wrapping_rem(b)
        }
        ArithOp::Shl => a.wrapping_shl(b as u32),
        ArithOp::Shr => a.wrapping_shr(b as u32),
        ArithOp::BitAnd => a & b,
        ArithOp::BitOr => a | b,
        ArithOp::BitXor => a ^ b,
    })
}

pub(crate) fn public_cmp(op: CmpOp, a: i128, b: i128) -> bool {
    match op {
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
    }
}

/// Exactly `n` input values for `name`, range-checked against `elem`.
pub(crate) fn take_inputs(inputs: &Inputs, name: &str, n: usize, elem: &Ty) -> R<Vec<i128>> {
    let vals = inputs
        .get(name)
        .ok_or_else(|| RunError::Input(format!("no input values for '{name}'")))?;
    if vals.len() != n {
        return Err(RunError::Input(format!(
            "'{name}' needs {n} values, {} given",
            vals.len()
        )));
    }
    let bits = elem.bits();
    if let Ty::Int { private: true, .. } = elem {
        let lim = 1i128 << (bits - 1);
        if let Some(v) = vals[..n].iter().find(|&&v| v < -lim || v >= lim) {
            return Err(RunError::Input(format!(
                "value {v} for '{name}' does not fit in {bits} signed bits"
            )));
        }
    }
    Ok(vals[..n].to_vec())
}
