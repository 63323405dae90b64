//! Name resolution, typing, and the public/private interaction rules.
//!
//! Rules, each reported with its letter:
//!
//! * (a) the address of public data may not flow into a pointer to private
//!   data;
//! * (b) pointers to public data may not be updated under a private
//!   condition;
//! * (c) `pmalloc` and `pfree` may not run under a private condition;
//! * (d) a pointer to a struct with public fields is a pointer to public
//!   data and follows (b);
//! * (e) no other public side effects (public writes, I/O, returns, calls to
//!   functions with such effects) under a private condition; when the
//!   condition is a pointer predicate whose privacy is only known at run
//!   time, a run-time guard is emitted instead;
//! * (f) loop conditions must be public;
//! * (g) pointer arithmetic requires the arithmetic option.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use super::ast::{self, BinOp, Qual, TypeSpec, UnOp};
use super::ir::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    /// Name, type, or flow errors outside the lettered rules.
    Type,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::A => "a",
            Rule::B => "b",
            Rule::C => "c",
            Rule::D => "d",
            Rule::E => "e",
            Rule::F => "f",
            Rule::G => "g",
            Rule::Type => "type",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub rule: Rule,
    pub span: Span,
    pub msg: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            Rule::Type => write!(f, "error at {}: {}", self.span, self.msg),
            r => write!(f, "rule ({}) at {}: {}", r.id(), self.span, self.msg),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub ptr_arith: bool,
    /// Width of `int` without an explicit `<bits>`.
    pub default_bits: u32,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            ptr_arith: false,
            default_bits: 32,
        }
    }
}

type R<T> = Result<T, ()>;

#[derive(Debug, Clone)]
struct PFrame {
    kind: CondKind,
    first_slot: usize,
    if_id: usize,
}

#[derive(Debug, Clone)]
struct Pending {
    /// Direct callee, or every address-taken function with this signature.
    callee: Result<usize, usize>,
    span: Span,
    frames: Vec<PFrame>,
}

struct Checker<'a> {
    opts: &'a CheckOptions,
    structs: Vec<StructDef>,
    struct_ix: BTreeMap<String, usize>,
    sigs: Vec<Sig>,
    globals: Vec<VarInfo>,
    global_ix: BTreeMap<String, usize>,
    funcs: Vec<Func>,
    func_ix: BTreeMap<String, usize>,
    errors: Vec<Rejection>,
    // Per function.
    cur: Option<usize>,
    locals: Vec<VarInfo>,
    scopes: Vec<Vec<(String, usize)>>,
    addr_taken: BTreeSet<usize>,
    pstack: Vec<PFrame>,
    // Whole program.
    next_if: usize,
    guards: BTreeSet<usize>,
    pending: Vec<Pending>,
    direct_effects: Vec<bool>,
    callees: Vec<BTreeSet<usize>>,
    indirect_sigs: Vec<BTreeSet<usize>>,
    fn_addr_taken: BTreeSet<usize>,
    init_stmts: Vec<Stmt>,
    max_bits: u32,
    needs_cmp: bool,
}

pub fn check(prog: &ast::Program, opts: &CheckOptions) -> Result<Program, Vec<Rejection>> {
    let mut c = Checker {
        opts,
        structs: Vec::new(),
        struct_ix: BTreeMap::new(),
        sigs: Vec::new(),
        globals: Vec::new(),
        global_ix: BTreeMap::new(),
        funcs: Vec::new(),
        func_ix: BTreeMap::new(),
        errors: Vec::new(),
        cur: None,
        locals: Vec::new(),
        scopes: Vec::new(),
        addr_taken: BTreeSet::new(),
        pstack: Vec::new(),
        next_if: 0,
        guards: BTreeSet::new(),
        pending: Vec::new(),
        direct_effects: Vec::new(),
        callees: Vec::new(),
        indirect_sigs: Vec::new(),
        fn_addr_taken: BTreeSet::new(),
        init_stmts: Vec::new(),
        max_bits: 1,
        needs_cmp: false,
    };
    c.run(prog);
    if !c.errors.is_empty() {
        c.errors.sort_by_key(|e| (e.span.line, e.span.col));
        return Err(c.errors);
    }
    let main = c.func_ix["main"];
    Ok(Program {
        structs: c.structs,
        sigs: c.sigs,
        globals: c.globals,
        init: c.init_stmts,
        funcs: c.funcs,
        main,
        max_bits: c.max_bits,
        needs_comparison: c.needs_cmp,
    })
}

fn mk(kind: ExprKind, ty: Ty, span: Span) -> Expr {
    Expr { kind, ty, span }
}

fn is_boolean(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Cmp(..)
            | ExprKind::And(..)
            | ExprKind::Or(..)
            | ExprKind::Not(..)
            | ExprKind::Truth(..)
            | ExprKind::PtrEq(..)
    )
}

/// Whether a condition is public, private, or decided at run time.
fn status(e: &Expr) -> CondKind {
    fn join(a: CondKind, b: CondKind) -> CondKind {
        use CondKind::*;
        match (a, b) {
            (Private, _) | (_, Private) => Private,
            (Dynamic, _) | (_, Dynamic) => Dynamic,
            _ => Public,
        }
    }
    match &e.kind {
        ExprKind::PtrEq(..) => CondKind::Dynamic,
        ExprKind::And(a, b) | ExprKind::Or(a, b) => join(status(a), status(b)),
        ExprKind::Not(a) => status(a),
        _ if e.ty.is_private_int() => CondKind::Private,
        _ => CondKind::Public,
    }
}

impl Checker<'_> {
    fn fail<T>(&mut self, span: Span, msg: impl Into<String>) -> R<T> {
        self.errors.push(Rejection {
            rule: Rule::Type,
            span,
            msg: msg.into(),
        });
        Err(())
    }

    fn reject(&mut self, rule: Rule, span: Span, msg: impl Into<String>) {
        self.errors.push(Rejection {
            rule,
            span,
            msg: msg.into(),
        });
    }

    /// A public side effect under the current private conditions.
    fn violation(&mut self, rule: Rule, span: Span, msg: &str) {
        let frames = self.pstack.clone();
        self.violation_in(&frames, rule, span, msg);
    }

    fn violation_in(&mut self, frames: &[PFrame], rule: Rule, span: Span, msg: &str) {
        if frames.is_empty() {
            return;
        }
        if frames.iter().any(|f| f.kind == CondKind::Private) {
            self.reject(rule, span, format!("{msg} under a private condition"));
        } else {
            self.guards.extend(frames.iter().map(|f| f.if_id));
        }
    }

    fn effect(&mut self) {
        if let Some(f) = self.cur {
            self.direct_effects[f] = true;
        }
    }

    // ----- types --------------------------------------------------------

    fn base_ty(&mut self, q: Option<Qual>, spec: &TypeSpec, span: Span) -> R<Ty> {
        match spec {
            TypeSpec::Int(b) => {
                let bits = b.unwrap_or(self.opts.default_bits);
                let private = q != Some(Qual::Public);
                if private {
                    self.max_bits = self.max_bits.max(bits);
                }
                Ok(Ty::int(private, bits))
            }
            TypeSpec::Void => Ok(Ty::Void),
            TypeSpec::Struct(n) => match self.struct_ix.get(n) {
                Some(&s) => Ok(Ty::Struct(s)),
                None => self.fail(span, format!("unknown struct '{n}'")),
            },
        }
    }

    fn wrap(mut t: Ty, stars: u32) -> Ty {
        for _ in 0..stars {
            t = Ty::Ptr(Box::new(t));
        }
        t
    }

    fn sig_id(&mut self, sig: Sig) -> usize {
        match self.sigs.iter().position(|s| *s == sig) {
            Some(i) => i,
            None => {
                self.sigs.push(sig);
                self.sigs.len() - 1
            }
        }
    }

    fn param_ty(&mut self, p: &ast::Param) -> R<Ty> {
        let base = self.base_ty(p.qual, &p.spec, p.span)?;
        let t = Self::wrap(base, p.stars);
        match &p.fnptr {
            Some(ps) => {
                let params = ps.iter().map(|q| self.param_ty(q)).collect::<R<Vec<_>>>()?;
                let s = self.sig_id(Sig { params, ret: t });
                Ok(Ty::Ptr(Box::new(Ty::Fn(s))))
            }
            None if t == Ty::Void && !p.name.is_empty() => {
                self.fail(p.span, "parameter of type void")
            }
            None => Ok(t),
        }
    }

    fn decl_ty(&mut self, q: Option<Qual>, spec: &TypeSpec, d: &ast::Declarator) -> R<Ty> {
        let base = self.base_ty(q, spec, d.span)?;
        let t = Self::wrap(base, d.stars);
        match &d.fnptr {
            Some(ps) => {
                let params = ps.iter().map(|p| self.param_ty(p)).collect::<R<Vec<_>>>()?;
                let s = self.sig_id(Sig { params, ret: t });
                Ok(Ty::Ptr(Box::new(Ty::Fn(s))))
            }
            None if t == Ty::Void => {
                self.fail(d.span, format!("variable '{}' declared void", d.name))
            }
            None => Ok(t),
        }
    }

    fn type_name(&mut self, tn: &ast::TypeName) -> R<Ty> {
        let b = self.base_ty(tn.qual, &tn.spec, tn.span)?;
        Ok(Self::wrap(b, tn.stars))
    }

    /// Pointers to values of this type may hold several candidate locations.
    fn ptr_private(&self, t: &Ty) -> bool {
        fn go(c: &Checker<'_>, t: &Ty, seen: &mut BTreeSet<usize>) -> bool {
            match t {
                Ty::Int { private, .. } => *private,
                Ty::Ptr(u) => go(c, u, seen),
                Ty::Fn(_) => true,
                Ty::Struct(s) => {
                    if !seen.insert(*s) {
                        return true;
                    }
                    c.structs[*s].fields.iter().all(|f| go(c, &f.ty, seen))
                }
                Ty::Array(u) => go(c, u, seen),
                Ty::Void | Ty::Null => false,
            }
        }
        go(self, t, &mut BTreeSet::new())
    }

    /// The rule broken by writing a value of type `t` under a private
    /// condition, if any.
    fn public_kind(&self, t: &Ty) -> Option<Rule> {
        match t {
            Ty::Int { private: false, .. } => Some(Rule::E),
            Ty::Ptr(p) if !self.ptr_private(p) => Some(if matches!(**p, Ty::Struct(_)) {
                Rule::D
            } else {
                Rule::B
            }),
            _ => None,
        }
    }

    // ----- program ------------------------------------------------------

    fn run(&mut self, prog: &ast::Program) {
        // Struct names first so fields may refer to any struct.
        for it in &prog.items {
            if let ast::Item::Struct { name, span, .. } = it {
                if self.struct_ix.contains_key(name) {
                    self.reject(Rule::Type, *span, format!("struct '{name}' defined twice"));
                    continue;
                }
                self.struct_ix.insert(name.clone(), self.structs.len());
                self.structs.push(StructDef {
                    name: name.clone(),
                    fields: Vec::new(),
                    size: 0,
                    all_private: true,
                });
            }
        }
        for it in &prog.items {
            if let ast::Item::Struct { name, fields, .. } = it {
                let s = self.struct_ix[name];
                let mut out = Vec::new();
                for (q, spec, d) in fields {
                    if d.array.is_some() || d.init.is_some() {
                        let _ = self.fail::<()>(
                            d.span,
                            "struct fields must be scalars without initializers",
                        );
                        continue;
                    }
                    if let Ok(ty) = self.decl_ty(*q, spec, d) {
                        out.push(FieldDef {
                            name: d.name.clone(),
                            ty,
                            offset: 0,
                        });
                    }
                }
                self.structs[s].fields = out;
            }
        }
        for s in 0..self.structs.len() {
            let mut stack = Vec::new();
            if self.struct_size(s, &mut stack).is_err() {
                let n = self.structs[s].name.clone();
                self.reject(
                    Rule::Type,
                    Span::default(),
                    format!("struct '{n}' contains itself"),
                );
                return;
            }
        }
        for s in 0..self.structs.len() {
            let ap = self.ptr_private(&Ty::Struct(s));
            self.structs[s].all_private = ap;
        }
        // Function signatures, so that calls may precede definitions.
        for it in &prog.items {
            if let ast::Item::Func(f) = it {
                let Ok(ret) = self
                    .base_ty(f.qual, &f.ret, f.span)
                    .map(|b| Self::wrap(b, f.ret_stars))
                else {
                    continue;
                };
                let params = match f
                    .params
                    .iter()
                    .map(|p| self.param_ty(p))
                    .collect::<R<Vec<_>>>()
                {
                    Ok(p) => p,
                    Err(()) => continue,
                };
                if self.func_ix.contains_key(&f.name) {
                    self.reject(
                        Rule::Type,
                        f.span,
                        format!("function '{}' defined twice", f.name),
                    );
                    continue;
                }
                let sig = self.sig_id(Sig { params, ret });
                self.func_ix.insert(f.name.clone(), self.funcs.len());
                self.funcs.push(Func {
                    name: f.name.clone(),
                    sig,
                    params: Vec::new(),
                    locals: Vec::new(),
                    body: Vec::new(),
                    public_effects: false,
                    span: f.span,
                });
                self.direct_effects.push(false);
                self.callees.push(BTreeSet::new());
                self.indirect_sigs.push(BTreeSet::new());
            }
        }
        for it in &prog.items {
            match it {
                ast::Item::Global(q, spec, ds) => {
                    for d in ds {
                        let _ = self.global_decl(*q, spec, d);
                    }
                }
                ast::Item::Func(f) => {
                    if let Some(&ix) = self.func_ix.get(&f.name) {
                        if self.funcs[ix].span == f.span {
                            self.function(ix, f);
                        }
                    }
                }
                ast::Item::Struct { .. } => {}
            }
        }
        if !self.func_ix.contains_key("main") {
            self.reject(Rule::Type, Span::default(), "no main function");
        }
        self.resolve_effects();
        let guards = core::mem::take(&mut self.guards);
        for f in self.funcs.iter_mut() {
            set_guards(&mut f.body, &guards);
        }
    }

    fn struct_size(&mut self, s: usize, stack: &mut Vec<usize>) -> R<usize> {
        if stack.contains(&s) {
            return Err(());
        }
        if self.structs[s].size > 0 {
            return Ok(self.structs[s].size);
        }
        stack.push(s);
        let mut off = 0u64;
        for i in 0..self.structs[s].fields.len() {
            self.structs[s].fields[i].offset = off;
            let sz = match self.structs[s].fields[i].ty.clone() {
                Ty::Struct(t) => self.struct_size(t, stack)?,
                _ => 1,
            };
            off += sz as u64;
        }
        stack.pop();
        self.structs[s].size = off.max(1) as usize;
        Ok(self.structs[s].size)
    }

    fn resolve_effects(&mut self) {
        let n = self.funcs.len();
        let mut eff = self.direct_effects.clone();
        loop {
            let mut changed = false;
            for f in 0..n {
                if eff[f] {
                    continue;
                }
                let via_direct = self.callees[f].iter().any(|&g| eff[g]);
                let via_ptr = self.indirect_sigs[f].iter().any(|&s| {
                    self.fn_addr_taken
                        .iter()
                        .any(|&g| self.funcs[g].sig == s && eff[g])
                });
                if via_direct || via_ptr {
                    eff[f] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (f, e) in eff.iter().enumerate() {
            self.funcs[f].public_effects = *e;
        }
        let pending = core::mem::take(&mut self.pending);
        for p in pending {
            let bad = match p.callee {
                Ok(f) => eff[f].then(|| self.funcs[f].name.clone()),
                Err(sig) => self
                    .fn_addr_taken
                    .iter()
                    .find(|&&g| self.funcs[g].sig == sig && eff[g])
                    .map(|&g| self.funcs[g].name.clone()),
            };
            if let Some(name) = bad {
                let msg = format!("call to '{name}', which has public side effects,");
                self.violation_in(&p.frames, Rule::E, p.span, &msg);
            }
        }
    }

    fn global_decl(&mut self, q: Option<Qual>, spec: &TypeSpec, d: &ast::Declarator) -> R<()> {
        let ty = self.decl_ty(q, spec, d)?;
        if self.global_ix.contains_key(&d.name) {
            return self.fail(d.span, format!("global '{}' declared twice", d.name));
        }
        let (vty, len, init) = self.decl_parts(ty, d)?;
        let g = self.globals.len();
        self.globals.push(VarInfo {
            name: d.name.clone(),
            ty: vty.clone(),
        });
        self.global_ix.insert(d.name.clone(), g);
        self.init_stmts.push(Stmt::Decl {
            var: VarRef::Global(g),
            ty: vty,
            len,
            init,
            span: d.span,
        });
        Ok(())
    }

    /// Variable type, array length, and converted initializer.
    fn decl_parts(&mut self, ty: Ty, d: &ast::Declarator) -> R<(Ty, Option<Expr>, Option<Expr>)> {
        let len = match &d.array {
            Some(e) => {
                let l = self.expr(e)?;
                if l.ty != Ty::int(false, l.ty.bits()) {
                    return self.fail(e.span, "array length must be a public integer");
                }
                Some(l)
            }
            None => None,
        };
        let init = match &d.init {
            Some(e) if len.is_none() => {
                if matches!(ty, Ty::Struct(_)) {
                    return self.fail(e.span, "struct initializers are not supported");
                }
                let v = self.expr(e)?;
                Some(self.coerce(v, &ty, e.span)?)
            }
            Some(e) => return self.fail(e.span, "array initializers are not supported"),
            None => None,
        };
        let vty = if len.is_some() {
            Ty::Array(Box::new(ty))
        } else {
            ty
        };
        Ok((vty, len, init))
    }

    fn function(&mut self, ix: usize, f: &ast::FuncDef) {
        self.cur = Some(ix);
        self.locals.clear();
        self.scopes = vec![Vec::new()];
        self.addr_taken.clear();
        self.pstack.clear();
        let sig = self.sigs[self.funcs[ix].sig].clone();
        let mut params = Vec::new();
        for (p, ty) in f.params.iter().zip(sig.params.iter()) {
            if p.name.is_empty() {
                self.reject(Rule::Type, p.span, "parameter without a name");
                continue;
            }
            params.push(self.declare(&p.name, ty.clone()));
        }
        let body = self.stmts(&f.body);
        let mut body = body;
        let eligible: BTreeSet<usize> = self
            .locals
            .iter()
            .enumerate()
            .filter(|(i, v)| {
                !self.addr_taken.contains(i) && matches!(v.ty, Ty::Int { .. } | Ty::Ptr(_))
            })
            .map(|(i, _)| i)
            .collect();
        annotate_dead(&mut body, &BTreeSet::new(), &eligible);
        let func = &mut self.funcs[ix];
        func.params = params;
        func.locals = core::mem::take(&mut self.locals);
        func.body = body;
        self.cur = None;
        self.scopes.clear();
    }

    fn declare(&mut self, name: &str, ty: Ty) -> usize {
        let slot = self.locals.len();
        self.locals.push(VarInfo {
            name: name.to_string(),
            ty,
        });
        self.scopes
            .last_mut()
            .unwrap()
            .push((name.to_string(), slot));
        slot
    }

    fn lookup(&self, name: &str) -> Option<(VarRef, Ty)> {
        for scope in self.scopes.iter().rev() {
            if let Some((_, s)) = scope.iter().rev().find(|(n, _)| n == name) {
                return Some((VarRef::Local(*s), self.locals[*s].ty.clone()));
            }
        }
        self.global_ix
            .get(name)
            .map(|&g| (VarRef::Global(g), self.globals[g].ty.clone()))
    }

    // ----- statements ---------------------------------------------------

    fn stmts(&mut self, ss: &[ast::Stmt]) -> Vec<Stmt> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < ss.len() {
            if let ast::Stmt::Batch(..) = ss[i] {
                let mut groups = Vec::new();
                while let Some(ast::Stmt::Batch(body, _)) = ss.get(i) {
                    groups.push(vec![self.scoped(|c| c.stmts(body))]);
                    i += 1;
                }
                out.push(Stmt::Batch(groups));
                continue;
            }
            if let Ok(mut s) = self.stmt(&ss[i]) {
                out.append(&mut s);
            }
            i += 1;
        }
        out
    }

    fn scoped(&mut self, f: impl FnOnce(&mut Self) -> Vec<Stmt>) -> Stmt {
        self.scopes.push(Vec::new());
        let body = f(self);
        let scope = self.scopes.pop().unwrap();
        Stmt::Scope(body, scope.into_iter().map(|(_, s)| s).collect())
    }

    fn scoped_stmt(&mut self, s: &ast::Stmt) -> Vec<Stmt> {
        match s {
            ast::Stmt::Block(b) => vec![self.scoped(|c| c.stmts(b))],
            other => vec![self.scoped(|c| c.stmts(core::slice::from_ref(other)))],
        }
    }

    fn stmt(&mut self, s: &ast::Stmt) -> R<Vec<Stmt>> {
        match s {
            ast::Stmt::Empty => Ok(Vec::new()),
            ast::Stmt::Decl(q, spec, ds) => {
                if self.cur.is_none() {
                    return self.fail(Span::default(), "declaration outside a function");
                }
                let mut out = Vec::new();
                for d in ds {
                    let ty = self.decl_ty(*q, spec, d)?;
                    let (vty, len, init) = self.decl_parts(ty, d)?;
                    let slot = self.declare(&d.name, vty.clone());
                    out.push(Stmt::Decl {
                        var: VarRef::Local(slot),
                        ty: vty,
                        len,
                        init,
                        span: d.span,
                    });
                }
                Ok(out)
            }
            ast::Stmt::Expr(e) => Ok(vec![Stmt::Expr(self.expr(e)?)]),
            ast::Stmt::Block(b) => Ok(vec![self.scoped(|c| c.stmts(b))]),
            ast::Stmt::Batch(b, _) => {
                Ok(vec![Stmt::Batch(vec![vec![self.scoped(|c| c.stmts(b))]])])
            }
            ast::Stmt::If(c, t, e, span) => {
                let cond = self.cond_expr(c)?;
                let kind = status(&cond);
                let id = self.next_if;
                self.next_if += 1;
                if kind != CondKind::Public {
                    self.pstack.push(PFrame {
                        kind,
                        first_slot: self.locals.len(),
                        if_id: id,
                    });
                }
                let then_ = self.scoped_stmt(t);
                let else_ = match e {
                    Some(e) => self.scoped_stmt(e),
                    None => Vec::new(),
                };
                if kind != CondKind::Public {
                    self.pstack.pop();
                }
                Ok(vec![Stmt::If {
                    cond,
                    then_,
                    else_,
                    kind,
                    guard: false,
                    dead: Vec::new(),
                    id,
                    span: *span,
                }])
            }
            ast::Stmt::While(c, body, span) => {
                let cond = self.loop_cond(c)?;
                let body = self.scoped_stmt(body);
                Ok(vec![Stmt::Loop {
                    cond: Some(cond),
                    body,
                    step: Vec::new(),
                    batched: false,
                    span: *span,
                }])
            }
            ast::Stmt::For {
                init,
                cond,
                step,
                body,
                span,
            } => {
                let span = *span;
                let s = self.scoped(|c| {
                    let mut out = Vec::new();
                    if let Some(i) = init {
                        if let Ok(mut v) = c.stmt(i) {
                            out.append(&mut v);
                        }
                    }
                    let cond = match cond {
                        Some(e) => match c.loop_cond(e) {
                            Ok(x) => Some(x),
                            Err(()) => return out,
                        },
                        None => None,
                    };
                    let step = match step {
                        Some(e) => match c.expr(e) {
                            Ok(x) => vec![Stmt::Expr(x)],
                            Err(()) => return out,
                        },
                        None => Vec::new(),
                    };
                    let (body, batched) = match &**body {
                        ast::Stmt::Batch(b, _) => (vec![c.scoped(|c| c.stmts(b))], true),
                        other => (c.scoped_stmt(other), false),
                    };
                    out.push(Stmt::Loop {
                        cond,
                        body,
                        step,
                        batched,
                        span,
                    });
                    out
                });
                Ok(vec![s])
            }
            ast::Stmt::Return(e, span) => {
                self.violation(Rule::E, *span, "return");
                let f = self.cur.unwrap();
                let ret = self.sigs[self.funcs[f].sig].ret.clone();
                let v = match (e, &ret) {
                    (None, _) => None,
                    (Some(e), Ty::Void) => {
                        // `return 0;` in a void function is tolerated.
                        let _ = self.expr(e)?;
                        None
                    }
                    (Some(e), t) => {
                        let v = self.expr(e)?;
                        Some(self.coerce(v, t, e.span)?)
                    }
                };
                Ok(vec![Stmt::Return(v, *span)])
            }
        }
    }

    fn loop_cond(&mut self, c: &ast::Expr) -> R<Expr> {
        let cond = self.cond_expr(c)?;
        if status(&cond) == CondKind::Private {
            self.reject(Rule::F, c.span, "loop condition depends on private data");
        }
        Ok(cond)
    }

    fn cond_expr(&mut self, c: &ast::Expr) -> R<Expr> {
        let e = self.expr(c)?;
        self.to_bool(e)
    }

    fn to_bool(&mut self, e: Expr) -> R<Expr> {
        if is_boolean(&e) {
            return Ok(e);
        }
        let span = e.span;
        match &e.ty {
            Ty::Int { private, bits } => {
                let (p, b) = (*private, *bits);
                if p {
                    self.needs_cmp = true;
                }
                Ok(mk(ExprKind::Truth(Box::new(e), b), Ty::int(p, 2), span))
            }
            Ty::Ptr(_) => {
                let p = self.ptr_private(e.ty.pointee().unwrap());
                let null = mk(ExprKind::Null, e.ty.clone(), span);
                Ok(mk(
                    ExprKind::PtrEq(false, Box::new(e), Box::new(null)),
                    Ty::int(p, 2),
                    span,
                ))
            }
            _ => self.fail(span, "condition must be an integer or a pointer"),
        }
    }

    // ----- expressions --------------------------------------------------

    fn coerce(&mut self, e: Expr, target: &Ty, span: Span) -> R<Expr> {
        match target {
            Ty::Int { private: tp, .. } => match e.ty {
                Ty::Int { private: ep, .. } => {
                    if ep && !tp {
                        self.fail(span, "private value assigned to a public location")
                    } else {
                        Ok(e)
                    }
                }
                _ => self.fail(span, "expected an integer value"),
            },
            Ty::Ptr(tt) => match (&e.ty, &e.kind) {
                (Ty::Null, _) | (Ty::Int { .. }, ExprKind::Const(0)) => {
                    Ok(mk(ExprKind::Null, target.clone(), e.span))
                }
                (Ty::Ptr(et), _) if et == tt => Ok(e),
                (Ty::Ptr(et), _) => {
                    if let (Ty::Int { private: false, .. }, Ty::Int { private: true, .. }) =
                        (&**et, &**tt)
                    {
                        self.reject(
                            Rule::A,
                            span,
                            "address of public data assigned to a pointer to private data",
                        );
                        return Err(());
                    }
                    self.fail(span, "incompatible pointer types (a cast is required)")
                }
                _ => self.fail(span, "expected a pointer value"),
            },
            Ty::Struct(_) | Ty::Array(_) => {
                self.fail(span, "assignment of aggregate values is not supported")
            }
            _ => self.fail(span, "value of this type cannot be assigned"),
        }
    }

    fn place(&mut self, e: &ast::Expr) -> R<Place> {
        use ast::ExprKind as K;
        match &e.kind {
            K::Ident(n) => match self.lookup(n) {
                Some((v, ty)) => Ok(Place {
                    base: PlaceBase::Var(v),
                    offset: 0,
                    ty,
                }),
                None => self.fail(e.span, format!("unknown variable '{n}'")),
            },
            K::Deref(p) => {
                let pe = self.expr(p)?;
                match pe.ty.clone() {
                    Ty::Ptr(t) if !matches!(*t, Ty::Fn(_) | Ty::Void) => Ok(Place {
                        base: PlaceBase::Deref(Box::new(pe)),
                        offset: 0,
                        ty: *t,
                    }),
                    _ => self.fail(e.span, "dereference of a non-pointer"),
                }
            }
            K::Arrow(p, f) => {
                let pe = self.expr(p)?;
                let Some(Ty::Struct(s)) = pe.ty.pointee().cloned() else {
                    return self.fail(e.span, "'->' on a value that is not a struct pointer");
                };
                let (off, ty) = self.field(s, f, e.span)?;
                Ok(Place {
                    base: PlaceBase::Deref(Box::new(pe)),
                    offset: off,
                    ty,
                })
            }
            K::Field(b, f) => {
                let p = self.place(b)?;
                let Ty::Struct(s) = p.ty else {
                    return self.fail(e.span, "'.' on a value that is not a struct");
                };
                let (off, ty) = self.field(s, f, e.span)?;
                Ok(Place {
                    base: p.base,
                    offset: p.offset + off,
                    ty,
                })
            }
            K::Index(a, i) => {
                let pa = self.expr(a)?;
                let Some(elem) = pa.ty.pointee().cloned() else {
                    return self.fail(e.span, "indexing a value that is not an array or pointer");
                };
                if matches!(elem, Ty::Fn(_) | Ty::Void) {
                    return self.fail(e.span, "indexing a function pointer");
                }
                let idx = self.expr(i)?;
                if !idx.ty.is_int() {
                    return self.fail(i.span, "index must be an integer");
                }
                if idx.ty.is_private_int() {
                    if !elem.is_int() {
                        return self.fail(
                            i.span,
                            "private indices are supported for integer elements only",
                        );
                    }
                    self.needs_cmp = true;
                }
                let size = self.size_of(&elem);
                Ok(Place {
                    base: PlaceBase::Index {
                        ptr: Box::new(pa),
                        index: Box::new(idx),
                        elem: size,
                    },
                    offset: 0,
                    ty: elem,
                })
            }
            _ => self.fail(e.span, "expression is not assignable"),
        }
    }

    fn size_of(&self, t: &Ty) -> usize {
        match t {
            Ty::Struct(s) => self.structs[*s].size,
            _ => 1,
        }
    }

    fn field(&mut self, s: usize, f: &str, span: Span) -> R<(u64, Ty)> {
        match self.structs[s].fields.iter().find(|x| x.name == f) {
            Some(fd) => Ok((fd.offset, fd.ty.clone())),
            None => {
                let n = self.structs[s].name.clone();
                self.fail(span, format!("struct '{n}' has no field '{f}'"))
            }
        }
    }

    fn load(&mut self, p: Place, span: Span) -> R<Expr> {
        match p.ty.clone() {
            Ty::Array(elem) => Ok(mk(ExprKind::Decay(Box::new(p)), Ty::Ptr(elem), span)),
            ty => Ok(mk(ExprKind::Load(Box::new(p)), ty, span)),
        }
    }

    /// Checks a write to `p` against the private-condition rules.
    fn check_write(&mut self, p: &Place, span: Span) {
        let Some(rule) = self.public_kind(&p.ty) else {
            return;
        };
        let outside = match &p.base {
            PlaceBase::Var(VarRef::Global(_)) => {
                self.effect();
                true
            }
            PlaceBase::Var(VarRef::Local(s)) => {
                self.pstack.last().is_some_and(|f| *s < f.first_slot)
            }
            PlaceBase::Deref(_) | PlaceBase::Index { .. } => {
                self.effect();
                true
            }
        };
        if outside {
            let what = match rule {
                Rule::B => "update of a pointer to public data",
                Rule::D => "update of a pointer to a struct with public fields",
                _ => "write to public data",
            };
            self.violation(rule, span, what);
        }
    }

    fn expr(&mut self, e: &ast::Expr) -> R<Expr> {
        use ast::ExprKind as K;
        let span = e.span;
        match &e.kind {
            K::Int(v) => Ok(mk(
                ExprKind::Const(*v),
                Ty::int(false, self.opts.default_bits),
                span,
            )),
            K::Ident(n) => {
                if let Some((v, ty)) = self.lookup(n) {
                    let p = Place {
                        base: PlaceBase::Var(v),
                        offset: 0,
                        ty,
                    };
                    return self.load(p, span);
                }
                match self.func_ix.get(n) {
                    Some(&f) => {
                        self.fn_addr_taken.insert(f);
                        let sig = self.funcs[f].sig;
                        Ok(mk(
                            ExprKind::FnAddr(f),
                            Ty::Ptr(Box::new(Ty::Fn(sig))),
                            span,
                        ))
                    }
                    None => self.fail(span, format!("unknown identifier '{n}'")),
                }
            }
            K::Deref(inner) => {
                let probe = self.expr(inner)?;
                if let Some(Ty::Fn(_)) = probe.ty.pointee() {
                    return Ok(probe);
                }
                let p = self.place(e)?;
                self.load(p, span)
            }
            K::Arrow(..) | K::Field(..) | K::Index(..) => {
                let p = self.place(e)?;
                self.load(p, span)
            }
            K::AddrOf(inner) => {
                if let K::Ident(n) = &inner.kind {
                    if self.lookup(n).is_none() {
                        if let Some(&f) = self.func_ix.get(n) {
                            self.fn_addr_taken.insert(f);
                            let sig = self.funcs[f].sig;
                            return Ok(mk(
                                ExprKind::FnAddr(f),
                                Ty::Ptr(Box::new(Ty::Fn(sig))),
                                span,
                            ));
                        }
                    }
                }
                if let K::Deref(p) = &inner.kind {
                    return self.expr(p);
                }
                let p = self.place(inner)?;
                if let PlaceBase::Index { index, .. } = &p.base {
                    if index.ty.is_private_int() {
                        return self.fail(span, "address of a privately indexed element");
                    }
                }
                if matches!(p.ty, Ty::Array(_)) {
                    return self.fail(span, "address of an array; use the array name");
                }
                if let PlaceBase::Var(VarRef::Local(s)) = p.base {
                    self.addr_taken.insert(s);
                }
                let ty = Ty::Ptr(Box::new(p.ty.clone()));
                Ok(mk(ExprKind::AddrOf(Box::new(p)), ty, span))
            }
            K::Unary(op, a) => {
                let a = self.expr(a)?;
                match op {
                    UnOp::Neg => {
                        if !a.ty.is_int() {
                            return self.fail(span, "negation of a non-integer");
                        }
                        let ty = a.ty.clone();
                        Ok(mk(ExprKind::Neg(Box::new(a)), ty, span))
                    }
                    UnOp::Not => {
                        let b = self.to_bool(a)?;
                        let ty = Ty::int(b.ty.is_private_int(), 2);
                        Ok(mk(ExprKind::Not(Box::new(b)), ty, span))
                    }
                    UnOp::BitNot => {
                        if a.ty != Ty::int(false, a.ty.bits()) {
                            return self.fail(span, "'~' needs a public integer");
                        }
                        let ty = a.ty.clone();
                        Ok(mk(ExprKind::BitNot(Box::new(a)), ty, span))
                    }
                }
            }
            K::Binary(op, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                self.binary(*op, a, b, span)
            }
            K::Assign(op, lhs, rhs) => {
                let p = self.place(lhs)?;
                let v = self.expr(rhs)?;
                let v = match op {
                    None => v,
                    Some(o) => {
                        let cur = self.load(p.clone(), span)?;
                        self.binary(*o, cur, v, span)?
                    }
                };
                let v = self.coerce(v, &p.ty, span)?;
                self.check_write(&p, span);
                let ty = p.ty.clone();
                Ok(mk(ExprKind::Assign(Box::new(p), Box::new(v)), ty, span))
            }
            K::IncDec(d, target) => {
                let p = self.place(target)?;
                let cur = self.load(p.clone(), span)?;
                let one = mk(
                    ExprKind::Const(*d),
                    Ty::int(false, self.opts.default_bits),
                    span,
                );
                let v = self.binary(BinOp::Add, cur, one, span)?;
                let v = self.coerce(v, &p.ty, span)?;
                self.check_write(&p, span);
                let ty = p.ty.clone();
                Ok(mk(ExprKind::Assign(Box::new(p), Box::new(v)), ty, span))
            }
            K::Cast(tn, inner) => {
                let target = self.type_name(tn)?;
                let v = self.expr(inner)?;
                self.cast(target, v, span)
            }
            K::Call(callee, args) => self.call(callee, args, span),
            K::Type(_) => self.fail(
                span,
                "a type is only allowed as the second argument of pmalloc",
            ),
        }
    }

    fn cast(&mut self, target: Ty, v: Expr, span: Span) -> R<Expr> {
        match (&target, &v.ty) {
            (Ty::Int { private: tp, .. }, Ty::Int { private: vp, .. }) => {
                if *vp && !*tp {
                    return self.fail(span, "cast of a private value to a public type");
                }
                Ok(Expr { ty: target, ..v })
            }
            (Ty::Ptr(tt), Ty::Ptr(vt)) if **tt == **vt => Ok(v),
            (Ty::Ptr(tt), Ty::Ptr(vt)) => match (&**tt, &**vt) {
                (Ty::Int { private: tp, .. }, Ty::Int { private: vp, .. }) => {
                    if *tp && !*vp {
                        self.reject(
                            Rule::A,
                            span,
                            "cast of a pointer to public data to a pointer to private data",
                        );
                        return Err(());
                    }
                    if *vp && !*tp {
                        return self.fail(
                            span,
                            "cast of a pointer to private data to a pointer to public data",
                        );
                    }
                    if *tp {
                        self.needs_cmp = true;
                    }
                    let id = self.type_id(tt);
                    Ok(mk(ExprKind::CastPtr(Box::new(v), id), target, span))
                }
                _ => self.fail(
                    span,
                    "only casts between integer pointer types are supported",
                ),
            },
            (Ty::Ptr(_), Ty::Int { .. }) if matches!(v.kind, ExprKind::Const(0)) => {
                Ok(mk(ExprKind::Null, target, span))
            }
            _ => self.fail(span, "unsupported cast"),
        }
    }

    fn type_id(&self, t: &Ty) -> crate::heap::TypeId {
        match t {
            Ty::Int {
                private: true,
                bits,
            } => *bits,
            Ty::Int {
                private: false,
                bits,
            } => 256 + bits,
            Ty::Struct(s) => 1024 + *s as u32,
            Ty::Fn(_) => FN_TYPE,
            Ty::Ptr(t) => self.type_id(t),
            _ => 0,
        }
    }

    fn binary(&mut self, op: BinOp, a: Expr, b: Expr, span: Span) -> R<Expr> {
        let arith = |op: BinOp| match op {
            BinOp::Add => ArithOp::Add,
            BinOp::Sub => ArithOp::Sub,
            BinOp::Mul => ArithOp::Mul,
            BinOp::Div => ArithOp::Div,
            BinOp::Mod => ArithOp::Mod,
            BinOp::Shl => ArithOp::Shl,
            BinOp::Shr => ArithOp::Shr,
            BinOp::BitAnd => ArithOp::BitAnd,
            BinOp::BitOr => ArithOp::BitOr,
            _ => ArithOp::BitXor,
        };
        match op {
            BinOp::And | BinOp::Or => {
                let a = self.to_bool(a)?;
                let b = self.to_bool(b)?;
                let ty = Ty::int(a.ty.is_private_int() || b.ty.is_private_int(), 2);
                let k = if op == BinOp::And {
                    ExprKind::And(Box::new(a), Box::new(b))
                } else {
                    ExprKind::Or(Box::new(a), Box::new(b))
                };
                Ok(mk(k, ty, span))
            }
            BinOp::Add | BinOp::Sub if a.ty.is_ptr() || b.ty.is_ptr() => {
                if !self.opts.ptr_arith {
                    self.reject(Rule::G, span, "pointer arithmetic is disabled");
                    return Err(());
                }
                let (p, k, neg) = match (a.ty.is_ptr(), b.ty.is_ptr(), op) {
                    (true, false, _) => (a, b, op == BinOp::Sub),
                    (false, true, BinOp::Add) => (b, a, false),
                    (true, true, BinOp::Sub) => {
                        let (Some(ta), Some(tb)) = (a.ty.pointee(), b.ty.pointee()) else {
                            return self.fail(span, "difference of untyped pointers");
                        };
                        if ta != tb {
                            return self.fail(span, "difference of pointers to different types");
                        }
                        let elem = self.size_of(ta);
                        let private = self.ptr_private(ta);
                        return Ok(mk(
                            ExprKind::PtrDiff(Box::new(a), Box::new(b), elem),
                            Ty::int(private, self.opts.default_bits),
                            span,
                        ));
                    }
                    _ => return self.fail(span, "invalid pointer arithmetic"),
                };
                if k.ty != Ty::int(false, k.ty.bits()) {
                    return self.fail(span, "pointer offsets must be public integers");
                }
                let Some(elem_ty) = p.ty.pointee() else {
                    return self.fail(span, "arithmetic on a null pointer");
                };
                if matches!(elem_ty, Ty::Fn(_)) {
                    return self.fail(span, "arithmetic on a function pointer");
                }
                let elem = self.size_of(elem_ty);
                let k = if neg {
                    let ty = k.ty.clone();
                    mk(ExprKind::Neg(Box::new(k)), ty, span)
                } else {
                    k
                };
                let ty = p.ty.clone();
                Ok(mk(
                    ExprKind::PtrAdd(Box::new(p), Box::new(k), elem),
                    ty,
                    span,
                ))
            }
            BinOp::Eq | BinOp::Ne if a.ty.is_ptr() || b.ty.is_ptr() => {
                let target = if a.ty.is_ptr() && a.ty != Ty::Null {
                    a.ty.clone()
                } else {
                    b.ty.clone()
                };
                let a = self.coerce(a, &target, span)?;
                let b = self.coerce(b, &target, span)?;
                let private = target.pointee().is_some_and(|t| self.ptr_private(t));
                Ok(mk(
                    ExprKind::PtrEq(op == BinOp::Eq, Box::new(a), Box::new(b)),
                    Ty::int(private, 2),
                    span,
                ))
            }
            _ => {
                let (
                    Ty::Int {
                        private: pa,
                        bits: ba,
                    },
                    Ty::Int {
                        private: pb,
                        bits: bb,
                    },
                ) = (&a.ty, &b.ty)
                else {
                    return self.fail(span, "operands must be integers");
                };
                let private = *pa || *pb;
                let bits = (*ba).max(*bb);
                let cmp = match op {
                    BinOp::Lt => Some(CmpOp::Lt),
                    BinOp::Le => Some(CmpOp::Le),
                    BinOp::Gt => Some(CmpOp::Gt),
                    BinOp::Ge => Some(CmpOp::Ge),
                    BinOp::Eq => Some(CmpOp::Eq),
                    BinOp::Ne => Some(CmpOp::Ne),
                    _ => None,
                };
                if let Some(c) = cmp {
                    if private {
                        self.needs_cmp = true;
                    }
                    return Ok(mk(
                        ExprKind::Cmp(c, Box::new(a), Box::new(b), bits),
                        Ty::int(private, 2),
                        span,
                    ));
                }
                let aop = arith(op);
                if private && !matches!(aop, ArithOp::Add | ArithOp::Sub | ArithOp::Mul) {
                    return self.fail(span, "this operator needs public operands");
                }
                Ok(mk(
                    ExprKind::Arith(aop, Box::new(a), Box::new(b)),
                    Ty::int(private, bits),
                    span,
                ))
            }
        }
    }

    fn public_int(&mut self, e: &ast::Expr) -> R<Expr> {
        let v = self.expr(e)?;
        if v.ty != Ty::int(false, v.ty.bits()) {
            return self.fail(e.span, "expected a public integer");
        }
        Ok(v)
    }

    fn root_name(e: &ast::Expr) -> String {
        use ast::ExprKind as K;
        match &e.kind {
            K::Ident(n) => n.clone(),
            K::Index(a, _)
            | K::Field(a, _)
            | K::Arrow(a, _)
            | K::Deref(a)
            | K::AddrOf(a)
            | K::Cast(_, a) => Self::root_name(a),
            _ => "out".to_string(),
        }
    }

    fn call(&mut self, callee: &ast::Expr, args: &[ast::Expr], span: Span) -> R<Expr> {
        if let ast::ExprKind::Ident(name) = &callee.kind {
            if self.lookup(name).is_none() {
                match name.as_str() {
                    "pmalloc" => {
                        let [n, t] = args else {
                            return self.fail(span, "pmalloc takes a count and a type");
                        };
                        let n = self.public_int(n)?;
                        let ast::ExprKind::Type(tn) = &t.kind else {
                            return self.fail(t.span, "second argument of pmalloc must be a type");
                        };
                        let ty = self.type_name(tn)?;
                        if matches!(ty, Ty::Void) {
                            return self.fail(t.span, "pmalloc of void");
                        }
                        self.effect();
                        self.violation(Rule::C, span, "pmalloc");
                        let pty = Ty::Ptr(Box::new(ty.clone()));
                        return Ok(mk(ExprKind::Pmalloc(Box::new(n), ty), pty, span));
                    }
                    "pfree" => {
                        let [p] = args else {
                            return self.fail(span, "pfree takes one pointer");
                        };
                        let p = self.expr(p)?;
                        if !matches!(p.ty, Ty::Ptr(_)) {
                            return self.fail(span, "pfree of a non-pointer");
                        }
                        self.effect();
                        self.violation(Rule::C, span, "pfree");
                        return Ok(mk(ExprKind::Pfree(Box::new(p)), Ty::Void, span));
                    }
                    "smcinput" => {
                        if args.len() < 2 || args.len() > 3 {
                            return self.fail(
                                span,
                                "smcinput takes a variable, a party, and an optional count",
                            );
                        }
                        let ast::ExprKind::Ident(vn) = &args[0].kind else {
                            return self.fail(args[0].span, "smcinput needs a variable name");
                        };
                        let Some((var, ty)) = self.lookup(vn) else {
                            return self.fail(args[0].span, format!("unknown variable '{vn}'"));
                        };
                        self.public_int(&args[1])?;
                        let count = match args.get(2) {
                            Some(c) => Some(Box::new(self.public_int(c)?)),
                            None => None,
                        };
                        let elem =
                            match ty {
                                Ty::Array(t) if t.is_int() => *t,
                                Ty::Int { .. } if count.is_none() => ty,
                                _ => return self.fail(
                                    span,
                                    "smcinput needs an integer or an integer array with a count",
                                ),
                            };
                        self.effect();
                        self.violation(Rule::E, span, "smcinput");
                        return Ok(mk(
                            ExprKind::Input {
                                var,
                                name: vn.clone(),
                                elem,
                                count,
                            },
                            Ty::Void,
                            span,
                        ));
                    }
                    "smcoutput" => {
                        if args.len() < 2 || args.len() > 3 {
                            return self.fail(
                                span,
                                "smcoutput takes a value, a party, and an optional count",
                            );
                        }
                        let name = Self::root_name(&args[0]);
                        let v = self.expr(&args[0])?;
                        self.public_int(&args[1])?;
                        let count = match args.get(2) {
                            Some(c) => {
                                if !v.ty.pointee().is_some_and(|t| t.is_int()) {
                                    return self.fail(
                                        span,
                                        "smcoutput with a count needs an integer array",
                                    );
                                }
                                Some(Box::new(self.public_int(c)?))
                            }
                            None => {
                                if !v.ty.is_int() {
                                    return self.fail(span, "smcoutput needs an integer value");
                                }
                                None
                            }
                        };
                        self.effect();
                        self.violation(Rule::E, span, "smcoutput");
                        return Ok(mk(
                            ExprKind::Output {
                                name,
                                value: Box::new(v),
                                count,
                            },
                            Ty::Void,
                            span,
                        ));
                    }
                    "smcphase" => {
                        let [a] = args else {
                            return self.fail(span, "smcphase takes one integer constant");
                        };
                        let ast::ExprKind::Int(v) = a.kind else {
                            return self.fail(a.span, "smcphase takes one integer constant");
                        };
                        return Ok(mk(ExprKind::Phase(v), Ty::Void, span));
                    }
                    _ => {}
                }
                if let Some(&f) = self.func_ix.get(name) {
                    let sig = self.sigs[self.funcs[f].sig].clone();
                    let args = self.args(&sig, args, span)?;
                    if let Some(cur) = self.cur {
                        self.callees[cur].insert(f);
                    }
                    if !self.pstack.is_empty() {
                        self.pending.push(Pending {
                            callee: Ok(f),
                            span,
                            frames: self.pstack.clone(),
                        });
                    }
                    return Ok(mk(ExprKind::Call(Callee::Direct(f), args), sig.ret, span));
                }
                return self.fail(span, format!("unknown function '{name}'"));
            }
        }
        let fe = self.expr(callee)?;
        let Some(Ty::Fn(s)) = fe.ty.pointee().cloned() else {
            return self.fail(span, "call of a value that is not a function");
        };
        let sig = self.sigs[s].clone();
        let args = self.args(&sig, args, span)?;
        if let Some(cur) = self.cur {
            self.indirect_sigs[cur].insert(s);
        }
        if !self.pstack.is_empty() {
            self.pending.push(Pending {
                callee: Err(s),
                span,
                frames: self.pstack.clone(),
            });
        }
        Ok(mk(
            ExprKind::Call(Callee::Indirect(Box::new(fe)), args),
            sig.ret,
            span,
        ))
    }

    fn args(&mut self, sig: &Sig, args: &[ast::Expr], span: Span) -> R<Vec<Expr>> {
        if sig.params.len() != args.len() {
            return self.fail(
                span,
                format!(
                    "expected {} arguments, found {}",
                    sig.params.len(),
                    args.len()
                ),
            );
        }
        let mut out = Vec::with_capacity(args.len());
        for (a, t) in args.iter().zip(&sig.params) {
            let v = self.expr(a)?;
            out.push(self.coerce(v, t, a.span)?);
        }
        Ok(out)
    }
}

fn set_guards(ss: &mut [Stmt], guards: &BTreeSet<usize>) {
    for s in ss {
        match s {
            Stmt::If {
                then_,
                else_,
                guard,
                id,
                ..
            } => {
                *guard = guards.contains(id);
                set_guards(then_, guards);
                set_guards(else_, guards);
            }
            Stmt::Loop { body, step, .. } => {
                set_guards(body, guards);
                set_guards(step, guards);
            }
            Stmt::Scope(b, _) => set_guards(b, guards),
            Stmt::Batch(gs) => gs.iter_mut().for_each(|g| set_guards(g, guards)),
            _ => {}
        }
    }
}

// ----- liveness of locals after private branches ------------------------

fn reads_place(p: &Place, with_var: bool, out: &mut BTreeSet<usize>) {
    match &p.base {
        PlaceBase::Var(VarRef::Local(s)) => {
            if with_var {
                out.insert(*s);
            }
        }
        PlaceBase::Var(VarRef::Global(_)) => {}
        PlaceBase::Deref(e) => reads_expr(e, out),
        PlaceBase::Index { ptr, index, .. } => {
            reads_expr(ptr, out);
            reads_expr(index, out);
        }
    }
}

fn reads_expr(e: &Expr, out: &mut BTreeSet<usize>) {
    use ExprKind as K;
    match &e.kind {
        K::Const(_) | K::Null | K::FnAddr(_) | K::Phase(_) => {}
        K::Load(p) | K::AddrOf(p) | K::Decay(p) => reads_place(p, true, out),
        K::Assign(p, v) => {
            reads_place(p, false, out);
            reads_expr(v, out);
        }
        K::Neg(a) | K::BitNot(a) | K::Not(a) | K::Truth(a, _) | K::CastPtr(a, _) | K::Pfree(a) => {
            reads_expr(a, out)
        }
        K::Arith(_, a, b)
        | K::Cmp(_, a, b, _)
        | K::And(a, b)
        | K::Or(a, b)
        | K::PtrEq(_, a, b)
        | K::PtrAdd(a, b, _)
        | K::PtrDiff(a, b, _) => {
            reads_expr(a, out);
            reads_expr(b, out);
        }
        K::Call(c, args) => {
            if let Callee::Indirect(f) = c {
                reads_expr(f, out);
            }
            args.iter().for_each(|a| reads_expr(a, out));
        }
        K::Pmalloc(n, _) => reads_expr(n, out),
        K::Input { count, .. } => {
            if let Some(c) = count {
                reads_expr(c, out);
            }
        }
        K::Output { value, count, .. } => {
            reads_expr(value, out);
            if let Some(c) = count {
                reads_expr(c, out);
            }
        }
    }
}

fn reads_stmt(s: &Stmt, out: &mut BTreeSet<usize>) {
    match s {
        Stmt::Decl { len, init, .. } => {
            if let Some(l) = len {
                reads_expr(l, out);
            }
            if let Some(i) = init {
                reads_expr(i, out);
            }
        }
        Stmt::Expr(e) => reads_expr(e, out),
        Stmt::If {
            cond, then_, else_, ..
        } => {
            reads_expr(cond, out);
            then_
                .iter()
                .chain(else_.iter())
                .for_each(|s| reads_stmt(s, out));
        }
        Stmt::Loop {
            cond, body, step, ..
        } => {
            if let Some(c) = cond {
                reads_expr(c, out);
            }
            body.iter()
                .chain(step.iter())
                .for_each(|s| reads_stmt(s, out));
        }
        Stmt::Scope(b, _) => b.iter().for_each(|s| reads_stmt(s, out)),
        Stmt::Batch(gs) => gs.iter().flatten().for_each(|s| reads_stmt(s, out)),
        Stmt::Return(e, _) => {
            if let Some(e) = e {
                reads_expr(e, out);
            }
        }
    }
}

/// Marks, for every private `if`, the eligible locals that are never read
/// after it; their branch updates can be dropped instead of merged.
fn annotate_dead(ss: &mut [Stmt], live_out: &BTreeSet<usize>, eligible: &BTreeSet<usize>) {
    let mut live = live_out.clone();
    for s in ss.iter_mut().rev() {
        match s {
            Stmt::If {
                then_,
                else_,
                dead,
                kind,
                ..
            } => {
                if *kind != CondKind::Public {
                    *dead = eligible.difference(&live).copied().collect();
                }
                annotate_dead(then_, &live, eligible);
                annotate_dead(else_, &live, eligible);
            }
            Stmt::Loop { .. } => {
                let mut l = live.clone();
                reads_stmt(s, &mut l);
                if let Stmt::Loop { body, step, .. } = s {
                    annotate_dead(body, &l, eligible);
                    annotate_dead(step, &l, eligible);
                }
            }
            Stmt::Scope(b, _) => annotate_dead(b, &live, eligible),
            Stmt::Batch(_) => {
                let mut l = live.clone();
                reads_stmt(s, &mut l);
                if let Stmt::Batch(gs) = s {
                    for g in gs {
                        annotate_dead(g, &l, eligible);
                    }
                }
            }
            _ => {}
        }
        reads_stmt(s, &mut live);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse;

    fn run(src: &str, ptr_arith: bool) -> Result<Program, Vec<Rejection>> {
        let ast = parse(src).unwrap_or_else(|e| panic!("syntax: {e}"));
        check(
            &ast,
            &CheckOptions {
                ptr_arith,
                default_bits: 32,
            },
        )
    }

    fn rules(src: &str) -> Vec<Rule> {
        match run(src, false) {
            Ok(_) => Vec::new(),
            Err(rs) => rs.into_iter().map(|r| r.rule).collect(),
        }
    }

    /// Witness is rejected with exactly `rule`; sibling is accepted.
    fn pair(rule: Rule, witness: &str, sibling: &str) {
        assert_eq!(
            rules(witness),
            vec![rule],
            "witness for rule ({})",
            rule.id()
        );
        assert_eq!(rules(sibling), vec![], "sibling for rule ({})", rule.id());
    }

    #[test]
    fn rule_a_public_address_into_private_pointer() {
        pair(
            Rule::A,
            "public int b; private int a;
             public int main() { private int *p; p = &b; return 0; }",
            "public int b; private int a;
             public int main() { private int *p; p = &a; return 0; }",
        );
    }

    #[test]
    fn rule_a_applies_to_casts() {
        assert_eq!(
            rules(
                "public int b;
                 public int main() { private int *p; p = (private int *) &b; return 0; }"
            ),
            vec![Rule::A]
        );
    }

    #[test]
    fn rule_b_public_pointer_update_under_private_condition() {
        pair(
            Rule::B,
            "public int a, b; private int c;
             public int main() { public int *p; p = &a; if (c > 0) p = &b; return 0; }",
            "public int a, b; private int c;
             public int main() { public int *p; p = &a; if (a > 0) p = &b; return 0; }",
        );
    }

    #[test]
    fn rule_c_allocation_under_private_condition() {
        pair(
            Rule::C,
            "struct node { private int data; struct node *next; };
             private int c;
             public int main() {
                struct node *p;
                p = pmalloc(1, struct node);
                if (c > 0) pfree(p);
                return 0;
             }",
            "struct node { private int data; struct node *next; };
             private int c;
             public int main() {
                struct node *p;
                p = pmalloc(1, struct node);
                if (c > 0) p->data = 1;
                pfree(p);
                return 0;
             }",
        );
        assert_eq!(
            rules(
                "struct node { private int data; struct node *next; };
                 private int c;
                 public int main() { struct node *p; if (c > 0) p = pmalloc(1, struct node); return 0; }"
            ),
            vec![Rule::C]
        );
    }

    #[test]
    fn rule_d_struct_with_public_field() {
        pair(
            Rule::D,
            "struct s { public int k; private int v; };
             private int c;
             public int main() { struct s x, y; struct s *p; p = &x; if (c > 0) p = &y; return 0; }",
            "struct s { private int k; private int v; };
             private int c;
             public int main() { struct s x, y; struct s *p; p = &x; if (c > 0) p = &y; return 0; }",
        );
    }

    #[test]
    fn rule_d_is_recursive_and_skips_cycles() {
        // the nested struct carries a public field
        assert_eq!(
            rules(
                "struct in { public int k; };
                 struct out { private int v; struct in inner; struct out *next; };
                 private int c;
                 public int main() { struct out x, y; struct out *p; p = &x; if (c > 0) p = &y; return 0; }"
            ),
            vec![Rule::D]
        );
        // self reference through a pointer does not make the struct public
        assert!(rules(
            "struct a { private int v; struct b *other; };
             struct b { private int w; struct a *back; };
             private int c;
             public int main() { struct a x, y; struct a *p; p = &x; if (c > 0) p = &y; return 0; }"
        )
        .is_empty());
    }

    #[test]
    fn rule_e_public_side_effect_under_private_condition() {
        pair(
            Rule::E,
            "public int n; private int c;
             public int main() { if (c > 0) n = 1; return 0; }",
            "private int n; private int c;
             public int main() { if (c > 0) n = 1; return 0; }",
        );
    }

    #[test]
    fn rule_e_through_called_function() {
        assert_eq!(
            rules(
                "public int n; private int c;
                 public void bump() { n = n + 1; }
                 public int main() { if (c > 0) bump(); return 0; }"
            ),
            vec![Rule::E]
        );
    }

    #[test]
    fn rule_e_covers_io() {
        assert_eq!(
            rules("private int c, x; public int main() { if (c > 0) smcoutput(x, 1); return 0; }"),
            vec![Rule::E]
        );
    }

    #[test]
    fn rule_f_private_loop_condition() {
        pair(
            Rule::F,
            "private int c;
             public int main() { public int i; for (i = 0; i < c; i++) { } return 0; }",
            "private int c;
             public int main() { public int i; for (i = 0; i < 10; i++) { } return 0; }",
        );
        assert_eq!(
            rules("private int c; public int main() { while (c) { c = c - 1; } return 0; }"),
            vec![Rule::F]
        );
    }

    #[test]
    fn rule_g_pointer_arithmetic_needs_the_flag() {
        let src = "private int a[4];
                   public int main() { private int *p; p = a; p = p + 1; return 0; }";
        assert_eq!(rules(src), vec![Rule::G]);
        assert!(run(src, true).is_ok());
        let diff = "private int a[4];
                    public int main() { private int *p, *q; private int d; p = a; q = a; d = q - p; return 0; }";
        assert_eq!(rules(diff), vec![Rule::G]);
        assert!(run(diff, true).is_ok());
    }

    #[test]
    fn rejection_names_rule_and_position() {
        let errs = run("public int n; private int c;\npublic int main() {\n  if (c > 0) n = 1;\n  return 0;\n}", false)
            .unwrap_err();
        let msg = alloc::format!("{}", errs[0]);
        assert!(msg.starts_with("rule (e) at 3:"), "{msg}");
    }

    #[test]
    fn several_violations_are_all_reported_in_order() {
        let errs = run(
            "public int n, b; private int c;
             public int main() { private int *p; p = &b; if (c > 0) n = 1; return 0; }",
            false,
        )
        .unwrap_err();
        let got: Vec<Rule> = errs.iter().map(|r| r.rule).collect();
        assert_eq!(got, vec![Rule::A, Rule::E]);
    }

    #[test]
    fn private_division_is_a_type_error() {
        assert_eq!(
            rules("private int a, b; public int main() { a = a / b; return 0; }"),
            vec![Rule::Type]
        );
        assert!(rules("public int a, b; public int main() { a = a / b; return 0; }").is_empty());
    }

    #[test]
    fn undeclared_names_are_type_errors() {
        assert_eq!(
            rules("public int main() { x = 1; return 0; }"),
            vec![Rule::Type]
        );
        assert_eq!(rules("public int f() { return 0; }"), vec![Rule::Type]);
    }
}
