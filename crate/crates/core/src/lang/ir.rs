//! Resolved, typed program representation shared by both interpreters.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub use super::ast::Span;
use crate::heap::TypeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Int {
        private: bool,
        bits: u32,
    },
    Ptr(Box<Ty>),
    Struct(usize),
    Array(Box<Ty>),
    /// A function with the given signature; only appears under `Ptr`.
    Fn(usize),
    Void,
    /// Type of the literal `0` in pointer context.
    Null,
}

impl Ty {
    pub fn int(private: bool, bits: u32) -> Ty {
        Ty::Int { private, bits }
    }

    pub fn is_int(&self) -> bool {
        matches!(self, Ty::Int { .. })
    }

    pub fn is_private_int(&self) -> bool {
        matches!(self, Ty::Int { private: true, .. })
    }

    pub fn is_ptr(&self) -> bool {
        matches!(self, Ty::Ptr(_) | Ty::Null)
    }

    pub fn pointee(&self) -> Option<&Ty> {
        match self {
            Ty::Ptr(t) => Some(t),
            _ => None,
        }
    }

    pub fn bits(&self) -> u32 {
        match self {
            Ty::Int { bits, .. } => *bits,
            _ => 0,
        }
    }
}

pub const FN_TYPE: TypeId = 4096;
const PUBLIC_INT_BASE: TypeId = 256;
const STRUCT_BASE: TypeId = 1024;

/// Layout class of one memory cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    PrivInt,
    PubInt,
    Ptr { ty: TypeId, level: u32 },
}

#[derive(Debug, Clone)]
pub struct FieldDef {
    pub name: String,
    pub ty: Ty,
    pub offset: u64,
}

#[derive(Debug, Clone)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub size: usize,
    /// Every field is private, recursively; pointers to such structs may
    /// hold several candidate locations.
    pub all_private: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sig {
    pub params: Vec<Ty>,
    pub ret: Ty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarRef {
    Global(usize),
    Local(usize),
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub ty: Ty,
}

#[derive(Debug, Clone)]
pub struct Place {
    pub base: PlaceBase,
    /// Extra cells, for struct fields.
    pub offset: u64,
    pub ty: Ty,
}

#[derive(Debug, Clone)]
pub enum PlaceBase {
    Var(VarRef),
    /// `*ptr`.
    Deref(Box<Expr>),
    /// `ptr[index]` with elements of `elem` cells.
    Index {
        ptr: Box<Expr>,
        index: Box<Expr>,
        elem: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub ty: Ty,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    BitAnd,
    BitOr,
    BitXor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone)]
pub enum Callee {
    Direct(usize),
    Indirect(Box<Expr>),
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Const(i128),
    Null,
    Load(Box<Place>),
    AddrOf(Box<Place>),
    /// An array place used as a pointer to its first element.
    Decay(Box<Place>),
    FnAddr(usize),
    Neg(Box<Expr>),
    BitNot(Box<Expr>),
    /// Logical negation of a 0/1 value.
    Not(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    /// Integer comparison over operands of `bits` bits; yields 0/1.
    Cmp(CmpOp, Box<Expr>, Box<Expr>, u32),
    /// Conjunction and disjunction of 0/1 values.
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    /// `x != 0` for an integer of `bits` bits.
    Truth(Box<Expr>, u32),
    /// Pointer (in)equality; `true` for `==`.
    PtrEq(bool, Box<Expr>, Box<Expr>),
    /// `ptr + k` elements of `elem` cells.
    PtrAdd(Box<Expr>, Box<Expr>, usize),
    PtrDiff(Box<Expr>, Box<Expr>, usize),
    /// Reinterpret the pointee as the given integer type.
    CastPtr(Box<Expr>, TypeId),
    Call(Callee, Vec<Expr>),
    Pmalloc(Box<Expr>, Ty),
    Pfree(Box<Expr>),
    Assign(Box<Place>, Box<Expr>),
    Input {
        var: VarRef,
        name: String,
        elem: Ty,
        count: Option<Box<Expr>>,
    },
    Output {
        name: String,
        value: Box<Expr>,
        count: Option<Box<Expr>>,
    },
    Phase(i128),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondKind {
    Public,
    Private,
    /// Privacy known only at run time (pointer predicates).
    Dynamic,
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Decl {
        var: VarRef,
        ty: Ty,
        len: Option<Expr>,
        init: Option<Expr>,
        span: Span,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then_: Vec<Stmt>,
        else_: Vec<Stmt>,
        kind: CondKind,
        /// Abort if the condition turns out private at run time.
        guard: bool,
        /// Locals whose branch updates need no merge (never read again).
        dead: Vec<usize>,
        id: usize,
        span: Span,
    },
    Loop {
        cond: Option<Expr>,
        body: Vec<Stmt>,
        step: Vec<Stmt>,
        /// Iterations run as independent branches of one batch.
        batched: bool,
        span: Span,
    },
    /// A lexical block; its locals are released on exit.
    Scope(Vec<Stmt>, Vec<usize>),
    /// Adjacent `[ ... ]` blocks; each runs as an independent branch.
    Batch(Vec<Vec<Stmt>>),
    Return(Option<Expr>, Span),
}

#[derive(Debug, Clone)]
pub struct Func {
    pub name: String,
    pub sig: usize,
    pub params: Vec<usize>,
    pub locals: Vec<VarInfo>,
    pub body: Vec<Stmt>,
    /// Has effects visible outside private control flow.
    pub public_effects: bool,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub structs: Vec<StructDef>,
    pub sigs: Vec<Sig>,
    pub globals: Vec<VarInfo>,
    /// Global declarations, in source order.
    pub init: Vec<Stmt>,
    pub funcs: Vec<Func>,
    pub main: usize,
    /// Widest private integer in the program.
    pub max_bits: u32,
    /// Comparisons, private indexing, or casts occur.
    pub needs_comparison: bool,
}

impl Program {
    pub fn size_of(&self, ty: &Ty) -> usize {
        match ty {
            Ty::Struct(s) => self.structs[*s].size,
            _ => 1,
        }
    }

    pub fn type_id(&self, ty: &Ty) -> TypeId {
        match ty {
            Ty::Int {
                private: true,
                bits,
            } => *bits,
            Ty::Int {
                private: false,
                bits,
            } => PUBLIC_INT_BASE + bits,
            Ty::Struct(s) => STRUCT_BASE + *s as TypeId,
            Ty::Fn(_) => FN_TYPE,
            Ty::Ptr(t) => self.type_id(t),
            _ => 0,
        }
    }

    /// Bit width of an integer type id.
    pub fn int_bits(id: TypeId) -> Option<u32> {
        match id {
            1..=255 => Some(id),
            257..=511 => Some(id - PUBLIC_INT_BASE),
            _ => None,
        }
    }

    /// Base type id and indirection level of a pointer type.
    pub fn ptr_shape(&self, ty: &Ty) -> (TypeId, u32) {
        let mut level = 0;
        let mut t = ty;
        while let Ty::Ptr(inner) = t {
            level += 1;
            t = inner;
        }
        (self.type_id(t), level.max(1))
    }

    /// Cell layout of one value of `ty`.
    pub fn layout(&self, ty: &Ty) -> Vec<CellKind> {
        match ty {
            Ty::Int { private: true, .. } => alloc::vec![CellKind::PrivInt],
            Ty::Int { private: false, .. } => alloc::vec![CellKind::PubInt],
            Ty::Ptr(_) | Ty::Null => {
                let (ty, level) = self.ptr_shape(ty);
                alloc::vec![CellKind::Ptr { ty, level }]
            }
            Ty::Struct(s) => self.structs[*s]
                .fields
                .iter()
                .flat_map(|f| self.layout(&f.ty))
                .collect(),
            Ty::Array(t) => self.layout(t),
            Ty::Fn(_) | Ty::Void => alloc::vec![CellKind::PubInt],
        }
    }

    pub fn var_name<'a>(&'a self, func: Option<&'a Func>, v: VarRef) -> &'a str {
        match (v, func) {
            (VarRef::Global(g), _) => &self.globals[g].name,
            (VarRef::Local(l), Some(f)) => &f.locals[l].name,
            (VarRef::Local(_), None) => "?",
        }
    }

    pub fn func_by_name(&self, name: &str) -> Option<usize> {
        self.funcs.iter().position(|f| f.name == name)
    }
}
