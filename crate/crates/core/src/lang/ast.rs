//! Untyped syntax tree produced by the parser.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qual {
    Private,
    Public,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeSpec {
    /// `int` with an optional `<bits>` suffix.
    Int(Option<u32>),
    Void,
    Struct(String),
}

/// A type as written in a cast or `pmalloc` argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeName {
    pub qual: Option<Qual>,
    pub spec: TypeSpec,
    pub stars: u32,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub name: String,
    pub stars: u32,
    pub array: Option<Expr>,
    pub init: Option<Expr>,
    /// Parameter list when the declarator is `(*name)(...)`.
    pub fnptr: Option<Vec<Param>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub qual: Option<Qual>,
    pub spec: TypeSpec,
    pub stars: u32,
    pub name: String,
    pub fnptr: Option<Vec<Param>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncDef {
    pub qual: Option<Qual>,
    pub ret: TypeSpec,
    pub ret_stars: u32,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Struct {
        name: String,
        fields: Vec<(Option<Qual>, TypeSpec, Declarator)>,
        span: Span,
    },
    Global(Option<Qual>, TypeSpec, Vec<Declarator>),
    Func(FuncDef),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl(Option<Qual>, TypeSpec, Vec<Declarator>),
    Expr(Expr),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>, Span),
    While(Expr, Box<Stmt>, Span),
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
        span: Span,
    },
    Block(Vec<Stmt>),
    /// `[ ... ]`: statements whose iterations are independent.
    Batch(Vec<Stmt>, Span),
    Return(Option<Expr>, Span),
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitOr,
    BitXor,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
    BitNot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i128),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `lhs = rhs` or `lhs op= rhs`.
    Assign(Option<BinOp>, Box<Expr>, Box<Expr>),
    /// `++x`, `x++`, `--x`, `x--`; the value is not used by the language.
    IncDec(i128, Box<Expr>),
    Call(Box<Expr>, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Field(Box<Expr>, String),
    Arrow(Box<Expr>, String),
    Deref(Box<Expr>),
    AddrOf(Box<Expr>),
    Cast(TypeName, Box<Expr>),
    /// A type used as a call argument, as in `pmalloc(1, struct node)`.
    Type(TypeName),
}
