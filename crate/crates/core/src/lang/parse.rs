//! Lexer and recursive-descent parser.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub span: Span,
    pub msg: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: {}", self.span, self.msg)
    }
}

type PResult<T> = Result<T, SyntaxError>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i128),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "struct", "int", "void", "private", "public", "if", "else", "for", "while", "return",
];

// Longest first so that maximal munch works by linear scan.
const PUNCT: &[&str] = &[
    "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=",
    "*=", "/=", "%=", "{", "}", "(", ")", "[", "]", ";", ",", ".", "*", "&", "+", "-", "/", "%",
    "<", ">", "=", "!", "~", "|", "^",
];

fn lex(src: &str) -> PResult<Vec<(Tok, Span)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for k in 0..n {
            if bytes[*i + k] == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < bytes.len() {
        let c = bytes[i];
        let span = Span { line, col };
        if c.is_ascii_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
        } else if src[i..].starts_with("//") {
            let n = src[i..].find('\n').unwrap_or(bytes.len() - i);
            advance(&mut i, &mut line, &mut col, n);
        } else if src[i..].starts_with("/*") {
            let n = src[i + 2..].find("*/").ok_or(SyntaxError {
                span,
                msg: "unterminated comment".into(),
            })?;
            advance(&mut i, &mut line, &mut col, n + 4);
        } else if c.is_ascii_digit() {
            let n = src[i..].bytes().take_while(|b| b.is_ascii_digit()).count();
            let v: i128 = src[i..i + n].parse().map_err(|_| SyntaxError {
                span,
                msg: "integer literal too large".into(),
            })?;
            out.push((Tok::Int(v), span));
            advance(&mut i, &mut line, &mut col, n);
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let n = src[i..]
                .bytes()
                .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
                .count();
            let word = &src[i..i + n];
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word.to_string()),
            };
            out.push((tok, span));
            advance(&mut i, &mut line, &mut col, n);
        } else if let Some(p) = PUNCT.iter().find(|p| src[i..].starts_with(**p)) {
            out.push((Tok::Punct(p), span));
            advance(&mut i, &mut line, &mut col, p.len());
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(SyntaxError {
                span,
                msg: alloc::format!("unexpected character '{ch}'"),
            });
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

pub fn parse(src: &str) -> PResult<Program> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let mut items = Vec::new();
    while p.peek() != &Tok::Eof {
        items.push(p.item()?);
    }
    Ok(Program { items })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(SyntaxError {
            span: self.span(),
            msg: msg.into(),
        })
    }

    fn is(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) | Tok::Kw(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(alloc::format!(
                "expected '{p}', found {}",
                describe(self.peek())
            ))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.bump() {
            Tok::Ident(s) => Ok(s),
            t => {
                self.pos -= 1;
                self.err(alloc::format!(
                    "expected identifier, found {}",
                    describe(&t)
                ))
            }
        }
    }

    fn starts_type(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Kw("int" | "void" | "struct" | "private" | "public")
        )
    }

    fn qual(&mut self) -> Option<Qual> {
        if self.eat("private") {
            Some(Qual::Private)
        } else if self.eat("public") {
            Some(Qual::Public)
        } else {
            None
        }
    }

    fn type_spec(&mut self) -> PResult<TypeSpec> {
        if self.eat("int") {
            if self.is("<") {
                if let Tok::Int(_) = self.peek_at(1) {
                    self.bump();
                    let bits = match self.bump() {
                        Tok::Int(b) => b,
                        _ => unreachable!(),
                    };
                    self.expect(">")?;
                    if !(1..=126).contains(&bits) {
                        return self.err("integer bit length must be between 1 and 126");
                    }
                    return Ok(TypeSpec::Int(Some(bits as u32)));
                }
            }
            Ok(TypeSpec::Int(None))
        } else if self.eat("void") {
            Ok(TypeSpec::Void)
        } else if self.eat("struct") {
            Ok(TypeSpec::Struct(self.ident()?))
        } else {
            self.err(alloc::format!(
                "expected a type, found {}",
                describe(self.peek())
            ))
        }
    }

    fn stars(&mut self) -> u32 {
        let mut n = 0;
        while self.eat("*") {
            n += 1;
        }
        n
    }

    fn item(&mut self) -> PResult<Item> {
        let span = self.span();
        if self.is("struct") && matches!(self.peek_at(2), Tok::Punct("{")) {
            self.bump();
            let name = self.ident()?;
            self.expect("{")?;
            let mut fields = Vec::new();
            while !self.eat("}") {
                let q = self.qual();
                let spec = self.type_spec()?;
                loop {
                    let d = self.declarator()?;
                    fields.push((q, spec.clone(), d));
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(";")?;
            }
            self.expect(";")?;
            return Ok(Item::Struct { name, fields, span });
        }
        let q = self.qual();
        let spec = self.type_spec()?;
        // Function definition: type stars name '(' ... ')' '{'
        let save = self.pos;
        let stars = self.stars();
        if let Tok::Ident(name) = self.peek().clone() {
            if matches!(self.peek_at(1), Tok::Punct("(")) {
                self.bump();
                let params = self.params()?;
                let body = self.block()?;
                return Ok(Item::Func(FuncDef {
                    qual: q,
                    ret: spec,
                    ret_stars: stars,
                    name,
                    params,
                    body,
                    span,
                }));
            }
        }
        self.pos = save;
        let ds = self.declarators()?;
        self.expect(";")?;
        Ok(Item::Global(q, spec, ds))
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect("(")?;
        let mut ps = Vec::new();
        if self.is("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        }
        if !self.eat(")") {
            loop {
                let span = self.span();
                let qual = self.qual();
                let spec = self.type_spec()?;
                let stars = self.stars();
                let (name, fnptr) = if self.is("(") {
                    self.expect("(")?;
                    self.expect("*")?;
                    let n = self.ident()?;
                    self.expect(")")?;
                    (n, Some(self.params()?))
                } else if let Tok::Ident(_) = self.peek() {
                    (self.ident()?, None)
                } else {
                    (String::new(), None)
                };
                ps.push(Param {
                    qual,
                    spec,
                    stars,
                    name,
                    fnptr,
                    span,
                });
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(ps)
    }

    fn declarator(&mut self) -> PResult<Declarator> {
        let span = self.span();
        let stars = self.stars();
        let (name, fnptr) = if self.eat("(") {
            self.expect("*")?;
            let n = self.ident()?;
            self.expect(")")?;
            (n, Some(self.params()?))
        } else {
            (self.ident()?, None)
        };
        let array = if self.eat("[") {
            let e = self.expr()?;
            self.expect("]")?;
            Some(e)
        } else {
            None
        };
        let init = if self.eat("=") {
            Some(self.assign()?)
        } else {
            None
        };
        Ok(Declarator {
            name,
            stars,
            array,
            init,
            fnptr,
            span,
        })
    }

    fn declarators(&mut self) -> PResult<Vec<Declarator>> {
        let mut ds = alloc::vec![self.declarator()?];
        while self.eat(",") {
            ds.push(self.declarator()?);
        }
        Ok(ds)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.eat("}") {
            if self.peek() == &Tok::Eof {
                return self.err("unbalanced '{': reached end of input");
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn batch(&mut self) -> PResult<Stmt> {
        let span = self.span();
        self.expect("[")?;
        let mut out = Vec::new();
        while !self.eat("]") {
            if self.peek() == &Tok::Eof {
                return self.err("unbalanced '[': reached end of input");
            }
            out.push(self.stmt()?);
        }
        Ok(Stmt::Batch(out, span))
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        if self.is("{") {
            return Ok(Stmt::Block(self.block()?));
        }
        if self.is("[") {
            return self.batch();
        }
        if self.eat(";") {
            return Ok(Stmt::Empty);
        }
        if self.eat("if") {
            self.expect("(")?;
            let c = self.expr()?;
            self.expect(")")?;
            let t = Box::new(self.stmt()?);
            let e = if self.eat("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt::If(c, t, e, span));
        }
        if self.eat("while") {
            self.expect("(")?;
            let c = self.expr()?;
            self.expect(")")?;
            return Ok(Stmt::While(c, Box::new(self.stmt()?), span));
        }
        if self.eat("for") {
            self.expect("(")?;
            let init = if self.eat(";") {
                None
            } else if self.starts_type() {
                Some(Box::new(self.decl_stmt()?))
            } else {
                let e = self.expr()?;
                self.expect(";")?;
                Some(Box::new(Stmt::Expr(e)))
            };
            let cond = if self.is(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect(";")?;
            let step = if self.is(")") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::For {
                init,
                cond,
                step,
                body,
                span,
            });
        }
        if self.eat("return") {
            if self.eat(";") {
                return Ok(Stmt::Return(None, span));
            }
            let e = self.expr()?;
            self.expect(";")?;
            return Ok(Stmt::Return(Some(e), span));
        }
        if self.starts_type() {
            return self.decl_stmt();
        }
        let e = self.expr()?;
        self.expect(";")?;
        Ok(Stmt::Expr(e))
    }

    fn decl_stmt(&mut self) -> PResult<Stmt> {
        let q = self.qual();
        let spec = self.type_spec()?;
        let ds = self.declarators()?;
        self.expect(";")?;
        Ok(Stmt::Decl(q, spec, ds))
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.assign()
    }

    fn assign(&mut self) -> PResult<Expr> {
        let lhs = self.binary(0)?;
        let span = self.span();
        let op = match self.peek() {
            Tok::Punct("=") => None,
            Tok::Punct("+=") => Some(BinOp::Add),
            Tok::Punct("-=") => Some(BinOp::Sub),
            Tok::Punct("*=") => Some(BinOp::Mul),
            Tok::Punct("/=") => Some(BinOp::Div),
            Tok::Punct("%=") => Some(BinOp::Mod),
            Tok::Punct("<<=") => Some(BinOp::Shl),
            Tok::Punct(">>=") => Some(BinOp::Shr),
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.assign()?;
        Ok(Expr {
            kind: ExprKind::Assign(op, Box::new(lhs), Box::new(rhs)),
            span,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::Punct(p) => match bin_op(p) {
                    Some(x) => x,
                    None => break,
                },
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            let span = self.span();
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let mk = |kind| Expr { kind, span };
        if self.eat("-") {
            return Ok(mk(ExprKind::Unary(UnOp::Neg, Box::new(self.unary()?))));
        }
        if self.eat("+") {
            return self.unary();
        }
        if self.eat("!") {
            return Ok(mk(ExprKind::Unary(UnOp::Not, Box::new(self.unary()?))));
        }
        if self.eat("~") {
            return Ok(mk(ExprKind::Unary(UnOp::BitNot, Box::new(self.unary()?))));
        }
        if self.eat("*") {
            return Ok(mk(ExprKind::Deref(Box::new(self.unary()?))));
        }
        if self.eat("&") {
            return Ok(mk(ExprKind::AddrOf(Box::new(self.unary()?))));
        }
        if self.eat("++") {
            return Ok(mk(ExprKind::IncDec(1, Box::new(self.unary()?))));
        }
        if self.eat("--") {
            return Ok(mk(ExprKind::IncDec(-1, Box::new(self.unary()?))));
        }
        if self.is("(")
            && matches!(
                self.peek_at(1),
                Tok::Kw("int" | "void" | "struct" | "private" | "public")
            )
        {
            self.bump();
            let tn = self.type_name()?;
            self.expect(")")?;
            let e = self.unary()?;
            return Ok(mk(ExprKind::Cast(tn, Box::new(e))));
        }
        self.postfix()
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let span = self.span();
        let qual = self.qual();
        let spec = self.type_spec()?;
        let stars = self.stars();
        Ok(TypeName {
            qual,
            spec,
            stars,
            span,
        })
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            let span = self.span();
            if self.eat("[") {
                let i = self.expr()?;
                self.expect("]")?;
                e = Expr {
                    kind: ExprKind::Index(Box::new(e), Box::new(i)),
                    span,
                };
            } else if self.eat("(") {
                let mut args = Vec::new();
                if !self.eat(")") {
                    loop {
                        if self.starts_type() {
                            let tn = self.type_name()?;
                            let s = tn.span;
                            args.push(Expr {
                                kind: ExprKind::Type(tn),
                                span: s,
                            });
                        } else {
                            args.push(self.assign()?);
                        }
                        if self.eat(")") {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                e = Expr {
                    kind: ExprKind::Call(Box::new(e), args),
                    span,
                };
            } else if self.eat(".") {
                let f = self.ident()?;
                e = Expr {
                    kind: ExprKind::Field(Box::new(e), f),
                    span,
                };
            } else if self.eat("->") {
                let f = self.ident()?;
                e = Expr {
                    kind: ExprKind::Arrow(Box::new(e), f),
                    span,
                };
            } else if self.eat("++") {
                e = Expr {
                    kind: ExprKind::IncDec(1, Box::new(e)),
                    span,
                };
            } else if self.eat("--") {
                e = Expr {
                    kind: ExprKind::IncDec(-1, Box::new(e)),
                    span,
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.bump() {
            Tok::Int(v) => Ok(Expr {
                kind: ExprKind::Int(v),
                span,
            }),
            Tok::Ident(s) => Ok(Expr {
                kind: ExprKind::Ident(s),
                span,
            }),
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            t => {
                self.pos -= 1;
                self.err(alloc::format!(
                    "expected an expression, found {}",
                    describe(&t)
                ))
            }
        }
    }
}

fn bin_op(p: &str) -> Option<(BinOp, u8)> {
    Some(match p {
        "||" => (BinOp::Or, 1),
        "&&" => (BinOp::And, 2),
        "|" => (BinOp::BitOr, 3),
        "^" => (BinOp::BitXor, 4),
        "&" => (BinOp::BitAnd, 5),
        "==" => (BinOp::Eq, 6),
        "!=" => (BinOp::Ne, 6),
        "<" => (BinOp::Lt, 7),
        "<=" => (BinOp::Le, 7),
        ">" => (BinOp::Gt, 7),
        ">=" => (BinOp::Ge, 7),
        "<<" => (BinOp::Shl, 8),
        ">>" => (BinOp::Shr, 8),
        "+" => (BinOp::Add, 9),
        "-" => (BinOp::Sub, 9),
        "*" => (BinOp::Mul, 10),
        "/" => (BinOp::Div, 10),
        "%" => (BinOp::Mod, 10),
        _ => return None,
    })
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => alloc::format!("identifier '{s}'"),
        Tok::Int(v) => alloc::format!("integer {v}"),
        Tok::Kw(k) => alloc::format!("keyword '{k}'"),
        Tok::Punct(p) => alloc::format!("'{p}'"),
        Tok::Eof => "end of input".to_string(),
    }
}
