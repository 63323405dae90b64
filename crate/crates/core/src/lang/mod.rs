//! The source language: parser, checker, and the two interpreters.
//!
//! Programs are written in a small C subset with `private`/`public`
//! qualifiers. [`compile`] parses and checks a program; [`run_mpc`] executes
//! it over a secret-sharing [`Engine`] and [`run_plain`] executes the same
//! semantics on clear values, serving as the reference for the first.

pub mod ast;
pub mod check;
pub mod interp;
pub mod ir;
pub mod parse;
pub mod plain;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::field::{select_field_params, FieldParams};
use crate::harness::Engine;

pub use ast::Span;
pub use check::{CheckOptions, Rejection, Rule};
pub use ir::Program;
pub use parse::SyntaxError;

/// Compilation and run-time switches.
#[derive(Debug, Clone)]
pub struct Options {
    /// Accept pointer arithmetic.
    pub ptr_arith: bool,
    /// Abort on null dereference instead of reading zero / dropping writes.
    pub strict_null: bool,
    /// Width of `int` without an explicit `<bits>`.
    pub default_bits: u32,
    /// Replacement initializers for public global integers, by name.
    pub defines: BTreeMap<String, i128>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            ptr_arith: false,
            strict_null: false,
            default_bits: 32,
            defines: BTreeMap::new(),
        }
    }
}

/// Input values by variable name.
pub type Inputs = BTreeMap<String, Vec<i128>>;

/// Counter snapshot taken by `smcphase(id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub id: i128,
    pub interactive_ops: u64,
    pub rounds: u64,
    /// Bytes sent by all parties so far.
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOutput {
    /// `smcoutput` results in program order.
    pub outputs: Vec<(String, Vec<i128>)>,
    pub phases: Vec<Phase>,
    /// Branch bodies executed under private conditions.
    pub branch_bodies: u64,
    /// In-band error signals (null or released memory accesses).
    pub diagnostics: u64,
}

impl RunOutput {
    /// All values output under `name`, concatenated.
    pub fn get(&self, name: &str) -> Vec<i128> {
        self.outputs
            .iter()
            .filter(|(n, _)| n == name)
            .flat_map(|(_, v)| v.iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileError {
    Syntax(SyntaxError),
    Rejected(Vec<Rejection>),
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompileError::Syntax(e) => write!(f, "{e}"),
            CompileError::Rejected(rs) => {
                for (i, r) in rs.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunError {
    /// Missing or malformed input values.
    Input(String),
    /// The program performed an operation that cannot proceed.
    Abort { span: Span, msg: String },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Input(m) => write!(f, "input error: {m}"),
            RunError::Abort { span, msg } => write!(f, "aborted at {span}: {msg}"),
        }
    }
}

/// Parses and checks a program.
pub fn compile(src: &str, opts: &Options) -> Result<Program, CompileError> {
    let ast = parse::parse(src).map_err(CompileError::Syntax)?;
    let copts = CheckOptions {
        ptr_arith: opts.ptr_arith,
        default_bits: opts.default_bits,
    };
    check::check(&ast, &copts).map_err(CompileError::Rejected)
}

/// Field parameters sized for the program.
pub fn field_params(prog: &Program, kappa: u32) -> FieldParams {
    select_field_params(prog.max_bits.max(1), prog.needs_comparison, kappa)
}

/// Runs the program over `eng`, whose field must come from [`field_params`]
/// (or be larger).
pub fn run_mpc(
    prog: &Program,
    eng: &mut Engine,
    opts: &Options,
    inputs: &Inputs,
) -> Result<RunOutput, RunError> {
    interp::Mpc::new(prog, eng, opts, inputs).run()
}

/// Runs the program on clear values. Private arithmetic is reduced modulo
/// the same prime the secure run uses.
pub fn run_plain(
    prog: &Program,
    params: &FieldParams,
    opts: &Options,
    inputs: &Inputs,
) -> Result<RunOutput, RunError> {
    plain::Plain::new(prog, params, opts, inputs)?.run()
}
