//! Benchmark cases: program, size parameter, input generator, and the
//! counter segments reported per size.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptrmpc_core::lang::{Inputs, Options, Phase, RunOutput};

use crate::formats::CsvRow;
use crate::programs::bench as src;
use crate::runner::{self, Report, RunConfig, RunnerError};

/// Token codes shared with the parser program.
pub mod tok {
    pub const ADD: i128 = -1;
    pub const MUL: i128 = -2;
    pub const LPAR: i128 = -3;
    pub const RPAR: i128 = -4;
    pub const END: i128 = -5;
}

/// Stack program operation codes.
pub mod stack_op {
    pub const PUSH: i128 = 1;
    pub const POP: i128 = 2;
    pub const ENQUEUE: i128 = 3;
    pub const DEQUEUE: i128 = 4;
    pub const SNAPSHOT: i128 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Linear,
    Quadratic,
    /// Faster than quadratic; the grid stops where a run takes minutes.
    Steep,
}

impl Growth {
    /// Default size grid.
    pub fn sizes(self) -> Vec<u64> {
        match self {
            Growth::Linear => (5..=14).map(|k| 1u64 << k).collect(),
            Growth::Quadratic => (4..=10).map(|k| 1u64 << k).collect(),
            Growth::Steep => (2..=6).map(|k| 1u64 << k).collect(),
        }
    }
}

/// A named counter interval between two snapshots. Index 0 is the start of
/// the run; index `k` is the `k`-th `smcphase` in execution order.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub name: &'static str,
    pub from: usize,
    pub to: usize,
}

const fn seg(name: &'static str, from: usize, to: usize) -> Segment {
    Segment { name, from, to }
}

#[derive(Debug, Clone, Copy)]
pub struct Case {
    pub id: &'static str,
    pub src: &'static str,
    pub growth: Growth,
    pub segments: &'static [Segment],
    gen: fn(u64, &mut ChaCha8Rng) -> Workload,
}

/// Inputs plus the global overrides that size the program.
#[derive(Debug, Clone)]
pub struct Workload {
    pub inputs: Inputs,
    pub defines: Vec<(&'static str, i128)>,
}

impl Workload {
    pub fn options(&self, base: &Options) -> Options {
        let mut o = base.clone();
        for (k, v) in &self.defines {
            o.defines.insert((*k).to_string(), *v);
        }
        o
    }
}

fn values(name: &str, v: Vec<i128>) -> Inputs {
    let mut m = Inputs::new();
    m.insert(name.to_string(), v);
    m
}

fn small_values(n: u64, rng: &mut ChaCha8Rng) -> Vec<i128> {
    (0..n).map(|_| rng.gen_range(0..20)).collect()
}

fn gen_list(n: u64, rng: &mut ChaCha8Rng) -> Workload {
    Workload {
        inputs: values("array", small_values(n, rng)),
        defines: vec![("count", n as i128)],
    }
}

fn gen_sorted_pu(n: u64, rng: &mut ChaCha8Rng) -> Workload {
    // distinct values keep the program's strict-inequality insertion total
    let mut v: Vec<i128> = (0..4 * n as i128).collect();
    v.shuffle(rng);
    v.truncate(n as usize);
    if rng.gen_bool(0.5) && !v.contains(&10) {
        let k = rng.gen_range(0..n as usize);
        v[k] = 10;
    }
    Workload {
        inputs: values("array", v),
        defines: vec![("count", n as i128)],
    }
}

fn gen_mergesort(n: u64, rng: &mut ChaCha8Rng) -> Workload {
    Workload {
        inputs: values("A", (0..n).map(|_| rng.gen_range(-1000..1000)).collect()),
        defines: vec![("K", n as i128)],
    }
}

fn gen_sorted_array(n: u64, rng: &mut ChaCha8Rng) -> Workload {
    Workload {
        inputs: values("input", small_values(n, rng)),
        defines: vec![("count", n as i128)],
    }
}

/// Operator sequence for `m` operands: 90% multiplications, 10% additions.
pub fn formula_ops(m: u64, rng: &mut ChaCha8Rng) -> Vec<i128> {
    let k = m.saturating_sub(1) as usize;
    let adds = k / 10;
    let mut ops = vec![tok::MUL; k];
    for o in ops.iter_mut().take(adds) {
        *o = tok::ADD;
    }
    ops.shuffle(rng);
    ops
}

/// Token stream `v0 op1 v1 ... v{m-1} END` for the parser program.
pub fn formula_tokens(ops: &[i128]) -> Vec<i128> {
    let mut t = vec![0];
    for (i, &o) in ops.iter().enumerate() {
        t.push(o);
        t.push(i as i128 + 1);
    }
    t.push(tok::END);
    t
}

fn operands(m: u64, rng: &mut ChaCha8Rng) -> Vec<i128> {
    (0..m).map(|_| rng.gen_range(-3..=3)).collect()
}

/// Parser workload for a token stream over `vars`.
pub fn parser_workload(tokens: Vec<i128>, vars: Vec<i128>) -> Workload {
    let mut inputs = Inputs::new();
    let (len, nvars) = (tokens.len() as i128, vars.len().max(1) as i128);
    inputs.insert("tok".into(), tokens);
    inputs.insert("vars".into(), if vars.is_empty() { vec![0] } else { vars });
    Workload {
        inputs,
        defines: vec![("len", len), ("nvars", nvars)],
    }
}

/// Raw-arithmetic workload: `op[i]` joins operands `i-1` and `i`.
pub fn arith_workload(ops: &[i128], vars: Vec<i128>) -> Workload {
    let mut op = vec![0];
    op.extend_from_slice(ops);
    let len = vars.len() as i128;
    let mut inputs = Inputs::new();
    inputs.insert("op".into(), op);
    inputs.insert("v".into(), vars);
    Workload {
        inputs,
        defines: vec![("len", len)],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("formula column {col}: {msg}")]
pub struct FormulaError {
    pub col: usize,
    pub msg: String,
}

/// Tokenizes `expr`, whose identifiers name entries of `bindings`, and
/// checks it against the parser program's grammar.
pub fn formula_tokens_from_str(
    expr: &str,
    bindings: &[(&str, i128)],
) -> Result<Vec<i128>, FormulaError> {
    let mut toks = Vec::new();
    let mut cols = Vec::new();
    let bytes = expr.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let code = match c {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '+' => tok::ADD,
            '*' => tok::MUL,
            '(' => tok::LPAR,
            ')' => tok::RPAR,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let name = &expr[start..i];
                let k = bindings
                    .iter()
                    .position(|(n, _)| *n == name)
                    .ok_or_else(|| FormulaError {
                        col: start + 1,
                        msg: format!("unbound variable '{name}'"),
                    })?;
                toks.push(k as i128);
                cols.push(start + 1);
                continue;
            }
            _ => {
                return Err(FormulaError {
                    col: i + 1,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        };
        toks.push(code);
        cols.push(i + 1);
        i += 1;
    }
    toks.push(tok::END);
    cols.push(expr.len() + 1);
    check_tokens(&toks, bindings.len()).map_err(|k| FormulaError {
        col: cols[k],
        msg: "malformed expression".into(),
    })?;
    Ok(toks)
}

/// Recursive-descent recognizer; on failure returns the offending token
/// index.
pub fn check_tokens(toks: &[i128], nvars: usize) -> Result<(), usize> {
    fn expr(t: &[i128], k: &mut usize, nv: usize) -> Result<(), usize> {
        term(t, k, nv)?;
        while t.get(*k) == Some(&tok::ADD) {
            *k += 1;
            term(t, k, nv)?;
        }
        Ok(())
    }
    fn term(t: &[i128], k: &mut usize, nv: usize) -> Result<(), usize> {
        factor(t, k, nv)?;
        while t.get(*k) == Some(&tok::MUL) {
            *k += 1;
            factor(t, k, nv)?;
        }
        Ok(())
    }
    fn factor(t: &[i128], k: &mut usize, nv: usize) -> Result<(), usize> {
        match t.get(*k) {
            Some(&v) if v >= 0 && (v as usize) < nv => {
                *k += 1;
                Ok(())
            }
            Some(&tok::LPAR) => {
                *k += 1;
                expr(t, k, nv)?;
                if t.get(*k) != Some(&tok::RPAR) {
                    return Err(*k);
                }
                *k += 1;
                Ok(())
            }
            _ => Err(*k),
        }
    }
    let mut k = 0;
    expr(toks, &mut k, nvars)?;
    if toks.get(k) != Some(&tok::END) || k + 1 != toks.len() {
        return Err(k.min(toks.len().saturating_sub(1)));
    }
    Ok(())
}

/// Parser workload for an infix formula.
pub fn formula_workload(expr: &str, bindings: &[(&str, i128)]) -> Result<Workload, FormulaError> {
    let toks = formula_tokens_from_str(expr, bindings)?;
    Ok(parser_workload(
        toks,
        bindings.iter().map(|b| b.1).collect(),
    ))
}

fn gen_parser(m: u64, rng: &mut ChaCha8Rng) -> Workload {
    let ops = formula_ops(m, rng);
    parser_workload(formula_tokens(&ops), operands(m, rng))
}

fn gen_arith(m: u64, rng: &mut ChaCha8Rng) -> Workload {
    let ops = formula_ops(m, rng);
    arith_workload(&ops, operands(m, rng))
}

/// Stack program workload from `(kind, cond, value)` steps.
pub fn stack_workload(steps: &[(i128, i128, i128)]) -> Workload {
    let mut inputs = Inputs::new();
    inputs.insert("kind".into(), steps.iter().map(|s| s.0).collect());
    inputs.insert("cond".into(), steps.iter().map(|s| s.1).collect());
    inputs.insert("val".into(), steps.iter().map(|s| s.2).collect());
    Workload {
        inputs,
        defines: vec![("steps", steps.len() as i128)],
    }
}

fn gen_stack(n: u64, rng: &mut ChaCha8Rng) -> Workload {
    use stack_op::*;
    let mut steps: Vec<(i128, i128, i128)> = (0..n)
        .map(|_| (PUSH, rng.gen_range(0..2), rng.gen_range(-500..500)))
        .collect();
    steps.push((SNAPSHOT, 0, 0));
    steps.push((POP, rng.gen_range(0..2), 0));
    steps.push((SNAPSHOT, 0, 0));
    steps.push((POP, 1, 0));
    stack_workload(&steps)
}

fn gen_queue(n: u64, rng: &mut ChaCha8Rng) -> Workload {
    use stack_op::*;
    let mut steps: Vec<(i128, i128, i128)> = (0..n)
        .map(|_| (ENQUEUE, rng.gen_range(0..2), rng.gen_range(-500..500)))
        .collect();
    steps.push((SNAPSHOT, 0, 0));
    steps.push((DEQUEUE, rng.gen_range(0..2), 0));
    steps.push((SNAPSHOT, 0, 0));
    steps.push((DEQUEUE, 1, 0));
    stack_workload(&steps)
}

const LIST_SEGS: &[Segment] = &[seg("build", 0, 1), seg("traverse", 1, 2)];

pub const CASES: &[Case] = &[
    Case {
        id: "linked_list",
        src: src::LIST,
        growth: Growth::Linear,
        segments: LIST_SEGS,
        gen: gen_list,
    },
    Case {
        id: "linked_list_batched",
        src: src::LIST_BATCHED,
        growth: Growth::Linear,
        segments: LIST_SEGS,
        gen: gen_list,
    },
    Case {
        id: "sorted_du",
        src: src::SORTED_DU,
        growth: Growth::Quadratic,
        segments: LIST_SEGS,
        gen: gen_list,
    },
    Case {
        id: "sorted_pu",
        src: src::SORTED_PU,
        growth: Growth::Steep,
        segments: &[
            seg("build", 0, 1),
            seg("traverse", 1, 2),
            seg("remove_head", 2, 3),
        ],
        gen: gen_sorted_pu,
    },
    Case {
        id: "sorted_array",
        src: src::SORTED_ARRAY,
        growth: Growth::Quadratic,
        segments: LIST_SEGS,
        gen: gen_sorted_array,
    },
    Case {
        id: "mergesort_ptr",
        src: src::MERGESORT_PTR,
        growth: Growth::Quadratic,
        segments: &[seg("sort", 0, 1)],
        gen: gen_mergesort,
    },
    Case {
        id: "mergesort_noptr",
        src: src::MERGESORT_NOPTR,
        growth: Growth::Quadratic,
        segments: &[seg("sort", 0, 1)],
        gen: gen_mergesort,
    },
    Case {
        id: "parser",
        src: src::PARSER,
        growth: Growth::Linear,
        segments: &[seg("eval", 0, 1)],
        gen: gen_parser,
    },
    Case {
        id: "arith",
        src: src::ARITH,
        growth: Growth::Linear,
        segments: &[seg("eval", 0, 1)],
        gen: gen_arith,
    },
    Case {
        id: "stack",
        src: src::STACK,
        growth: Growth::Linear,
        segments: &[seg("push", 0, 1), seg("pop", 1, 2)],
        gen: gen_stack,
    },
    Case {
        id: "queue",
        src: src::STACK,
        growth: Growth::Linear,
        segments: &[seg("enqueue", 0, 1), seg("dequeue", 1, 2)],
        gen: gen_queue,
    },
];

pub fn find(id: &str) -> Option<&'static Case> {
    CASES.iter().find(|c| c.id == id)
}

/// Counters of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SegmentCost {
    pub interactive_ops: u64,
    pub rounds: u64,
    pub bytes: u64,
}

fn snapshot(phases: &[Phase], k: usize) -> Option<SegmentCost> {
    if k == 0 {
        return Some(SegmentCost::default());
    }
    let p = phases.get(k - 1)?;
    Some(SegmentCost {
        interactive_ops: p.interactive_ops,
        rounds: p.rounds,
        bytes: p.bytes,
    })
}

/// Result of one case at one size. Segments whose snapshots the run did
/// not reach are left out.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub case: &'static str,
    pub size: u64,
    pub report: Report,
    pub plain: RunOutput,
    pub segments: Vec<(&'static str, SegmentCost)>,
}

impl Measurement {
    pub fn segment(&self, name: &str) -> SegmentCost {
        self.segments
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| *c)
            .unwrap_or_else(|| panic!("case {} has no segment {name}", self.case))
    }

    pub fn outputs_match(&self) -> bool {
        self.report.output.outputs == self.plain.outputs
    }

    pub fn rows(&self) -> Vec<CsvRow> {
        let s = &self.report.stats;
        let mut rows = vec![CsvRow {
            case: self.case.to_string(),
            size: self.size,
            interactive_ops: s.interactive_ops,
            rounds: s.rounds,
            bytes: s.total_bytes(),
            wall_ms: s.wall_ms,
        }];
        for (name, c) in &self.segments {
            rows.push(CsvRow {
                case: format!("{}/{}", self.case, name),
                size: self.size,
                interactive_ops: c.interactive_ops,
                rounds: c.rounds,
                bytes: c.bytes,
                wall_ms: 0,
            });
        }
        rows
    }
}

impl Case {
    pub fn workload(&self, size: u64, seed: u64) -> Workload {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ size.rotate_left(32));
        (self.gen)(size, &mut rng)
    }

    /// Runs the case at `size` in both modes.
    pub fn measure(
        &self,
        size: u64,
        seed: u64,
        cfg: &RunConfig,
    ) -> Result<Measurement, RunnerError> {
        let w = self.workload(size, seed);
        self.measure_workload(size, &w, cfg)
    }

    pub fn measure_workload(
        &self,
        size: u64,
        w: &Workload,
        cfg: &RunConfig,
    ) -> Result<Measurement, RunnerError> {
        let opts = w.options(&Options::default());
        let prog = runner::compile(self.src, &opts)?;
        let start = Instant::now();
        let mut report = runner::run_mpc(&prog, &opts, &w.inputs, cfg)?;
        report.stats.wall_ms = start.elapsed().as_millis() as u64;
        let plain = runner::run_plain(&prog, &opts, &w.inputs, cfg.parties.kappa)?;
        let phases = &report.output.phases;
        let segments = self
            .segments
            .iter()
            .filter_map(|s| {
                let (a, b) = (snapshot(phases, s.from)?, snapshot(phases, s.to)?);
                let c = SegmentCost {
                    interactive_ops: b.interactive_ops - a.interactive_ops,
                    rounds: b.rounds - a.rounds,
                    bytes: b.bytes - a.bytes,
                };
                Some((s.name, c))
            })
            .collect();
        Ok(Measurement {
            case: self.id,
            size,
            report,
            plain,
            segments,
        })
    }
}

/// Ratios `x[i+1] / x[i]` over consecutive sizes.
pub fn doubling_ratios(values: &[u64]) -> Vec<f64> {
    values
        .windows(2)
        .map(|w| w[1] as f64 / w[0] as f64)
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[u64], ys: &[u64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| ((x as f64).ln(), (y.max(1) as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
