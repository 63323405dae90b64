//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines show up in `cargo test` output.
//! The oracle grid for the pointer-update sorted list at n = 256 takes
//! hours on one core and is skipped unless `ACCEPTANCE_FULL=1` is set; the
//! criterion then reports FAIL with a cost projection. Any other failure
//! makes the process exit nonzero.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ptrmpc::bench::{self, doubling_ratios, loglog_slope, Measurement};
use ptrmpc::programs::reference;
use ptrmpc::runner::{RunConfig, TransportKind};
use ptrmpc_core::field::{select_field_params, Field};
use ptrmpc_core::harness::{Engine, PartyConfig};
use ptrmpc_core::heap::{Address, Cell, Heap, NULL};
use ptrmpc_core::lang::{self, CompileError, Options, Rule};
use ptrmpc_core::mpcops;
use ptrmpc_core::privptr::{
    self, cond_assign, dealloc, deref_read, deref_write, Pred, PrivPtr, Tags,
};
use ptrmpc_core::shamir::{self, Shared};

type Outcome = Result<String, String>;

const PU_FULL_BUDGET_SECS: f64 = 300.0;

fn full() -> bool {
    std::env::var("ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn engine(seed: u64) -> Engine {
    let field = Field::new(select_field_params(32, true, 48)).unwrap();
    Engine::in_process(
        field,
        PartyConfig {
            seed,
            ..Default::default()
        },
    )
    .unwrap()
}

fn share_of(e: &mut Engine, v: i128) -> Shared {
    let fe = e.field().from_i128(v);
    e.input(fe)
}

fn ptr_with(e: &mut Engine, locs: &[Address], tags: &[bool], level: u32) -> PrivPtr {
    let tags = tags.iter().map(|&b| share_of(e, b as i128)).collect();
    PrivPtr {
        locs: locs.to_vec(),
        tags: Tags::Private(tags),
        ty: 0,
        level,
        cast_from: None,
    }
}

fn revealed_tags(e: &Engine, p: &PrivPtr) -> Vec<i128> {
    match &p.tags {
        Tags::Public => vec![1],
        Tags::Private(t) => t.iter().map(|s| e.reveal_signed(s)).collect(),
    }
}

fn measure(case: &str, size: u64, seed: u64) -> Result<Measurement, String> {
    let c = bench::find(case).ok_or_else(|| format!("no case {case}"))?;
    c.measure(size, seed, &RunConfig::default())
        .map_err(|e| format!("{case} n={size} seed={seed}: {e}"))
}

/// The pointer-update build at n = 64 is shared by criteria 1 and 5.
fn pu64() -> &'static (Result<Measurement, String>, f64) {
    static CELL: OnceLock<(Result<Measurement, String>, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let m = measure("sorted_pu", 64, 0);
        (m, t.elapsed().as_secs_f64())
    })
}

// ----- 1 -----------------------------------------------------------------

fn oracle_equivalence() -> (Outcome, bool) {
    let seeds: Vec<u64> = (0..20).collect();
    let mut jobs: Vec<(&'static str, u64, u64)> = Vec::new();
    for c in bench::CASES {
        let sizes: &[u64] = if c.id == "sorted_pu" {
            if full() {
                &[16, 64, 256]
            } else {
                &[16]
            }
        } else {
            &[16, 64, 256]
        };
        for &n in sizes {
            for &s in &seeds {
                jobs.push((c.id, n, s));
            }
        }
    }
    if !full() {
        // partial coverage of the skipped sizes
        jobs.extend((0..4).map(|s| ("sorted_pu", 32, s)));
    }
    let start = Instant::now();
    let results: Vec<Result<(), String>> = jobs
        .par_iter()
        .map(|&(case, n, seed)| {
            let m = measure(case, n, seed)?;
            ensure(m.outputs_match(), || {
                format!("{case} n={n} seed={seed}: outputs differ")
            })
        })
        .collect();
    let mut elapsed = start.elapsed().as_secs_f64();
    let errs: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    if !errs.is_empty() {
        return (
            Err(format!(
                "{} of {} runs failed: {}",
                errs.len(),
                jobs.len(),
                errs[0]
            )),
            false,
        );
    }
    let runs = jobs.len();
    if full() {
        let ok = elapsed < PU_FULL_BUDGET_SECS;
        let msg = format!("{runs} runs agree, {elapsed:.0} s (budget {PU_FULL_BUDGET_SECS:.0} s)");
        return (if ok { Ok(msg) } else { Err(msg) }, false);
    }
    let (m64, t64) = pu64();
    let m64 = match m64 {
        Ok(m) if m.outputs_match() => m,
        Ok(_) => return (Err("sorted_pu n=64 seed=0: outputs differ".into()), false),
        Err(e) => return (Err(e.clone()), false),
    };
    elapsed += t64;
    let m32 = match measure("sorted_pu", 32, 0) {
        Ok(m) => m,
        Err(e) => return (Err(e), false),
    };
    // two more doublings at the last observed ratio
    let r = m64.report.stats.interactive_ops as f64 / m32.report.stats.interactive_ops as f64;
    let ops256 = m64.report.stats.interactive_ops as f64 * r * r;
    let secs256 = t64 * r * r * 20.0;
    (
        Err(format!(
            "{} runs agree in {elapsed:.0} s, but sorted_pu ran only 20 seeds at n=16, 4 at n=32, 1 at n=64 and none at n=256; \
             its cost grows {r:.1}x per doubling, projecting {:.1e} interactive ops per run at n=256 and about {:.1} h \
             for 20 seeds at the measured rate, beyond the {PU_FULL_BUDGET_SECS:.0} s budget",
            runs + 1,
            ops256,
            secs256 / 3600.0
        )),
        true,
    )
}

// ----- 2 -----------------------------------------------------------------

fn worked_examples() -> Outcome {
    // multi-level dereference
    let mut e = engine(7);
    let mut h = Heap::new();
    let p1 = PrivPtr::to(123, 0, 1);
    let p2 = ptr_with(&mut e, &[189, 245], &[false, true], 1);
    let p3 = ptr_with(&mut e, &[123, 176, 207], &[false, true, false], 1);
    let l1 = h.alloc(1, &[Cell::Ptr(p1)], 0, true).unwrap();
    let l2 = h.alloc(1, &[Cell::Ptr(p2)], 0, true).unwrap();
    let l3 = h.alloc(1, &[Cell::Ptr(p3)], 0, true).unwrap();
    let p = ptr_with(&mut e, &[l1, l2, l3], &[false, false, true], 2);
    let r = privptr::deref_read_ptr(&mut e, &h, &p, 0).map_err(|e| e.to_string())?;
    ensure(r.locs == [123, 176, 189, 207, 245], || {
        format!("L' = {:?}", r.locs)
    })?;
    let t = revealed_tags(&e, &r);
    ensure(t == [0, 1, 0, 0, 0], || format!("T' = {t:?}"))?;

    // pfree with two pointers over the same two blocks
    for t1 in [true, false] {
        let mut e = engine(19);
        let mut h = Heap::new();
        let c1 = Cell::Priv(share_of(&mut e, 11));
        let c2 = Cell::Priv(share_of(&mut e, 22));
        let a1 = h.alloc(1, &[c1], 0, true).unwrap();
        let a2 = h.alloc(1, &[c2], 0, true).unwrap();
        let p1 = ptr_with(&mut e, &[a1, a2], &[t1, !t1], 1);
        let p2 = ptr_with(&mut e, &[a2, a1], &[t1, !t1], 1);
        let v2 = h.alloc(1, &[Cell::Ptr(p2)], 0, false).unwrap();
        let want = if t1 { 22 } else { 11 };
        dealloc(&mut e, &mut h, &p1).map_err(|e| e.to_string())?;
        let p2 = h.read(v2).unwrap().as_ptr().unwrap().clone();
        let tags = revealed_tags(&e, &p2);
        ensure(p2.locs.len() == 1 && tags == [1], || {
            format!("p2 after free: {:?} {tags:?}", p2.locs)
        })?;
        let v = deref_read(&mut e, &h, &p2, 0).map_err(|e| e.to_string())?;
        ensure(e.reveal_signed(&v) == want, || "p2 lost its value".into())?;
    }
    Ok("L' = (123,176,189,207,245), T' = (0,1,0,0,0); p2 keeps one location with tag 1".into())
}

// ----- 3 -----------------------------------------------------------------

#[derive(Clone, Copy)]
struct Model {
    target: Address,
    /// Set when an alias of the target was freed.
    dangling: bool,
}

fn tag_invariants() -> Outcome {
    const NP: usize = 5;
    let (mut seqs, mut ops_total, mut dangling_seen, mut zero_seen) = (0, 0, 0u64, 0u64);
    for seed in 0..48u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = engine(seed);
        let mut h = Heap::new();
        let mut cells: BTreeMap<Address, i128> = BTreeMap::new();
        let mut model = Vec::new();
        let mut vars = Vec::new();
        for i in 0..NP {
            let v = Cell::Priv(share_of(&mut e, i as i128));
            let a = h.alloc(1, &[v], 0, true).unwrap();
            cells.insert(a, i as i128);
            vars.push(
                h.alloc(1, &[Cell::Ptr(PrivPtr::to(a, 0, 1))], 0, false)
                    .unwrap(),
            );
            model.push(Model {
                target: a,
                dangling: false,
            });
        }
        let get = |h: &Heap, i: usize| h.read(vars[i]).unwrap().as_ptr().unwrap().clone();
        let len = rng.gen_range(100..=200);
        for step in 0..len {
            let a = rng.gen_range(0..NP);
            let b = rng.gen_range(0..NP);
            let live = |m: &Model| m.target != NULL && !m.dangling;
            match rng.gen_range(0..12) {
                0 => {
                    let q = get(&h, b);
                    h.write(vars[a], Cell::Ptr(q)).unwrap();
                    model[a] = model[b];
                }
                1..=3 => {
                    let c = rng.gen_bool(0.5);
                    let cs = share_of(&mut e, c as i128);
                    let r = cond_assign(&mut e, &get(&h, a), &get(&h, b), &cs)
                        .map_err(|e| e.to_string())?;
                    h.write(vars[a], Cell::Ptr(r)).unwrap();
                    if c {
                        model[a] = model[b];
                    }
                }
                4..=6 if live(&model[a]) => {
                    let v = rng.gen_range(-99..100);
                    let vs = e.const_i(v);
                    let pa = get(&h, a);
                    deref_write(&mut e, &mut h, &pa, 0, &vs).map_err(|e| e.to_string())?;
                    cells.insert(model[a].target, v);
                }
                7..=9 if live(&model[a]) => {
                    let r = deref_read(&mut e, &h, &get(&h, a), 0).map_err(|e| e.to_string())?;
                    let want = cells[&model[a].target];
                    ensure(e.reveal_signed(&r) == want, || {
                        format!("seed {seed} step {step}: read mismatch")
                    })?;
                }
                10 => {
                    let v = Cell::Priv(share_of(&mut e, 1000 + step as i128));
                    let addr = h.alloc(1, &[v], 0, true).unwrap();
                    cells.insert(addr, 1000 + step as i128);
                    h.write(vars[a], Cell::Ptr(PrivPtr::to(addr, 0, 1)))
                        .unwrap();
                    model[a] = Model {
                        target: addr,
                        dangling: false,
                    };
                }
                11 if live(&model[a]) => {
                    let p = get(&h, a);
                    if p.locs.contains(&NULL) {
                        continue;
                    }
                    let (t, victim) = (model[a].target, p.locs[0]);
                    dealloc(&mut e, &mut h, &p)
                        .map_err(|e| format!("seed {seed} step {step}: {e}"))?;
                    for (i, m) in model.iter_mut().enumerate() {
                        if i != a && m.target == t && !m.dangling {
                            m.dangling = true;
                            dangling_seen += 1;
                        }
                    }
                    if victim != t {
                        let moved = cells[&victim];
                        cells.insert(t, moved);
                        for m in model.iter_mut().filter(|m| m.target == victim) {
                            m.target = t;
                        }
                    }
                    cells.remove(&victim);
                    h.write(vars[a], Cell::Ptr(PrivPtr::null(0, 1))).unwrap();
                    model[a] = Model {
                        target: NULL,
                        dangling: false,
                    };
                }
                _ => continue,
            }
            ops_total += 1;
            for (i, m) in model.iter().enumerate() {
                let p = get(&h, i);
                let s = p.tag_sum(&e);
                ensure(s == 0 || s == 1, || {
                    format!("seed {seed} step {step}: tag sum {s}")
                })?;
                if s == 0 {
                    zero_seen += 1;
                    ensure(m.dangling, || {
                        format!("seed {seed} step {step}: tag sum 0 on a live pointer")
                    })?;
                }
                if live(m) {
                    ensure(p.true_loc(&e) == Some(m.target), || {
                        format!("seed {seed} step {step}: wrong target")
                    })?;
                }
            }
        }
        seqs += 1;
    }
    ensure(dangling_seen > 0 && zero_seen > 0, || {
        "no dangling scenario was exercised".into()
    })?;
    Ok(format!(
        "{seqs} sequences, {ops_total} pointer ops, {dangling_seen} deliberate dangling pointers, tag sums in {{0,1}}"
    ))
}

// ----- 4 -----------------------------------------------------------------

fn cost_contracts() -> Outcome {
    let mut e = engine(21);
    let mut h = Heap::new();
    let z = Cell::Priv(e.zero());
    let base = h.alloc(1000, &[z], 0, true).unwrap();
    let locs: Vec<Address> = (0..1000).map(|i| base + i).collect();
    let tags: Vec<bool> = (0..1000).map(|i| i == 417).collect();
    let p = ptr_with(&mut e, &locs, &tags, 1);
    h.write(base + 417, Cell::Priv(e.const_i(9))).unwrap();
    let before = e.stats().interactive_ops;
    let r = deref_read(&mut e, &h, &p, 0).map_err(|e| e.to_string())?;
    let deref_ops = e.stats().interactive_ops - before;
    ensure(deref_ops == 1 && e.reveal_signed(&r) == 9, || {
        format!("deref: {deref_ops} ops")
    })?;

    let mut eq_ops = Vec::new();
    for (ta, tb, want) in [
        ([true, false, false], [true, false, false], 0),
        ([false, true, false], [true, false, false], 1),
    ] {
        let p1 = ptr_with(&mut e, &[100, 200, 300], &ta, 1);
        let p2 = ptr_with(&mut e, &[200, 300, 400], &tb, 1);
        let before = e.stats().interactive_ops;
        let pred = privptr::ptr_pred_equal(&mut e, &p1, &p2).map_err(|e| e.to_string())?;
        eq_ops.push(e.stats().interactive_ops - before);
        let Pred::Private(s) = pred else {
            return Err("equality was public".into());
        };
        ensure(e.reveal_signed(&s) == want, || "equality value".into())?;
    }
    ensure(eq_ops.iter().all(|&k| k == 1), || {
        format!("equality ops {eq_ops:?}")
    })?;

    let xs: Vec<Shared> = (0..10_000).map(|i| share_of(&mut e, i % 13)).collect();
    let ys: Vec<Shared> = (0..10_000).map(|i| share_of(&mut e, i % 7 - 3)).collect();
    let want: i128 = (0..10_000).map(|i| (i % 13) * (i % 7 - 3)).sum();
    let (r0, o0) = (e.stats().rounds, e.stats().interactive_ops);
    let ip = e.inner_product(&xs, &ys).map_err(|e| e.to_string())?;
    let (ip_rounds, ip_ops) = (e.stats().rounds - r0, e.stats().interactive_ops - o0);
    ensure(
        ip_rounds == 1 && ip_ops == 1 && e.reveal_signed(&ip) == want,
        || format!("inner product: {ip_rounds} rounds, {ip_ops} ops"),
    )?;

    let a = h.alloc(1, &[Cell::Priv(e.zero())], 0, true).unwrap();
    let before = e.stats().interactive_ops;
    dealloc(&mut e, &mut h, &PrivPtr::to(a, 0, 1)).map_err(|e| e.to_string())?;
    let free_ops = e.stats().interactive_ops - before;
    ensure(free_ops == 0 && h.block(a).is_none(), || {
        format!("pfree: {free_ops} ops")
    })?;

    // the same contracts seen from a program
    let src = "struct node { private int data; struct node *next; };
        private int out;
        public int main() {
            struct node *p;
            p = pmalloc(1, struct node);
            p->data = 5;
            out = p->data;
            pfree(p);
            smcoutput(out, 1);
            return 0;
        }";
    let prog = lang::compile(src, &Options::default()).map_err(|e| e.to_string())?;
    let rep = ptrmpc::runner::run_mpc(
        &prog,
        &Options::default(),
        &lang::Inputs::new(),
        &RunConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(rep.stats.interactive_ops == 1, || {
        format!(
            "program with public pfree: {} ops",
            rep.stats.interactive_ops
        )
    })?;

    Ok(format!(
        "deref at alpha=1000: {deref_ops} op; overlapping equality: 1 op; inner product of 10^4: {ip_rounds} round; \
         single-location pfree: {free_ops} ops"
    ))
}

// ----- 5 -----------------------------------------------------------------

fn series(case: &str, seg: &str, sizes: &[u64]) -> Result<Vec<u64>, String> {
    sizes
        .iter()
        .map(|&n| {
            let m = if case == "sorted_pu" && n == 64 {
                pu64().0.clone()?
            } else {
                measure(case, n, 0)?
            };
            ensure(m.outputs_match(), || {
                format!("{case} n={n}: outputs differ")
            })?;
            Ok(m.segment(seg).interactive_ops)
        })
        .collect()
}

fn scaling() -> Outcome {
    let checks: [(&str, &str, &str, &[u64], f64, f64); 4] = [
        (
            "traversal",
            "linked_list",
            "traverse",
            &[32, 64, 128, 256, 512],
            1.8,
            2.2,
        ),
        (
            "DU build",
            "sorted_du",
            "build",
            &[16, 32, 64, 128, 256],
            3.5,
            4.5,
        ),
        (
            "PU build",
            "sorted_pu",
            "build",
            &[4, 8, 16, 32, 64],
            6.0,
            f64::INFINITY,
        ),
        (
            "conditional pop",
            "stack",
            "pop",
            &[32, 64, 128, 256, 512],
            1.8,
            2.2,
        ),
    ];
    let mut parts = Vec::new();
    for (name, case, seg, sizes, lo, hi) in checks {
        let ops = series(case, seg, sizes)?;
        let ratios = doubling_ratios(&ops);
        let slope = loglog_slope(sizes, &ops);
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
        ensure(ratios.iter().all(|&r| r >= lo && r <= hi), || {
            format!("{name} ratios [{}] outside [{lo}, {hi}]", shown.join(", "))
        })?;
        parts.push(format!("{name} [{}] slope {slope:.2}", shown.join(", ")));
    }
    Ok(parts.join("; "))
}

// ----- 6 -----------------------------------------------------------------

fn parser_overhead() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 6..=10 {
        let m = 1u64 << k;
        for seed in 0..3 {
            let p = measure("parser", m, seed)?;
            let a = measure("arith", m, seed)?;
            ensure(p.outputs_match() && a.outputs_match(), || {
                format!("m={m}: secure and clear differ")
            })?;
            ensure(
                p.report.output.get("result") == a.report.output.get("sum"),
                || format!("m={m} seed={seed}: parser and arithmetic disagree"),
            )?;
            ensure(p.report.output.get("accepted") == [1], || {
                format!("m={m}: formula rejected")
            })?;
            let r = p.report.stats.interactive_ops as f64 / a.report.stats.interactive_ops as f64;
            worst = worst.max(r);
        }
    }
    let pct = (worst - 1.0) * 100.0;
    ensure(worst <= 1.10, || format!("parser overhead {pct:.1}%"))?;
    Ok(format!(
        "max overhead {pct:.1}% over formulas of 2^6..2^10 operations"
    ))
}

// ----- 7 -----------------------------------------------------------------

fn mergesort_parity() -> Outcome {
    let mut shown = Vec::new();
    for k in [16u64, 64, 256] {
        for seed in 0..3 {
            let a = measure("mergesort_ptr", k, seed)?;
            let b = measure("mergesort_noptr", k, seed)?;
            ensure(a.outputs_match() && b.outputs_match(), || {
                format!("K={k}: secure and clear differ")
            })?;
            ensure(a.report.output.outputs == b.report.output.outputs, || {
                format!("K={k}: outputs differ")
            })?;
            let (oa, ob) = (
                a.report.stats.interactive_ops,
                b.report.stats.interactive_ops,
            );
            ensure(oa == ob, || format!("K={k}: {oa} vs {ob} ops"))?;
            let mut want = bench::find("mergesort_ptr")
                .unwrap()
                .workload(k, seed)
                .inputs["A"]
                .clone();
            want.sort_unstable();
            let got = a.report.output.get("A");
            ensure(got[1..] == want[..], || format!("K={k}: not sorted"))?;
            ensure(got[0] == want[k as usize / 2], || {
                format!("K={k}: wrong median")
            })?;
            if seed == 0 {
                shown.push(format!("K={k}: {oa}"));
            }
        }
    }
    Ok(format!("identical outputs and ops ({})", shown.join(", ")))
}

// ----- 8 -----------------------------------------------------------------

fn rejected_rules(src: &str, ptr_arith: bool) -> Result<Vec<Rule>, String> {
    let opts = Options {
        ptr_arith,
        ..Options::default()
    };
    match lang::compile(src, &opts) {
        Ok(_) => Ok(Vec::new()),
        Err(CompileError::Rejected(rs)) => Ok(rs.into_iter().map(|r| r.rule).collect()),
        Err(e) => Err(format!("syntax error: {e}")),
    }
}

const WITNESSES: &[(Rule, &str, &str)] = &[
    (
        Rule::A,
        "public int b; public int main() { private int *p; p = &b; return 0; }",
        "private int a; public int main() { private int *p; p = &a; return 0; }",
    ),
    (
        Rule::B,
        "public int a, b; private int c;
         public int main() { public int *p; p = &a; if (c > 0) p = &b; return 0; }",
        "public int a, b; private int c;
         public int main() { public int *p; p = &a; if (a > 0) p = &b; return 0; }",
    ),
    (
        Rule::C,
        "struct node { private int data; struct node *next; }; private int c;
         public int main() { struct node *p; p = pmalloc(1, struct node); if (c > 0) pfree(p); return 0; }",
        "struct node { private int data; struct node *next; }; private int c;
         public int main() { struct node *p; p = pmalloc(1, struct node); if (c > 0) p->data = 1; pfree(p); return 0; }",
    ),
    (
        Rule::D,
        "struct s { public int k; private int v; }; private int c;
         public int main() { struct s x, y; struct s *p; p = &x; if (c > 0) p = &y; return 0; }",
        "struct s { private int k; private int v; }; private int c;
         public int main() { struct s x, y; struct s *p; p = &x; if (c > 0) p = &y; return 0; }",
    ),
    (
        Rule::E,
        "public int n; private int c; public int main() { if (c > 0) n = 1; return 0; }",
        "private int n; private int c; public int main() { if (c > 0) n = 1; return 0; }",
    ),
    (
        Rule::F,
        "private int c; public int main() { public int i; for (i = 0; i < c; i++) { } return 0; }",
        "private int c; public int main() { public int i; for (i = 0; i < 10; i++) { } return 0; }",
    ),
    (
        Rule::G,
        "private int a[4]; public int main() { private int *p; p = a; p = p + 1; return 0; }",
        "private int a[4]; public int main() { private int *p; p = a; p = &a[1]; return 0; }",
    ),
];

fn checker() -> Outcome {
    for (rule, witness, sibling) in WITNESSES {
        let got = rejected_rules(witness, false)?;
        ensure(got == [*rule], || {
            format!("witness for rule ({}) gave {got:?}", rule.id())
        })?;
        let got = rejected_rules(sibling, false)?;
        ensure(got.is_empty(), || {
            format!("sibling for rule ({}) gave {got:?}", rule.id())
        })?;
    }
    // the arithmetic witness is accepted once enabled
    ensure(rejected_rules(WITNESSES[6].1, true)?.is_empty(), || {
        "rule (g) with the flag".into()
    })?;
    for (name, src) in reference::ALL {
        let got = rejected_rules(src, false)?;
        ensure(got.is_empty(), || {
            format!("reference program {name} rejected: {got:?}")
        })?;
    }
    Ok(format!(
        "7 witness/sibling pairs; {} reference programs accepted",
        reference::ALL.len()
    ))
}

// ----- 9 -----------------------------------------------------------------

fn primes_below(n: u128) -> Vec<u128> {
    (5..n)
        .filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0))
        .collect()
}

/// `a * b mod p` by shift-and-add, independent of the field's reduction.
fn mulmod(mut a: u128, mut b: u128, p: u128) -> u128 {
    let mut r = 0u128;
    a %= p;
    while b > 0 {
        if b & 1 == 1 {
            r = (r + a) % p;
        }
        a = (a << 1) % p;
        b >>= 1;
    }
    r
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

fn mpc_layer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let small = primes_below(100);
    let mut sharings = 0u64;
    for &p in &small {
        let f = Field::with_prime(p).map_err(|e| e.to_string())?;
        for (n, t) in [(3usize, 1usize), (5, 2), (7, 3)] {
            if n as u128 >= p {
                continue;
            }
            let subs = subsets(n, t + 1);
            for s in 0..p {
                let shares =
                    shamir::share(&f, f.elem(s), n, t, &mut rng).map_err(|e| e.to_string())?;
                ensure(shamir::consistent(&f, &shares, t), || {
                    format!("p={p}: inconsistent sharing")
                })?;
                for sub in &subs {
                    let pick: Vec<_> = sub.iter().map(|&i| shares[i]).collect();
                    let r = shamir::reconstruct(&f, &pick, t).map_err(|e| e.to_string())?;
                    ensure(r.value() == s, || {
                        format!("p={p} n={n}: subset {sub:?} disagrees")
                    })?;
                }
                sharings += 1;
            }
        }
        let mut e = Engine::in_process(
            f,
            PartyConfig {
                seed: p as u64,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        for a in 0..p {
            let x = e.input(f.elem(a));
            let ys: Vec<Shared> = (0..p).map(|b| e.input(f.elem(b))).collect();
            let pairs: Vec<(&Shared, &Shared)> = ys.iter().map(|y| (&x, y)).collect();
            let prods = e.mul_many(&pairs).map_err(|e| e.to_string())?;
            for (b, z) in prods.iter().enumerate() {
                ensure(e.reveal(z).value() == a * b as u128 % p, || {
                    format!("p={p}: {a}*{b}")
                })?;
            }
            let xs = vec![x.clone(); ys.len()];
            let ip = e.inner_product(&xs, &ys).map_err(|e| e.to_string())?;
            let want = (0..p).map(|b| a * b).sum::<u128>() % p;
            ensure(e.reveal(&ip).value() == want, || {
                format!("p={p}: inner product")
            })?;
        }
    }

    let f = Field::new(select_field_params(32, true, 48)).map_err(|e| e.to_string())?;
    ensure(f.params().field_bitlen == 81, || {
        format!("field is {} bits", f.params().field_bitlen)
    })?;
    let prime = f.prime();
    let mut e = Engine::in_process(
        f,
        PartyConfig {
            seed: 81,
            n: 5,
            t: 2,
            kappa: 48,
        },
    )
    .map_err(|e| e.to_string())?;
    for _ in 0..500 {
        let (a, b) = (rng.gen::<u128>() % prime, rng.gen::<u128>() % prime);
        let (x, y) = (e.input(f.elem(a)), e.input(f.elem(b)));
        let z = e.mul(&x, &y).map_err(|e| e.to_string())?;
        ensure(e.reveal(&z).value() == mulmod(a, b, prime), || {
            format!("81-bit {a}*{b}")
        })?;
        let shares: Vec<_> = z.shares().collect();
        ensure(shamir::consistent(&f, &shares, 2), || {
            "product shares off degree".into()
        })?;
    }
    let (xs, ys): (Vec<u128>, Vec<u128>) = (0..64)
        .map(|_| (rng.gen::<u128>() % prime, rng.gen::<u128>() % prime))
        .unzip();
    let sx: Vec<Shared> = xs.iter().map(|&v| e.input(f.elem(v))).collect();
    let sy: Vec<Shared> = ys.iter().map(|&v| e.input(f.elem(v))).collect();
    let ip = e.inner_product(&sx, &sy).map_err(|e| e.to_string())?;
    let want = xs
        .iter()
        .zip(&ys)
        .fold(0, |acc, (&a, &b)| (acc + mulmod(a, b, prime)) % prime);
    ensure(e.reveal(&ip).value() == want, || {
        "81-bit inner product".into()
    })?;

    let f6 = Field::new(select_field_params(6, true, 48)).map_err(|e| e.to_string())?;
    let mut e = Engine::in_process(
        f6,
        PartyConfig {
            seed: 6,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let vals: Vec<i128> = (-32..32).collect();
    let sh: Vec<Shared> = vals.iter().map(|&v| e.input(f6.from_i128(v))).collect();
    let pairs: Vec<(&Shared, &Shared)> = sh
        .iter()
        .flat_map(|x| sh.iter().map(move |y| (x, y)))
        .collect();
    let lt = mpcops::lt_many(&mut e, &pairs, 6).map_err(|e| e.to_string())?;
    let eq = mpcops::eq_many(&mut e, &pairs, 6).map_err(|e| e.to_string())?;
    let grid: Vec<(i128, i128)> = vals
        .iter()
        .flat_map(|&x| vals.iter().map(move |&y| (x, y)))
        .collect();
    for (k, &(x, y)) in grid.iter().enumerate() {
        ensure(e.reveal_signed(&lt[k]) == (x < y) as i128, || {
            format!("{x} < {y}")
        })?;
        ensure(e.reveal_signed(&eq[k]) == (x == y) as i128, || {
            format!("{x} == {y}")
        })?;
    }
    Ok(format!(
        "{sharings} sharings over {} primes < 100 with all subsets; exhaustive products; 500 random 81-bit products; {} comparison pairs",
        small.len(),
        grid.len()
    ))
}

// ----- 10 ----------------------------------------------------------------

fn transport_equivalence() -> Outcome {
    let cases = [
        ("linked_list", 16),
        ("sorted_du", 16),
        ("sorted_pu", 8),
        ("mergesort_ptr", 16),
        ("parser", 32),
        ("stack", 16),
    ];
    for (case, n) in cases {
        let c = bench::find(case).unwrap();
        let run = |transport| {
            let cfg = RunConfig {
                parties: PartyConfig {
                    seed: 5,
                    ..Default::default()
                },
                transport,
            };
            c.measure(n, 5, &cfg).map_err(|e| format!("{case}: {e}"))
        };
        let a = run(TransportKind::InProc)?;
        let b = run(TransportKind::Tcp)?;
        ensure(a.report.output.outputs == b.report.output.outputs, || {
            format!("{case}: outputs differ")
        })?;
        let (sa, sb) = (&a.report.stats, &b.report.stats);
        ensure(
            (sa.interactive_ops, sa.rounds, sa.total_bytes())
                == (sb.interactive_ops, sb.rounds, sb.total_bytes()),
            || format!("{case}: counters differ"),
        )?;
    }
    Ok(format!(
        "{} programs give identical outputs and counters over both transports",
        cases.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> (Outcome, bool)); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("worked examples", || (worked_examples(), false)),
        ("tag invariants", || (tag_invariants(), false)),
        ("cost contracts", || (cost_contracts(), false)),
        ("complexity scaling", || (scaling(), false)),
        ("parser overhead", || (parser_overhead(), false)),
        ("mergesort parity", || (mergesort_parity(), false)),
        ("static checker", || (checker(), false)),
        ("mpc layer", || (mpc_layer(), false)),
        ("transport equivalence", || (transport_equivalence(), false)),
    ];
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut unexpected = 0;
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !args.is_empty() && !args.iter().any(|a| name.contains(a.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (outcome, budget_only) = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => {
                passed += 1;
                println!("criterion {:>2} {name}: PASS ({secs:.1} s) {msg}", i + 1);
            }
            Err(msg) => {
                if !budget_only {
                    unexpected += 1;
                }
                println!("criterion {:>2} {name}: FAIL ({secs:.1} s) {msg}", i + 1);
            }
        }
    }
    println!("{passed} passed, {unexpected} unexpected failures");
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
