//! Shipped programs against clear-value expectations.

use ptrmpc::bench::{self, stack_op::*, Measurement, Workload};
use ptrmpc::programs::{bench as bench_src, reference};
use ptrmpc::runner::{self, RunConfig};
use ptrmpc_core::lang::{Inputs, Options};

fn run(case: &str, size: u64, w: &Workload) -> Measurement {
    let m = bench::find(case)
        .unwrap()
        .measure_workload(size, w, &RunConfig::default())
        .unwrap_or_else(|e| panic!("{case}: {e}"));
    assert!(m.outputs_match(), "{case}: secure and clear outputs differ");
    m
}

fn out(m: &Measurement, name: &str) -> Vec<i128> {
    m.report.output.get(name)
}

#[test]
fn reference_and_bench_programs_are_accepted() {
    for (name, src) in reference::ALL.iter().chain(bench_src::ALL) {
        runner::compile(src, &Options::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn reference_list_counts_matches() {
    let mut opts = Options::default();
    opts.defines.insert("count".into(), 8);
    let prog = runner::compile(reference::LIST, &opts).unwrap();
    let mut inputs = Inputs::new();
    inputs.insert("array".into(), vec![10, 3, 10, 0, -10, 10, 11, 9]);
    let r = runner::run_mpc(&prog, &opts, &inputs, &RunConfig::default()).unwrap();
    assert_eq!(r.output.get("output"), vec![3]);
    let p = runner::run_plain(&prog, &opts, &inputs, 48).unwrap();
    assert_eq!(p.outputs, r.output.outputs);
}

#[test]
fn list_variants_count_the_same() {
    for seed in 0..3 {
        let case = bench::find("linked_list").unwrap();
        let w = case.workload(32, seed);
        let want = w.inputs["array"].iter().filter(|&&v| v == 10).count() as i128;
        for id in ["linked_list", "linked_list_batched", "sorted_du"] {
            assert_eq!(out(&run(id, 32, &w), "output"), vec![want], "{id}");
        }
    }
}

#[test]
fn batching_cuts_traversal_rounds() {
    let w = bench::find("linked_list").unwrap().workload(256, 1);
    let plain = run("linked_list", 256, &w).segment("traverse");
    let batched = run("linked_list_batched", 256, &w).segment("traverse");
    assert!(
        batched.rounds * 8 <= plain.rounds,
        "{} vs {}",
        batched.rounds,
        plain.rounds
    );
}

#[test]
fn sorted_array_tracks_the_data_update_list() {
    let w = bench::find("sorted_du").unwrap().workload(64, 4);
    let du = run("sorted_du", 64, &w);
    let mut wa = w.clone();
    let values = wa.inputs.remove("array").unwrap();
    wa.inputs.insert("input".into(), values);
    let arr = run("sorted_array", 64, &wa);
    assert_eq!(du.report.output.outputs, arr.report.output.outputs);
    let ratio =
        arr.segment("build").interactive_ops as f64 / du.segment("build").interactive_ops as f64;
    assert!((0.5..=1.3).contains(&ratio), "{ratio}");
}

#[test]
fn pointer_update_head_removal_returns_minimum() {
    for seed in 0..4 {
        let case = bench::find("sorted_pu").unwrap();
        let w = case.workload(8, seed);
        let a = &w.inputs["array"];
        let m = run("sorted_pu", 8, &w);
        assert_eq!(out(&m, "val"), vec![*a.iter().min().unwrap()]);
        assert_eq!(
            out(&m, "output"),
            vec![a.iter().filter(|&&v| v == 10).count() as i128]
        );
    }
}

#[test]
fn mergesort_median() {
    for (seed, presorted) in [(0, false), (1, false), (2, true)] {
        let case = bench::find("mergesort_ptr").unwrap();
        let mut w = case.workload(16, seed);
        let mut sorted = w.inputs["A"].clone();
        sorted.sort_unstable();
        if presorted {
            w.inputs.insert("A".into(), sorted.clone());
        }
        for id in ["mergesort_ptr", "mergesort_noptr"] {
            let got = out(&run(id, 16, &w), "A");
            assert_eq!(got[0], sorted[8], "{id}");
            assert_eq!(got[1..], sorted[..], "{id}");
        }
    }
}

#[test]
fn parser_evaluates_formulas() {
    let b = [("a", 2), ("b", 3), ("c", 4)];
    for (expr, want) in [
        ("a*b+c", 10),
        ("a+b*c", 14),
        ("(a+b)*c", 20),
        ("(a)", 2),
        ("((c))*a", 8),
    ] {
        let w = bench::formula_workload(expr, &b).unwrap();
        let m = run("parser", 0, &w);
        assert_eq!(out(&m, "result"), vec![want], "{expr}");
        assert_eq!(out(&m, "accepted"), vec![1], "{expr}");
    }
    let w = bench::formula_workload("(a)", &[("a", -7)]).unwrap();
    assert_eq!(out(&run("parser", 0, &w), "result"), vec![-7]);
}

#[test]
fn malformed_formulas_never_reach_the_engine() {
    let b = [("a", 1), ("b", 2)];
    for bad in ["a+", "(a", "a b", "a+c", "a/b"] {
        assert!(bench::formula_workload(bad, &b).is_err(), "{bad}");
    }
}

#[test]
fn parser_matches_raw_arithmetic_cost() {
    for m in [16u64, 128] {
        let p = run("parser", m, &bench::find("parser").unwrap().workload(m, 3));
        let a = run("arith", m, &bench::find("arith").unwrap().workload(m, 3));
        assert_eq!(out(&p, "result"), out(&a, "sum"));
        // node releases are single-location frees and cost nothing
        assert_eq!(
            p.report.stats.interactive_ops,
            a.report.stats.interactive_ops
        );
    }
}

#[test]
fn stack_pop_under_false_condition_keeps_the_stack() {
    let steps = [
        (PUSH, 1, 5),
        (PUSH, 0, 6),
        (PUSH, 1, 7),
        (POP, 0, 0),
        (POP, 1, 0),
        (POP, 1, 0),
        (POP, 1, 0),
    ];
    let m = run("stack", 7, &bench::stack_workload(&steps));
    assert_eq!(out(&m, "out"), vec![0, 7, 5, 0]);
    assert_eq!(out(&m, "oks"), vec![0, 1, 1, 0]);
}

#[test]
fn queue_is_first_in_first_out() {
    let steps = [
        (ENQUEUE, 1, 5),
        (ENQUEUE, 1, 7),
        (DEQUEUE, 0, 0),
        (ENQUEUE, 1, 9),
        (DEQUEUE, 1, 0),
        (DEQUEUE, 1, 0),
        (DEQUEUE, 1, 0),
    ];
    let m = run("queue", 7, &bench::stack_workload(&steps));
    assert_eq!(out(&m, "out"), vec![0, 5, 7, 9]);
    assert_eq!(out(&m, "oks"), vec![0, 1, 1, 1]);
}

#[test]
fn conditional_push_is_constant_and_pop_linear() {
    let cost = |n: u64| {
        let m = run("stack", n, &bench::find("stack").unwrap().workload(n, 0));
        (
            m.segment("push").interactive_ops,
            m.segment("pop").interactive_ops,
        )
    };
    let (push32, pop32) = cost(32);
    let (push64, pop64) = cost(64);
    assert_eq!(push32, 32);
    assert_eq!(push64, 64);
    assert_eq!(pop64, 2 * pop32);
}
