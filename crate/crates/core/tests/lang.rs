//! Programs run through both interpreters.

use std::collections::BTreeMap;

use proptest::prelude::*;
use ptrmpc_core::field::Field;
use ptrmpc_core::harness::{Engine, PartyConfig, RoundStats};
use ptrmpc_core::lang::{self, Inputs, Options, RunError, RunOutput};

fn inputs(pairs: &[(&str, &[i128])]) -> Inputs {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_vec()))
        .collect::<BTreeMap<_, _>>()
}

fn mpc_opts(src: &str, ins: &Inputs, opts: &Options) -> Result<(RunOutput, RoundStats), RunError> {
    let prog = lang::compile(src, opts).unwrap_or_else(|e| panic!("{e}"));
    let field = Field::new(lang::field_params(&prog, 48)).unwrap();
    let mut eng = Engine::in_process(
        field,
        PartyConfig {
            seed: 3,
            ..Default::default()
        },
    )
    .unwrap();
    let out = lang::run_mpc(&prog, &mut eng, opts, ins)?;
    Ok((out, eng.stats().clone()))
}

fn plain_opts(src: &str, ins: &Inputs, opts: &Options) -> Result<RunOutput, RunError> {
    let prog = lang::compile(src, opts).unwrap_or_else(|e| panic!("{e}"));
    lang::run_plain(&prog, &lang::field_params(&prog, 48), opts, ins)
}

/// Runs both modes, checks they agree, and returns the secure run.
fn both(src: &str, ins: &Inputs) -> (RunOutput, RoundStats) {
    let opts = Options::default();
    let (m, st) = mpc_opts(src, ins, &opts).unwrap_or_else(|e| panic!("mpc: {e}"));
    let p = plain_opts(src, ins, &opts).unwrap_or_else(|e| panic!("plain: {e}"));
    assert_eq!(m.outputs, p.outputs, "modes disagree");
    (m, st)
}

#[test]
fn private_if_else_picks_the_true_branch() {
    let src = "private int c, a;
        public int main() {
            smcinput(c, 1);
            if (c) a = 5; else a = 7;
            smcoutput(a, 1);
            return 0;
        }";
    for (c, want) in [(1, 5), (0, 7)] {
        let (out, _) = both(src, &inputs(&[("c", &[c])]));
        assert_eq!(out.get("a"), vec![want]);
        assert_eq!(out.branch_bodies, 2);
    }
    let p = plain_opts(src, &inputs(&[("c", &[1])]), &Options::default()).unwrap();
    assert_eq!(p.branch_bodies, 1);
}

#[test]
fn each_private_branch_runs_once() {
    let src = "private int c[3], a;
        public int main() {
            public int i;
            smcinput(c, 1, 3);
            for (i = 0; i < 3; i++) {
                if (c[i] > 0) a = a + 1; else a = a - 1;
            }
            if (a > 100) a = 0;
            smcoutput(a, 1);
            return 0;
        }";
    let (out, _) = both(src, &inputs(&[("c", &[1, -1, 4])]));
    assert_eq!(out.get("a"), vec![1]);
    assert_eq!(out.branch_bodies, 8);
}

#[test]
fn nested_pointer_assignments_combine() {
    let src = "private int x1, x2, x3, x4, c1, c2, out;
        public int main() {
            private int *p;
            smcinput(c1, 1);
            smcinput(c2, 1);
            x1 = 1; x2 = 2; x3 = 3; x4 = 4;
            if (c1) {
                p = &x1;
            } else {
                p = &x2;
                if (c2) p = &x3; else p = &x4;
            }
            smcphase(1);
            out = *p;
            smcphase(2);
            smcoutput(out, 1);
            return 0;
        }";
    for (c1, c2, want) in [(1, 0, 1), (1, 1, 1), (0, 1, 3), (0, 0, 4)] {
        let (out, _) = both(src, &inputs(&[("c1", &[c1]), ("c2", &[c2])]));
        assert_eq!(out.get("out"), vec![want]);
        // one inner product regardless of the number of candidates
        assert_eq!(
            out.phases[1].interactive_ops - out.phases[0].interactive_ops,
            1
        );
    }
}

#[test]
fn public_code_costs_nothing() {
    let src = "public int a[4], s;
        public int main() {
            public int i;
            smcinput(a, 1, 4);
            for (i = 0; i < 4; i++) s = s + a[i] * a[i];
            smcoutput(s, 1);
            return 0;
        }";
    let (out, st) = both(src, &inputs(&[("a", &[1, 2, 3, -4])]));
    assert_eq!(out.get("s"), vec![30]);
    assert_eq!(st.interactive_ops, 0);
    assert_eq!(st.rounds, 0);
    assert_eq!(st.total_bytes(), 0);
}

#[test]
fn input_output_round_trip() {
    let src = "private int<16> a[5];
        public int main() { smcinput(a, 1, 5); smcoutput(a, 1, 5); return 0; }";
    let v = [7, -3, 0, 32767, -32768];
    let (out, _) = both(src, &inputs(&[("a", &v)]));
    assert_eq!(out.get("a"), v.to_vec());
}

#[test]
fn missing_and_short_inputs_are_errors() {
    let src = "private int a[3]; public int main() { smcinput(a, 1, 3); return 0; }";
    let o = Options::default();
    assert!(matches!(
        mpc_opts(src, &inputs(&[]), &o),
        Err(RunError::Input(_))
    ));
    assert!(matches!(
        mpc_opts(src, &inputs(&[("a", &[1, 2])]), &o),
        Err(RunError::Input(_))
    ));
    assert!(matches!(
        plain_opts(src, &inputs(&[("a", &[1])]), &o),
        Err(RunError::Input(_))
    ));
    let narrow = "private int<4> a; public int main() { smcinput(a, 1); return 0; }";
    assert!(matches!(
        mpc_opts(narrow, &inputs(&[("a", &[8])]), &o),
        Err(RunError::Input(_))
    ));
}

#[test]
fn batched_comparisons_share_rounds() {
    let batched = "private int a[256], h[256], v;
        public int main() {
            public int i;
            smcinput(a, 1, 256);
            smcinput(v, 1);
            smcphase(1);
            for (i = 0; i < 256; i++) [
                h[i] = a[i] == v;
            ]
            smcphase(2);
            smcoutput(h, 1, 256);
            return 0;
        }";
    let single = "private int a[256], h[256], v;
        public int main() {
            smcinput(a, 1, 256);
            smcinput(v, 1);
            smcphase(1);
            h[0] = a[0] == v;
            smcphase(2);
            smcoutput(h, 1, 1);
            return 0;
        }";
    let a: Vec<i128> = (0..256).map(|i| i % 7).collect();
    let ins = inputs(&[("a", &a), ("v", &[3])]);
    let (ob, _) = both(batched, &ins);
    let (os, _) = both(single, &ins);
    let rounds = |o: &RunOutput| o.phases[1].rounds - o.phases[0].rounds;
    let ops = |o: &RunOutput| o.phases[1].interactive_ops - o.phases[0].interactive_ops;
    assert_eq!(rounds(&ob), rounds(&os));
    assert_eq!(ops(&ob), 256 * ops(&os));
    let want: Vec<i128> = a.iter().map(|&x| (x == 3) as i128).collect();
    assert_eq!(ob.get("h"), want);
}

#[test]
fn function_pointer_chosen_under_private_condition() {
    let src = "private int c, r;
        public void inc(private int *x) { *x = *x + 1; }
        public void dbl(private int *x) { *x = *x * 2; }
        public int main() {
            void (*f)(private int *);
            smcinput(c, 1);
            r = 5;
            f = inc;
            if (c) f = dbl;
            f(&r);
            smcoutput(r, 1);
            return 0;
        }";
    for (c, want) in [(1, 10), (0, 6)] {
        let (out, _) = both(src, &inputs(&[("c", &[c])]));
        assert_eq!(out.get("r"), vec![want]);
    }
}

#[test]
fn null_reads_are_diagnosed_or_abort() {
    let src = "struct node { private int data; struct node *next; };
        private int out;
        public int main() {
            struct node *p;
            p = 0;
            out = p->data + 1;
            smcoutput(out, 1);
            return 0;
        }";
    let (out, st) = both(src, &inputs(&[]));
    assert_eq!(out.get("out"), vec![1]);
    assert!(st.diagnostics >= 1);
    let strict = Options {
        strict_null: true,
        ..Options::default()
    };
    assert!(matches!(
        mpc_opts(src, &inputs(&[]), &strict),
        Err(RunError::Abort { .. })
    ));
    assert!(matches!(
        plain_opts(src, &inputs(&[]), &strict),
        Err(RunError::Abort { .. })
    ));
}

#[test]
fn pointer_predicate_guard() {
    let public_status = "public int n; private int a, b, c;
        public int main() {
            private int *p, *q;
            p = &a;
            q = &a;
            if (p == q) n = 1;
            smcoutput(n, 1);
            return 0;
        }";
    let (out, _) = both(public_status, &inputs(&[]));
    assert_eq!(out.get("n"), vec![1]);

    let private_status = "public int n; private int a, b, c;
        public int main() {
            private int *p, *q;
            smcinput(c, 1);
            p = &a;
            q = &a;
            if (c) q = &b;
            if (p == q) n = 1;
            smcoutput(n, 1);
            return 0;
        }";
    let r = mpc_opts(private_status, &inputs(&[("c", &[0])]), &Options::default());
    assert!(matches!(r, Err(RunError::Abort { .. })), "{r:?}");
}

#[test]
fn dynamic_memory_and_release() {
    let src = "struct node { private int data; struct node *next; };
        private int c, out;
        public int main() {
            struct node *a, *b, *p;
            smcinput(c, 1);
            a = pmalloc(1, struct node);
            b = pmalloc(1, struct node);
            a->data = 11;
            b->data = 22;
            p = a;
            if (c) p = b;
            out = p->data;
            pfree(p);
            smcoutput(out, 1);
            return 0;
        }";
    for (c, want) in [(0, 11), (1, 22)] {
        let (out, _) = both(src, &inputs(&[("c", &[c])]));
        assert_eq!(out.get("out"), vec![want]);
    }
}

#[test]
fn mergesort_variants_agree() {
    // pointer and array compare-exchange on the same input
    let ptr = "public int K = 2;
        public void swap(private int* A, private int* B) {
           private int tmp;
           if (*A > *B) { tmp = *A; *A = *B; *B = tmp; }
        }
        public int main() {
           private int A[K];
           smcinput(A, 1, K);
           swap(&A[0], &A[1]);
           smcoutput(A, 1, K);
           return 0;
        }";
    let noptr = "public int K = 2;
        private int A[K];
        public int main() {
           private int tmp;
           smcinput(A, 1, K);
           tmp = A[0];
           if (A[0] > A[1]) { A[0] = A[1]; A[1] = tmp; }
           smcoutput(A, 1, K);
           return 0;
        }";
    let ins = inputs(&[("A", &[9, -4])]);
    let (a, sa) = both(ptr, &ins);
    let (b, sb) = both(noptr, &ins);
    assert_eq!(a.get("A"), vec![-4, 9]);
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(sa.interactive_ops, sb.interactive_ops);
}

// ----- randomized nests of private conditions -------------------------

#[derive(Debug, Clone)]
enum S {
    Add(usize, usize, i8),
    Mul(usize, usize, usize),
    Point(usize),
    Store(usize),
    If(usize, usize, Vec<S>, Vec<S>),
}

fn stmt(depth: u32) -> BoxedStrategy<S> {
    let leaf = prop_oneof![
        (0..4usize, 0..4usize, any::<i8>()).prop_map(|(a, b, k)| S::Add(a, b, k)),
        (0..4usize, 0..4usize, 0..4usize).prop_map(|(a, b, c)| S::Mul(a, b, c)),
        (0..4usize).prop_map(S::Point),
        (0..4usize).prop_map(S::Store),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    let body = prop::collection::vec(stmt(depth - 1), 0..3);
    prop_oneof![
        3 => leaf,
        1 => (0..4usize, 0..4usize, body.clone(), body).prop_map(|(a, b, t, e)| S::If(a, b, t, e)),
    ]
    .boxed()
}

fn render(s: &S, out: &mut String) {
    match s {
        S::Add(a, b, k) => out.push_str(&format!("x{a} = x{b} + {k};\n")),
        S::Mul(a, b, c) => out.push_str(&format!("x{a} = x{b} * x{c} - x{a};\n")),
        S::Point(a) => out.push_str(&format!("p = &x{a};\n")),
        S::Store(a) => out.push_str(&format!("*p = x{a} + 1;\n")),
        S::If(a, b, t, e) => {
            out.push_str(&format!("if (x{a} < x{b}) {{\n"));
            t.iter().for_each(|s| render(s, out));
            out.push_str("} else {\n");
            e.iter().for_each(|s| render(s, out));
            out.push_str("}\n");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn random_private_nests_match_oracle(
        body in prop::collection::vec(stmt(4), 1..6),
        init in prop::collection::vec(-50i128..50, 4),
    ) {
        let mut src = String::from(
            "private int<16> x0, x1, x2, x3, r;\npublic int main() {\nprivate int<16> *p;\n\
             smcinput(x0, 1); smcinput(x1, 1); smcinput(x2, 1); smcinput(x3, 1);\np = &x0;\n",
        );
        body.iter().for_each(|s| render(s, &mut src));
        src.push_str("r = *p;\nsmcoutput(x0, 1); smcoutput(x1, 1); smcoutput(x2, 1); smcoutput(x3, 1); smcoutput(r, 1);\nreturn 0;\n}\n");
        let ins = inputs(&[("x0", &init[0..1]), ("x1", &init[1..2]), ("x2", &init[2..3]), ("x3", &init[3..4])]);
        let opts = Options::default();
        let (m, _) = mpc_opts(&src, &ins, &opts).unwrap();
        let p = plain_opts(&src, &ins, &opts).unwrap();
        prop_assert_eq!(m.outputs, p.outputs, "program:\n{}", src);
    }
}
