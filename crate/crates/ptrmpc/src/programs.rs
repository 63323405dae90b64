//! Reference and benchmark programs shipped with the crate.

/// Reference programs as originally written, modulo a spelling fix.
pub mod reference {
    pub const LIST: &str = include_str!("../programs/reference/list.pc");
    pub const SORTED_DU: &str = include_str!("../programs/reference/sorted_du.pc");
    pub const SORTED_PU: &str = include_str!("../programs/reference/sorted_pu.pc");
    pub const MERGESORT_PTR: &str = include_str!("../programs/reference/mergesort_ptr.pc");
    pub const MERGESORT_NOPTR: &str = include_str!("../programs/reference/mergesort_noptr.pc");
    pub const SORTED_ARRAY: &str = include_str!("../programs/reference/sorted_array.pc");

    pub const ALL: &[(&str, &str)] = &[
        ("list", LIST),
        ("sorted_du", SORTED_DU),
        ("sorted_pu", SORTED_PU),
        ("mergesort_ptr", MERGESORT_PTR),
        ("mergesort_noptr", MERGESORT_NOPTR),
        ("sorted_array", SORTED_ARRAY),
    ];
}

/// Benchmark variants: counter snapshots added, sorting bugs fixed.
pub mod bench {
    pub const LIST: &str = include_str!("../programs/bench/list.pc");
    pub const LIST_BATCHED: &str = include_str!("../programs/bench/list_batched.pc");
    pub const SORTED_DU: &str = include_str!("../programs/bench/sorted_du.pc");
    pub const SORTED_PU: &str = include_str!("../programs/bench/sorted_pu.pc");
    pub const MERGESORT_PTR: &str = include_str!("../programs/bench/mergesort_ptr.pc");
    pub const MERGESORT_NOPTR: &str = include_str!("../programs/bench/mergesort_noptr.pc");
    pub const SORTED_ARRAY: &str = include_str!("../programs/bench/sorted_array.pc");
    pub const PARSER: &str = include_str!("../programs/bench/parser.pc");
    pub const ARITH: &str = include_str!("../programs/bench/arith.pc");
    pub const STACK: &str = include_str!("../programs/bench/stack.pc");

    pub const ALL: &[(&str, &str)] = &[
        ("list", LIST),
        ("list_batched", LIST_BATCHED),
        ("sorted_du", SORTED_DU),
        ("sorted_pu", SORTED_PU),
        ("mergesort_ptr", MERGESORT_PTR),
        ("mergesort_noptr", MERGESORT_NOPTR),
        ("sorted_array", SORTED_ARRAY),
        ("parser", PARSER),
        ("arith", ARITH),
        ("stack", STACK),
    ];
}
