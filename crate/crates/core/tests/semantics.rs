use std::collections::BTreeMap;

use ctms_core::frontend::{bind_program, parse, Ident, ParamBinding, Program};
use ctms_core::semantics::{
    check_size_exhaustive, check_size_nondet, run_concrete, ExhaustiveOptions, FaultKind, NondetOptions, SizeAssignment,
    SizeVerdict, Store, Terminal, DEFAULT_STEP_BUDGET,
};

fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

fn sizes(s: u64) -> SizeAssignment {
    BTreeMap::from([(id("s"), s)])
}

fn fig2(y: u64) -> Program {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/fig2.ct")).unwrap();
    let b = ParamBinding::new().with("B", 1).with("L", 0).with("R", 2).with("Y", y);
    bind_program(&parse(&src).unwrap(), &b).unwrap()
}

fn program(body: &str) -> Program {
    parse(&format!("requires array(a, s);\n{body}\nensures array(a, s)")).unwrap()
}

#[test]
fn read_in_bounds_completes() {
    let p = program("r := a[0]");
    let store = Store::default().with_array(&id("a"), vec![7]);
    let run = run_concrete(&p.body, &p.spec, store, &[], DEFAULT_STEP_BUDGET).unwrap();
    assert_eq!(run.trace.terminal, Terminal::Completed);
    assert_eq!(run.store.scalars[&id("r")], 7);
}

#[test]
fn index_equal_to_size_faults() {
    let p = program("r := a[3]");
    let store = Store::default().with_array(&id("a"), vec![0; 3]);
    let run = run_concrete(&p.body, &p.spec, store, &[], DEFAULT_STEP_BUDGET).unwrap();
    let fault = run.trace.fault().expect("faults");
    assert_eq!(fault.kind, FaultKind::ReadOutOfBounds);
    assert_eq!((fault.index_value, fault.size_value), (3, 3));
    assert!(!run.trace.steps.is_empty());
}

#[test]
fn negative_write_faults() {
    let p = program("a[0 - 1] := 4");
    let store = Store::default().with_array(&id("a"), vec![0; 2]);
    let run = run_concrete(&p.body, &p.spec, store, &[], DEFAULT_STEP_BUDGET).unwrap();
    let fault = run.trace.fault().expect("faults");
    assert_eq!(fault.kind, FaultKind::WriteOutOfBounds);
    assert_eq!(fault.index_value, -1);
}

#[test]
fn reduced_program_sorts_two_cells() {
    let p = fig2(0);
    let store = Store::default().with_array(&id("a"), vec![1, 0]);
    let run = run_concrete(&p.body, &p.spec, store, &[], DEFAULT_STEP_BUDGET).unwrap();
    assert_eq!(run.trace.terminal, Terminal::Completed);
    assert_eq!(run.store.arrays[&id("a")], vec![0, 1]);
}

#[test]
fn for_loop_is_inclusive_and_empty_when_reversed() {
    let p = program("n := 0; for i in [2 : 4] do { n := n + 1 }; m := 0; for i in [3 : 2] do { m := m + 1 }");
    let run = run_concrete(&p.body, &p.spec, Store::default().with_array(&id("a"), vec![]), &[], 100).unwrap();
    assert_eq!(run.store.scalars[&id("n")], 3);
    assert_eq!(run.store.scalars[&id("m")], 0);
}

#[test]
fn exhaustive_safe_at_size_two_explores_four_arrays() {
    let p = fig2(0);
    let v = check_size_exhaustive(&p.body, &p.spec, &sizes(2), &ExhaustiveOptions::default()).unwrap();
    assert_eq!(v.executions(), 4);
    assert!(v.is_safe());
}

#[test]
fn exhaustive_finds_the_read_past_the_end() {
    let p = fig2(5);
    let v = check_size_exhaustive(&p.body, &p.spec, &sizes(2), &ExhaustiveOptions::default()).unwrap();
    let SizeVerdict::Bug { trace, .. } = v else { panic!("{v:?}") };
    let fault = trace.fault().unwrap();
    assert_eq!(fault.access, "a[5]");
    assert_eq!(fault.kind, FaultKind::ReadOutOfBounds);
}

#[test]
fn skip_at_size_zero_runs_once() {
    let p = program("skip");
    let v = check_size_exhaustive(&p.body, &p.spec, &sizes(0), &ExhaustiveOptions::default()).unwrap();
    assert_eq!(v.executions(), 1);
}

#[test]
fn exhaustive_count_includes_opaque_outputs() {
    let p = parse("requires array(a, s) * F; opaque f reads(x) writes(x, y) frames(F); t := x + y ensures array(a, s) * F")
        .unwrap();
    let v = check_size_exhaustive(&p.body, &p.spec, &sizes(3), &ExhaustiveOptions::default()).unwrap();
    assert_eq!(v.executions(), 1 << 5);
    let three = ExhaustiveOptions {
        domain: vec![0, 1, 2],
        ..ExhaustiveOptions::default()
    };
    let v = check_size_exhaustive(&p.body, &p.spec, &sizes(3), &three).unwrap();
    assert_eq!(v.executions(), 3u128.pow(5));
}

#[test]
fn empty_domain_is_an_error() {
    let p = program("skip");
    let none = ExhaustiveOptions {
        domain: vec![],
        ..ExhaustiveOptions::default()
    };
    assert!(check_size_exhaustive(&p.body, &p.spec, &sizes(0), &none).is_err());
}

#[test]
fn runaway_execution_is_inconclusive() {
    let p = program("k := 0; while k == 0 do { skip }");
    let opts = ExhaustiveOptions {
        step_budget: 1000,
        ..ExhaustiveOptions::default()
    };
    let v = check_size_exhaustive(&p.body, &p.spec, &sizes(1), &opts).unwrap();
    assert!(matches!(v, SizeVerdict::Inconclusive { .. }), "{v:?}");
}

#[test]
fn nondet_explores_both_swap_outcomes() {
    let p = fig2(0);
    let opts = NondetOptions {
        loop_cap: 8,
        ..NondetOptions::for_max_size(2)
    };
    let v = check_size_nondet(&p.body, &p.spec, &sizes(2), &opts).unwrap();
    assert!(v.is_safe());
    assert_eq!(v.executions(), 2);
}

#[test]
fn nondet_skips_a_false_size_guard() {
    let p = fig2(0);
    let v = check_size_nondet(&p.body, &p.spec, &sizes(1), &NondetOptions::for_max_size(1)).unwrap();
    assert!(v.is_safe());
    assert_eq!(v.executions(), 1);
}

#[test]
fn nondet_unresolved_loop_hits_the_cap() {
    let p = parse("requires array(a, s) * F; opaque f reads(b) writes(b) frames(F); while b == 1 do { skip } ensures array(a, s) * F")
        .unwrap();
    let opts = NondetOptions {
        loop_cap: 4,
        ..NondetOptions::for_max_size(3)
    };
    for s in 0..3 {
        let v = check_size_nondet(&p.body, &p.spec, &sizes(s), &opts).unwrap();
        assert!(matches!(v, SizeVerdict::Inconclusive { .. }), "{v:?}");
    }
}

#[test]
fn default_loop_cap_is_twice_max_size_plus_four() {
    assert_eq!(NondetOptions::for_max_size(10).loop_cap, 24);
}

#[test]
fn two_values_cannot_order_three_cells() {
    let p = program("if a[0] < a[1] then { if a[1] < a[2] then { a[9] } }");
    let v = check_size_exhaustive(&p.body, &p.spec, &sizes(3), &ExhaustiveOptions::default()).unwrap();
    assert!(v.is_safe());
    let three = ExhaustiveOptions {
        domain: vec![0, 1, 2],
        ..ExhaustiveOptions::default()
    };
    assert!(check_size_exhaustive(&p.body, &p.spec, &sizes(3), &three).unwrap().is_bug());
    assert!(check_size_nondet(&p.body, &p.spec, &sizes(3), &NondetOptions::for_max_size(3)).unwrap().is_bug());
}
