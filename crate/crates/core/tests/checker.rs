use ctms_core::checker::{compare_budgets, prove, Backend, Strategy, Verdict};
use ctms_core::frontend::{parse, Ident, ParamBinding, Program};
use ctms_core::semantics::{run_concrete, SizeVerdict, Store, Witness, DEFAULT_STEP_BUDGET};
use ctms_core::solver::ModelChoice;

fn corpus(name: &str) -> Program {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

fn binding(y: u64) -> ParamBinding {
    ParamBinding::new()
        .with("B", 1)
        .with("L", 0)
        .with("R", 2)
        .with("Y", y)
}

fn ct(p: &Program) -> Strategy {
    Strategy::ct_guided(&p.spec, &id("s"), 10)
}

#[test]
fn running_example_is_safe_for_all_sizes() {
    let p = corpus("fig1.ct");
    let out = prove(&p, &binding(0), &ct(&p)).unwrap();
    let Verdict::SafeUnbounded { ct, metrics, .. } = &out.verdict else {
        panic!("{:?}", out.verdict)
    };
    assert_eq!(ct.models, vec![2]);
    assert_eq!(ct.per_constraint, vec![ModelChoice::Model(2), ModelChoice::Unsat]);
    let sizes: Vec<u64> = metrics.sizes_checked.iter().map(|m| m[&id("s")]).collect();
    assert_eq!(sizes, vec![2]);
    // The reduced program at s = 2 has two cells over {0, 1}.
    assert_eq!(metrics.executions_explored, 4);
    assert_eq!(out.verdict.exit_code(), 0);
}

#[test]
fn running_example_with_far_read_is_a_bug_at_two() {
    let p = corpus("fig1.ct");
    let out = prove(&p, &binding(5), &ct(&p)).unwrap();
    let Verdict::Bug { at, .. } = &out.verdict else {
        panic!("{:?}", out.verdict)
    };
    let SizeVerdict::Bug { sizes, trace } = at else {
        unreachable!()
    };
    assert_eq!(sizes[&id("s")], 2);
    let fault = trace.fault().unwrap();
    assert_eq!(fault.access, "a[5]");
    assert_eq!(fault.index_value, 5);
    assert_eq!(out.verdict.exit_code(), 3);

    // Replaying the witness through the concrete semantics hits the same fault.
    let Some(Witness::Valuation { arrays, havoc }) = &trace.witness else {
        panic!("no valuation")
    };
    let bound = ctms_core::frontend::bind_program(&p, &binding(5)).unwrap();
    let store = Store {
        scalars: Default::default(),
        arrays: arrays.clone(),
    };
    let run = run_concrete(&bound.body, &bound.spec, store, havoc, DEFAULT_STEP_BUDGET).unwrap();
    assert_eq!(run.trace.fault(), Some(fault));
}

#[test]
fn skip_program_has_an_empty_ct() {
    let p = parse("requires array(a, s); skip ensures array(a, s)").unwrap();
    let out = prove(&p, &ParamBinding::new(), &ct(&p)).unwrap();
    let Verdict::SafeUnbounded { ct, metrics, .. } = &out.verdict else {
        panic!("{:?}", out.verdict)
    };
    assert!(ct.models.is_empty());
    assert!(metrics.sizes_checked.is_empty());
    assert_eq!(metrics.executions_explored, 0);
    assert!(out.caveats.iter().any(|c| c.contains("no satisfiable constraint")));
}

#[test]
fn bounded_mode_checks_sizes_below_the_bound() {
    let p = corpus("fig1.ct");
    let out = prove(&p, &binding(0), &Strategy::bounded(&p.spec, 4)).unwrap();
    let Verdict::SafeBounded { metrics, .. } = &out.verdict else {
        panic!("{:?}", out.verdict)
    };
    let sizes: Vec<u64> = metrics.sizes_checked.iter().map(|m| m[&id("s")]).collect();
    assert_eq!(sizes, vec![0, 1, 2, 3]);
    assert_eq!(out.verdict.exit_code(), 2);
}

#[test]
fn nondet_backend_agrees_on_the_running_example() {
    let p = corpus("fig1.ct");
    let st = ct(&p).with_backend(Backend::Nondet { loop_cap: None });
    assert_eq!(prove(&p, &binding(0), &st).unwrap().verdict.name(), "SafeUnbounded");
    assert_eq!(prove(&p, &binding(5), &st).unwrap().verdict.name(), "Bug");
}

#[test]
fn unbound_params_are_rejected() {
    let p = corpus("fig1.ct");
    let b = ParamBinding::new().with("B", 1);
    assert!(prove(&p, &b, &ct(&p)).is_err());
}

#[test]
fn two_ct_guided_sizes_are_contradictory() {
    let p = parse("requires array(a, s) * array(l, n); skip ensures array(a, s) * array(l, n)").unwrap();
    let mut st = ct(&p);
    st.sizes.insert(id("n"), ctms_core::checker::SizeStrategy::CtGuided);
    assert!(prove(&p, &ParamBinding::new(), &st).is_err());
}

#[test]
fn while_at_top_level_falls_back_to_bounded() {
    let p = parse(
        "requires array(a, s); i := 0; while i < s do { a[i] := 0; i := i + 1 } ensures array(a, s)",
    )
    .unwrap();
    let out = prove(&p, &ParamBinding::new(), &ct(&p)).unwrap();
    let Verdict::Unsupported { fallback, .. } = &out.verdict else {
        panic!("{:?}", out.verdict)
    };
    assert_eq!(fallback.as_ref().unwrap().name(), "SafeBounded");
    assert_eq!(out.verdict.exit_code(), 4);
}

#[test]
fn identical_strategies_give_identical_metrics() {
    let p = corpus("fig1.ct");
    let st = ct(&p);
    let (a, b) = compare_budgets(&p, &binding(0), &st, &st).unwrap();
    let (ma, mb) = (a.verdict.metrics().unwrap(), b.verdict.metrics().unwrap());
    assert_eq!(ma.executions_explored, mb.executions_explored);
    assert_eq!(ma.sizes_checked, mb.sizes_checked);
    assert_eq!(a.analysis, b.analysis);
}

#[test]
fn skip_program_runs_once_per_size() {
    let p = parse("requires array(a, s); skip ensures array(a, s)").unwrap();
    let out = prove(&p, &ParamBinding::new(), &Strategy::bounded(&p.spec, 5)).unwrap();
    let m = out.verdict.metrics().unwrap();
    assert_eq!(m.paths_executed, 5);
    // Each size still accounts for every one of its 2^s unread valuations.
    assert_eq!(m.executions_explored, 1 + 2 + 4 + 8 + 16);
    for r in out.verdict.per_size() {
        assert_eq!(r.executions(), 1u128 << r.sizes()[&id("s")]);
    }
}
