use ctms_core::checker::{prove, Strategy, Verdict};
use ctms_core::frontend::{parse, pretty_print, Ident, ParamBinding, Program};
use ctms_core::oracle::{brute_validate, consistency, Consistency, OracleOptions, RowStatus};

fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

fn corpus_src(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn corpus(name: &str) -> Program {
    parse(&corpus_src(name)).unwrap()
}

fn scenario(y: u64) -> ParamBinding {
    ParamBinding::new().with("B", 1).with("L", 0).with("R", 2).with("Y", y)
}

#[test]
fn read_at_five_faults_exactly_at_sizes_two_to_five() {
    let t = brute_validate(&corpus("fig1.ct"), &scenario(5), &id("s"), &OracleOptions::new(8)).unwrap();
    assert_eq!(t.unsafe_sizes(), [2, 3, 4, 5]);
    assert_eq!(t.rows.len(), 9);
    let RowStatus::Unsafe { fault, .. } = &t.rows[&3].status else {
        panic!()
    };
    assert_eq!(fault.access, "a[5]");
}

#[test]
fn running_example_is_safe_up_to_twenty_five() {
    let t = brute_validate(&corpus("fig1.ct"), &scenario(0), &id("s"), &OracleOptions::new(25)).unwrap();
    assert!(t.all_safe());
    assert_eq!(t.rows.len(), 26);
    assert!(t.inconclusive_sizes().is_empty());
}

#[test]
fn skip_is_safe_everywhere() {
    let t = brute_validate(&corpus("skip.ct"), &ParamBinding::new(), &id("s"), &OracleOptions::new(25)).unwrap();
    assert!(t.all_safe());
}

#[test]
fn table_of_the_reduced_program_matches() {
    let opts = OracleOptions::new(10);
    for y in [0, 3, 5] {
        let a = brute_validate(&corpus("fig1.ct"), &scenario(y), &id("s"), &opts).unwrap();
        let b = brute_validate(&corpus("fig2.ct"), &scenario(y), &id("s"), &opts).unwrap();
        assert!(a.disagreements(&b).is_empty(), "Y={y}");
    }
}

#[test]
fn consistency_accepts_correct_verdicts() {
    let p = corpus("fig1.ct");
    let s = id("s");
    for y in [0, 1, 5, 9] {
        let v = prove(&p, &scenario(y), &Strategy::ct_guided(&p.spec, &s, 10)).unwrap().verdict;
        let t = brute_validate(&p, &scenario(y), &s, &OracleOptions::new(12)).unwrap();
        assert!(consistency(&v, &t).is_consistent(), "Y={y}: {:?}", consistency(&v, &t));
    }
}

#[test]
fn consistency_rejects_a_safe_claim_against_faults() {
    let p = corpus("fig1.ct");
    let s = id("s");
    let safe = prove(&p, &scenario(0), &Strategy::ct_guided(&p.spec, &s, 10)).unwrap().verdict;
    assert!(matches!(safe, Verdict::SafeUnbounded { .. }));
    let unsafe_table = brute_validate(&p, &scenario(5), &s, &OracleOptions::new(8)).unwrap();
    assert!(matches!(consistency(&safe, &unsafe_table), Consistency::Violation { .. }));

    let bug = prove(&p, &scenario(5), &Strategy::ct_guided(&p.spec, &s, 10)).unwrap().verdict;
    let safe_table = brute_validate(&p, &scenario(0), &s, &OracleOptions::new(8)).unwrap();
    assert!(matches!(consistency(&bug, &safe_table), Consistency::Violation { .. }));
}

#[test]
fn bounded_claims_are_checked_below_the_bound() {
    let p = corpus("fig1.ct");
    let s = id("s");
    let v = prove(&p, &scenario(0), &Strategy::bounded(&p.spec, 6)).unwrap().verdict;
    let t = brute_validate(&p, &scenario(0), &s, &OracleOptions::new(8)).unwrap();
    assert_eq!(consistency(&v, &t), Consistency::Consistent { unchecked: vec![] });
}

#[test]
fn non_size_variable_is_rejected() {
    assert!(brute_validate(&corpus("fig1.ct"), &scenario(0), &id("a"), &OracleOptions::new(2)).is_err());
}

#[test]
fn negative_offset_faults_wherever_the_loop_runs() {
    let p = corpus("neg_offset.ct");
    let s = id("s");
    let b = ParamBinding::new().with("L", 0).with("R", 1);
    let out = prove(&p, &b, &Strategy::ct_guided(&p.spec, &s, 10)).unwrap();
    let Verdict::Bug { at, .. } = &out.verdict else {
        panic!("{:?}", out.verdict)
    };
    assert_eq!(at.sizes()[&s], 1);
    let t = brute_validate(&p, &b, &s, &OracleOptions::new(12)).unwrap();
    assert_eq!(t.unsafe_sizes(), (1..=12).collect::<Vec<_>>());

    let fixed = ParamBinding::new().with("L", 1).with("R", 1);
    let out = prove(&p, &fixed, &Strategy::ct_guided(&p.spec, &s, 10)).unwrap();
    assert!(matches!(out.verdict, Verdict::SafeUnbounded { .. }), "{:?}", out.verdict);
    assert!(brute_validate(&p, &fixed, &s, &OracleOptions::new(12)).unwrap().all_safe());
}

#[test]
fn corpus_programs_print_canonically() {
    for name in ["fig1.ct", "fig1_two.ct", "fig2.ct", "neg_offset.ct", "skip.ct"] {
        let p = corpus(name);
        let printed = pretty_print(&p);
        assert_eq!(parse(&printed).unwrap(), p, "{name}");
        assert_eq!(pretty_print(&parse(&printed).unwrap()), printed, "{name}");
    }
}
