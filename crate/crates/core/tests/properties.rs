use std::collections::BTreeMap;

use proptest::prelude::*;

use ctms_core::checker::{prove, Strategy as SizeStrategies, Verdict};
use ctms_core::extract::{extract, Affine, Atom, AtomOp, Constraint, ConstraintSet, ExtractionResult};
use ctms_core::frontend::{
    bind_params, bind_program, collect_params, parse, pretty_print, Ident, Program, Span,
};
use ctms_core::oracle::{generate, mutate, mutation_sites, Mutation, MutationKind};
use ctms_core::semantics::{
    check_size_exhaustive, check_size_nondet, run_concrete, ExhaustiveOptions, NondetOptions, SizeAssignment,
    SizeVerdict, Store, Witness,
};
use ctms_core::slicer::{reduce, SliceTargets};
use ctms_core::solver::{minimal_model, normalize, select_ct, ModelChoice, NatInterval};

fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

fn sizes(s: u64) -> SizeAssignment {
    BTreeMap::from([(id("s"), s)])
}

fn bound(seed: u64) -> Program {
    let (p, b) = generate(seed, 4);
    bind_program(&p, &b).unwrap()
}

fn reduced(p: &Program) -> Program {
    Program {
        params: Vec::new(),
        spec: p.spec.clone(),
        body: reduce(&p.body, &SliceTargets::all(&p.spec)),
    }
}

/// Atom semantics written out directly, independent of the solver.
fn holds(op: AtomOp, n: i64, b: i64) -> bool {
    match op {
        AtomOp::Le => n <= b,
        AtomOp::Lt => n < b,
        AtomOp::Ge => n >= b,
        AtomOp::Gt => n > b,
        AtomOp::Eq => n == b,
    }
}

fn arb_op() -> impl Strategy<Value = AtomOp> {
    prop_oneof![
        Just(AtomOp::Le),
        Just(AtomOp::Lt),
        Just(AtomOp::Ge),
        Just(AtomOp::Gt),
        Just(AtomOp::Eq)
    ]
}

fn arb_constraint() -> impl Strategy<Value = Vec<(AtomOp, i64)>> {
    prop::collection::vec((arb_op(), -20i64..1000), 0..4)
}

fn constraint(atoms: &[(AtomOp, i64)]) -> Constraint {
    Constraint::new(atoms.iter().map(|(op, b)| Atom::new(*op, Affine::constant(*b))))
}

fn satisfied(atoms: &[(AtomOp, i64)], n: i64) -> bool {
    atoms.iter().all(|(op, b)| holds(*op, n, *b))
}

fn exhaustive(budget: u64) -> ExhaustiveOptions {
    ExhaustiveOptions {
        step_budget: budget,
        ..ExhaustiveOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn printing_then_parsing_is_identity(seed in any::<u64>()) {
        let (p, b) = generate(seed, 6);
        prop_assert_eq!(parse(&pretty_print(&p)).unwrap(), p.clone());
        let bp = bind_program(&p, &b).unwrap();
        for kind in MutationKind::ALL {
            if let Some(site) = mutation_sites(&bp.body, kind).first() {
                let m = Program { body: mutate(&bp.body, &Mutation { kind, site: *site }).unwrap(), ..bp.clone() };
                prop_assert_eq!(parse(&pretty_print(&m)).unwrap(), m);
            }
        }
    }

    #[test]
    fn binding_removes_every_param(seed in any::<u64>(), extra in 0u64..50) {
        let (p, b) = generate(seed, 6);
        let b = p.params.iter().fold(b, |acc, q| { let v = acc.get(q).unwrap_or(0) + extra; acc.with(q.as_str(), v) });
        prop_assert!(collect_params(&bind_params(&p.body, &b).unwrap()).is_empty());
    }

    #[test]
    fn reduction_is_idempotent_and_shrinks(seed in any::<u64>()) {
        let p = bound(seed);
        let once = reduced(&p);
        prop_assert_eq!(&reduced(&once), &once);
        prop_assert!(once.body.node_count() <= p.body.node_count());
    }

    #[test]
    fn normalize_agrees_with_atoms(atoms in arb_constraint()) {
        let iv = normalize(&constraint(&atoms)).unwrap();
        for n in 0..=1000i64 {
            prop_assert_eq!(iv.contains(n as u64), satisfied(&atoms, n), "n = {}", n);
        }
    }

    #[test]
    fn minimal_model_is_least(atoms in arb_constraint()) {
        let c = constraint(&atoms);
        match minimal_model(&c).unwrap() {
            ModelChoice::Model(m) => {
                prop_assert!(satisfied(&atoms, m as i64));
                if m > 0 {
                    prop_assert!(!satisfied(&atoms, m as i64 - 1));
                }
            }
            ModelChoice::Unsat => prop_assert!((0..=1100).all(|n| !satisfied(&atoms, n))),
        }
    }

    #[test]
    fn selected_models_cover_every_satisfiable_constraint(set in prop::collection::vec(arb_constraint(), 0..6)) {
        let mut cs = ConstraintSet::new(id("s"));
        for atoms in &set {
            cs.insert(constraint(atoms), Span::default());
        }
        let ct = select_ct(&cs).unwrap();
        let satisfiable = cs.constraints().filter(|c| normalize(c).unwrap() != NatInterval::Empty).count();
        prop_assert!(ct.models.len() <= satisfiable);
        prop_assert_eq!(ct.per_constraint.len(), cs.len());
        for (c, choice) in cs.constraints().zip(&ct.per_constraint) {
            match choice {
                ModelChoice::Model(m) => {
                    prop_assert!(ct.models.contains(m));
                    prop_assert!(normalize(c).unwrap().contains(*m));
                }
                ModelChoice::Unsat => prop_assert_eq!(normalize(c).unwrap(), NatInterval::Empty),
            }
        }
    }

    #[test]
    fn size_guards_refine_every_constraint(op in arb_op(), k in 0i64..8, body in 0usize..3) {
        let sym = match op {
            AtomOp::Le => "<=",
            AtomOp::Lt => "<",
            AtomOp::Ge => ">=",
            AtomOp::Gt => ">",
            AtomOp::Eq => "==",
        };
        let inner = ["a[Y]", "for i in [0 : s - 1] do { a[i] }", "a[Y]; if a[0] < a[1] then { a[2] }"][body];
        let src = format!("param Y; requires array(a, s); if s {sym} {k} then {{ {inner} }} ensures array(a, s)");
        let p = parse(&src).unwrap();
        let r = extract(&p.body, &id("a"), &id("s"));
        let again = extract(&p.body, &id("a"), &id("s"));
        prop_assert_eq!(&r, &again);
        let set = r.set().expect("extracted");
        let g = Atom::new(op, Affine::constant(k));
        prop_assert!(!set.is_empty());
        for c in set.constraints() {
            prop_assert!(c.atoms().contains(&g), "{} lacks the guard", c.display(&set.size));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_preserves_faults(seed in any::<u64>()) {
        let p = bound(seed);
        let r = reduced(&p);
        for s in 0..=12 {
            let a = check_size_exhaustive(&p.body, &p.spec, &sizes(s), &exhaustive(20_000)).unwrap();
            let b = check_size_exhaustive(&r.body, &r.spec, &sizes(s), &exhaustive(20_000)).unwrap();
            if matches!(a, SizeVerdict::Inconclusive { .. }) || matches!(b, SizeVerdict::Inconclusive { .. }) {
                continue;
            }
            prop_assert_eq!(a.is_bug(), b.is_bug(), "s = {}\n{}", s, pretty_print(&p));
        }
    }

    #[test]
    fn exhaustive_and_nondet_agree_when_conclusive(seed in any::<u64>()) {
        // Nondet treats each cell comparison as a free choice, so it may take
        // branches no valuation realizes (`a[0] < a[0]`). Exhaustive faults
        // must be found by nondet; nondet-only faults must survive a wider domain.
        let p = bound(seed);
        for s in 0..=6 {
            let a = check_size_exhaustive(&p.body, &p.spec, &sizes(s), &exhaustive(20_000)).unwrap();
            let n = check_size_nondet(&p.body, &p.spec, &sizes(s), &NondetOptions { loop_cap: 32, ..NondetOptions::for_max_size(6) }).unwrap();
            if matches!(a, SizeVerdict::Inconclusive { .. }) || matches!(n, SizeVerdict::Inconclusive { .. }) {
                continue;
            }
            if a.is_bug() {
                prop_assert!(n.is_bug(), "s = {}\n{}", s, pretty_print(&p));
            } else if n.is_bug() && s <= 4 {
                let wide = ExhaustiveOptions { domain: vec![0, 1, 2, 3], ..exhaustive(20_000) };
                let w = check_size_exhaustive(&p.body, &p.spec, &sizes(s), &wide).unwrap();
                prop_assert!(!w.is_bug(), "{{0,1}} misses a fault at s = {}\n{}", s, pretty_print(&p));
            }
        }
    }

    #[test]
    fn checkers_are_deterministic(seed in any::<u64>(), s in 0u64..6) {
        let p = bound(seed);
        let opts = exhaustive(20_000);
        prop_assert_eq!(
            check_size_exhaustive(&p.body, &p.spec, &sizes(s), &opts).unwrap(),
            check_size_exhaustive(&p.body, &p.spec, &sizes(s), &opts).unwrap()
        );
        let n = NondetOptions::for_max_size(6);
        prop_assert_eq!(
            check_size_nondet(&p.body, &p.spec, &sizes(s), &n).unwrap(),
            check_size_nondet(&p.body, &p.spec, &sizes(s), &n).unwrap()
        );
    }

    #[test]
    fn execution_count_is_domain_to_the_cells(seed in any::<u64>(), s in 0u64..8) {
        let p = bound(seed);
        let opaque = pretty_print(&p).contains("opaque");
        let v = check_size_exhaustive(&p.body, &p.spec, &sizes(s), &exhaustive(20_000)).unwrap();
        if !opaque && v.is_safe() {
            prop_assert_eq!(v.executions(), 1u128 << s);
        }
    }

    #[test]
    fn runs_preserve_array_lengths(seed in any::<u64>(), cells in prop::collection::vec(-2i64..3, 0..10), havoc in prop::collection::vec(-2i64..3, 0..4)) {
        let p = bound(seed);
        let store = Store::default().with_array(&id("a"), cells.clone());
        if let Ok(run) = run_concrete(&p.body, &p.spec, store, &havoc, 20_000) {
            prop_assert_eq!(run.store.arrays[&id("a")].len(), cells.len());
            if let Some(f) = run.trace.fault() {
                prop_assert!(f.index_value < 0 || f.index_value as u64 >= f.size_value);
                prop_assert!(!run.trace.steps.is_empty());
            }
        }
    }

    #[test]
    fn verdicts_follow_the_claim_discipline(seed in any::<u64>()) {
        let (p, b) = generate(seed, 4);
        let out = prove(&p, &b, &SizeStrategies::ct_guided(&p.spec, &id("s"), 10)).unwrap();
        match &out.verdict {
            Verdict::SafeUnbounded { .. } => {
                let a = out.analysis.as_ref().expect("analysis");
                let extracted = matches!(a.instantiated, ExtractionResult::Extracted { .. });
                prop_assert!(extracted);
            }
            Verdict::Bug { at, .. } => {
                let SizeVerdict::Bug { trace, .. } = at else { panic!("bug without trace") };
                let Some(Witness::Valuation { arrays, havoc }) = &trace.witness else { panic!("no valuation") };
                let bp = bind_program(&p, &b).unwrap();
                let store = Store { scalars: Default::default(), arrays: arrays.clone() };
                let run = run_concrete(&bp.body, &bp.spec, store, havoc, 10_000_000).unwrap();
                prop_assert_eq!(run.trace.fault(), trace.fault());
            }
            _ => {}
        }
        prop_assert_eq!(out.verdict.exit_code(), match out.verdict.name() {
            "SafeUnbounded" => 0,
            "SafeBounded" => 2,
            "Bug" => 3,
            _ => 4,
        });
    }
}
