//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use ctms_core::checker::{compare_budgets, prove, Strategy, Verdict};
use ctms_core::frontend::{bind_program, parse, Ident, ParamBinding, Program};
use ctms_core::oracle::{
    brute_validate, consistency, generate, mutate, mutation_sites, Consistency, Mutation, MutationKind,
    OracleOptions, DEFAULT_SIZE_BUDGET,
};
use ctms_core::semantics::{run_concrete, SizeVerdict, Store, Witness, DEFAULT_STEP_BUDGET};
use ctms_core::slicer::{reduce, SliceTargets};
use ctms_core::solver::ModelChoice;

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: false,
        detail: detail.into(),
    }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus_path(name: &str) -> String {
    root().join("corpus").join(name).display().to_string()
}

fn corpus(name: &str) -> Program {
    parse(&std::fs::read_to_string(corpus_path(name)).unwrap()).unwrap()
}

fn ctms(args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_ctms")).args(args).output().unwrap();
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

fn scenario(y: u64) -> ParamBinding {
    ParamBinding::new().with("B", 1).with("L", 0).with("R", 2).with("Y", y)
}

/// `k1 ; k2` as a set of atom sets, so order and spacing do not matter.
fn constraint_set(text: &str) -> BTreeSet<BTreeSet<String>> {
    text.split(';')
        .map(|k| k.split("&&").map(|a| a.split_whitespace().collect::<String>()).collect())
        .collect()
}

fn within(limit: Duration, elapsed: Duration, o: Outcome) -> Outcome {
    if o.pass && elapsed >= limit {
        fail(format!("{} but took {elapsed:?} (limit {limit:?})", o.detail))
    } else {
        Outcome {
            detail: format!("{} [{:.2?}]", o.detail, elapsed),
            ..o
        }
    }
}

fn criterion_1() -> Outcome {
    let (code, out) = ctms(&["extract", &corpus_path("fig2.ct"), "--array", "a", "--size", "s", "--symbolic"]);
    let got = out.lines().next().unwrap_or_default();
    let expected = constraint_set("s > B && s >= L+R ; s > B && s <= Y");
    if code == 0 && constraint_set(got) == expected && got.split(';').count() == 2 {
        pass(format!("extract --symbolic gives `{got}`"))
    } else {
        fail(format!("exit {code}, got `{got}`"))
    }
}

fn criterion_2() -> Outcome {
    let p = corpus("fig1.ct");
    let s = id("s");
    let out = match prove(&p, &scenario(0), &Strategy::ct_guided(&p.spec, &s, 10)) {
        Ok(o) => o,
        Err(e) => return fail(e.to_string()),
    };
    let Some(ct) = out.analysis.as_ref().and_then(|a| a.ct.clone()) else {
        return fail(format!("no CT; verdict {}", out.verdict.name()));
    };
    if ct.per_constraint.len() != 2 || ct.per_constraint[1] != ModelChoice::Unsat {
        return fail(format!("second constraint not unsatisfiable: {:?}", ct.per_constraint));
    }
    if ct.models != [2] {
        return fail(format!("CT {:?}, expected {{2}}", ct.models));
    }
    if !matches!(out.verdict, Verdict::SafeUnbounded { .. }) {
        return fail(format!("verdict {}", out.verdict.name()));
    }
    let table = match brute_validate(&p, &scenario(0), &s, &OracleOptions::new(25)) {
        Ok(t) => t,
        Err(e) => return fail(e.to_string()),
    };
    if !table.all_safe() || table.rows.len() != 26 {
        return fail(format!(
            "oracle unsafe {:?} inconclusive {:?}",
            table.unsafe_sizes(),
            table.inconclusive_sizes()
        ));
    }
    pass("k2 unsatisfiable, CT {2}, SafeUnbounded, oracle all-safe for s = 0..=25 over {0,1}")
}

fn criterion_3() -> Outcome {
    let (code, out) = ctms(&["slice", &corpus_path("fig1.ct"), "--array", "a", "--size", "s"]);
    let sliced = match parse(&out) {
        Ok(p) => p,
        Err(e) => return fail(format!("exit {code}, slice output does not parse: {e}")),
    };
    let fig2 = corpus("fig2.ct");
    if sliced != fig2 {
        return fail(format!("slice differs from fig2:\n{out}"));
    }
    let text = ctms_core::frontend::pretty_print(&sliced);
    let removed = ["opaque f", "opaque g", "while", "not_sorted", "r :="];
    if let Some(left) = removed.iter().find(|r| text.contains(*r)) {
        return fail(format!("`{left}` survived slicing"));
    }
    pass("slice of fig1 is structurally equal to fig2; f, g, while, not_sorted, r removed")
}

/// A program whose body is `body`, with params already bound.
fn closed(spec_of: &Program, body: ctms_core::frontend::Cmd) -> Program {
    Program {
        params: Vec::new(),
        spec: spec_of.spec.clone(),
        body,
    }
}

fn mutant(p: &Program, binding: &ParamBinding, kind: MutationKind) -> Option<Program> {
    let bound = bind_program(p, binding).ok()?;
    let site = *mutation_sites(&bound.body, kind).first()?;
    let body = mutate(&bound.body, &Mutation { kind, site }).ok()?;
    Some(closed(&bound, body))
}

/// The witness of a bug replays through the concrete semantics to the same fault.
fn replays(p: &Program, binding: &ParamBinding, at: &SizeVerdict) -> bool {
    let SizeVerdict::Bug { trace, .. } = at else {
        return false;
    };
    let (Some(fault), Some(Witness::Valuation { arrays, havoc })) = (trace.fault(), &trace.witness) else {
        return false;
    };
    let Ok(bound) = bind_program(p, binding) else {
        return false;
    };
    let store = Store {
        scalars: Default::default(),
        arrays: arrays.clone(),
    };
    run_concrete(&bound.body, &bound.spec, store, havoc, DEFAULT_STEP_BUDGET)
        .is_ok_and(|run| run.trace.fault() == Some(fault))
}

fn criterion_4() -> Outcome {
    let fig1 = corpus("fig1.ct");
    let s = id("s");
    let none = ParamBinding::new();
    let mut suite: Vec<(String, Program, ParamBinding)> = vec![("Y=5".into(), fig1.clone(), scenario(5))];
    let mutants = [
        ("boundWiden R->1", MutationKind::BoundWiden, 0),
        ("readPastEnd a[Y], Y=0", MutationKind::ReadPastEnd, 0),
        ("readPastEnd a[Y], Y=1", MutationKind::ReadPastEnd, 1),
        ("guardDrop s>B, Y=1", MutationKind::GuardDrop, 1),
    ];
    for (name, kind, y) in mutants {
        match mutant(&fig1, &scenario(y), kind) {
            Some(m) => suite.push((name.into(), m, none.clone())),
            None => return fail(format!("{name} does not apply")),
        }
    }
    let mut notes = Vec::new();
    let mut relevant = 0;
    for (name, p, b) in &suite {
        let table = match brute_validate(p, b, &s, &OracleOptions::new(12)) {
            Ok(t) => t,
            Err(e) => return fail(format!("{name}: oracle: {e}")),
        };
        if table.unsafe_sizes().is_empty() {
            notes.push(format!("{name}: oracle all-safe"));
            continue;
        }
        relevant += 1;
        let out = match prove(p, b, &Strategy::ct_guided(&p.spec, &s, 10)) {
            Ok(o) => o,
            Err(e) => return fail(format!("{name}: {e}")),
        };
        let Verdict::Bug { at, .. } = &out.verdict else {
            return fail(format!("{name}: verdict {} but oracle unsafe at {:?}", out.verdict.name(), table.unsafe_sizes()));
        };
        let size = at.sizes()[&s];
        if !table.unsafe_sizes().contains(&size) {
            return fail(format!("{name}: bug at s={size} not in oracle unsafe set"));
        }
        if !replays(p, b, at) {
            return fail(format!("{name}: witness does not replay"));
        }
        notes.push(format!("{name}: Bug at s={size}"));
    }
    pass(format!("{relevant}/{relevant} detected with replayable traces ({})", notes.join("; ")))
}

struct Tally {
    cases: usize,
    violations: Vec<String>,
    disagreements: Vec<String>,
    inconclusive_rows: usize,
    bugs: usize,
}

fn property_case(name: &str, p: &Program, b: &ParamBinding, t: &mut Tally) {
    let s = id("s");
    t.cases += 1;
    let verdict = match prove(p, b, &Strategy::ct_guided(&p.spec, &s, 10)) {
        Ok(o) => o.verdict,
        Err(e) => {
            t.violations.push(format!("{name}: {e}"));
            return;
        }
    };
    if matches!(verdict, Verdict::Bug { .. }) {
        t.bugs += 1;
    }
    let opts = OracleOptions::new(25);
    let table = match brute_validate(p, b, &s, &opts) {
        Ok(x) => x,
        Err(e) => {
            t.violations.push(format!("{name}: oracle: {e}"));
            return;
        }
    };
    t.inconclusive_rows += table.inconclusive_sizes().len();
    if let Consistency::Violation { details } = consistency(&verdict, &table) {
        t.violations.push(format!("{name}: {details}"));
    }
    let bound = match bind_program(p, b) {
        Ok(x) => x,
        Err(e) => {
            t.violations.push(format!("{name}: {e}"));
            return;
        }
    };
    let reduced = closed(&bound, reduce(&bound.body, &SliceTargets::all(&bound.spec)));
    match brute_validate(&reduced, &ParamBinding::new(), &s, &opts) {
        Ok(r) => {
            let d = table.disagreements(&r);
            if !d.is_empty() {
                t.disagreements.push(format!("{name}: rows {d:?}"));
            }
        }
        Err(e) => t.disagreements.push(format!("{name}: reduced oracle: {e}")),
    }
}

fn criterion_5() -> Outcome {
    let mut t = Tally {
        cases: 0,
        violations: Vec::new(),
        disagreements: Vec::new(),
        inconclusive_rows: 0,
        bugs: 0,
    };
    let mut mutants = 0;
    for seed in 0..200u64 {
        let (p, b) = generate(seed, DEFAULT_SIZE_BUDGET);
        property_case(&format!("seed {seed}"), &p, &b, &mut t);
        for kind in MutationKind::ALL {
            if let Some(m) = mutant(&p, &b, kind) {
                mutants += 1;
                property_case(&format!("seed {seed} {kind}"), &m, &ParamBinding::new(), &mut t);
            }
        }
    }
    let summary = format!(
        "{} cases (200 programs, {mutants} mutants), {} Bug verdicts, {} violations, {} slice disagreements, {} inconclusive oracle rows",
        t.cases,
        t.bugs,
        t.violations.len(),
        t.disagreements.len(),
        t.inconclusive_rows
    );
    if t.violations.is_empty() && t.disagreements.is_empty() {
        pass(summary)
    } else {
        let first: Vec<&String> = t.violations.iter().chain(&t.disagreements).take(5).collect();
        fail(format!("{summary}; first: {first:?}"))
    }
}

fn criterion_6() -> Outcome {
    let p = corpus("fig1_two.ct");
    let (s, n) = (id("s"), id("n"));
    let a = Strategy::ct_guided(&p.spec, &s, 12);
    let b = Strategy::bounded(&p.spec, 10);
    let (oa, ob) = match compare_budgets(&p, &scenario(0), &a, &b) {
        Ok(x) => x,
        Err(e) => return fail(e.to_string()),
    };
    let (Some(ma), Some(mb)) = (oa.verdict.metrics(), ob.verdict.metrics()) else {
        return fail(format!("verdicts {} / {}", oa.verdict.name(), ob.verdict.name()));
    };
    let l_sizes: BTreeSet<u64> = ma.sizes_checked.iter().map(|sz| sz[&n]).collect();
    let covers = l_sizes == (0..12).collect();
    let detail = format!(
        "executionsExplored a(s=ct, n<12) = {} ({}), b(s<10, n<10) = {} ({})",
        ma.executions_explored,
        oa.verdict.name(),
        mb.executions_explored,
        ob.verdict.name()
    );
    if ma.executions_explored < mb.executions_explored && covers {
        pass(detail)
    } else {
        fail(format!("{detail}; n sizes covered by a: {l_sizes:?}"))
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 6] = [
        ("1 symbolic constraint reproduction", criterion_1, Some(Duration::from_secs(1))),
        ("2 running-example scenario", criterion_2, Some(Duration::from_secs(10))),
        ("3 slice reproduction", criterion_3, Some(Duration::from_secs(1))),
        ("4 mutation sensitivity", criterion_4, Some(Duration::from_secs(60))),
        ("5 property suite", criterion_5, Some(Duration::from_secs(600))),
        ("6 budget comparison", criterion_6, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let started = Instant::now();
        let o = run();
        let o = within(limit.unwrap_or(Duration::MAX), started.elapsed(), o);
        if !o.pass {
            failed += 1;
        }
        println!("criterion {name}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
