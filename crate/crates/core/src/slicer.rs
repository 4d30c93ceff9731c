//! Fault-preserving reduction with respect to analyzed arrays.
//!
//! [`dependency_slice`] keeps the accesses to the target arrays and every
//! statement that can influence their reachability or index values.
//! [`collapse_data_independent_loops`] replaces a `while` loop by one copy
//! of its body when iterating cannot change which target accesses happen.
//! [`reduce`] alternates both until nothing changes.

use std::collections::BTreeSet;

use crate::dataflow::{bool_is_data_dependent, tainted_vars};
use crate::frontend::{BoolExpr, Cmd, Ident, IntExpr, Program, SafetySpec};

/// The `(array, size)` pairs whose accesses must be preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceTargets {
    pairs: Vec<(Ident, Ident)>,
}

impl SliceTargets {
    pub fn new(array: Ident, size: Ident) -> Self {
        SliceTargets {
            pairs: vec![(array, size)],
        }
    }

    /// Every array of the layout assertion.
    pub fn all(spec: &SafetySpec) -> Self {
        SliceTargets {
            pairs: spec.arrays.clone(),
        }
    }

    /// Looks the array up in `spec`.
    pub fn for_array(spec: &SafetySpec, array: &Ident) -> Option<Self> {
        spec.size_of(array)
            .map(|s| SliceTargets::new(array.clone(), s.clone()))
    }

    pub fn pairs(&self) -> &[(Ident, Ident)] {
        &self.pairs
    }

    pub fn is_array(&self, a: &Ident) -> bool {
        self.pairs.iter().any(|(x, _)| x == a)
    }

    pub fn is_size(&self, s: &Ident) -> bool {
        self.pairs.iter().any(|(_, x)| x == s)
    }
}

#[derive(Default)]
struct Relevant {
    vars: BTreeSet<Ident>,
    arrays: BTreeSet<Ident>,
}

impl Relevant {
    fn need_int(&mut self, e: &IntExpr) {
        e.collect_vars(&mut self.vars);
        e.collect_arrays(&mut self.arrays);
    }

    fn need_bool(&mut self, g: &BoolExpr) {
        g.for_each_int(&mut |e| self.need_int(e));
    }

    fn size(&self) -> usize {
        self.vars.len() + self.arrays.len()
    }
}

/// Removes every statement that cannot affect accesses to the target arrays.
///
/// A dead assignment whose right-hand side reads a target keeps those reads
/// as bare accesses, so `r := a[Y]` with `r` unused becomes `a[Y]`.
pub fn dependency_slice(cmd: &Cmd, targets: &SliceTargets) -> Cmd {
    let mut rel = Relevant::default();
    rel.arrays
        .extend(targets.pairs.iter().map(|(a, _)| a.clone()));
    loop {
        let before = rel.size();
        let out = slice(cmd, targets, &mut rel);
        if rel.size() == before {
            return out;
        }
    }
}

/// Target reads performed while evaluating `e`, as bare accesses.
fn target_accesses(e: &IntExpr, targets: &SliceTargets, rel: &mut Relevant, out: &mut Vec<Cmd>) {
    match e {
        IntExpr::Lit(_) | IntExpr::Var(_) | IntExpr::Param(_) => {}
        IntExpr::Read { array, index, span } => {
            if targets.is_array(array) {
                rel.need_int(index);
                out.push(Cmd::Access {
                    array: array.clone(),
                    index: (**index).clone(),
                    span: *span,
                });
            } else {
                target_accesses(index, targets, rel, out);
            }
        }
        IntExpr::Bin(_, l, r) => {
            target_accesses(l, targets, rel, out);
            target_accesses(r, targets, rel, out);
        }
    }
}

fn guard_accesses(g: &BoolExpr, targets: &SliceTargets, rel: &mut Relevant) -> Cmd {
    let mut out = Vec::new();
    g.for_each_int(&mut |e| target_accesses(e, targets, rel, &mut out));
    Cmd::seq(out)
}

fn slice(cmd: &Cmd, targets: &SliceTargets, rel: &mut Relevant) -> Cmd {
    match cmd {
        Cmd::Skip => Cmd::Skip,
        Cmd::Assign { target, rhs, .. } => {
            if rel.vars.contains(target) {
                rel.need_int(rhs);
                cmd.clone()
            } else {
                let mut out = Vec::new();
                target_accesses(rhs, targets, rel, &mut out);
                Cmd::seq(out)
            }
        }
        Cmd::Write {
            array, index, rhs, ..
        } => {
            if rel.arrays.contains(array) {
                rel.need_int(index);
                rel.need_int(rhs);
                cmd.clone()
            } else {
                let mut out = Vec::new();
                target_accesses(index, targets, rel, &mut out);
                target_accesses(rhs, targets, rel, &mut out);
                Cmd::seq(out)
            }
        }
        Cmd::Access { array, index, .. } => {
            if targets.is_array(array) {
                rel.need_int(index);
                cmd.clone()
            } else {
                let mut out = Vec::new();
                target_accesses(index, targets, rel, &mut out);
                Cmd::seq(out)
            }
        }
        Cmd::Seq(cs) => Cmd::seq(cs.iter().map(|c| slice(c, targets, rel)).collect::<Vec<_>>()),
        Cmd::If {
            guard,
            then_branch,
            else_branch,
            span,
        } => {
            let t = slice(then_branch, targets, rel);
            let e = slice(else_branch, targets, rel);
            if t == Cmd::Skip && e == Cmd::Skip {
                guard_accesses(guard, targets, rel)
            } else {
                rel.need_bool(guard);
                Cmd::If {
                    guard: guard.clone(),
                    then_branch: Box::new(t),
                    else_branch: Box::new(e),
                    span: *span,
                }
            }
        }
        Cmd::For {
            iterator,
            lower,
            upper,
            body,
            span,
        } => {
            let b = slice(body, targets, rel);
            if b == Cmd::Skip {
                let mut out = Vec::new();
                target_accesses(lower, targets, rel, &mut out);
                target_accesses(upper, targets, rel, &mut out);
                Cmd::seq(out)
            } else {
                rel.need_int(lower);
                rel.need_int(upper);
                Cmd::For {
                    iterator: iterator.clone(),
                    lower: lower.clone(),
                    upper: upper.clone(),
                    body: Box::new(b),
                    span: *span,
                }
            }
        }
        Cmd::While { guard, body, span } => {
            let b = slice(body, targets, rel);
            if b == Cmd::Skip {
                guard_accesses(guard, targets, rel)
            } else {
                rel.need_bool(guard);
                Cmd::While {
                    guard: guard.clone(),
                    body: Box::new(b),
                    span: *span,
                }
            }
        }
        Cmd::Opaque { writes, .. } => {
            if writes.iter().any(|w| rel.vars.contains(w)) {
                cmd.clone()
            } else {
                Cmd::Skip
            }
        }
    }
}

/// Replaces `while g do c` by `c` when iterating `c` cannot change which
/// accesses it performs.
///
/// Conditions: `g` mentions no size variable and no enclosing iterator;
/// inside `c`, every index, every `for` bound, and every data-independent
/// guard uses only target sizes, params, literals, and `c`'s own
/// iterators; and no data-dependent guard inside `c` reads a scalar that
/// `c` assigns. In addition, nothing `c` writes may flow into a guard, an
/// index, or a loop bound elsewhere in the program (including `c` itself
/// when the loop sits inside another loop), since one pass can leave a
/// state that full iteration never does.
pub fn collapse_data_independent_loops(cmd: &Cmd, targets: &SliceTargets) -> Cmd {
    let cx = Collapse {
        root: cmd,
        targets,
        tainted: tainted_vars(cmd),
    };
    collapse(cmd, &cx, &mut Vec::new(), 0)
}

struct Collapse<'a> {
    root: &'a Cmd,
    targets: &'a SliceTargets,
    tainted: BTreeSet<Ident>,
}

impl Collapse<'_> {
    /// Names (scalars and arrays) whose values can influence control flow
    /// or an index, ignoring the subtree `skip`.
    fn control_names(&self, skip: Option<&Cmd>) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        control_uses(self.root, skip, &mut out);
        loop {
            let before = out.len();
            self.root.walk(&mut |c| match c {
                Cmd::Assign { target, rhs, .. } if out.contains(target) => int_names(rhs, &mut out),
                Cmd::Opaque { reads, writes, .. } if writes.iter().any(|w| out.contains(w)) => {
                    out.extend(reads.iter().cloned())
                }
                _ => {}
            });
            if out.len() == before {
                return out;
            }
        }
    }
}

fn int_names(e: &IntExpr, out: &mut BTreeSet<Ident>) {
    e.collect_vars(out);
    e.for_each_read(&mut |a, _, _| {
        out.insert(a.clone());
    });
}

fn index_names(e: &IntExpr, out: &mut BTreeSet<Ident>) {
    e.for_each_read(&mut |_, index, _| int_names(index, out));
}

fn control_uses(cmd: &Cmd, skip: Option<&Cmd>, out: &mut BTreeSet<Ident>) {
    if skip.is_some_and(|s| std::ptr::eq(s, cmd)) {
        return;
    }
    match cmd {
        Cmd::Skip | Cmd::Opaque { .. } => {}
        Cmd::Assign { rhs, .. } => index_names(rhs, out),
        Cmd::Write { index, rhs, .. } => {
            int_names(index, out);
            index_names(rhs, out);
        }
        Cmd::Access { index, .. } => int_names(index, out),
        Cmd::Seq(cs) => cs.iter().for_each(|c| control_uses(c, skip, out)),
        Cmd::If {
            guard,
            then_branch,
            else_branch,
            ..
        } => {
            guard.for_each_int(&mut |e| int_names(e, out));
            control_uses(then_branch, skip, out);
            control_uses(else_branch, skip, out);
        }
        Cmd::For {
            lower, upper, body, ..
        } => {
            int_names(lower, out);
            int_names(upper, out);
            control_uses(body, skip, out);
        }
        Cmd::While { guard, body, .. } => {
            guard.for_each_int(&mut |e| int_names(e, out));
            control_uses(body, skip, out);
        }
    }
}

/// Arrays written and scalars assigned by `body`.
fn written_names(body: &Cmd) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    body.walk(&mut |c| match c {
        Cmd::Assign { target, .. } => {
            out.insert(target.clone());
        }
        Cmd::Write { array, .. } => {
            out.insert(array.clone());
        }
        Cmd::Opaque { writes, .. } => out.extend(writes.iter().cloned()),
        _ => {}
    });
    out
}

fn collapse(cmd: &Cmd, cx: &Collapse<'_>, iterators: &mut Vec<Ident>, loops: usize) -> Cmd {
    let targets = cx.targets;
    let tainted = &cx.tainted;
    match cmd {
        Cmd::Skip | Cmd::Assign { .. } | Cmd::Write { .. } | Cmd::Access { .. } | Cmd::Opaque { .. } => {
            cmd.clone()
        }
        Cmd::Seq(cs) => Cmd::seq(
            cs.iter()
                .map(|c| collapse(c, cx, iterators, loops))
                .collect::<Vec<_>>(),
        ),
        Cmd::If {
            guard,
            then_branch,
            else_branch,
            span,
        } => Cmd::If {
            guard: guard.clone(),
            then_branch: Box::new(collapse(then_branch, cx, iterators, loops)),
            else_branch: Box::new(collapse(else_branch, cx, iterators, loops)),
            span: *span,
        },
        Cmd::For {
            iterator,
            lower,
            upper,
            body,
            span,
        } => {
            iterators.push(iterator.clone());
            let b = collapse(body, cx, iterators, loops + 1);
            iterators.pop();
            Cmd::For {
                iterator: iterator.clone(),
                lower: lower.clone(),
                upper: upper.clone(),
                body: Box::new(b),
                span: *span,
            }
        }
        Cmd::While { guard, body, span } => {
            let b = collapse(body, cx, iterators, loops + 1);
            let mut gvars = BTreeSet::new();
            guard.collect_vars(&mut gvars);
            let guard_ok = !gvars
                .iter()
                .any(|v| targets.is_size(v) || iterators.contains(v));
            if guard_ok && body_is_iteration_invariant(&b, targets, tainted) && leaves_no_trace(cmd, body, cx, loops) {
                b
            } else {
                Cmd::While {
                    guard: guard.clone(),
                    body: Box::new(b),
                    span: *span,
                }
            }
        }
    }
}

fn leaves_no_trace(whole: &Cmd, body: &Cmd, cx: &Collapse<'_>, loops: usize) -> bool {
    let skip = if loops == 0 { Some(whole) } else { None };
    let used = cx.control_names(skip);
    written_names(body).is_disjoint(&used)
}

fn body_is_iteration_invariant(body: &Cmd, targets: &SliceTargets, tainted: &BTreeSet<Ident>) -> bool {
    let mut allowed: BTreeSet<Ident> = targets.pairs.iter().map(|(_, s)| s.clone()).collect();
    let mut assigned = BTreeSet::new();
    body.walk(&mut |c| match c {
        Cmd::For { iterator, .. } => {
            allowed.insert(iterator.clone());
        }
        Cmd::Assign { target, .. } => {
            assigned.insert(target.clone());
        }
        Cmd::Opaque { writes, .. } => assigned.extend(writes.iter().cloned()),
        _ => {}
    });

    let index_ok = |e: &IntExpr| -> bool {
        if e.has_read() {
            return false;
        }
        let mut vars = BTreeSet::new();
        e.collect_vars(&mut vars);
        vars.is_subset(&allowed)
    };
    let mut ok = true;
    body.for_each_int(&mut |e| {
        e.for_each_read(&mut |_, index, _| ok &= index_ok(index));
    });
    body.walk(&mut |c| match c {
        Cmd::Write { index, .. } | Cmd::Access { index, .. } => ok &= index_ok(index),
        Cmd::For { lower, upper, .. } => ok &= index_ok(lower) && index_ok(upper),
        Cmd::If { guard, .. } | Cmd::While { guard, .. } => {
            let mut vars = BTreeSet::new();
            guard.collect_vars(&mut vars);
            if bool_is_data_dependent(guard, tainted) {
                ok &= vars.iter().all(|v| allowed.contains(v) || !assigned.contains(v));
            } else {
                ok &= vars.is_subset(&allowed);
            }
        }
        _ => {}
    });
    ok
}

/// Fixpoint of slicing and loop collapse.
pub fn reduce(cmd: &Cmd, targets: &SliceTargets) -> Cmd {
    let mut current = cmd.clone();
    loop {
        let next = collapse_data_independent_loops(&dependency_slice(&current, targets), targets);
        if next == current {
            return next;
        }
        current = next;
    }
}

/// Reduces a whole program and trims its header to what the body still uses.
pub fn reduce_program(program: &Program, targets: &SliceTargets) -> Program {
    let body = reduce(&program.body, targets);
    restrict_header(program, body, targets)
}

/// Keeps the params, arrays, and frames that `body` still mentions.
pub(crate) fn restrict_header(program: &Program, body: Cmd, targets: &SliceTargets) -> Program {
    let used_params = body.collect_params();
    let touched = body.arrays_touched();
    let mentioned = body.mentioned_vars();
    let frames = body.frames_used();
    Program {
        params: program
            .params
            .iter()
            .filter(|p| used_params.contains(*p))
            .cloned()
            .collect(),
        spec: SafetySpec {
            arrays: program
                .spec
                .arrays
                .iter()
                .filter(|(a, s)| targets.is_array(a) || touched.contains(a) || mentioned.contains(s))
                .cloned()
                .collect(),
            frames: program
                .spec
                .frames
                .iter()
                .filter(|f| frames.contains(*f))
                .cloned()
                .collect(),
        },
        body,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, print_cmd};

    fn targets() -> SliceTargets {
        SliceTargets::new(Ident::new("a").unwrap(), Ident::new("s").unwrap())
    }

    fn body(src: &str) -> Cmd {
        parse(&format!("requires array(a, s) * F; {src} ensures array(a, s) * F"))
            .unwrap()
            .body
    }

    #[test]
    fn running_example_reduces_to_the_reduced_corpus_program() {
        let fig1 = parse(include_str!("../../../corpus/fig1.ct")).unwrap();
        let fig2 = parse(include_str!("../../../corpus/fig2.ct")).unwrap();
        let reduced = reduce_program(&fig1, &targets());
        assert_eq!(reduced, fig2, "\n{}", crate::frontend::pretty_print(&reduced));
        assert_eq!(reduce_program(&fig2, &targets()), fig2);
    }

    #[test]
    fn skip_slices_to_skip() {
        assert_eq!(dependency_slice(&Cmd::Skip, &targets()), Cmd::Skip);
        assert_eq!(reduce(&Cmd::Skip, &targets()), Cmd::Skip);
    }

    #[test]
    fn index_feeding_assignment_is_kept() {
        let c = body("x := 1; a[x] := 0");
        assert_eq!(dependency_slice(&c, &targets()), c);
    }

    #[test]
    fn dead_assignment_keeps_its_read() {
        let c = body("r := a[Y] + q; z := 4");
        assert_eq!(print_cmd(&dependency_slice(&c, &targets())), "a[Y]");
    }

    #[test]
    fn opaque_blocks_over_frames_vanish() {
        let c = body("opaque f writes(x) frames(F); opaque g reads(x) writes(y) frames(F)");
        assert_eq!(reduce(&c, &targets()), Cmd::Skip);
    }

    #[test]
    fn opaque_output_feeding_an_index_is_kept() {
        let c = body("opaque f writes(x) frames(F); if x < 2 then { a[0] }");
        assert_eq!(dependency_slice(&c, &targets()), c);
    }

    #[test]
    fn loop_with_state_dependent_index_is_not_collapsed() {
        let c = body("x := 0; while x < 3 do { a[x] := 0; x := x + 1 }");
        assert_eq!(reduce(&c, &targets()), c);
    }

    #[test]
    fn empty_while_collapses() {
        let c = body("while b < 1 do { skip }");
        assert_eq!(collapse_data_independent_loops(&c, &targets()), Cmd::Skip);
    }

    #[test]
    fn guard_only_conditional_keeps_guard_reads() {
        let c = body("if a[2] < a[3] then { z := 1 }");
        assert_eq!(print_cmd(&reduce(&c, &targets())), "a[2];\na[3]");
    }

    #[test]
    fn loop_reading_assigned_scalar_in_data_guard_is_kept() {
        let c = body("c := 0; while c < 1 do { c := c + a[0]; if c > 3 then { a[7] } }");
        let r = reduce(&c, &targets());
        assert!(matches!(r.stmts()[1], Cmd::While { .. }), "{}", print_cmd(&r));
    }

    #[test]
    fn loop_whose_result_steers_later_guards_is_kept() {
        let c = body(
            "n := 1; while n == 1 do { n := 0; for i in [0 : s - 2] do { if a[i + 1] < a[i] then { n := 1; t := a[i]; a[i] := a[i + 1]; a[i + 1] := t } } };
             if a[2] < a[1] then { a[0 - 1] }",
        );
        let r = reduce(&c, &targets());
        assert!(r.stmts().iter().any(|c| matches!(c, Cmd::While { .. })), "{}", print_cmd(&r));
    }

    #[test]
    fn loop_inside_a_loop_is_kept_when_it_reads_its_writes() {
        let c = body(
            "for j in [0 : 1] do { n := 1; while n == 1 do { n := 0; if a[1] < a[0] then { n := 1; a[0] := a[1] } } }",
        );
        let r = reduce(&c, &targets());
        let mut kept = false;
        r.walk(&mut |c| kept |= matches!(c, Cmd::While { .. }));
        assert!(kept, "{}", print_cmd(&r));
    }

    #[test]
    fn untouched_array_disappears_from_header() {
        let p = parse(
            "requires array(a, s) * array(l, n) * F;
             for j in [0 : n - 1] do { l[j] := j };
             a[0]
             ensures array(a, s) * array(l, n) * F",
        )
        .unwrap();
        let r = reduce_program(&p, &targets());
        assert_eq!(r.spec.arrays.len(), 1);
        assert!(r.spec.frames.is_empty());
        assert_eq!(print_cmd(&r.body), "a[0]");
    }
}
