//! Which scalars may carry array contents or opaque outputs.

use std::collections::BTreeSet;

use crate::frontend::{BoolExpr, Cmd, Ident, IntExpr};

/// Variables whose value may depend on array contents or opaque outputs.
///
/// Flow-insensitive and transitive: a variable is tainted if some
/// assignment to it reads a cell or a tainted variable, if it is written by
/// an opaque block, or if it is assigned under a data-dependent guard.
pub fn tainted_vars(cmd: &Cmd) -> BTreeSet<Ident> {
    let mut tainted = BTreeSet::new();
    loop {
        let before = tainted.len();
        walk(cmd, false, &mut tainted);
        if tainted.len() == before {
            return tainted;
        }
    }
}

pub fn int_is_data_dependent(e: &IntExpr, tainted: &BTreeSet<Ident>) -> bool {
    if e.has_read() {
        return true;
    }
    let mut vars = BTreeSet::new();
    e.collect_vars(&mut vars);
    vars.iter().any(|v| tainted.contains(v))
}

pub fn bool_is_data_dependent(g: &BoolExpr, tainted: &BTreeSet<Ident>) -> bool {
    if g.has_read() {
        return true;
    }
    let mut vars = BTreeSet::new();
    g.collect_vars(&mut vars);
    vars.iter().any(|v| tainted.contains(v))
}

fn walk(cmd: &Cmd, dependent: bool, tainted: &mut BTreeSet<Ident>) {
    match cmd {
        Cmd::Skip | Cmd::Write { .. } | Cmd::Access { .. } => {}
        Cmd::Assign { target, rhs, .. } => {
            if dependent || int_is_data_dependent(rhs, tainted) {
                tainted.insert(target.clone());
            }
        }
        Cmd::Seq(cs) => cs.iter().for_each(|c| walk(c, dependent, tainted)),
        Cmd::If {
            guard,
            then_branch,
            else_branch,
            ..
        } => {
            let d = dependent || bool_is_data_dependent(guard, tainted);
            walk(then_branch, d, tainted);
            walk(else_branch, d, tainted);
        }
        Cmd::While { guard, body, .. } => {
            let d = dependent || bool_is_data_dependent(guard, tainted);
            walk(body, d, tainted);
        }
        Cmd::For {
            iterator,
            lower,
            upper,
            body,
            ..
        } => {
            let d = dependent
                || int_is_data_dependent(lower, tainted)
                || int_is_data_dependent(upper, tainted);
            if d {
                tainted.insert(iterator.clone());
            }
            walk(body, d, tainted);
        }
        Cmd::Opaque { writes, .. } => tainted.extend(writes.iter().cloned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn names(set: &BTreeSet<Ident>) -> Vec<&str> {
        set.iter().map(Ident::as_str).collect()
    }

    #[test]
    fn taint_follows_cells_opaque_outputs_and_control() {
        let p = parse(
            "requires array(a, s) * F;
             opaque f writes(x) frames(F);
             y := x + 1;
             z := 3;
             t := a[0];
             if t < 2 then { w := 1 };
             for i in [0 : s - 1] do { u := i }
             ensures array(a, s) * F",
        )
        .unwrap();
        assert_eq!(names(&tainted_vars(&p.body)), vec!["t", "w", "x", "y"]);
    }

    #[test]
    fn taint_is_transitive_across_program_order() {
        let p = parse(
            "requires array(a, s);
             for k in [0 : 2] do { q := r; r := a[k] }
             ensures array(a, s)",
        )
        .unwrap();
        assert_eq!(names(&tainted_vars(&p.body)), vec!["q", "r"]);
    }
}
