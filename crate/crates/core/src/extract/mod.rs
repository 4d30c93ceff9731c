//! Syntax-directed extraction of size constraints from a reduced program.
//!
//! Each constraint describes the sizes at which one access (or one loop's
//! accesses) may go out of bounds, conjoined with the size guards under
//! which it is reached.

mod affine;
mod constraint;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dataflow::{bool_is_data_dependent, int_is_data_dependent, tainted_vars};
use crate::frontend::{substitute_var, BoolExpr, Cmd, CmpOp, Ident, IntExpr, Span};

pub use affine::Affine;
pub(crate) use affine::{linearize, Lin, NotLinear};
pub use constraint::{Atom, AtomOp, Constraint, ConstraintSet, Entry};

pub const UNROLL_CAP: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum WarningKind {
    /// A constant index below zero: the access faults whenever it is reached.
    AlwaysFaults,
    /// The else branch of a guard with no single-atom negation is not refined.
    ElseUnrefined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractWarning {
    pub site: Span,
    pub kind: WarningKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "result")]
pub enum ExtractionResult {
    Extracted {
        set: ConstraintSet,
        warnings: Vec<ExtractWarning>,
    },
    Unsupported {
        site: Span,
        construct: String,
    },
}

impl ExtractionResult {
    pub fn set(&self) -> Option<&ConstraintSet> {
        match self {
            ExtractionResult::Extracted { set, .. } => Some(set),
            ExtractionResult::Unsupported { .. } => None,
        }
    }
}

#[derive(Debug)]
struct Unsupported {
    site: Span,
    construct: String,
}

fn unsupported<T>(site: Span, construct: impl Into<String>) -> Result<T, Unsupported> {
    Err(Unsupported {
        site,
        construct: construct.into(),
    })
}

struct Extractor<'a> {
    array: &'a Ident,
    size: &'a Ident,
    tainted: BTreeSet<Ident>,
    set: ConstraintSet,
    warnings: Vec<ExtractWarning>,
}

/// Extracts the constraint set for accesses to `array` of size `size`.
///
/// Params may be symbolic or already bound. The first construct outside
/// the supported fragment, in program order, is reported as unsupported.
pub fn extract(cmd: &Cmd, array: &Ident, size: &Ident) -> ExtractionResult {
    let mut x = Extractor {
        array,
        size,
        tainted: tainted_vars(cmd),
        set: ConstraintSet::new(size.clone()),
        warnings: Vec::new(),
    };
    match x.cmd(cmd, &Constraint::default()) {
        Ok(()) => ExtractionResult::Extracted {
            set: x.set,
            warnings: x.warnings,
        },
        Err(u) => ExtractionResult::Unsupported {
            site: u.site,
            construct: u.construct,
        },
    }
}

/// Offsets `z` of the accesses `array[iterator + z]` in a loop body.
///
/// Data-dependent guards are transparent: both branches count. Any other
/// access shape is unsupported.
pub fn normalize_body(
    body: &Cmd,
    array: &Ident,
    size: &Ident,
    iterator: &Ident,
) -> Result<BTreeSet<Affine>, (Span, String)> {
    let x = Extractor {
        array,
        size,
        tainted: tainted_vars(body),
        set: ConstraintSet::new(size.clone()),
        warnings: Vec::new(),
    };
    let mut out = BTreeSet::new();
    x.body_offsets(body, iterator, &mut out)
        .map_err(|u| (u.site, u.construct))?;
    Ok(out)
}

impl Extractor<'_> {
    fn context_with(&self, ctx: &Constraint, atom: Atom) -> Constraint {
        let mut c = ctx.clone();
        c.push(atom);
        c
    }

    /// Rule for an access outside any size-bounded loop.
    fn access(&mut self, index: &IntExpr, site: Span, ctx: &Constraint) -> Result<(), Unsupported> {
        let lin = match linearize(index, self.size, None) {
            Ok(l) => l,
            Err(NotLinear::Read) => {
                return unsupported(site, format!("index of `{}` reads the array", self.array))
            }
            Err(NotLinear::Var(v)) => {
                return unsupported(site, format!("index of `{}` depends on variable `{v}`", self.array))
            }
            Err(_) => return unsupported(site, format!("non-linear index into `{}`", self.array)),
        };
        if lin.size != 0 {
            return unsupported(
                site,
                format!("index into `{}` mentions size `{}`", self.array, self.size),
            );
        }
        let v = lin.rest;
        if let Some(c) = v.as_constant() {
            if c < 0 {
                self.warnings.push(ExtractWarning {
                    site,
                    kind: WarningKind::AlwaysFaults,
                    message: format!("index {c} into `{}` is negative and faults whenever reached", self.array),
                });
                self.set.insert(ctx.clone(), site);
            }
        }
        let c = self.context_with(ctx, Atom::new(AtomOp::Le, v));
        self.set.insert(c, site);
        Ok(())
    }

    /// Applies the access rule to every target read inside `e`.
    fn reads(&mut self, e: &IntExpr, ctx: &Constraint) -> Result<(), Unsupported> {
        let mut found: Vec<(&IntExpr, Span)> = Vec::new();
        collect_target_reads(e, self.array, &mut found);
        for (index, span) in found {
            self.reads(index, ctx)?;
            self.access(index, span, ctx)?;
        }
        Ok(())
    }

    fn bool_reads(&mut self, g: &BoolExpr, ctx: &Constraint) -> Result<(), Unsupported> {
        let mut ints = Vec::new();
        g.for_each_int(&mut |e| ints.push(e));
        for e in ints {
            self.reads(e, ctx)?;
        }
        Ok(())
    }

    fn cmd(&mut self, c: &Cmd, ctx: &Constraint) -> Result<(), Unsupported> {
        match c {
            Cmd::Skip | Cmd::Opaque { .. } => Ok(()),
            Cmd::Assign { rhs, .. } => self.reads(rhs, ctx),
            Cmd::Write {
                array,
                index,
                rhs,
                span,
            } => {
                self.reads(index, ctx)?;
                if array == self.array {
                    self.access(index, *span, ctx)?;
                }
                self.reads(rhs, ctx)
            }
            Cmd::Access { array, index, span } => {
                self.reads(index, ctx)?;
                if array == self.array {
                    self.access(index, *span, ctx)?;
                }
                Ok(())
            }
            Cmd::Seq(cs) => cs.iter().try_for_each(|c| self.cmd(c, ctx)),
            Cmd::If {
                guard,
                then_branch,
                else_branch,
                span,
            } => {
                if bool_is_data_dependent(guard, &self.tainted) {
                    self.bool_reads(guard, ctx)?;
                    self.cmd(then_branch, ctx)?;
                    return self.cmd(else_branch, ctx);
                }
                let g = self.guard(guard, *span)?;
                let mut then_ctx = ctx.clone();
                g.then_atoms.into_iter().for_each(|a| then_ctx.push(a));
                self.cmd(then_branch, &then_ctx)?;
                let mut else_ctx = ctx.clone();
                match g.else_atoms {
                    Some(atoms) => atoms.into_iter().for_each(|a| else_ctx.push(a)),
                    None => {
                        if *else_branch.as_ref() != Cmd::Skip {
                            self.warnings.push(ExtractWarning {
                                site: *span,
                                kind: WarningKind::ElseUnrefined,
                                message: "else branch constraints are not refined by the negated guard"
                                    .to_string(),
                            });
                        }
                    }
                }
                self.cmd(else_branch, &else_ctx)
            }
            Cmd::While { span, .. } => unsupported(*span, "while loop remaining after reduction"),
            Cmd::For {
                iterator,
                lower,
                upper,
                body,
                span,
            } => self.for_loop(iterator, lower, upper, body, *span, ctx),
        }
    }

    fn for_loop(
        &mut self,
        iterator: &Ident,
        lower: &IntExpr,
        upper: &IntExpr,
        body: &Cmd,
        span: Span,
        ctx: &Constraint,
    ) -> Result<(), Unsupported> {
        if int_is_data_dependent(lower, &self.tainted) || int_is_data_dependent(upper, &self.tainted) {
            return unsupported(span, "loop bound depends on array contents");
        }
        let lo = linearize(lower, self.size, None);
        let hi = linearize(upper, self.size, None);
        let (lo, hi) = match (lo, hi) {
            (Ok(lo), Ok(hi)) => (lo, hi),
            _ => return unsupported(span, "loop bounds are not affine in size and params"),
        };
        if lo.size != 0 {
            return unsupported(span, format!("loop lower bound mentions size `{}`", self.size));
        }
        match hi.size {
            0 => self.unroll(iterator, &lo.rest, &hi.rest, body, span, ctx),
            1 => {
                let mut offsets = BTreeSet::new();
                self.body_offsets(body, iterator, &mut offsets)?;
                if offsets.is_empty() {
                    return Ok(());
                }
                let r = -&hi.rest;
                let c = self.context_with(ctx, Atom::new(AtomOp::Ge, &lo.rest + &r));
                self.set.insert(c, span);
                Ok(())
            }
            _ => unsupported(span, format!("loop upper bound scales size `{}`", self.size)),
        }
    }

    fn unroll(
        &mut self,
        iterator: &Ident,
        lo: &Affine,
        hi: &Affine,
        body: &Cmd,
        span: Span,
        ctx: &Constraint,
    ) -> Result<(), Unsupported> {
        let (Some(lo), Some(hi)) = (lo.as_constant(), hi.as_constant()) else {
            return unsupported(span, "loop with param-dependent constant bounds cannot be unrolled symbolically");
        };
        if hi.saturating_sub(lo) >= UNROLL_CAP {
            return unsupported(span, format!("loop with more than {UNROLL_CAP} iterations"));
        }
        for v in lo..=hi {
            self.cmd(&substitute_var(body, iterator, v), ctx)?;
        }
        Ok(())
    }

    fn body_offsets(&self, body: &Cmd, iter: &Ident, out: &mut BTreeSet<Affine>) -> Result<(), Unsupported> {
        let offset = |index: &IntExpr, site: Span, out: &mut BTreeSet<Affine>| -> Result<(), Unsupported> {
            match linearize(index, self.size, Some(iter)) {
                Ok(Lin { size: 0, iter: 1, rest }) => {
                    out.insert(rest);
                    Ok(())
                }
                Ok(Lin { size, .. }) if size != 0 => unsupported(
                    site,
                    format!("index into `{}` inside loop mentions size `{}`", self.array, self.size),
                ),
                _ => unsupported(
                    site,
                    format!("access into `{}` inside loop is not of the form `{}[{iter} + z]`", self.array, self.array),
                ),
            }
        };
        let reads = |e: &IntExpr, out: &mut BTreeSet<Affine>| -> Result<(), Unsupported> {
            let mut found = Vec::new();
            collect_target_reads(e, self.array, &mut found);
            for (index, site) in found {
                offset(index, site, out)?;
            }
            Ok(())
        };
        match body {
            Cmd::Skip | Cmd::Opaque { .. } => Ok(()),
            Cmd::Assign { rhs, .. } => reads(rhs, out),
            Cmd::Write {
                array,
                index,
                rhs,
                span,
            } => {
                reads(index, out)?;
                if array == self.array {
                    offset(index, *span, out)?;
                }
                reads(rhs, out)
            }
            Cmd::Access { array, index, span } => {
                reads(index, out)?;
                if array == self.array {
                    offset(index, *span, out)?;
                }
                Ok(())
            }
            Cmd::Seq(cs) => cs.iter().try_for_each(|c| self.body_offsets(c, iter, out)),
            Cmd::If {
                guard,
                then_branch,
                else_branch,
                span,
            } => {
                if bool_is_data_dependent(guard, &self.tainted) {
                    let mut ints = Vec::new();
                    guard.for_each_int(&mut |e| ints.push(e));
                    for e in ints {
                        reads(e, out)?;
                    }
                    self.body_offsets(then_branch, iter, out)?;
                    return self.body_offsets(else_branch, iter, out);
                }
                match const_guard(guard) {
                    Some(true) => self.body_offsets(then_branch, iter, out),
                    Some(false) => self.body_offsets(else_branch, iter, out),
                    None => unsupported(*span, "size- or iterator-dependent guard inside loop"),
                }
            }
            Cmd::For { body: inner, span, .. } => {
                if inner.arrays_touched().contains(self.array) {
                    unsupported(*span, format!("nested loop accessing `{}`", self.array))
                } else {
                    Ok(())
                }
            }
            Cmd::While { span, .. } => unsupported(*span, "while loop inside loop body"),
        }
    }

    fn guard(&self, g: &BoolExpr, site: Span) -> Result<GuardAtoms, Unsupported> {
        if let Some(v) = const_guard(g) {
            let (t, e) = if v {
                (vec![], vec![Atom::unsatisfiable()])
            } else {
                (vec![Atom::unsatisfiable()], vec![])
            };
            return Ok(GuardAtoms {
                then_atoms: t,
                else_atoms: Some(e),
            });
        }
        let then_atoms = self.conjunction(g, site)?;
        let single = match g {
            BoolExpr::Cmp(..) => true,
            BoolExpr::Not(inner) => matches!(**inner, BoolExpr::Cmp(..)),
            _ => false,
        };
        let else_atoms = if single && then_atoms.len() == 1 {
            then_atoms[0].negate().map(|a| vec![a])
        } else {
            None
        };
        Ok(GuardAtoms {
            then_atoms,
            else_atoms,
        })
    }

    fn conjunction(&self, g: &BoolExpr, site: Span) -> Result<Vec<Atom>, Unsupported> {
        match g {
            BoolExpr::Lit(true) => Ok(vec![]),
            BoolExpr::Lit(false) => Ok(vec![Atom::unsatisfiable()]),
            BoolExpr::Cmp(op, l, r) => self.comparison(*op, l, r, site).map(|a| a.into_iter().collect()),
            BoolExpr::And(l, r) => {
                let mut atoms = self.conjunction(l, site)?;
                atoms.extend(self.conjunction(r, site)?);
                Ok(atoms)
            }
            BoolExpr::Not(inner) => match &**inner {
                BoolExpr::Cmp(op, l, r) => match op.negate() {
                    CmpOp::Ne => unsupported(site, "disequality guard on size"),
                    neg => self.comparison(neg, l, r, site).map(|a| a.into_iter().collect()),
                },
                BoolExpr::Lit(v) => self.conjunction(&BoolExpr::Lit(!v), site),
                _ => unsupported(site, "negated compound guard on size"),
            },
            BoolExpr::Or(..) => unsupported(site, "disjunctive guard on size"),
        }
    }

    /// `l op r` as at most one atom; `None` when the comparison always holds.
    fn comparison(&self, op: CmpOp, l: &IntExpr, r: &IntExpr, site: Span) -> Result<Option<Atom>, Unsupported> {
        let (l, r) = match (linearize(l, self.size, None), linearize(r, self.size, None)) {
            (Ok(l), Ok(r)) => (l, r),
            _ => return unsupported(site, "guard is not affine in size and params"),
        };
        let d = l.sub(&r);
        let op = match op {
            CmpOp::Lt => AtomOp::Lt,
            CmpOp::Le => AtomOp::Le,
            CmpOp::Gt => AtomOp::Gt,
            CmpOp::Ge => AtomOp::Ge,
            CmpOp::Eq => AtomOp::Eq,
            CmpOp::Ne => return unsupported(site, "disequality guard on size"),
        };
        match d.size {
            0 => match d.rest.as_constant() {
                Some(v) => Ok(if op.holds(v, 0) {
                    None
                } else {
                    Some(Atom::unsatisfiable())
                }),
                None => unsupported(site, "guard over params only cannot be decided symbolically"),
            },
            1 => Ok(Some(Atom::new(op, -&d.rest))),
            -1 => {
                let flipped = match op {
                    AtomOp::Lt => AtomOp::Gt,
                    AtomOp::Le => AtomOp::Ge,
                    AtomOp::Gt => AtomOp::Lt,
                    AtomOp::Ge => AtomOp::Le,
                    AtomOp::Eq => AtomOp::Eq,
                };
                Ok(Some(Atom::new(flipped, d.rest)))
            }
            _ => unsupported(site, format!("guard scales size `{}`", self.size)),
        }
    }
}

struct GuardAtoms {
    then_atoms: Vec<Atom>,
    /// `None` when the negation is not a conjunction of atoms.
    else_atoms: Option<Vec<Atom>>,
}

/// Evaluates a guard over literals only.
fn const_guard(g: &BoolExpr) -> Option<bool> {
    fn int(e: &IntExpr) -> Option<i64> {
        match e {
            IntExpr::Lit(v) => Some(*v),
            IntExpr::Bin(op, l, r) => crate::semantics::ir::arith(*op, int(l)?, int(r)?),
            _ => None,
        }
    }
    match g {
        BoolExpr::Lit(v) => Some(*v),
        BoolExpr::Cmp(op, l, r) => Some(op.holds(int(l)?, int(r)?)),
        BoolExpr::And(l, r) => Some(const_guard(l)? && const_guard(r)?),
        BoolExpr::Or(l, r) => Some(const_guard(l)? || const_guard(r)?),
        BoolExpr::Not(x) => Some(!const_guard(x)?),
    }
}

/// Outermost reads of `array` in evaluation order.
fn collect_target_reads<'e>(e: &'e IntExpr, array: &Ident, out: &mut Vec<(&'e IntExpr, Span)>) {
    match e {
        IntExpr::Lit(_) | IntExpr::Var(_) | IntExpr::Param(_) => {}
        IntExpr::Read {
            array: a,
            index,
            span,
        } => {
            if a == array {
                out.push((index, *span));
            } else {
                collect_target_reads(index, array, out);
            }
        }
        IntExpr::Bin(_, l, r) => {
            collect_target_reads(l, array, out);
            collect_target_reads(r, array, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn id(s: &str) -> Ident {
        Ident::new(s).unwrap()
    }

    fn extract_src(src: &str) -> ExtractionResult {
        let p = parse(&format!(
            "param B, L, R, Y; requires array(a, s); {src} ensures array(a, s)"
        ))
        .unwrap();
        extract(&p.body, &id("a"), &id("s"))
    }

    fn text(r: &ExtractionResult) -> String {
        match r {
            ExtractionResult::Extracted { set, .. } => set.to_string(),
            ExtractionResult::Unsupported { construct, .. } => format!("unsupported: {construct}"),
        }
    }

    #[test]
    fn constant_access() {
        assert_eq!(text(&extract_src("a[Y]")), "s <= Y");
    }

    #[test]
    fn reduced_example() {
        let p = parse(include_str!("../../../../corpus/fig2.ct")).unwrap();
        let r = extract(&p.body, &id("a"), &id("s"));
        assert_eq!(text(&r), "s > B && s >= L+R ; s > B && s <= Y");
    }

    #[test]
    fn skip_has_no_constraints() {
        let r = extract_src("skip");
        assert!(r.set().unwrap().is_empty());
    }

    #[test]
    fn loop_offsets_drop_out() {
        let r = extract_src("for i in [L : s - R] do { tmp := a[i + 1]; a[i] := tmp }");
        assert_eq!(text(&r), "s >= L+R");
    }

    #[test]
    fn body_offsets() {
        let p = parse(include_str!("../../../../corpus/fig2.ct")).unwrap();
        let Cmd::If { then_branch, .. } = &p.body else { panic!() };
        let Cmd::For { body, .. } = &then_branch.stmts()[0] else { panic!() };
        let offs = normalize_body(body, &id("a"), &id("s"), &id("i")).unwrap();
        let offs: Vec<String> = offs.iter().map(|a| a.to_string()).collect();
        assert_eq!(offs, vec!["0", "1"]);
        assert!(normalize_body(&Cmd::Skip, &id("a"), &id("s"), &id("i")).unwrap().is_empty());
        let p = parse("requires array(a, s); a[s - 1] ensures array(a, s)").unwrap();
        assert!(normalize_body(&p.body, &id("a"), &id("s"), &id("i")).is_err());
    }

    #[test]
    fn size_in_index_is_unsupported() {
        assert!(text(&extract_src("a[s - 1]")).starts_with("unsupported"));
    }

    #[test]
    fn else_branch_negates_single_guard() {
        let r = extract_src("if s > B then { a[0] } else { a[Y] }");
        assert_eq!(text(&r), "s > B && s <= 0 ; s <= B && s <= Y");
    }

    #[test]
    fn else_branch_of_conjunction_is_unrefined() {
        let r = extract_src("if s > B && s < Y then { a[0] } else { a[L] }");
        assert_eq!(text(&r), "s > B && s < Y && s <= 0 ; s <= L");
        let ExtractionResult::Extracted { warnings, .. } = r else { panic!() };
        assert_eq!(warnings[0].kind, WarningKind::ElseUnrefined);
    }

    #[test]
    fn flipped_guard() {
        assert_eq!(text(&extract_src("if B < s then { a[Y] }")), "s > B && s <= Y");
        assert_eq!(text(&extract_src("if 3 - s >= 1 then { a[Y] }")), "s <= 2 && s <= Y");
    }

    #[test]
    fn data_dependent_guard_is_transparent() {
        let r = extract_src("if a[0] < a[1] then { a[Y] }");
        assert_eq!(text(&r), "s <= 0 ; s <= 1 ; s <= Y");
    }

    #[test]
    fn negative_constant_index_keeps_its_context() {
        let p = parse("requires array(a, s); if s > 2 then { a[0 - 1] } ensures array(a, s)").unwrap();
        let r = extract(&p.body, &id("a"), &id("s"));
        assert_eq!(text(&r), "s > 2 ; s > 2 && s <= -1");
        let ExtractionResult::Extracted { warnings, .. } = r else { panic!() };
        assert_eq!(warnings[0].kind, WarningKind::AlwaysFaults);
    }

    #[test]
    fn constant_bounded_loop_is_unrolled() {
        let p = parse("requires array(a, s); for i in [0 : 2] do { a[i + 1] } ensures array(a, s)").unwrap();
        assert_eq!(text(&extract(&p.body, &id("a"), &id("s"))), "s <= 1 ; s <= 2 ; s <= 3");
        let p = parse("requires array(a, s); for i in [0 : 99] do { a[i] } ensures array(a, s)").unwrap();
        assert!(text(&extract(&p.body, &id("a"), &id("s"))).starts_with("unsupported"));
    }

    #[test]
    fn while_and_disjunction_are_unsupported() {
        let r = extract_src("while s > 3 do { a[0] }");
        assert!(matches!(r, ExtractionResult::Unsupported { .. }));
        let r = extract_src("if s > 1 || s < 0 then { a[0] }");
        assert!(text(&r).contains("disjunctive"));
    }

    #[test]
    fn constant_guard_is_decided() {
        let p = parse("requires array(a, s); if 1 > 2 then { a[5] } else { a[3] } ensures array(a, s)")
            .unwrap();
        assert_eq!(text(&extract(&p.body, &id("a"), &id("s"))), "s < 0 && s <= 5 ; s <= 3");
    }
}
