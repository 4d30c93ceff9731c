//! Single-site syntactic mutations.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::frontend::{BoolExpr, Cmd, Ident, IntExpr, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum MutationKind {
    /// `a[e]` becomes `a[e + 1]` for an index mentioning a variable.
    OffsetBump,
    /// The upper bound of a `for` loop grows by one.
    BoundWiden,
    /// `if g then c1 else c2` becomes `c1` for a guard over sizes, iterators and params.
    GuardDrop,
    /// A read at constant index `v` reads at `v + 1`.
    ReadPastEnd,
}

impl MutationKind {
    pub const ALL: [MutationKind; 4] = [
        MutationKind::OffsetBump,
        MutationKind::BoundWiden,
        MutationKind::GuardDrop,
        MutationKind::ReadPastEnd,
    ];
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MutationKind::OffsetBump => "offsetBump",
            MutationKind::BoundWiden => "boundWiden",
            MutationKind::GuardDrop => "guardDrop",
            MutationKind::ReadPastEnd => "readPastEnd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Mutation {
    pub kind: MutationKind,
    pub site: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutateError {
    #[error("{kind} does not apply at {site}")]
    Inapplicable { kind: MutationKind, site: Span },
}

fn same_place(a: Span, b: Span) -> bool {
    a.line == b.line && a.col == b.col
}

fn is_constant(e: &IntExpr) -> bool {
    let mut vars = BTreeSet::new();
    e.collect_vars(&mut vars);
    vars.is_empty() && !e.has_read()
}

/// Variables whose value can change: assignment targets and opaque outputs.
fn mutable_vars(cmd: &Cmd) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    cmd.walk(&mut |c| match c {
        Cmd::Assign { target, .. } => {
            out.insert(target.clone());
        }
        Cmd::Opaque { writes, .. } => out.extend(writes.iter().cloned()),
        _ => {}
    });
    out
}

fn data_independent(g: &BoolExpr, mutable: &BTreeSet<Ident>) -> bool {
    let mut vars = BTreeSet::new();
    g.collect_vars(&mut vars);
    !g.has_read() && vars.is_disjoint(mutable)
}

/// Reads inside `e`, outermost first, as `(span, index)`.
fn reads_in<'a>(e: &'a IntExpr, out: &mut Vec<(Span, &'a IntExpr)>) {
    match e {
        IntExpr::Read { index, span, .. } => {
            out.push((*span, index));
            reads_in(index, out);
        }
        IntExpr::Bin(_, l, r) => {
            reads_in(l, out);
            reads_in(r, out);
        }
        _ => {}
    }
}

fn reads_in_bool<'a>(b: &'a BoolExpr, out: &mut Vec<(Span, &'a IntExpr)>) {
    b.for_each_int(&mut |e| reads_in(e, out));
}

/// Locations where `kind` applies, in program order.
pub fn mutation_sites(cmd: &Cmd, kind: MutationKind) -> Vec<Span> {
    let mutable = mutable_vars(cmd);
    let mut out = Vec::new();
    cmd.walk(&mut |c| {
        let mut reads = Vec::new();
        let mut own: Option<(Span, &IntExpr, bool)> = None;
        match c {
            Cmd::Assign { rhs, .. } => reads_in(rhs, &mut reads),
            Cmd::Write {
                index, rhs, span, ..
            } => {
                own = Some((*span, index, false));
                reads_in(index, &mut reads);
                reads_in(rhs, &mut reads);
            }
            Cmd::Access { index, span, .. } => {
                own = Some((*span, index, true));
                reads_in(index, &mut reads);
            }
            Cmd::If { guard, span, .. } => {
                if kind == MutationKind::GuardDrop && data_independent(guard, &mutable) {
                    out.push(*span);
                }
                reads_in_bool(guard, &mut reads);
            }
            Cmd::While { guard, .. } => reads_in_bool(guard, &mut reads),
            Cmd::For {
                lower, upper, span, ..
            } => {
                if kind == MutationKind::BoundWiden {
                    out.push(*span);
                }
                reads_in(lower, &mut reads);
                reads_in(upper, &mut reads);
            }
            _ => {}
        }
        let accesses = own
            .into_iter()
            .chain(reads.into_iter().map(|(s, i)| (s, i, true)));
        for (span, index, is_read) in accesses {
            let constant = is_constant(index);
            match kind {
                MutationKind::OffsetBump if !constant => out.push(span),
                MutationKind::ReadPastEnd if constant && is_read => out.push(span),
                _ => {}
            }
        }
    });
    out
}

struct Mutator {
    m: Mutation,
    done: bool,
}

impl Mutator {
    fn hit(&mut self, span: Span) -> bool {
        if !self.done && same_place(span, self.m.site) {
            self.done = true;
            true
        } else {
            false
        }
    }

    fn wants_index(&self, index: &IntExpr) -> bool {
        match self.m.kind {
            MutationKind::OffsetBump => !is_constant(index),
            MutationKind::ReadPastEnd => is_constant(index),
            _ => false,
        }
    }

    fn int(&mut self, e: &IntExpr) -> IntExpr {
        match e {
            IntExpr::Read { array, index, span } => {
                let bump = self.wants_index(index) && self.hit(*span);
                let index = self.int(index);
                IntExpr::Read {
                    array: array.clone(),
                    index: Box::new(if bump { index.plus_const(1) } else { index }),
                    span: *span,
                }
            }
            IntExpr::Bin(op, l, r) => IntExpr::Bin(*op, Box::new(self.int(l)), Box::new(self.int(r))),
            leaf => leaf.clone(),
        }
    }

    fn boolean(&mut self, b: &BoolExpr) -> BoolExpr {
        match b {
            BoolExpr::Lit(v) => BoolExpr::Lit(*v),
            BoolExpr::Cmp(op, l, r) => BoolExpr::Cmp(*op, self.int(l), self.int(r)),
            BoolExpr::And(l, r) => BoolExpr::And(Box::new(self.boolean(l)), Box::new(self.boolean(r))),
            BoolExpr::Or(l, r) => BoolExpr::Or(Box::new(self.boolean(l)), Box::new(self.boolean(r))),
            BoolExpr::Not(x) => BoolExpr::Not(Box::new(self.boolean(x))),
        }
    }

    fn cmd(&mut self, c: &Cmd, mutable: &BTreeSet<Ident>) -> Cmd {
        match c {
            Cmd::Skip => Cmd::Skip,
            Cmd::Assign { target, rhs, span } => Cmd::Assign {
                target: target.clone(),
                rhs: self.int(rhs),
                span: *span,
            },
            Cmd::Write {
                array,
                index,
                rhs,
                span,
            } => {
                let bump = self.m.kind == MutationKind::OffsetBump && !is_constant(index) && self.hit(*span);
                let index = self.int(index);
                Cmd::Write {
                    array: array.clone(),
                    index: if bump { index.plus_const(1) } else { index },
                    rhs: self.int(rhs),
                    span: *span,
                }
            }
            Cmd::Access { array, index, span } => {
                let bump = self.wants_index(index) && self.hit(*span);
                let index = self.int(index);
                Cmd::Access {
                    array: array.clone(),
                    index: if bump { index.plus_const(1) } else { index },
                    span: *span,
                }
            }
            Cmd::Seq(cs) => Cmd::seq(cs.iter().map(|c| self.cmd(c, mutable))),
            Cmd::If {
                guard,
                then_branch,
                else_branch,
                span,
            } => {
                if self.m.kind == MutationKind::GuardDrop && data_independent(guard, mutable) && self.hit(*span) {
                    return self.cmd(then_branch, mutable);
                }
                Cmd::If {
                    guard: self.boolean(guard),
                    then_branch: Box::new(self.cmd(then_branch, mutable)),
                    else_branch: Box::new(self.cmd(else_branch, mutable)),
                    span: *span,
                }
            }
            Cmd::For {
                iterator,
                lower,
                upper,
                body,
                span,
            } => {
                let widen = self.m.kind == MutationKind::BoundWiden && self.hit(*span);
                let lower = self.int(lower);
                let upper = self.int(upper);
                Cmd::For {
                    iterator: iterator.clone(),
                    lower,
                    upper: if widen { upper.plus_const(1) } else { upper },
                    body: Box::new(self.cmd(body, mutable)),
                    span: *span,
                }
            }
            Cmd::While { guard, body, span } => Cmd::While {
                guard: self.boolean(guard),
                body: Box::new(self.cmd(body, mutable)),
                span: *span,
            },
            opaque @ Cmd::Opaque { .. } => opaque.clone(),
        }
    }
}

/// Applies `m` at the first matching node in program order.
pub fn mutate(cmd: &Cmd, m: &Mutation) -> Result<Cmd, MutateError> {
    let mutable = mutable_vars(cmd);
    let mut mt = Mutator { m: *m, done: false };
    let out = mt.cmd(cmd, &mutable);
    if mt.done {
        Ok(out)
    } else {
        Err(MutateError::Inapplicable {
            kind: m.kind,
            site: m.site,
        })
    }
}
