//! Constraints on one size variable and sets of them.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::affine::Affine;
use crate::frontend::{Ident, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AtomOp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "==")]
    Eq,
}

impl AtomOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AtomOp::Le => "<=",
            AtomOp::Lt => "<",
            AtomOp::Ge => ">=",
            AtomOp::Gt => ">",
            AtomOp::Eq => "==",
        }
    }

    /// The complement over the integers; equality has none in this language.
    pub fn negate(self) -> Option<AtomOp> {
        Some(match self {
            AtomOp::Le => AtomOp::Gt,
            AtomOp::Lt => AtomOp::Ge,
            AtomOp::Ge => AtomOp::Lt,
            AtomOp::Gt => AtomOp::Le,
            AtomOp::Eq => return None,
        })
    }

    pub fn holds(self, s: i64, bound: i64) -> bool {
        match self {
            AtomOp::Le => s <= bound,
            AtomOp::Lt => s < bound,
            AtomOp::Ge => s >= bound,
            AtomOp::Gt => s > bound,
            AtomOp::Eq => s == bound,
        }
    }
}

/// `s op bound`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Atom {
    pub op: AtomOp,
    pub bound: Affine,
}

impl Atom {
    pub fn new(op: AtomOp, bound: Affine) -> Self {
        Atom { op, bound }
    }

    /// An atom no natural satisfies.
    pub fn unsatisfiable() -> Self {
        Atom::new(AtomOp::Lt, Affine::constant(0))
    }

    pub fn negate(&self) -> Option<Atom> {
        self.op.negate().map(|op| Atom::new(op, self.bound.clone()))
    }

    pub fn display<'a>(&'a self, size: &'a Ident) -> impl fmt::Display + 'a {
        DisplayAtom { atom: self, size }
    }
}

struct DisplayAtom<'a> {
    atom: &'a Atom,
    size: &'a Ident,
}

impl fmt::Display for DisplayAtom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.size, self.atom.op.symbol(), self.atom.bound)
    }
}

/// A conjunction of atoms. Atoms keep their first-insertion order for
/// printing; equality ignores order.
#[derive(Debug, Clone, Default, Eq, Serialize)]
#[serde(transparent)]
pub struct Constraint {
    atoms: Vec<Atom>,
}

impl PartialEq for Constraint {
    fn eq(&self, other: &Self) -> bool {
        self.atom_set() == other.atom_set()
    }
}

impl Constraint {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let mut c = Constraint::default();
        for a in atoms {
            c.push(a);
        }
        c
    }

    pub fn push(&mut self, atom: Atom) {
        if !self.atoms.contains(&atom) {
            self.atoms.push(atom);
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom_set(&self) -> BTreeSet<&Atom> {
        self.atoms.iter().collect()
    }

    /// Whether every atom holds at `s`. Panics on symbolic bounds.
    pub fn holds_at(&self, s: i64) -> bool {
        self.atoms.iter().all(|a| {
            let b = a.bound.as_constant().expect("instantiated bound");
            a.op.holds(s, b)
        })
    }

    pub fn instantiate(&self, value: impl Fn(&Ident) -> Option<i64> + Copy) -> Constraint {
        Constraint::new(
            self.atoms
                .iter()
                .map(|a| Atom::new(a.op, a.bound.instantiate(value))),
        )
    }

    pub fn display<'a>(&'a self, size: &'a Ident) -> impl fmt::Display + 'a {
        DisplayConstraint { c: self, size }
    }
}

struct DisplayConstraint<'a> {
    c: &'a Constraint,
    size: &'a Ident,
}

impl fmt::Display for DisplayConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c.atoms.is_empty() {
            return f.write_str("true");
        }
        for (k, a) in self.c.atoms.iter().enumerate() {
            if k > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{}", a.display(self.size))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub constraint: Constraint,
    /// Locations of the accesses that produced the constraint.
    pub provenance: Vec<Span>,
}

/// A set of constraints on `size`, kept in first-insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintSet {
    pub size: Ident,
    entries: Vec<Entry>,
}

impl ConstraintSet {
    pub fn new(size: Ident) -> Self {
        ConstraintSet {
            size,
            entries: Vec::new(),
        }
    }

    /// Adds a constraint, merging provenance with an equal one already present.
    pub fn insert(&mut self, constraint: Constraint, site: Span) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.constraint == constraint) {
            if !e.provenance.iter().any(|s| s.line == site.line && s.col == site.col) {
                e.provenance.push(site);
            }
            return;
        }
        self.entries.push(Entry {
            constraint,
            provenance: vec![site],
        });
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.entries.iter().map(|e| &e.constraint)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Set equality, ignoring order and provenance.
    pub fn same_constraints(&self, other: &ConstraintSet) -> bool {
        self.size == other.size
            && self.len() == other.len()
            && self.constraints().all(|c| other.constraints().any(|d| d == c))
    }

    pub fn instantiate(&self, value: impl Fn(&Ident) -> Option<i64> + Copy) -> ConstraintSet {
        let mut out = ConstraintSet::new(self.size.clone());
        for e in &self.entries {
            for site in &e.provenance {
                out.insert(e.constraint.instantiate(value), *site);
            }
        }
        out
    }
}

/// `k1 ; k2 ; ...`, or `none` for the empty set.
impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("none");
        }
        for (k, e) in self.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{}", e.constraint.display(&self.size))?;
        }
        Ok(())
    }
}
