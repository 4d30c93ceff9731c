//! Abstract syntax for the array language and its layout annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::Serialize;

/// Words that can never be used as identifiers.
pub const RESERVED: &[&str] = &[
    "skip", "if", "then", "else", "while", "for", "do", "in", "opaque", "requires", "ensures",
    "param", "true", "false",
];

/// A validated identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Ident(String);

impl Ident {
    /// Builds an identifier, checking the token shape and the reserved-word list.
    pub fn new(name: impl Into<String>) -> Result<Self, IdentError> {
        let name = name.into();
        let mut chars = name.chars();
        let shape_ok = match chars.next() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
            }
            _ => false,
        };
        if !shape_ok {
            return Err(IdentError::Malformed(name));
        }
        if RESERVED.contains(&name.as_str()) {
            return Err(IdentError::Reserved(name));
        }
        Ok(Ident(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentError {
    #[error("malformed identifier `{0}`")]
    Malformed(String),
    #[error("`{0}` is a reserved word")]
    Reserved(String),
}

/// Source position of a construct.
///
/// Locations never take part in AST equality or hashing, so a reparsed
/// program compares equal to the tree it was printed from.
#[derive(Debug, Clone, Copy, Default, Eq, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IntExpr {
    Lit(i64),
    Var(Ident),
    Param(Ident),
    Read {
        array: Ident,
        index: Box<IntExpr>,
        span: Span,
    },
    Bin(BinOp, Box<IntExpr>, Box<IntExpr>),
}

impl IntExpr {
    pub fn var(name: &str) -> Self {
        IntExpr::Var(Ident::new(name).expect("valid identifier"))
    }

    pub fn param(name: &str) -> Self {
        IntExpr::Param(Ident::new(name).expect("valid identifier"))
    }

    pub fn read(array: &Ident, index: IntExpr) -> Self {
        IntExpr::Read {
            array: array.clone(),
            index: Box::new(index),
            span: Span::default(),
        }
    }

    pub fn bin(op: BinOp, left: IntExpr, right: IntExpr) -> Self {
        IntExpr::Bin(op, Box::new(left), Box::new(right))
    }

    /// `self + k`, folding into an existing literal summand where possible.
    pub fn plus_const(self, k: i64) -> Self {
        match self {
            IntExpr::Lit(v) => IntExpr::Lit(v + k),
            IntExpr::Bin(BinOp::Add, l, r) if matches!(*r, IntExpr::Lit(_)) => {
                let IntExpr::Lit(v) = *r else { unreachable!() };
                let v = v + k;
                if v == 0 {
                    *l
                } else if v < 0 {
                    IntExpr::bin(BinOp::Sub, *l, IntExpr::Lit(-v))
                } else {
                    IntExpr::bin(BinOp::Add, *l, IntExpr::Lit(v))
                }
            }
            IntExpr::Bin(BinOp::Sub, l, r) if matches!(*r, IntExpr::Lit(_)) => {
                let IntExpr::Lit(v) = *r else { unreachable!() };
                let v = v - k;
                if v == 0 {
                    *l
                } else if v < 0 {
                    IntExpr::bin(BinOp::Add, *l, IntExpr::Lit(-v))
                } else {
                    IntExpr::bin(BinOp::Sub, *l, IntExpr::Lit(v))
                }
            }
            e if k >= 0 => IntExpr::bin(BinOp::Add, e, IntExpr::Lit(k)),
            e => IntExpr::bin(BinOp::Sub, e, IntExpr::Lit(-k)),
        }
    }

    /// Visits every array read in evaluation order (inner reads of an index
    /// come before the read that uses them).
    pub fn for_each_read<'a>(&'a self, f: &mut impl FnMut(&'a Ident, &'a IntExpr, Span)) {
        match self {
            IntExpr::Lit(_) | IntExpr::Var(_) | IntExpr::Param(_) => {}
            IntExpr::Read { array, index, span } => {
                index.for_each_read(f);
                f(array, index, *span);
            }
            IntExpr::Bin(_, l, r) => {
                l.for_each_read(f);
                r.for_each_read(f);
            }
        }
    }

    pub fn has_read(&self) -> bool {
        let mut found = false;
        self.for_each_read(&mut |_, _, _| found = true);
        found
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Ident>) {
        match self {
            IntExpr::Lit(_) | IntExpr::Param(_) => {}
            IntExpr::Var(v) => {
                out.insert(v.clone());
            }
            IntExpr::Read { index, .. } => index.collect_vars(out),
            IntExpr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn collect_params(&self, out: &mut BTreeSet<Ident>) {
        match self {
            IntExpr::Lit(_) | IntExpr::Var(_) => {}
            IntExpr::Param(p) => {
                out.insert(p.clone());
            }
            IntExpr::Read { index, .. } => index.collect_params(out),
            IntExpr::Bin(_, l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
        }
    }

    pub fn collect_arrays(&self, out: &mut BTreeSet<Ident>) {
        self.for_each_read(&mut |a, _, _| {
            out.insert(a.clone());
        });
    }

    pub(crate) fn map_leaves(&self, f: &mut impl FnMut(&IntExpr) -> Option<IntExpr>) -> IntExpr {
        if let Some(e) = f(self) {
            return e;
        }
        match self {
            IntExpr::Read { array, index, span } => IntExpr::Read {
                array: array.clone(),
                index: Box::new(index.map_leaves(f)),
                span: *span,
            },
            IntExpr::Bin(op, l, r) => IntExpr::bin(*op, l.map_leaves(f), r.map_leaves(f)),
            leaf => leaf.clone(),
        }
    }

    fn node_count(&self) -> usize {
        match self {
            IntExpr::Read { index, .. } => 1 + index.node_count(),
            IntExpr::Bin(_, l, r) => 1 + l.node_count() + r.node_count(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    /// The operator obtained by swapping the operands.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn holds(self, l: i64, r: i64) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Lit(bool),
    Cmp(CmpOp, IntExpr, IntExpr),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
}

impl BoolExpr {
    pub fn cmp(op: CmpOp, l: IntExpr, r: IntExpr) -> Self {
        BoolExpr::Cmp(op, l, r)
    }

    pub fn for_each_int<'a>(&'a self, f: &mut impl FnMut(&'a IntExpr)) {
        match self {
            BoolExpr::Lit(_) => {}
            BoolExpr::Cmp(_, l, r) => {
                f(l);
                f(r);
            }
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                l.for_each_int(f);
                r.for_each_int(f);
            }
            BoolExpr::Not(b) => b.for_each_int(f),
        }
    }

    pub fn for_each_read<'a>(&'a self, f: &mut impl FnMut(&'a Ident, &'a IntExpr, Span)) {
        self.for_each_int(&mut |e| e.for_each_read(f));
    }

    pub fn has_read(&self) -> bool {
        let mut found = false;
        self.for_each_read(&mut |_, _, _| found = true);
        found
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Ident>) {
        self.for_each_int(&mut |e| e.collect_vars(out));
    }

    pub fn collect_params(&self, out: &mut BTreeSet<Ident>) {
        self.for_each_int(&mut |e| e.collect_params(out));
    }

    pub(crate) fn map_ints(&self, f: &mut impl FnMut(&IntExpr) -> IntExpr) -> BoolExpr {
        match self {
            BoolExpr::Lit(b) => BoolExpr::Lit(*b),
            BoolExpr::Cmp(op, l, r) => BoolExpr::Cmp(*op, f(l), f(r)),
            BoolExpr::And(l, r) => BoolExpr::And(Box::new(l.map_ints(f)), Box::new(r.map_ints(f))),
            BoolExpr::Or(l, r) => BoolExpr::Or(Box::new(l.map_ints(f)), Box::new(r.map_ints(f))),
            BoolExpr::Not(b) => BoolExpr::Not(Box::new(b.map_ints(f))),
        }
    }

    fn node_count(&self) -> usize {
        match self {
            BoolExpr::Lit(_) => 1,
            BoolExpr::Cmp(_, l, r) => 1 + l.node_count() + r.node_count(),
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => 1 + l.node_count() + r.node_count(),
            BoolExpr::Not(b) => 1 + b.node_count(),
        }
    }
}

/// Commands. Sequences are kept flat: build them with [`Cmd::seq`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cmd {
    Skip,
    Assign {
        target: Ident,
        rhs: IntExpr,
        span: Span,
    },
    Write {
        array: Ident,
        index: IntExpr,
        rhs: IntExpr,
        span: Span,
    },
    /// A bare array read whose value is discarded; it can still fault.
    Access {
        array: Ident,
        index: IntExpr,
        span: Span,
    },
    Seq(Vec<Cmd>),
    If {
        guard: BoolExpr,
        then_branch: Box<Cmd>,
        else_branch: Box<Cmd>,
        span: Span,
    },
    For {
        iterator: Ident,
        lower: IntExpr,
        upper: IntExpr,
        body: Box<Cmd>,
        span: Span,
    },
    While {
        guard: BoolExpr,
        body: Box<Cmd>,
        span: Span,
    },
    Opaque {
        label: Ident,
        reads: BTreeSet<Ident>,
        writes: BTreeSet<Ident>,
        frames: BTreeSet<Ident>,
        span: Span,
    },
}

impl Cmd {
    /// Sequential composition: flattens nested sequences and drops `skip`.
    pub fn seq(cmds: impl IntoIterator<Item = Cmd>) -> Cmd {
        let mut flat = Vec::new();
        for c in cmds {
            match c {
                Cmd::Skip => {}
                Cmd::Seq(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Cmd::Skip,
            1 => flat.pop().unwrap(),
            _ => Cmd::Seq(flat),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Cmd::Skip => Span::default(),
            Cmd::Seq(cs) => cs.first().map(Cmd::span).unwrap_or_default(),
            Cmd::Assign { span, .. }
            | Cmd::Write { span, .. }
            | Cmd::Access { span, .. }
            | Cmd::If { span, .. }
            | Cmd::For { span, .. }
            | Cmd::While { span, .. }
            | Cmd::Opaque { span, .. } => *span,
        }
    }

    /// Statements in program order (a sequence yields its members).
    pub fn stmts(&self) -> &[Cmd] {
        match self {
            Cmd::Seq(cs) => cs,
            Cmd::Skip => &[],
            other => std::slice::from_ref(other),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Cmd::Skip => 1,
            Cmd::Assign { rhs, .. } => 1 + rhs.node_count(),
            Cmd::Write { index, rhs, .. } => 1 + index.node_count() + rhs.node_count(),
            Cmd::Access { index, .. } => 1 + index.node_count(),
            Cmd::Seq(cs) => cs.iter().map(Cmd::node_count).sum::<usize>(),
            Cmd::If {
                guard,
                then_branch,
                else_branch,
                ..
            } => 1 + guard.node_count() + then_branch.node_count() + else_branch.node_count(),
            Cmd::For {
                lower, upper, body, ..
            } => 1 + lower.node_count() + upper.node_count() + body.node_count(),
            Cmd::While { guard, body, .. } => 1 + guard.node_count() + body.node_count(),
            Cmd::Opaque { .. } => 1,
        }
    }

    /// Pre-order walk over every command node.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Cmd)) {
        f(self);
        match self {
            Cmd::Seq(cs) => cs.iter().for_each(|c| c.walk(f)),
            Cmd::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.walk(f);
                else_branch.walk(f);
            }
            Cmd::For { body, .. } | Cmd::While { body, .. } => body.walk(f),
            _ => {}
        }
    }

    /// Every integer expression directly owned by a command node, in
    /// evaluation order, across the whole tree.
    pub fn for_each_int<'a>(&'a self, f: &mut impl FnMut(&'a IntExpr)) {
        self.walk(&mut |c| match c {
            Cmd::Assign { rhs, .. } => f(rhs),
            Cmd::Write { index, rhs, .. } => {
                f(index);
                f(rhs);
            }
            Cmd::Access { index, .. } => f(index),
            Cmd::If { guard, .. } | Cmd::While { guard, .. } => guard.for_each_int(f),
            Cmd::For { lower, upper, .. } => {
                f(lower);
                f(upper);
            }
            _ => {}
        });
    }

    pub fn collect_params(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.for_each_int(&mut |e| e.collect_params(&mut out));
        out
    }

    /// Arrays touched anywhere (reads, writes, bare accesses).
    pub fn arrays_touched(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.for_each_int(&mut |e| e.collect_arrays(&mut out));
        self.walk(&mut |c| {
            if let Cmd::Write { array, .. } | Cmd::Access { array, .. } = c {
                out.insert(array.clone());
            }
        });
        out
    }

    /// Every scalar variable mentioned (read or assigned, including iterators).
    pub fn mentioned_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.for_each_int(&mut |e| e.collect_vars(&mut out));
        self.walk(&mut |c| match c {
            Cmd::Assign { target, .. } => {
                out.insert(target.clone());
            }
            Cmd::For { iterator, .. } => {
                out.insert(iterator.clone());
            }
            Cmd::Opaque { reads, writes, .. } => {
                out.extend(reads.iter().cloned());
                out.extend(writes.iter().cloned());
            }
            _ => {}
        });
        out
    }

    pub fn frames_used(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.walk(&mut |c| {
            if let Cmd::Opaque { frames, .. } = c {
                out.extend(frames.iter().cloned());
            }
        });
        out
    }
}

/// The `array(a, s) * ... * F` layout assertion used as pre- and postcondition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct SafetySpec {
    pub arrays: Vec<(Ident, Ident)>,
    pub frames: BTreeSet<Ident>,
}

impl SafetySpec {
    pub fn size_of(&self, array: &Ident) -> Option<&Ident> {
        self.arrays.iter().find(|(a, _)| a == array).map(|(_, s)| s)
    }

    pub fn array_of(&self, size: &Ident) -> Option<&Ident> {
        self.arrays.iter().find(|(_, s)| s == size).map(|(a, _)| a)
    }

    pub fn is_array(&self, name: &Ident) -> bool {
        self.arrays.iter().any(|(a, _)| a == name)
    }

    pub fn is_size(&self, name: &Ident) -> bool {
        self.arrays.iter().any(|(_, s)| s == name)
    }

    pub fn size_vars(&self) -> impl Iterator<Item = &Ident> {
        self.arrays.iter().map(|(_, s)| s)
    }
}

/// A parsed source file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub params: Vec<Ident>,
    pub spec: SafetySpec,
    pub body: Cmd,
}

impl Program {
    pub fn declared_params(&self) -> BTreeSet<Ident> {
        self.params.iter().cloned().collect()
    }
}

/// Values for the symbolic parameters of a program. All values are naturals.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct ParamBinding(BTreeMap<Ident, u64>);

impl ParamBinding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a value, rejecting negatives.
    pub fn set(&mut self, name: Ident, value: i64) -> Result<(), super::BindError> {
        if value < 0 {
            return Err(super::BindError::Negative { name, value });
        }
        self.0.insert(name, value as u64);
        Ok(())
    }

    pub fn with(mut self, name: &str, value: u64) -> Self {
        self.0.insert(Ident::new(name).expect("valid identifier"), value);
        self
    }

    pub fn get(&self, name: &Ident) -> Option<u64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ident, u64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(Ident, u64)> for ParamBinding {
    fn from_iter<T: IntoIterator<Item = (Ident, u64)>>(iter: T) -> Self {
        ParamBinding(iter.into_iter().collect())
    }
}
