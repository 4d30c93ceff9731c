//! Slot-resolved form of a param-free command, shared by both checkers.

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::{print_bool, print_int, BinOp, BoolExpr, Cmd, CmpOp, Ident, IntExpr, SafetySpec, Span};

use super::{ExecError, SizeAssignment};

pub(crate) type Slot = usize;

#[derive(Debug, Clone)]
pub(crate) enum Ex {
    Lit(i64),
    Var(Slot),
    Read {
        array: usize,
        index: Box<Ex>,
        site: usize,
    },
    Bin(BinOp, Box<Ex>, Box<Ex>),
}

#[derive(Debug, Clone)]
pub(crate) enum Bx {
    Lit(bool),
    Cmp(CmpOp, Ex, Ex),
    And(Box<Bx>, Box<Bx>),
    Or(Box<Bx>, Box<Bx>),
    Not(Box<Bx>),
}

#[derive(Debug, Clone)]
pub(crate) enum St {
    Skip,
    Assign {
        slot: Slot,
        rhs: Ex,
        site: usize,
    },
    Write {
        array: usize,
        index: Ex,
        rhs: Ex,
        site: usize,
    },
    Access {
        array: usize,
        index: Ex,
        site: usize,
    },
    Seq(Vec<St>),
    If {
        guard: Bx,
        then_branch: Box<St>,
        else_branch: Box<St>,
        site: usize,
    },
    For {
        slot: Slot,
        lower: Ex,
        upper: Ex,
        body: Box<St>,
        site: usize,
    },
    While {
        guard: Bx,
        body: Box<St>,
        site: usize,
    },
    Opaque {
        writes: Vec<Slot>,
        site: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Site {
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub body: St,
    pub slot_names: Vec<Ident>,
    /// `(array, size variable, length)` in layout order.
    pub arrays: Vec<(Ident, Ident, usize)>,
    /// Slots preloaded with the array sizes.
    pub size_slots: Vec<(Slot, i64)>,
    pub sites: Vec<Site>,
}

impl Compiled {
    pub fn total_cells(&self) -> u64 {
        self.arrays.iter().map(|(_, _, n)| *n as u64).sum()
    }
}

struct Builder<'a> {
    spec: &'a SafetySpec,
    slots: BTreeMap<Ident, Slot>,
    slot_names: Vec<Ident>,
    sites: Vec<Site>,
}

pub(crate) fn compile(
    cmd: &Cmd,
    spec: &SafetySpec,
    sizes: &SizeAssignment,
) -> Result<Compiled, ExecError> {
    let mut b = Builder {
        spec,
        slots: BTreeMap::new(),
        slot_names: Vec::new(),
        sites: Vec::new(),
    };
    let mut arrays = Vec::new();
    let mut size_slots = Vec::new();
    for (a, s) in &spec.arrays {
        let n = *sizes
            .get(s)
            .ok_or_else(|| ExecError::MissingSize(s.clone()))?;
        let len = usize::try_from(n).map_err(|_| ExecError::SizeTooLarge(s.clone()))?;
        arrays.push((a.clone(), s.clone(), len));
        let slot = b.slot(s);
        size_slots.push((slot, i64::try_from(n).map_err(|_| ExecError::SizeTooLarge(s.clone()))?));
    }
    let body = b.cmd(cmd)?;
    Ok(Compiled {
        body,
        slot_names: b.slot_names,
        arrays,
        size_slots,
        sites: b.sites,
    })
}

impl Builder<'_> {
    fn slot(&mut self, name: &Ident) -> Slot {
        if let Some(s) = self.slots.get(name) {
            return *s;
        }
        let s = self.slot_names.len();
        self.slot_names.push(name.clone());
        self.slots.insert(name.clone(), s);
        s
    }

    fn site(&mut self, span: Span, text: String) -> usize {
        self.sites.push(Site { span, text });
        self.sites.len() - 1
    }

    fn array(&self, name: &Ident) -> Result<usize, ExecError> {
        self.spec
            .arrays
            .iter()
            .position(|(a, _)| a == name)
            .ok_or_else(|| ExecError::UnknownArray(name.clone()))
    }

    fn int(&mut self, e: &IntExpr) -> Result<Ex, ExecError> {
        Ok(match e {
            IntExpr::Lit(v) => Ex::Lit(*v),
            IntExpr::Var(v) => Ex::Var(self.slot(v)),
            IntExpr::Param(p) => return Err(ExecError::UnboundParam(p.clone())),
            IntExpr::Read { array, index, span } => {
                let site = self.site(*span, format!("{array}[{}]", print_int(index)));
                Ex::Read {
                    array: self.array(array)?,
                    index: Box::new(self.int(index)?),
                    site,
                }
            }
            IntExpr::Bin(op, l, r) => Ex::Bin(*op, Box::new(self.int(l)?), Box::new(self.int(r)?)),
        })
    }

    fn boolean(&mut self, b: &BoolExpr) -> Result<Bx, ExecError> {
        Ok(match b {
            BoolExpr::Lit(v) => Bx::Lit(*v),
            BoolExpr::Cmp(op, l, r) => Bx::Cmp(*op, self.int(l)?, self.int(r)?),
            BoolExpr::And(l, r) => Bx::And(Box::new(self.boolean(l)?), Box::new(self.boolean(r)?)),
            BoolExpr::Or(l, r) => Bx::Or(Box::new(self.boolean(l)?), Box::new(self.boolean(r)?)),
            BoolExpr::Not(x) => Bx::Not(Box::new(self.boolean(x)?)),
        })
    }

    fn cmd(&mut self, c: &Cmd) -> Result<St, ExecError> {
        Ok(match c {
            Cmd::Skip => St::Skip,
            Cmd::Assign { target, rhs, span } => {
                let site = self.site(*span, format!("{target} := {}", print_int(rhs)));
                St::Assign {
                    slot: self.slot(target),
                    rhs: self.int(rhs)?,
                    site,
                }
            }
            Cmd::Write {
                array,
                index,
                rhs,
                span,
            } => {
                let site = self.site(
                    *span,
                    format!("{array}[{}] := {}", print_int(index), print_int(rhs)),
                );
                St::Write {
                    array: self.array(array)?,
                    index: self.int(index)?,
                    rhs: self.int(rhs)?,
                    site,
                }
            }
            Cmd::Access { array, index, span } => {
                let site = self.site(*span, format!("{array}[{}]", print_int(index)));
                St::Access {
                    array: self.array(array)?,
                    index: self.int(index)?,
                    site,
                }
            }
            Cmd::Seq(cs) => St::Seq(cs.iter().map(|c| self.cmd(c)).collect::<Result<_, _>>()?),
            Cmd::If {
                guard,
                then_branch,
                else_branch,
                span,
            } => {
                let site = self.site(*span, format!("if {}", print_bool(guard)));
                St::If {
                    guard: self.boolean(guard)?,
                    then_branch: Box::new(self.cmd(then_branch)?),
                    else_branch: Box::new(self.cmd(else_branch)?),
                    site,
                }
            }
            Cmd::For {
                iterator,
                lower,
                upper,
                body,
                span,
            } => {
                let site = self.site(
                    *span,
                    format!("for {iterator} in [{} : {}]", print_int(lower), print_int(upper)),
                );
                St::For {
                    slot: self.slot(iterator),
                    lower: self.int(lower)?,
                    upper: self.int(upper)?,
                    body: Box::new(self.cmd(body)?),
                    site,
                }
            }
            Cmd::While { guard, body, span } => {
                let site = self.site(*span, format!("while {}", print_bool(guard)));
                St::While {
                    guard: self.boolean(guard)?,
                    body: Box::new(self.cmd(body)?),
                    site,
                }
            }
            Cmd::Opaque {
                label, writes, span, ..
            } => {
                let site = self.site(*span, format!("opaque {label}"));
                let writes: BTreeSet<Slot> = writes.iter().map(|w| self.slot(w)).collect();
                St::Opaque {
                    writes: writes.into_iter().collect(),
                    site,
                }
            }
        })
    }
}

pub(crate) fn arith(op: BinOp, l: i64, r: i64) -> Option<i64> {
    match op {
        BinOp::Add => l.checked_add(r),
        BinOp::Sub => l.checked_sub(r),
        BinOp::Mul => l.checked_mul(r),
    }
}
