//! Affine forms over params, and linear forms over size, iterator, and params.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::Serialize;

use crate::frontend::{BinOp, Ident, IntExpr};

/// `constant + Σ coeff·param`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Affine {
    pub constant: i64,
    pub terms: BTreeMap<Ident, i64>,
}

impl Affine {
    pub fn constant(v: i64) -> Self {
        Affine {
            constant: v,
            terms: BTreeMap::new(),
        }
    }

    pub fn param(name: Ident) -> Self {
        Affine {
            constant: 0,
            terms: BTreeMap::from([(name, 1)]),
        }
    }

    /// The value when no params remain.
    pub fn as_constant(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.constant)
    }

    pub fn scale(&self, k: i64) -> Affine {
        let mut out = Affine::constant(self.constant * k);
        for (p, c) in &self.terms {
            if c * k != 0 {
                out.terms.insert(p.clone(), c * k);
            }
        }
        out
    }

    /// Substitutes known params.
    pub fn instantiate(&self, value: impl Fn(&Ident) -> Option<i64>) -> Affine {
        let mut out = Affine::constant(self.constant);
        for (p, c) in &self.terms {
            match value(p) {
                Some(v) => out.constant += c * v,
                None => {
                    out.terms.insert(p.clone(), *c);
                }
            }
        }
        out
    }
}

impl Add for &Affine {
    type Output = Affine;

    fn add(self, rhs: &Affine) -> Affine {
        let mut out = self.clone();
        out.constant += rhs.constant;
        for (p, c) in &rhs.terms {
            let e = out.terms.entry(p.clone()).or_insert(0);
            *e += c;
            if *e == 0 {
                out.terms.remove(p);
            }
        }
        out
    }
}

impl Neg for &Affine {
    type Output = Affine;

    fn neg(self) -> Affine {
        self.scale(-1)
    }
}

impl Sub for &Affine {
    type Output = Affine;

    fn sub(self, rhs: &Affine) -> Affine {
        self + &(-rhs)
    }
}

/// Params in alphabetical order, then the constant: `L+R`, `2*B-1`, `-Y`.
impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (p, c) in &self.terms {
            let sign = if *c < 0 { "-" } else if first { "" } else { "+" };
            let mag = c.unsigned_abs();
            if mag == 1 {
                write!(f, "{sign}{p}")?;
            } else {
                write!(f, "{sign}{mag}*{p}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > 0 {
            write!(f, "+{}", self.constant)
        } else if self.constant < 0 {
            write!(f, "{}", self.constant)
        } else {
            Ok(())
        }
    }
}

impl Serialize for Affine {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `size·s + iter·i + rest`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Lin {
    pub size: i64,
    pub iter: i64,
    pub rest: Affine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum NotLinear {
    Var(Ident),
    Read,
    Product,
    Overflow,
}

impl Lin {
    pub fn is_constant(&self) -> bool {
        self.size == 0 && self.iter == 0
    }

    fn scale(&self, k: i64) -> Option<Lin> {
        Some(Lin {
            size: self.size.checked_mul(k)?,
            iter: self.iter.checked_mul(k)?,
            rest: self.rest.scale(k),
        })
    }

    pub fn sub(&self, rhs: &Lin) -> Lin {
        Lin {
            size: self.size - rhs.size,
            iter: self.iter - rhs.iter,
            rest: &self.rest - &rhs.rest,
        }
    }
}

/// Linearizes `e` in the size variable, an optional iterator, and params.
pub(crate) fn linearize(e: &IntExpr, size: &Ident, iter: Option<&Ident>) -> Result<Lin, NotLinear> {
    Ok(match e {
        IntExpr::Lit(v) => Lin {
            rest: Affine::constant(*v),
            ..Lin::default()
        },
        IntExpr::Param(p) => Lin {
            rest: Affine::param(p.clone()),
            ..Lin::default()
        },
        IntExpr::Var(v) if v == size => Lin {
            size: 1,
            ..Lin::default()
        },
        IntExpr::Var(v) if Some(v) == iter => Lin {
            iter: 1,
            ..Lin::default()
        },
        IntExpr::Var(v) => return Err(NotLinear::Var(v.clone())),
        IntExpr::Read { .. } => return Err(NotLinear::Read),
        IntExpr::Bin(op, l, r) => {
            let l = linearize(l, size, iter)?;
            let r = linearize(r, size, iter)?;
            match op {
                BinOp::Add => Lin {
                    size: l.size + r.size,
                    iter: l.iter + r.iter,
                    rest: &l.rest + &r.rest,
                },
                BinOp::Sub => l.sub(&r),
                BinOp::Mul => {
                    let k = match (l.is_constant(), r.is_constant()) {
                        (true, _) if l.rest.as_constant().is_some() => (l.rest.constant, r),
                        (_, true) if r.rest.as_constant().is_some() => (r.rest.constant, l),
                        _ => return Err(NotLinear::Product),
                    };
                    k.1.scale(k.0).ok_or(NotLinear::Overflow)?
                }
            }
        }
    })
}
