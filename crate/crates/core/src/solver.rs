//! Satisfiability and model selection for size constraints over the naturals.

use std::fmt;

use serde::Serialize;

use crate::extract::{AtomOp, Constraint, ConstraintSet};
use crate::frontend::Ident;

/// A set of naturals `[low, high]`; `high = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "kind")]
pub enum NatInterval {
    Empty,
    Range { low: u64, high: Option<u64> },
}

impl NatInterval {
    pub const ALL: NatInterval = NatInterval::Range { low: 0, high: None };

    pub fn contains(&self, n: u64) -> bool {
        match self {
            NatInterval::Empty => false,
            NatInterval::Range { low, high } => n >= *low && high.is_none_or(|h| n <= h),
        }
    }

    pub fn intersect(&self, other: &NatInterval) -> NatInterval {
        match (self, other) {
            (
                NatInterval::Range { low: l1, high: h1 },
                NatInterval::Range { low: l2, high: h2 },
            ) => {
                let low = (*l1).max(*l2);
                let high = match (h1, h2) {
                    (Some(a), Some(b)) => Some((*a).min(*b)),
                    (a, b) => a.or(*b),
                };
                if high.is_some_and(|h| h < low) {
                    NatInterval::Empty
                } else {
                    NatInterval::Range { low, high }
                }
            }
            _ => NatInterval::Empty,
        }
    }

    pub fn low(&self) -> Option<u64> {
        match self {
            NatInterval::Empty => None,
            NatInterval::Range { low, .. } => Some(*low),
        }
    }
}

impl fmt::Display for NatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatInterval::Empty => f.write_str("empty"),
            NatInterval::Range { low, high: None } => write!(f, "[{low}, inf)"),
            NatInterval::Range {
                low,
                high: Some(h),
            } => write!(f, "[{low}, {h}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("constraint still mentions param {0}")]
    Symbolic(Ident),
}

/// The naturals satisfying every atom of `c`.
pub fn normalize(c: &Constraint) -> Result<NatInterval, SolveError> {
    let mut acc = NatInterval::ALL;
    for atom in c.atoms() {
        let v = match atom.bound.as_constant() {
            Some(v) => v,
            None => {
                let p = atom.bound.terms.keys().next().expect("symbolic bound").clone();
                return Err(SolveError::Symbolic(p));
            }
        };
        let half = half_line(atom.op, v);
        acc = acc.intersect(&half);
    }
    Ok(acc)
}

fn half_line(op: AtomOp, v: i64) -> NatInterval {
    let at_most = |h: i64| {
        if h < 0 {
            NatInterval::Empty
        } else {
            NatInterval::Range {
                low: 0,
                high: Some(h as u64),
            }
        }
    };
    let at_least = |l: i64| NatInterval::Range {
        low: l.max(0) as u64,
        high: None,
    };
    match op {
        AtomOp::Le => at_most(v),
        AtomOp::Lt => at_most(v.saturating_sub(1)),
        AtomOp::Ge => at_least(v),
        AtomOp::Gt => at_least(v.saturating_add(1)),
        AtomOp::Eq => at_most(v).intersect(&at_least(v)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "kind", content = "value")]
pub enum ModelChoice {
    Unsat,
    Model(u64),
}

/// The least natural satisfying `c`.
pub fn minimal_model(c: &Constraint) -> Result<ModelChoice, SolveError> {
    Ok(match normalize(c)?.low() {
        Some(n) => ModelChoice::Model(n),
        None => ModelChoice::Unsat,
    })
}

/// One entry per constraint, in set order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CtWitness {
    pub models: Vec<u64>,
    pub per_constraint: Vec<ModelChoice>,
}

/// Picks one model per satisfiable constraint, sharing models greedily.
///
/// Constraints are visited in set order. For the first one not yet
/// covered, the candidates are its least model and the least common model
/// with each other uncovered constraint it intersects. The candidate
/// satisfying the most uncovered constraints wins, ties going to the
/// smaller value, and every constraint it satisfies is assigned to it.
pub fn select_ct(cs: &ConstraintSet) -> Result<CtWitness, SolveError> {
    let intervals: Vec<NatInterval> = cs.constraints().map(normalize).collect::<Result<_, _>>()?;
    let mut choice: Vec<Option<ModelChoice>> = intervals
        .iter()
        .map(|i| (*i == NatInterval::Empty).then_some(ModelChoice::Unsat))
        .collect();
    let mut models: Vec<u64> = Vec::new();
    while let Some(k) = choice.iter().position(Option::is_none) {
        let own = intervals[k].low().expect("satisfiable");
        let mut candidates = vec![own];
        for (j, iv) in intervals.iter().enumerate() {
            if j != k && choice[j].is_none() {
                if let Some(low) = intervals[k].intersect(iv).low() {
                    candidates.push(low);
                }
            }
        }
        let covers = |n: u64| {
            intervals
                .iter()
                .zip(&choice)
                .filter(|(iv, c)| c.is_none() && iv.contains(n))
                .count()
        };
        let best = candidates
            .into_iter()
            .max_by(|a, b| covers(*a).cmp(&covers(*b)).then(b.cmp(a)))
            .expect("own model is a candidate");
        for (iv, c) in intervals.iter().zip(choice.iter_mut()) {
            if c.is_none() && iv.contains(best) {
                *c = Some(ModelChoice::Model(best));
            }
        }
        if !models.contains(&best) {
            models.push(best);
        }
    }
    models.sort_unstable();
    Ok(CtWitness {
        models,
        per_constraint: choice.into_iter().map(|c| c.expect("assigned")).collect(),
    })
}
