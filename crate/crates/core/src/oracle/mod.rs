//! Independent ground truth for the CT machinery.
//!
//! Everything here is built on the semantics module alone: per-size safety
//! tables, consistency checks against checker verdicts, mutation operators,
//! and a generator of programs in the supported fragment.

mod explore;
mod generate;
mod mutate;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checker::Verdict;
use crate::frontend::{bind_program, BindError, Ident, ParamBinding, Program};
use crate::semantics::{
    check_size_exhaustive, run_concrete, CheckError, ExhaustiveOptions, Fault, SizeAssignment, SizeVerdict, Store,
};

use explore::{explore, Explored};
pub use generate::{generate, DEFAULT_SIZE_BUDGET};
pub use mutate::{mutate, mutation_sites, MutateError, Mutation, MutationKind};

pub const DEFAULT_MAX_SIZE: u64 = 25;
/// Steps per concrete run; runs beyond this are decided by exploration.
pub const ORACLE_STEP_BUDGET: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOptions {
    /// Rows cover sizes `0..=max_size`.
    pub max_size: u64,
    pub domain: Vec<i64>,
    /// Other size variables range over `0..=other_max`.
    pub other_max: u64,
    /// Paths enumerated per size before switching to merged-state exploration.
    pub path_budget: u64,
    pub state_cap: usize,
    /// Random valuations tried to confirm a fault found by exploration.
    pub witness_tries: u32,
    pub step_budget: u64,
}

impl OracleOptions {
    pub fn new(max_size: u64) -> Self {
        OracleOptions {
            max_size,
            domain: vec![0, 1],
            other_max: max_size,
            path_budget: 1 << 11,
            state_cap: 200_000,
            witness_tries: 512,
            step_budget: ORACLE_STEP_BUDGET,
        }
    }
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions::new(DEFAULT_MAX_SIZE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Method {
    /// Every valuation over the domain was run.
    Exhaustive,
    /// Merged-state exploration proved every access in bounds.
    Explored,
    /// A valuation found by targeted or random search exhibited the fault.
    SearchedWitness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "status")]
pub enum RowStatus {
    Safe,
    Unsafe { sizes: SizeAssignment, fault: Fault },
    Inconclusive { sizes: SizeAssignment, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Row {
    #[serde(flatten)]
    pub status: RowStatus,
    pub method: Method,
}

impl Row {
    pub fn is_safe(&self) -> bool {
        matches!(self.status, RowStatus::Safe)
    }

    pub fn is_unsafe(&self) -> bool {
        matches!(self.status, RowStatus::Unsafe { .. })
    }

    fn kind(&self) -> u8 {
        match self.status {
            RowStatus::Safe => 0,
            RowStatus::Unsafe { .. } => 1,
            RowStatus::Inconclusive { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SafetyTable {
    pub size: Ident,
    pub max_size: u64,
    pub backend: String,
    pub rows: BTreeMap<u64, Row>,
}

impl SafetyTable {
    pub fn unsafe_sizes(&self) -> Vec<u64> {
        self.rows.iter().filter(|(_, r)| r.is_unsafe()).map(|(k, _)| *k).collect()
    }

    pub fn inconclusive_sizes(&self) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|(_, r)| matches!(r.status, RowStatus::Inconclusive { .. }))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn all_safe(&self) -> bool {
        self.rows.values().all(Row::is_safe)
    }

    /// Sizes whose safe/unsafe/inconclusive status differs between the tables.
    pub fn disagreements(&self, other: &SafetyTable) -> Vec<u64> {
        self.rows
            .iter()
            .filter(|(k, r)| other.rows.get(k).is_none_or(|o| o.kind() != r.kind()))
            .map(|(k, _)| *k)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("`{0}` is not a size variable")]
    NotASize(Ident),
}

/// Per-size safety of `program` under `binding` for sizes `0..=opts.max_size` of `size`.
///
/// Each size is first enumerated exhaustively. When that exceeds the path
/// budget, merged-state exploration decides it; a possible fault found that
/// way counts only once a concrete valuation reproduces it.
pub fn brute_validate(
    program: &Program,
    binding: &ParamBinding,
    size: &Ident,
    opts: &OracleOptions,
) -> Result<SafetyTable, OracleError> {
    if !program.spec.is_size(size) {
        return Err(OracleError::NotASize(size.clone()));
    }
    let bound = bind_program(program, binding)?;
    if opts.domain.is_empty() {
        return Err(CheckError::EmptyDomain.into());
    }
    let others: Vec<&Ident> = bound.spec.size_vars().filter(|s| *s != size).collect();
    let rows: Result<Vec<(u64, Row)>, CheckError> = (0..=opts.max_size)
        .into_par_iter()
        .map(|k| {
            let mut assignments = vec![SizeAssignment::from([(size.clone(), k)])];
            for o in &others {
                assignments = assignments
                    .into_iter()
                    .flat_map(|a| {
                        (0..=opts.other_max).map(move |v| {
                            let mut a = a.clone();
                            a.insert((*o).clone(), v);
                            a
                        })
                    })
                    .collect();
            }
            let mut worst: Option<Row> = None;
            for sizes in &assignments {
                let row = row_at(&bound, sizes, opts)?;
                if row.is_unsafe() {
                    return Ok((k, row));
                }
                worst = Some(match worst {
                    Some(w) if w.kind() == 2 || (row.kind() == 0 && w.method >= row.method) => w,
                    _ => row,
                });
            }
            Ok((k, worst.expect("at least one assignment")))
        })
        .collect();
    Ok(SafetyTable {
        size: size.clone(),
        max_size: opts.max_size,
        backend: format!("exhaustive over {:?}, merged-state exploration beyond {} paths", opts.domain, opts.path_budget),
        rows: rows?.into_iter().collect(),
    })
}

fn row_at(program: &Program, sizes: &SizeAssignment, opts: &OracleOptions) -> Result<Row, CheckError> {
    let ex = ExhaustiveOptions {
        domain: opts.domain.clone(),
        step_budget: opts.step_budget,
        path_budget: Some(opts.path_budget),
    };
    match check_size_exhaustive(&program.body, &program.spec, sizes, &ex)? {
        SizeVerdict::Safe { .. } => {
            return Ok(Row {
                status: RowStatus::Safe,
                method: Method::Exhaustive,
            })
        }
        SizeVerdict::Bug { sizes, trace } => {
            return Ok(Row {
                status: RowStatus::Unsafe {
                    sizes,
                    fault: trace.fault().expect("bug traces fault").clone(),
                },
                method: Method::Exhaustive,
            })
        }
        SizeVerdict::Inconclusive { .. } => {}
    }
    let inconclusive = |reason: String| Row {
        status: RowStatus::Inconclusive {
            sizes: sizes.clone(),
            reason,
        },
        method: Method::Explored,
    };
    Ok(match explore(&program.body, &program.spec, sizes, opts.state_cap)? {
        Explored::Safe { .. } => Row {
            status: RowStatus::Safe,
            method: Method::Explored,
        },
        Explored::GaveUp(reason) => inconclusive(reason),
        Explored::MaybeFault { access } => match search_witness(program, sizes, opts)? {
            Some(fault) => Row {
                status: RowStatus::Unsafe {
                    sizes: sizes.clone(),
                    fault,
                },
                method: Method::SearchedWitness,
            },
            None => inconclusive(format!(
                "possible fault at `{access}` not reproduced by {} random valuations",
                opts.witness_tries
            )),
        },
    })
}

fn search_witness(program: &Program, sizes: &SizeAssignment, opts: &OracleOptions) -> Result<Option<Fault>, CheckError> {
    let seed = sizes.values().fold(0x5eed_u64, |h, v| h.wrapping_mul(31).wrapping_add(*v));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| opts.domain[rng.gen_range(0..opts.domain.len())];
    let (lo, hi) = (opts.domain[0], opts.domain[opts.domain.len() - 1]);
    let longest = sizes.values().copied().max().unwrap_or(0) as usize;
    // Constant and two-valued monotone contents first, then random ones.
    let mut patterns: Vec<Box<dyn Fn(usize) -> i64>> = Vec::new();
    for k in 0..=longest {
        patterns.push(Box::new(move |j| if j < k { lo } else { hi }));
        patterns.push(Box::new(move |j| if j < k { hi } else { lo }));
    }
    let structured = patterns.len();
    for t in 0..structured + opts.witness_tries as usize {
        let mut store = Store::filled(&program.spec, sizes, 0).map_err(CheckError::from)?;
        for cells in store.arrays.values_mut() {
            for (j, c) in cells.iter_mut().enumerate() {
                *c = match patterns.get(t) {
                    Some(p) => p(j),
                    None => pick(&mut rng),
                };
            }
        }
        let havoc: Vec<i64> = (0..64).map(|_| pick(&mut rng)).collect();
        match run_concrete(&program.body, &program.spec, store, &havoc, opts.step_budget) {
            Ok(run) => {
                if let Some(f) = run.trace.fault() {
                    return Ok(Some(f.clone()));
                }
            }
            Err(_) => return Ok(None),
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "result")]
pub enum Consistency {
    /// `unchecked` lists sizes the table could not decide or does not cover.
    Consistent { unchecked: Vec<u64> },
    Violation { details: String },
}

impl Consistency {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Consistency::Consistent { .. })
    }
}

/// Whether the verdict's claim agrees with the table.
pub fn consistency(verdict: &Verdict, table: &SafetyTable) -> Consistency {
    let claim_safe_upto = |limit: u64, label: &str| {
        let mut unchecked = Vec::new();
        for (k, row) in table.rows.range(0..=limit) {
            match &row.status {
                RowStatus::Safe => {}
                RowStatus::Unsafe { sizes, fault } => {
                    return Consistency::Violation {
                        details: format!(
                            "{label} but the oracle faults at {}: {fault}",
                            crate::checker::fmt_sizes(sizes)
                        ),
                    }
                }
                RowStatus::Inconclusive { .. } => unchecked.push(*k),
            }
        }
        Consistency::Consistent { unchecked }
    };
    match verdict {
        Verdict::SafeUnbounded { ct, .. } => {
            claim_safe_upto(u64::MAX, &format!("SafeUnbounded with CT {:?}", ct.models))
        }
        Verdict::SafeBounded { bounds, .. } => match bounds.get(&table.size) {
            Some(0) => Consistency::Consistent { unchecked: vec![] },
            Some(n) => claim_safe_upto(n - 1, &format!("SafeBounded below {n}")),
            None => Consistency::Consistent { unchecked: vec![] },
        },
        Verdict::Bug { at, .. } => {
            let k = at.sizes().get(&table.size).copied().unwrap_or(0);
            match table.rows.get(&k) {
                None => Consistency::Consistent { unchecked: vec![k] },
                Some(r) if r.is_unsafe() => Consistency::Consistent { unchecked: vec![] },
                Some(Row {
                    status: RowStatus::Inconclusive { .. },
                    ..
                }) => Consistency::Consistent { unchecked: vec![k] },
                Some(_) => Consistency::Violation {
                    details: format!("Bug at {} but the oracle finds size {k} safe", crate::checker::fmt_sizes(at.sizes())),
                },
            }
        }
        Verdict::Inconclusive { .. } => Consistency::Consistent { unchecked: vec![] },
        Verdict::Unsupported { fallback, .. } => match fallback {
            Some(f) => consistency(f, table),
            None => Consistency::Consistent { unchecked: vec![] },
        },
    }
}
