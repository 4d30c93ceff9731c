//! Exhaustive enumeration of initial contents and opaque outputs.
//!
//! Inputs are drawn lazily: a cell or opaque output becomes a choice point
//! the first time it is read. Runs are replayed from a choice vector and
//! enumerated depth-first, so each leaf stands for `|D|^k` concrete
//! executions, `k` being the number of inputs it never read.

use crate::frontend::{Cmd, SafetySpec};

use super::concrete::{replay, Machine, Source};
use super::ir::compile;
use super::{
    normalize_domain, CheckError, SizeAssignment, SizeVerdict, Stop, Witness, DEFAULT_STEP_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExhaustiveOptions {
    pub domain: Vec<i64>,
    /// Steps allowed per execution.
    pub step_budget: u64,
    /// Distinct paths allowed before giving up.
    pub path_budget: Option<u64>,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions {
            domain: vec![0, 1],
            step_budget: DEFAULT_STEP_BUDGET,
            path_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Input {
    Cell(usize, usize),
    Havoc,
}

struct Dfs<'d> {
    domain: &'d [i64],
    prefix: Vec<usize>,
    made: Vec<(usize, Input)>,
}

impl Dfs<'_> {
    fn choose(&mut self, input: Input) -> i64 {
        let k = self.made.len();
        let pick = self.prefix.get(k).copied().unwrap_or(0);
        self.made.push((pick, input));
        self.domain[pick]
    }
}

impl Source for Dfs<'_> {
    fn cell(&mut self, array: usize, index: usize) -> i64 {
        self.choose(Input::Cell(array, index))
    }

    fn havoc(&mut self) -> i64 {
        self.choose(Input::Havoc)
    }
}

fn pow_sat(base: u128, exp: u64) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

/// Checks one size assignment by running every input valuation over `opts.domain`.
///
/// The first faulting valuation in depth-first order (cells and opaque
/// outputs ordered by first read, values in ascending order) is reported.
pub fn check_size_exhaustive(
    cmd: &Cmd,
    spec: &SafetySpec,
    sizes: &SizeAssignment,
    opts: &ExhaustiveOptions,
) -> Result<SizeVerdict, CheckError> {
    let domain = normalize_domain(&opts.domain)?;
    let prog = compile(cmd, spec, sizes)?;
    let base = domain.len() as u128;
    let total_cells = prog.total_cells();
    let mut prefix: Vec<usize> = Vec::new();
    let mut executions: u128 = 0;
    let mut paths: u64 = 0;

    loop {
        if let Some(limit) = opts.path_budget {
            if paths >= limit {
                return Ok(SizeVerdict::Inconclusive {
                    sizes: sizes.clone(),
                    reason: format!("path budget of {limit} exceeded"),
                });
            }
        }
        let dfs = Dfs {
            domain: &domain,
            prefix: std::mem::take(&mut prefix),
            made: Vec::new(),
        };
        let mut m = Machine::new(&prog, dfs, opts.step_budget);
        let stop = m.run();
        paths += 1;
        match stop {
            Ok(()) => {}
            Err(Stop::Fault(_)) => {
                let (arrays, havoc) = valuation(&m, &domain);
                let (replayed, terminal) = replay(
                    &prog,
                    &[],
                    arrays.clone(),
                    havoc.clone(),
                    domain[0],
                    opts.step_budget,
                )?;
                let witness = Witness::Valuation {
                    arrays: prog
                        .arrays
                        .iter()
                        .map(|(a, _, _)| a.clone())
                        .zip(arrays)
                        .collect(),
                    havoc,
                };
                let trace = replayed
                    .trace
                    .expect("replay traces")
                    .finish(terminal, Some(witness));
                return Ok(SizeVerdict::Bug {
                    sizes: sizes.clone(),
                    trace,
                });
            }
            Err(Stop::Budget) => {
                return Ok(SizeVerdict::Inconclusive {
                    sizes: sizes.clone(),
                    reason: format!("step budget of {} exceeded", opts.step_budget),
                })
            }
            Err(Stop::LoopCap) | Err(Stop::Unresolved(_)) => unreachable!("concrete runs resolve every value"),
            Err(Stop::Error(e)) => {
                return Ok(SizeVerdict::Inconclusive {
                    sizes: sizes.clone(),
                    reason: e.to_string(),
                })
            }
        }
        let cells_read = m
            .source
            .made
            .iter()
            .filter(|(_, i)| matches!(i, Input::Cell(..)))
            .count() as u64;
        let havoc_read = m.source.made.len() as u64 - cells_read;
        let unread = total_cells - cells_read + (m.havoc_created - havoc_read);
        executions = executions.saturating_add(pow_sat(base, unread));

        let mut made = m.source.made;
        while let Some((pick, _)) = made.last() {
            if pick + 1 < domain.len() {
                break;
            }
            made.pop();
        }
        match made.last_mut() {
            None => break,
            Some((pick, _)) => *pick += 1,
        }
        prefix = made.into_iter().map(|(p, _)| p).collect();
    }
    Ok(SizeVerdict::Safe {
        sizes: sizes.clone(),
        executions_explored: executions,
        paths_executed: paths,
    })
}

fn valuation(m: &Machine<'_, Dfs<'_>>, domain: &[i64]) -> (Vec<Vec<i64>>, Vec<i64>) {
    let mut arrays: Vec<Vec<i64>> = m
        .prog
        .arrays
        .iter()
        .map(|(_, _, n)| vec![domain[0]; *n])
        .collect();
    let mut havoc = Vec::new();
    for (pick, input) in &m.source.made {
        match input {
            Input::Cell(a, i) => arrays[*a][*i] = domain[*pick],
            Input::Havoc => havoc.push(domain[*pick]),
        }
    }
    (arrays, havoc)
}
