//! Fault-detecting operational semantics and per-size bounded checkers.
//!
//! Integers are `i64`; an arithmetic overflow stops the run with an
//! [`ExecError`] instead of wrapping.

mod concrete;
mod exhaustive;
pub(crate) mod ir;
mod nondet;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::frontend::{Cmd, Ident, SafetySpec, Span};

pub use exhaustive::{check_size_exhaustive, ExhaustiveOptions};
pub use nondet::{check_size_nondet, NondetOptions};

/// Values for every size variable of a [`SafetySpec`].
pub type SizeAssignment = BTreeMap<Ident, u64>;

pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;
pub const TRACE_CAP: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("param {0} is not bound")]
    UnboundParam(Ident),
    #[error("no size given for {0}")]
    MissingSize(Ident),
    #[error("size of {0} does not fit in memory")]
    SizeTooLarge(Ident),
    #[error("access to unknown array {0}")]
    UnknownArray(Ident),
    #[error("{span}: read of unbound variable {name}")]
    UnboundVariable { name: Ident, span: Span },
    #[error("{span}: integer overflow")]
    Overflow { span: Span },
    #[error("array {array} has {actual} cells but {size} = {expected}")]
    LengthMismatch {
        array: Ident,
        size: Ident,
        expected: u64,
        actual: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("the value domain is empty")]
    EmptyDomain,
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum FaultKind {
    ReadOutOfBounds,
    WriteOutOfBounds,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultKind::ReadOutOfBounds => "readOutOfBounds",
            FaultKind::WriteOutOfBounds => "writeOutOfBounds",
        })
    }
}

/// An out-of-bounds access.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Fault {
    pub site: Span,
    /// The access as written, e.g. `a[i + 1]`.
    pub access: String,
    pub array: Ident,
    pub index_value: i64,
    pub size_value: u64,
    pub kind: FaultKind,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at {} `{}`: index {} with {} of size {}",
            self.kind, self.site, self.access, self.index_value, self.array, self.size_value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "kind")]
pub enum Terminal {
    Completed,
    Faulted { fault: Fault },
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub site: Span,
    pub event: String,
}

/// The choices that pin down one execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "kind")]
pub enum Witness {
    /// Initial array contents plus the values returned by opaque blocks, in read order.
    Valuation {
        arrays: BTreeMap<Ident, Vec<i64>>,
        havoc: Vec<i64>,
    },
    /// Outcomes of the unresolved comparisons, in evaluation order.
    Branches { outcomes: Vec<bool> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Trace {
    /// The last [`TRACE_CAP`] steps.
    pub steps: Vec<TraceStep>,
    pub omitted_steps: u64,
    pub terminal: Terminal,
    pub witness: Option<Witness>,
}

impl Trace {
    pub fn fault(&self) -> Option<&Fault> {
        match &self.terminal {
            Terminal::Faulted { fault } => Some(fault),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "outcome")]
pub enum SizeVerdict {
    Safe {
        sizes: SizeAssignment,
        executions_explored: u128,
        paths_executed: u64,
    },
    Bug {
        sizes: SizeAssignment,
        trace: Trace,
    },
    Inconclusive {
        sizes: SizeAssignment,
        reason: String,
    },
}

impl SizeVerdict {
    pub fn sizes(&self) -> &SizeAssignment {
        match self {
            SizeVerdict::Safe { sizes, .. }
            | SizeVerdict::Bug { sizes, .. }
            | SizeVerdict::Inconclusive { sizes, .. } => sizes,
        }
    }

    pub fn is_safe(&self) -> bool {
        matches!(self, SizeVerdict::Safe { .. })
    }

    pub fn is_bug(&self) -> bool {
        matches!(self, SizeVerdict::Bug { .. })
    }

    pub fn executions(&self) -> u128 {
        match self {
            SizeVerdict::Safe {
                executions_explored,
                ..
            } => *executions_explored,
            _ => 0,
        }
    }
}

/// Scalars plus array contents. Size variables are read from the array lengths.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Store {
    pub scalars: BTreeMap<Ident, i64>,
    pub arrays: BTreeMap<Ident, Vec<i64>>,
}

impl Store {
    /// Every array of `spec` filled with `fill`.
    pub fn filled(spec: &SafetySpec, sizes: &SizeAssignment, fill: i64) -> Result<Self, ExecError> {
        let mut arrays = BTreeMap::new();
        for (a, s) in &spec.arrays {
            let n = *sizes.get(s).ok_or_else(|| ExecError::MissingSize(s.clone()))?;
            let n = usize::try_from(n).map_err(|_| ExecError::SizeTooLarge(s.clone()))?;
            arrays.insert(a.clone(), vec![fill; n]);
        }
        Ok(Store {
            scalars: BTreeMap::new(),
            arrays,
        })
    }

    pub fn with_array(mut self, name: &Ident, cells: Vec<i64>) -> Self {
        self.arrays.insert(name.clone(), cells);
        self
    }

    pub fn sizes(&self, spec: &SafetySpec) -> SizeAssignment {
        spec.arrays
            .iter()
            .map(|(a, s)| (s.clone(), self.arrays.get(a).map_or(0, |v| v.len() as u64)))
            .collect()
    }
}

/// Result of [`run_concrete`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub store: Store,
    pub trace: Trace,
}

/// Runs `cmd` from a fully concrete store.
///
/// Opaque blocks return the values of `havoc` in order when their outputs
/// are read; once the list is used up they return 0.
pub fn run_concrete(
    cmd: &Cmd,
    spec: &SafetySpec,
    store: Store,
    havoc: &[i64],
    step_budget: u64,
) -> Result<Execution, ExecError> {
    concrete::run(cmd, spec, store, havoc, step_budget)
}

pub(crate) struct TraceBuf {
    steps: VecDeque<TraceStep>,
    omitted: u64,
}

impl TraceBuf {
    pub fn new() -> Self {
        TraceBuf {
            steps: VecDeque::new(),
            omitted: 0,
        }
    }

    pub fn push(&mut self, site: Span, event: String) {
        if self.steps.len() == TRACE_CAP {
            self.steps.pop_front();
            self.omitted += 1;
        }
        self.steps.push_back(TraceStep { site, event });
    }

    pub fn finish(self, terminal: Terminal, witness: Option<Witness>) -> Trace {
        Trace {
            steps: self.steps.into(),
            omitted_steps: self.omitted,
            terminal,
            witness,
        }
    }
}

/// Why a single run stopped early.
#[derive(Debug, Clone)]
pub(crate) enum Stop {
    Fault(Fault),
    Budget,
    LoopCap,
    Unresolved(String),
    Error(ExecError),
}

/// Sorted, duplicate-free value domain.
pub(crate) fn normalize_domain(domain: &[i64]) -> Result<Vec<i64>, CheckError> {
    let mut d = domain.to_vec();
    d.sort_unstable();
    d.dedup();
    if d.is_empty() {
        Err(CheckError::EmptyDomain)
    } else {
        Ok(d)
    }
}
