//! End-to-end proof: reduce, extract, solve, then check each chosen size.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::extract::{extract, ExtractionResult};
use crate::frontend::{bind_program, print_cmd, pretty_print, BindError, Cmd, Ident, ParamBinding, Program, SafetySpec, Span};
use crate::semantics::{
    check_size_exhaustive, check_size_nondet, CheckError, ExhaustiveOptions, NondetOptions, SizeAssignment,
    SizeVerdict,
};
use crate::slicer::{reduce, reduce_program, SliceTargets};
use crate::solver::{select_ct, CtWitness, SolveError};

pub const DEFAULT_FALLBACK_BOUND: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "kind", content = "bound")]
pub enum SizeStrategy {
    CtGuided,
    /// Sizes `0..N`, excluding `N`.
    BoundedUpTo(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Exhaustive(ExhaustiveOptions),
    /// `None` uses twice the largest size under test plus four.
    Nondet { loop_cap: Option<u64> },
}

impl Backend {
    pub fn describe(&self) -> String {
        match self {
            Backend::Exhaustive(o) => format!("exhaustive over {:?}", o.domain),
            Backend::Nondet { loop_cap: Some(c) } => format!("nondet with loop cap {c}"),
            Backend::Nondet { loop_cap: None } => "nondet with default loop cap".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    pub sizes: BTreeMap<Ident, SizeStrategy>,
    pub backend: Backend,
    /// Bound used for the fallback check of unsupported programs.
    pub fallback_bound: u64,
}

impl Strategy {
    /// CT-guided on `size`; every other size variable of `spec` bounded by `bound`.
    pub fn ct_guided(spec: &SafetySpec, size: &Ident, bound: u64) -> Self {
        Strategy {
            sizes: spec
                .size_vars()
                .map(|s| {
                    let st = if s == size {
                        SizeStrategy::CtGuided
                    } else {
                        SizeStrategy::BoundedUpTo(bound)
                    };
                    (s.clone(), st)
                })
                .collect(),
            backend: Backend::Exhaustive(ExhaustiveOptions::default()),
            fallback_bound: DEFAULT_FALLBACK_BOUND,
        }
    }

    /// Every size variable bounded by `bound`.
    pub fn bounded(spec: &SafetySpec, bound: u64) -> Self {
        Strategy {
            sizes: spec
                .size_vars()
                .map(|s| (s.clone(), SizeStrategy::BoundedUpTo(bound)))
                .collect(),
            backend: Backend::Exhaustive(ExhaustiveOptions::default()),
            fallback_bound: DEFAULT_FALLBACK_BOUND,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub executions_explored: u128,
    pub paths_executed: u64,
    pub sizes_checked: Vec<SizeAssignment>,
    pub wall_time_ms: f64,
}

impl Metrics {
    fn from_runs(runs: &[SizeVerdict], started: Instant) -> Self {
        Metrics {
            executions_explored: runs.iter().map(SizeVerdict::executions).sum(),
            paths_executed: runs
                .iter()
                .map(|r| match r {
                    SizeVerdict::Safe { paths_executed, .. } => *paths_executed,
                    _ => 0,
                })
                .sum(),
            sizes_checked: runs.iter().map(|r| r.sizes().clone()).collect(),
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "verdict")]
pub enum Verdict {
    SafeUnbounded {
        ct: CtWitness,
        per_size: Vec<SizeVerdict>,
        metrics: Metrics,
    },
    SafeBounded {
        bounds: BTreeMap<Ident, u64>,
        per_size: Vec<SizeVerdict>,
        metrics: Metrics,
    },
    Bug {
        at: SizeVerdict,
        per_size: Vec<SizeVerdict>,
        metrics: Metrics,
    },
    Inconclusive {
        reason: String,
        per_size: Vec<SizeVerdict>,
        metrics: Metrics,
    },
    Unsupported {
        site: Span,
        construct: String,
        fallback: Option<Box<Verdict>>,
    },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::SafeUnbounded { .. } => "SafeUnbounded",
            Verdict::SafeBounded { .. } => "SafeBounded",
            Verdict::Bug { .. } => "Bug",
            Verdict::Inconclusive { .. } => "Inconclusive",
            Verdict::Unsupported { .. } => "Unsupported",
        }
    }

    pub fn metrics(&self) -> Option<&Metrics> {
        match self {
            Verdict::SafeUnbounded { metrics, .. }
            | Verdict::SafeBounded { metrics, .. }
            | Verdict::Bug { metrics, .. }
            | Verdict::Inconclusive { metrics, .. } => Some(metrics),
            Verdict::Unsupported { fallback, .. } => fallback.as_ref().and_then(|f| f.metrics()),
        }
    }

    pub fn per_size(&self) -> &[SizeVerdict] {
        match self {
            Verdict::SafeUnbounded { per_size, .. }
            | Verdict::SafeBounded { per_size, .. }
            | Verdict::Bug { per_size, .. }
            | Verdict::Inconclusive { per_size, .. } => per_size,
            Verdict::Unsupported { fallback, .. } => fallback.as_ref().map_or(&[], |f| f.per_size()),
        }
    }

    /// Process exit code for this verdict.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::SafeUnbounded { .. } => 0,
            Verdict::SafeBounded { .. } => 2,
            Verdict::Bug { .. } => 3,
            Verdict::Inconclusive { .. } | Verdict::Unsupported { .. } => 4,
        }
    }
}

/// Intermediate artifacts of a CT-guided run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Analysis {
    pub array: Ident,
    pub size: Ident,
    /// Reduced program with params kept symbolic.
    pub reduced_program: String,
    pub symbolic: ExtractionResult,
    /// Reduced body after binding params.
    pub reduced_bound: String,
    pub instantiated: ExtractionResult,
    pub ct: Option<CtWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Outcome {
    pub verdict: Verdict,
    pub analysis: Option<Analysis>,
    pub caveats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProveError {
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("strategy: {0}")]
    Strategy(String),
}

fn validate_strategy(spec: &SafetySpec, strategy: &Strategy) -> Result<Option<(Ident, Ident)>, ProveError> {
    for s in strategy.sizes.keys() {
        if !spec.is_size(s) {
            return Err(ProveError::Strategy(format!("`{s}` is not a size variable")));
        }
    }
    let mut ct = None;
    for (a, s) in &spec.arrays {
        match strategy.sizes.get(s) {
            None => return Err(ProveError::Strategy(format!("no strategy for size `{s}`"))),
            Some(SizeStrategy::CtGuided) => {
                if ct.is_some() {
                    return Err(ProveError::Strategy(
                        "at most one size variable may be CT-guided".to_string(),
                    ));
                }
                ct = Some((a.clone(), s.clone()));
            }
            Some(SizeStrategy::BoundedUpTo(_)) => {}
        }
    }
    Ok(ct)
}

/// Runs the pipeline for `strategy`.
pub fn prove(program: &Program, binding: &ParamBinding, strategy: &Strategy) -> Result<Outcome, ProveError> {
    let ct_pair = validate_strategy(&program.spec, strategy)?;
    let bound = bind_program(program, binding)?;
    let mut caveats = Vec::new();
    if let Backend::Exhaustive(o) = &strategy.backend {
        caveats.push(format!(
            "array cells and opaque outputs range over the value domain {:?}; comparisons against other constants or chains of three or more cells may need a larger domain",
            o.domain
        ));
    }
    match ct_pair {
        None => {
            let bounds = strategy
                .sizes
                .iter()
                .map(|(s, st)| match st {
                    SizeStrategy::BoundedUpTo(n) => (s.clone(), *n),
                    SizeStrategy::CtGuided => unreachable!("no CT-guided size"),
                })
                .collect();
            let verdict = bounded(&bound, &bounds, &strategy.backend)?;
            Ok(Outcome {
                verdict,
                analysis: None,
                caveats,
            })
        }
        Some((array, size)) => ct_guided(program, &bound, &array, &size, strategy, caveats),
    }
}

fn ct_guided(
    program: &Program,
    bound: &Program,
    array: &Ident,
    size: &Ident,
    strategy: &Strategy,
    mut caveats: Vec<String>,
) -> Result<Outcome, ProveError> {
    let started = Instant::now();
    let targets = SliceTargets::new(array.clone(), size.clone());
    let symbolic_program = reduce_program(program, &targets);
    let symbolic = extract(&symbolic_program.body, array, size);
    let reduced = reduce(&bound.body, &targets);
    let instantiated = extract(&reduced, array, size);
    let mut analysis = Analysis {
        array: array.clone(),
        size: size.clone(),
        reduced_program: pretty_print(&symbolic_program),
        symbolic,
        reduced_bound: print_cmd(&reduced),
        instantiated: instantiated.clone(),
        ct: None,
    };

    let fallback = |site: Span, construct: String, caveats: &[String]| -> Result<Outcome, ProveError> {
        let bounds = bound
            .spec
            .size_vars()
            .map(|s| (s.clone(), strategy.fallback_bound))
            .collect();
        let fb = bounded(bound, &bounds, &strategy.backend)?;
        Ok(Outcome {
            verdict: Verdict::Unsupported {
                site,
                construct,
                fallback: Some(Box::new(fb)),
            },
            analysis: None,
            caveats: caveats.to_vec(),
        })
    };

    let set = match &instantiated {
        ExtractionResult::Unsupported { site, construct } => {
            let mut out = fallback(*site, construct.clone(), &caveats)?;
            out.analysis = Some(analysis);
            return Ok(out);
        }
        ExtractionResult::Extracted { set, warnings } => {
            for w in warnings {
                caveats.push(format!("{}: {}", w.site, w.message));
            }
            set.clone()
        }
    };

    let mut others: Vec<(Ident, Vec<u64>)> = Vec::new();
    for (b, n) in &bound.spec.arrays {
        if b == array {
            continue;
        }
        let sliced = reduce(&bound.body, &SliceTargets::new(b.clone(), n.clone()));
        if sliced.mentioned_vars().contains(size) {
            let mut out = fallback(
                Span::default(),
                format!("accesses to `{b}` depend on `{size}`"),
                &caveats,
            )?;
            out.analysis = Some(analysis);
            return Ok(out);
        }
        let SizeStrategy::BoundedUpTo(limit) = strategy.sizes[n] else {
            unreachable!("validated")
        };
        others.push((n.clone(), (0..limit).collect()));
    }

    let ct = select_ct(&set)?;
    analysis.ct = Some(ct.clone());
    if ct.models.is_empty() {
        caveats.push(format!(
            "no satisfiable constraint: no access to `{array}` can fault at any size of `{size}`"
        ));
    }
    let ct_sizes: Vec<u64> = if ct.models.is_empty() && !others.is_empty() {
        vec![0]
    } else {
        ct.models.clone()
    };
    let mut axes = vec![(size.clone(), ct_sizes)];
    axes.extend(others);
    let assignments = product(&axes);

    let checked_body = reduce(&bound.body, &SliceTargets::all(&bound.spec));
    let runs = run_all(&checked_body, &bound.spec, &assignments, &strategy.backend)?;
    let verdict = fold(
        runs,
        bound,
        &strategy.backend,
        started,
        |per_size, metrics| Verdict::SafeUnbounded {
            ct: ct.clone(),
            per_size,
            metrics,
        },
    )?;
    Ok(Outcome {
        verdict,
        analysis: Some(analysis),
        caveats,
    })
}

fn bounded(bound: &Program, bounds: &BTreeMap<Ident, u64>, backend: &Backend) -> Result<Verdict, ProveError> {
    let started = Instant::now();
    let axes: Vec<(Ident, Vec<u64>)> = bound
        .spec
        .size_vars()
        .map(|s| (s.clone(), (0..bounds[s]).collect()))
        .collect();
    let assignments = product(&axes);
    let runs = run_all(&bound.body, &bound.spec, &assignments, backend)?;
    fold(runs, bound, backend, started, |per_size, metrics| Verdict::SafeBounded {
        bounds: bounds.clone(),
        per_size,
        metrics,
    })
}

/// Every combination of the axis values, first axis slowest.
fn product(axes: &[(Ident, Vec<u64>)]) -> Vec<SizeAssignment> {
    let mut out = vec![SizeAssignment::new()];
    for (name, values) in axes {
        out = out
            .into_iter()
            .flat_map(|partial| {
                values.iter().map(move |v| {
                    let mut p = partial.clone();
                    p.insert(name.clone(), *v);
                    p
                })
            })
            .collect();
    }
    if axes.iter().any(|(_, v)| v.is_empty()) {
        out.clear();
    }
    out
}

fn check_one(body: &Cmd, spec: &SafetySpec, sizes: &SizeAssignment, backend: &Backend) -> Result<SizeVerdict, CheckError> {
    match backend {
        Backend::Exhaustive(opts) => check_size_exhaustive(body, spec, sizes, opts),
        Backend::Nondet { loop_cap } => {
            let max = sizes.values().copied().max().unwrap_or(0);
            let mut opts = NondetOptions::for_max_size(max);
            if let Some(c) = loop_cap {
                opts.loop_cap = *c;
            }
            check_size_nondet(body, spec, sizes, &opts)
        }
    }
}

fn run_all(
    body: &Cmd,
    spec: &SafetySpec,
    assignments: &[SizeAssignment],
    backend: &Backend,
) -> Result<Vec<SizeVerdict>, ProveError> {
    let runs: Result<Vec<_>, CheckError> = assignments
        .par_iter()
        .map(|sizes| check_one(body, spec, sizes, backend))
        .collect();
    Ok(runs?)
}

/// The exhaustive options used to confirm a fault on the original program.
fn replay_options(backend: &Backend) -> ExhaustiveOptions {
    match backend {
        Backend::Exhaustive(o) => o.clone(),
        Backend::Nondet { .. } => ExhaustiveOptions::default(),
    }
}

fn fold(
    runs: Vec<SizeVerdict>,
    original: &Program,
    backend: &Backend,
    started: Instant,
    safe: impl FnOnce(Vec<SizeVerdict>, Metrics) -> Verdict,
) -> Result<Verdict, ProveError> {
    if let Some(bug) = runs.iter().find(|r| r.is_bug()) {
        let replay = check_size_exhaustive(&original.body, &original.spec, bug.sizes(), &replay_options(backend))?;
        let metrics = Metrics::from_runs(&runs, started);
        return Ok(match replay {
            SizeVerdict::Bug { .. } => Verdict::Bug {
                at: replay,
                per_size: runs,
                metrics,
            },
            other => Verdict::Inconclusive {
                reason: format!(
                    "slice divergence: fault at {} not reproduced on the original program ({})",
                    fmt_sizes(bug.sizes()),
                    match &other {
                        SizeVerdict::Inconclusive { reason, .. } => reason.clone(),
                        _ => "no fault".to_string(),
                    }
                ),
                per_size: runs,
                metrics,
            },
        });
    }
    let metrics = Metrics::from_runs(&runs, started);
    if let Some(SizeVerdict::Inconclusive { sizes, reason }) =
        runs.iter().find(|r| matches!(r, SizeVerdict::Inconclusive { .. }))
    {
        return Ok(Verdict::Inconclusive {
            reason: format!("{} at {} ({})", reason, fmt_sizes(sizes), backend.describe()),
            per_size: runs.clone(),
            metrics,
        });
    }
    Ok(safe(runs, metrics))
}

pub fn fmt_sizes(sizes: &SizeAssignment) -> String {
    sizes
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Runs two strategies on the same program for a side-by-side comparison.
pub fn compare_budgets(
    program: &Program,
    binding: &ParamBinding,
    a: &Strategy,
    b: &Strategy,
) -> Result<(Outcome, Outcome), ProveError> {
    Ok((prove(program, binding, a)?, prove(program, binding, b)?))
}
