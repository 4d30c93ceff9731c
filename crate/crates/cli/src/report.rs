//! Machine-readable run reports and their text rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use ctms_core::checker::{fmt_sizes, Metrics, Outcome, SizeStrategy, Strategy, Verdict};
use ctms_core::extract::{ConstraintSet, ExtractWarning, ExtractionResult};
use ctms_core::frontend::{pretty_print, Ident, ParamBinding, Program, Span};
use ctms_core::oracle::{Consistency, RowStatus, SafetyTable};
use ctms_core::semantics::{SizeVerdict, Terminal, Witness};
use ctms_core::solver::{normalize, CtWitness, ModelChoice};

pub const SCHEMA_VERSION: u32 = 1;

/// `sha256:` followed by the hex digest of the normalized source.
pub fn digest(program: &Program) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(pretty_print(program).as_bytes())))
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Tool {
    pub fn current() -> Self {
        Tool {
            name: "ctms",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Target {
    pub array: Ident,
    pub size: Ident,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StrategyReport {
    pub sizes: BTreeMap<Ident, SizeStrategy>,
    pub backend: String,
    pub fallback_bound: u64,
}

impl From<&Strategy> for StrategyReport {
    fn from(s: &Strategy) -> Self {
        StrategyReport {
            sizes: s.sizes.clone(),
            backend: s.backend.describe(),
            fallback_bound: s.fallback_bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstraintReport {
    pub text: String,
    pub provenance: Vec<Span>,
    /// Present once params are bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelChoice>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase", rename_all_fields = "camelCase", tag = "result")]
pub enum ExtractionReport {
    Extracted {
        text: String,
        constraints: Vec<ConstraintReport>,
        warnings: Vec<ExtractWarning>,
    },
    Unsupported {
        site: Span,
        construct: String,
    },
}

impl ExtractionReport {
    pub fn new(r: &ExtractionResult, ct: Option<&CtWitness>) -> Self {
        match r {
            ExtractionResult::Unsupported { site, construct } => ExtractionReport::Unsupported {
                site: *site,
                construct: construct.clone(),
            },
            ExtractionResult::Extracted { set, warnings } => ExtractionReport::Extracted {
                text: set.to_string(),
                constraints: constraint_reports(set, ct),
                warnings: warnings.clone(),
            },
        }
    }
}

fn constraint_reports(set: &ConstraintSet, ct: Option<&CtWitness>) -> Vec<ConstraintReport> {
    set.entries()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let interval = normalize(&e.constraint).ok();
            ConstraintReport {
                text: e.constraint.display(&set.size).to_string(),
                provenance: e.provenance.clone(),
                interval: interval.map(|i| i.to_string()),
                model: interval.and(ct.and_then(|c| c.per_constraint.get(k).copied())),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Constraints {
    pub symbolic: ExtractionReport,
    pub instantiated: ExtractionReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleReport {
    pub table: SafetyTable,
    pub consistency: Consistency,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema_version: u32,
    pub tool: Tool,
    pub digest: String,
    pub binding: ParamBinding,
    pub target: Target,
    pub strategy: StrategyReport,
    pub reduced_program: Option<String>,
    pub constraints: Option<Constraints>,
    pub ct: Option<CtWitness>,
    pub verdict: Verdict,
    pub oracle: Option<OracleReport>,
    pub caveats: Vec<String>,
}

impl Report {
    pub fn new(
        program: &Program,
        binding: &ParamBinding,
        target: Target,
        strategy: &Strategy,
        outcome: &Outcome,
        oracle: Option<OracleReport>,
    ) -> Self {
        let analysis = outcome.analysis.as_ref();
        let ct = analysis.and_then(|a| a.ct.clone());
        Report {
            schema_version: SCHEMA_VERSION,
            tool: Tool::current(),
            digest: digest(program),
            binding: binding.clone(),
            target,
            strategy: strategy.into(),
            reduced_program: analysis.map(|a| a.reduced_program.clone()),
            constraints: analysis.map(|a| Constraints {
                symbolic: ExtractionReport::new(&a.symbolic, None),
                instantiated: ExtractionReport::new(&a.instantiated, ct.as_ref()),
            }),
            ct,
            verdict: outcome.verdict.clone(),
            oracle,
            caveats: outcome.caveats.clone(),
        }
    }

    /// Constraint set, CT, per-size verdicts, then the verdict and caveats.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "program: {}", self.digest);
        if !self.binding.is_empty() {
            let b: Vec<String> = self.binding.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "binding: {}", b.join(", "));
        }
        if let Some(c) = &self.constraints {
            if let ExtractionReport::Extracted { text, .. } = &c.symbolic {
                let _ = writeln!(out, "constraints: {text}");
            }
            match &c.instantiated {
                ExtractionReport::Extracted { text, constraints, .. } => {
                    let _ = writeln!(out, "instantiated: {text}");
                    for (k, cr) in constraints.iter().enumerate() {
                        let model = match cr.model {
                            Some(ModelChoice::Model(m)) => format!("model {m}"),
                            Some(ModelChoice::Unsat) | None => "unsatisfiable (error unreachable)".to_string(),
                        };
                        let _ = writeln!(out, "  k{}: {}  -> {}", k + 1, cr.text, model);
                    }
                }
                ExtractionReport::Unsupported { site, construct } => {
                    let _ = writeln!(out, "extraction: unsupported at {site}: {construct}");
                }
            }
        }
        if let Some(ct) = &self.ct {
            let models: Vec<String> = ct.models.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "CT for {}: {{{}}}", self.target.size, models.join(", "));
        }
        render_verdict(&mut out, &self.verdict, "");
        if let Some(o) = &self.oracle {
            render_oracle(&mut out, o);
        }
        for c in &self.caveats {
            let _ = writeln!(out, "caveat: {c}");
        }
        out
    }
}

fn render_size(out: &mut String, v: &SizeVerdict, indent: &str) {
    match v {
        SizeVerdict::Safe {
            sizes,
            executions_explored,
            paths_executed,
        } => {
            let _ = writeln!(
                out,
                "{indent}  {}: safe ({executions_explored} executions, {paths_executed} paths)",
                fmt_sizes(sizes)
            );
        }
        SizeVerdict::Bug { sizes, trace } => {
            let _ = writeln!(out, "{indent}  {}: bug", fmt_sizes(sizes));
            let _ = trace;
        }
        SizeVerdict::Inconclusive { sizes, reason } => {
            let _ = writeln!(out, "{indent}  {}: inconclusive ({reason})", fmt_sizes(sizes));
        }
    }
}

fn render_metrics(out: &mut String, m: &Metrics, indent: &str) {
    let _ = writeln!(
        out,
        "{indent}metrics: {} executions, {} paths, {} size assignments, {:.1} ms",
        m.executions_explored,
        m.paths_executed,
        m.sizes_checked.len(),
        m.wall_time_ms
    );
}

pub fn render_verdict(out: &mut String, v: &Verdict, indent: &str) {
    let per_size = v.per_size();
    if !per_size.is_empty() {
        let _ = writeln!(out, "{indent}sizes:");
        for r in per_size {
            render_size(out, r, indent);
        }
    }
    match v {
        Verdict::SafeUnbounded { metrics, .. } => {
            let _ = writeln!(out, "{indent}verdict: SafeUnbounded (safe for every size)");
            render_metrics(out, metrics, indent);
        }
        Verdict::SafeBounded { bounds, metrics, .. } => {
            let b: Vec<String> = bounds.iter().map(|(k, n)| format!("{k} < {n}")).collect();
            let _ = writeln!(out, "{indent}verdict: SafeBounded ({})", b.join(", "));
            render_metrics(out, metrics, indent);
        }
        Verdict::Bug { at, metrics, .. } => {
            let _ = writeln!(out, "{indent}verdict: Bug at {}", fmt_sizes(at.sizes()));
            if let SizeVerdict::Bug { trace, .. } = at {
                if trace.omitted_steps > 0 {
                    let _ = writeln!(out, "{indent}  ... {} earlier steps", trace.omitted_steps);
                }
                for s in &trace.steps {
                    let _ = writeln!(out, "{indent}  {}: {}", s.site, s.event);
                }
                if let Terminal::Faulted { fault } = &trace.terminal {
                    let _ = writeln!(out, "{indent}fault: {fault}");
                }
                match &trace.witness {
                    Some(Witness::Valuation { arrays, havoc }) => {
                        for (a, cells) in arrays {
                            let _ = writeln!(out, "{indent}initial {a} = {cells:?}");
                        }
                        if !havoc.is_empty() {
                            let _ = writeln!(out, "{indent}opaque outputs = {havoc:?}");
                        }
                    }
                    Some(Witness::Branches { outcomes }) => {
                        let _ = writeln!(out, "{indent}branch outcomes = {outcomes:?}");
                    }
                    None => {}
                }
            }
            render_metrics(out, metrics, indent);
        }
        Verdict::Inconclusive { reason, metrics, .. } => {
            let _ = writeln!(out, "{indent}verdict: Inconclusive ({reason})");
            render_metrics(out, metrics, indent);
        }
        Verdict::Unsupported {
            site,
            construct,
            fallback,
        } => {
            let _ = writeln!(out, "{indent}verdict: Unsupported at {site}: {construct}");
            if let Some(f) = fallback {
                let _ = writeln!(out, "{indent}fallback:");
                render_verdict(out, f, &format!("{indent}  "));
            }
        }
    }
}

fn render_oracle(out: &mut String, o: &OracleReport) {
    let t = &o.table;
    let unsafe_sizes = t.unsafe_sizes();
    let inconclusive = t.inconclusive_sizes();
    let _ = writeln!(out, "oracle: {} = 0..={} ({})", t.size, t.max_size, t.backend);
    if unsafe_sizes.is_empty() && inconclusive.is_empty() {
        let _ = writeln!(out, "  all safe");
    }
    for (k, row) in &t.rows {
        match &row.status {
            RowStatus::Safe => {}
            RowStatus::Unsafe { fault, .. } => {
                let _ = writeln!(out, "  {}={k}: unsafe: {fault}", t.size);
            }
            RowStatus::Inconclusive { reason, .. } => {
                let _ = writeln!(out, "  {}={k}: inconclusive: {reason}", t.size);
            }
        }
    }
    match &o.consistency {
        Consistency::Consistent { unchecked } if unchecked.is_empty() => {
            let _ = writeln!(out, "consistency: consistent");
        }
        Consistency::Consistent { unchecked } => {
            let _ = writeln!(out, "consistency: consistent (unchecked sizes {unchecked:?})");
        }
        Consistency::Violation { details } => {
            let _ = writeln!(out, "consistency: VIOLATION: {details}");
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchSide {
    pub strategy: StrategyReport,
    pub verdict: String,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub schema_version: u32,
    pub tool: Tool,
    pub digest: String,
    pub binding: ParamBinding,
    pub a: BenchSide,
    pub b: BenchSide,
}

impl BenchSide {
    pub fn new(strategy: &Strategy, outcome: &Outcome) -> Self {
        BenchSide {
            strategy: strategy.into(),
            verdict: outcome.verdict.name().to_string(),
            metrics: outcome.verdict.metrics().cloned(),
        }
    }
}

impl BenchReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (label, side) in [("a", &self.a), ("b", &self.b)] {
            let sizes: Vec<String> = side
                .strategy
                .sizes
                .iter()
                .map(|(k, s)| match s {
                    SizeStrategy::CtGuided => format!("{k}=ct"),
                    SizeStrategy::BoundedUpTo(n) => format!("{k}<{n}"),
                })
                .collect();
            let _ = writeln!(out, "{label}: {} -> {}", sizes.join(", "), side.verdict);
            if let Some(m) = &side.metrics {
                render_metrics(&mut out, m, "   ");
            }
        }
        if let (Some(a), Some(b)) = (&self.a.metrics, &self.b.metrics) {
            let _ = writeln!(
                out,
                "executions: a {} b {} ({})",
                a.executions_explored,
                b.executions_explored,
                match a.executions_explored.cmp(&b.executions_explored) {
                    std::cmp::Ordering::Less => "a explores fewer",
                    std::cmp::Ordering::Equal => "equal",
                    std::cmp::Ordering::Greater => "b explores fewer",
                }
            );
        }
        out
    }
}
