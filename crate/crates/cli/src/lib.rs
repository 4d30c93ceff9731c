//! The `ctms` command line.
//!
//! [`run`] parses arguments, dispatches a subcommand and returns the process
//! exit code. Verdict exit codes: 0 safe for every size, 2 safe up to a
//! bound, 3 bug, 4 inconclusive or unsupported. Usage errors exit 64.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use ctms_core::checker::{
    compare_budgets, prove, Backend, ProveError, SizeStrategy, Strategy, DEFAULT_FALLBACK_BOUND,
};
use ctms_core::extract::{extract, ExtractionResult};
use ctms_core::frontend::{bind_program, parse, pretty_print, Ident, ParamBinding, Program};
use ctms_core::oracle::{brute_validate, consistency, generate, OracleOptions, DEFAULT_MAX_SIZE, DEFAULT_SIZE_BUDGET};
use ctms_core::semantics::ExhaustiveOptions;
use ctms_core::slicer::{reduce, reduce_program, SliceTargets};
use ctms_core::solver::{minimal_model, normalize, ModelChoice};

pub mod report;

use report::{BenchReport, BenchSide, OracleReport, Report, Target};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug, Parser)]
#[command(name = "ctms", version, about = "Completeness-threshold memory-safety checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a program and print it in normal form.
    Parse { file: PathBuf },
    /// Print the program reduced to what can affect accesses to one array.
    Slice {
        file: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
    },
    /// Print the constraint set for accesses to one array.
    Extract {
        file: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Keep params symbolic instead of binding them.
        #[arg(long)]
        symbolic: bool,
    },
    /// Run the full pipeline and report a verdict.
    Check {
        file: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Write the JSON report to PATH (`-` for stdout).
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Check, then compare the verdict against a brute-force safety table.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Largest size covered by the table.
        #[arg(long, default_value_t = DEFAULT_MAX_SIZE)]
        max_size: u64,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Run two size strategies and compare the work done.
    Bench {
        file: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        /// Per-size strategy, e.g. `s=ct,n=12` (`N` checks sizes below N).
        #[arg(long, value_name = "SPEC")]
        strategy_a: String,
        #[arg(long, value_name = "SPEC")]
        strategy_b: String,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Print a seeded random program from the supported fragment.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum number of top-level statements.
        #[arg(long, default_value_t = DEFAULT_SIZE_BUDGET)]
        size_budget: usize,
    },
}

#[derive(Debug, Args)]
struct TargetArgs {
    #[arg(long)]
    array: String,
    #[arg(long)]
    size: String,
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Param value, e.g. `B=1`. Repeatable.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendKind {
    Exhaustive,
    Nondet,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "exhaustive")]
    backend: BackendKind,
    /// Values for array cells and opaque outputs.
    #[arg(long, value_delimiter = ',', default_value = "0,1", allow_negative_numbers = true)]
    value_domain: Vec<i64>,
    /// Iterations allowed per `while` activation under the nondet backend.
    #[arg(long)]
    loop_cap: Option<u64>,
    /// Bound for every size when the program falls outside the supported fragment.
    #[arg(long, default_value_t = DEFAULT_FALLBACK_BOUND)]
    fallback_bound: u64,
    /// Check `VAR` only at sizes below N. Bounding the target size disables CT guidance.
    #[arg(long = "bound", value_name = "VAR=N")]
    bounds: Vec<String>,
    /// Paths explored per size before giving up.
    #[arg(long)]
    path_budget: Option<u64>,
}

/// A failure that ends the command before a verdict.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Parse(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Parse(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

impl From<ProveError> for Failure {
    fn from(e: ProveError) -> Self {
        match e {
            ProveError::Bind(_) | ProveError::Strategy(_) => Failure::Usage(e.to_string()),
            ProveError::Check(_) | ProveError::Solve(_) => Failure::Internal(e.to_string()),
        }
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("ctms: {f}");
            if matches!(f, Failure::Usage(_)) {
                eprintln!("Run `ctms --help` for usage.");
            }
            f.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Parse { file } => {
            print!("{}", pretty_print(&load(&file)?));
            Ok(0)
        }
        Command::Slice { file, target } => {
            let program = load(&file)?;
            let (array, size) = resolve_target(&program, &target)?;
            print!("{}", pretty_print(&reduce_program(&program, &SliceTargets::new(array, size))));
            Ok(0)
        }
        Command::Extract {
            file,
            target,
            params,
            symbolic,
        } => {
            let program = load(&file)?;
            let (array, size) = resolve_target(&program, &target)?;
            let targets = SliceTargets::new(array.clone(), size.clone());
            let result = if symbolic {
                extract(&reduce_program(&program, &targets).body, &array, &size)
            } else {
                let binding = parse_binding(&params.params)?;
                let bound = bind_program(&program, &binding).map_err(|e| Failure::Usage(e.to_string()))?;
                extract(&reduce(&bound.body, &targets), &array, &size)
            };
            print_extraction(&result, !symbolic);
            Ok(if matches!(result, ExtractionResult::Unsupported { .. }) { 4 } else { 0 })
        }
        Command::Check {
            file,
            target,
            params,
            run,
            json,
        } => {
            let program = load(&file)?;
            let (array, size) = resolve_target(&program, &target)?;
            let binding = parse_binding(&params.params)?;
            let strategy = build_strategy(&program, &size, &run)?;
            let outcome = prove(&program, &binding, &strategy)?;
            let report = Report::new(&program, &binding, Target { array, size }, &strategy, &outcome, None);
            emit(&report, report.render_text(), json.as_deref())?;
            Ok(outcome.verdict.exit_code())
        }
        Command::Validate {
            file,
            target,
            params,
            run,
            max_size,
            json,
        } => {
            let program = load(&file)?;
            let (array, size) = resolve_target(&program, &target)?;
            let binding = parse_binding(&params.params)?;
            let strategy = build_strategy(&program, &size, &run)?;
            let outcome = prove(&program, &binding, &strategy)?;
            let mut opts = OracleOptions::new(max_size);
            opts.domain = run.value_domain.clone();
            let table = brute_validate(&program, &binding, &size, &opts).map_err(|e| Failure::Internal(e.to_string()))?;
            let verdict_check = consistency(&outcome.verdict, &table);
            let ok = verdict_check.is_consistent();
            let oracle = OracleReport {
                table,
                consistency: verdict_check,
            };
            let report = Report::new(&program, &binding, Target { array, size }, &strategy, &outcome, Some(oracle));
            emit(&report, report.render_text(), json.as_deref())?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Bench {
            file,
            params,
            strategy_a,
            strategy_b,
            json,
        } => {
            let program = load(&file)?;
            let binding = parse_binding(&params.params)?;
            let a = parse_strategy_spec(&program, &strategy_a)?;
            let b = parse_strategy_spec(&program, &strategy_b)?;
            let (oa, ob) = compare_budgets(&program, &binding, &a, &b)?;
            let report = BenchReport {
                schema_version: report::SCHEMA_VERSION,
                tool: report::Tool::current(),
                digest: report::digest(&program),
                binding,
                a: BenchSide::new(&a, &oa),
                b: BenchSide::new(&b, &ob),
            };
            emit(&report, report.render_text(), json.as_deref())?;
            Ok(0)
        }
        Command::Generate { seed, size_budget } => {
            let (program, binding) = generate(seed, size_budget);
            if !binding.is_empty() {
                let b: Vec<String> = binding.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("// {}", b.join(" "));
            }
            print!("{}", pretty_print(&program));
            Ok(0)
        }
    }
}

fn load(path: &Path) -> Result<Program, Failure> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&src).map_err(|e| Failure::Parse(format!("{}:{e}", path.display())))
}

fn ident(name: &str) -> Result<Ident, Failure> {
    Ident::new(name).map_err(|e| Failure::Usage(e.to_string()))
}

fn resolve_target(program: &Program, t: &TargetArgs) -> Result<(Ident, Ident), Failure> {
    let array = ident(&t.array)?;
    let size = ident(&t.size)?;
    match program.spec.size_of(&array) {
        Some(s) if *s == size => Ok((array, size)),
        Some(s) => Err(Failure::Usage(format!("array {array} has size {s}, not {size}"))),
        None => Err(Failure::Usage(format!("{array} is not an array of the precondition"))),
    }
}

fn split_pair<'a>(item: &'a str, what: &str) -> Result<(&'a str, &'a str), Failure> {
    item.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Failure::Usage(format!("bad {what} `{item}`: expected NAME=VALUE")))
}

fn parse_binding(items: &[String]) -> Result<ParamBinding, Failure> {
    let mut b = ParamBinding::new();
    for item in items {
        let (k, v) = split_pair(item, "param")?;
        let value: i64 = v
            .parse()
            .map_err(|_| Failure::Usage(format!("bad param `{item}`: `{v}` is not an integer")))?;
        b.set(ident(k)?, value).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(b)
}

fn size_var(program: &Program, name: &str) -> Result<Ident, Failure> {
    let v = ident(name)?;
    if program.spec.is_size(&v) {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("{v} is not a size variable")))
    }
}

fn build_strategy(program: &Program, size: &Ident, run: &RunArgs) -> Result<Strategy, Failure> {
    let backend = match run.backend {
        BackendKind::Exhaustive => {
            if run.value_domain.is_empty() {
                return Err(Failure::Usage("empty value domain".into()));
            }
            Backend::Exhaustive(ExhaustiveOptions {
                domain: run.value_domain.clone(),
                path_budget: run.path_budget,
                ..ExhaustiveOptions::default()
            })
        }
        BackendKind::Nondet => Backend::Nondet { loop_cap: run.loop_cap },
    };
    let mut strategy = Strategy::ct_guided(&program.spec, size, run.fallback_bound).with_backend(backend);
    strategy.fallback_bound = run.fallback_bound;
    for item in &run.bounds {
        let (k, v) = split_pair(item, "bound")?;
        let var = size_var(program, k)?;
        let n: u64 = v
            .parse()
            .map_err(|_| Failure::Usage(format!("bad bound `{item}`: `{v}` is not a natural")))?;
        strategy.sizes.insert(var, SizeStrategy::BoundedUpTo(n));
    }
    Ok(strategy)
}

/// `s=ct,n=12`: CT guidance for `s`, sizes of `n` below 12. Unnamed sizes get the fallback bound.
fn parse_strategy_spec(program: &Program, text: &str) -> Result<Strategy, Failure> {
    let mut strategy = Strategy::bounded(&program.spec, DEFAULT_FALLBACK_BOUND);
    for item in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = split_pair(item, "strategy")?;
        let var = size_var(program, k)?;
        let st = if v.eq_ignore_ascii_case("ct") {
            SizeStrategy::CtGuided
        } else {
            SizeStrategy::BoundedUpTo(
                v.parse()
                    .map_err(|_| Failure::Usage(format!("bad strategy `{item}`: expected `ct` or a natural")))?,
            )
        };
        strategy.sizes.insert(var, st);
    }
    Ok(strategy)
}

fn print_extraction(result: &ExtractionResult, with_models: bool) {
    match result {
        ExtractionResult::Unsupported { site, construct } => {
            println!("unsupported at {site}: {construct}");
        }
        ExtractionResult::Extracted { set, warnings } => {
            println!("{set}");
            if with_models {
                for (k, e) in set.entries().iter().enumerate() {
                    let text = e.constraint.display(&set.size).to_string();
                    match (normalize(&e.constraint), minimal_model(&e.constraint)) {
                        (Ok(iv), Ok(ModelChoice::Model(m))) => {
                            println!("  k{}: {text}  {} = {iv}, model {m}", k + 1, set.size)
                        }
                        (Ok(_), Ok(ModelChoice::Unsat)) => println!("  k{}: {text}  unsatisfiable", k + 1),
                        (Err(err), _) | (_, Err(err)) => println!("  k{}: {text}  ({err})", k + 1),
                    }
                }
            }
            for w in warnings {
                println!("warning: {}: {}", w.site, w.message);
            }
        }
    }
}

fn emit<R: serde::Serialize>(report: &R, text: String, json: Option<&Path>) -> Result<(), Failure> {
    let to_stdout = json.is_some_and(|p| p == Path::new("-"));
    if !to_stdout {
        print!("{text}");
    }
    if let Some(path) = json {
        let body = serde_json::to_string_pretty(report).map_err(|e| Failure::Internal(e.to_string()))?;
        if to_stdout {
            println!("{body}");
        } else {
            std::fs::write(path, body + "\n")
                .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    Ok(())
}
