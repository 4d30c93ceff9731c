//! Branch exploration with unknown cell contents.
//!
//! Every array cell and every opaque output is unknown. A comparison with an
//! unknown operand is a binary choice point; everything else is evaluated
//! concretely. Paths are enumerated depth-first by replaying choice vectors.

use crate::frontend::{Cmd, SafetySpec};

use super::ir::{arith, compile, Bx, Compiled, Ex, St};
use super::{
    ExecError, Fault, FaultKind, SizeAssignment, SizeVerdict, Stop, TraceBuf, Witness,
    DEFAULT_STEP_BUDGET,
};
use super::{CheckError, Terminal};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NondetOptions {
    /// Maximum iterations of any single `while` activation.
    pub loop_cap: u64,
    pub step_budget: u64,
    pub path_budget: Option<u64>,
}

impl NondetOptions {
    /// The default cap for checks up to `max_size`: `2 * max_size + 4`.
    pub fn for_max_size(max_size: u64) -> Self {
        NondetOptions {
            loop_cap: 2 * max_size + 4,
            step_budget: DEFAULT_STEP_BUDGET,
            path_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    Unbound,
    Known(i64),
    Unknown,
}

struct Walker<'a> {
    prog: &'a Compiled,
    scalars: Vec<Val>,
    prefix: Vec<bool>,
    made: Vec<bool>,
    steps: u64,
    opts: &'a NondetOptions,
    trace: Option<TraceBuf>,
}

impl<'a> Walker<'a> {
    fn new(prog: &'a Compiled, prefix: Vec<bool>, opts: &'a NondetOptions) -> Self {
        let mut scalars = vec![Val::Unbound; prog.slot_names.len()];
        for (slot, v) in &prog.size_slots {
            scalars[*slot] = Val::Known(*v);
        }
        Walker {
            prog,
            scalars,
            prefix,
            made: Vec::new(),
            steps: 0,
            opts,
            trace: None,
        }
    }

    fn tick(&mut self) -> Result<(), Stop> {
        self.steps += 1;
        if self.steps > self.opts.step_budget {
            Err(Stop::Budget)
        } else {
            Ok(())
        }
    }

    fn note(&mut self, site: usize, event: &str) {
        if let Some(t) = &mut self.trace {
            let s = &self.prog.sites[site];
            let line = if event.is_empty() {
                s.text.clone()
            } else {
                format!("{}  ({event})", s.text)
            };
            t.push(s.span, line);
        }
    }

    fn choose(&mut self) -> bool {
        let k = self.made.len();
        let pick = self.prefix.get(k).copied().unwrap_or(false);
        self.made.push(pick);
        pick
    }

    fn bounds(&self, array: usize, index: Val, site: usize, kind: FaultKind) -> Result<(), Stop> {
        let i = match index {
            Val::Known(i) => i,
            Val::Unknown => {
                return Err(Stop::Unresolved(format!(
                    "index of `{}` depends on array contents",
                    self.prog.sites[site].text
                )))
            }
            Val::Unbound => unreachable!("eval rejects unbound reads"),
        };
        let (name, _, len) = &self.prog.arrays[array];
        if i < 0 || i as u64 >= *len as u64 {
            let s = &self.prog.sites[site];
            return Err(Stop::Fault(Fault {
                site: s.span,
                access: match kind {
                    FaultKind::ReadOutOfBounds => s.text.clone(),
                    FaultKind::WriteOutOfBounds => {
                        s.text.split(" := ").next().unwrap_or_default().to_string()
                    }
                },
                array: name.clone(),
                index_value: i,
                size_value: *len as u64,
                kind,
            }));
        }
        Ok(())
    }

    fn eval(&mut self, e: &Ex, site: usize) -> Result<Val, Stop> {
        match e {
            Ex::Lit(v) => Ok(Val::Known(*v)),
            Ex::Var(slot) => match self.scalars[*slot] {
                Val::Unbound => Err(Stop::Error(ExecError::UnboundVariable {
                    name: self.prog.slot_names[*slot].clone(),
                    span: self.prog.sites[site].span,
                })),
                v => Ok(v),
            },
            Ex::Read {
                array,
                index,
                site: read_site,
            } => {
                let i = self.eval(index, *read_site)?;
                self.bounds(*array, i, *read_site, FaultKind::ReadOutOfBounds)?;
                Ok(Val::Unknown)
            }
            Ex::Bin(op, l, r) => {
                let l = self.eval(l, site)?;
                let r = self.eval(r, site)?;
                match (l, r) {
                    (Val::Known(l), Val::Known(r)) => arith(*op, l, r).map(Val::Known).ok_or_else(|| {
                        Stop::Error(ExecError::Overflow {
                            span: self.prog.sites[site].span,
                        })
                    }),
                    _ => Ok(Val::Unknown),
                }
            }
        }
    }

    fn test(&mut self, b: &Bx, site: usize) -> Result<bool, Stop> {
        Ok(match b {
            Bx::Lit(v) => *v,
            Bx::Cmp(op, l, r) => {
                let l = self.eval(l, site)?;
                let r = self.eval(r, site)?;
                match (l, r) {
                    (Val::Known(l), Val::Known(r)) => op.holds(l, r),
                    _ => self.choose(),
                }
            }
            Bx::And(l, r) => {
                let l = self.test(l, site)?;
                let r = self.test(r, site)?;
                l && r
            }
            Bx::Or(l, r) => {
                let l = self.test(l, site)?;
                let r = self.test(r, site)?;
                l || r
            }
            Bx::Not(x) => !self.test(x, site)?,
        })
    }

    fn known(&self, v: Val, site: usize, what: &str) -> Result<i64, Stop> {
        match v {
            Val::Known(v) => Ok(v),
            _ => Err(Stop::Unresolved(format!(
                "{what} of `{}` depends on array contents",
                self.prog.sites[site].text
            ))),
        }
    }

    fn exec(&mut self, st: &St) -> Result<(), Stop> {
        match st {
            St::Skip => Ok(()),
            St::Assign { slot, rhs, site } => {
                self.tick()?;
                let v = self.eval(rhs, *site)?;
                self.scalars[*slot] = v;
                self.note(*site, "");
                Ok(())
            }
            St::Write {
                array,
                index,
                rhs,
                site,
            } => {
                self.tick()?;
                let i = self.eval(index, *site)?;
                self.bounds(*array, i, *site, FaultKind::WriteOutOfBounds)?;
                self.eval(rhs, *site)?;
                self.note(*site, "");
                Ok(())
            }
            St::Access { array, index, site } => {
                self.tick()?;
                let i = self.eval(index, *site)?;
                self.bounds(*array, i, *site, FaultKind::ReadOutOfBounds)?;
                self.note(*site, "");
                Ok(())
            }
            St::Seq(cs) => cs.iter().try_for_each(|c| self.exec(c)),
            St::If {
                guard,
                then_branch,
                else_branch,
                site,
            } => {
                self.tick()?;
                let g = self.test(guard, *site)?;
                self.note(*site, if g { "then" } else { "else" });
                self.exec(if g { then_branch } else { else_branch })
            }
            St::For {
                slot,
                lower,
                upper,
                body,
                site,
            } => {
                self.tick()?;
                let lo = self.eval(lower, *site)?;
                let lo = self.known(lo, *site, "lower bound")?;
                let hi = self.eval(upper, *site)?;
                let hi = self.known(hi, *site, "upper bound")?;
                let saved = self.scalars[*slot];
                let mut i = lo;
                while i <= hi {
                    self.tick()?;
                    self.scalars[*slot] = Val::Known(i);
                    if self.trace.is_some() {
                        let name = self.prog.slot_names[*slot].clone();
                        self.note(*site, &format!("{name} = {i}"));
                    }
                    self.exec(body)?;
                    i += 1;
                }
                self.scalars[*slot] = saved;
                Ok(())
            }
            St::While { guard, body, site } => {
                let mut iterations = 0u64;
                loop {
                    self.tick()?;
                    let g = self.test(guard, *site)?;
                    self.note(*site, if g { "enter" } else { "exit" });
                    if !g {
                        return Ok(());
                    }
                    iterations += 1;
                    if iterations > self.opts.loop_cap {
                        return Err(Stop::LoopCap);
                    }
                    self.exec(body)?;
                }
            }
            St::Opaque { writes, site } => {
                self.tick()?;
                for w in writes {
                    self.scalars[*w] = Val::Unknown;
                }
                self.note(*site, "");
                Ok(())
            }
        }
    }
}

/// Checks one size assignment by exploring every outcome of every
/// comparison that depends on array contents or opaque outputs.
///
/// `executions_explored` counts the explored paths.
pub fn check_size_nondet(
    cmd: &Cmd,
    spec: &SafetySpec,
    sizes: &SizeAssignment,
    opts: &NondetOptions,
) -> Result<SizeVerdict, CheckError> {
    let prog = compile(cmd, spec, sizes)?;
    let mut prefix: Vec<bool> = Vec::new();
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
        let mut w = Walker::new(&prog, std::mem::take(&mut prefix), opts);
        let stop = w.exec(&prog.body);
        paths += 1;
        let inconclusive = |reason: String| {
            Ok(SizeVerdict::Inconclusive {
                sizes: sizes.clone(),
                reason,
            })
        };
        match stop {
            Ok(()) => {}
            Err(Stop::Fault(fault)) => {
                let outcomes = w.made.clone();
                let mut again = Walker::new(&prog, outcomes.clone(), opts);
                again.trace = Some(TraceBuf::new());
                let _ = again.exec(&prog.body);
                let mut buf = again.trace.take().expect("tracing enabled");
                buf.push(fault.site, format!("fault: {fault}"));
                let trace = buf.finish(
                    Terminal::Faulted { fault },
                    Some(Witness::Branches { outcomes }),
                );
                return Ok(SizeVerdict::Bug {
                    sizes: sizes.clone(),
                    trace,
                });
            }
            Err(Stop::LoopCap) => return inconclusive("loop cap".to_string()),
            Err(Stop::Budget) => {
                return inconclusive(format!("step budget of {} exceeded", opts.step_budget))
            }
            Err(Stop::Unresolved(why)) => return inconclusive(why),
            Err(Stop::Error(e)) => return inconclusive(e.to_string()),
        }
        let mut made = w.made;
        while made.last() == Some(&true) {
            made.pop();
        }
        match made.last_mut() {
            None => break,
            Some(last) => *last = true,
        }
        prefix = made;
    }
    Ok(SizeVerdict::Safe {
        sizes: sizes.clone(),
        executions_explored: paths as u128,
        paths_executed: paths,
    })
}
