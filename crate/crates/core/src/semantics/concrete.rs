//! Big-step interpreter over integers with lazily supplied inputs.

use crate::frontend::{Cmd, CmpOp, SafetySpec};

use super::ir::{arith, compile, Bx, Compiled, Ex, St};
use super::{
    ExecError, Execution, Fault, FaultKind, Stop, Store, Terminal, TraceBuf, Witness,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scalar {
    Unbound,
    Val(i64),
    /// Written by an opaque block; the value is chosen on first read.
    Havoc,
}

/// Supplies initial cell contents and opaque-block outputs on demand.
pub(crate) trait Source {
    fn cell(&mut self, array: usize, index: usize) -> i64;
    fn havoc(&mut self) -> i64;
}

pub(crate) struct Machine<'a, S> {
    pub prog: &'a Compiled,
    pub scalars: Vec<Scalar>,
    pub cells: Vec<Vec<Option<i64>>>,
    pub source: S,
    pub steps: u64,
    budget: u64,
    pub havoc_created: u64,
    pub trace: Option<TraceBuf>,
}

impl<'a, S: Source> Machine<'a, S> {
    pub fn new(prog: &'a Compiled, source: S, budget: u64) -> Self {
        let mut scalars = vec![Scalar::Unbound; prog.slot_names.len()];
        for (slot, v) in &prog.size_slots {
            scalars[*slot] = Scalar::Val(*v);
        }
        let cells = prog.arrays.iter().map(|(_, _, n)| vec![None; *n]).collect();
        Machine {
            prog,
            scalars,
            cells,
            source,
            steps: 0,
            budget,
            havoc_created: 0,
            trace: None,
        }
    }

    pub fn run(&mut self) -> Result<(), Stop> {
        let body = &self.prog.body;
        self.exec(body)
    }

    fn tick(&mut self) -> Result<(), Stop> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Stop::Budget)
        } else {
            Ok(())
        }
    }

    fn note(&mut self, site: usize, event: impl FnOnce() -> String) {
        if let Some(t) = &mut self.trace {
            let s = &self.prog.sites[site];
            let text = event();
            let line = if text.is_empty() {
                s.text.clone()
            } else {
                format!("{}  ({text})", s.text)
            };
            t.push(s.span, line);
        }
    }

    fn check_bounds(&self, array: usize, index: i64, site: usize, kind: FaultKind) -> Result<usize, Stop> {
        let (name, _, len) = &self.prog.arrays[array];
        if index < 0 || index as u64 >= *len as u64 {
            let s = &self.prog.sites[site];
            return Err(Stop::Fault(Fault {
                site: s.span,
                access: match kind {
                    FaultKind::ReadOutOfBounds => s.text.clone(),
                    FaultKind::WriteOutOfBounds => s.text.split(" := ").next().unwrap_or_default().to_string(),
                },
                array: name.clone(),
                index_value: index,
                size_value: *len as u64,
                kind,
            }));
        }
        Ok(index as usize)
    }

    fn read_cell(&mut self, array: usize, idx: usize) -> i64 {
        match self.cells[array][idx] {
            Some(v) => v,
            None => {
                let v = self.source.cell(array, idx);
                self.cells[array][idx] = Some(v);
                v
            }
        }
    }

    fn eval(&mut self, e: &Ex, site: usize) -> Result<i64, Stop> {
        match e {
            Ex::Lit(v) => Ok(*v),
            Ex::Var(slot) => match self.scalars[*slot] {
                Scalar::Val(v) => Ok(v),
                Scalar::Havoc => {
                    let v = self.source.havoc();
                    self.scalars[*slot] = Scalar::Val(v);
                    Ok(v)
                }
                Scalar::Unbound => Err(Stop::Error(ExecError::UnboundVariable {
                    name: self.prog.slot_names[*slot].clone(),
                    span: self.prog.sites[site].span,
                })),
            },
            Ex::Read {
                array,
                index,
                site: read_site,
            } => {
                let i = self.eval(index, *read_site)?;
                let i = self.check_bounds(*array, i, *read_site, FaultKind::ReadOutOfBounds)?;
                Ok(self.read_cell(*array, i))
            }
            Ex::Bin(op, l, r) => {
                let l = self.eval(l, site)?;
                let r = self.eval(r, site)?;
                arith(*op, l, r).ok_or_else(|| {
                    Stop::Error(ExecError::Overflow {
                        span: self.prog.sites[site].span,
                    })
                })
            }
        }
    }

    fn test(&mut self, b: &Bx, site: usize) -> Result<bool, Stop> {
        Ok(match b {
            Bx::Lit(v) => *v,
            Bx::Cmp(op, l, r) => {
                let l = self.eval(l, site)?;
                let r = self.eval(r, site)?;
                cmp(*op, l, r)
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

    fn exec(&mut self, st: &'a St) -> Result<(), Stop> {
        match st {
            St::Skip => Ok(()),
            St::Assign { slot, rhs, site } => {
                self.tick()?;
                let v = self.eval(rhs, *site)?;
                self.scalars[*slot] = Scalar::Val(v);
                let name = &self.prog.slot_names[*slot];
                self.note(*site, || format!("{name} = {v}"));
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
                let i = self.check_bounds(*array, i, *site, FaultKind::WriteOutOfBounds)?;
                let v = self.eval(rhs, *site)?;
                self.cells[*array][i] = Some(v);
                let name = &self.prog.arrays[*array].0;
                self.note(*site, || format!("{name}[{i}] = {v}"));
                Ok(())
            }
            St::Access { array, index, site } => {
                self.tick()?;
                let i = self.eval(index, *site)?;
                let i = self.check_bounds(*array, i, *site, FaultKind::ReadOutOfBounds)?;
                let v = self.read_cell(*array, i);
                let name = &self.prog.arrays[*array].0;
                self.note(*site, || format!("{name}[{i}] = {v}"));
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
                self.note(*site, || if g { "then" } else { "else" }.to_string());
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
                let hi = self.eval(upper, *site)?;
                let saved = self.scalars[*slot];
                let name = &self.prog.slot_names[*slot];
                let mut i = lo;
                while i <= hi {
                    self.tick()?;
                    self.scalars[*slot] = Scalar::Val(i);
                    self.note(*site, || format!("{name} = {i}"));
                    self.exec(body)?;
                    i += 1;
                }
                if hi < lo {
                    self.note(*site, || "no iterations".to_string());
                }
                self.scalars[*slot] = saved;
                Ok(())
            }
            St::While { guard, body, site } => loop {
                self.tick()?;
                let g = self.test(guard, *site)?;
                self.note(*site, || if g { "enter" } else { "exit" }.to_string());
                if !g {
                    return Ok(());
                }
                self.exec(body)?;
            },
            St::Opaque { writes, site } => {
                self.tick()?;
                for w in writes {
                    self.scalars[*w] = Scalar::Havoc;
                    self.havoc_created += 1;
                }
                self.note(*site, String::new);
                Ok(())
            }
        }
    }
}

pub(crate) fn cmp(op: CmpOp, l: i64, r: i64) -> bool {
    op.holds(l, r)
}

/// Replays fixed inputs: full arrays and a havoc list.
pub(crate) struct Fixed {
    pub arrays: Vec<Vec<i64>>,
    pub havoc: Vec<i64>,
    pub next: usize,
    pub default: i64,
}

impl Source for Fixed {
    fn cell(&mut self, array: usize, index: usize) -> i64 {
        self.arrays[array][index]
    }

    fn havoc(&mut self) -> i64 {
        let v = self.havoc.get(self.next).copied().unwrap_or(self.default);
        self.next += 1;
        v
    }
}

pub(crate) fn terminal_of(stop: Result<(), Stop>) -> Result<Terminal, ExecError> {
    match stop {
        Ok(()) => Ok(Terminal::Completed),
        Err(Stop::Fault(fault)) => Ok(Terminal::Faulted { fault }),
        Err(Stop::Budget) | Err(Stop::LoopCap) => Ok(Terminal::BudgetExceeded),
        Err(Stop::Unresolved(_)) => Ok(Terminal::BudgetExceeded),
        Err(Stop::Error(e)) => Err(e),
    }
}

/// Runs a fixed valuation with tracing on.
pub(crate) fn replay<'p>(
    prog: &'p Compiled,
    scalars: &[(usize, i64)],
    arrays: Vec<Vec<i64>>,
    havoc: Vec<i64>,
    default: i64,
    budget: u64,
) -> Result<(Machine<'p, Fixed>, Terminal), ExecError> {
    let mut m = Machine::new(
        prog,
        Fixed {
            arrays,
            havoc,
            next: 0,
            default,
        },
        budget,
    );
    for (slot, v) in scalars {
        m.scalars[*slot] = Scalar::Val(*v);
    }
    m.trace = Some(TraceBuf::new());
    let stop = m.run();
    if let Err(Stop::Fault(f)) = &stop {
        let f = f.clone();
        if let Some(t) = &mut m.trace {
            t.push(f.site, format!("fault: {f}"));
        }
    }
    let terminal = terminal_of(stop)?;
    Ok((m, terminal))
}

pub(crate) fn run(
    cmd: &Cmd,
    spec: &SafetySpec,
    store: Store,
    havoc: &[i64],
    budget: u64,
) -> Result<Execution, ExecError> {
    let sizes = store.sizes(spec);
    let prog = compile(cmd, spec, &sizes)?;
    let mut arrays = Vec::new();
    for (a, s, n) in &prog.arrays {
        let cells = store.arrays.get(a).cloned().unwrap_or_default();
        if cells.len() != *n {
            return Err(ExecError::LengthMismatch {
                array: a.clone(),
                size: s.clone(),
                expected: *n as u64,
                actual: cells.len(),
            });
        }
        arrays.push(cells);
    }
    let initial: Vec<Vec<i64>> = arrays.clone();
    let scalars: Vec<(usize, i64)> = prog
        .slot_names
        .iter()
        .enumerate()
        .filter(|(slot, _)| !prog.size_slots.iter().any(|(s, _)| s == slot))
        .filter_map(|(slot, name)| store.scalars.get(name).map(|v| (slot, *v)))
        .collect();
    let (mut m, terminal) = replay(&prog, &scalars, arrays, havoc.to_vec(), 0, budget)?;
    let mut out = store;
    out.scalars.clear();
    for (slot, name) in prog.slot_names.iter().enumerate() {
        if prog.size_slots.iter().any(|(s, _)| *s == slot) {
            continue;
        }
        if let Scalar::Val(v) = m.scalars[slot] {
            out.scalars.insert(name.clone(), v);
        }
    }
    for ((a, _, _), (cells, init)) in prog.arrays.iter().zip(m.cells.iter().zip(&initial)) {
        let row: Vec<i64> = cells
            .iter()
            .zip(init)
            .map(|(c, i)| c.unwrap_or(*i))
            .collect();
        out.arrays.insert(a.clone(), row);
    }
    let arrays_map = prog
        .arrays
        .iter()
        .zip(initial)
        .map(|((a, _, _), v)| (a.clone(), v))
        .collect();
    let witness = Witness::Valuation {
        arrays: arrays_map,
        havoc: havoc.to_vec(),
    };
    let trace = m.trace.take().unwrap().finish(terminal, Some(witness));
    Ok(Execution { store: out, trace })
}
