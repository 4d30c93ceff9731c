//! Merged-state exploration of one size, used when value enumeration is too large.
//!
//! Cells and opaque outputs are `Unknown`; every other value is tracked
//! exactly. A comparison involving `Unknown` takes both branches. Revisited
//! states are pruned, so loops whose concrete state stays finite terminate.
//! The result over-approximates every concrete run: `Safe` means no
//! execution faults for any initial contents.

use std::collections::HashSet;

use crate::frontend::{Cmd, SafetySpec};
use crate::semantics::ir::{arith, compile, Bx, Compiled, Ex, Slot, St};
use crate::semantics::{CheckError, SizeAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Av {
    Unbound,
    Known(i64),
    Unknown,
}

#[derive(Debug, Clone)]
enum Ins {
    Assign {
        slot: Slot,
        rhs: Ex,
    },
    Write {
        array: usize,
        index: Ex,
        rhs: Ex,
        site: usize,
    },
    Access {
        array: usize,
        index: Ex,
        site: usize,
    },
    /// Falls through when the guard holds.
    Branch {
        guard: Bx,
        otherwise: usize,
    },
    Jump(usize),
    ForInit {
        slot: Slot,
        lower: Ex,
        upper: Ex,
        hi: Slot,
        saved: Slot,
        exit: usize,
    },
    ForNext {
        slot: Slot,
        hi: Slot,
        saved: Slot,
        body: usize,
    },
    Havoc(Vec<Slot>),
}

struct Flattener {
    code: Vec<Ins>,
    next_slot: usize,
}

impl Flattener {
    fn emit(&mut self, ins: Ins) -> usize {
        self.code.push(ins);
        self.code.len() - 1
    }

    fn st(&mut self, s: &St) {
        match s {
            St::Skip => {}
            St::Assign { slot, rhs, .. } => {
                self.emit(Ins::Assign {
                    slot: *slot,
                    rhs: rhs.clone(),
                });
            }
            St::Write {
                array,
                index,
                rhs,
                site,
            } => {
                self.emit(Ins::Write {
                    array: *array,
                    index: index.clone(),
                    rhs: rhs.clone(),
                    site: *site,
                });
            }
            St::Access { array, index, site } => {
                self.emit(Ins::Access {
                    array: *array,
                    index: index.clone(),
                    site: *site,
                });
            }
            St::Seq(ss) => ss.iter().for_each(|s| self.st(s)),
            St::If {
                guard,
                then_branch,
                else_branch,
                ..
            } => {
                let br = self.emit(Ins::Branch {
                    guard: guard.clone(),
                    otherwise: 0,
                });
                self.st(then_branch);
                let jump = self.emit(Ins::Jump(0));
                let else_pc = self.code.len();
                self.st(else_branch);
                let end = self.code.len();
                self.code[br] = Ins::Branch {
                    guard: guard.clone(),
                    otherwise: else_pc,
                };
                self.code[jump] = Ins::Jump(end);
            }
            St::For {
                slot,
                lower,
                upper,
                body,
                ..
            } => {
                let (hi, saved) = (self.next_slot, self.next_slot + 1);
                self.next_slot += 2;
                let init = self.emit(Ins::Jump(0));
                let body_pc = self.code.len();
                self.st(body);
                self.emit(Ins::ForNext {
                    slot: *slot,
                    hi,
                    saved,
                    body: body_pc,
                });
                let exit = self.code.len();
                self.code[init] = Ins::ForInit {
                    slot: *slot,
                    lower: lower.clone(),
                    upper: upper.clone(),
                    hi,
                    saved,
                    exit,
                };
            }
            St::While { guard, body, .. } => {
                let head = self.emit(Ins::Jump(0));
                self.st(body);
                self.emit(Ins::Jump(head));
                let end = self.code.len();
                self.code[head] = Ins::Branch {
                    guard: guard.clone(),
                    otherwise: end,
                };
            }
            St::Opaque { writes, .. } => {
                self.emit(Ins::Havoc(writes.clone()));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    pc: usize,
    scalars: Vec<Av>,
    cells: Vec<Vec<Av>>,
}

enum Halt {
    /// An access that is or may be out of bounds.
    Fault(String),
    GiveUp(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Explored {
    Safe { states: usize },
    /// Some abstract run reaches this access with an index that is or may be out of bounds.
    MaybeFault { access: String },
    GaveUp(String),
}

struct Ctx<'a> {
    prog: &'a Compiled,
}

impl Ctx<'_> {
    fn eval(&self, e: &Ex, st: &State) -> Result<Av, Halt> {
        Ok(match e {
            Ex::Lit(v) => Av::Known(*v),
            Ex::Var(s) => match st.scalars[*s] {
                Av::Unbound => {
                    return Err(Halt::GiveUp(format!(
                        "read of unbound variable {}",
                        self.prog.slot_names[*s]
                    )))
                }
                v => v,
            },
            Ex::Read { array, index, site } => {
                let i = self.eval(index, st)?;
                self.cell(*array, i, *site, st)?
            }
            Ex::Bin(op, l, r) => {
                let l = self.eval(l, st)?;
                let r = self.eval(r, st)?;
                match (l, r) {
                    (Av::Known(a), Av::Known(b)) => match arith(*op, a, b) {
                        Some(v) => Av::Known(v),
                        None => return Err(Halt::GiveUp("integer overflow".to_string())),
                    },
                    _ => Av::Unknown,
                }
            }
        })
    }

    fn in_bounds(&self, array: usize, i: Av, site: usize) -> Result<usize, Halt> {
        let n = self.prog.arrays[array].2;
        match i {
            Av::Known(v) if v >= 0 && (v as u64) < n as u64 => Ok(v as usize),
            _ => Err(Halt::Fault(self.prog.sites[site].text.clone())),
        }
    }

    fn cell(&self, array: usize, i: Av, site: usize, st: &State) -> Result<Av, Halt> {
        let k = self.in_bounds(array, i, site)?;
        Ok(st.cells[array][k])
    }

    /// Which truth values the guard can take.
    fn test(&self, b: &Bx, st: &State) -> Result<(bool, bool), Halt> {
        Ok(match b {
            Bx::Lit(v) => (*v, !*v),
            Bx::Cmp(op, l, r) => {
                let l = self.eval(l, st)?;
                let r = self.eval(r, st)?;
                match (l, r) {
                    (Av::Known(a), Av::Known(b)) => {
                        let v = op.holds(a, b);
                        (v, !v)
                    }
                    _ => (true, true),
                }
            }
            Bx::And(l, r) => {
                let (lt, lf) = self.test(l, st)?;
                let (rt, rf) = self.test(r, st)?;
                (lt && rt, lf || rf)
            }
            Bx::Or(l, r) => {
                let (lt, lf) = self.test(l, st)?;
                let (rt, rf) = self.test(r, st)?;
                (lt || rt, lf && rf)
            }
            Bx::Not(x) => {
                let (t, f) = self.test(x, st)?;
                (f, t)
            }
        })
    }

    fn known(&self, v: Av, what: &str) -> Result<i64, Halt> {
        match v {
            Av::Known(v) => Ok(v),
            _ => Err(Halt::GiveUp(format!("{what} depends on array contents"))),
        }
    }

    fn step(&self, code: &[Ins], mut st: State, out: &mut Vec<State>) -> Result<(), Halt> {
        let pc = st.pc;
        match &code[pc] {
            Ins::Assign { slot, rhs } => {
                st.scalars[*slot] = self.eval(rhs, &st)?;
                st.pc += 1;
                out.push(st);
            }
            Ins::Write {
                array,
                index,
                rhs,
                site,
            } => {
                let i = self.eval(index, &st)?;
                let k = self.in_bounds(*array, i, *site)?;
                st.cells[*array][k] = self.eval(rhs, &st)?;
                st.pc += 1;
                out.push(st);
            }
            Ins::Access { array, index, site } => {
                let i = self.eval(index, &st)?;
                self.cell(*array, i, *site, &st)?;
                st.pc += 1;
                out.push(st);
            }
            Ins::Branch { guard, otherwise } => {
                let (t, f) = self.test(guard, &st)?;
                if t && f {
                    let mut other = st.clone();
                    other.pc = *otherwise;
                    out.push(other);
                    st.pc += 1;
                    out.push(st);
                } else {
                    st.pc = if t { pc + 1 } else { *otherwise };
                    out.push(st);
                }
            }
            Ins::Jump(to) => {
                st.pc = *to;
                out.push(st);
            }
            Ins::ForInit {
                slot,
                lower,
                upper,
                hi,
                saved,
                exit,
            } => {
                let lo = self.eval(lower, &st)?;
                let lo = self.known(lo, "loop bound")?;
                let up = self.eval(upper, &st)?;
                let up = self.known(up, "loop bound")?;
                if lo > up {
                    st.pc = *exit;
                } else {
                    st.scalars[*saved] = st.scalars[*slot];
                    st.scalars[*hi] = Av::Known(up);
                    st.scalars[*slot] = Av::Known(lo);
                    st.pc += 1;
                }
                out.push(st);
            }
            Ins::ForNext {
                slot,
                hi,
                saved,
                body,
            } => {
                let (Av::Known(i), Av::Known(h)) = (st.scalars[*slot], st.scalars[*hi]) else {
                    unreachable!("iterators stay known")
                };
                if i < h {
                    st.scalars[*slot] = Av::Known(i + 1);
                    st.pc = *body;
                } else {
                    st.scalars[*slot] = st.scalars[*saved];
                    st.scalars[*saved] = Av::Unbound;
                    st.scalars[*hi] = Av::Unbound;
                    st.pc += 1;
                }
                out.push(st);
            }
            Ins::Havoc(slots) => {
                for s in slots {
                    st.scalars[*s] = Av::Unknown;
                }
                st.pc += 1;
                out.push(st);
            }
        }
        Ok(())
    }
}

/// Explores every abstract state reachable at `sizes`, up to `state_cap` distinct states.
pub(crate) fn explore(
    cmd: &Cmd,
    spec: &SafetySpec,
    sizes: &SizeAssignment,
    state_cap: usize,
) -> Result<Explored, CheckError> {
    let prog = compile(cmd, spec, sizes)?;
    let mut fl = Flattener {
        code: Vec::new(),
        next_slot: prog.slot_names.len(),
    };
    fl.st(&prog.body);
    let mut scalars = vec![Av::Unbound; fl.next_slot];
    for (slot, v) in &prog.size_slots {
        scalars[*slot] = Av::Known(*v);
    }
    let cells = prog
        .arrays
        .iter()
        .map(|(_, _, n)| vec![Av::Unknown; *n])
        .collect();
    let ctx = Ctx { prog: &prog };
    let code = fl.code;
    let start = State {
        pc: 0,
        scalars,
        cells,
    };
    let mut seen: HashSet<State> = HashSet::new();
    let mut stack = vec![start];
    let mut next = Vec::with_capacity(2);
    while let Some(st) = stack.pop() {
        if st.pc == code.len() || !seen.insert(st.clone()) {
            continue;
        }
        if seen.len() > state_cap {
            return Ok(Explored::GaveUp(format!("state cap of {state_cap} exceeded")));
        }
        match ctx.step(&code, st, &mut next) {
            Ok(()) => stack.append(&mut next),
            Err(Halt::Fault(access)) => return Ok(Explored::MaybeFault { access }),
            Err(Halt::GiveUp(reason)) => return Ok(Explored::GaveUp(reason)),
        }
    }
    Ok(Explored::Safe { states: seen.len() })
}
