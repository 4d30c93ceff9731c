//! Eager well-formedness checks run right after parsing.

use std::collections::BTreeSet;

use super::ast::*;
use super::ParseError;

struct Ctx<'a> {
    program: &'a Program,
    params: BTreeSet<Ident>,
    iterators: Vec<Ident>,
}

fn err(span: Span, message: impl Into<String>) -> ParseError {
    ParseError::WellFormed {
        span,
        message: message.into(),
    }
}

pub(crate) fn check_program(p: &Program) -> Result<(), ParseError> {
    let params = p.declared_params();
    let mut seen = BTreeSet::new();
    for (a, s) in &p.spec.arrays {
        for name in [a, s] {
            if !seen.insert(name.clone()) {
                return Err(err(
                    Span::default(),
                    format!("`{name}` appears twice in the layout assertion"),
                ));
            }
            if params.contains(name) {
                return Err(err(
                    Span::default(),
                    format!("`{name}` is declared both as param and in the layout assertion"),
                ));
            }
        }
    }
    for f in &p.spec.frames {
        if seen.contains(f) || params.contains(f) {
            return Err(err(Span::default(), format!("frame `{f}` clashes with another name")));
        }
    }
    let mut ctx = Ctx {
        program: p,
        params,
        iterators: Vec::new(),
    };
    ctx.cmd(&p.body)
}

impl Ctx<'_> {
    fn spec(&self) -> &SafetySpec {
        &self.program.spec
    }

    fn int(&self, e: &IntExpr, span: Span) -> Result<(), ParseError> {
        match e {
            IntExpr::Lit(_) | IntExpr::Param(_) => Ok(()),
            IntExpr::Var(v) => {
                if self.spec().is_array(v) {
                    Err(err(span, format!("array `{v}` used as a scalar")))
                } else if self.spec().frames.contains(v) {
                    Err(err(span, format!("frame `{v}` used as a scalar")))
                } else {
                    Ok(())
                }
            }
            IntExpr::Read {
                array,
                index,
                span: read_span,
            } => {
                self.array(array, *read_span)?;
                self.int(index, *read_span)
            }
            IntExpr::Bin(_, l, r) => {
                self.int(l, span)?;
                self.int(r, span)
            }
        }
    }

    fn boolean(&self, b: &BoolExpr, span: Span) -> Result<(), ParseError> {
        let mut result = Ok(());
        b.for_each_int(&mut |e| {
            if result.is_ok() {
                result = self.int(e, span);
            }
        });
        result
    }

    fn array(&self, array: &Ident, span: Span) -> Result<(), ParseError> {
        if self.spec().is_array(array) {
            Ok(())
        } else {
            Err(err(span, format!("access to undeclared array `{array}`")))
        }
    }

    fn assignable(&self, target: &Ident, span: Span) -> Result<(), ParseError> {
        if self.spec().is_size(target) {
            return Err(err(span, format!("size variable assigned: `{target}`")));
        }
        if self.spec().is_array(target) {
            return Err(err(span, format!("array `{target}` reassigned as a scalar")));
        }
        if self.params.contains(target) {
            return Err(err(span, format!("param `{target}` assigned")));
        }
        if self.spec().frames.contains(target) {
            return Err(err(span, format!("frame `{target}` assigned")));
        }
        if self.iterators.contains(target) {
            return Err(err(span, format!("loop iterator `{target}` assigned in its body")));
        }
        Ok(())
    }

    fn cmd(&mut self, c: &Cmd) -> Result<(), ParseError> {
        match c {
            Cmd::Skip => Ok(()),
            Cmd::Assign { target, rhs, span } => {
                self.assignable(target, *span)?;
                self.int(rhs, *span)
            }
            Cmd::Write {
                array,
                index,
                rhs,
                span,
            } => {
                self.array(array, *span)?;
                self.int(index, *span)?;
                self.int(rhs, *span)
            }
            Cmd::Access { array, index, span } => {
                self.array(array, *span)?;
                self.int(index, *span)
            }
            Cmd::Seq(cs) => cs.iter().try_for_each(|c| self.cmd(c)),
            Cmd::If {
                guard,
                then_branch,
                else_branch,
                span,
            } => {
                self.boolean(guard, *span)?;
                self.cmd(then_branch)?;
                self.cmd(else_branch)
            }
            Cmd::While { guard, body, span } => {
                self.boolean(guard, *span)?;
                self.cmd(body)
            }
            Cmd::For {
                iterator,
                lower,
                upper,
                body,
                span,
            } => {
                if self.iterators.contains(iterator) {
                    return Err(err(
                        *span,
                        format!("loop iterator `{iterator}` shadows an enclosing iterator"),
                    ));
                }
                if self.spec().is_array(iterator)
                    || self.spec().is_size(iterator)
                    || self.params.contains(iterator)
                    || self.spec().frames.contains(iterator)
                {
                    return Err(err(
                        *span,
                        format!("loop iterator `{iterator}` shadows a declared name"),
                    ));
                }
                self.int(lower, *span)?;
                self.int(upper, *span)?;
                self.iterators.push(iterator.clone());
                let r = self.cmd(body);
                self.iterators.pop();
                r
            }
            Cmd::Opaque {
                label,
                reads,
                writes,
                frames,
                span,
            } => {
                for v in reads.iter().chain(writes) {
                    if self.spec().is_array(v) || self.spec().is_size(v) {
                        return Err(err(
                            *span,
                            format!("opaque block `{label}` mentions analyzed name `{v}`"),
                        ));
                    }
                }
                for v in writes {
                    self.assignable(v, *span)?;
                }
                for f in frames {
                    if !self.spec().frames.contains(f) {
                        return Err(err(
                            *span,
                            format!("opaque block `{label}` uses undeclared frame `{f}`"),
                        ));
                    }
                }
                Ok(())
            }
        }
    }
}
