//! Canonical text form. Sequencing prints flat; `else { skip }` is omitted.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    if !p.params.is_empty() {
        let names: Vec<&str> = p.params.iter().map(Ident::as_str).collect();
        let _ = writeln!(out, "param {};", names.join(", "));
    }
    let _ = writeln!(out, "requires {};", print_spec(&p.spec));
    print_block_body(&p.body, 0, &mut out);
    out.push('\n');
    let _ = writeln!(out, "ensures {}", print_spec(&p.spec));
    out
}

pub fn print_spec(spec: &SafetySpec) -> String {
    let mut parts: Vec<String> = spec
        .arrays
        .iter()
        .map(|(a, s)| format!("array({a}, {s})"))
        .collect();
    parts.extend(spec.frames.iter().map(Ident::to_string));
    parts.join(" * ")
}

/// Prints a command without the surrounding `requires`/`ensures` lines.
pub fn print_cmd(cmd: &Cmd) -> String {
    let mut out = String::new();
    print_block_body(cmd, 0, &mut out);
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn flatten<'a>(cmd: &'a Cmd, out: &mut Vec<&'a Cmd>) {
    match cmd {
        Cmd::Skip => {}
        Cmd::Seq(cs) => cs.iter().for_each(|c| flatten(c, out)),
        other => out.push(other),
    }
}

fn print_block_body(cmd: &Cmd, level: usize, out: &mut String) {
    let mut stmts = Vec::new();
    flatten(cmd, &mut stmts);
    if stmts.is_empty() {
        indent(level, out);
        out.push_str("skip");
        return;
    }
    for (k, s) in stmts.iter().enumerate() {
        if k > 0 {
            out.push_str(";\n");
        }
        indent(level, out);
        print_stmt(s, level, out);
    }
}

fn print_block(cmd: &Cmd, level: usize, out: &mut String) {
    out.push_str("{\n");
    print_block_body(cmd, level + 1, out);
    out.push('\n');
    indent(level, out);
    out.push('}');
}

fn print_stmt(cmd: &Cmd, level: usize, out: &mut String) {
    match cmd {
        Cmd::Skip => out.push_str("skip"),
        Cmd::Assign { target, rhs, .. } => {
            let _ = write!(out, "{target} := {}", print_int(rhs));
        }
        Cmd::Write {
            array, index, rhs, ..
        } => {
            let _ = write!(out, "{array}[{}] := {}", print_int(index), print_int(rhs));
        }
        Cmd::Access { array, index, .. } => {
            let _ = write!(out, "{array}[{}]", print_int(index));
        }
        Cmd::Seq(_) => unreachable!("sequences are flattened before printing"),
        Cmd::If {
            guard,
            then_branch,
            else_branch,
            ..
        } => {
            let _ = write!(out, "if {} then ", print_bool(guard));
            print_block(then_branch, level, out);
            if **else_branch != Cmd::Skip {
                out.push_str(" else ");
                print_block(else_branch, level, out);
            }
        }
        Cmd::For {
            iterator,
            lower,
            upper,
            body,
            ..
        } => {
            let _ = write!(
                out,
                "for {iterator} in [{} : {}] do ",
                print_int(lower),
                print_int(upper)
            );
            print_block(body, level, out);
        }
        Cmd::While { guard, body, .. } => {
            let _ = write!(out, "while {} do ", print_bool(guard));
            print_block(body, level, out);
        }
        Cmd::Opaque {
            label,
            reads,
            writes,
            frames,
            ..
        } => {
            let _ = write!(out, "opaque {label}");
            for (kw, set) in [("reads", reads), ("writes", writes), ("frames", frames)] {
                if !set.is_empty() {
                    let names: Vec<&str> = set.iter().map(Ident::as_str).collect();
                    let _ = write!(out, " {kw}({})", names.join(", "));
                }
            }
        }
    }
}

const ATOM_PREC: u8 = 3;

fn int_prec(e: &IntExpr) -> u8 {
    match e {
        IntExpr::Bin(op, _, _) => op.precedence(),
        _ => ATOM_PREC,
    }
}

pub fn print_int(e: &IntExpr) -> String {
    let mut out = String::new();
    write_int(e, &mut out);
    out
}

fn write_int(e: &IntExpr, out: &mut String) {
    match e {
        IntExpr::Lit(v) => {
            let _ = write!(out, "{v}");
        }
        IntExpr::Var(v) | IntExpr::Param(v) => out.push_str(v.as_str()),
        IntExpr::Read { array, index, .. } => {
            let _ = write!(out, "{array}[");
            write_int(index, out);
            out.push(']');
        }
        IntExpr::Bin(op, l, r) => {
            let p = op.precedence();
            write_wrapped(l, int_prec(l) < p, out);
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(r, int_prec(r) <= p, out);
        }
    }
}

fn write_wrapped(e: &IntExpr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_int(e, out);
        out.push(')');
    } else {
        write_int(e, out);
    }
}

fn bool_prec(b: &BoolExpr) -> u8 {
    match b {
        BoolExpr::Or(..) => 1,
        BoolExpr::And(..) => 2,
        BoolExpr::Not(..) => 3,
        BoolExpr::Cmp(..) | BoolExpr::Lit(_) => 4,
    }
}

pub fn print_bool(b: &BoolExpr) -> String {
    let mut out = String::new();
    write_bool(b, &mut out);
    out
}

fn write_bool(b: &BoolExpr, out: &mut String) {
    match b {
        BoolExpr::Lit(v) => out.push_str(if *v { "true" } else { "false" }),
        BoolExpr::Cmp(op, l, r) => {
            write_int(l, out);
            let _ = write!(out, " {} ", op.symbol());
            write_int(r, out);
        }
        BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
            let (p, sym) = if matches!(b, BoolExpr::And(..)) {
                (2, "&&")
            } else {
                (1, "||")
            };
            write_bool_wrapped(l, bool_prec(l) < p, out);
            let _ = write!(out, " {sym} ");
            write_bool_wrapped(r, bool_prec(r) <= p, out);
        }
        BoolExpr::Not(inner) => {
            out.push('!');
            let wrap = !matches!(**inner, BoolExpr::Lit(_) | BoolExpr::Not(_));
            write_bool_wrapped(inner, wrap, out);
        }
    }
}

fn write_bool_wrapped(b: &BoolExpr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_bool(b, out);
        out.push(')');
    } else {
        write_bool(b, out);
    }
}
