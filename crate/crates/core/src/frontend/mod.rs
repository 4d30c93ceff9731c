//! Concrete syntax, AST, parameters, and well-formedness for `.ct` programs.
//!
//! ```text
//! param B, L, R, Y;
//! requires array(a, s);
//! if s > B then {
//!   for i in [L : s - R] do { ... };
//!   a[Y]
//! }
//! ensures array(a, s)
//! ```

mod ast;
mod lexer;
mod parser;
mod printer;
mod wf;

use std::collections::BTreeSet;

pub use ast::*;
pub use printer::{print_bool, print_cmd, print_int, print_program, print_spec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{span}: lexical error: {message}")]
    Lex { span: Span, message: String },
    #[error("{span}: syntax error: expected {expected}, found {found}")]
    Syntax {
        span: Span,
        expected: String,
        found: String,
    },
    #[error("{span}: {message}")]
    WellFormed { span: Span, message: String },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Lex { span, .. }
            | ParseError::Syntax { span, .. }
            | ParseError::WellFormed { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindError {
    #[error("unbound param {0}")]
    Unbound(Ident),
    #[error("param {name} bound to negative value {value}")]
    Negative { name: Ident, value: i64 },
}

/// Parses and checks a complete source file.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let program = parser::Parser::new(source)?.program()?;
    wf::check_program(&program)?;
    Ok(program)
}

pub fn pretty_print(program: &Program) -> String {
    print_program(program)
}

pub fn collect_params(cmd: &Cmd) -> BTreeSet<Ident> {
    cmd.collect_params()
}

/// Replaces every param leaf by its bound value.
pub fn bind_params(cmd: &Cmd, binding: &ParamBinding) -> Result<Cmd, BindError> {
    if let Some(missing) = cmd
        .collect_params()
        .into_iter()
        .find(|p| binding.get(p).is_none())
    {
        return Err(BindError::Unbound(missing));
    }
    Ok(map_ints(cmd, &mut |e| {
        e.map_leaves(&mut |leaf| match leaf {
            IntExpr::Param(p) => Some(IntExpr::Lit(binding.get(p).unwrap() as i64)),
            _ => None,
        })
    }))
}

/// Binds a whole program, checking that every declared param has a value.
pub fn bind_program(program: &Program, binding: &ParamBinding) -> Result<Program, BindError> {
    if let Some(missing) = program.params.iter().find(|p| binding.get(p).is_none()) {
        return Err(BindError::Unbound(missing.clone()));
    }
    Ok(Program {
        params: Vec::new(),
        spec: program.spec.clone(),
        body: bind_params(&program.body, binding)?,
    })
}

/// Rebuilds a command with every owned integer expression transformed.
pub fn map_ints(cmd: &Cmd, f: &mut impl FnMut(&IntExpr) -> IntExpr) -> Cmd {
    match cmd {
        Cmd::Skip => Cmd::Skip,
        Cmd::Assign { target, rhs, span } => Cmd::Assign {
            target: target.clone(),
            rhs: f(rhs),
            span: *span,
        },
        Cmd::Write {
            array,
            index,
            rhs,
            span,
        } => Cmd::Write {
            array: array.clone(),
            index: f(index),
            rhs: f(rhs),
            span: *span,
        },
        Cmd::Access { array, index, span } => Cmd::Access {
            array: array.clone(),
            index: f(index),
            span: *span,
        },
        Cmd::Seq(cs) => Cmd::seq(cs.iter().map(|c| map_ints(c, f))),
        Cmd::If {
            guard,
            then_branch,
            else_branch,
            span,
        } => Cmd::If {
            guard: guard.map_ints(f),
            then_branch: Box::new(map_ints(then_branch, f)),
            else_branch: Box::new(map_ints(else_branch, f)),
            span: *span,
        },
        Cmd::For {
            iterator,
            lower,
            upper,
            body,
            span,
        } => Cmd::For {
            iterator: iterator.clone(),
            lower: f(lower),
            upper: f(upper),
            body: Box::new(map_ints(body, f)),
            span: *span,
        },
        Cmd::While { guard, body, span } => Cmd::While {
            guard: guard.map_ints(f),
            body: Box::new(map_ints(body, f)),
            span: *span,
        },
        Cmd::Opaque { .. } => cmd.clone(),
    }
}

/// Substitutes a literal for every occurrence of `var`.
pub fn substitute_var(cmd: &Cmd, var: &Ident, value: i64) -> Cmd {
    map_ints(cmd, &mut |e| {
        e.map_leaves(&mut |leaf| match leaf {
            IntExpr::Var(v) if v == var => Some(IntExpr::Lit(value)),
            _ => None,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = include_str!("../../../../corpus/fig2.ct");

    fn id(s: &str) -> Ident {
        Ident::new(s).unwrap()
    }

    #[test]
    fn parses_reduced_example_loop_shape() {
        let p = parse(FIG2).unwrap();
        assert_eq!(p.params, vec![id("B"), id("L"), id("R"), id("Y")]);
        assert_eq!(p.spec.arrays, vec![(id("a"), id("s"))]);
        let Cmd::If { then_branch, .. } = &p.body else {
            panic!("expected conditional, got {:?}", p.body)
        };
        let Cmd::For {
            lower, upper, body, ..
        } = &then_branch.stmts()[0]
        else {
            panic!("expected loop")
        };
        assert_eq!(*lower, IntExpr::param("L"));
        assert_eq!(
            *upper,
            IntExpr::bin(BinOp::Sub, IntExpr::var("s"), IntExpr::param("R"))
        );
        let Cmd::If { guard, .. } = &**body else {
            panic!("expected swap guard")
        };
        let a = id("a");
        let i = IntExpr::var("i");
        assert_eq!(
            *guard,
            BoolExpr::cmp(
                CmpOp::Lt,
                IntExpr::read(&a, IntExpr::bin(BinOp::Add, i.clone(), IntExpr::Lit(1))),
                IntExpr::read(&a, i),
            )
        );
    }

    #[test]
    fn smallest_program() {
        let p = parse("requires array(a,s); skip ensures array(a,s)").unwrap();
        assert_eq!(p.body, Cmd::Skip);
        assert_eq!(p.spec.arrays, vec![(id("a"), id("s"))]);
        assert!(p.params.is_empty());
    }

    #[test]
    fn size_variable_assignment_is_rejected() {
        let e = parse("requires array(a,s); s := 1 ensures array(a,s)").unwrap_err();
        assert!(e.to_string().contains("size variable assigned"), "{e}");
    }

    #[test]
    fn reserved_words_and_duplicates_are_rejected() {
        let e = parse("param B, B; requires array(a,s); skip ensures array(a,s)").unwrap_err();
        assert!(e.to_string().contains("duplicate param"), "{e}");
        let e = parse("requires array(a,s); while := 1 ensures array(a,s)").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { .. } | ParseError::WellFormed { .. }));
        let e = parse("requires array(a,s); do := 1 ensures array(a,s)").unwrap_err();
        assert!(e.to_string().contains("expected statement"), "{e}");
    }

    #[test]
    fn undeclared_names_are_rejected() {
        let e = parse("requires array(a,s); b[0] ensures array(a,s)").unwrap_err();
        assert!(e.to_string().contains("undeclared array"), "{e}");
        let e = parse("requires array(a,s); opaque f frames(G) ensures array(a,s)").unwrap_err();
        assert!(e.to_string().contains("undeclared frame"), "{e}");
        let e = parse("requires array(a,s) * F; skip ensures array(a,s)").unwrap_err();
        assert!(e.to_string().contains("restate"), "{e}");
    }

    #[test]
    fn opaque_blocks_may_not_touch_the_array() {
        let e = parse("requires array(a,s); opaque f reads(s) ensures array(a,s)").unwrap_err();
        assert!(e.to_string().contains("analyzed name"), "{e}");
    }

    #[test]
    fn iterator_rules() {
        let src = "requires array(a,s); for i in [0 : 3] do { i := 2 } ensures array(a,s)";
        assert!(parse(src).unwrap_err().to_string().contains("iterator"));
        let src = "requires array(a,s); for i in [0 : 3] do { for i in [0 : 1] do { skip } } \
                   ensures array(a,s)";
        assert!(parse(src).unwrap_err().to_string().contains("shadows"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse("requires array(a,s);\n  x := ( 1 ensures array(a,s)").unwrap_err();
        assert_eq!(e.span(), Span::new(2, 12));
        assert!(matches!(e, ParseError::Syntax { .. }));
    }

    #[test]
    fn skip_prints_as_skip() {
        assert_eq!(print_cmd(&Cmd::Skip), "skip");
    }

    #[test]
    fn sequencing_prints_flat() {
        let c = |n: i64| Cmd::Assign {
            target: id("x"),
            rhs: IntExpr::Lit(n),
            span: Span::default(),
        };
        let left = Cmd::seq([Cmd::seq([c(1), c(2)]), c(3)]);
        let right = Cmd::seq([c(1), Cmd::seq([c(2), c(3)])]);
        assert_eq!(print_cmd(&left), print_cmd(&right));
        assert_eq!(print_cmd(&left), "x := 1;\nx := 2;\nx := 3");
    }

    #[test]
    fn corpus_file_is_already_canonical() {
        let p = parse(FIG2).unwrap();
        let strip = |s: &str| -> String {
            s.lines()
                .map(|l| l.split("//").next().unwrap())
                .collect::<String>()
                .split_whitespace()
                .collect()
        };
        assert_eq!(strip(&pretty_print(&p)), strip(FIG2));
        assert_eq!(parse(&pretty_print(&p)).unwrap(), p);
    }

    #[test]
    fn else_less_conditional_is_sugar() {
        let a = parse("requires array(a,s); if s > 1 then { a[0] } ensures array(a,s)").unwrap();
        let b = parse("requires array(a,s); if s > 1 then { a[0] } else { skip } ensures array(a,s)")
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn expression_printing_round_trips() {
        let src = "requires array(a,s); x := (1 - (2 - 3)) * -4 + -x * 2; \
                   if !(x < 1) && (x > 2 || (x + 1) * 2 == 3) then { skip } ensures array(a,s)";
        let p = parse(src).unwrap();
        let again = parse(&pretty_print(&p)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn binding_replaces_all_params() {
        let p = parse(FIG2).unwrap();
        let b = ParamBinding::new()
            .with("B", 1)
            .with("L", 0)
            .with("R", 2)
            .with("Y", 0);
        let bound = bind_params(&p.body, &b).unwrap();
        assert!(collect_params(&bound).is_empty());
        let text = print_cmd(&bound);
        assert!(text.starts_with("if s > 1 then {"), "{text}");
        assert!(text.contains("for i in [0 : s - 2] do"), "{text}");
        assert!(text.contains("\n  a[0]\n}"), "{text}");
    }

    #[test]
    fn binding_skip_is_skip() {
        let b = ParamBinding::new().with("B", 3);
        assert_eq!(bind_params(&Cmd::Skip, &b).unwrap(), Cmd::Skip);
    }

    #[test]
    fn binding_reports_missing_param() {
        let p = parse(FIG2).unwrap();
        let b = ParamBinding::new().with("B", 1).with("L", 0).with("R", 2);
        let e = bind_params(&p.body, &b).unwrap_err();
        assert_eq!(e.to_string(), "unbound param Y");
    }

    #[test]
    fn negative_binding_is_rejected() {
        let mut b = ParamBinding::new();
        let e = b.set(id("B"), -1).unwrap_err();
        assert!(matches!(e, BindError::Negative { value: -1, .. }));
    }
}
