//! Recursive descent parser for `.ct` sources.

use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    params: BTreeSet<Ident>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub(crate) fn new(source: &str) -> PResult<Self> {
        Ok(Parser {
            tokens: tokenize(source)?,
            pos: 0,
            params: BTreeSet::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Keyword(q) if *q == k)
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        Err(ParseError::Syntax {
            span: self.span(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.is_punct(p) {
            Ok(self.bump().span)
        } else {
            self.unexpected(&format!("`{p}`"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Span> {
        if self.is_kw(k) {
            Ok(self.bump().span)
        } else {
            self.unexpected(&format!("`{k}`"))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ident::new(name).map_err(|e| ParseError::WellFormed {
                    span,
                    message: e.to_string(),
                })
            }
            Tok::Keyword(k) => Err(ParseError::WellFormed {
                span: self.span(),
                message: format!("`{k}` is a reserved word and cannot be used as an identifier"),
            }),
            _ => self.unexpected("identifier"),
        }
    }

    fn ident_list(&mut self) -> PResult<Vec<(Ident, Span)>> {
        let mut out = Vec::new();
        if self.is_punct(")") {
            return Ok(out);
        }
        loop {
            let span = self.span();
            out.push((self.ident()?, span));
            if self.is_punct(",") {
                self.bump();
            } else {
                return Ok(out);
            }
        }
    }

    pub(crate) fn program(&mut self) -> PResult<Program> {
        let mut params = Vec::new();
        while self.is_kw("param") {
            self.bump();
            loop {
                let span = self.span();
                let p = self.ident()?;
                if !self.params.insert(p.clone()) {
                    return Err(ParseError::WellFormed {
                        span,
                        message: format!("duplicate param `{p}`"),
                    });
                }
                params.push(p);
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect_punct(";")?;
        }
        self.expect_kw("requires")?;
        let pre = self.assertion()?;
        self.expect_punct(";")?;
        let body = self.cmd(&["ensures"])?;
        let post_span = self.expect_kw("ensures")?;
        let post = self.assertion()?;
        if !matches!(self.peek(), Tok::Eof) {
            return self.unexpected("end of input");
        }
        if pre != post {
            return Err(ParseError::WellFormed {
                span: post_span,
                message: "postcondition must restate the precondition".into(),
            });
        }
        Ok(Program {
            params,
            spec: pre,
            body,
        })
    }

    fn assertion(&mut self) -> PResult<SafetySpec> {
        let mut spec = SafetySpec::default();
        loop {
            let span = self.span();
            let name = self.ident()?;
            if name.as_str() == "array" && self.is_punct("(") {
                self.bump();
                let array = self.ident()?;
                self.expect_punct(",")?;
                let size = self.ident()?;
                self.expect_punct(")")?;
                spec.arrays.push((array, size));
            } else if !spec.frames.insert(name.clone()) {
                return Err(ParseError::WellFormed {
                    span,
                    message: format!("frame `{name}` listed twice"),
                });
            }
            if self.is_punct("*") {
                self.bump();
            } else {
                return Ok(spec);
            }
        }
    }

    /// Parses `stmt (; stmt)*` up to one of the stop keywords or a `}`.
    fn cmd(&mut self, stop: &[&str]) -> PResult<Cmd> {
        let at_stop = |p: &Parser| p.is_punct("}") || stop.iter().any(|k| p.is_kw(k));
        let mut stmts = Vec::new();
        if at_stop(self) {
            return Ok(Cmd::Skip);
        }
        loop {
            stmts.push(self.stmt()?);
            if self.is_punct(";") {
                self.bump();
                if at_stop(self) {
                    break;
                }
            } else {
                break;
            }
        }
        Ok(Cmd::seq(stmts))
    }

    fn block(&mut self) -> PResult<Cmd> {
        self.expect_punct("{")?;
        let c = self.cmd(&[])?;
        self.expect_punct("}")?;
        Ok(c)
    }

    fn stmt(&mut self) -> PResult<Cmd> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Keyword("skip") => {
                self.bump();
                Ok(Cmd::Skip)
            }
            Tok::Keyword("if") => {
                self.bump();
                let guard = self.bexpr()?;
                self.expect_kw("then")?;
                let then_branch = self.block()?;
                let else_branch = if self.is_kw("else") {
                    self.bump();
                    self.block()?
                } else {
                    Cmd::Skip
                };
                Ok(Cmd::If {
                    guard,
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                    span,
                })
            }
            Tok::Keyword("for") => {
                self.bump();
                let iterator = self.ident()?;
                self.expect_kw("in")?;
                self.expect_punct("[")?;
                let lower = self.iexpr()?;
                self.expect_punct(":")?;
                let upper = self.iexpr()?;
                self.expect_punct("]")?;
                self.expect_kw("do")?;
                let body = self.block()?;
                Ok(Cmd::For {
                    iterator,
                    lower,
                    upper,
                    body: Box::new(body),
                    span,
                })
            }
            Tok::Keyword("while") => {
                self.bump();
                let guard = self.bexpr()?;
                self.expect_kw("do")?;
                let body = self.block()?;
                Ok(Cmd::While {
                    guard,
                    body: Box::new(body),
                    span,
                })
            }
            Tok::Keyword("opaque") => {
                self.bump();
                let label = self.ident()?;
                let mut clauses: [Option<BTreeSet<Ident>>; 3] = [None, None, None];
                while let Tok::Ident(word) = self.peek().clone() {
                    let slot = match word.as_str() {
                        "reads" => 0,
                        "writes" => 1,
                        "frames" => 2,
                        _ => break,
                    };
                    let clause_span = self.span();
                    self.bump();
                    if clauses[slot].is_some() {
                        return Err(ParseError::WellFormed {
                            span: clause_span,
                            message: format!("`{word}` clause given twice"),
                        });
                    }
                    self.expect_punct("(")?;
                    let items = self.ident_list()?;
                    self.expect_punct(")")?;
                    clauses[slot] = Some(items.into_iter().map(|(i, _)| i).collect());
                }
                let [reads, writes, frames] = clauses.map(Option::unwrap_or_default);
                Ok(Cmd::Opaque {
                    label,
                    reads,
                    writes,
                    frames,
                    span,
                })
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct(":=") {
                    self.bump();
                    if self.params.contains(&name) {
                        return Err(ParseError::WellFormed {
                            span,
                            message: format!("param `{name}` assigned"),
                        });
                    }
                    let rhs = self.iexpr()?;
                    Ok(Cmd::Assign {
                        target: name,
                        rhs,
                        span,
                    })
                } else if self.is_punct("[") {
                    self.bump();
                    let index = self.iexpr()?;
                    self.expect_punct("]")?;
                    if self.is_punct(":=") {
                        self.bump();
                        let rhs = self.iexpr()?;
                        Ok(Cmd::Write {
                            array: name,
                            index,
                            rhs,
                            span,
                        })
                    } else {
                        Ok(Cmd::Access {
                            array: name,
                            index,
                            span,
                        })
                    }
                } else {
                    self.unexpected("`:=` or `[`")
                }
            }
            _ => self.unexpected("statement"),
        }
    }

    fn iexpr(&mut self) -> PResult<IntExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_punct("+") {
                BinOp::Add
            } else if self.is_punct("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term()?;
            lhs = IntExpr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> PResult<IntExpr> {
        let mut lhs = self.unary()?;
        while self.is_punct("*") {
            self.bump();
            let rhs = self.unary()?;
            lhs = IntExpr::bin(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<IntExpr> {
        if self.is_punct("-") {
            self.bump();
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                return Ok(IntExpr::Lit(-v));
            }
            let inner = self.unary()?;
            return Ok(IntExpr::bin(BinOp::Sub, IntExpr::Lit(0), inner));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<IntExpr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(IntExpr::Lit(v))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.iexpr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(_) | Tok::Keyword(_) => {
                let name = self.ident()?;
                if self.is_punct("[") {
                    self.bump();
                    let index = self.iexpr()?;
                    self.expect_punct("]")?;
                    Ok(IntExpr::Read {
                        array: name,
                        index: Box::new(index),
                        span,
                    })
                } else if self.params.contains(&name) {
                    Ok(IntExpr::Param(name))
                } else {
                    Ok(IntExpr::Var(name))
                }
            }
            _ => self.unexpected("integer expression"),
        }
    }

    fn bexpr(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.band()?;
        while self.is_punct("||") {
            self.bump();
            let rhs = self.band()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn band(&mut self) -> PResult<BoolExpr> {
        let mut lhs = self.bnot()?;
        while self.is_punct("&&") {
            self.bump();
            let rhs = self.bnot()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bnot(&mut self) -> PResult<BoolExpr> {
        if self.is_punct("!") {
            self.bump();
            return Ok(BoolExpr::Not(Box::new(self.bnot()?)));
        }
        self.batom()
    }

    fn batom(&mut self) -> PResult<BoolExpr> {
        if self.is_kw("true") {
            self.bump();
            return Ok(BoolExpr::Lit(true));
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(BoolExpr::Lit(false));
        }
        if self.is_punct("(") {
            // A parenthesis may open either a boolean group or the left
            // operand of a comparison; try the boolean reading first.
            let saved = self.pos;
            self.bump();
            if let Ok(b) = self.bexpr() {
                if self.is_punct(")") {
                    self.bump();
                    let continues_int = matches!(
                        self.peek(),
                        Tok::Punct("+" | "-" | "*" | "<" | "<=" | ">" | ">=" | "==" | "!=")
                    );
                    if !continues_int {
                        return Ok(b);
                    }
                }
            }
            self.pos = saved;
        }
        let lhs = self.iexpr()?;
        let op = match self.peek() {
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct(">=") => CmpOp::Ge,
            Tok::Punct("==") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Ne,
            _ => return self.unexpected("comparison operator"),
        };
        self.bump();
        let rhs = self.iexpr()?;
        Ok(BoolExpr::Cmp(op, lhs, rhs))
    }
}
