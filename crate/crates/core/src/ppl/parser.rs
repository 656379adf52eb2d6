use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{Ast, DistKind, PrimOp, Query};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn line(&self) -> usize {
        self.pos.line
    }

    pub fn col(&self) -> usize {
        self.pos.col
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    OpenBracket,
    CloseBracket,
    Number(f64),
    Symbol(String),
    Keyword(String),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Open => f.write_str("'('"),
            Tok::Close => f.write_str("')'"),
            Tok::OpenBracket => f.write_str("'['"),
            Tok::CloseBracket => f.write_str("']'"),
            Tok::Number(x) => write!(f, "number {x}"),
            Tok::Symbol(s) => write!(f, "'{s}'"),
            Tok::Keyword(k) => write!(f, "keyword ':{k}'"),
        }
    }
}

fn err(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError { pos, message: message.into() }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | ';' | ',')
}

fn looks_numeric(word: &str) -> bool {
    let body = word.strip_prefix(['-', '+']).unwrap_or(word);
    let body = body.strip_prefix('.').unwrap_or(body);
    body.starts_with(|c: char| c.is_ascii_digit())
}

/// Tokens, and the position just past the last one, where end-of-input
/// errors are reported.
fn lex(text: &str) -> Result<(Vec<(Tok, Pos)>, Pos), ParseError> {
    let mut toks = Vec::new();
    let mut end = Pos { line: 1, col: 1 };
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() || c == ',' {
            chars.next();
            col += 1;
            continue;
        }
        if c == ';' {
            while chars.peek().is_some_and(|&c| c != '\n') {
                chars.next();
            }
            continue;
        }
        let single = match c {
            '(' => Some(Tok::Open),
            ')' => Some(Tok::Close),
            '[' => Some(Tok::OpenBracket),
            ']' => Some(Tok::CloseBracket),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            col += 1;
            toks.push((tok, pos));
            end = Pos { line, col };
            continue;
        }
        let mut word = String::new();
        while let Some(&c) = chars.peek() {
            if is_delimiter(c) {
                break;
            }
            word.push(c);
            chars.next();
            col += 1;
        }
        let tok = if let Some(name) = word.strip_prefix(':') {
            if name.is_empty() {
                return Err(err(pos, "empty keyword"));
            }
            Tok::Keyword(name.to_string())
        } else if looks_numeric(&word) {
            let x: f64 = word.parse().map_err(|_| err(pos, format!("malformed number '{word}'")))?;
            Tok::Number(x)
        } else {
            Tok::Symbol(word)
        };
        toks.push((tok, pos));
        end = Pos { line, col };
    }
    Ok((toks, end))
}

const RESERVED: &[&str] = &[
    "defquery", "let", "sample", "observe", "predict", "fn", "+", "-", "*", "/", "normal", "uniform", "bernoulli",
    "beta",
];

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
    /// Positions of the delimiters opened and not yet closed.
    open: Vec<(char, Pos)>,
    scope: Vec<String>,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, Pos)> {
        self.toks.get(self.at)
    }

    fn eof_error(&self, expected: &str) -> ParseError {
        let message = match self.open.last() {
            Some((delim, pos)) => format!(
                "unexpected end of input, expected {expected}: unbalanced '{delim}' opened at {pos} ({} unclosed)",
                self.open.len()
            ),
            None => format!("unexpected end of input, expected {expected}"),
        };
        err(self.end, message)
    }

    fn next(&mut self, expected: &str) -> Result<(Tok, Pos), ParseError> {
        let tok = self.toks.get(self.at).cloned().ok_or_else(|| self.eof_error(expected))?;
        self.at += 1;
        match tok.0 {
            Tok::Open => self.open.push(('(', tok.1)),
            Tok::OpenBracket => self.open.push(('[', tok.1)),
            Tok::Close | Tok::CloseBracket => {
                let want = if tok.0 == Tok::Close { '(' } else { '[' };
                match self.open.pop() {
                    Some((d, _)) if d == want => {}
                    Some((d, p)) => {
                        return Err(err(tok.1, format!("mismatched {} closes '{d}' opened at {p}", tok.0)));
                    }
                    None => return Err(err(tok.1, format!("unbalanced {}", tok.0))),
                }
            }
            _ => {}
        }
        Ok(tok)
    }

    fn at_close(&self) -> bool {
        matches!(self.peek(), Some((Tok::Close, _)))
    }

    fn expect_close(&mut self, form: &str) -> Result<(), ParseError> {
        match self.next(&format!("')' closing {form}"))? {
            (Tok::Close, _) => Ok(()),
            (tok, pos) => Err(err(pos, format!("expected ')' closing {form}, found {tok}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.next(what)? {
            (Tok::Symbol(s), pos) => {
                if RESERVED.contains(&s.as_str()) {
                    Err(err(pos, format!("reserved word '{s}' cannot be used as {what}")))
                } else {
                    Ok((s, pos))
                }
            }
            (tok, pos) => Err(err(pos, format!("expected {what}, found {tok}"))),
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        match self.next("'(' starting defquery")? {
            (Tok::Open, _) => {}
            (tok, pos) => return Err(err(pos, format!("expected '(' starting defquery, found {tok}"))),
        }
        match self.next("'defquery'")? {
            (Tok::Symbol(s), _) if s == "defquery" => {}
            (tok, pos) => return Err(err(pos, format!("expected 'defquery', found {tok}"))),
        }
        let (name, _) = self.ident("query name")?;
        let body = self.expr()?;
        self.expect_close("defquery")?;
        if let Some((tok, pos)) = self.peek() {
            let message = match tok {
                Tok::Close | Tok::CloseBracket => format!("unbalanced {tok}"),
                _ => format!("unexpected {tok} after the query"),
            };
            return Err(err(*pos, message));
        }
        Ok(Query { name, body })
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let (tok, pos) = self.next("an expression")?;
        match tok {
            Tok::Number(x) => Ok(Ast::Number(x)),
            Tok::Symbol(s) => {
                if RESERVED.contains(&s.as_str()) {
                    return Err(err(pos, format!("'{s}' is a form, not a value")));
                }
                if !self.scope.contains(&s) {
                    return Err(err(pos, format!("unbound variable '{s}'")));
                }
                Ok(Ast::Var(s))
            }
            Tok::Keyword(k) => Err(err(pos, format!("keyword ':{k}' is only allowed in predict"))),
            Tok::Open => self.form(pos),
            tok => Err(err(pos, format!("unexpected {tok}"))),
        }
    }

    /// Expressions up to the closing parenthesis, which is consumed.
    fn rest(&mut self, form: &str) -> Result<Vec<Ast>, ParseError> {
        let mut args = Vec::new();
        while !self.at_close() {
            if self.peek().is_none() {
                return Err(self.eof_error(&format!("')' closing {form}")));
            }
            args.push(self.expr()?);
        }
        self.expect_close(form)?;
        Ok(args)
    }

    fn exact_args(&mut self, form: &str, n: usize, pos: Pos) -> Result<Vec<Ast>, ParseError> {
        let args = self.rest(form)?;
        if args.len() != n {
            return Err(err(pos, format!("'{form}' takes {n} argument(s), found {}", args.len())));
        }
        Ok(args)
    }

    fn form(&mut self, pos: Pos) -> Result<Ast, ParseError> {
        let head = match self.peek() {
            None => return Err(self.eof_error("a form")),
            Some((Tok::Close, p)) => return Err(err(*p, "empty form '()'")),
            Some((tok, _)) => tok.clone(),
        };
        let symbol = match &head {
            Tok::Symbol(s) => s.clone(),
            Tok::Open => {
                let func = self.expr()?;
                let args = self.rest("application")?;
                return Ok(Ast::App { func: Box::new(func), args });
            }
            other => return Err(err(self.peek().expect("peeked").1, format!("unknown head form: cannot apply {other}"))),
        };
        match symbol.as_str() {
            "let" => {
                self.at += 1;
                self.let_form(pos)
            }
            "fn" => {
                self.at += 1;
                self.fn_form(pos)
            }
            "sample" => {
                self.at += 1;
                let mut args = self.exact_args("sample", 1, pos)?;
                Ok(Ast::Sample(Box::new(args.remove(0))))
            }
            "observe" => {
                self.at += 1;
                let mut args = self.exact_args("observe", 2, pos)?;
                let value = args.pop().expect("two args");
                let dist = args.pop().expect("two args");
                Ok(Ast::Observe { dist: Box::new(dist), value: Box::new(value) })
            }
            "predict" => {
                self.at += 1;
                let label = match self.next("a keyword label")? {
                    (Tok::Keyword(k), _) => k,
                    (tok, p) => return Err(err(p, format!("predict expects a keyword label, found {tok}"))),
                };
                let mut args = self.exact_args("predict", 1, pos)?;
                Ok(Ast::Predict { label, value: Box::new(args.remove(0)) })
            }
            "defquery" => Err(err(pos, "defquery is only allowed at the top level")),
            s => {
                if let Some(op) = PrimOp::from_symbol(s) {
                    self.at += 1;
                    let args = self.exact_args(s, 2, pos)?;
                    Ok(Ast::Prim { op, args })
                } else if let Some(kind) = DistKind::from_symbol(s) {
                    self.at += 1;
                    let args = self.exact_args(s, kind.arity(), pos)?;
                    Ok(Ast::Dist { kind, args })
                } else {
                    let func = self.expr()?;
                    let args = self.rest("application")?;
                    Ok(Ast::App { func: Box::new(func), args })
                }
            }
        }
    }

    fn open_bracket(&mut self, form: &str) -> Result<(), ParseError> {
        match self.next(&format!("'[' in {form}"))? {
            (Tok::OpenBracket, _) => Ok(()),
            (tok, p) => Err(err(p, format!("{form} expects a bracketed vector, found {tok}"))),
        }
    }

    fn let_form(&mut self, pos: Pos) -> Result<Ast, ParseError> {
        self.open_bracket("let")?;
        let depth = self.scope.len();
        let mut bindings = Vec::new();
        loop {
            match self.peek() {
                Some((Tok::CloseBracket, _)) => {
                    self.next("']'")?;
                    break;
                }
                None => return Err(self.eof_error("']' closing let bindings")),
                _ => {}
            }
            let (name, name_pos) = self.ident("a binding name")?;
            if matches!(self.peek(), Some((Tok::CloseBracket, _))) {
                return Err(err(name_pos, format!("let binding '{name}' has no value")));
            }
            let value = self.expr()?;
            self.scope.push(name.clone());
            bindings.push((name, value));
        }
        let body = self.rest("let")?;
        self.scope.truncate(depth);
        if body.is_empty() {
            return Err(err(pos, "'let' needs at least one body form"));
        }
        Ok(Ast::Let { bindings, body })
    }

    fn fn_form(&mut self, pos: Pos) -> Result<Ast, ParseError> {
        self.open_bracket("fn")?;
        let mut params = Vec::new();
        loop {
            match self.peek() {
                Some((Tok::CloseBracket, _)) => {
                    self.next("']'")?;
                    break;
                }
                None => return Err(self.eof_error("']' closing fn parameters")),
                _ => {}
            }
            let (name, p) = self.ident("a parameter name")?;
            if params.contains(&name) {
                return Err(err(p, format!("duplicate parameter '{name}'")));
            }
            params.push(name);
        }
        let depth = self.scope.len();
        self.scope.extend(params.iter().cloned());
        let body = self.rest("fn");
        self.scope.truncate(depth);
        let mut body = body?;
        if body.len() != 1 {
            return Err(err(pos, format!("'fn' takes exactly one body form, found {}", body.len())));
        }
        Ok(Ast::Fn { params, body: Arc::new(body.remove(0)) })
    }
}

/// Parses and scope-checks a `defquery` program.
pub fn parse(text: &str) -> Result<Query, ParseError> {
    let (toks, end) = lex(text)?;
    Parser { toks, at: 0, end, open: Vec::new(), scope: Vec::new() }.query()
}
