//! Line-oriented parser for system definition files.
//!
//! ```text
//! system <ident>
//! param <ident> = <number>
//! state <ident> [, <ident>]*
//! d<ident>/dt = <expr>
//! ```
//!
//! `#` starts a comment. A comment of the form `#@expect <n>, <n>, ...` records an
//! expected equilibrium that analyses compare against the equilibria they find.

use std::collections::BTreeMap;

use super::expr::{BinOp, ExprNode, Func};
use super::{DslError, SystemDef};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eq,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> DslError {
    DslError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str, line: usize, col_offset: usize) -> Result<Vec<Spanned>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = col_offset + i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, column });
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value: f64 = literal
                .parse()
                .map_err(|_| syntax(line, column, format!("malformed number `{literal}`")))?;
            out.push(Spanned {
                tok: Tok::Num(value),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else {
            return Err(syntax(line, column, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct TokenStream {
    toks: Vec<Spanned>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl TokenStream {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn column(&self) -> usize {
        self.toks
            .get(self.pos)
            .map_or(self.end_column, |s| s.column)
    }

    fn error_here(&self, expected: &str) -> DslError {
        match self.toks.get(self.pos) {
            Some(s) => syntax(
                self.line,
                s.column,
                format!("expected {expected}, found {}", describe(&s.tok)),
            ),
            None => syntax(
                self.line,
                self.end_column,
                format!("expected {expected}, found end of input"),
            ),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DslError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn finish(&self) -> Result<(), DslError> {
        if self.pos < self.toks.len() {
            Err(self.error_here("end of line"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<ExprNode, DslError> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.term()?;
            left = ExprNode::binary(op, left, right);
        }
    }

    fn term(&mut self) -> Result<ExprNode, DslError> {
        let mut left = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.factor()?;
            left = ExprNode::binary(op, left, right);
        }
    }

    fn factor(&mut self) -> Result<ExprNode, DslError> {
        let base = self.unary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.factor()?;
            Ok(ExprNode::binary(BinOp::Pow, base, exponent))
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<ExprNode, DslError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            // `-<literal>` is a negative constant.
            if let Some(Tok::Num(value)) = self.peek() {
                let value = *value;
                self.pos += 1;
                return Ok(ExprNode::Constant(-value));
            }
            return Ok(ExprNode::neg(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<ExprNode, DslError> {
        let column = self.column();
        match self.next() {
            Some(Tok::Num(value)) => Ok(ExprNode::Constant(value)),
            Some(Tok::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(ExprNode::call(func, arg))
                } else if self.peek() == Some(&Tok::LParen) {
                    Err(syntax(self.line, column, format!("unknown function `{name}`")))
                } else {
                    Ok(ExprNode::Variable(name))
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(_) => {
                self.pos -= 1;
                Err(self.error_here("an expression"))
            }
            None => Err(self.error_here("an expression")),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Eq => "`=`".into(),
    }
}

fn stream(text: &str, line: usize, col_offset: usize) -> Result<TokenStream, DslError> {
    Ok(TokenStream {
        toks: lex(text, line, col_offset)?,
        pos: 0,
        line,
        end_column: col_offset + text.chars().count() + 1,
    })
}

/// Parses a single expression (no declarations).
pub fn parse_expr(text: &str) -> Result<ExprNode, DslError> {
    let mut ts = stream(text, 1, 0)?;
    let e = ts.expr()?;
    ts.finish()?;
    Ok(e)
}

fn check_name(name: &str, line: usize) -> Result<(), DslError> {
    if Func::from_name(name).is_some() {
        return Err(DslError::Duplicate {
            name: name.to_string(),
            line,
        });
    }
    Ok(())
}

/// Parses DSL source into a validated [`SystemDef`].
pub fn parse_system(source: &str) -> Result<SystemDef, DslError> {
    let mut name: Option<String> = None;
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    let mut states: Option<(Vec<String>, usize)> = None;
    let mut equations: Vec<(String, ExprNode, usize)> = Vec::new();
    let mut expected: Vec<(Vec<f64>, usize)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        if let Some(pragma) = raw.trim_start().strip_prefix("#@") {
            let offset = raw.len() - raw.trim_start().len() + 2;
            if let Some(point) = parse_pragma(pragma, line, offset)? {
                expected.push((point, line));
            }
            continue;
        }
        let text = raw.split('#').next().unwrap_or("");
        let mut ts = stream(text, line, 0)?;
        let Some(Tok::Ident(head)) = ts.peek().cloned() else {
            if ts.peek().is_none() {
                continue;
            }
            return Err(ts.error_here("a declaration"));
        };
        ts.pos += 1;
        match head.as_str() {
            "system" => {
                let n = ts.ident("a system name")?;
                ts.finish()?;
                if name.replace(n.clone()).is_some() {
                    return Err(DslError::Duplicate { name: n, line });
                }
            }
            "param" => {
                let p = ts.ident("a parameter name")?;
                ts.expect(Tok::Eq, "`=`")?;
                let neg = if ts.peek() == Some(&Tok::Minus) {
                    ts.pos += 1;
                    true
                } else {
                    false
                };
                let value = match ts.peek() {
                    Some(Tok::Num(v)) => {
                        let v = *v;
                        ts.pos += 1;
                        v
                    }
                    _ => return Err(ts.error_here("a number")),
                };
                ts.finish()?;
                check_name(&p, line)?;
                if params.insert(p.clone(), if neg { -value } else { value }).is_some() {
                    return Err(DslError::Duplicate { name: p, line });
                }
            }
            "state" => {
                let mut list = vec![ts.ident("a state name")?];
                while ts.peek() == Some(&Tok::Comma) {
                    ts.pos += 1;
                    list.push(ts.ident("a state name")?);
                }
                ts.finish()?;
                if states.is_some() {
                    return Err(DslError::Duplicate {
                        name: "state".into(),
                        line,
                    });
                }
                for (i, s) in list.iter().enumerate() {
                    check_name(s, line)?;
                    if list[..i].contains(s) {
                        return Err(DslError::Duplicate {
                            name: s.clone(),
                            line,
                        });
                    }
                }
                states = Some((list, line));
            }
            derivative if derivative.starts_with('d') && derivative.len() > 1 => {
                ts.expect(Tok::Slash, "`/dt`")?;
                let dt = ts.ident("`dt`")?;
                if dt != "dt" {
                    ts.pos -= 1;
                    return Err(ts.error_here("`dt`"));
                }
                ts.expect(Tok::Eq, "`=`")?;
                let rhs = ts.expr()?;
                ts.finish()?;
                equations.push((derivative[1..].to_string(), rhs, line));
            }
            _ => {
                ts.pos -= 1;
                return Err(ts.error_here("`system`, `param`, `state` or `d<state>/dt`"));
            }
        }
    }

    let name = name.ok_or(DslError::Missing("system"))?;
    let (states, state_line) = states.ok_or(DslError::Missing("state"))?;

    let mut rhs: Vec<Option<ExprNode>> = vec![None; states.len()];
    for (target, expr, line) in equations {
        let Some(i) = states.iter().position(|s| *s == target) else {
            return Err(DslError::Undeclared { name: target, line });
        };
        if rhs[i].is_some() {
            return Err(DslError::Duplicate {
                name: format!("d{target}/dt"),
                line,
            });
        }
        for var in expr.free_vars() {
            if !states.iter().any(|s| s == var) && !params.contains_key(var) {
                return Err(DslError::Undeclared {
                    name: var.to_string(),
                    line,
                });
            }
        }
        rhs[i] = Some(expr);
    }
    let given = rhs.iter().filter(|r| r.is_some()).count();
    if given != states.len() {
        return Err(DslError::CountMismatch {
            states: states.len(),
            equations: given,
        });
    }
    let rhs = rhs.into_iter().flatten().collect();

    let mut sys = SystemDef::new(name, states, params, rhs).map_err(|e| match e {
        DslError::Duplicate { name, .. } => DslError::Duplicate {
            name,
            line: state_line,
        },
        other => other,
    })?;
    for (point, line) in &expected {
        if point.len() != sys.dim() {
            return Err(DslError::Syntax {
                line: *line,
                column: 1,
                message: format!(
                    "#@expect point has {} coordinates, system has {} states",
                    point.len(),
                    sys.dim()
                ),
            });
        }
    }
    sys.expected_equilibria = expected.into_iter().map(|(p, _)| p).collect();
    Ok(sys)
}

fn parse_pragma(text: &str, line: usize, offset: usize) -> Result<Option<Vec<f64>>, DslError> {
    let mut ts = stream(text, line, offset)?;
    match ts.peek() {
        Some(Tok::Ident(word)) if word == "expect" => ts.pos += 1,
        // Unknown pragmas are plain comments.
        _ => return Ok(None),
    }
    let mut point = Vec::new();
    loop {
        let neg = if ts.peek() == Some(&Tok::Minus) {
            ts.pos += 1;
            true
        } else {
            false
        };
        match ts.peek() {
            Some(Tok::Num(v)) => {
                point.push(if neg { -*v } else { *v });
                ts.pos += 1;
            }
            _ => return Err(ts.error_here("a coordinate")),
        }
        if ts.peek() == Some(&Tok::Comma) {
            ts.pos += 1;
        } else {
            break;
        }
    }
    ts.finish()?;
    Ok(Some(point))
}
