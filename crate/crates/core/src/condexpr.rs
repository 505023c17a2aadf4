//! The condition mini-language used by `successIf` / `failureIf` constraints
//! and by expression-driven condition leaves in scenarios.
//!
//! ```text
//! or      := and ("||" and)*
//! and     := cmp ("&&" cmp)*
//! cmp     := unary (("<" | "<=" | ">" | ">=" | "==" | "!=") unary)*
//! unary   := "!" unary | primary
//! primary := NUMBER | STRING | "true" | "false" | IDENT | "(" or ")"
//! ```
//!
//! Evaluation is strict: both operands of `&&` and `||` are always evaluated,
//! so a misspelled key is reported even when the other side decides the result.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A blackboard or literal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Bool(_) => "bool",
            Value::Text(_) => "text",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(t) => write!(f, "{t:?}"),
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Parsed condition expression.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionExpr {
    Number(f64),
    Text(String),
    Bool(bool),
    Ident(String),
    Not(Box<ConditionExpr>),
    Cmp(CmpOp, Box<ConditionExpr>, Box<ConditionExpr>),
    And(Box<ConditionExpr>, Box<ConditionExpr>),
    Or(Box<ConditionExpr>, Box<ConditionExpr>),
}

impl ConditionExpr {
    /// Identifiers referenced by the expression, in first-occurrence order.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_identifiers(&mut out);
        out
    }

    fn collect_identifiers<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ConditionExpr::Ident(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            ConditionExpr::Not(inner) => inner.collect_identifiers(out),
            ConditionExpr::Cmp(_, l, r) | ConditionExpr::And(l, r) | ConditionExpr::Or(l, r) => {
                l.collect_identifiers(out);
                r.collect_identifiers(out);
            }
            _ => {}
        }
    }
}

/// Fully parenthesised rendering, mainly for debugging and tests.
impl fmt::Display for ConditionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionExpr::Number(n) => write!(f, "{n}"),
            ConditionExpr::Text(t) => write!(f, "{t:?}"),
            ConditionExpr::Bool(b) => write!(f, "{b}"),
            ConditionExpr::Ident(name) => f.write_str(name),
            ConditionExpr::Not(inner) => write!(f, "!{inner}"),
            ConditionExpr::Cmp(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ConditionExpr::And(l, r) => write!(f, "({l} && {r})"),
            ConditionExpr::Or(l, r) => write!(f, "({l} || {r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    /// E301; `column` is 1-based within the expression text.
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    /// E302
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    /// E303
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

impl ExprError {
    pub fn code(&self) -> &'static str {
        match self {
            ExprError::Syntax { .. } => "E301",
            ExprError::UnknownIdentifier(_) => "E302",
            ExprError::TypeMismatch(_) => "E303",
        }
    }
}

/// Anything that can resolve identifiers to values during evaluation.
pub trait Scope {
    fn lookup(&self, name: &str) -> Option<&Value>;
}

impl Scope for BTreeMap<String, Value> {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.get(name)
    }
}

impl Scope for HashMap<String, Value> {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.get(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Text(String),
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Cmp(CmpOp),
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |column: usize, message: String| ExprError::Syntax { column, message };

    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        match c {
            '(' => {
                out.push((Tok::LParen, col));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, col));
                i += 1;
            }
            '&' if next == Some('&') => {
                out.push((Tok::And, col));
                i += 2;
            }
            '|' if next == Some('|') => {
                out.push((Tok::Or, col));
                i += 2;
            }
            '!' if next == Some('=') => {
                out.push((Tok::Cmp(CmpOp::Ne), col));
                i += 2;
            }
            '!' => {
                out.push((Tok::Not, col));
                i += 1;
            }
            '=' if next == Some('=') => {
                out.push((Tok::Cmp(CmpOp::Eq), col));
                i += 2;
            }
            '<' | '>' => {
                let (op, width) = match (c, next) {
                    ('<', Some('=')) => (CmpOp::Le, 2),
                    ('<', _) => (CmpOp::Lt, 1),
                    ('>', Some('=')) => (CmpOp::Ge, 2),
                    _ => (CmpOp::Gt, 1),
                };
                out.push((Tok::Cmp(op), col));
                i += width;
            }
            '"' | '\'' => {
                let quote = c;
                let mut text = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(col, "unterminated string literal".into())),
                        Some(&ch) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(&e @ ('\\' | '"' | '\'')) => text.push(e),
                                Some('n') => text.push('\n'),
                                Some('t') => text.push('\t'),
                                _ => return Err(err(i + 1, "invalid escape sequence".into())),
                            }
                            i += 2;
                        }
                        Some(&ch) => {
                            text.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Text(text), col));
            }
            c if c.is_ascii_digit()
                || (c == '-' && next.is_some_and(|n| n.is_ascii_digit())) =>
            {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    let frac_start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac_start {
                        return Err(err(i + 1, "expected digits after decimal point".into()));
                    }
                }
                let literal: String = chars[start..i].iter().collect();
                let n = literal
                    .parse::<f64>()
                    .map_err(|_| err(col, format!("invalid number `{literal}`")))?;
                out.push((Tok::Number(n), col));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word),
                };
                out.push((tok, col));
            }
            other => return Err(err(col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or(self.end_column)
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            column: self.column(),
            message: message.into(),
        }
    }

    fn or(&mut self) -> Result<ConditionExpr, ExprError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = ConditionExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<ConditionExpr, ExprError> {
        let mut lhs = self.cmp()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let rhs = self.cmp()?;
            lhs = ConditionExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<ConditionExpr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(&Tok::Cmp(op)) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = ConditionExpr::Cmp(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ConditionExpr, ExprError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(ConditionExpr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<ConditionExpr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        let expr = match tok {
            Tok::Number(n) => ConditionExpr::Number(n),
            Tok::Text(t) => ConditionExpr::Text(t),
            Tok::True => ConditionExpr::Bool(true),
            Tok::False => ConditionExpr::Bool(false),
            Tok::Ident(name) => ConditionExpr::Ident(name),
            Tok::LParen => {
                self.pos += 1;
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                return Ok(inner);
            }
            other => return Err(self.error(format!("unexpected {}", describe(&other)))),
        };
        self.pos += 1;
        Ok(expr)
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::And => "`&&`".into(),
        Tok::Or => "`||`".into(),
        Tok::Not => "`!`".into(),
        Tok::Cmp(op) => format!("`{}`", op.symbol()),
        Tok::RParen => "`)`".into(),
        Tok::LParen => "`(`".into(),
        _ => "operand".into(),
    }
}

/// Parses a condition expression. Errors carry the offending 1-based column.
pub fn parse_expr(text: &str) -> Result<ConditionExpr, ExprError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end_column: text.chars().count() + 1,
    };
    let expr = parser.or()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(expr)
}

/// Evaluates an expression that must produce a boolean.
pub fn eval_expr(expr: &ConditionExpr, scope: &impl Scope) -> Result<bool, ExprError> {
    match eval_value(expr, scope)? {
        Value::Bool(b) => Ok(b),
        other => Err(ExprError::TypeMismatch(format!(
            "condition evaluates to {} `{other}`, expected bool",
            other.type_name()
        ))),
    }
}

fn eval_value(expr: &ConditionExpr, scope: &impl Scope) -> Result<Value, ExprError> {
    Ok(match expr {
        ConditionExpr::Number(n) => Value::Number(*n),
        ConditionExpr::Text(t) => Value::Text(t.clone()),
        ConditionExpr::Bool(b) => Value::Bool(*b),
        ConditionExpr::Ident(name) => scope
            .lookup(name)
            .cloned()
            .ok_or_else(|| ExprError::UnknownIdentifier(name.clone()))?,
        ConditionExpr::Not(inner) => Value::Bool(!expect_bool(inner, scope, "!")?),
        ConditionExpr::And(l, r) => {
            let (l, r) = (expect_bool(l, scope, "&&")?, expect_bool(r, scope, "&&")?);
            Value::Bool(l && r)
        }
        ConditionExpr::Or(l, r) => {
            let (l, r) = (expect_bool(l, scope, "||")?, expect_bool(r, scope, "||")?);
            Value::Bool(l || r)
        }
        ConditionExpr::Cmp(op, l, r) => {
            let (l, r) = (eval_value(l, scope)?, eval_value(r, scope)?);
            Value::Bool(compare(*op, &l, &r)?)
        }
    })
}

fn expect_bool(expr: &ConditionExpr, scope: &impl Scope, op: &str) -> Result<bool, ExprError> {
    match eval_value(expr, scope)? {
        Value::Bool(b) => Ok(b),
        other => Err(ExprError::TypeMismatch(format!(
            "`{op}` expects bool operands, found {}",
            other.type_name()
        ))),
    }
}

fn compare(op: CmpOp, l: &Value, r: &Value) -> Result<bool, ExprError> {
    use std::cmp::Ordering;

    let ordering: Option<Ordering> = match (l, r) {
        (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
        (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
        (Value::Bool(a), Value::Bool(b)) => {
            return match op {
                CmpOp::Eq => Ok(a == b),
                CmpOp::Ne => Ok(a != b),
                _ => Err(ExprError::TypeMismatch(format!(
                    "`{}` is not defined for bool operands",
                    op.symbol()
                ))),
            };
        }
        _ => {
            return Err(ExprError::TypeMismatch(format!(
                "cannot compare {} with {}",
                l.type_name(),
                r.type_name()
            )))
        }
    };
    // NaN compares unequal to everything.
    Ok(match ordering {
        None => op == CmpOp::Ne,
        Some(ord) => match op {
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
        },
    })
}
