//! Length profiles `ψ(n)` written as small arithmetic expressions in `n`.
//!
//! Grammar, loosest to tightest:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 'n' | name '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-n^2`
//! is `-(n^2)` and `2^3^2` is `2^9`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numeric::CompensatedSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("domain error at n = {n}: {message}")]
    Domain { n: f64, message: String },
    #[error("profile evaluates to {value} at n = {n}; conductances must be > 0")]
    NonPositiveProfile { n: u64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Log2,
    Exp,
    Sqrt,
    Ceil,
    Floor,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "log" => Func::Log,
            "log2" => Func::Log2,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "ceil" => Func::Ceil,
            "floor" => Func::Floor,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Log2 => "log2",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ceil => "ceil",
            Func::Floor => "floor",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    pub fn eval(&self, n: f64) -> Result<f64, ProfileError> {
        let domain = |message: String| ProfileError::Domain { n, message };
        let value = match self {
            Node::Num(v) => *v,
            Node::Var => n,
            Node::Neg(a) => -a.eval(n)?,
            Node::Bin(op, a, b) => {
                let (x, y) = (a.eval(n)?, b.eval(n)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(domain("division by zero".into()));
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            Node::Call(f, args) => {
                let x = args[0].eval(n)?;
                match f {
                    Func::Log | Func::Log2 => {
                        if x <= 0.0 {
                            return Err(domain(format!(
                                "{}({x}) of nonpositive argument",
                                f.name()
                            )));
                        }
                        if *f == Func::Log {
                            x.ln()
                        } else {
                            x.log2()
                        }
                    }
                    Func::Exp => x.exp(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(domain(format!("sqrt({x}) of negative argument")));
                        }
                        x.sqrt()
                    }
                    Func::Ceil => x.ceil(),
                    Func::Floor => x.floor(),
                    Func::Min => x.min(args[1].eval(n)?),
                    Func::Max => x.max(args[1].eval(n)?),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(domain(format!("non-finite value {value}")))
        }
    }
}

impl fmt::Display for Node {
    /// Canonical fully-parenthesized form; re-parses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var => write!(f, "n"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn error(&self, message: impl Into<String>) -> ProfileError {
        ProfileError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ProfileError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn sum(&mut self) -> Result<Node, ProfileError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Node, ProfileError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ProfileError> {
        if self.peek() == Some('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ProfileError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ProfileError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node, ProfileError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = &self.src[start..end];
        let value = f64::from_str(text).map_err(|_| ProfileError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        self.pos = end;
        Ok(Node::Num(value))
    }

    fn identifier(&mut self) -> Result<Node, ProfileError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
            end += 1;
        }
        let name = &self.src[start..end];
        self.pos = end;
        if name == "n" {
            return Ok(Node::Var);
        }
        if self.peek() != Some('(') {
            return Err(ProfileError::UnknownIdentifier {
                name: name.to_string(),
                offset: start,
            });
        }
        let func = Func::lookup(name).ok_or_else(|| ProfileError::UnknownFunction {
            name: name.to_string(),
            offset: start,
        })?;
        self.pos += 1;
        let mut args = vec![self.sum()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            args.push(self.sum()?);
        }
        self.expect(')')?;
        if args.len() != func.arity() {
            return Err(ProfileError::Arity {
                name: name.to_string(),
                expected: func.arity(),
                found: args.len(),
            });
        }
        Ok(Node::Call(func, args))
    }
}

/// A parsed profile together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileExpr {
    text: String,
    root: Node,
}

impl ProfileExpr {
    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let mut p = Parser { src: text, pos: 0 };
        let root = p.sum()?;
        if p.peek().is_some() {
            return Err(p.error("trailing input"));
        }
        Ok(ProfileExpr {
            text: text.trim().to_string(),
            root,
        })
    }

    /// The constant profile `value`.
    pub fn constant(value: f64) -> Self {
        ProfileExpr {
            text: format!("{value}"),
            root: Node::Num(value),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Canonical fully-parenthesized rendering.
    pub fn canonical(&self) -> String {
        self.root.to_string()
    }

    pub fn eval(&self, n: u64) -> Result<f64, ProfileError> {
        self.root.eval(n as f64)
    }

    pub fn eval_real(&self, x: f64) -> Result<f64, ProfileError> {
        self.root.eval(x)
    }

    /// Evaluate and require a strictly positive value.
    pub fn positive(&self, n: u64) -> Result<f64, ProfileError> {
        let value = self.eval(n)?;
        if value > 0.0 {
            Ok(value)
        } else {
            Err(ProfileError::NonPositiveProfile { n, value })
        }
    }

    /// `Σ_{n = from}^{to} 1/ψ(n)` with compensated summation.
    pub fn reciprocal_partial_sum(&self, from: u64, to: u64) -> Result<f64, ProfileError> {
        let mut s = CompensatedSum::new();
        for n in from..=to {
            s.add(1.0 / self.positive(n)?);
        }
        Ok(s.value())
    }
}

impl fmt::Display for ProfileExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for ProfileExpr {
    type Err = ProfileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProfileExpr::parse(s)
    }
}

impl Serialize for ProfileExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for ProfileExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        ProfileExpr::parse(&text).map_err(serde::de::Error::custom)
    }
}
