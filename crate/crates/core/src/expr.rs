//! Closed-form scalar expressions in a single parameter.
//!
//! Grammar (precedence `^` > unary minus > `* /` > `+ -`, `^` right-associative):
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := ("-")? power
//! power  := atom ("^" factor)?
//! atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//! ```
//!
//! The only identifiers accepted are the declared parameter name, the
//! constants `pi` and `e`, and the functions listed in [`Func`].

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Real;

pub const DEFAULT_PARAMETER: &str = "beta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

/// Named constants accepted wherever a number is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedConst {
    Pi,
    E,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Named(NamedConst),
    Param,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Parsed expression. Immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    param: Arc<str>,
    root: Arc<Node>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LogNonPositive,
    SqrtNegative,
    DivisionByZero,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::LogNonPositive => "log of non-positive value",
            DomainKind::SqrtNegative => "sqrt of negative value",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::NonFinite => "non-finite result",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{subexpr}`")]
pub struct EvalError {
    pub kind: DomainKind,
    /// Pretty-printed offending sub-expression.
    pub subexpr: String,
}

/// Parses `text` with the default parameter name `beta`.
pub fn parse(text: &str) -> Result<ExprAst, ParseError> {
    ExprAst::parse(text, DEFAULT_PARAMETER)
}

impl ExprAst {
    pub fn parse(text: &str, param: &str) -> Result<Self, ParseError> {
        let mut p = Parser {
            src: text,
            bytes: text.as_bytes(),
            pos: 0,
            param,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return Err(p.syntax(format!("unexpected `{}`", p.peek_char())));
        }
        Ok(Self {
            param: Arc::from(param),
            root: Arc::new(root),
        })
    }

    /// Expression equal to the constant `value`.
    pub fn constant(value: f64, param: &str) -> Self {
        Self {
            param: Arc::from(param),
            root: Arc::new(Node::Const(value)),
        }
    }

    pub fn from_node(node: Node, param: &str) -> Self {
        Self {
            param: Arc::from(param),
            root: Arc::new(node),
        }
    }

    pub fn param(&self) -> &str {
        &self.param
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// True when the expression does not reference the parameter.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Const(_) | Node::Named(_) => true,
                Node::Param => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Binary(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.root)
    }

    pub fn evaluate<T: Real>(&self, value: T) -> Result<T, EvalError> {
        self.eval_node(&self.root, value)
    }

    fn eval_node<T: Real>(&self, node: &Node, x: T) -> Result<T, EvalError> {
        let fail = |kind| EvalError {
            kind,
            subexpr: Printer { node, param: &self.param }.to_string(),
        };
        let v = match node {
            Node::Const(c) => T::lit(*c),
            Node::Named(NamedConst::Pi) => T::PI(),
            Node::Named(NamedConst::E) => T::E(),
            Node::Param => x,
            Node::Neg(a) => -self.eval_node(a, x)?,
            Node::Binary(op, a, b) => {
                let l = self.eval_node(a, x)?;
                let r = self.eval_node(b, x)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == T::zero() {
                            return Err(fail(DomainKind::DivisionByZero));
                        }
                        l / r
                    }
                    BinOp::Pow => pow(l, r),
                }
            }
            Node::Call(f, a) => {
                let v = self.eval_node(a, x)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.tan(),
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v <= T::zero() {
                            return Err(fail(DomainKind::LogNonPositive));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v < T::zero() {
                            return Err(fail(DomainKind::SqrtNegative));
                        }
                        v.sqrt()
                    }
                    Func::Abs => v.abs(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fail(DomainKind::NonFinite))
        }
    }
}

/// Integer exponents use repeated multiplication so negative bases stay valid.
fn pow<T: Real>(base: T, exp: T) -> T {
    if exp.fract() == T::zero() && exp.abs() <= T::lit(64.0) {
        base.powi(exp.to_i32().unwrap_or(0))
    } else {
        base.powf(exp)
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            node: &self.root,
            param: &self.param,
        }
        .fmt(f)
    }
}

/// Fully parenthesised printer; its output re-parses to the identical tree.
struct Printer<'a> {
    node: &'a Node,
    param: &'a str,
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |node| Printer { node, param: self.param };
        match self.node {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Named(NamedConst::Pi) => f.write_str("pi"),
            Node::Named(NamedConst::E) => f.write_str("e"),
            Node::Param => f.write_str(self.param),
            Node::Neg(a) => write!(f, "(-{})", sub(a)),
            Node::Binary(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            Node::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    param: &'a str,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn peek_char(&self) -> char {
        self.src[self.pos..].chars().next().unwrap_or('\0')
    }

    fn syntax(&self, message: String) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message,
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(b) if b == c => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(self.syntax(format!("expected `{}`, found `{}`", c as char, self.peek_char()))),
            None => Err(self.syntax(format!("expected `{}`, found end of input", c as char))),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.power()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input".into())),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => self.number(),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => self.ident(),
            Some(_) => Err(self.syntax(format!("unexpected `{}`", self.peek_char()))),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.bytes.len() && p.bytes[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number".into()));
        }
        if matches!(self.bytes.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // `2e` followed by something that is not an exponent: treat `e` as
                // the start of the next token (which will then be rejected).
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(Node::Const)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }

    fn ident(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'(') {
            let func = Func::from_name(name).ok_or_else(|| ParseError::UnknownFunction {
                offset: start,
                name: name.to_string(),
            })?;
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if name == self.param {
            return Ok(Node::Param);
        }
        match name {
            "pi" => Ok(Node::Named(NamedConst::Pi)),
            "e" => Ok(Node::Named(NamedConst::E)),
            _ => Err(ParseError::UnknownIdentifier {
                offset: start,
                name: name.to_string(),
            }),
        }
    }
}
