//! A small arithmetic expression language used to state the problem data
//! (weights, nonlinearities, impulse maps) in configuration files.
//!
//! Grammar, highest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := NUMBER | IDENT | IDENT '(' args ')' | '(' expr ')'
//! args    := expr (',' expr)*
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2`
//! is `-4` and `2^3^2` is `512`.

use std::fmt;

use thiserror::Error;

/// Byte range of a node in its source text, with the 1-based line and
/// column of its first character.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    Y,
    S,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::S => "s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Atan,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "atan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Atan => "atan",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Parsed expression. Spans are carried for error reporting only and are
/// ignored by [`Expr::same_structure`].
#[derive(Debug, Clone)]
pub struct Expr {
    pub node: Node,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}; expected one of: {}", expected.join(", "))]
    Syntax {
        line: usize,
        col: usize,
        message: String,
        expected: Vec<String>,
    },
    #[error("{line}:{col}: unknown identifier `{name}`")]
    UnknownIdentifier {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: `{func}` takes {expected} argument(s), got {found}")]
    Arity {
        line: usize,
        col: usize,
        func: String,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. }
            | ParseError::UnknownIdentifier { line, col, .. }
            | ParseError::Arity { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{}:{}: unbound variable `{}`", span.line, span.col, var.name())]
    Unbound { var: Var, span: Span },
    #[error("{}:{}: domain error: {message}", span.line, span.col)]
    Domain { message: String, span: Span },
}

/// Values for the free variables of an expression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub s: Option<f64>,
}

impl Bindings {
    pub fn time(t: f64) -> Self {
        Bindings {
            t: Some(t),
            s: Some(t),
            ..Default::default()
        }
    }

    pub fn state(x: f64) -> Self {
        Bindings {
            x: Some(x),
            ..Default::default()
        }
    }

    pub fn full(t: f64, x: f64, y: f64) -> Self {
        Bindings {
            t: Some(t),
            x: Some(x),
            y: Some(y),
            s: Some(t),
        }
    }

    fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::T => self.t,
            Var::X => self.x,
            Var::Y => self.y,
            Var::S => self.s,
        }
    }
}

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
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn span_at(src: &str, start: usize, end: usize) -> Span {
    let before = &src[..start];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(start, |nl| start - nl - 1) + 1;
    Span {
        start,
        end,
        line,
        col,
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| {
                    let sp = span_at(src, start, i);
                    ParseError::Syntax {
                        line: sp.line,
                        col: sp.col,
                        message: format!("malformed number `{text}`"),
                        expected: vec!["number".into()],
                    }
                })?;
                out.push((Tok::Num(value), span_at(src, start, i)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((
                    Tok::Ident(src[start..i].to_string()),
                    span_at(src, start, i),
                ));
                continue;
            }
            _ => {
                let sp = span_at(src, start, start + 1);
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    line: sp.line,
                    col: sp.col,
                    message: format!("unexpected character `{ch}`"),
                    expected: vec!["operator".into(), "operand".into()],
                });
            }
        };
        i += 1;
        out.push((tok, span_at(src, start, i)));
    }
    out.push((Tok::Eof, span_at(src, src.len(), src.len())));
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

const OPERAND: &[&str] = &["number", "identifier", "`(`", "`-`"];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let sp = self.span();
        ParseError::Syntax {
            line: sp.line,
            col: sp.col,
            message: format!("unexpected {}", self.peek().describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn join(&self, a: Span, b: Span) -> Span {
        span_at(self.src, a.start, b.end.max(a.end))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            let span = self.join(lhs.span, rhs.span);
            lhs = Expr {
                node: Node::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let span = self.join(lhs.span, rhs.span);
            lhs = Expr {
                node: Node::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            let (_, start) = self.bump();
            let inner = self.unary()?;
            let span = self.join(start, inner.span);
            return Ok(Expr {
                node: Node::Neg(Box::new(inner)),
                span,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            let span = self.join(base.span, exponent.span);
            return Ok(Expr {
                node: Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)),
                span,
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                let (_, span) = self.bump();
                Ok(Expr {
                    node: Node::Num(v),
                    span,
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected(&["`)`", "operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                let (_, span) = self.bump();
                if *self.peek() == Tok::LParen {
                    return self.call(&name, span);
                }
                let node = match name.as_str() {
                    "t" => Node::Var(Var::T),
                    "x" => Node::Var(Var::X),
                    "y" => Node::Var(Var::Y),
                    "s" => Node::Var(Var::S),
                    "pi" => Node::Const(Constant::Pi),
                    "e" => Node::Const(Constant::E),
                    _ => {
                        return Err(ParseError::UnknownIdentifier {
                            line: span.line,
                            col: span.col,
                            name,
                        })
                    }
                };
                Ok(Expr { node, span })
            }
            _ => Err(self.unexpected(OPERAND)),
        }
    }

    fn call(&mut self, name: &str, name_span: Span) -> Result<Expr, ParseError> {
        let func = Func::lookup(name).ok_or_else(|| ParseError::UnknownIdentifier {
            line: name_span.line,
            col: name_span.col,
            name: name.to_string(),
        })?;
        self.bump(); // '('
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        if *self.peek() != Tok::RParen {
            return Err(self.unexpected(&["`,`", "`)`", "operator"]));
        }
        let (_, close) = self.bump();
        if args.len() != func.arity() {
            return Err(ParseError::Arity {
                line: name_span.line,
                col: name_span.col,
                func: name.to_string(),
                expected: func.arity(),
                found: args.len(),
            });
        }
        Ok(Expr {
            node: Node::Call(func, args),
            span: self.join(name_span, close),
        })
    }
}

/// Parse `source` into an expression tree.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        src: source,
        toks,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected(&["operator", "end of input"]));
    }
    Ok(e)
}

fn domain(message: impl Into<String>, span: Span) -> EvalError {
    EvalError::Domain {
        message: message.into(),
        span,
    }
}

impl Expr {
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        let v = match &self.node {
            Node::Num(v) => *v,
            Node::Var(var) => b.get(*var).ok_or(EvalError::Unbound {
                var: *var,
                span: self.span,
            })?,
            Node::Const(Constant::Pi) => std::f64::consts::PI,
            Node::Const(Constant::E) => std::f64::consts::E,
            Node::Neg(inner) => -inner.eval(b)?,
            Node::Binary(op, l, r) => {
                let a = l.eval(b)?;
                let c = r.eval(b)?;
                match op {
                    BinOp::Add => a + c,
                    BinOp::Sub => a - c,
                    BinOp::Mul => a * c,
                    BinOp::Div => {
                        if c == 0.0 {
                            return Err(domain("division by zero", self.span));
                        }
                        a / c
                    }
                    BinOp::Pow => power(a, c, self.span)?,
                }
            }
            Node::Call(func, args) => {
                let a = args[0].eval(b)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(domain(format!("log of nonpositive value {a}"), self.span));
                        }
                        a.ln()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Atan => a.atan(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain(format!("sqrt of negative value {a}"), self.span));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval(b)?),
                    Func::Max => a.max(args[1].eval(b)?),
                    Func::Pow => power(a, args[1].eval(b)?, self.span)?,
                }
            }
        };
        if !v.is_finite() {
            return Err(domain(format!("non-finite result {v}"), self.span));
        }
        Ok(v)
    }

    /// Plain IEEE evaluation: overflow gives `±inf`, domain errors give
    /// `NaN` or `inf` as the float operations do, unbound variables give
    /// `NaN`. Numerical code that relies on IEEE overflow uses this.
    pub fn eval_ieee(&self, b: &Bindings) -> f64 {
        match &self.node {
            Node::Num(v) => *v,
            Node::Var(var) => b.get(*var).unwrap_or(f64::NAN),
            Node::Const(Constant::Pi) => std::f64::consts::PI,
            Node::Const(Constant::E) => std::f64::consts::E,
            Node::Neg(inner) => -inner.eval_ieee(b),
            Node::Binary(op, l, r) => {
                let (a, c) = (l.eval_ieee(b), r.eval_ieee(b));
                match op {
                    BinOp::Add => a + c,
                    BinOp::Sub => a - c,
                    BinOp::Mul => a * c,
                    BinOp::Div => a / c,
                    BinOp::Pow => a.powf(c),
                }
            }
            Node::Call(func, args) => {
                let a = args[0].eval_ieee(b);
                match func {
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Atan => a.atan(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval_ieee(b)),
                    Func::Max => a.max(args[1].eval_ieee(b)),
                    Func::Pow => a.powf(args[1].eval_ieee(b)),
                }
            }
        }
    }

    /// Structural equality, ignoring source spans.
    pub fn same_structure(&self, other: &Expr) -> bool {
        match (&self.node, &other.node) {
            (Node::Num(a), Node::Num(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Const(a), Node::Const(b)) => a == b,
            (Node::Neg(a), Node::Neg(b)) => a.same_structure(b),
            (Node::Binary(o1, l1, r1), Node::Binary(o2, l2, r2)) => {
                o1 == o2 && l1.same_structure(l2) && r1.same_structure(r2)
            }
            (Node::Call(f1, a1), Node::Call(f2, a2)) => {
                f1 == f2
                    && a1.len() == a2.len()
                    && a1.iter().zip(a2).all(|(x, y)| x.same_structure(y))
            }
            _ => false,
        }
    }

    /// Free variables in order of first appearance.
    pub fn variables(&self) -> Vec<Var> {
        fn walk(e: &Expr, out: &mut Vec<Var>) {
            match &e.node {
                Node::Var(v) => {
                    if !out.contains(v) {
                        out.push(*v)
                    }
                }
                Node::Neg(a) => walk(a, out),
                Node::Binary(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Node::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
                Node::Num(_) | Node::Const(_) => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

fn power(base: f64, exponent: f64, span: Span) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(domain("zero raised to a negative power", span));
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(domain(
            format!("negative base {base} with non-integer exponent {exponent}"),
            span,
        ));
    }
    Ok(base.powf(exponent))
}

/// Fully parenthesised rendering; reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(v) => f.write_str(v.name()),
            Node::Const(Constant::Pi) => f.write_str("pi"),
            Node::Const(Constant::E) => f.write_str("e"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
