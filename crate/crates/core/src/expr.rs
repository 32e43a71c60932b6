//! A small closed expression language over `{+, -, *, /, ^, sqrt, exp, log,
//! sin, cos}`. Every field definition in the engine (metric coefficients,
//! Finsler norms, bundle-metric profiles, vector fields) is an [`Expr`], so
//! jets propagate through a fixed operation set and config files never carry
//! executable code.

use std::fmt;

use crate::derivkit::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Index into the variable slice passed to [`Expr::eval`].
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power, valid for any base.
    Powi(Box<Expr>, i32),
    /// Real power, valid for positive bases.
    Powf(Box<Expr>, f64),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    /// Evaluate over any scalar algebra. `proto` supplies the algebra for
    /// constants (any variable jet works).
    pub fn eval<S: Scalar>(&self, vars: &[S], proto: &S) -> Result<S> {
        Ok(match self {
            Expr::Const(c) => proto.lift(*c),
            Expr::Var(i) => {
                vars.get(*i)
                    .ok_or_else(|| Error::Invalid(format!("variable index {i} out of range")))?
                    .clone()
            }
            Expr::Neg(a) => -a.eval(vars, proto)?,
            Expr::Add(a, b) => a.eval(vars, proto)? + b.eval(vars, proto)?,
            Expr::Sub(a, b) => a.eval(vars, proto)? - b.eval(vars, proto)?,
            Expr::Mul(a, b) => a.eval(vars, proto)? * b.eval(vars, proto)?,
            Expr::Div(a, b) => a.eval(vars, proto)?.div(b.eval(vars, proto)?)?,
            Expr::Powi(a, k) => a.eval(vars, proto)?.powi(*k)?,
            Expr::Powf(a, e) => a.eval(vars, proto)?.powf(*e)?,
            Expr::Sqrt(a) => a.eval(vars, proto)?.sqrt()?,
            Expr::Exp(a) => a.eval(vars, proto)?.exp(),
            Expr::Log(a) => a.eval(vars, proto)?.ln()?,
            Expr::Sin(a) => a.eval(vars, proto)?.sin(),
            Expr::Cos(a) => a.eval(vars, proto)?.cos(),
        })
    }

    pub fn eval_f64(&self, vars: &[f64]) -> Result<f64> {
        self.eval(vars, &0.0)
    }

    /// True when the expression is a literal constant equal to `v`.
    pub fn is_const(&self, v: f64) -> bool {
        matches!(self, Expr::Const(c) if *c == v)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "${i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Powi(a, k) => write!(f, "({a} ^ {k})"),
            Expr::Powf(a, e) => write!(f, "({a} ^ {e})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

/// Parse an infix expression over the named variables.
///
/// Grammar: standard precedence (`^` binds tightest and associates right,
/// then unary minus, then `* /`, then `+ -`); function calls `sqrt(e)`,
/// `exp(e)`, `log(e)`, `sin(e)`, `cos(e)`; numeric literals; parentheses.
/// Integer exponents become [`Expr::Powi`], fractional ones [`Expr::Powf`].
pub fn parse_expr(src: &str, vars: &[&str]) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, vars };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(Error::Parse(format!(
            "unexpected trailing input near '{}'",
            p.tokens[p.pos]
        )));
    }
    Ok(e)
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
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Slash => write!(f, "/"),
            Tok::Caret => write!(f, "^"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i], '0'..='9' | '.') {
                    i += 1;
                }
                // scientific notation
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number literal '{text}'")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::Parse(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            Some(got) => Err(Error::Parse(format!("expected '{t}', found '{got}'"))),
            None => Err(Error::Parse(format!("expected '{t}', found end of input"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            // right-associative; allow a signed exponent
            let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                self.bump();
                true
            } else {
                false
            };
            let exp = self.power()?;
            let exp = if neg { Expr::Neg(Box::new(exp)) } else { exp };
            return match const_value(&exp) {
                Some(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                    Ok(Expr::Powi(Box::new(base), v as i32))
                }
                Some(v) => Ok(Expr::Powf(Box::new(base), v)),
                None => Err(Error::Parse("exponent must be a numeric constant".into())),
            };
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    let arg = Box::new(arg);
                    return match name.as_str() {
                        "sqrt" => Ok(Expr::Sqrt(arg)),
                        "exp" => Ok(Expr::Exp(arg)),
                        "log" | "ln" => Ok(Expr::Log(arg)),
                        "sin" => Ok(Expr::Sin(arg)),
                        "cos" => Ok(Expr::Cos(arg)),
                        other => Err(Error::Parse(format!("unknown function '{other}'"))),
                    };
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(Error::Parse(format!(
                        "unknown variable '{name}' (expected one of {:?})",
                        self.vars
                    ))),
                }
            }
            Some(t) => Err(Error::Parse(format!("unexpected token '{t}'"))),
            None => Err(Error::Parse("unexpected end of input".into())),
        }
    }
}

fn const_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(v) => Some(*v),
        Expr::Neg(inner) => const_value(inner).map(|v| -v),
        Expr::Powi(base, k) => const_value(base).map(|v| v.powi(*k)),
        Expr::Powf(base, x) => const_value(base).map(|v| v.powf(*x)),
        _ => None,
    }
}
