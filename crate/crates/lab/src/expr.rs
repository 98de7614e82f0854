//! Arithmetic expressions in one variable `eps`, used for delta rules such as
//! `eps^2/4`. Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('-' | '+') factor | power
//! power  := atom ('^' factor)?
//! atom   := number | 'eps' | '(' expr ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus on its left,
//! so `-eps^2` is `-(eps^2)`.

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse `{input}` at byte {pos}: {msg}")]
pub struct ParseError {
    pub input: String,
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Eps,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(input: &str) -> Result<Expr, ParseError> {
        let mut p = Parser { src: input, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != input.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, eps: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Eps => eps,
            Expr::Neg(a) => -a.eval(eps),
            Expr::Add(a, b) => a.eval(eps) + b.eval(eps),
            Expr::Sub(a, b) => a.eval(eps) - b.eval(eps),
            Expr::Mul(a, b) => a.eval(eps) * b.eval(eps),
            Expr::Div(a, b) => a.eval(eps) / b.eval(eps),
            Expr::Pow(a, b) => a.eval(eps).powf(b.eval(eps)),
        }
    }

    /// Local power-law exponent `q` of `eps -> eval(eps)` near `eps = 0`,
    /// estimated from two small arguments.
    pub fn small_eps_exponent(&self) -> f64 {
        let (e1, e2) = (1e-3, 1e-4);
        (self.eval(e1).abs() / self.eval(e2).abs()).ln() / (e1 / e2).ln()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Eps => write!(f, "eps"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ParseError {
        ParseError { input: self.src.to_string(), pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(c @ ('*' | '/' | '\u{b7}')) = self.peek() {
            self.pos += c.len_utf8();
            let rhs = self.factor()?;
            lhs = if c == '/' { Expr::Div(lhs.into(), rhs.into()) } else { Expr::Mul(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(self.factor()?.into()))
            }
            Some('+') => {
                self.pos += 1;
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Pow(base.into(), exp.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(_) if self.src[self.pos..].starts_with("eps") => {
                self.pos += 3;
                Ok(Expr::Eps)
            }
            Some(_) => Err(self.error("expected a number, `eps` or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let rest = &self.src[self.pos..];
        let bytes = rest.as_bytes();
        let mut end = 0;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        // optional exponent, e.g. 1e-3
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') && !rest[end..].starts_with("eps") {
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
        let v: f64 = rest[..end].parse().map_err(|_| self.error("malformed number"))?;
        self.pos += end;
        Ok(Expr::Num(v))
    }
}
