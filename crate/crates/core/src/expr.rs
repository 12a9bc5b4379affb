//! The feature expression language.
//!
//! ```text
//! expr := name | number | expr ('+'|'-'|'*') expr | '(' expr ')' | expr '<' expr
//! ```
//!
//! `*` binds tighter than `+`/`-`, and `<` is loosest. A comparison evaluates
//! to `1.0` when it holds and `0.0` otherwise. A leading `-` is accepted as
//! part of a numeric literal.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Attr(String),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Lt(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character {found:?} at offset {offset}")]
    UnexpectedChar { offset: usize, found: char },
    #[error("unexpected end of expression at offset {offset}")]
    UnexpectedEnd { offset: usize },
    #[error("invalid number {text:?} at offset {offset}")]
    InvalidNumber { offset: usize, text: String },
    #[error("trailing input at offset {offset}")]
    Trailing { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown attribute {0:?}")]
pub struct UnknownAttribute(pub String);

impl Expr {
    pub fn attr(name: &str) -> Self {
        Expr::Attr(name.to_owned())
    }

    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let mut p = Parser { src, pos: 0 };
        let e = p.comparison()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(ParseError::Trailing { offset: p.pos });
        }
        Ok(e)
    }

    /// Evaluates against an attribute lookup.
    pub fn eval<F>(&self, lookup: &F) -> Result<f64, UnknownAttribute>
    where
        F: Fn(&str) -> Option<f64>,
    {
        Ok(match self {
            Expr::Attr(name) => lookup(name).ok_or_else(|| UnknownAttribute(name.clone()))?,
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(lookup)? + b.eval(lookup)?,
            Expr::Sub(a, b) => a.eval(lookup)? - b.eval(lookup)?,
            Expr::Mul(a, b) => a.eval(lookup)? * b.eval(lookup)?,
            Expr::Lt(a, b) => {
                if a.eval(lookup)? < b.eval(lookup)? {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    pub fn attributes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Attr(n) => {
                out.insert(n.as_str());
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Lt(a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Lt(..) => 0,
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) => 2,
            Expr::Attr(_) | Expr::Const(_) => 3,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Operators are left-associative, so a right operand of equal
        // precedence needs parentheses.
        let write_side = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        let (op, a, b) = match self {
            Expr::Attr(n) => return f.write_str(n),
            Expr::Const(c) => return write!(f, "{c}"),
            Expr::Add(a, b) => ("+", a, b),
            Expr::Sub(a, b) => ("-", a, b),
            Expr::Mul(a, b) => ("*", a, b),
            Expr::Lt(a, b) => ("<", a, b),
        };
        let p = self.precedence();
        write_side(f, a, p)?;
        write!(f, " {op} ")?;
        write_side(f, b, p + 1)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.sum()?;
        loop {
            self.skip_ws();
            if self.peek() == Some('<') {
                self.pos += 1;
                let rhs = self.sum()?;
                lhs = Expr::Lt(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    let rhs = self.product()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some('-') => {
                    self.pos += 1;
                    let rhs = self.product()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.atom()?;
        loop {
            self.skip_ws();
            if self.peek() == Some('*') {
                self.pos += 1;
                let rhs = self.atom()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Err(ParseError::UnexpectedEnd { offset: start });
        };
        if c == '(' {
            self.pos += 1;
            let inner = self.comparison()?;
            self.skip_ws();
            return match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    Ok(inner)
                }
                Some(found) => Err(ParseError::UnexpectedChar { offset: self.pos, found }),
                None => Err(ParseError::UnexpectedEnd { offset: self.pos }),
            };
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            return Ok(Expr::Attr(self.src[start..self.pos].to_owned()));
        }
        if c.is_ascii_digit() || c == '.' || c == '-' {
            if c == '-' {
                self.pos += 1;
            }
            while let Some(c) = self.peek() {
                let exp_sign = (c == '-' || c == '+')
                    && matches!(self.src[..self.pos].chars().last(), Some('e' | 'E'));
                if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let text = &self.src[start..self.pos];
            return text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Expr::Const)
                .ok_or_else(|| ParseError::InvalidNumber { offset: start, text: text.to_owned() });
        }
        Err(ParseError::UnexpectedChar { offset: start, found: c })
    }
}
