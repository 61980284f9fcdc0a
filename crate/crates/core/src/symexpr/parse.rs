//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ('-')? base ('^' exponent)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')'
//! exponent := ('-')? integer | '(' ('-')? integer ('/' integer)? ')'
//! ```
//!
//! The parser returns the raw tree (binary, left associative); call
//! [`Expr::simplify`] for the canonical form.

use thiserror::Error;

use super::env::SymbolEnv;
use super::expr::{Expr, Func, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownSymbol { offset, .. } => *offset,
        }
    }
}

/// Parses `text`, resolving identifiers against `env`.
pub fn parse(text: &str, env: &SymbolEnv) -> Result<Expr, ParseError> {
    parse_with(text, &|name| env.is_declared(name))
}

/// Parses `text`, accepting identifiers for which `known` returns true.
pub fn parse_with(text: &str, known: &dyn Fn(&str) -> bool) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        known,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    known: &'a dyn Fn(&str) -> bool,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(vec![lhs, rhs]);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = Expr::Mul(vec![lhs, rhs]);
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let negate = self.eat(b'-');
        let mut base = self.base()?;
        if self.eat(b'^') {
            let r = self.exponent()?;
            base = Expr::Pow(Box::new(base), r);
        }
        Ok(if negate {
            Expr::Neg(Box::new(base))
        } else {
            base
        })
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        digits.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "exponent out of range".into(),
        })
    }

    fn exponent(&mut self) -> Result<Rational, ParseError> {
        let r = if self.eat(b'(') {
            let sign = if self.eat(b'-') { -1 } else { 1 };
            let num = self.integer()?;
            let den = if self.eat(b'/') { self.integer()? } else { 1 };
            if den == 0 {
                return Err(self.error("zero denominator in exponent"));
            }
            self.expect(b')')?;
            Rational::new(sign * num, den)
        } else {
            let sign = if self.eat(b'-') { -1 } else { 1 };
            Rational::from_integer(sign * self.integer()?)
        };
        // reject e.g. `x^2.5` or `x^y` explicitly rather than as trailing junk
        if matches!(self.peek(), Some(b'.') | Some(b'e') | Some(b'E')) {
            return Err(self.error("exponents must be integer or rational constants"));
        }
        Ok(r)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let src = self.src;
        let mut i = self.pos;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < src.len() && src[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > s
        };
        let int_part = digits(&mut i);
        let mut frac_part = false;
        if i < src.len() && src[i] == b'.' {
            i += 1;
            frac_part = digits(&mut i);
        }
        if !int_part && !frac_part {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if i < src.len() && (src[i] == b'e' || src[i] == b'E') {
            let mut j = i + 1;
            if j < src.len() && (src[j] == b'+' || src[j] == b'-') {
                j += 1;
            }
            let mut k = j;
            if digits(&mut k) {
                i = k;
            } else {
                self.pos = j;
                return Err(self.error("malformed exponent in number"));
            }
        }
        self.pos = i;
        let text = std::str::from_utf8(&src[start..i]).unwrap();
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Expr::Num)
            .ok_or(ParseError::Syntax {
                offset: start,
                message: "number out of range".into(),
            })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error(&format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::Func(func, Box::new(arg)));
        }
        if !(self.known)(name) {
            return Err(ParseError::UnknownSymbol {
                name: name.to_string(),
                offset: start,
            });
        }
        Ok(Expr::sym(name))
    }
}
