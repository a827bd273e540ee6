//! Expression grammar for operators and polynomials.
//!
//! ```text
//! expr    := ['-'] term (('+' | '-') term)*
//! term    := factor (('*' factor) | ('/' uint))*
//! factor  := primary ('^' uint)?
//! primary := uint | 'i' | name | '(' expr ')' | 'D' '[' var ']'
//! ```
//!
//! Factors compose as operators, so `psi*D[x1]` is multiplication by psi
//! followed by a derivative, while `D[x1]*psi` expands by the product
//! rule.  `#` starts a comment running to end of line.

use std::sync::Arc;

use super::alphabet::{Alphabet, Var};
use super::coeff::{self, Coeff};
use super::op::DiffOp;
use super::poly::DiffPoly;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    Int(u64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
}

pub fn lex(input: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'+' => {
                toks.push((i, Tok::Plus));
                i += 1;
            }
            b'-' => {
                toks.push((i, Tok::Minus));
                i += 1;
            }
            b'*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            b'/' => {
                toks.push((i, Tok::Slash));
                i += 1;
            }
            b'^' => {
                toks.push((i, Tok::Caret));
                i += 1;
            }
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            b'[' => {
                toks.push((i, Tok::LBrack));
                i += 1;
            }
            b']' => {
                toks.push((i, Tok::RBrack));
                i += 1;
            }
            b',' => {
                toks.push((i, Tok::Comma));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: u64 = input[start..i].parse().map_err(|_| Error::Parse {
                    pos: start,
                    msg: "integer literal out of range".into(),
                })?;
                toks.push((start, Tok::Int(n)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Name(input[start..i].to_string())));
            }
            _ => {
                return Err(Error::Parse {
                    pos: i,
                    msg: format!("unexpected character {:?}", b as char),
                })
            }
        }
    }
    Ok(toks)
}

pub struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    alph: &'a Arc<Alphabet>,
}

impl<'a> Parser<'a> {
    pub fn new(input: &str, alph: &'a Arc<Alphabet>) -> Result<Self> {
        let toks = lex(input)?;
        let end = input.len();
        Ok(Parser { toks, pos: 0, end, alph })
    }

    /// Parser over an already-lexed token slice (used by the extended
    /// quadratic-form grammar).
    pub fn from_tokens(toks: Vec<(usize, Tok)>, alph: &'a Arc<Alphabet>) -> Self {
        let end = toks.last().map(|(p, _)| *p + 1).unwrap_or(0);
        Parser { toks, pos: 0, end, alph }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    pub fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.here(), msg: msg.into() })
    }

    pub fn expect(&mut self, tok: Tok) -> Result<()> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Parse {
                pos: self.here(),
                msg: format!("expected {tok:?}, found {other:?}"),
            }),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn uint(&mut self) -> Result<u64> {
        match self.next() {
            Some(Tok::Int(n)) => Ok(n),
            other => Err(Error::Parse {
                pos: self.here(),
                msg: format!("expected integer, found {other:?}"),
            }),
        }
    }

    pub fn var(&mut self) -> Result<Var> {
        let pos = self.here();
        match self.next() {
            Some(Tok::Name(n)) if n == "t" => Ok(Var::T),
            Some(Tok::Name(n)) if n.starts_with('x') => {
                let j: u8 = n[1..].parse().map_err(|_| Error::Parse {
                    pos,
                    msg: format!("bad coordinate name {n:?}"),
                })?;
                if self.alph.var_slot(Var::X(j)).is_none() {
                    return Err(Error::Parse {
                        pos,
                        msg: format!("coordinate {n} outside dimension {}", self.alph.dimension()),
                    });
                }
                Ok(Var::X(j))
            }
            other => Err(Error::Parse {
                pos,
                msg: format!("expected variable name, found {other:?}"),
            }),
        }
    }

    pub fn expr(&mut self) -> Result<DiffOp> {
        let mut negate = false;
        if self.peek() == Some(&Tok::Minus) {
            self.next();
            negate = true;
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    acc = acc.add(&self.term()?)?;
                }
                Some(Tok::Minus) => {
                    self.next();
                    acc = acc.sub(&self.term()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<DiffOp> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    acc = acc.compose(&self.factor()?)?;
                }
                Some(Tok::Slash) => {
                    self.next();
                    let pos = self.here();
                    let n = self.uint()?;
                    if n == 0 {
                        return Err(Error::Parse { pos, msg: "division by zero".into() });
                    }
                    acc = acc.scale(&coeff::from_rat(1, n as i64));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<DiffOp> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.next();
            let n = self.uint()?;
            let mut acc = DiffOp::identity(self.alph);
            for _ in 0..n {
                acc = acc.compose(&base)?;
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<DiffOp> {
        let pos = self.here();
        match self.next() {
            Some(Tok::Int(n)) => {
                Ok(DiffOp::scalar(self.alph, coeff::from_int(n as i64)))
            }
            Some(Tok::Name(n)) if n == "i" => {
                Ok(DiffOp::scalar(self.alph, coeff::imag_unit()))
            }
            Some(Tok::Name(n)) if n == "D" => {
                self.expect(Tok::LBrack)?;
                let v = self.var()?;
                self.expect(Tok::RBrack)?;
                Ok(DiffOp::partial(self.alph, v, 1))
            }
            Some(Tok::Name(n)) => match self.alph.index_by_name(&n) {
                Some(idx) => Ok(DiffOp::mult(DiffPoly::generator_idx(self.alph, idx))),
                None => Err(Error::Parse {
                    pos,
                    msg: format!("unknown generator {n:?}"),
                }),
            },
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(Error::Parse {
                pos,
                msg: format!("expected a value, found {other:?}"),
            }),
        }
    }

    pub fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.err("trailing input")
        }
    }
}

/// Parse a differential operator expression.
pub fn parse_op(input: &str, alph: &Arc<Alphabet>) -> Result<DiffOp> {
    let mut p = Parser::new(input, alph)?;
    let op = p.expr()?;
    p.finish()?;
    Ok(op)
}

/// Parse a polynomial: an operator expression with no derivatives.
pub fn parse_poly(input: &str, alph: &Arc<Alphabet>) -> Result<DiffPoly> {
    let op = parse_op(input, alph)?;
    op_as_poly(&op)
}

pub fn op_as_poly(op: &DiffOp) -> Result<DiffPoly> {
    let alph = op.alphabet();
    if op.is_zero() {
        return Ok(DiffPoly::zero(alph));
    }
    let mut it = op.terms();
    if let (Some((a, p)), None) = (it.next(), it.next()) {
        if a.is_zero() {
            return Ok(p.clone());
        }
    }
    Err(Error::Parse {
        pos: 0,
        msg: "expected a polynomial, found a differential operator".into(),
    })
}

/// Helper used by the scalar coefficient slots in quadratic-form files.
pub fn parse_coeff(input: &str) -> Result<Coeff> {
    let alph = Alphabet::new(1);
    let p = parse_poly(input, &alph)?;
    if p.is_zero() {
        return Ok(coeff::from_int(0));
    }
    let mut it = p.terms();
    if let (Some((m, c)), None) = (it.next(), it.next()) {
        if m.is_unit() {
            return Ok(c.clone());
        }
    }
    Err(Error::Parse { pos: 0, msg: "expected a scalar".into() })
}
