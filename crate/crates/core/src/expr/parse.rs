//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := factor ('*' factor)*
//! factor  := '-' factor | atom ('^' uint)?
//! atom    := complex-literal | coord | 'conj(' expr ')' | '(' expr ')'
//! coord   := 'z' uint | 'z' | 'w'        (z = z1, w = z2)
//! literal := float | float 'i' | 'i'
//! ```
//!
//! Whitespace is insignificant. The canonical printer emits expressions in
//! this grammar, so parse∘print is the identity on canonical forms.

use super::{ExprError, SesquiPolynomial, C64};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Imag(f64),
    Coord(usize), // zero-based index
    Conj,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Caret,
    Uint(u32),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, dim: usize) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
            dim,
        }
    }

    fn err(&self, pos: usize, msg: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            pos,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Token)>, ExprError> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let ch = self.src[self.pos];
            match ch {
                b' ' | b'\t' | b'\n' | b'\r' => {
                    self.pos += 1;
                }
                b'+' => {
                    self.pos += 1;
                    out.push((start, Token::Plus));
                }
                b'-' => {
                    self.pos += 1;
                    out.push((start, Token::Minus));
                }
                b'*' => {
                    self.pos += 1;
                    out.push((start, Token::Star));
                }
                b'^' => {
                    self.pos += 1;
                    out.push((start, Token::Caret));
                }
                b'(' => {
                    self.pos += 1;
                    out.push((start, Token::LParen));
                }
                b')' => {
                    self.pos += 1;
                    out.push((start, Token::RParen));
                }
                b'0'..=b'9' | b'.' => {
                    let tok = self.lex_number(start)?;
                    out.push((start, tok));
                }
                b'i' => {
                    self.pos += 1;
                    out.push((start, Token::Imag(1.0)));
                }
                b'c' => {
                    if self.src[self.pos..].starts_with(b"conj") {
                        self.pos += 4;
                        out.push((start, Token::Conj));
                    } else {
                        return Err(self.err(start, "unknown identifier (expected conj)"));
                    }
                }
                b'z' => {
                    self.pos += 1;
                    let mut idx: usize = 0;
                    let mut saw_digit = false;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        saw_digit = true;
                        idx = idx * 10 + (self.src[self.pos] - b'0') as usize;
                        self.pos += 1;
                    }
                    let index = if saw_digit { idx } else { 1 };
                    if index == 0 {
                        return Err(self.err(start, "coordinate indices start at 1"));
                    }
                    if index > self.dim {
                        return Err(ExprError::CoordOutOfRange {
                            index,
                            dim: self.dim,
                        });
                    }
                    out.push((start, Token::Coord(index - 1)));
                }
                b'w' => {
                    self.pos += 1;
                    if self.dim < 2 {
                        return Err(ExprError::CoordOutOfRange {
                            index: 2,
                            dim: self.dim,
                        });
                    }
                    out.push((start, Token::Coord(1)));
                }
                _ => return Err(self.err(start, format!("unexpected character '{}'", ch as char))),
            }
        }
        Ok(out)
    }

    fn lex_number(&mut self, start: usize) -> Result<Token, ExprError> {
        let mut end = self.pos;
        let mut seen_dot = false;
        let mut seen_exp = false;
        while end < self.src.len() {
            let c = self.src[end];
            if c.is_ascii_digit() {
                end += 1;
            } else if c == b'.' && !seen_dot && !seen_exp {
                seen_dot = true;
                end += 1;
            } else if (c == b'e' || c == b'E') && !seen_exp && end > self.pos {
                seen_exp = true;
                end += 1;
                if end < self.src.len() && (self.src[end] == b'+' || self.src[end] == b'-') {
                    end += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
        let value: f64 = text
            .parse()
            .map_err(|_| self.err(start, format!("invalid number literal '{text}'")))?;
        self.pos = end;
        // a trailing 'i' makes the literal imaginary
        if self.pos < self.src.len() && self.src[self.pos] == b'i' {
            self.pos += 1;
            Ok(Token::Imag(value))
        } else {
            // an all-digit literal may serve as an exponent after '^'
            if !seen_dot
                && !seen_exp
                && value.fract() == 0.0
                && value >= 0.0
                && value <= u32::MAX as f64
            {
                Ok(Token::Uint(value as u32))
            } else {
                Ok(Token::Number(value))
            }
        }
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    dim: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|(p, _)| *p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(_, t)| t.clone());
        self.cursor += 1;
        t
    }

    fn err(&self, msg: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        }
    }

    fn expr(&mut self) -> Result<SesquiPolynomial, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Some(Token::Minus) => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<SesquiPolynomial, ExprError> {
        let mut acc = self.factor()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.bump();
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<SesquiPolynomial, ExprError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            let inner = self.factor()?;
            return Ok(-&inner);
        }
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            match self.bump() {
                Some(Token::Uint(e)) => Ok(base.pow(e)),
                _ => Err(self.err("expected a nonnegative integer exponent after '^'")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<SesquiPolynomial, ExprError> {
        let n = self.dim;
        match self.bump() {
            Some(Token::Number(v)) => Ok(SesquiPolynomial::constant(n, C64::new(v, 0.0))),
            Some(Token::Uint(v)) => Ok(SesquiPolynomial::constant(n, C64::new(v as f64, 0.0))),
            Some(Token::Imag(v)) => Ok(SesquiPolynomial::constant(n, C64::new(0.0, v))),
            Some(Token::Coord(k)) => Ok(SesquiPolynomial::coord(n, k)),
            Some(Token::Conj) => {
                if !matches!(self.peek(), Some(Token::LParen)) {
                    return Err(self.err("expected '(' after conj"));
                }
                self.bump();
                let inner = self.expr()?;
                if !matches!(self.peek(), Some(Token::RParen)) {
                    return Err(self.err("expected ')'"));
                }
                self.bump();
                Ok(inner.conj())
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                if !matches!(self.peek(), Some(Token::RParen)) {
                    return Err(self.err("expected ')'"));
                }
                self.bump();
                Ok(inner)
            }
            Some(tok) => Err(self.err(format!("unexpected token {tok:?}"))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parse an expression into canonical form. `n` is the chart dimension;
/// the aliases `z`, `w` denote `z1`, `z2`.
pub fn parse(text: &str, n: usize) -> Result<SesquiPolynomial, ExprError> {
    let tokens = Lexer::new(text, n).tokens()?;
    if tokens.is_empty() {
        return Err(ExprError::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        cursor: 0,
        dim: n,
        src_len: text.len(),
    };
    let p = parser.expr()?;
    if parser.cursor != parser.tokens.len() {
        return Err(parser.err("trailing input after expression"));
    }
    Ok(p)
}
