//! Recursive-descent expression parser.
//!
//! Grammar (whitespace-insensitive, byte offsets in errors):
//!
//! ```text
//! expr     := term (('+'|'-') term)*          left-associative
//! term     := unary (('*'|'/') unary)*        left-associative
//! unary    := '-' unary | power
//! power    := atom ('^' exponent)?
//! exponent := ['-'] number
//! atom     := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. Identifiers
//! `x`, `y`, `z` are variables, `sin|cos|exp|sqrt` are functions, anything
//! else is a named parameter (resolved at evaluation time).

use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Var};

#[derive(Debug, Error, PartialEq)]
#[error("syntax error at byte {offset}: expected {expected}")]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: String,
}

#[derive(Debug, PartialEq)]
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

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token with its starting byte offset; `None` at end of input.
    fn next(&mut self) -> Result<Option<(usize, Tok)>, SyntaxError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let b = self.src[start];
        let tok = match b {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let end = self.scan_number(start)?;
                let text = std::str::from_utf8(&self.src[start..end]).unwrap();
                let v: f64 = text.parse().map_err(|_| SyntaxError {
                    offset: start,
                    expected: "a numeric literal".into(),
                })?;
                self.pos = end;
                return Ok(Some((start, Tok::Num(v))));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = start;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[start..end]).unwrap().to_string();
                self.pos = end;
                return Ok(Some((start, Tok::Ident(text))));
            }
            _ => {
                return Err(SyntaxError {
                    offset: start,
                    expected: "an operand or operator".into(),
                })
            }
        };
        self.pos += 1;
        Ok(Some((start, tok)))
    }

    fn scan_number(&self, start: usize) -> Result<usize, SyntaxError> {
        let mut end = start;
        let mut seen_dot = false;
        while end < self.src.len() {
            match self.src[end] {
                b'0'..=b'9' => end += 1,
                b'.' if !seen_dot => {
                    seen_dot = true;
                    end += 1;
                }
                b'e' | b'E' => {
                    let mut e = end + 1;
                    if e < self.src.len() && (self.src[e] == b'+' || self.src[e] == b'-') {
                        e += 1;
                    }
                    if e < self.src.len() && self.src[e].is_ascii_digit() {
                        end = e + 1;
                        while end < self.src.len() && self.src[end].is_ascii_digit() {
                            end += 1;
                        }
                    }
                    break;
                }
                _ => break,
            }
        }
        if end == start {
            return Err(SyntaxError {
                offset: start,
                expected: "a numeric literal".into(),
            });
        }
        Ok(end)
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end_offset: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.idx)
            .map(|(o, _)| *o)
            .unwrap_or(self.end_offset)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(_, t)| match t {
            Tok::Num(v) => Tok::Num(*v),
            Tok::Ident(s) => Tok::Ident(s.clone()),
            Tok::Plus => Tok::Plus,
            Tok::Minus => Tok::Minus,
            Tok::Star => Tok::Star,
            Tok::Slash => Tok::Slash,
            Tok::Caret => Tok::Caret,
            Tok::LParen => Tok::LParen,
            Tok::RParen => Tok::RParen,
        });
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<(), SyntaxError> {
        match self.bump() {
            Some(Tok::RParen) => Ok(()),
            _ => Err(SyntaxError {
                offset: self.toks.get(self.idx - 1).map(|(o, _)| *o).unwrap_or(self.end_offset),
                expected: "`)`".into(),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let exp = self.exponent()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr, SyntaxError> {
        let offset = self.offset();
        let negate = if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Some(Tok::Num(v)) => {
                let num = Expr::Num(v);
                Ok(if negate { Expr::Neg(Box::new(num)) } else { num })
            }
            _ => Err(SyntaxError {
                offset,
                expected: "a numeric exponent".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let func = Func::from_name(&name).ok_or_else(|| SyntaxError {
                        offset,
                        expected: "one of the functions sin, cos, exp, sqrt".into(),
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else if let Some(var) = Var::from_name(&name) {
                    Ok(Expr::Var(var))
                } else {
                    Ok(Expr::Param(name))
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(SyntaxError {
                offset,
                expected: "an operand".into(),
            }),
        }
    }
}

/// Parses an expression from text, reporting the byte offset of any error.
pub fn parse_expression(text: &str) -> Result<Expr, SyntaxError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    while let Some(t) = lexer.next()? {
        toks.push(t);
    }
    let mut parser = Parser {
        toks,
        idx: 0,
        end_offset: text.len(),
    };
    let e = parser.expr()?;
    if parser.idx != parser.toks.len() {
        return Err(SyntaxError {
            offset: parser.offset(),
            expected: "end of expression".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ast::{BinOp::*, Expr::*, Func, Var};

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn normal_form_component() {
        let got = parse_expression("b*(y + x^2)").unwrap();
        let want = Bin(
            Mul,
            b(Param("b".into())),
            b(Bin(
                Add,
                b(Var(Var::Y)),
                b(Bin(Pow, b(Var(Var::X)), b(Num(2.0)))),
            )),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn precedence_and_unary() {
        let got = parse_expression("-3*x/ (2*a)").unwrap();
        let want = Bin(
            Div,
            b(Bin(Mul, b(Neg(b(Num(3.0)))), b(Var(Var::X)))),
            b(Bin(Mul, b(Num(2.0)), b(Param("a".into())))),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn pow_binds_tighter_than_neg() {
        let got = parse_expression("-x^2").unwrap();
        let want = Neg(b(Bin(Pow, b(Var(Var::X)), b(Num(2.0)))));
        assert_eq!(got, want);
    }

    #[test]
    fn dangling_operator_offset() {
        let err = parse_expression("x +").unwrap_err();
        assert_eq!(err.offset, 3);
    }

    #[test]
    fn unknown_function_rejected() {
        let err = parse_expression("tan(x)").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(err.expected.contains("sin"));
    }

    #[test]
    fn calls_and_scientific_literals() {
        let got = parse_expression("sqrt(x) + 1.5e-3*cos(y)").unwrap();
        match got {
            Bin(Add, l, r) => {
                assert_eq!(*l, Call(Func::Sqrt, b(Var(Var::X))));
                match *r {
                    Bin(Mul, c, f) => {
                        assert_eq!(*c, Num(1.5e-3));
                        assert_eq!(*f, Call(Func::Cos, b(Var(Var::Y))));
                    }
                    other => panic!("unexpected rhs {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_exponent() {
        let got = parse_expression("x^-2").unwrap();
        assert_eq!(got, Bin(Pow, b(Var(Var::X)), b(Neg(b(Num(2.0))))));
    }

    #[test]
    fn non_literal_exponent_rejected() {
        assert!(parse_expression("x^y").is_err());
        assert!(parse_expression("x^(2)").is_err());
    }

    #[test]
    fn trailing_garbage_rejected() {
        let err = parse_expression("x 2").unwrap_err();
        assert_eq!(err.offset, 2);
    }
}
