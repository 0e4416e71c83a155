//! Token cursor and the expression grammar shared by every textual front end.

use std::fmt;

use crate::ast::{BinaryOp, Expr, Span, UnaryOp};
use crate::lexer::{tokenize, LexError, Tok, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.column, self.message)
    }
}

impl std::error::Error for SyntaxError {}

impl From<LexError> for SyntaxError {
    fn from(e: LexError) -> Self {
        SyntaxError { message: e.message, span: e.span }
    }
}

pub type PResult<T> = Result<T, SyntaxError>;

pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> PResult<Cursor> {
        Ok(Cursor { toks: tokenize(src)?, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        self.peek_at(0)
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos.min(self.toks.len() - 1)].span
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(SyntaxError { message: message.into(), span: self.span() })
    }

    pub fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn is_punct_at(&self, n: usize, p: &str) -> bool {
        matches!(self.peek_at(n), Tok::Punct(q) if *q == p)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.is_punct(p) {
            Ok(self.next().span)
        } else {
            self.unexpected(&format!("`{p}`"))
        }
    }

    pub fn is_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn is_ident_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Ident(s) if s == kw)
    }

    pub fn eat_ident(&mut self, kw: &str) -> bool {
        if self.is_ident(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_ident(kw) {
            Ok(self.next().span)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    pub fn expect_ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.next().span;
                Ok((s, span))
            }
            _ => self.unexpected("identifier"),
        }
    }

    pub fn expect_uint(&mut self) -> PResult<u64> {
        match *self.peek() {
            Tok::Int(v) => {
                self.next();
                Ok(v)
            }
            _ => self.unexpected("integer"),
        }
    }

    pub fn parse_expr(&mut self) -> PResult<Expr> {
        self.parse_binary(1)
    }

    fn peek_binop(&self) -> Option<BinaryOp> {
        match self.peek() {
            Tok::Punct(p) => BinaryOp::from_symbol(p),
            _ => None,
        }
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.parse_unary()?;
        while let Some(op) = self.peek_binop() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.next();
            let rhs = self.parse_binary(p + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        if self.is_punct("-") {
            // `-<literal>` is a negative literal unless a postfix follows.
            let postfix_follows =
                self.is_punct_at(2, ".") || self.is_punct_at(2, "[") || self.is_punct_at(2, "(");
            match *self.peek_at(1) {
                Tok::Int(v) if !postfix_follows => {
                    let span = self.next().span;
                    self.next();
                    if v > i64::MAX as u64 + 1 {
                        return Err(SyntaxError { message: "integer literal out of range".into(), span });
                    }
                    return Ok(Expr::Int((v as i128).wrapping_neg() as i64));
                }
                Tok::Float(v) if !postfix_follows => {
                    self.next();
                    self.next();
                    return Ok(Expr::Float(-v));
                }
                _ => {}
            }
            self.next();
            let e = self.parse_unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(e)));
        }
        if self.eat_punct("!") {
            let e = self.parse_unary()?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(e)));
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> PResult<Expr> {
        let mut e = self.parse_primary()?;
        loop {
            if self.eat_punct("[") {
                let idx = self.parse_expr()?;
                self.expect_punct("]")?;
                e = Expr::index(e, idx);
            } else if self.eat_punct(".") {
                let (name, _) = self.expect_ident()?;
                if self.eat_punct("(") {
                    let args = self.parse_args(")")?;
                    e = Expr::method(e, name, args);
                } else {
                    e = Expr::field(e, name);
                }
            } else {
                return Ok(e);
            }
        }
    }

    /// Comma-separated expressions up to (and consuming) `close`.
    pub fn parse_args(&mut self, close: &str) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat_punct(close) {
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            if self.eat_punct(close) {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                if v > i64::MAX as u64 {
                    return Err(SyntaxError { message: "integer literal out of range".into(), span });
                }
                Ok(Expr::Int(v as i64))
            }
            Tok::Float(v) => {
                self.next();
                Ok(Expr::Float(v))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Expr::Str(s))
            }
            Tok::Ident(name) => {
                self.next();
                match name.as_str() {
                    "true" => return Ok(Expr::Bool(true)),
                    "false" => return Ok(Expr::Bool(false)),
                    _ => {}
                }
                if self.eat_punct("(") {
                    let args = self.parse_args(")")?;
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::Punct("(") => {
                self.next();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.unexpected("expression"),
        }
    }
}

/// Parses a complete expression from text.
pub fn parse_expr_text(src: &str) -> PResult<Expr> {
    let mut c = Cursor::new(src)?;
    let e = c.parse_expr()?;
    if !c.at_eof() {
        return c.unexpected("end of expression");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(s: &str) {
        let e = parse_expr_text(s).unwrap();
        assert_eq!(e.to_string(), s);
        assert_eq!(parse_expr_text(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn precedence_and_round_trip() {
        rt("a + b * c");
        rt("(a + b) * c");
        rt("a - (b - c)");
        rt("!(a && b) || c < d");
        rt("graph.edges(n)");
        rt("e.dst.level == INF");
        rt("component_minwt[n_component] > minwt");
        rt("-5 * x");
        rt("-(5)");
        rt("(-5).x");
        rt("-(-x)");
        rt("printf(\"a %d\\n\", x)");
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(parse_expr_text("-7").unwrap(), Expr::Int(-7));
        assert_eq!(parse_expr_text("-9223372036854775808").unwrap(), Expr::Int(i64::MIN));
        assert!(parse_expr_text("9223372036854775808").is_err());
    }

    #[test]
    fn error_positions() {
        let e = parse_expr_text("a +\n  )").unwrap_err();
        assert_eq!((e.span.line, e.span.column), (2, 3));
    }
}
