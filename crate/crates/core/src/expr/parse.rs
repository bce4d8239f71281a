//! Infix syntax: `+ - * / ^`, parentheses, rationals, `I`, and the functions
//! `exp`, `log`, `Ai`, `Bi`, `Ai'`, `Bi'`.

use std::fmt;

use num_traits::{One, Signed};

use super::{AiryKind, Expr, Node};
use crate::error::{Error, Result};
use crate::rational::{parse_rational, Rational};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Sum(ts) => {
            for (k, t) in ts.iter().enumerate() {
                match negated(t) {
                    Some(pos) => {
                        f.write_str(if k == 0 { "-" } else { " - " })?;
                        write_product_operand(&pos, f)?;
                    }
                    None => {
                        if k > 0 {
                            f.write_str(" + ")?;
                        }
                        write_sum_operand(t, f)?;
                    }
                }
            }
            Ok(())
        }
        _ => write_sum_operand(e, f),
    }
}

/// For a term printed after a minus sign, the positive remainder.
fn negated(t: &Expr) -> Option<Expr> {
    match t.node() {
        Node::Const(r) if r.is_negative() => Some(Expr::constant(-r)),
        Node::Product(fs) => match fs.first().and_then(|c| c.as_const()) {
            Some(c) if c.is_negative() => {
                let c = -c;
                let mut rest: Vec<Expr> = Vec::with_capacity(fs.len());
                if !c.is_one() {
                    rest.push(Expr::constant(c));
                }
                rest.extend(fs[1..].iter().cloned());
                Some(Expr::product(rest))
            }
            _ => None,
        },
        _ => None,
    }
}

fn write_sum_operand(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Sum(_) => {
            f.write_str("(")?;
            write_expr(e, f)?;
            f.write_str(")")
        }
        Node::Product(fs) => {
            for (k, x) in fs.iter().enumerate() {
                if k > 0 {
                    f.write_str("*")?;
                }
                write_factor(x, f)?;
            }
            Ok(())
        }
        _ => write_factor(e, f),
    }
}

/// A term following a minus sign; a lone product must not gain parentheses.
fn write_product_operand(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write_sum_operand(e, f)
}

fn write_factor(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Sum(_) | Node::Product(_) => {
            f.write_str("(")?;
            write_expr(e, f)?;
            f.write_str(")")
        }
        Node::Power(b, x) => {
            write_atom(b, f)?;
            f.write_str("^")?;
            write_atom(x, f)
        }
        _ => write_atom(e, f),
    }
}

fn is_plain_integer(r: &Rational) -> bool {
    r.is_integer() && !r.is_negative()
}

fn write_atom(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Const(r) if is_plain_integer(r) => write!(f, "{}", r.numer()),
        Node::Const(r) => write!(f, "({r})"),
        Node::I => f.write_str("I"),
        Node::Var(v) => f.write_str(v),
        Node::Exp(a) => write!(f, "exp({a})"),
        Node::Log(a) => write!(f, "log({a})"),
        Node::Airy(k, a) => write!(f, "{}({a})", k.name()),
        _ => {
            f.write_str("(")?;
            write_expr(e, f)?;
            f.write_str(")")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '0'..='9' | '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                out.push((start, Tok::Num(s[start..i].to_string())));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'\'' {
                    i += 1;
                }
                out.push((start, Tok::Ident(s[start..i].to_string())));
                continue;
            }
            other => {
                return Err(Error::Parse { offset: i, message: format!("unexpected character {other:?}") })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

/// Parses the infix syntax produced by `Display`.
pub fn parse(s: &str) -> Result<Expr> {
    let mut p = Parser { toks: tokenize(s)?, pos: 0, len: s.len() };
    let e = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

fn negate(e: Expr) -> Expr {
    match e.node() {
        Node::Const(r) => Expr::constant(-r),
        Node::Product(fs) => match fs[0].as_const() {
            Some(c) => {
                let c = -c;
                let mut rest = Vec::with_capacity(fs.len());
                if !c.is_one() {
                    rest.push(Expr::constant(c));
                }
                rest.extend(fs[1..].iter().cloned());
                Expr::product(rest)
            }
            None => {
                let mut all = vec![Expr::int(-1)];
                all.extend(fs.iter().cloned());
                Expr::from_node(Node::Product(all))
            }
        },
        _ => Expr::from_node(Node::Product(vec![Expr::int(-1), e])),
    }
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |(o, _)| *o)
    }

    fn error(&self, message: &str) -> Error {
        Error::Parse { offset: self.offset(), message: message.into() }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut terms = vec![self.signed_term()?];
        loop {
            if self.eat(&Tok::Plus) {
                terms.push(self.term()?);
            } else if self.eat(&Tok::Minus) {
                terms.push(negate(self.term()?));
            } else {
                break;
            }
        }
        Ok(Expr::sum(terms))
    }

    fn signed_term(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Minus) {
            Ok(negate(self.term()?))
        } else {
            self.term()
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.power()?];
        loop {
            if self.eat(&Tok::Star) {
                factors.push(self.power()?);
            } else if self.eat(&Tok::Slash) {
                factors.push(self.power()?.recip());
            } else {
                break;
            }
        }
        Ok(Expr::product(factors))
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat(&Tok::Caret) {
            let exponent = if self.eat(&Tok::Minus) { negate(self.power()?) } else { self.power()? };
            Ok(base.pow(exponent))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(s) => parse_rational(&s)
                .map(Expr::constant)
                .map_err(|_| Error::Parse { offset: self.toks[self.pos - 1].0, message: format!("bad number {s:?}") }),
            Tok::LParen => {
                let inner = if self.is_rational_literal() { self.rational_literal()? } else { self.sum()? };
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "exp" | "log" => Some(name.as_str()),
                    "Ai" | "Bi" | "Ai'" | "Bi'" => Some(name.as_str()),
                    _ => None,
                };
                if let Some(func) = func.filter(|_| self.peek() == Some(&Tok::LParen)) {
                    self.pos += 1;
                    let arg = self.sum()?;
                    self.expect(&Tok::RParen, "`)` closing the function argument")?;
                    return Ok(match func {
                        "exp" => arg.exp(),
                        "log" => arg.ln(),
                        "Ai" => Expr::airy(AiryKind::Ai, arg),
                        "Bi" => Expr::airy(AiryKind::Bi, arg),
                        "Ai'" => Expr::airy(AiryKind::AiPrime, arg),
                        _ => Expr::airy(AiryKind::BiPrime, arg),
                    });
                }
                if name.ends_with('\'') {
                    return Err(Error::Parse {
                        offset: self.toks[self.pos - 1].0,
                        message: format!("`{name}` must be applied to an argument"),
                    });
                }
                Ok(if name == "I" { Expr::i() } else { Expr::var(&name) })
            }
            _ => Err(Error::Parse { offset: self.toks[self.pos - 1].0, message: "expected an operand".into() }),
        }
    }

    /// `-? int (/ int)? )` immediately inside parentheses: a printed rational constant.
    fn is_rational_literal(&self) -> bool {
        let rest: Vec<&Tok> = self.toks[self.pos..].iter().map(|(_, t)| t).take(5).collect();
        let (neg, r) = match rest.first() {
            Some(Tok::Minus) => (1, &rest[1..]),
            _ => (0, &rest[..]),
        };
        let _ = neg;
        matches!(
            r,
            [Tok::Num(_), Tok::RParen, ..] | [Tok::Num(_), Tok::Slash, Tok::Num(_), Tok::RParen, ..]
        )
    }

    fn rational_literal(&mut self) -> Result<Expr> {
        let neg = self.eat(&Tok::Minus);
        let mut text = String::new();
        if neg {
            text.push('-');
        }
        while let Some(t) = self.peek() {
            match t {
                Tok::Num(s) => text.push_str(s),
                Tok::Slash => text.push('/'),
                _ => break,
            }
            self.pos += 1;
        }
        parse_rational(&text)
            .map(Expr::constant)
            .map_err(|e| self.error(&e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::v;
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn prints_readably() {
        let x = v("x");
        let e = (Expr::int(2) * &x - Expr::i() * Expr::constant(ratio(1, 2)) * x.powi(-1)).simplify();
        assert_eq!(e.to_string(), "2*x - (1/2)*I*x^(-1)");
        assert_eq!(Expr::airy(AiryKind::AiPrime, x.clone()).to_string(), "Ai'(x)");
    }

    #[test]
    fn round_trips() {
        let x = v("x");
        let y = v("y");
        let es = [
            (Expr::int(2) * &x - Expr::i() * x.powi(-1) + (&x + &y).exp() * y.ln()).simplify(),
            (-(&x) * &y).simplify(),
            Expr::constant(ratio(-3, 4)),
            Expr::airy(AiryKind::Bi, Expr::int(5).sqrt() * &x).simplify(),
            (&x - Expr::int(1)).powr(ratio(1, 3)).simplify(),
        ];
        for e in es {
            let text = e.to_string();
            assert_eq!(parse(&text).unwrap(), e, "{text}");
        }
    }

    #[test]
    fn parses_conventional_input() {
        let e = parse("x^2/2 + 3*x - 0.5").unwrap().simplify();
        let x = v("x");
        let want = (x.powi(2) * Expr::constant(ratio(1, 2)) + 3 * &x - Expr::constant(ratio(1, 2))).simplify();
        assert_eq!(e, want);
        assert_eq!(parse("Ai'(z)").unwrap(), Expr::airy(AiryKind::AiPrime, v("z")));
        assert_eq!(parse("exp(I*x)").unwrap(), (Expr::i() * v("x")).exp());
    }

    #[test]
    fn reports_error_offsets() {
        match parse("x + * y") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("(x"), Err(Error::Parse { .. })));
        assert!(matches!(parse("x $"), Err(Error::Parse { offset: 2, .. })));
    }
}
