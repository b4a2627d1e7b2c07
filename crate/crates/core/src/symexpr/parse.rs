use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use super::expr::{Expr, Func, Rational, Sym};

/// Parse failure with a one-based character column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at column {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn err(position: usize, message: impl Into<String>) -> ParseError {
    ParseError { position, message: message.into() }
}

fn decimal(mantissa: &str, exponent: i64) -> Rational {
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = digits.parse().unwrap_or_else(|_| BigInt::zero());
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    if scale >= 0 {
        Rational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(n, num_traits::pow(ten, (-scale) as usize))
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let mantissa: String = chars[start..i].iter().collect();
            if mantissa.matches('.').count() > 1 {
                return Err(err(col, format!("malformed number `{mantissa}`")));
            }
            let mut exponent = 0i64;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                let digits_start = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j == digits_start {
                    return Err(err(i + 1, "missing exponent digits"));
                }
                let text: String = chars[i + 1..j].iter().collect();
                exponent = text.parse().map_err(|_| err(i + 1, "exponent out of range"))?;
                if exponent.abs() > 400 {
                    return Err(err(i + 1, "exponent out of range"));
                }
                i = j;
            }
            out.push((Tok::Num(decimal(&mantissa, exponent)), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(col, format!("unexpected character `{c}`"))),
            };
            out.push((tok, col));
            i += 1;
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

fn symbol(name: &str, dim: usize, col: usize) -> Result<Option<Sym>, ParseError> {
    if name == "t" {
        return Ok(Some(Sym::T));
    }
    if name == "p0" {
        return Ok(Some(Sym::P0));
    }
    let (ctor, digits): (fn(usize) -> Sym, &str) = if let Some(d) = name.strip_prefix("qtt") {
        (Sym::Qtt, d)
    } else if let Some(d) = name.strip_prefix("qt") {
        (Sym::Qt, d)
    } else if let Some(d) = name.strip_prefix("q") {
        (Sym::Q, d)
    } else if let Some(d) = name.strip_prefix("pt") {
        (Sym::Pt, d)
    } else if let Some(d) = name.strip_prefix("p") {
        (Sym::P, d)
    } else {
        return Ok(None);
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Ok(None);
    }
    let k: usize = digits.parse().map_err(|_| err(col, "index out of range"))?;
    if k == 0 || k > dim {
        return Err(err(col, format!("`{name}` is outside dimension {dim}")));
    }
    Ok(Some(ctor(k - 1)))
}

impl Lexer {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
}

struct Parser {
    lx: Lexer,
    dim: usize,
}

impl Parser {
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.lx.peek() {
                Tok::Op('+') => {
                    self.lx.bump();
                    acc = acc + self.term()?;
                }
                Tok::Op('-') => {
                    self.lx.bump();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.lx.peek() {
                Tok::Op('*') => {
                    self.lx.bump();
                    acc = acc * self.unary()?;
                }
                Tok::Op('/') => {
                    self.lx.bump();
                    acc = acc / self.unary()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.lx.peek() {
            Tok::Op('-') => {
                self.lx.bump();
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.lx.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.lx.peek() {
            self.lx.bump();
            let col = self.lx.col();
            let exponent = self.unary()?;
            return match exponent.as_rational() {
                Some(r) => Ok(Expr::power(base, r.clone())),
                None => Err(err(col, "exponent must be a rational constant")),
            };
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, col) = self.lx.bump();
        match tok {
            Tok::Num(r) => Ok(Expr::rational(r)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "pi" => return Ok(Expr::pi()),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "log" => Some(Func::Log),
                    "sqrt" => None,
                    _ => {
                        return match symbol(&name, self.dim, col)? {
                            Some(s) => Ok(Expr::sym(s)),
                            None => Err(err(col, format!("unknown identifier `{name}`"))),
                        }
                    }
                };
                if *self.lx.peek() != Tok::LParen {
                    return Err(err(self.lx.col(), format!("expected `(` after `{name}`")));
                }
                self.lx.bump();
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(match func {
                    Some(f) => Expr::apply(f, arg),
                    None => arg.sqrt(),
                })
            }
            Tok::End => Err(err(col, "unexpected end of input")),
            Tok::RParen => Err(err(col, "unexpected `)`")),
            Tok::Op(c) => Err(err(col, format!("unexpected `{c}`"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.lx.bump() {
            (Tok::RParen, _) => Ok(()),
            (_, col) => Err(err(col, "expected `)`")),
        }
    }
}

/// Parses the expression grammar over an alphabet of dimension `dim`.
///
/// Identifiers are `t`, `q1..qn`, `qt1..qtn`, `qtt1..qttn`, `p0`, `p1..pn`
/// (plus `pt1..ptn` for momentum velocities), the constant `pi`, and the
/// functions `sin cos exp log sqrt`. Decimal literals are read exactly.
pub fn parse(src: &str, dim: usize) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { lx: Lexer { toks, pos: 0 }, dim };
    let e = p.expr()?;
    match p.lx.peek() {
        Tok::End => Ok(e),
        _ => Err(err(p.lx.col(), "unexpected trailing input")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse("0.5", 1).unwrap(), Expr::frac(1, 2));
        assert_eq!(parse("1e-3", 1).unwrap(), Expr::frac(1, 1000));
        assert_eq!(parse("2.5E1", 1).unwrap(), Expr::int(25));
    }

    #[test]
    fn precedence() {
        let e = parse("-q1^2 + 2*q1", 1).unwrap();
        assert_eq!(e, -Expr::q(0).pow_int(2) + Expr::int(2) * Expr::q(0));
        let e = parse("2^3^2", 1).unwrap();
        assert_eq!(e, Expr::int(512));
        let e = parse("8/4/2", 1).unwrap();
        assert_eq!(e, Expr::one());
    }

    #[test]
    fn identifiers() {
        let e = parse("t + q2 + qt1 + qtt2 + p0 + p1 + pt2", 2).unwrap();
        let syms: Vec<_> = e.free_symbols().into_iter().collect();
        assert_eq!(syms, vec![Sym::T, Sym::Q(1), Sym::Qt(0), Sym::Qtt(1), Sym::P0, Sym::P(0), Sym::Pt(1)]);
    }

    #[test]
    fn errors_report_position() {
        let e = parse("q1 + q3", 2).unwrap_err();
        assert_eq!(e.position, 6);
        let e = parse("q1 + (q2", 2).unwrap_err();
        assert_eq!(e.position, 9);
        let e = parse("foo(q1)", 1).unwrap_err();
        assert_eq!(e.position, 1);
        let e = parse("q1^q1", 1).unwrap_err();
        assert_eq!(e.position, 4);
        assert!(parse("q1 $ 2", 1).is_err());
        assert!(parse("", 1).is_err());
        assert!(parse("q0", 1).is_err());
    }
}
