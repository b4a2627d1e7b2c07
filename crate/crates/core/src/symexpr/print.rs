use std::fmt;

use num_traits::{One, Signed};

use super::expr::{ratio, Expr, Node, Rational};

// Precedence levels: sum < product < unary minus < power < atom.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const POWER: u8 = 4;

fn write_rational(f: &mut fmt::Formatter<'_>, r: &Rational, ctx: u8) -> fmt::Result {
    let plain = r.is_integer() && !r.is_negative();
    if plain || ctx <= SUM && r.is_integer() {
        write!(f, "{}", r.numer())
    } else if ctx <= SUM {
        write!(f, "{}/{}", r.numer(), r.denom())
    } else if r.is_integer() {
        write!(f, "({})", r.numer())
    } else {
        write!(f, "({}/{})", r.numer(), r.denom())
    }
}

/// Context for the operand of a leading minus: `-(a + b)*c` would re-parse
/// with the sign distributed into the sum.
fn unary_operand(magnitude: &Expr) -> u8 {
    let Node::Mul(factors) = magnitude.node() else { return PRODUCT };
    let first = factors.iter().find(|g| !matches!(g.node(), Node::Pow(_, ex) if ex.is_negative()));
    match first.map(Expr::node) {
        Some(Node::Add(_)) => PRODUCT + 1,
        _ => PRODUCT,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, ctx: u8) -> fmt::Result {
    match e.node() {
        Node::Num(r) => write_rational(f, r, ctx),
        Node::Pi => write!(f, "pi"),
        Node::Sym(s) => write!(f, "{s}"),
        Node::Add(terms) => {
            if ctx > SUM {
                write!(f, "(")?;
            }
            for (k, term) in terms.iter().enumerate() {
                let (negative, magnitude) = negated(term);
                match (k, negative) {
                    (0, false) => write_expr(f, &magnitude, SUM)?,
                    (0, true) => {
                        write!(f, "-")?;
                        write_expr(f, &magnitude, unary_operand(&magnitude))?;
                    }
                    (_, false) => {
                        write!(f, " + ")?;
                        write_expr(f, &magnitude, SUM)?;
                    }
                    (_, true) => {
                        write!(f, " - ")?;
                        write_expr(f, &magnitude, PRODUCT)?;
                    }
                }
            }
            if ctx > SUM {
                write!(f, ")")?;
            }
            Ok(())
        }
        Node::Mul(factors) => {
            let (negative, magnitude) = negated(e);
            if negative {
                if ctx > SUM {
                    write!(f, "(")?;
                }
                write!(f, "-")?;
                write_expr(f, &magnitude, unary_operand(&magnitude))?;
                if ctx > SUM {
                    write!(f, ")")?;
                }
                return Ok(());
            }
            if ctx > PRODUCT {
                write!(f, "(")?;
            }
            let mut numer = Vec::new();
            let mut denom = Vec::new();
            for fac in factors {
                match fac.node() {
                    Node::Pow(b, ex) if ex.is_negative() => denom.push(Expr::power(b.clone(), -ex)),
                    _ => numer.push(fac.clone()),
                }
            }
            if numer.is_empty() {
                write!(f, "1")?;
            }
            // `c*(a + b)` would re-parse as a distributed sum
            let grouped = numer.len() + denom.len() > 2
                && matches!(numer[0].node(), Node::Num(_))
                && matches!(numer[1].node(), Node::Add(_));
            if grouped {
                write_expr(f, &numer[0], PRODUCT + 1)?;
                write!(f, "*")?;
                write_expr(f, &Expr::product(factors[1..].iter().cloned()), PRODUCT + 1)?;
                if ctx > PRODUCT {
                    write!(f, ")")?;
                }
                return Ok(());
            }
            for (k, fac) in numer.iter().enumerate() {
                if k > 0 {
                    write!(f, "*")?;
                }
                write_expr(f, fac, PRODUCT + 1)?;
            }
            for fac in &denom {
                write!(f, "/")?;
                write_expr(f, fac, POWER)?;
            }
            if ctx > PRODUCT {
                write!(f, ")")?;
            }
            Ok(())
        }
        Node::Pow(b, ex) => {
            if *ex == ratio(1, 2) {
                write!(f, "sqrt(")?;
                write_expr(f, b, 0)?;
                return write!(f, ")");
            }
            if ex.is_negative() {
                if ctx > PRODUCT {
                    write!(f, "(")?;
                }
                write!(f, "1/")?;
                write_expr(f, &Expr::power(b.clone(), -ex), POWER)?;
                if ctx > PRODUCT {
                    write!(f, ")")?;
                }
                return Ok(());
            }
            if ctx > POWER {
                write!(f, "(")?;
            }
            write_expr(f, b, POWER + 1)?;
            write!(f, "^")?;
            write_rational(f, ex, POWER + 1)?;
            if ctx > POWER {
                write!(f, ")")?;
            }
            Ok(())
        }
        Node::Apply(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, 0)?;
            write!(f, ")")
        }
    }
}

/// Splits off a leading negative coefficient: `-3*x` → (true, `3*x`).
fn negated(e: &Expr) -> (bool, Expr) {
    match e.node() {
        Node::Num(r) if r.is_negative() => (true, Expr::rational(-r)),
        Node::Mul(factors) => match factors[0].as_rational() {
            Some(c) if c.is_negative() => {
                let mag = -c;
                let rest = factors[1..].iter().cloned();
                if mag.is_one() {
                    (true, Expr::product(rest))
                } else {
                    (true, Expr::product(std::iter::once(Expr::rational(mag)).chain(rest)))
                }
            }
            _ => (false, e.clone()),
        },
        _ => (false, e.clone()),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}
