//! Exact symbolic expressions over the fixed coordinate alphabet
//! `t, qⁱ, qⁱ_t, qⁱ_tt, p₀, pᵢ`.
//!
//! Constants are exact rationals (plus `pi`); floats appear only at
//! evaluation. Simplification is conservative and value-preserving, so
//! identities are checked by evaluation rather than by syntax.

mod eval;
mod expr;
mod parse;
mod print;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use eval::{Compiled, Layout, Point};
pub use expr::{Expr, Func, Rational, Sym};
pub use parse::{parse, ParseError};

use crate::error::{Error, Result};

pub fn diff(e: &Expr, v: Sym) -> Expr {
    e.diff(v)
}

/// The total derivative `d_t = ∂_t + qⁱ_t ∂ᵢ + qⁱ_tt ∂ᵗᵢ` on functions of `(t, q, q_t)`.
pub fn total_derivative(e: &Expr) -> Result<Expr> {
    reject(e, "a total derivative on J¹Q", |s| matches!(s, Sym::P(_) | Sym::P0 | Sym::Qtt(_) | Sym::Pt(_)))?;
    Ok(prolonged_derivative(e))
}

/// Total derivative on `J¹V*Q`, where momenta are independent coordinates
/// with time derivatives `pᵢ_t`.
pub fn total_derivative_phase(e: &Expr) -> Result<Expr> {
    reject(e, "a total derivative on J¹V*Q", |s| matches!(s, Sym::P0 | Sym::Qtt(_) | Sym::Pt(_)))?;
    Ok(prolonged_derivative(e))
}

fn prolonged_derivative(e: &Expr) -> Expr {
    let mut terms = vec![e.diff(Sym::T)];
    for s in e.free_symbols() {
        let lifted = match s {
            Sym::Q(i) => Expr::qt(i),
            Sym::Qt(i) => Expr::qtt(i),
            Sym::P(i) => Expr::sym(Sym::Pt(i)),
            _ => continue,
        };
        terms.push(lifted * e.diff(s));
    }
    Expr::sum(terms)
}

/// Fails with [`Error::ForbiddenSymbol`] on the first symbol matching `forbidden`.
pub fn reject(e: &Expr, context: &'static str, forbidden: impl Fn(Sym) -> bool) -> Result<()> {
    match e.free_symbols().into_iter().find(|s| forbidden(*s)) {
        Some(symbol) => Err(Error::ForbiddenSymbol { context, symbol }),
        None => Ok(()),
    }
}

/// Fails when a symbol index exceeds the declared dimension.
pub fn check_dimension(e: &Expr, dim: usize) -> Result<()> {
    match e.free_symbols().into_iter().find(|s| !s.in_range(dim)) {
        Some(symbol) => Err(Error::IndexOutOfRange { symbol, dim }),
        None => Ok(()),
    }
}

pub fn substitute(e: &Expr, bindings: &std::collections::BTreeMap<Sym, Expr>) -> Expr {
    e.substitute(bindings)
}

pub fn simplify(e: &Expr) -> Expr {
    e.simplify()
}

pub fn evaluate(e: &Expr, pt: &Point) -> Result<f64> {
    e.evaluate(pt)
}

/// Deterministic random points in `[-1, 1]` for the given symbols.
#[derive(Debug)]
pub struct Probe {
    rng: ChaCha8Rng,
    syms: Vec<Sym>,
}

impl Probe {
    pub fn new<I: IntoIterator<Item = Sym>>(syms: I, seed: u64) -> Self {
        Probe { rng: ChaCha8Rng::seed_from_u64(seed), syms: syms.into_iter().collect() }
    }

    /// All symbols of `t, q, q_t, q_tt, p` for dimension `dim`.
    pub fn full(dim: usize, seed: u64) -> Self {
        let syms = std::iter::once(Sym::T)
            .chain((0..dim).flat_map(|i| [Sym::Q(i), Sym::Qt(i), Sym::Qtt(i), Sym::P(i), Sym::Pt(i)]))
            .chain(std::iter::once(Sym::P0));
        Self::new(syms, seed)
    }

    pub fn next_point(&mut self) -> Point {
        let rng = &mut self.rng;
        self.syms.iter().map(|s| (*s, rng.gen_range(-1.0..1.0))).collect()
    }

    /// Up to `count` points where every expression evaluates without a
    /// domain error; gives up after `50 * count` draws.
    pub fn valid_points(&mut self, exprs: &[&Expr], count: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..50 * count {
            if out.len() == count {
                break;
            }
            let pt = self.next_point();
            if exprs.iter().all(|e| e.evaluate(&pt).is_ok()) {
                out.push(pt);
            }
        }
        out
    }
}

/// Maximum absolute value of `e` over sample points; `None` when no point
/// could be evaluated.
pub fn max_abs_on(e: &Expr, points: &[Point]) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for pt in points {
        if let Ok(v) = e.evaluate(pt) {
            worst = Some(worst.map_or(v.abs(), |w: f64| w.max(v.abs())));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s, 2).unwrap()
    }

    #[test]
    fn diff_examples() {
        assert_eq!(diff(&p("0.5*qt1^2"), Sym::Qt(0)), p("qt1"));
        assert_eq!(diff(&p("q1^2"), Sym::Qt(0)), Expr::zero());
        let e = p("sin(t*q1)");
        let d = diff(&e, Sym::Q(0));
        let pt = Point::new().with(Sym::T, 0.7).with(Sym::Q(0), 0.3);
        let h = 1e-5;
        let fd = (e.evaluate(&pt.clone().with(Sym::Q(0), 0.3 + h)).unwrap()
            - e.evaluate(&pt.clone().with(Sym::Q(0), 0.3 - h)).unwrap())
            / (2.0 * h);
        assert!((d.evaluate(&pt).unwrap() - fd).abs() < 1e-8);
        assert!((d.evaluate(&pt).unwrap() - 0.7 * (0.21f64).cos()).abs() < 1e-14);
    }

    #[test]
    fn total_derivative_examples() {
        assert_eq!(total_derivative(&p("q1")).unwrap(), p("qt1"));
        assert_eq!(total_derivative(&p("qt1")).unwrap(), p("qtt1"));
        let d = total_derivative(&p("t*q1^2")).unwrap();
        assert_eq!(d, p("q1^2 + 2*t*q1*qt1"));
        assert!(total_derivative(&p("p1")).is_err());
        assert!(total_derivative(&p("qtt1")).is_err());
    }

    #[test]
    fn total_derivative_along_path() {
        // q1(t) = sin(2t), so d/dt of t*q1^2 along the path by central differences
        let e = p("t*q1^2");
        let d = total_derivative(&e).unwrap();
        let path = |t: f64| (2.0 * t).sin();
        let at = |t: f64| Point::new().with(Sym::T, t).with(Sym::Q(0), path(t));
        let (t, h) = (0.4, 1e-5);
        let fd = (e.evaluate(&at(t + h)).unwrap() - e.evaluate(&at(t - h)).unwrap()) / (2.0 * h);
        let pt = at(t).with(Sym::Qt(0), 2.0 * (2.0 * t).cos());
        assert!((d.evaluate(&pt).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn utility_examples() {
        let pt = Point::new().with(Sym::Q(0), 2.0).with(Sym::P(0), 3.0);
        assert_eq!(evaluate(&p("q1^2 + p1"), &pt).unwrap(), 7.0);
        assert_eq!(simplify(&p("q1 + 0*p1")), p("q1"));
        let b = [(Sym::Qt(0), p("p1"))].into_iter().collect();
        assert_eq!(substitute(&p("qt1^2"), &b), p("p1^2"));
    }

    #[test]
    fn display_roundtrip_examples() {
        for src in [
            "-q1^2 + 2*q1/(q2 + 1)",
            "0.5*qt1^2 - exp(-t)*sin(q1)^3",
            "sqrt(q1^2 + 1)/3 - 1/sqrt(2 + q2)",
            "(q1 - q2)^(-3/2) + pi*cos(t*p1)",
            "-(1/3)*q1*(2 - q2)",
        ] {
            let e = p(src);
            let back = parse(&e.to_string(), 2).unwrap();
            assert_eq!(back, e, "{src} printed as {e}");
        }
    }

    #[test]
    fn dimension_checks() {
        let e = Expr::q(3);
        assert!(check_dimension(&e, 2).is_err());
        assert!(check_dimension(&e, 4).is_ok());
    }
}
