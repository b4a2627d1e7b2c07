use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub(crate) fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub(crate) fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Coordinate symbols of the jet/phase-space alphabet. Indices are zero-based
/// internally and print one-based (`Q(0)` prints as `q1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    T,
    Q(usize),
    Qt(usize),
    Qtt(usize),
    P0,
    P(usize),
    /// Momentum velocity on J¹V*Q; only used by the Lagrangian of a Hamiltonian.
    Pt(usize),
}

impl Sym {
    pub fn index(self) -> Option<usize> {
        match self {
            Sym::Q(i) | Sym::Qt(i) | Sym::Qtt(i) | Sym::P(i) | Sym::Pt(i) => Some(i),
            Sym::T | Sym::P0 => None,
        }
    }

    pub fn in_range(self, dim: usize) -> bool {
        self.index().is_none_or(|i| i < dim)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Sym::T => write!(f, "t"),
            Sym::Q(i) => write!(f, "q{}", i + 1),
            Sym::Qt(i) => write!(f, "qt{}", i + 1),
            Sym::Qtt(i) => write!(f, "qtt{}", i + 1),
            Sym::P0 => write!(f, "p0"),
            Sym::P(i) => write!(f, "p{}", i + 1),
            Sym::Pt(i) => write!(f, "pt{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Node {
    Num(Rational),
    Pi,
    Sym(Sym),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, Rational),
    Apply(Func, Expr),
}

/// Immutable symbolic scalar expression.
///
/// All constructors canonicalize locally: sums and products are flattened,
/// numeric constants folded, like terms and equal bases collected. Two
/// expressions built from the same terms in different orders compare equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn wrap(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0
    }

    pub fn zero() -> Self {
        Self::rational(Rational::zero())
    }

    pub fn one() -> Self {
        Self::rational(Rational::one())
    }

    pub fn int(n: i64) -> Self {
        Self::rational(rat(n))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Self::rational(ratio(n, d))
    }

    pub fn rational(r: Rational) -> Self {
        Self::wrap(Node::Num(r))
    }

    pub fn pi() -> Self {
        Self::wrap(Node::Pi)
    }

    pub fn sym(s: Sym) -> Self {
        Self::wrap(Node::Sym(s))
    }

    pub fn t() -> Self {
        Self::sym(Sym::T)
    }

    pub fn q(i: usize) -> Self {
        Self::sym(Sym::Q(i))
    }

    pub fn qt(i: usize) -> Self {
        Self::sym(Sym::Qt(i))
    }

    pub fn qtt(i: usize) -> Self {
        Self::sym(Sym::Qtt(i))
    }

    pub fn p(i: usize) -> Self {
        Self::sym(Sym::P(i))
    }

    pub fn p0() -> Self {
        Self::sym(Sym::P0)
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<Sym> {
        match self.node() {
            Node::Sym(s) => Some(*s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_rational().is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(One::is_one)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Self {
        let mut constant = Rational::zero();
        let mut collected: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut pending: Vec<Expr> = terms.into_iter().collect();
        while let Some(term) = pending.pop() {
            match term.node() {
                Node::Num(r) => constant += r,
                Node::Add(inner) => pending.extend(inner.iter().cloned()),
                _ => {
                    let (coef, body) = term.split_coefficient();
                    *collected.entry(body).or_insert_with(Rational::zero) += coef;
                }
            }
        }
        let mut out: Vec<Expr> = collected
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(body, c)| Expr::product([Expr::rational(c), body]))
            .collect();
        if !constant.is_zero() {
            out.insert(0, Expr::rational(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::wrap(Node::Add(out)),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Self {
        let mut coef = Rational::one();
        let mut bases: BTreeMap<Expr, Rational> = BTreeMap::new();
        let mut pending: Vec<Expr> = factors.into_iter().collect();
        while let Some(f) = pending.pop() {
            match f.node() {
                Node::Num(r) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    coef *= r;
                }
                Node::Mul(inner) => pending.extend(inner.iter().cloned()),
                Node::Pow(base, e) => {
                    *bases.entry(base.clone()).or_insert_with(Rational::zero) += e;
                }
                _ => *bases.entry(f.clone()).or_insert_with(Rational::zero) += Rational::one(),
            }
        }
        let mut out = Vec::new();
        let mut exponents = Vec::new();
        for (base, e) in bases {
            if e.is_zero() {
                continue;
            }
            if let Node::Apply(Func::Exp, arg) = base.node() {
                exponents.push(Expr::product([Expr::rational(e), arg.clone()]));
                continue;
            }
            let factor = Expr::power(base, e);
            match factor.node() {
                Node::Num(r) if !r.is_zero() => coef *= r,
                Node::Mul(inner) => {
                    // power distribution can surface a coefficient
                    for g in inner {
                        match g.node() {
                            Node::Num(r) => coef *= r,
                            _ => out.push(g.clone()),
                        }
                    }
                }
                _ => out.push(factor),
            }
        }
        if coef.is_zero() {
            return Expr::zero();
        }
        if !exponents.is_empty() {
            // exp(a)·exp(b) → exp(a + b)
            let merged = Expr::apply(Func::Exp, Expr::sum(exponents));
            match merged.node() {
                Node::Num(r) => coef *= r,
                _ => out.push(merged.clone()),
            }
        }
        out.sort();
        if out.len() == 1 && !coef.is_one() {
            if let Node::Add(terms) = out[0].node() {
                // c·(a + b) → c·a + c·b
                return Expr::sum(terms.iter().map(|t| Expr::product([Expr::rational(coef.clone()), t.clone()])));
            }
        }
        if !coef.is_one() {
            out.insert(0, Expr::rational(coef));
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::wrap(Node::Mul(out)),
        }
    }

    /// `base^exponent` for a rational exponent.
    pub fn power(base: Expr, exponent: Rational) -> Self {
        if exponent.is_zero() {
            return Expr::one();
        }
        if exponent.is_one() {
            return base;
        }
        let integral = exponent.is_integer();
        match base.node() {
            Node::Num(r) => {
                if r.is_one() {
                    return Expr::one();
                }
                if integral && !r.is_zero() {
                    if let Some(k) = exponent.to_integer().to_i32() {
                        return Expr::rational(num_traits::pow::Pow::pow(r, k));
                    }
                }
                if r.is_zero() && exponent.is_positive() {
                    return Expr::zero();
                }
                Expr::wrap(Node::Pow(base, exponent))
            }
            Node::Pow(inner, e) if integral => Expr::power(inner.clone(), e * &exponent),
            Node::Apply(Func::Exp, arg) => {
                Expr::apply(Func::Exp, Expr::product([Expr::rational(exponent), arg.clone()]))
            }
            Node::Mul(factors) if integral => {
                Expr::product(factors.iter().map(|f| Expr::power(f.clone(), exponent.clone())))
            }
            _ => Expr::wrap(Node::Pow(base, exponent)),
        }
    }

    pub fn pow_int(&self, n: i64) -> Self {
        Expr::power(self.clone(), rat(n))
    }

    pub fn recip(&self) -> Self {
        self.pow_int(-1)
    }

    pub fn sqrt(&self) -> Self {
        Expr::power(self.clone(), ratio(1, 2))
    }

    pub fn apply(func: Func, arg: Expr) -> Self {
        if let Some(r) = arg.as_rational() {
            if r.is_zero() {
                match func {
                    Func::Sin => return Expr::zero(),
                    Func::Cos | Func::Exp => return Expr::one(),
                    Func::Log => {}
                }
            } else if r.is_one() && func == Func::Log {
                return Expr::zero();
            }
        }
        if func == Func::Log {
            if let Node::Apply(Func::Exp, inner) = arg.node() {
                return inner.clone();
            }
        }
        Expr::wrap(Node::Apply(func, arg))
    }

    pub fn sin(&self) -> Self {
        Expr::apply(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Self {
        Expr::apply(Func::Cos, self.clone())
    }

    pub fn exp(&self) -> Self {
        Expr::apply(Func::Exp, self.clone())
    }

    pub fn log(&self) -> Self {
        Expr::apply(Func::Log, self.clone())
    }

    /// Splits a term into its rational coefficient and the remaining body.
    fn split_coefficient(&self) -> (Rational, Expr) {
        if let Node::Mul(factors) = self.node() {
            if let Some(c) = factors[0].as_rational() {
                let rest = &factors[1..];
                let body = if rest.len() == 1 { rest[0].clone() } else { Expr::wrap(Node::Mul(rest.to_vec())) };
                return (c.clone(), body);
            }
        }
        (Rational::one(), self.clone())
    }

    /// Rebuilds the tree bottom-up through the canonicalizing constructors,
    /// multiplying out products of sums so that like terms meet. Even powers
    /// of sines are also tried as powers of `1 − cos²`, kept when shorter.
    pub fn simplify(&self) -> Expr {
        let expanded = self.expand();
        if !expanded.has_even_sine_power() {
            return expanded;
        }
        let rewritten = expanded.sine_to_cosine().expand();
        if rewritten.size() < expanded.size() {
            rewritten
        } else {
            expanded
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Num(_) | Node::Pi | Node::Sym(_) => 0,
            Node::Add(xs) | Node::Mul(xs) => xs.iter().map(Expr::size).sum(),
            Node::Pow(b, _) => b.size(),
            Node::Apply(_, a) => a.size(),
        }
    }

    fn even_sine_power(&self) -> Option<(&Expr, i64)> {
        if let Node::Pow(b, e) = self.node() {
            if let (Node::Apply(Func::Sin, arg), true) = (b.node(), e.is_integer()) {
                let k = e.to_integer().to_i64()?;
                if k >= 2 && k % 2 == 0 {
                    return Some((arg, k));
                }
            }
        }
        None
    }

    fn has_even_sine_power(&self) -> bool {
        self.even_sine_power().is_some()
            || match self.node() {
                Node::Num(_) | Node::Pi | Node::Sym(_) => false,
                Node::Add(xs) | Node::Mul(xs) => xs.iter().any(Expr::has_even_sine_power),
                Node::Pow(b, _) => b.has_even_sine_power(),
                Node::Apply(_, a) => a.has_even_sine_power(),
            }
    }

    /// `sin(u)^(2k) ↦ (1 − cos(u)²)^k`.
    fn sine_to_cosine(&self) -> Expr {
        if let Some((arg, k)) = self.even_sine_power() {
            let c2 = Expr::power(arg.cos(), rat(2));
            return Expr::power(Expr::one() - c2, rat(k / 2));
        }
        self.map_children(Expr::sine_to_cosine)
    }

    /// Distributes products over sums and expands small positive integer
    /// powers of sums, bottom-up. Nodes whose expansion would exceed
    /// `MAX_EXPANDED_TERMS` terms are left factored.
    pub fn expand(&self) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Pi | Node::Sym(_) => self.clone(),
            Node::Add(terms) => Expr::sum(terms.iter().map(Expr::expand)),
            Node::Mul(factors) => {
                let factors: Vec<Expr> = factors.iter().map(Expr::expand).collect();
                distribute(&factors).unwrap_or_else(|| Expr::product(factors))
            }
            Node::Pow(b, e) => {
                let b = b.expand();
                if let (Node::Add(_), Some(k)) = (b.node(), e.is_integer().then(|| e.to_integer().to_i64()).flatten()) {
                    if (2..=MAX_EXPANDED_POWER).contains(&k) {
                        let copies = vec![b.clone(); k as usize];
                        if let Some(x) = distribute(&copies) {
                            return x;
                        }
                    }
                }
                Expr::power(b, e.clone())
            }
            Node::Apply(func, a) => Expr::apply(*func, a.expand()),
        }
    }

    fn map_children(&self, f: impl Fn(&Expr) -> Expr) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Pi | Node::Sym(_) => self.clone(),
            Node::Add(terms) => Expr::sum(terms.iter().map(&f)),
            Node::Mul(factors) => Expr::product(factors.iter().map(&f)),
            Node::Pow(b, e) => Expr::power(f(b), e.clone()),
            Node::Apply(func, a) => Expr::apply(*func, f(a)),
        }
    }

    /// Exact partial derivative; every other coordinate symbol is independent.
    pub fn diff(&self, v: Sym) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Pi => Expr::zero(),
            Node::Sym(s) => {
                if *s == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(terms) => Expr::sum(terms.iter().map(|t| t.diff(v))),
            Node::Mul(factors) => Expr::sum((0..factors.len()).map(|i| {
                let d = factors[i].diff(v);
                if d.is_zero() {
                    return d;
                }
                Expr::product(factors.iter().enumerate().map(|(j, f)| if i == j { d.clone() } else { f.clone() }))
            })),
            Node::Pow(b, e) => {
                let db = b.diff(v);
                if db.is_zero() {
                    return db;
                }
                Expr::product([Expr::rational(e.clone()), Expr::power(b.clone(), e - Rational::one()), db])
            }
            Node::Apply(func, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return da;
                }
                let outer = match func {
                    Func::Sin => a.cos(),
                    Func::Cos => -a.sin(),
                    Func::Exp => self.clone(),
                    Func::Log => a.recip(),
                };
                outer * da
            }
        }
    }

    /// Simultaneous replacement of symbols.
    pub fn substitute(&self, bindings: &BTreeMap<Sym, Expr>) -> Expr {
        match self.node() {
            Node::Sym(s) => bindings.get(s).cloned().unwrap_or_else(|| self.clone()),
            _ => self.map_children(|c| c.substitute(bindings)),
        }
    }

    pub fn substitute_one(&self, s: Sym, value: &Expr) -> Expr {
        let mut m = BTreeMap::new();
        m.insert(s, value.clone());
        self.substitute(&m)
    }

    pub fn free_symbols(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Sym>) {
        match self.node() {
            Node::Num(_) | Node::Pi => {}
            Node::Sym(s) => {
                out.insert(*s);
            }
            Node::Add(xs) | Node::Mul(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Node::Pow(b, _) => b.collect_symbols(out),
            Node::Apply(_, a) => a.collect_symbols(out),
        }
    }

    pub fn depends_on(&self, pred: impl Fn(Sym) -> bool) -> bool {
        self.free_symbols().into_iter().any(pred)
    }

    /// True when the expression contains no coordinate symbols.
    pub fn is_constant(&self) -> bool {
        self.free_symbols().is_empty()
    }
}

const MAX_EXPANDED_TERMS: usize = 512;
const MAX_EXPANDED_POWER: i64 = 6;

/// Product of already expanded factors, multiplied out term by term.
fn distribute(factors: &[Expr]) -> Option<Expr> {
    let width: usize = factors
        .iter()
        .map(|f| match f.node() {
            Node::Add(t) => t.len(),
            _ => 1,
        })
        .try_fold(1usize, |acc, w| acc.checked_mul(w))?;
    if width == 1 || width > MAX_EXPANDED_TERMS {
        return None;
    }
    let mut partial: Vec<Expr> = vec![Expr::one()];
    for f in factors {
        let terms: Vec<Expr> = match f.node() {
            Node::Add(t) => t.clone(),
            _ => vec![f.clone()],
        };
        partial =
            partial.iter().flat_map(|p| terms.iter().map(move |t| Expr::product([p.clone(), t.clone()]))).collect();
    }
    Some(Expr::sum(partial))
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<Sym> for Expr {
    fn from(s: Sym) -> Self {
        Expr::sym(s)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                self.$method(rhs.clone())
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.clone().$method(rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                self.clone().$method(rhs.clone())
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a, b]));
binop!(Sub, sub, |a, b| Expr::sum([a, -b]));
binop!(Mul, mul, |a, b| Expr::product([a, b]));
binop!(Div, div, |a, b| Expr::product([a, b.recip()]));

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product([Expr::int(-1), self])
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    #[test]
    fn like_terms_collect() {
        let q = Expr::q(0);
        let e = &q + &q + Expr::int(3) * &q;
        assert_eq!(e, Expr::int(5) * &q);
        assert_eq!(&q - &q, Expr::zero());
    }

    #[test]
    fn equal_bases_merge() {
        let x = Expr::t().exp();
        let e = Expr::qt(0) * &x / &x;
        assert_eq!(e, Expr::qt(0));
        let q = Expr::q(0);
        assert_eq!(&q * &q, q.pow_int(2));
    }

    #[test]
    fn fractional_power_of_square_is_kept() {
        let q = Expr::q(0);
        let e = q.pow_int(2).sqrt();
        assert_ne!(e, q);
    }

    #[test]
    fn polynomial_rule() {
        let e = Expr::frac(1, 2) * Expr::qt(0).pow_int(2);
        assert_eq!(e.diff(Sym::Qt(0)), Expr::qt(0));
        assert_eq!(Expr::q(0).pow_int(2).diff(Sym::Qt(0)), Expr::zero());
    }

    #[test]
    fn substitution_is_simultaneous() {
        let mut m = BTreeMap::new();
        m.insert(Sym::Q(0), Expr::q(1));
        m.insert(Sym::Q(1), Expr::q(0));
        let e = Expr::q(0) - Expr::int(2) * Expr::q(1);
        assert_eq!(e.substitute(&m), Expr::q(1) - Expr::int(2) * Expr::q(0));
    }

    #[test]
    fn pythagorean_identity() {
        let e = parse("q2*sin(t)^2 + q2*cos(t)^2", 2).unwrap().simplify();
        assert_eq!(e, parse("q2", 2).unwrap());
        let e = parse("sin(q1)^4 + 2*sin(q1)^2*cos(q1)^2 + cos(q1)^4", 1).unwrap().simplify();
        assert_eq!(e, Expr::one());
        let keep = parse("sin(q1)^2 + q2", 2).unwrap();
        assert_eq!(keep.simplify(), keep);
    }

    #[test]
    fn expansion_collects() {
        let q = Expr::qt(0);
        let e = &q * (Expr::int(-2) + &q) - Expr::frac(1, 2) * q.pow_int(2);
        assert_eq!(e.simplify(), Expr::frac(1, 2) * q.pow_int(2) - Expr::int(2) * &q);
        let sq = (Expr::q(0) + Expr::q(1)).pow_int(2).simplify();
        let want = Expr::q(0).pow_int(2) + Expr::int(2) * Expr::q(0) * Expr::q(1) + Expr::q(1).pow_int(2);
        assert_eq!(sq, want);
    }

    #[test]
    fn zero_times_anything() {
        let e = Expr::q(0) + Expr::zero() * Expr::p(0);
        assert_eq!(e, Expr::q(0));
    }
}
