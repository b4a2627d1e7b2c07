use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_traits::ToPrimitive;

use super::expr::{Expr, Func, Node, Rational, Sym};
use crate::error::{Error, Result};

/// Numeric values for a subset of the coordinate symbols.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Point(BTreeMap<Sym, f64>);

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, s: Sym, v: f64) -> Self {
        self.0.insert(s, v);
        self
    }

    pub fn set(&mut self, s: Sym, v: f64) {
        self.0.insert(s, v);
    }

    pub fn get(&self, s: Sym) -> Result<f64> {
        self.0.get(&s).copied().ok_or(Error::Unassigned(s))
    }

    pub fn contains(&self, s: Sym) -> bool {
        self.0.contains_key(&s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Sym, f64)> + '_ {
        self.0.iter().map(|(s, v)| (*s, *v))
    }

    /// Sets `make(i)` to `values[i]` for each component.
    pub fn with_components(mut self, make: fn(usize) -> Sym, values: &[f64]) -> Self {
        for (i, v) in values.iter().enumerate() {
            self.0.insert(make(i), *v);
        }
        self
    }

    pub fn components(&self, make: fn(usize) -> Sym, dim: usize) -> Result<Vec<f64>> {
        (0..dim).map(|i| self.get(make(i))).collect()
    }
}

impl FromIterator<(Sym, f64)> for Point {
    fn from_iter<I: IntoIterator<Item = (Sym, f64)>>(iter: I) -> Self {
        Point(iter.into_iter().collect())
    }
}

pub(crate) fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn apply_func(func: Func, x: f64) -> Result<f64> {
    let y = match func {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Exp => x.exp(),
        Func::Log => {
            if x <= 0.0 {
                return Err(Error::Domain { function: "log", argument: x });
            }
            x.ln()
        }
    };
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Domain { function: func.name(), argument: x })
    }
}

fn apply_pow(x: f64, e: &Rational, ef: f64) -> Result<f64> {
    let y = if e.is_integer() {
        if x == 0.0 && ef < 0.0 {
            return Err(Error::Domain { function: "division", argument: x });
        }
        match e.to_integer().to_i32() {
            Some(k) => x.powi(k),
            None => x.powf(ef),
        }
    } else {
        if x < 0.0 || (x == 0.0 && ef < 0.0) {
            return Err(Error::Domain { function: "fractional power", argument: x });
        }
        x.powf(ef)
    };
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Domain { function: "power", argument: x })
    }
}

impl Expr {
    /// Evaluates at a point; every symbol of the expression must be assigned.
    pub fn evaluate(&self, pt: &Point) -> Result<f64> {
        match self.node() {
            Node::Num(r) => Ok(rational_to_f64(r)),
            Node::Pi => Ok(PI),
            Node::Sym(s) => pt.get(*s),
            Node::Add(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.evaluate(pt)?;
                }
                Ok(acc)
            }
            Node::Mul(factors) => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.evaluate(pt)?;
                }
                Ok(acc)
            }
            Node::Pow(b, e) => apply_pow(b.evaluate(pt)?, e, rational_to_f64(e)),
            Node::Apply(func, a) => apply_func(*func, a.evaluate(pt)?),
        }
    }
}

/// Dense symbol-to-slot layout for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct Layout {
    slots: BTreeMap<Sym, usize>,
}

impl Layout {
    pub fn new<I: IntoIterator<Item = Sym>>(syms: I) -> Self {
        let mut slots = BTreeMap::new();
        for s in syms {
            let next = slots.len();
            slots.entry(s).or_insert(next);
        }
        Layout { slots }
    }

    /// `t, q1..qn, qt1..qtn`.
    pub fn jet(dim: usize) -> Self {
        Self::new(std::iter::once(Sym::T).chain((0..dim).map(Sym::Q)).chain((0..dim).map(Sym::Qt)))
    }

    /// `t, q1..qn, p1..pn`.
    pub fn phase(dim: usize) -> Self {
        Self::new(std::iter::once(Sym::T).chain((0..dim).map(Sym::Q)).chain((0..dim).map(Sym::P)))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, s: Sym) -> Option<usize> {
        self.slots.get(&s).copied()
    }
}

#[derive(Debug, Clone)]
enum Instr {
    Const(f64),
    Load(usize),
    Add(usize),
    Mul(usize),
    Pow(Rational, f64),
    Apply(Func),
}

/// Expression flattened to a stack program over a fixed [`Layout`].
#[derive(Debug, Clone)]
pub struct Compiled {
    code: Vec<Instr>,
    depth: usize,
}

impl Compiled {
    pub fn new(e: &Expr, layout: &Layout) -> Result<Self> {
        let mut code = Vec::new();
        let mut depth = 0;
        emit(e, layout, &mut code, 0, &mut depth)?;
        Ok(Compiled { code, depth })
    }

    pub fn eval(&self, slots: &[f64]) -> Result<f64> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for ins in &self.code {
            match ins {
                Instr::Const(c) => stack.push(*c),
                Instr::Load(i) => stack.push(slots[*i]),
                Instr::Add(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(s);
                }
                Instr::Mul(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(s);
                }
                Instr::Pow(e, ef) => {
                    let x = stack.pop().unwrap();
                    stack.push(apply_pow(x, e, *ef)?);
                }
                Instr::Apply(f) => {
                    let x = stack.pop().unwrap();
                    stack.push(apply_func(*f, x)?);
                }
            }
        }
        Ok(stack[0])
    }
}

fn emit(e: &Expr, layout: &Layout, code: &mut Vec<Instr>, height: usize, depth: &mut usize) -> Result<()> {
    *depth = (*depth).max(height + 1);
    match e.node() {
        Node::Num(r) => code.push(Instr::Const(rational_to_f64(r))),
        Node::Pi => code.push(Instr::Const(PI)),
        Node::Sym(s) => code.push(Instr::Load(layout.slot(*s).ok_or(Error::Unassigned(*s))?)),
        Node::Add(xs) | Node::Mul(xs) => {
            for (k, x) in xs.iter().enumerate() {
                emit(x, layout, code, height + k, depth)?;
            }
            code.push(if matches!(e.node(), Node::Add(_)) { Instr::Add(xs.len()) } else { Instr::Mul(xs.len()) });
        }
        Node::Pow(b, ex) => {
            emit(b, layout, code, height, depth)?;
            code.push(Instr::Pow(ex.clone(), rational_to_f64(ex)));
        }
        Node::Apply(f, a) => {
            emit(a, layout, code, height, depth)?;
            code.push(Instr::Apply(*f));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_sum() {
        let e = Expr::q(0).pow_int(2) + Expr::p(0);
        let pt = Point::new().with(Sym::Q(0), 2.0).with(Sym::P(0), 3.0);
        assert_eq!(e.evaluate(&pt).unwrap(), 7.0);
    }

    #[test]
    fn unassigned_is_error() {
        let e = Expr::q(0) + Expr::p(0);
        let pt = Point::new().with(Sym::Q(0), 2.0);
        assert!(matches!(e.evaluate(&pt), Err(Error::Unassigned(Sym::P(0)))));
    }

    #[test]
    fn domain_errors() {
        let pt = Point::new().with(Sym::Q(0), -1.0);
        assert!(matches!(Expr::q(0).log().evaluate(&pt), Err(Error::Domain { .. })));
        assert!(matches!(Expr::q(0).sqrt().evaluate(&pt), Err(Error::Domain { .. })));
        let zero = Point::new().with(Sym::Q(0), 0.0);
        assert!(matches!(Expr::q(0).recip().evaluate(&zero), Err(Error::Domain { .. })));
    }

    #[test]
    fn compiled_matches_tree() {
        let e = (Expr::t() * Expr::q(0)).sin() * Expr::qt(0).pow_int(3) + Expr::pi() / (Expr::q(0) + Expr::int(2));
        let layout = Layout::jet(1);
        let c = Compiled::new(&e, &layout).unwrap();
        let pt = Point::new().with(Sym::T, 0.4).with(Sym::Q(0), 0.3).with(Sym::Qt(0), -1.2);
        let slots = [0.4, 0.3, -1.2];
        assert_eq!(c.eval(&slots).unwrap(), e.evaluate(&pt).unwrap());
    }
}
