use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;

use super::grid::{GridSpec, HalfDensityGrid};
use crate::error::{Error, Result};
use crate::symexpr::{Expr, Sym};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Row-compressed complex matrix with columns sorted inside each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        SparseMatrix { rows: vec![Vec::new(); n] }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { rows: (0..n).map(|i| vec![(i, Complex64::new(1.0, 0.0))]).collect() }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        SparseMatrix { rows: d.iter().enumerate().map(|(i, v)| vec![(i, Complex64::new(*v, 0.0))]).collect() }
    }

    fn from_rows(rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        SparseMatrix { rows: rows.into_iter().map(compress).collect() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i].iter().find(|(c, _)| *c == j).map_or(ZERO, |(_, v)| *v)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows.iter().map(|r| r.iter().fold(ZERO, |s, (j, v)| s + v * x[*j])).collect()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        SparseMatrix { rows: self.rows.iter().map(|r| r.iter().map(|(j, v)| (*j, v * c)).collect()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let rows = self.rows.iter().zip(&other.rows).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
        Self::from_rows(rows)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().flat_map(|(k, a)| other.rows[*k].iter().map(move |(j, b)| (*j, a * b))).collect())
            .collect();
        Self::from_rows(rows)
    }

    /// Largest entrywise `|A − A^H|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r {
                worst = worst.max((v - self.get(*j, i).conj()).norm());
            }
        }
        worst
    }
}

fn compress(mut row: Vec<(usize, Complex64)>) -> Vec<(usize, Complex64)> {
    row.sort_by_key(|(j, _)| *j);
    let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
    for (j, v) in row {
        match out.last_mut() {
            Some((k, w)) if *k == j => *w += v,
            _ => out.push((j, v)),
        }
    }
    out
}

/// Elementary grid operators composed into operator terms.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Multiplication by a real function of `(t, q)`.
    Mul(Expr),
    /// Centred difference `(ρ_{j+1} − ρ_{j−1}) / 2Δx` along an axis.
    D(usize),
    /// Compact `∂(c ∂·)`: `[c_{j+½}(ρ_{j+1} − ρ_j) − c_{j−½}(ρ_j − ρ_{j−1})] / Δx²`
    /// with `c_{j±½}` the mean of the neighbouring nodal values.
    Div(usize, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: Complex64,
    /// Applied right to left, like a product of operators.
    pub factors: Vec<Factor>,
}

/// Linear operator on half-densities: a sum of scaled products of
/// [`Factor`]s whose coefficients are evaluated at the grid time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridOperator {
    terms: Vec<Term>,
}

impl GridOperator {
    pub fn zero() -> Self {
        GridOperator { terms: Vec::new() }
    }

    pub fn term(coef: Complex64, factors: Vec<Factor>) -> Self {
        GridOperator { terms: vec![Term { coef, factors }] }
    }

    /// Multiplication by `coef · f(t, q)`.
    pub fn multiply(coef: Complex64, f: Expr) -> Self {
        if f.is_zero() || coef == ZERO {
            return Self::zero();
        }
        Self::term(coef, vec![Factor::Mul(f)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        GridOperator {
            terms: self.terms.iter().map(|t| Term { coef: t.coef * c, factors: t.factors.clone() }).collect(),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term { coef: a.coef * b.coef, factors });
            }
        }
        GridOperator { terms }
    }

    pub fn is_time_dependent(&self) -> bool {
        self.terms.iter().flat_map(|t| &t.factors).any(|f| match f {
            Factor::Mul(e) | Factor::Div(_, e) => e.depends_on(|s| s == Sym::T),
            Factor::D(_) => false,
        })
    }

    fn check(&self, spec: &GridSpec) -> Result<()> {
        for f in self.terms.iter().flat_map(|t| &t.factors) {
            let (axis, e) = match f {
                Factor::Mul(e) => (None, Some(e)),
                Factor::D(k) => (Some(*k), None),
                Factor::Div(k, e) => (Some(*k), Some(e)),
            };
            if let Some(k) = axis.filter(|k| *k >= spec.dim()) {
                return Err(Error::GridMismatch(format!("derivative along axis {} on a {}-D grid", k + 1, spec.dim())));
            }
            if let Some(e) = e {
                crate::symexpr::check_dimension(e, spec.dim())?;
                crate::symexpr::reject(e, "a grid operator coefficient", |s| !matches!(s, Sym::T | Sym::Q(_)))?;
            }
        }
        Ok(())
    }

    /// Matrix of the operator on `spec` with coefficients frozen at `t`.
    pub fn assemble(&self, spec: &GridSpec, t: f64) -> Result<SparseMatrix> {
        self.check(spec)?;
        let mut total = SparseMatrix::zeros(spec.len());
        for term in &self.terms {
            let mut m = SparseMatrix::identity(spec.len()).scale(term.coef);
            for f in &term.factors {
                m = m.mul(&factor_matrix(f, spec, t)?);
            }
            total = total.add(&m);
        }
        Ok(total)
    }

    pub fn apply(&self, rho: &HalfDensityGrid) -> Result<HalfDensityGrid> {
        let m = self.assemble(&rho.spec, rho.time)?;
        Ok(HalfDensityGrid { spec: rho.spec.clone(), time: rho.time, values: m.matvec(&rho.values) })
    }
}

fn factor_matrix(f: &Factor, spec: &GridSpec, t: f64) -> Result<SparseMatrix> {
    let n = spec.len();
    Ok(match f {
        Factor::Mul(e) => SparseMatrix::diagonal(&spec.sample(e, t)?),
        Factor::D(k) => {
            let w = 1.0 / (2.0 * spec.axes()[*k].spacing());
            let rows = (0..n)
                .map(|i| {
                    let mut r = Vec::with_capacity(2);
                    if let Some(j) = spec.neighbour(i, *k, 1) {
                        r.push((j, Complex64::new(w, 0.0)));
                    }
                    if let Some(j) = spec.neighbour(i, *k, -1) {
                        r.push((j, Complex64::new(-w, 0.0)));
                    }
                    r
                })
                .collect();
            SparseMatrix::from_rows(rows)
        }
        Factor::Div(k, c) => {
            let h = spec.axes()[*k].spacing();
            let w = 1.0 / (h * h);
            let nodal = spec.sample(c, t)?;
            // coefficient one cell beyond a Dirichlet edge, sampled at the ghost node
            let ghost = |i: usize, shift: f64| -> Result<f64> {
                let mut x = spec.coords(i);
                x[*k] += shift * h;
                let mut pt = crate::symexpr::Point::new().with(Sym::T, t);
                for (a, v) in x.iter().enumerate().take(spec.dim()) {
                    pt.set(Sym::Q(a), *v);
                }
                c.evaluate(&pt)
            };
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut r = Vec::with_capacity(3);
                let mut diag = 0.0;
                for s in [1isize, -1] {
                    let (cj, j) = match spec.neighbour(i, *k, s) {
                        Some(j) => (nodal[j], Some(j)),
                        None => (ghost(i, s as f64)?, None),
                    };
                    let half = 0.5 * (nodal[i] + cj) * w;
                    diag -= half;
                    if let Some(j) = j {
                        r.push((j, Complex64::new(half, 0.0)));
                    }
                }
                r.push((i, Complex64::new(diag, 0.0)));
                rows.push(r);
            }
            SparseMatrix::from_rows(rows)
        }
    })
}

impl Add for GridOperator {
    type Output = GridOperator;
    fn add(mut self, rhs: GridOperator) -> GridOperator {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Neg for GridOperator {
    type Output = GridOperator;
    fn neg(self) -> GridOperator {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Sub for GridOperator {
    type Output = GridOperator;
    fn sub(self, rhs: GridOperator) -> GridOperator {
        self + (-rhs)
    }
}

/// `⟨ρ, Op ρ⟩ / ⟨ρ, ρ⟩`.
pub fn expectation(op: &GridOperator, rho: &HalfDensityGrid) -> Result<Complex64> {
    let image = op.apply(rho)?;
    let den = super::grid::dot(&rho.values, &rho.values);
    if den.re == 0.0 {
        return Err(Error::InvalidArgument("expectation value of the zero half-density".into()));
    }
    Ok(super::grid::dot(&rho.values, &image.values) / den)
}
