//! Schrödinger quantization on a grid.
//!
//! Observables affine in momenta, `f = aᵏ(t, q)pₖ + b(t, q)`, act on sampled
//! half-densities by `f̂ = −(i/2)(aᵏ∘Dₖ + Dₖ∘aᵏ) − b`, the centred-difference
//! form of `−iaᵏ∂ₖ − (i/2)∂ₖaᵏ − b`. Hamiltonians use the same momentum part
//! with `+b`, and quadratic momentum terms are symmetrized products.

mod evolve;
mod grid;
mod operator;

use num_complex::Complex64;

pub use evolve::{evolve, CrankNicolson, WrapSolver, SOLVE_TOL};
pub use grid::{
    inner_product, norm, transform_half_density, transform_half_density_onto, Axis, Boundary, GridSpec,
    HalfDensityGrid, MAX_DIM, MIN_NODES,
};
pub use operator::{expectation, Factor, GridOperator, SparseMatrix, Term};

use crate::bundle::Frame;
use crate::error::{Error, Result};
use crate::hamiltonian::{self, HamiltonianSystem};
use crate::symexpr::{self, Expr, Probe, Sym};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const DEGREE_POINTS: usize = 20;
const DEGREE_TOL: f64 = 1e-9;

/// `f = a⁰p₀ + aᵏpₖ + b` with coefficients on `(t, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineObservable {
    pub a: Vec<Expr>,
    pub b: Expr,
    /// Coefficient of `p₀`; zero for observables in the spatial algebra.
    pub a0: Expr,
}

fn is_momentum(s: Sym) -> bool {
    matches!(s, Sym::P(_) | Sym::P0)
}

impl AffineObservable {
    pub fn new(a: Vec<Expr>, b: Expr) -> Result<Self> {
        let obs = AffineObservable { a, b, a0: Expr::zero() };
        obs.check()?;
        Ok(obs)
    }

    fn check(&self) -> Result<()> {
        let dim = self.a.len();
        for c in self.a.iter().chain([&self.b, &self.a0]) {
            symexpr::reject(c, "an affine observable coefficient", |s| !matches!(s, Sym::T | Sym::Q(_)))?;
            symexpr::check_dimension(c, dim)?;
        }
        Ok(())
    }

    /// Splits an expression on `V*Q` (or `T*Q`) into momentum coefficients.
    pub fn from_expr(f: &Expr, dim: usize) -> Result<Self> {
        symexpr::reject(f, "an observable", |s| matches!(s, Sym::Qt(_) | Sym::Qtt(_) | Sym::Pt(_)))?;
        symexpr::check_dimension(f, dim)?;
        let coef = |s: Sym| -> Result<Expr> {
            let c = f.diff(s).simplify();
            if c.depends_on(is_momentum) {
                return Err(Error::Quantization(format!("{f} is not affine in the momenta")));
            }
            Ok(c)
        };
        let a = (0..dim).map(|k| coef(Sym::P(k))).collect::<Result<Vec<_>>>()?;
        let a0 = coef(Sym::P0)?;
        let b = at_zero_momentum(f, dim);
        let obs = AffineObservable { a, b, a0 };
        obs.check()?;
        Ok(obs)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn to_expr(&self) -> Expr {
        (Expr::sum(self.a.iter().enumerate().map(|(k, a)| a * Expr::p(k))) + &self.a0 * Expr::p0() + &self.b).simplify()
    }
}

fn at_zero_momentum(f: &Expr, dim: usize) -> Expr {
    let b = (0..dim).map(|k| (Sym::P(k), Expr::zero())).chain(std::iter::once((Sym::P0, Expr::zero()))).collect();
    f.substitute(&b).simplify()
}

/// `−(i/2)Σₖ(aᵏ∘Dₖ + Dₖ∘aᵏ)`.
fn momentum_part(a: &[Expr]) -> GridOperator {
    let mut op = GridOperator::zero();
    for (k, ak) in a.iter().enumerate() {
        if ak.is_zero() {
            continue;
        }
        let half = -0.5 * I;
        op = op
            + GridOperator::term(half, vec![Factor::Mul(ak.clone()), Factor::D(k)])
            + GridOperator::term(half, vec![Factor::D(k), Factor::Mul(ak.clone())]);
    }
    op
}

/// `f̂ = −(i/2)(aᵏ∘Dₖ + Dₖ∘aᵏ) − b`.
pub fn quantize(f: &AffineObservable) -> Result<GridOperator> {
    if !f.a0.is_zero() {
        return Err(Error::Quantization(
            "p0 terms act as -i d/dt and are handled by the evolution, not by a spatial operator".into(),
        ));
    }
    Ok(momentum_part(&f.a) + GridOperator::multiply(-ONE, f.b.clone()))
}

/// The Hamiltonian-facing map: as [`quantize`] but `b ↦ +b`.
pub fn quantize_physical(f: &AffineObservable) -> Result<GridOperator> {
    if !f.a0.is_zero() {
        return Err(Error::Quantization("p0 terms have no spatial quantization".into()));
    }
    Ok(momentum_part(&f.a) + GridOperator::multiply(ONE, f.b.clone()))
}

/// `𝓗 = ½Mᵏʲpₖpⱼ + aᵏpₖ + b` with coefficients on `(t, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParts {
    pub quadratic: Vec<Vec<Expr>>,
    pub linear: AffineObservable,
}

/// Momentum coefficients of `𝓗`, rejecting momentum degree above two.
pub fn quadratic_parts(h: &HamiltonianSystem) -> Result<QuadraticParts> {
    let n = h.dim();
    let f = h.hamiltonian();
    let zero_p = |e: &Expr| at_zero_momentum(e, n);
    let mut quadratic = vec![vec![Expr::zero(); n]; n];
    let mut cubic = Vec::new();
    for k in 0..n {
        let dk = f.diff(Sym::P(k));
        for j in 0..n {
            let dkj = dk.diff(Sym::P(j));
            for l in 0..n {
                cubic.push(dkj.diff(Sym::P(l)).simplify());
            }
            quadratic[k][j] = zero_p(&dkj);
        }
    }
    let linear = AffineObservable::new((0..n).map(|k| zero_p(&f.diff(Sym::P(k)))).collect(), zero_p(f))?;
    let nonzero: Vec<&Expr> = cubic.iter().filter(|e| !e.is_zero()).collect();
    if !nonzero.is_empty() {
        let mut probe = Probe::new(std::iter::once(Sym::T).chain((0..n).flat_map(|i| [Sym::Q(i), Sym::P(i)])), 0x9_0ad);
        let points = probe.valid_points(&nonzero, DEGREE_POINTS);
        let worst = nonzero.iter().filter_map(|e| symexpr::max_abs_on(e, &points)).fold(0.0f64, f64::max);
        if worst > DEGREE_TOL || points.is_empty() {
            return Err(Error::Quantization(format!("{f} is not polynomial of degree at most 2 in the momenta")));
        }
    }
    Ok(QuadraticParts { quadratic, linear })
}

/// `𝓗̂`: affine part by [`quantize_physical`]; `c pₖpₖ ↦ −Dₖ∘c∘Dₖ − ¼∂ₖ²c` in
/// compact form; mixed `c pₖpⱼ ↦ ½(â∘b̂ + b̂∘â)` with `â = quantize(c pₖ)` and
/// `b̂ = quantize(pⱼ)`.
pub fn quantize_quadratic(h: &HamiltonianSystem) -> Result<GridOperator> {
    let n = h.dim();
    let parts = quadratic_parts(h)?;
    let mut op = quantize_physical(&parts.linear)?;
    for k in 0..n {
        let c = (parts.quadratic[k][k].clone() * Expr::frac(1, 2)).simplify();
        if c.is_zero() {
            continue;
        }
        op = op + GridOperator::term(-ONE, vec![Factor::Div(k, c.clone())]);
        op = op + GridOperator::multiply(Complex64::new(-0.25, 0.0), c.diff(Sym::Q(k)).diff(Sym::Q(k)).simplify());
    }
    for k in 0..n {
        for j in k + 1..n {
            // ½M^{kj}p_k p_j + ½M^{jk}p_j p_k = M^{kj}p_k p_j
            let c = parts.quadratic[k][j].clone();
            if c.is_zero() {
                continue;
            }
            let mut ak = vec![Expr::zero(); n];
            ak[k] = c;
            let mut pj = vec![Expr::zero(); n];
            pj[j] = Expr::one();
            let a = quantize(&AffineObservable::new(ak, Expr::zero())?)?;
            let b = quantize(&AffineObservable::new(pj, Expr::zero())?)?;
            op = op + (a.compose(&b) + b.compose(&a)).scale(Complex64::new(0.5, 0.0));
        }
    }
    Ok(op)
}

/// Spatial parts of the Hamilton operator `𝓗̂* = −i∂_t + 𝓗̂` and of its
/// splitting by a frame: `𝓗̂*_Γ = −i∂_t − (i/2)(Γᵏ∘Dₖ + Dₖ∘Γᵏ)`,
/// `𝓔̂_Γ = 𝓗̂* − 𝓗̂*_Γ`. The `−i∂_t` term is carried by the evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonOperator {
    pub hamiltonian: GridOperator,
    pub frame_part: GridOperator,
    pub energy: GridOperator,
}

pub fn hamilton_operator(h: &HamiltonianSystem, frame: Option<&Frame>) -> Result<HamiltonOperator> {
    let hamiltonian = quantize_quadratic(h)?;
    let frame_part = match frame {
        Some(f) if f.dim() != h.dim() => {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: f.dim() });
        }
        Some(f) => momentum_part(f.components()),
        None => GridOperator::zero(),
    };
    let energy = hamiltonian.clone() - frame_part.clone();
    Ok(HamiltonOperator { hamiltonian, frame_part, energy })
}

/// Crank–Nicolson solution of `∂_tρ = −i𝓗̂(t)ρ` from `rho.time` to `t1`.
pub fn schrodinger_evolve(
    rho: &HalfDensityGrid,
    h: &HamiltonianSystem,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<Vec<HalfDensityGrid>> {
    if h.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: h.dim() });
    }
    evolve(rho, &quantize_quadratic(h)?, t1, dt, record_every)
}

/// `([f̂, ĝ] + i·quantize({f, g}_V))ρ`, the defect of Dirac's condition.
pub fn dirac_defect(f: &AffineObservable, g: &AffineObservable, rho: &HalfDensityGrid) -> Result<HalfDensityGrid> {
    let (fh, gh) = (quantize(f)?, quantize(g)?);
    let bracket = hamiltonian::poisson_bracket(&f.to_expr(), &g.to_expr())?;
    let bh = quantize(&AffineObservable::from_expr(&bracket, f.dim())?)?;
    let op = fh.compose(&gh) - gh.compose(&fh) + bh.scale(I);
    op.apply(rho)
}
