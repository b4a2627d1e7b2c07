//! Hamiltonian mechanics on the momentum phase space `V*Q` with
//! coordinates `(t, qⁱ, pᵢ)`, and its homogeneous lift to `T*Q`, where `p₀`
//! is conjugate to `t`.
//!
//! The canonical bracket is `{f, g}_V = ∂ⁱf ∂ᵢg − ∂ⁱg ∂ᵢf` with `∂ⁱ = ∂/∂pᵢ`,
//! so `{p, q}_V = 1`. The homogeneous bracket on `T*Q` adds the `(p₀, t)`
//! pair in the same order: `{f, g}_T = {f, g}_V + ∂_{p₀}f ∂_t g − ∂_{p₀}g ∂_t f`.

use std::collections::BTreeMap;

use crate::bundle::Frame;
use crate::error::{Error, Result};
use crate::lagrangian::{self, LagrangianSystem};
use crate::symexpr::{self, Compiled, Expr, Layout, Point, Probe, Sym};
use crate::trajectory::{self, StateKind, Trajectory};

const CHECK_POINTS: usize = 20;
/// Tolerance of the numeric association and evolution checks.
pub const CHECK_TOL: f64 = 1e-10;

fn reject_off_phase(e: &Expr, context: &'static str) -> Result<()> {
    symexpr::reject(e, context, |s| matches!(s, Sym::Qt(_) | Sym::Qtt(_) | Sym::P0 | Sym::Pt(_)))
}

fn reject_off_cotangent(e: &Expr, context: &'static str) -> Result<()> {
    symexpr::reject(e, context, |s| matches!(s, Sym::Qt(_) | Sym::Qtt(_) | Sym::Pt(_)))
}

fn phase_probe(dim: usize, seed: u64) -> Probe {
    let syms = std::iter::once(Sym::T).chain((0..dim).flat_map(|i| [Sym::Q(i), Sym::P(i)]));
    Probe::new(syms, seed)
}

fn max_index(e: &Expr) -> usize {
    e.free_symbols().into_iter().filter_map(Sym::index).map(|i| i + 1).max().unwrap_or(0)
}

/// `H = p_k dq^k − 𝓗 dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSystem {
    dim: usize,
    hamiltonian: Expr,
}

impl HamiltonianSystem {
    pub fn new(dim: usize, hamiltonian: Expr) -> Result<Self> {
        reject_off_phase(&hamiltonian, "a Hamiltonian")?;
        symexpr::check_dimension(&hamiltonian, dim)?;
        Ok(HamiltonianSystem { dim, hamiltonian })
    }

    pub fn parse(dim: usize, src: &str) -> Result<Self> {
        Self::new(dim, symexpr::parse(src, dim)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.hamiltonian
    }

    /// The homogeneous Hamiltonian `𝓗* = p₀ + 𝓗` on `T*Q`.
    pub fn homogeneous(&self) -> HomogeneousHamiltonian {
        HomogeneousHamiltonian { expr: Expr::p0() + &self.hamiltonian }
    }
}

/// `𝓗* = p₀ + 𝓗` on `T*Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousHamiltonian {
    expr: Expr,
}

impl HomogeneousHamiltonian {
    /// Accepts `e` only when it is `p₀` plus a function on `V*Q`.
    pub fn new(e: Expr) -> Result<Self> {
        reject_off_cotangent(&e, "a homogeneous Hamiltonian")?;
        let rest = (e.clone() - Expr::p0()).simplify();
        if rest.depends_on(|s| s == Sym::P0) {
            return Err(Error::InvalidArgument(
                "a homogeneous Hamiltonian must be p0 plus a function of (t, q, p)".into(),
            ));
        }
        Ok(HomogeneousHamiltonian { expr: e })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// `𝓗 = 𝓗* − p₀`.
    pub fn reduce(&self, dim: usize) -> Result<HamiltonianSystem> {
        HamiltonianSystem::new(dim, (self.expr.clone() - Expr::p0()).simplify())
    }
}

/// `ζ*f`: functions on `V*Q` read as functions on `T*Q` independent of `p₀`.
pub fn lift(f: &Expr) -> Result<Expr> {
    reject_off_phase(f, "a function on V*Q")?;
    Ok(f.clone())
}

fn bracket_terms(f: &Expr, g: &Expr) -> Vec<Expr> {
    let n = max_index(f).max(max_index(g));
    (0..n).flat_map(|i| [f.diff(Sym::P(i)) * g.diff(Sym::Q(i)), -(g.diff(Sym::P(i)) * f.diff(Sym::Q(i)))]).collect()
}

/// `{f, g}_V = ∂ⁱf ∂ᵢg − ∂ⁱg ∂ᵢf`.
pub fn poisson_bracket(f: &Expr, g: &Expr) -> Result<Expr> {
    reject_off_phase(f, "a Poisson bracket")?;
    reject_off_phase(g, "a Poisson bracket")?;
    Ok(Expr::sum(bracket_terms(f, g)).simplify())
}

/// `{f, g}_T = {f, g}_V + ∂_{p₀}f ∂_t g − ∂_{p₀}g ∂_t f` on `T*Q`.
pub fn homogeneous_bracket(f: &Expr, g: &Expr) -> Result<Expr> {
    reject_off_cotangent(f, "a homogeneous Poisson bracket")?;
    reject_off_cotangent(g, "a homogeneous Poisson bracket")?;
    let mut terms = bracket_terms(f, g);
    terms.push(f.diff(Sym::P0) * g.diff(Sym::T));
    terms.push(-(g.diff(Sym::P0) * f.diff(Sym::T)));
    Ok(Expr::sum(terms).simplify())
}

/// Right-hand sides of the Hamilton equation `qᵏ_t = ∂ᵏ𝓗`, `p_tk = −∂ₖ𝓗`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonEquations {
    pub velocity: Vec<Expr>,
    pub force: Vec<Expr>,
}

pub fn hamilton_equations(h: &HamiltonianSystem) -> HamiltonEquations {
    let n = h.dim;
    HamiltonEquations {
        velocity: (0..n).map(|k| h.hamiltonian.diff(Sym::P(k))).collect(),
        force: (0..n).map(|k| (-h.hamiltonian.diff(Sym::Q(k))).simplify()).collect(),
    }
}

/// `𝓗 = 𝓗_Γ + 𝓔_Γ` with `𝓗_Γ = pᵢΓⁱ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSplit {
    pub frame_part: Expr,
    pub energy: Expr,
}

pub fn frame_split(h: &HamiltonianSystem, frame: &Frame) -> Result<FrameSplit> {
    if frame.dim() != h.dim {
        return Err(Error::DimensionMismatch { expected: h.dim, found: frame.dim() });
    }
    let frame_part = Expr::sum(frame.components().iter().enumerate().map(|(i, g)| Expr::p(i) * g)).simplify();
    let energy = (h.hamiltonian.clone() - &frame_part).simplify();
    Ok(FrameSplit { frame_part, energy })
}

/// `L_{γ_H}F = ∂_tF + {𝓗, F}_V`, checked against the homogeneous form
/// `{𝓗*, ζ*F}_T` at sample points.
pub fn evolution_derivative(f: &Expr, h: &HamiltonianSystem) -> Result<Expr> {
    reject_off_phase(f, "an evolution equation")?;
    let direct = (f.diff(Sym::T) + poisson_bracket(&h.hamiltonian, f)?).simplify();
    let homogeneous = homogeneous_evolution(f, h)?;
    let gap = (direct.clone() - homogeneous).simplify();
    if !gap.is_zero() {
        let dim = h.dim.max(max_index(f));
        let points = phase_probe(dim, 0xe7_0177).valid_points(&[&direct, &gap], CHECK_POINTS);
        let worst = symexpr::max_abs_on(&gap, &points).unwrap_or(0.0);
        if worst > CHECK_TOL {
            return Err(Error::InvalidArgument(format!("homogeneous and reduced evolution disagree by {worst:e}")));
        }
    }
    Ok(direct)
}

/// `{𝓗*, ζ*F}_T`.
pub fn homogeneous_evolution(f: &Expr, h: &HamiltonianSystem) -> Result<Expr> {
    homogeneous_bracket(h.homogeneous().expr(), &lift(f)?)
}

/// `qⁱ_t∘Ĥ = ∂ⁱ𝓗`.
pub fn hamiltonian_map(h: &HamiltonianSystem) -> Vec<Expr> {
    (0..h.dim).map(|i| h.hamiltonian.diff(Sym::P(i))).collect()
}

/// `L_H = pᵢqⁱ_t − 𝓗` on `J¹V*Q`.
pub fn lagrangian_of_h(h: &HamiltonianSystem) -> Expr {
    (Expr::sum((0..h.dim).map(|i| Expr::p(i) * Expr::qt(i))) - &h.hamiltonian).simplify()
}

/// Lagrange operator of `L_H` with `(q, p)` as configuration variables:
/// first the `q` components `−p_tᵢ − ∂ᵢ𝓗`, then the `p` components
/// `qⁱ_t − ∂ⁱ𝓗`.
pub fn phase_lagrange_operator(h: &HamiltonianSystem) -> (Vec<Expr>, Vec<Expr>) {
    let lh = lagrangian_of_h(h);
    let n = h.dim;
    let q_part = (0..n)
        .map(|i| {
            let d = symexpr::total_derivative_phase(&lh.diff(Sym::Qt(i))).expect("momenta of L_H are p");
            (lh.diff(Sym::Q(i)) - d).simplify()
        })
        .collect();
    // L_H has no p_t dependence
    let p_part = (0..n).map(|i| lh.diff(Sym::P(i)).simplify()).collect();
    (q_part, p_part)
}

/// Residuals of the association relations `L̂∘Ĥ∘L̂ = L̂` (on `J¹Q`) and
/// `Ĥ*L_H = Ĥ*L` (on `V*Q`), maximised over sample points.
pub fn association_residuals(l: &LagrangianSystem, h: &HamiltonianSystem) -> Result<(f64, f64)> {
    if l.dim() != h.dim {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: h.dim });
    }
    let n = h.dim;
    let momenta = l.momenta();
    let hmap = hamiltonian_map(h);
    let lh = lagrangian_of_h(h);

    let velocity_at = |pt: &Point| -> Result<Point> {
        let mut out = Point::new().with(Sym::T, pt.get(Sym::T)?);
        for i in 0..n {
            out.set(Sym::Q(i), pt.get(Sym::Q(i))?);
            out.set(Sym::Qt(i), hmap[i].evaluate(pt)?);
        }
        Ok(out)
    };

    let jet_syms = std::iter::once(Sym::T).chain((0..n).flat_map(|i| [Sym::Q(i), Sym::Qt(i)]));
    let jet_points = Probe::new(jet_syms, 0xa550_c1a7).valid_points(&momenta.iter().collect::<Vec<_>>(), CHECK_POINTS);
    let mut first = 0.0f64;
    for pt in &jet_points {
        let mut phase = Point::new().with(Sym::T, pt.get(Sym::T)?);
        for i in 0..n {
            phase.set(Sym::Q(i), pt.get(Sym::Q(i))?);
            phase.set(Sym::P(i), momenta[i].evaluate(pt)?);
        }
        let back = velocity_at(&phase)?;
        for (i, pi) in momenta.iter().enumerate() {
            let p = phase.get(Sym::P(i))?;
            first = first.max((pi.evaluate(&back)? - p).abs() / (1.0 + p.abs()));
        }
    }

    let phase_points =
        phase_probe(n, 0xa550_c1a8).valid_points(&hmap.iter().chain([&lh]).collect::<Vec<_>>(), CHECK_POINTS);
    let mut second = 0.0f64;
    for pt in &phase_points {
        let jet = velocity_at(pt)?;
        let mut full = pt.clone();
        for i in 0..n {
            full.set(Sym::Qt(i), jet.get(Sym::Qt(i))?);
        }
        let a = lh.evaluate(&full)?;
        let b = l.lagrangian().evaluate(&jet)?;
        second = second.max((a - b).abs() / (1.0 + b.abs()));
    }
    Ok((first, second))
}

/// `𝓗 = pᵢL̂⁻¹ⁱ − 𝓛(t, q, L̂⁻¹)` for a hyperregular Lagrangian.
pub fn associated_hamiltonian(l: &LagrangianSystem) -> Result<HamiltonianSystem> {
    let n = l.dim();
    let report = lagrangian::legendre_map(l);
    let inverse = report.inverse.ok_or_else(|| {
        Error::NotHyperregular(format!(
            "the Legendre map has no closed-form inverse ({:?}, min |det Hessian| = {:e})",
            report.regularity, report.min_abs_det
        ))
    })?;
    let b: BTreeMap<Sym, Expr> = inverse.iter().enumerate().map(|(i, v)| (Sym::Qt(i), v.clone())).collect();
    let hamiltonian =
        (Expr::sum(inverse.iter().enumerate().map(|(i, v)| Expr::p(i) * v)) - l.lagrangian().substitute(&b)).simplify();
    let h = HamiltonianSystem::new(n, hamiltonian)?;
    let (first, second) = association_residuals(l, &h)?;
    let worst = first.max(second);
    if worst > CHECK_TOL {
        return Err(Error::NotHyperregular(format!("association relations fail by {worst:e}")));
    }
    Ok(h)
}

/// Fixed-step RK4 on the Hamilton equation from `ic` (assigning `t, q, p`).
pub fn integrate_hamilton(h: &HamiltonianSystem, ic: &Point, t1: f64, dt: f64) -> Result<Trajectory> {
    let n = h.dim;
    let eqs = hamilton_equations(h);
    let layout = Layout::phase(n);
    let rhs: Vec<Compiled> =
        eqs.velocity.iter().chain(&eqs.force).map(|e| Compiled::new(e, &layout)).collect::<Result<_>>()?;
    let t0 = ic.get(Sym::T)?;
    let mut y0 = ic.components(Sym::Q, n)?;
    y0.extend(ic.components(Sym::P, n)?);
    let mut slots = vec![0.0; 1 + 2 * n];
    let (times, states, step) = trajectory::rk4(
        |t, y| {
            slots[0] = t;
            slots[1..].copy_from_slice(y);
            rhs.iter().map(|c| c.eval(&slots)).collect()
        },
        t0,
        t1,
        dt,
        &y0,
    )?;
    Ok(Trajectory { dim: n, kind: StateKind::Momenta, dt: step, times, states, monitors: Vec::new() })
}
