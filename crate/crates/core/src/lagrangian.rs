//! First-order Lagrangian mechanics on the velocity space `J¹Q`.

use crate::bundle::{self, ChartTransform, Frame, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::symexpr::{self, Compiled, Expr, Layout, Point, Probe, Sym};
use crate::trajectory::{self, StateKind, Trajectory};

/// Pivot magnitude below which a velocity Hessian counts as singular.
pub const SINGULAR_DET: f64 = 1e-12;
/// Number of random jet points used to decide that a Lie derivative vanishes.
pub const SYMMETRY_POINTS: usize = 50;
pub const SYMMETRY_TOL: f64 = 1e-9;
const HESSIAN_PROBES: usize = 20;

/// `L = 𝓛(t, q, q_t) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSystem {
    dim: usize,
    lagrangian: Expr,
}

impl LagrangianSystem {
    pub fn new(dim: usize, lagrangian: Expr) -> Result<Self> {
        symexpr::reject(&lagrangian, "a Lagrangian", |s| matches!(s, Sym::P(_) | Sym::P0 | Sym::Qtt(_) | Sym::Pt(_)))?;
        symexpr::check_dimension(&lagrangian, dim)?;
        Ok(LagrangianSystem { dim, lagrangian })
    }

    pub fn parse(dim: usize, src: &str) -> Result<Self> {
        Self::new(dim, symexpr::parse(src, dim)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    /// `πᵢ = ∂ᵗᵢ𝓛`.
    pub fn momenta(&self) -> Vec<Expr> {
        (0..self.dim).map(|i| self.lagrangian.diff(Sym::Qt(i))).collect()
    }

    /// `∂ᵗᵢ∂ᵗⱼ𝓛`.
    pub fn hessian(&self) -> SymMatrix {
        self.momenta().iter().map(|pi| (0..self.dim).map(|j| pi.diff(Sym::Qt(j))).collect()).collect()
    }

    fn probe(&self, seed: u64) -> Probe {
        let syms = std::iter::once(Sym::T).chain((0..self.dim).flat_map(|i| [Sym::Q(i), Sym::Qt(i)]));
        Probe::new(syms, seed)
    }
}

/// Components `Eᵢ = ∂ᵢ𝓛 − d_t ∂ᵗᵢ𝓛` of the Lagrange operator; they depend on
/// `(t, q, q_t, q_tt)` and their common zero set is the Lagrange equation.
pub fn lagrange_operator(sys: &LagrangianSystem) -> Vec<Expr> {
    sys.momenta()
        .iter()
        .enumerate()
        .map(|(i, pi)| {
            (sys.lagrangian.diff(Sym::Q(i)) - symexpr::total_derivative(pi).expect("momenta live on J¹Q")).simplify()
        })
        .collect()
}

/// `H_L = πᵢ dqⁱ − (qⁱ_t πᵢ − 𝓛) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareCartan {
    pub dq: Vec<Expr>,
    pub dt: Expr,
}

pub fn poincare_cartan(sys: &LagrangianSystem) -> PoincareCartan {
    let dq = sys.momenta();
    let energy = Expr::sum(dq.iter().enumerate().map(|(i, pi)| Expr::qt(i) * pi)) - &sys.lagrangian;
    PoincareCartan { dq, dt: (-energy).simplify() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// Velocity-independent, invertible Hessian: the Legendre map is affine
    /// on each fibre and has a symbolic inverse.
    Hyperregular,
    /// Hessian depends on velocities and is invertible at every probe; the
    /// inverse is only available numerically.
    NumericInverseOnly,
    /// Hessian singular at some probe point.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreReport {
    /// `pᵢ = πᵢ(t, q, q_t)`.
    pub momenta: Vec<Expr>,
    pub hessian: SymMatrix,
    /// `qⁱ_t = L̂⁻¹ⁱ(t, q, p)` when hyperregular.
    pub inverse: Option<Vec<Expr>>,
    pub regularity: Regularity,
    /// Smallest `|det Hessian|` seen over the probe points.
    pub min_abs_det: f64,
}

impl LegendreReport {
    pub fn is_hyperregular(&self) -> bool {
        self.regularity == Regularity::Hyperregular
    }
}

fn velocity_independent(m: &SymMatrix) -> bool {
    m.iter().flatten().all(|e| !e.depends_on(|s| matches!(s, Sym::Qt(_))))
}

fn min_abs_det(det: &Expr, points: &[Point]) -> f64 {
    points.iter().filter_map(|pt| det.evaluate(pt).ok()).fold(f64::INFINITY, |m, d| m.min(d.abs()))
}

pub fn legendre_map(sys: &LagrangianSystem) -> LegendreReport {
    let n = sys.dim;
    let momenta = sys.momenta();
    let hessian = sys.hessian();
    let det = linalg::determinant(&hessian);
    let points = sys.probe(0x01e6_ed7e).valid_points(&[&det], HESSIAN_PROBES);
    let min_det = if det.is_zero() { 0.0 } else { min_abs_det(&det, &points) };
    let singular = !(min_det > SINGULAR_DET);
    let symbolic = velocity_independent(&hessian);
    let (regularity, inverse) = match (singular, symbolic) {
        (true, _) => (Regularity::Degenerate, None),
        (false, false) => (Regularity::NumericInverseOnly, None),
        (false, true) => {
            // p = H q_t + c  with c = π at q_t = 0
            let rest: std::collections::BTreeMap<Sym, Expr> = (0..n).map(|i| (Sym::Qt(i), Expr::zero())).collect();
            let shift: Vec<Expr> = momenta.iter().map(|pi| pi.substitute(&rest)).collect();
            let adj = linalg::adjugate(&hessian);
            let inv_det = det.recip();
            let inverse = (0..n)
                .map(|i| (Expr::sum((0..n).map(|j| &adj[i][j] * (Expr::p(j) - &shift[j]))) * &inv_det).simplify())
                .collect();
            (Regularity::Hyperregular, Some(inverse))
        }
    };
    LegendreReport { momenta, hessian, inverse, regularity, min_abs_det: min_det }
}

/// Right-hand side of a second-order dynamic equation `qⁱ_tt = ξⁱ(t, q, q_t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Acceleration {
    Explicit(Vec<Expr>),
    /// `Hessian · q_tt = force`, solved numerically wherever it is needed.
    Implicit {
        hessian: SymMatrix,
        force: Vec<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderEquation {
    dim: usize,
    acceleration: Acceleration,
}

fn check_jet_function(e: &Expr, dim: usize) -> Result<()> {
    symexpr::reject(e, "a second-order equation", |s| matches!(s, Sym::P(_) | Sym::P0 | Sym::Qtt(_) | Sym::Pt(_)))?;
    symexpr::check_dimension(e, dim)
}

impl SecondOrderEquation {
    pub fn explicit(rhs: Vec<Expr>) -> Result<Self> {
        let dim = rhs.len();
        for e in &rhs {
            check_jet_function(e, dim)?;
        }
        Ok(SecondOrderEquation { dim, acceleration: Acceleration::Explicit(rhs) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn acceleration(&self) -> &Acceleration {
        &self.acceleration
    }

    /// `ξⁱ` when available in closed form.
    pub fn rhs(&self) -> Option<&[Expr]> {
        match &self.acceleration {
            Acceleration::Explicit(v) => Some(v),
            Acceleration::Implicit { .. } => None,
        }
    }

    pub fn compile(&self) -> Result<CompiledAcceleration> {
        let layout = Layout::jet(self.dim);
        let compile_all = |v: &[Expr]| v.iter().map(|e| Compiled::new(e, &layout)).collect::<Result<Vec<_>>>();
        let form = match &self.acceleration {
            Acceleration::Explicit(rhs) => CompiledForm::Explicit(compile_all(rhs)?),
            Acceleration::Implicit { hessian, force } => CompiledForm::Implicit {
                hessian: hessian.iter().map(|row| compile_all(row)).collect::<Result<_>>()?,
                force: compile_all(force)?,
            },
        };
        Ok(CompiledAcceleration { dim: self.dim, form })
    }
}

#[derive(Debug, Clone)]
enum CompiledForm {
    Explicit(Vec<Compiled>),
    Implicit { hessian: Vec<Vec<Compiled>>, force: Vec<Compiled> },
}

#[derive(Debug, Clone)]
pub struct CompiledAcceleration {
    dim: usize,
    form: CompiledForm,
}

impl CompiledAcceleration {
    /// `q_tt` at jet slots `[t, q.., q_t..]`.
    pub fn eval(&self, slots: &[f64]) -> Result<Vec<f64>> {
        match &self.form {
            CompiledForm::Explicit(rhs) => rhs.iter().map(|c| c.eval(slots)).collect(),
            CompiledForm::Implicit { hessian, force } => {
                let a = hessian
                    .iter()
                    .map(|row| row.iter().map(|c| c.eval(slots)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                let b = force.iter().map(|c| c.eval(slots)).collect::<Result<Vec<_>>>()?;
                match linalg::solve_dense(&a, &b) {
                    Some((x, det)) if det > SINGULAR_DET => Ok(x),
                    Some((_, det)) => Err(Error::SingularHessian { det }),
                    None => Err(Error::SingularHessian { det: 0.0 }),
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Solves the Lagrange equation, linear in `q_tt`, for `q_tt = ξ`.
pub fn second_order_equation(sys: &LagrangianSystem) -> Result<SecondOrderEquation> {
    let n = sys.dim;
    let report = legendre_map(sys);
    if report.regularity == Regularity::Degenerate {
        return Err(Error::NotHyperregular(format!(
            "velocity Hessian is singular (min |det| = {:e}); degenerate and almost-regular Lagrangians are not supported",
            report.min_abs_det
        )));
    }
    // force_i = E_i at q_tt = 0
    let rest: std::collections::BTreeMap<Sym, Expr> = (0..n).map(|i| (Sym::Qtt(i), Expr::zero())).collect();
    let force: Vec<Expr> = lagrange_operator(sys).iter().map(|e| e.substitute(&rest)).collect();
    let hessian = report.hessian;
    let acceleration = if report.regularity == Regularity::Hyperregular {
        let adj = linalg::adjugate(&hessian);
        let inv_det = linalg::determinant(&hessian).recip();
        Acceleration::Explicit(
            (0..n).map(|i| (Expr::sum((0..n).map(|j| &adj[i][j] * &force[j])) * &inv_det).simplify()).collect(),
        )
    } else {
        Acceleration::Implicit { hessian, force }
    };
    Ok(SecondOrderEquation { dim: n, acceleration })
}

/// Point of the repeated jet manifold `J¹J¹Q`: `q_dot` is `q_(t)` and
/// `qt_dot` the time derivative of the velocity coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedJetPoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub qt: Vec<f64>,
    pub q_dot: Vec<f64>,
    pub qt_dot: Vec<f64>,
}

/// The two residual families of the Cartan equation:
/// `∂ᵗᵢπⱼ(q_(t)ʲ − q_tʲ)` and `∂ᵢ𝓛 − d̂_tπᵢ + ∂ᵢπⱼ(q_(t)ʲ − q_tʲ)`.
pub fn cartan_residuals(sys: &LagrangianSystem, pt: &RepeatedJetPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.dim;
    for v in [&pt.q, &pt.qt, &pt.q_dot, &pt.qt_dot] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
    }
    let at = Point::new().with(Sym::T, pt.t).with_components(Sym::Q, &pt.q).with_components(Sym::Qt, &pt.qt);
    let pis = sys.momenta();
    let defect: Vec<f64> = (0..n).map(|j| pt.q_dot[j] - pt.qt[j]).collect();
    let mut first = vec![0.0; n];
    let mut second = vec![0.0; n];
    for i in 0..n {
        let mut f = 0.0;
        let mut s = sys.lagrangian.diff(Sym::Q(i)).evaluate(&at)?;
        s -= pis[i].diff(Sym::T).evaluate(&at)?;
        for j in 0..n {
            f += pis[j].diff(Sym::Qt(i)).evaluate(&at)? * defect[j];
            s -= pt.q_dot[j] * pis[i].diff(Sym::Q(j)).evaluate(&at)?;
            s -= pt.qt_dot[j] * pis[i].diff(Sym::Qt(j)).evaluate(&at)?;
            s += pis[j].diff(Sym::Q(i)).evaluate(&at)? * defect[j];
        }
        first[i] = f;
        second[i] = s;
    }
    Ok((first, second))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoetherReport {
    /// `L_{J¹u}𝓛`.
    pub lie_derivative: Expr,
    pub symmetric: bool,
    /// Largest `|L_{J¹u}𝓛|` over the sample points.
    pub max_violation: f64,
    /// `Θ_u = (uⁱ − uᵗqⁱ_t)πᵢ + uᵗ𝓛`.
    pub current: Expr,
}

pub fn noether_current(u: &VectorField, sys: &LagrangianSystem) -> Result<NoetherReport> {
    if u.dim() != sys.dim {
        return Err(Error::DimensionMismatch { expected: sys.dim, found: u.dim() });
    }
    let ju = bundle::prolong_vector_field(u);
    let lie = ju.apply(&sys.lagrangian).simplify();
    let points = sys.probe(0x0e7e_5eed).valid_points(&[&lie], SYMMETRY_POINTS);
    let max_violation = if lie.is_zero() { 0.0 } else { symexpr::max_abs_on(&lie, &points).unwrap_or(f64::INFINITY) };
    let ut = Expr::int(i64::from(u.time()));
    let pis = sys.momenta();
    let current = Expr::sum(u.components().iter().enumerate().map(|(i, c)| (c - &ut * Expr::qt(i)) * &pis[i]))
        + &ut * &sys.lagrangian;
    let current = current.simplify();
    Ok(NoetherReport { lie_derivative: lie, symmetric: max_violation <= SYMMETRY_TOL, max_violation, current })
}

/// `E_Γ = πᵢ(qⁱ_t − Γⁱ) − 𝓛`.
pub fn energy_function(frame: &Frame, sys: &LagrangianSystem) -> Result<Expr> {
    if frame.dim() != sys.dim {
        return Err(Error::DimensionMismatch { expected: sys.dim, found: frame.dim() });
    }
    let pis = sys.momenta();
    Ok((Expr::sum(frame.components().iter().enumerate().map(|(i, g)| &pis[i] * (Expr::qt(i) - g))) - &sys.lagrangian)
        .simplify())
}

/// Holonomic prolongation of a frame: `ξ_Γⁱ = d_tΓⁱ + ∂ⱼΓⁱ(qʲ_t − Γʲ)`.
pub fn frame_prolongation(frame: &Frame) -> Vec<Expr> {
    let n = frame.dim();
    let g = frame.components();
    g.iter()
        .map(|gi| {
            (symexpr::total_derivative(gi).expect("frame components depend on (t, q)")
                + Expr::sum((0..n).map(|j| gi.diff(Sym::Q(j)) * (Expr::qt(j) - &g[j]))))
            .simplify()
        })
        .collect()
}

/// `a_Γ = ξ − ξ_Γ`.
pub fn relative_acceleration(eq: &SecondOrderEquation, frame: &Frame) -> Result<Vec<Expr>> {
    if frame.dim() != eq.dim {
        return Err(Error::DimensionMismatch { expected: eq.dim, found: frame.dim() });
    }
    let rhs = eq.rhs().ok_or_else(|| {
        Error::InvalidArgument("relative acceleration needs an explicit second-order equation".into())
    })?;
    Ok(rhs.iter().zip(frame_prolongation(frame)).map(|(x, xg)| (x - xg).simplify()).collect())
}

/// Free motion `q̄_tt = 0` in the target chart of `tr`, rewritten as a
/// second-order equation in the working chart. The right-hand sides are the
/// inertial forces of the working chart.
pub fn free_motion_transform(tr: &ChartTransform) -> Result<SecondOrderEquation> {
    let n = tr.dim();
    let pro = bundle::prolong_transform(tr);
    let rest: std::collections::BTreeMap<Sym, Expr> = (0..n).map(|i| (Sym::Qtt(i), Expr::zero())).collect();
    let remainder: Vec<Expr> = pro.acceleration.iter().map(|a| a.substitute(&rest)).collect();
    // (∂f/∂q)⁻¹ = (∂g/∂q̄)∘f
    let back: std::collections::BTreeMap<Sym, Expr> =
        tr.forward().iter().enumerate().map(|(i, f)| (Sym::Q(i), f.clone())).collect();
    let xi = (0..n)
        .map(|k| {
            (-Expr::sum((0..n).map(|i| tr.inverse()[k].diff(Sym::Q(i)).substitute(&back) * &remainder[i]))).simplify()
        })
        .collect();
    SecondOrderEquation::explicit(xi)
}

/// Integrates the Lagrange equation with fixed-step RK4 from the initial
/// point `ic` (assigning `t, q, q_t`) to `t1`.
pub fn integrate_lagrange(sys: &LagrangianSystem, ic: &Point, t1: f64, dt: f64) -> Result<Trajectory> {
    let eq = second_order_equation(sys)?;
    integrate_second_order(&eq, ic, t1, dt)
}

pub fn integrate_second_order(eq: &SecondOrderEquation, ic: &Point, t1: f64, dt: f64) -> Result<Trajectory> {
    let n = eq.dim;
    let acc = eq.compile()?;
    let t0 = ic.get(Sym::T)?;
    let mut y0 = ic.components(Sym::Q, n)?;
    y0.extend(ic.components(Sym::Qt, n)?);
    let mut slots = vec![0.0; 1 + 2 * n];
    let (times, states, h) = trajectory::rk4(
        |t, y| {
            slots[0] = t;
            slots[1..].copy_from_slice(y);
            let a = acc.eval(&slots)?;
            let mut dy = y[n..].to_vec();
            dy.extend(a);
            Ok(dy)
        },
        t0,
        t1,
        dt,
        &y0,
    )?;
    Ok(Trajectory { dim: n, kind: StateKind::Velocities, dt: h, times, states, monitors: Vec::new() })
}
