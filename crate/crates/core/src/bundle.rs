//! The configuration bundle `Q → ℝ`: time-dependent chart changes, their
//! jet and momentum prolongations, reference frames as connections
//! `Γ = ∂_t + Γⁱ∂ᵢ`, and vector fields `u = uᵗ∂_t + uⁱ∂ᵢ`.
//!
//! A [`ChartTransform`] maps the working chart `(t, q)` to a target chart
//! `(t, q')` by `q' = f(t, q)`. Its inverse `q = g(t, q')` is written with the
//! same `q` symbols standing for the target coordinates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::symexpr::{self, Expr, Point, Probe, Sym};

const VERIFY_POINTS: usize = 20;
const INVERSE_TOL: f64 = 1e-9;
const JACOBIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Rewrite working-chart expressions in target coordinates.
    Forward,
    /// Rewrite target-chart expressions in working coordinates.
    Inverse,
}

fn reject_non_base(e: &Expr, context: &'static str) -> Result<()> {
    symexpr::reject(e, context, |s| !matches!(s, Sym::T | Sym::Q(_)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartTransform {
    forward: Vec<Expr>,
    inverse: Vec<Expr>,
}

impl ChartTransform {
    /// Builds a transform after checking, at sample points, that `inverse`
    /// undoes `forward` in both orders and that the spatial Jacobian is
    /// invertible.
    pub fn new(forward: Vec<Expr>, inverse: Vec<Expr>) -> Result<Self> {
        let dim = forward.len();
        if inverse.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: inverse.len() });
        }
        for e in forward.iter().chain(&inverse) {
            reject_non_base(e, "a chart transform")?;
            symexpr::check_dimension(e, dim)?;
        }
        let tr = ChartTransform { forward, inverse };
        tr.verify()?;
        Ok(tr)
    }

    pub fn identity(dim: usize) -> Self {
        let id: Vec<Expr> = (0..dim).map(Expr::q).collect();
        ChartTransform { forward: id.clone(), inverse: id }
    }

    pub fn dim(&self) -> usize {
        self.forward.len()
    }

    pub fn forward(&self) -> &[Expr] {
        &self.forward
    }

    pub fn inverse(&self) -> &[Expr] {
        &self.inverse
    }

    /// The same chart change read in the opposite direction.
    pub fn inverted(&self) -> Self {
        ChartTransform { forward: self.inverse.clone(), inverse: self.forward.clone() }
    }

    fn compose(outer: &[Expr], inner: &[Expr]) -> Vec<Expr> {
        let b: BTreeMap<Sym, Expr> = inner.iter().enumerate().map(|(i, e)| (Sym::Q(i), e.clone())).collect();
        outer.iter().map(|e| e.substitute(&b).simplify()).collect()
    }

    fn verify(&self) -> Result<()> {
        let n = self.dim();
        let fg = Self::compose(&self.forward, &self.inverse);
        let gf = Self::compose(&self.inverse, &self.forward);
        let jac = self.jacobian();
        let det = linalg::determinant(&jac);
        let mut probe = Probe::new(std::iter::once(Sym::T).chain((0..n).map(Sym::Q)), 0x5eed_0001);
        let all: Vec<&Expr> = fg.iter().chain(&gf).chain(std::iter::once(&det)).collect();
        let points = probe.valid_points(&all, VERIFY_POINTS);
        for pt in &points {
            for (i, (a, b)) in fg.iter().zip(&gf).enumerate() {
                let q = pt.get(Sym::Q(i))?;
                for v in [a.evaluate(pt)?, b.evaluate(pt)?] {
                    let residual = (v - q).abs();
                    if residual > INVERSE_TOL * (1.0 + q.abs()) {
                        return Err(Error::NotInverse { residual });
                    }
                }
            }
            let d = det.evaluate(pt)?;
            if d.abs() <= JACOBIAN_TOL {
                return Err(Error::SingularJacobian { det: d.abs() });
            }
        }
        Ok(())
    }

    /// `∂fⁱ/∂qʲ` in working coordinates.
    pub fn jacobian(&self) -> SymMatrix {
        let n = self.dim();
        self.forward.iter().map(|f| (0..n).map(|j| f.diff(Sym::Q(j))).collect()).collect()
    }

    /// Fails when the spatial Jacobian is singular at `(t, q)`.
    pub fn check_point(&self, pt: &Point) -> Result<()> {
        let d = linalg::determinant(&self.jacobian()).evaluate(pt)?;
        if d.abs() <= JACOBIAN_TOL {
            return Err(Error::SingularJacobian { det: d.abs() });
        }
        Ok(())
    }

    /// Maps a numeric point of the source chart (per `dir`) to the other
    /// chart. Whatever of `q_t`, `q_tt`, `p` is assigned gets mapped too.
    pub fn map_point(&self, pt: &Point, dir: Direction) -> Result<Point> {
        let tr = match dir {
            Direction::Forward => self.clone(),
            Direction::Inverse => self.inverted(),
        };
        tr.check_point(pt)?;
        let pro = prolong_transform(&tr);
        let n = tr.dim();
        let mut out = Point::new().with(Sym::T, pt.get(Sym::T)?);
        for i in 0..n {
            out.set(Sym::Q(i), tr.forward[i].evaluate(pt)?);
            if pt.contains(Sym::Qt(0)) {
                out.set(Sym::Qt(i), pro.velocity[i].evaluate(pt)?);
            }
            if pt.contains(Sym::Qtt(0)) {
                out.set(Sym::Qtt(i), pro.acceleration[i].evaluate(pt)?);
            }
            if pt.contains(Sym::P(0)) {
                out.set(Sym::P(i), pro.momentum[i].evaluate(pt)?);
            }
        }
        Ok(out)
    }
}

/// Prolongation of a chart change to jets and momenta, in working coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Prolongation {
    /// `q'ⁱ_t = d_t fⁱ`.
    pub velocity: Vec<Expr>,
    /// `q'ⁱ_tt = d_t d_t fⁱ`.
    pub acceleration: Vec<Expr>,
    /// `p'ᵢ = Σⱼ (∂gʲ/∂q'ⁱ)∘f · pⱼ`.
    pub momentum: Vec<Expr>,
}

pub fn prolong_transform(tr: &ChartTransform) -> Prolongation {
    let n = tr.dim();
    let velocity: Vec<Expr> = tr
        .forward
        .iter()
        .map(|f| symexpr::total_derivative(f).expect("transform maps depend on (t, q) only").simplify())
        .collect();
    let acceleration = velocity
        .iter()
        .map(|v| symexpr::total_derivative(v).expect("velocities depend on (t, q, q_t) only").simplify())
        .collect();
    let back: Vec<Vec<Expr>> = tr
        .inverse
        .iter()
        .map(|g| ChartTransform::compose(&(0..n).map(|i| g.diff(Sym::Q(i))).collect::<Vec<_>>(), &tr.forward))
        .collect();
    let momentum = (0..n).map(|i| Expr::sum((0..n).map(|j| &back[j][i] * Expr::p(j))).simplify()).collect();
    Prolongation { velocity, acceleration, momentum }
}

/// Rewrites `e` in the other chart. `Forward` takes working-chart
/// expressions to target coordinates: `e'(tr(pt)) = e(pt)`.
pub fn transform_expression(e: &Expr, tr: &ChartTransform, dir: Direction) -> Result<Expr> {
    symexpr::reject(e, "a chart transform of expressions", |s| matches!(s, Sym::P0 | Sym::Pt(_)))?;
    symexpr::check_dimension(e, tr.dim())?;
    // rules come from the opposite map: old symbols written in new ones
    let rules_from = match dir {
        Direction::Forward => tr.inverted(),
        Direction::Inverse => tr.clone(),
    };
    let pro = prolong_transform(&rules_from);
    let mut b = BTreeMap::new();
    for i in 0..tr.dim() {
        b.insert(Sym::Q(i), rules_from.forward[i].clone());
        b.insert(Sym::Qt(i), pro.velocity[i].clone());
        b.insert(Sym::Qtt(i), pro.acceleration[i].clone());
        b.insert(Sym::P(i), pro.momentum[i].clone());
    }
    Ok(e.substitute(&b).simplify())
}

/// Reference frame: the connection `Γ = ∂_t + Γⁱ∂ᵢ` on `Q → ℝ`, stored in
/// the working chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    components: Vec<Expr>,
}

impl Frame {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        let dim = components.len();
        for c in &components {
            reject_non_base(c, "frame components")?;
            symexpr::check_dimension(c, dim)?;
        }
        Ok(Frame { components })
    }

    /// `Γ = ∂_t`: the frame adapted to the working chart.
    pub fn rest(dim: usize) -> Self {
        Frame { components: vec![Expr::zero(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Components in the target chart of `tr`:
    /// `Γ'ⁱ = ∂_t fⁱ + ∂ⱼfⁱ Γʲ`, rewritten in target coordinates.
    pub fn transform(&self, tr: &ChartTransform) -> Result<Frame> {
        if tr.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: tr.dim() });
        }
        let n = self.dim();
        let comps = tr
            .forward
            .iter()
            .map(|f| {
                let working = f.diff(Sym::T) + Expr::sum((0..n).map(|j| f.diff(Sym::Q(j)) * &self.components[j]));
                transform_expression(&working, tr, Direction::Forward)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Frame { components: comps })
    }

    /// The frame as the vector field `∂_t + Γⁱ∂ᵢ`.
    pub fn as_vector_field(&self) -> VectorField {
        VectorField { time: 1, components: self.components.clone() }
    }
}

/// Frame whose adapted chart is the target of `tr`: `Γ = ∂_t` there, and in
/// the working chart `Γⁱ = (∂_t gⁱ)(t, f(t, q))`.
pub fn frame_of_chart(tr: &ChartTransform) -> Frame {
    let dt_inverse: Vec<Expr> = tr.inverse.iter().map(|g| g.diff(Sym::T)).collect();
    Frame { components: ChartTransform::compose(&dt_inverse, &tr.forward) }
}

/// `qⁱ_t − Γⁱ(t, q)` at a point assigning `t, q, q_t`.
pub fn relative_velocity(frame: &Frame, pt: &Point) -> Result<Vec<f64>> {
    frame.components.iter().enumerate().map(|(i, g)| Ok(pt.get(Sym::Qt(i))? - g.evaluate(pt)?)).collect()
}

/// `u = uᵗ∂_t + uⁱ∂ᵢ` with `uᵗ ∈ {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    time: u8,
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(time: i64, components: Vec<Expr>) -> Result<Self> {
        let time = match time {
            0 => 0,
            1 => 1,
            other => return Err(Error::InvalidTimeComponent(other)),
        };
        let dim = components.len();
        for c in &components {
            reject_non_base(c, "vector field components")?;
            symexpr::check_dimension(c, dim)?;
        }
        Ok(VectorField { time, components })
    }

    pub fn time(&self) -> u8 {
        self.time
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

/// Jet prolongation `J¹u = uᵗ∂_t + uⁱ∂ᵢ + (d_t uⁱ)∂ᵗᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetVectorField {
    pub time: u8,
    pub components: Vec<Expr>,
    pub velocity_components: Vec<Expr>,
}

impl JetVectorField {
    /// Derivative of a function on `J¹Q` along the field.
    pub fn apply(&self, f: &Expr) -> Expr {
        let mut terms = Vec::new();
        if self.time == 1 {
            terms.push(f.diff(Sym::T));
        }
        for (i, (u, du)) in self.components.iter().zip(&self.velocity_components).enumerate() {
            terms.push(u * f.diff(Sym::Q(i)));
            terms.push(du * f.diff(Sym::Qt(i)));
        }
        Expr::sum(terms)
    }
}

pub fn prolong_vector_field(u: &VectorField) -> JetVectorField {
    JetVectorField {
        time: u.time,
        components: u.components.clone(),
        velocity_components: u
            .components
            .iter()
            .map(|c| symexpr::total_derivative(c).expect("components depend on (t, q) only"))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn exprs(src: &[&str], dim: usize) -> Vec<Expr> {
        src.iter().map(|s| parse(s, dim).unwrap()).collect()
    }

    fn boost() -> ChartTransform {
        ChartTransform::new(exprs(&["q1 - 2*t"], 1), exprs(&["q1 + 2*t"], 1)).unwrap()
    }

    const OMEGA: f64 = 0.7;

    fn rotation() -> ChartTransform {
        ChartTransform::new(
            exprs(&["q1*cos(0.7*t) + q2*sin(0.7*t)", "-q1*sin(0.7*t) + q2*cos(0.7*t)"], 2),
            exprs(&["q1*cos(0.7*t) - q2*sin(0.7*t)", "q1*sin(0.7*t) + q2*cos(0.7*t)"], 2),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_inverse_and_singular_maps() {
        let bad = ChartTransform::new(exprs(&["q1 - t"], 1), exprs(&["q1 - t"], 1));
        assert!(matches!(bad, Err(Error::NotInverse { .. })));
        let vel = ChartTransform::new(exprs(&["qt1"], 1), exprs(&["q1"], 1));
        assert!(matches!(vel, Err(Error::ForbiddenSymbol { .. })));
        let tr = ChartTransform::new(exprs(&["q1^3"], 1), exprs(&["q1"], 1));
        assert!(tr.is_err());
    }

    #[test]
    fn identity_prolongation() {
        let pro = prolong_transform(&ChartTransform::identity(1));
        assert_eq!(pro.velocity[0], Expr::qt(0));
        assert_eq!(pro.momentum[0], Expr::p(0));
        assert_eq!(pro.acceleration[0], Expr::qtt(0));
    }

    #[test]
    fn boost_prolongation() {
        let pro = prolong_transform(&boost());
        assert_eq!(pro.velocity[0], parse("qt1 - 2", 1).unwrap());
        assert_eq!(pro.momentum[0], Expr::p(0));
    }

    #[test]
    fn rotation_prolongation_matches_chain_rule() {
        let pro = prolong_transform(&rotation());
        let want = parse("qt1*cos(0.7*t) + qt2*sin(0.7*t) + 0.7*(-q1*sin(0.7*t) + q2*cos(0.7*t))", 2).unwrap();
        let mut probe = Probe::full(2, 3);
        for pt in probe.valid_points(&[&want], 20) {
            let d = pro.velocity[0].evaluate(&pt).unwrap() - want.evaluate(&pt).unwrap();
            assert!(d.abs() < 1e-13);
        }
    }

    #[test]
    fn transform_expression_examples() {
        let tr = boost();
        let e = transform_expression(&Expr::q(0), &tr, Direction::Forward).unwrap();
        let src = Point::new().with(Sym::T, 1.0).with(Sym::Q(0), 3.0);
        let img = tr.map_point(&src, Direction::Forward).unwrap();
        assert_eq!(e.evaluate(&img).unwrap(), 3.0);

        let ke = parse("0.5*qt1^2", 1).unwrap();
        let moved = transform_expression(&ke, &tr, Direction::Forward).unwrap();
        assert_eq!(moved, parse("0.5*(qt1 + 2)^2", 1).unwrap().simplify());

        let rot = rotation();
        let p1 = transform_expression(&Expr::p(0), &rot, Direction::Forward).unwrap();
        let want = parse("cos(0.7*t)*p1 - sin(0.7*t)*p2", 2).unwrap();
        let mut probe = Probe::full(2, 4);
        for pt in probe.valid_points(&[&want], 20) {
            assert!((p1.evaluate(&pt).unwrap() - want.evaluate(&pt).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn frame_of_chart_examples() {
        let id = frame_of_chart(&ChartTransform::identity(2));
        assert!(id.components().iter().all(Expr::is_zero));
        assert_eq!(frame_of_chart(&boost()).components()[0], Expr::int(2));
        let rot = frame_of_chart(&rotation());
        let mut probe = Probe::full(2, 5);
        for pt in probe.valid_points(&[], 20) {
            let (q1, q2) = (pt.get(Sym::Q(0)).unwrap(), pt.get(Sym::Q(1)).unwrap());
            assert!((rot.components()[0].evaluate(&pt).unwrap() + OMEGA * q2).abs() < 1e-13);
            assert!((rot.components()[1].evaluate(&pt).unwrap() - OMEGA * q1).abs() < 1e-13);
        }
    }

    #[test]
    fn frame_is_rest_in_its_adapted_chart() {
        let tr = rotation();
        let adapted = frame_of_chart(&tr).transform(&tr).unwrap();
        let mut probe = Probe::full(2, 6);
        for pt in probe.valid_points(&[], 10) {
            for c in adapted.components() {
                assert!(c.evaluate(&pt).unwrap().abs() < 1e-13);
            }
        }
    }

    #[test]
    fn relative_velocity_examples() {
        let pt = Point::new().with(Sym::T, 0.0).with(Sym::Q(0), 0.0).with(Sym::Qt(0), 2.0);
        assert_eq!(relative_velocity(&Frame::rest(1), &pt).unwrap(), vec![2.0]);
        assert_eq!(relative_velocity(&frame_of_chart(&boost()), &pt).unwrap(), vec![0.0]);
        let pt =
            Point::new().with_components(Sym::Q, &[1.0, 0.0]).with_components(Sym::Qt, &[0.0, 0.0]).with(Sym::T, 0.0);
        let v = relative_velocity(&frame_of_chart(&rotation()), &pt).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] + OMEGA).abs() < 1e-15);
    }

    #[test]
    fn vector_field_prolongation() {
        let u = VectorField::new(0, vec![Expr::one()]).unwrap();
        assert!(prolong_vector_field(&u).velocity_components[0].is_zero());
        let u = VectorField::new(1, vec![Expr::zero()]).unwrap();
        let j = prolong_vector_field(&u);
        assert_eq!(j.time, 1);
        assert!(j.velocity_components[0].is_zero());
        let u = VectorField::new(0, vec![Expr::t()]).unwrap();
        assert!(prolong_vector_field(&u).velocity_components[0].is_one());
        assert!(matches!(VectorField::new(2, vec![Expr::one()]), Err(Error::InvalidTimeComponent(2))));
    }
}
