use std::fmt::Write as _;

use num_complex::Complex64;

use crate::bundle::ChartTransform;
use crate::error::{Error, Result};
use crate::symexpr::{Compiled, Expr, Layout, Sym};

pub const MIN_NODES: usize = 8;
pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Uniform nodes `min + jΔx`, `j = 0..nodes`, covering `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, nodes: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidGrid(format!("axis extent [{min}, {max}) is empty or not finite")));
        }
        if nodes < MIN_NODES {
            return Err(Error::InvalidGrid(format!("{nodes} nodes per axis, at least {MIN_NODES} required")));
        }
        Ok(Axis { min, max, nodes })
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / self.nodes as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.min + j as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<Axis>,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>, boundary: Boundary) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!("{} spatial dimensions, 1 to {MAX_DIM} supported", axes.len())));
        }
        Ok(GridSpec { axes, boundary })
    }

    pub fn uniform(dim: usize, min: f64, max: f64, nodes: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![Axis::new(min, max, nodes)?; dim], boundary)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `Π Δx_k`.
    pub fn cell(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Distance in flat index between neighbours along `axis`; the last axis
    /// varies fastest.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.nodes).product()
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.axes[k].nodes;
            flat /= self.axes[k].nodes;
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            x[k] = self.axes[k].node(idx[k]);
        }
        x
    }

    /// Flat index of the node `shift` steps from `flat` along `axis`, or
    /// `None` when that falls outside a Dirichlet grid.
    pub fn neighbour(&self, flat: usize, axis: usize, shift: isize) -> Option<usize> {
        let n = self.axes[axis].nodes as isize;
        let j = self.multi_index(flat)[axis] as isize;
        let target = match self.boundary {
            Boundary::Periodic => (j + shift).rem_euclid(n),
            Boundary::Dirichlet if (0..n).contains(&(j + shift)) => j + shift,
            Boundary::Dirichlet => return None,
        };
        Some((flat as isize + (target - j) * self.stride(axis) as isize) as usize)
    }

    /// Evaluates `e(t, q)` at every node.
    pub fn sample(&self, e: &Expr, t: f64) -> Result<Vec<f64>> {
        let c = Compiled::new(e, &coordinate_layout())?;
        (0..self.len())
            .map(|j| {
                let x = self.coords(j);
                c.eval(&[t, x[0], x[1]])
            })
            .collect()
    }
}

pub(crate) fn coordinate_layout() -> Layout {
    Layout::new([Sym::T, Sym::Q(0), Sym::Q(1)])
}

/// A complex half-density sampled on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfDensityGrid {
    pub spec: GridSpec,
    pub time: f64,
    pub values: Vec<Complex64>,
}

impl HalfDensityGrid {
    pub fn new(spec: GridSpec, time: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch { expected: spec.len(), found: values.len() });
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidGrid("non-finite amplitude".into()));
        }
        Ok(HalfDensityGrid { spec, time, values })
    }

    pub fn zeros(spec: GridSpec, time: f64) -> Self {
        let n = spec.len();
        HalfDensityGrid { spec, time, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(spec: GridSpec, time: f64, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let dim = spec.dim();
        let values = (0..spec.len()).map(|j| f(&spec.coords(j)[..dim])).collect();
        Self::new(spec, time, values)
    }

    /// Samples `re + i·im`, both functions of `(t, q)`.
    pub fn from_exprs(spec: GridSpec, time: f64, re: &Expr, im: &Expr) -> Result<Self> {
        let r = spec.sample(re, time)?;
        let i = spec.sample(im, time)?;
        let values = r.into_iter().zip(i).map(|(a, b)| Complex64::new(a, b)).collect();
        Self::new(spec, time, values)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn check_match(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch("grids differ in extent, node count or boundary".into()));
        }
        Ok(())
    }

    pub fn snapshot_header(&self) -> &'static str {
        match self.dim() {
            1 => "t,x,re_rho,im_rho",
            _ => "t,x,y,re_rho,im_rho",
        }
    }

    /// One CSV row per node, without header.
    pub fn snapshot_rows(&self, out: &mut String) {
        let dim = self.dim();
        for (j, v) in self.values.iter().enumerate() {
            write!(out, "{:e}", self.time).unwrap();
            for x in &self.spec.coords(j)[..dim] {
                write!(out, ",{x:e}").unwrap();
            }
            writeln!(out, ",{:e},{:e}", v.re, v.im).unwrap();
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", self.snapshot_header());
        self.snapshot_rows(&mut out);
        out
    }
}

/// `⟨ρ, σ⟩ = Σ conj(ρ_j) σ_j Δxⁿ`.
pub fn inner_product(rho: &HalfDensityGrid, sigma: &HalfDensityGrid) -> Result<Complex64> {
    rho.check_match(sigma)?;
    Ok(dot(&rho.values, &sigma.values) * rho.spec.cell())
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(Complex64::new(0.0, 0.0), |s, (x, y)| s + x.conj() * y)
}

pub fn norm(rho: &HalfDensityGrid) -> f64 {
    let s: f64 = rho.values.iter().map(|v| v.norm_sqr()).sum();
    (s * rho.spec.cell()).sqrt()
}

fn interpolate(values: &[Complex64], axis: &Axis, boundary: Boundary, x: f64) -> Complex64 {
    let n = axis.nodes as isize;
    let s = (x - axis.min) / axis.spacing();
    let j = s.floor();
    let w = s - j;
    let j = j as isize;
    let at = |k: isize| -> Complex64 {
        match boundary {
            Boundary::Periodic => values[k.rem_euclid(n) as usize],
            Boundary::Dirichlet if (0..n).contains(&k) => values[k as usize],
            Boundary::Dirichlet => Complex64::new(0.0, 0.0),
        }
    };
    if w == 0.0 {
        at(j)
    } else {
        at(j) * (1.0 - w) + at(j + 1) * w
    }
}

/// Rewrites `ρ` in the target chart of `tr` at the grid's time:
/// `ρ'(q') = ρ(q(q'))·|∂q/∂q'|^{1/2}`, resampled on the same grid.
pub fn transform_half_density(rho: &HalfDensityGrid, tr: &ChartTransform) -> Result<HalfDensityGrid> {
    transform_half_density_onto(rho, tr, rho.spec.clone())
}

/// As [`transform_half_density`], resampling onto `target`. The transform
/// must act axis by axis (`q'ᵏ` depends on `t` and `qᵏ` only) and be
/// monotone over the target nodes.
pub fn transform_half_density_onto(
    rho: &HalfDensityGrid,
    tr: &ChartTransform,
    target: GridSpec,
) -> Result<HalfDensityGrid> {
    let dim = rho.dim();
    if tr.dim() != dim || target.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: tr.dim() });
    }
    let layout = coordinate_layout();
    let mut maps = Vec::with_capacity(dim);
    for (k, g) in tr.inverse().iter().enumerate() {
        if g.depends_on(|s| s != Sym::T && s != Sym::Q(k)) {
            return Err(Error::InvalidArgument(format!(
                "half-density transforms must act axis by axis; q{} mixes coordinates",
                k + 1
            )));
        }
        let axis = target.axes()[k];
        let g_c = Compiled::new(g, &layout)?;
        let dg_c = Compiled::new(&g.diff(Sym::Q(k)), &layout)?;
        let mut src = Vec::with_capacity(axis.nodes);
        let mut weight = Vec::with_capacity(axis.nodes);
        for j in 0..axis.nodes {
            let mut slots = [rho.time, 0.0, 0.0];
            slots[1 + k] = axis.node(j);
            src.push(g_c.eval(&slots)?);
            weight.push(dg_c.eval(&slots)?);
        }
        let increasing = src.windows(2).all(|w| w[1] > w[0]);
        let decreasing = src.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) || weight.contains(&0.0) {
            return Err(Error::NonMonotone);
        }
        maps.push((src, weight));
    }
    let mut values = Vec::with_capacity(target.len());
    for flat in 0..target.len() {
        let idx = target.multi_index(flat);
        let jac: f64 = (0..dim).map(|k| maps[k].1[idx[k]].abs()).product();
        let v = match dim {
            1 => interpolate(&rho.values, &rho.spec.axes()[0], rho.spec.boundary(), maps[0].0[idx[0]]),
            _ => {
                // interpolate along axis 1 on the two bracketing axis-0 lines
                let a0 = rho.spec.axes()[0];
                let a1 = rho.spec.axes()[1];
                let x0 = maps[0].0[idx[0]];
                let x1 = maps[1].0[idx[1]];
                let lines: Vec<Complex64> = (0..a0.nodes)
                    .map(|i| interpolate(&rho.values[i * a1.nodes..(i + 1) * a1.nodes], &a1, rho.spec.boundary(), x1))
                    .collect();
                interpolate(&lines, &a0, rho.spec.boundary(), x0)
            }
        };
        values.push(v * jac.sqrt());
    }
    HalfDensityGrid::new(target, rho.time, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse;

    fn gaussian(spec: GridSpec) -> HalfDensityGrid {
        HalfDensityGrid::from_fn(spec, 0.0, |x| {
            Complex64::new(std::f64::consts::PI.powf(-0.25) * (-x[0] * x[0] / 2.0).exp(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Axis::new(0.0, 1.0, 7).is_err());
        assert!(Axis::new(1.0, 1.0, 8).is_err());
        assert!(GridSpec::uniform(3, 0.0, 1.0, 8, Boundary::Periodic).is_err());
        let spec = GridSpec::uniform(2, 0.0, 1.0, 8, Boundary::Periodic).unwrap();
        assert_eq!(spec.len(), 64);
        assert_eq!(spec.stride(0), 8);
        assert_eq!(spec.coords(9), [0.125, 0.125]);
        assert_eq!(spec.neighbour(0, 0, -1), Some(56));
        let d = GridSpec::uniform(1, 0.0, 1.0, 8, Boundary::Dirichlet).unwrap();
        assert_eq!(d.neighbour(0, 0, -1), None);
    }

    #[test]
    fn norms_and_products() {
        let rho = gaussian(GridSpec::uniform(1, -10.0, 10.0, 512, Boundary::Periodic).unwrap());
        assert!((norm(&rho) - 1.0).abs() < 1e-6);
        let ip = inner_product(&rho, &rho).unwrap();
        assert_eq!(ip.im, 0.0);
        assert!(ip.re >= 0.0);
        let other = gaussian(GridSpec::uniform(1, -10.0, 10.0, 256, Boundary::Periodic).unwrap());
        assert!(matches!(inner_product(&rho, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn identity_transform_is_exact() {
        let rho = gaussian(GridSpec::uniform(1, -10.0, 10.0, 64, Boundary::Periodic).unwrap());
        let same = transform_half_density(&rho, &ChartTransform::identity(1)).unwrap();
        assert_eq!(same, rho);
    }

    #[test]
    fn dilation_keeps_norm() {
        let rho = gaussian(GridSpec::uniform(1, -10.0, 10.0, 512, Boundary::Periodic).unwrap());
        let tr = ChartTransform::new(vec![parse("2*q1", 1).unwrap()], vec![parse("q1/2", 1).unwrap()]).unwrap();
        let out = transform_half_density(&rho, &tr).unwrap();
        assert!((norm(&out) - norm(&rho)).abs() < 1e-3);
        // ρ'(2.5) = ρ(1.25)/√2
        let j = 256 + 64;
        let want = std::f64::consts::PI.powf(-0.25) * (-1.25f64 * 1.25 / 2.0).exp() / 2f64.sqrt();
        assert!((out.values[j].re - want).abs() < 1e-12);
    }

    #[test]
    fn translation_by_whole_cells() {
        let spec = GridSpec::uniform(1, -10.0, 10.0, 512, Boundary::Periodic).unwrap();
        let mut rho = gaussian(spec);
        rho.time = 1.0;
        let v = 4.0 * 20.0 / 512.0;
        let tr = ChartTransform::new(
            vec![parse(&format!("q1 - {v}*t"), 1).unwrap()],
            vec![parse(&format!("q1 + {v}*t"), 1).unwrap()],
        )
        .unwrap();
        let out = transform_half_density(&rho, &tr).unwrap();
        assert_eq!(norm(&out), norm(&rho));
        assert_eq!(out.values[10], rho.values[14]);
    }

    #[test]
    fn map_through_a_pole_is_rejected() {
        let rho = gaussian(GridSpec::uniform(1, -1.05, 0.95, 16, Boundary::Periodic).unwrap());
        let tr = ChartTransform::new(vec![parse("1/q1", 1).unwrap()], vec![parse("1/q1", 1).unwrap()]).unwrap();
        assert!(matches!(transform_half_density(&rho, &tr), Err(Error::NonMonotone)));
    }

    #[test]
    fn snapshot_csv() {
        let spec = GridSpec::uniform(1, 0.0, 8.0, 8, Boundary::Dirichlet).unwrap();
        let g = HalfDensityGrid::from_fn(spec, 0.5, |x| Complex64::new(x[0], -1.0)).unwrap();
        let csv = g.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "t,x,re_rho,im_rho");
        assert_eq!(csv.lines().nth(2).unwrap(), "5e-1,1e0,1e0,-1e0");
    }
}
