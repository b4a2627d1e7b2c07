//! The TOML system file.
//!
//! ```toml
//! [system]
//! dimension = 1
//! lagrangian = "qt1^2/2 - q1^2/2"
//!
//! [simulation]
//! t0 = 0.0
//! t1 = 1.0
//! dt = 1e-3
//! q = [1.0]
//! qt = [0.0]
//!
//! [monitors]
//! energy = "qt1^2/2 + q1^2/2"
//! ```
//!
//! Optional sections: `[frames.<name>]` with `components`,
//! `[transforms.<name>]` with `forward` and `inverse`, `[symmetries.<name>]`
//! with `time` and `components`, and `[quantum]`.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::CliError;
use crate::bundle::{ChartTransform, Frame, VectorField};
use crate::hamiltonian::HamiltonianSystem;
use crate::lagrangian::LagrangianSystem;
use crate::quantum::{Axis, Boundary, GridSpec};
use crate::symexpr::{self, Expr};

const SECTIONS: &[&str] = &["system", "simulation", "monitors", "frames", "transforms", "symmetries", "quantum"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    dimension: i64,
    lagrangian: Option<String>,
    hamiltonian: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    t0: Option<f64>,
    t1: Option<f64>,
    dt: Option<f64>,
    q: Option<Vec<f64>>,
    qt: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    components: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransform {
    forward: Vec<String>,
    inverse: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSymmetry {
    #[serde(default)]
    time: i64,
    components: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantum {
    extent: Vec<f64>,
    nodes: i64,
    #[serde(default = "periodic")]
    boundary: String,
    initial_re: String,
    #[serde(default = "zero_string")]
    initial_im: String,
    #[serde(default)]
    record_every: Option<i64>,
    #[serde(default)]
    observables: BTreeMap<String, String>,
    #[serde(default)]
    dirac: Vec<[String; 2]>,
}

fn periodic() -> String {
    "periodic".into()
}

fn zero_string() -> String {
    "0".into()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Simulation {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub dt: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub qt: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSection {
    pub grid: GridSpec,
    pub initial_re: Expr,
    pub initial_im: Expr,
    pub record_every: usize,
    pub observables: Vec<(String, Expr)>,
    pub dirac: Vec<(Expr, Expr)>,
}

/// A validated system file.
#[derive(Debug, Clone)]
pub struct SystemFile {
    pub dim: usize,
    pub lagrangian: Option<LagrangianSystem>,
    pub hamiltonian: Option<HamiltonianSystem>,
    pub simulation: Simulation,
    pub monitors: Vec<(String, Expr)>,
    pub frames: BTreeMap<String, Frame>,
    pub transforms: BTreeMap<String, ChartTransform>,
    pub symmetries: BTreeMap<String, VectorField>,
    pub quantum: Option<QuantumSection>,
}

fn invalid(section: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("[{section}] {msg}"))
}

fn one_line(msg: impl std::fmt::Display) -> String {
    msg.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn section<T: DeserializeOwned>(name: &str, value: toml::Value) -> Result<T, CliError> {
    T::deserialize(value).map_err(|e| invalid(name, one_line(e.message())))
}

fn expr(section_name: &str, what: &str, src: &str, dim: usize) -> Result<Expr, CliError> {
    symexpr::parse(src, dim).map_err(|e| invalid(section_name, format!("{what}: {e}")))
}

fn exprs(section_name: &str, what: &str, srcs: &[String], dim: usize) -> Result<Vec<Expr>, CliError> {
    if srcs.len() != dim {
        return Err(invalid(section_name, format!("{what} has {} entries, dimension is {dim}", srcs.len())));
    }
    srcs.iter().enumerate().map(|(i, s)| expr(section_name, &format!("{what}[{}]", i + 1), s, dim)).collect()
}

fn named<T: DeserializeOwned>(name: &str, value: Option<toml::Value>) -> Result<BTreeMap<String, T>, CliError> {
    let Some(value) = value else { return Ok(BTreeMap::new()) };
    let table = match value {
        toml::Value::Table(t) => t,
        _ => return Err(invalid(name, "expected a table of named entries")),
    };
    table.into_iter().map(|(k, v)| Ok((k.clone(), section(&format!("{name}.{k}"), v)?))).collect()
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| invalid("file", one_line(e.message())))?;
        if let Some(unknown) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(invalid(unknown, "unknown section"));
        }
        let raw: RawSystem =
            section("system", table.remove("system").ok_or_else(|| invalid("system", "missing section"))?)?;
        if !(1..=16).contains(&raw.dimension) {
            return Err(invalid("system", format!("dimension must be between 1 and 16, got {}", raw.dimension)));
        }
        let dim = raw.dimension as usize;
        let lagrangian = raw
            .lagrangian
            .as_deref()
            .map(|s| {
                LagrangianSystem::new(dim, expr("system", "lagrangian", s, dim)?).map_err(|e| invalid("system", e))
            })
            .transpose()?;
        let hamiltonian = raw
            .hamiltonian
            .as_deref()
            .map(|s| {
                HamiltonianSystem::new(dim, expr("system", "hamiltonian", s, dim)?).map_err(|e| invalid("system", e))
            })
            .transpose()?;

        let simulation = match table.remove("simulation") {
            Some(v) => {
                let r: RawSimulation = section("simulation", v)?;
                for (name, v) in [("q", &r.q), ("qt", &r.qt), ("p", &r.p)] {
                    if let Some(v) = v {
                        if v.len() != dim {
                            return Err(invalid(
                                "simulation",
                                format!("{name} has {} entries, dimension is {dim}", v.len()),
                            ));
                        }
                    }
                }
                for (name, v) in [("t0", r.t0), ("t1", r.t1), ("dt", r.dt)] {
                    if v.is_some_and(|x| !x.is_finite()) {
                        return Err(invalid("simulation", format!("{name} is not finite")));
                    }
                }
                if r.dt.is_some_and(|d| d <= 0.0) {
                    return Err(invalid("simulation", "dt must be positive"));
                }
                Simulation { t0: r.t0, t1: r.t1, dt: r.dt, q: r.q, qt: r.qt, p: r.p }
            }
            None => Simulation::default(),
        };

        let monitors = match table.remove("monitors") {
            Some(v) => {
                let m: BTreeMap<String, String> = section("monitors", v)?;
                m.iter()
                    .map(|(k, s)| Ok((k.clone(), expr("monitors", k, s, dim)?)))
                    .collect::<Result<Vec<_>, CliError>>()?
            }
            None => Vec::new(),
        };

        let frames = named::<RawFrame>("frames", table.remove("frames"))?
            .into_iter()
            .map(|(k, f)| {
                let s = format!("frames.{k}");
                let comps = exprs(&s, "components", &f.components, dim)?;
                Ok((k, Frame::new(comps).map_err(|e| invalid(&s, e))?))
            })
            .collect::<Result<BTreeMap<_, _>, CliError>>()?;

        let transforms = named::<RawTransform>("transforms", table.remove("transforms"))?
            .into_iter()
            .map(|(k, t)| {
                let s = format!("transforms.{k}");
                let fwd = exprs(&s, "forward", &t.forward, dim)?;
                let inv = exprs(&s, "inverse", &t.inverse, dim)?;
                Ok((k, ChartTransform::new(fwd, inv).map_err(|e| invalid(&s, e))?))
            })
            .collect::<Result<BTreeMap<_, _>, CliError>>()?;

        let symmetries = named::<RawSymmetry>("symmetries", table.remove("symmetries"))?
            .into_iter()
            .map(|(k, u)| {
                let s = format!("symmetries.{k}");
                let comps = exprs(&s, "components", &u.components, dim)?;
                Ok((k, VectorField::new(u.time, comps).map_err(|e| invalid(&s, e))?))
            })
            .collect::<Result<BTreeMap<_, _>, CliError>>()?;

        let quantum = table.remove("quantum").map(|v| Self::quantum(v, dim)).transpose()?;

        Ok(SystemFile { dim, lagrangian, hamiltonian, simulation, monitors, frames, transforms, symmetries, quantum })
    }

    fn quantum(v: toml::Value, dim: usize) -> Result<QuantumSection, CliError> {
        let q: RawQuantum = section("quantum", v)?;
        let bad = |m: String| invalid("quantum", m);
        if dim > crate::quantum::MAX_DIM {
            return Err(bad(format!("grids support dimension at most {}, system has {dim}", crate::quantum::MAX_DIM)));
        }
        if q.extent.len() != 2 && q.extent.len() != 2 * dim {
            return Err(bad(format!("extent needs 2 or {} numbers, got {}", 2 * dim, q.extent.len())));
        }
        if q.nodes < crate::quantum::MIN_NODES as i64 {
            return Err(bad(format!("nodes must be at least {}, got {}", crate::quantum::MIN_NODES, q.nodes)));
        }
        let boundary = match q.boundary.as_str() {
            "periodic" => Boundary::Periodic,
            "dirichlet" => Boundary::Dirichlet,
            other => return Err(bad(format!("boundary must be \"periodic\" or \"dirichlet\", got \"{other}\""))),
        };
        let axes = (0..dim)
            .map(|k| {
                let (lo, hi) = if q.extent.len() == 2 {
                    (q.extent[0], q.extent[1])
                } else {
                    (q.extent[2 * k], q.extent[2 * k + 1])
                };
                Axis::new(lo, hi, q.nodes as usize).map_err(|e| bad(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let grid = GridSpec::new(axes, boundary).map_err(|e| bad(e.to_string()))?;
        let coordinate = |what: &str, src: &str| -> Result<Expr, CliError> {
            let e = expr("quantum", what, src, dim)?;
            symexpr::reject(&e, "an initial half-density", |s| !matches!(s, symexpr::Sym::T | symexpr::Sym::Q(_)))
                .map_err(|e| bad(format!("{what}: {e}")))?;
            Ok(e)
        };
        let record_every = match q.record_every {
            None => 0,
            Some(n) if n >= 0 => n as usize,
            Some(n) => return Err(bad(format!("record_every must be non-negative, got {n}"))),
        };
        let observables = q
            .observables
            .iter()
            .map(|(k, s)| Ok((k.clone(), expr("quantum", &format!("observables.{k}"), s, dim)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let dirac = q
            .dirac
            .iter()
            .map(|[f, g]| Ok((expr("quantum", "dirac", f, dim)?, expr("quantum", "dirac", g, dim)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(QuantumSection {
            grid,
            initial_re: coordinate("initial_re", &q.initial_re)?,
            initial_im: coordinate("initial_im", &q.initial_im)?,
            record_every,
            observables,
            dirac,
        })
    }
}
