//! Command-line front end: `jetmech <command> --system <file> [flags]`.

mod system;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

pub use system::{QuantumSection, Simulation, SystemFile};

use crate::bundle::{self, ChartTransform, Direction, Frame};
use crate::error::Error;
use crate::hamiltonian::{self, HamiltonianSystem};
use crate::lagrangian::{self, Acceleration, LagrangianSystem, Regularity};
use crate::quantum::{self, AffineObservable, GridOperator, GridSpec, HalfDensityGrid};
use crate::symexpr::{Expr, Point, Sym};
use crate::trajectory::Trajectory;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(
    name = "jetmech",
    version,
    about = "Time-dependent mechanics on jet bundles: derivations, simulation and grid quantization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lagrange operator, Poincaré–Cartan form and Legendre map, or Hamilton equations
    Derive(Options),
    /// Integrate the Lagrange or Hamilton equation and emit a trajectory CSV
    Simulate(SimulateOptions),
    /// Legendre map report and association with a Hamiltonian
    Legendre(Options),
    /// Symmetry check, Noether current and its drift along a run
    Noether(NoetherOptions),
    /// Frame splitting, energy function and inertial forces
    Frame(Options),
    /// Hamilton operator, Dirac check table and Crank–Nicolson evolution
    Quantum(Options),
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// System file (TOML)
    #[arg(long)]
    pub system: PathBuf,
    /// Directory for CSV output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time step, overriding `[simulation] dt`
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Start time, overriding `[simulation] t0`
    #[arg(long, allow_negative_numbers = true)]
    pub t0: Option<f64>,
    /// End time, overriding `[simulation] t1`
    #[arg(long, allow_negative_numbers = true)]
    pub t1: Option<f64>,
    /// Name of a `[frames.<name>]` section
    #[arg(long)]
    pub frame: Option<String>,
    /// Name of a `[transforms.<name>]` section
    #[arg(long)]
    pub transform: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateOptions {
    #[command(flatten)]
    pub common: Options,
    /// Integrate the Lagrange equation
    #[arg(long, conflicts_with = "hamilton")]
    pub lagrange: bool,
    /// Integrate the Hamilton equation (of the associated Hamiltonian when only a Lagrangian is given)
    #[arg(long)]
    pub hamilton: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NoetherOptions {
    #[command(flatten)]
    pub common: Options,
    /// Only check `[symmetries.<name>]`
    #[arg(long)]
    pub symmetry: Option<String>,
}

impl Command {
    pub fn options(&self) -> &Options {
        match self {
            Command::Derive(o) | Command::Legendre(o) | Command::Frame(o) | Command::Quantum(o) => o,
            Command::Simulate(s) => &s.common,
            Command::Noether(n) => &n.common,
        }
    }
}

/// Failure with its process exit code and a one-line message.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERICAL, message: message.into() }
    }

    /// Classifies a library error raised while running `context`.
    pub fn from_error(context: &str, e: Error) -> Self {
        let message = format!("{context}: {e}");
        match e {
            Error::NonFinite { .. }
            | Error::Domain { .. }
            | Error::LinearSolve { .. }
            | Error::SingularHessian { .. } => Self::numerical(message),
            _ => Self::validation(message),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Text for stdout plus named CSV files for the output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub text: String,
    pub files: Vec<(String, String)>,
}

type CliResult<T> = Result<T, CliError>;

fn ctx<T>(context: &str, r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from_error(context, e))
}

/// Parses arguments, runs the command and writes outputs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli.command).and_then(|r| emit(&r, cli.command.options())) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn emit(report: &Report, opts: &Options) -> CliResult<()> {
    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::validation(format!("[out] cannot create {}: {e}", dir.display())))?;
        for (name, body) in &report.files {
            let path = dir.join(name);
            std::fs::write(&path, body)
                .map_err(|e| CliError::validation(format!("[out] cannot write {}: {e}", path.display())))?;
        }
    }
    print!("{}", report.text);
    Ok(())
}

/// Loads the system file and executes the command.
pub fn run(command: &Command) -> CliResult<Report> {
    let opts = command.options();
    let text = std::fs::read_to_string(&opts.system)
        .map_err(|e| CliError::validation(format!("[file] cannot read {}: {e}", opts.system.display())))?;
    let sys = SystemFile::parse(&text)?;
    execute(command, &sys)
}

pub fn execute(command: &Command, sys: &SystemFile) -> CliResult<Report> {
    match command {
        Command::Derive(o) => derive(sys, o),
        Command::Simulate(s) => simulate(sys, s),
        Command::Legendre(_) => legendre(sys),
        Command::Noether(n) => noether(sys, n),
        Command::Frame(o) => frame(sys, o),
        Command::Quantum(o) => quantum_cmd(sys, o),
    }
}

fn require_lagrangian<'a>(sys: &'a SystemFile, command: &str) -> CliResult<&'a LagrangianSystem> {
    sys.lagrangian.as_ref().ok_or_else(|| CliError::validation(format!("[system] {command} needs a lagrangian")))
}

/// The given Hamiltonian, or the one associated with a hyperregular Lagrangian.
fn hamiltonian_of(sys: &SystemFile, command: &str) -> CliResult<HamiltonianSystem> {
    match (&sys.hamiltonian, &sys.lagrangian) {
        (Some(h), _) => Ok(h.clone()),
        (None, Some(l)) => ctx(command, hamiltonian::associated_hamiltonian(l)),
        (None, None) => Err(CliError::validation(format!("[system] {command} needs a lagrangian or a hamiltonian"))),
    }
}

/// The system rewritten in the target chart of `--transform`, if given.
fn rechart(
    sys: &SystemFile,
    opts: &Options,
) -> CliResult<(Option<LagrangianSystem>, Option<HamiltonianSystem>, Option<String>)> {
    let Some(name) = &opts.transform else {
        return Ok((sys.lagrangian.clone(), sys.hamiltonian.clone(), None));
    };
    let tr = sys
        .transforms
        .get(name)
        .ok_or_else(|| CliError::validation(format!("[transforms] no transform named {name}")))?;
    let l = match &sys.lagrangian {
        Some(l) => {
            let e = ctx("transforms", bundle::transform_expression(l.lagrangian(), tr, Direction::Forward))?;
            Some(ctx("transforms", LagrangianSystem::new(sys.dim, e))?)
        }
        None => None,
    };
    let h = match &sys.hamiltonian {
        Some(h) => {
            // H' = H + p'ᵢ ∂_t fⁱ keeps p dq − H dt invariant.
            let mut e = h.hamiltonian().clone();
            for (i, f) in tr.forward().iter().enumerate() {
                e = e + Expr::p(i) * f.diff(Sym::T);
            }
            let e = ctx("transforms", bundle::transform_expression(&e, tr, Direction::Forward))?;
            Some(ctx("transforms", HamiltonianSystem::new(sys.dim, e.simplify()))?)
        }
        None => None,
    };
    Ok((l, h, Some(name.clone())))
}

fn derive(sys: &SystemFile, opts: &Options) -> CliResult<Report> {
    let mut out = String::new();
    let (l, h, chart) = rechart(sys, opts)?;
    if let Some(name) = chart {
        writeln!(out, "chart: target of {name}").unwrap();
    }
    match (&l, &h) {
        (Some(l), None) => {
            writeln!(out, "lagrangian: {}", l.lagrangian()).unwrap();
            writeln!(out, "lagrange operator:").unwrap();
            for (i, e) in lagrangian::lagrange_operator(l).iter().enumerate() {
                writeln!(out, "  E{} = {e}", i + 1).unwrap();
            }
            let pc = lagrangian::poincare_cartan(l);
            writeln!(out, "poincare-cartan form:").unwrap();
            for (i, e) in pc.dq.iter().enumerate() {
                writeln!(out, "  dq{}: {e}", i + 1).unwrap();
            }
            writeln!(out, "  dt: {}", pc.dt).unwrap();
            legendre_lines(&mut out, l);
            match lagrangian::second_order_equation(l) {
                Ok(eq) => match eq.acceleration() {
                    Acceleration::Explicit(rhs) => {
                        writeln!(out, "second-order equation:").unwrap();
                        for (i, x) in rhs.iter().enumerate() {
                            writeln!(out, "  qtt{} = {x}", i + 1).unwrap();
                        }
                    }
                    Acceleration::Implicit { .. } => {
                        writeln!(out, "second-order equation: implicit, solved numerically for qtt").unwrap();
                    }
                },
                Err(e) => writeln!(out, "second-order equation: unavailable ({e})").unwrap(),
            }
        }
        (None, Some(h)) => {
            writeln!(out, "hamiltonian: {}", h.hamiltonian()).unwrap();
            let eqs = hamiltonian::hamilton_equations(h);
            writeln!(out, "hamilton equations:").unwrap();
            for (i, v) in eqs.velocity.iter().enumerate() {
                writeln!(out, "  qt{} = {v}", i + 1).unwrap();
            }
            for (i, f) in eqs.force.iter().enumerate() {
                writeln!(out, "  pt{} = {f}", i + 1).unwrap();
            }
            writeln!(out, "lagrangian of H: {}", hamiltonian::lagrangian_of_h(h)).unwrap();
        }
        _ => {
            return Err(CliError::validation("[system] derive needs exactly one of lagrangian and hamiltonian"));
        }
    }
    Ok(Report { text: out, files: Vec::new() })
}

fn legendre_lines(out: &mut String, l: &LagrangianSystem) -> lagrangian::LegendreReport {
    let r = lagrangian::legendre_map(l);
    let kind = match r.regularity {
        Regularity::Hyperregular => "hyperregular",
        Regularity::NumericInverseOnly => "regular, numeric inverse only",
        Regularity::Degenerate => "degenerate",
    };
    writeln!(out, "legendre map ({kind}, min |det hessian| = {:e}):", r.min_abs_det).unwrap();
    for (i, p) in r.momenta.iter().enumerate() {
        writeln!(out, "  p{} = {p}", i + 1).unwrap();
    }
    if let Some(inv) = &r.inverse {
        for (i, v) in inv.iter().enumerate() {
            writeln!(out, "  qt{} = {v}", i + 1).unwrap();
        }
    }
    r
}

struct Span {
    t0: f64,
    t1: f64,
    dt: f64,
}

fn span(sys: &SystemFile, opts: &Options) -> CliResult<Span> {
    let s = &sys.simulation;
    let t0 = opts.t0.or(s.t0).unwrap_or(0.0);
    let t1 = opts.t1.or(s.t1).ok_or_else(|| CliError::validation("[simulation] t1 is required (or pass --t1)"))?;
    let dt = opts.dt.or(s.dt).unwrap_or(DEFAULT_DT);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::validation(format!("[simulation] dt must be positive, got {dt}")));
    }
    if !(t1 >= t0) {
        return Err(CliError::validation(format!("[simulation] t1 = {t1} precedes t0 = {t0}")));
    }
    Ok(Span { t0, t1, dt })
}

fn initial(name: &str, v: &Option<Vec<f64>>) -> CliResult<Vec<f64>> {
    v.clone().ok_or_else(|| CliError::validation(format!("[simulation] initial {name} is required")))
}

fn jet_ic(sys: &SystemFile, sp: &Span) -> CliResult<Point> {
    let q = initial("q", &sys.simulation.q)?;
    let qt = initial("qt", &sys.simulation.qt)?;
    Ok(Point::new().with(Sym::T, sp.t0).with_components(Sym::Q, &q).with_components(Sym::Qt, &qt))
}

fn phase_ic(sys: &SystemFile, sp: &Span) -> CliResult<Point> {
    let q = initial("q", &sys.simulation.q)?;
    let p = match (&sys.simulation.p, &sys.simulation.qt, &sys.lagrangian) {
        (Some(p), _, _) => p.clone(),
        (None, Some(_), Some(l)) => {
            let jet = jet_ic(sys, sp)?;
            ctx("simulate", l.momenta().iter().map(|pi| pi.evaluate(&jet)).collect())?
        }
        _ => return Err(CliError::validation("[simulation] initial p is required (or qt with a lagrangian)")),
    };
    Ok(Point::new().with(Sym::T, sp.t0).with_components(Sym::Q, &q).with_components(Sym::P, &p))
}

/// Monitors may mix velocities and momenta; the foreign fibre coordinates
/// are pulled back through the Legendre or Hamiltonian map of the run.
fn attach_monitors(tr: &mut Trajectory, monitors: &[(String, Expr)], pullback: &BTreeMap<Sym, Expr>) -> CliResult<()> {
    for (name, e) in monitors {
        let e = e.substitute(pullback).simplify();
        tr.add_monitor(name, &e).map_err(|err| CliError::validation(format!("[monitors] {name}: {err}")))?;
    }
    Ok(())
}

fn simulate(sys: &SystemFile, s: &SimulateOptions) -> CliResult<Report> {
    let sp = span(sys, &s.common)?;
    let use_lagrange = match (s.lagrange, s.hamilton) {
        (true, _) => true,
        (_, true) => false,
        _ => match (&sys.lagrangian, &sys.hamiltonian) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            _ => {
                return Err(CliError::validation(
                    "[system] simulate needs exactly one of lagrangian and hamiltonian, or --lagrange/--hamilton",
                ))
            }
        },
    };
    let (mut tr, pullback) = if use_lagrange {
        let l = require_lagrangian(sys, "simulate --lagrange")?;
        let tr = ctx("simulate", lagrangian::integrate_lagrange(l, &jet_ic(sys, &sp)?, sp.t1, sp.dt))?;
        (tr, l.momenta().into_iter().enumerate().map(|(i, p)| (Sym::P(i), p)).collect())
    } else {
        let h = hamiltonian_of(sys, "simulate")?;
        let tr = ctx("simulate", hamiltonian::integrate_hamilton(&h, &phase_ic(sys, &sp)?, sp.t1, sp.dt))?;
        (tr, hamiltonian::hamiltonian_map(&h).into_iter().enumerate().map(|(i, v)| (Sym::Qt(i), v)).collect())
    };
    attach_monitors(&mut tr, &sys.monitors, &pullback)?;
    let csv = tr.to_csv();
    let mut text = String::new();
    match &s.common.out {
        Some(_) => {
            writeln!(text, "steps: {}; dt: {:e}; t1: {:e}", tr.len() - 1, tr.dt, sp.t1).unwrap();
            for (name, _) in &tr.monitors {
                writeln!(text, "monitor {name}: max drift {:e}", tr.drift(name).unwrap_or(0.0)).unwrap();
            }
        }
        None => text.push_str(&csv),
    }
    Ok(Report { text, files: vec![("trajectory.csv".into(), csv)] })
}

fn legendre(sys: &SystemFile) -> CliResult<Report> {
    let l = require_lagrangian(sys, "legendre")?;
    let mut out = String::new();
    let r = legendre_lines(&mut out, l);
    if !r.is_hyperregular() {
        return Err(CliError::validation(format!(
            "legendre: the Lagrangian is not hyperregular with a closed-form inverse (min |det hessian| = {:e})",
            r.min_abs_det
        )));
    }
    let h = ctx("legendre", hamiltonian::associated_hamiltonian(l))?;
    let (a, b) = ctx("legendre", hamiltonian::association_residuals(l, &h))?;
    writeln!(out, "associated hamiltonian: {}", h.hamiltonian()).unwrap();
    writeln!(out, "association residuals: L∘H∘L = L: {a:e}; H*L_H = H*L: {b:e}").unwrap();
    if let Some(given) = &sys.hamiltonian {
        let (a, b) = ctx("legendre", hamiltonian::association_residuals(l, given))?;
        let ok = a.max(b) <= hamiltonian::CHECK_TOL;
        writeln!(
            out,
            "given hamiltonian: {}; residuals {a:e}, {b:e}",
            if ok { "associated" } else { "not associated" }
        )
        .unwrap();
    }
    Ok(Report { text: out, files: Vec::new() })
}

fn noether(sys: &SystemFile, n: &NoetherOptions) -> CliResult<Report> {
    let l = require_lagrangian(sys, "noether")?;
    let chosen: Vec<(&String, &bundle::VectorField)> = match &n.symmetry {
        Some(name) => vec![sys
            .symmetries
            .get_key_value(name)
            .ok_or_else(|| CliError::validation(format!("[symmetries] no symmetry named {name}")))?],
        None => sys.symmetries.iter().collect(),
    };
    if chosen.is_empty() {
        return Err(CliError::validation("[symmetries] noether needs at least one [symmetries.<name>] section"));
    }
    let run =
        sys.simulation.q.is_some() && sys.simulation.qt.is_some() && (n.common.t1.or(sys.simulation.t1)).is_some();
    let mut tr = if run {
        let sp = span(sys, &n.common)?;
        Some(ctx("noether", lagrangian::integrate_lagrange(l, &jet_ic(sys, &sp)?, sp.t1, sp.dt))?)
    } else {
        None
    };
    let mut out = String::new();
    for (name, u) in chosen {
        let r = ctx("noether", lagrangian::noether_current(u, l))?;
        write!(
            out,
            "{name}: symmetry: {}; max |lie derivative|: {:e}; current: {}",
            if r.symmetric { "yes" } else { "no" },
            r.max_violation,
            r.current
        )
        .unwrap();
        if let Some(tr) = tr.as_mut() {
            tr.add_monitor(name, &r.current).map_err(|e| CliError::from_error("noether", e))?;
            write!(out, "; max drift: {:e}", tr.drift(name).unwrap_or(0.0)).unwrap();
        }
        out.push('\n');
    }
    let files = tr.map(|t| vec![("noether.csv".to_string(), t.to_csv())]).unwrap_or_default();
    Ok(Report { text: out, files })
}

type NamedTransform = (String, ChartTransform);

fn pick_frame(sys: &SystemFile, opts: &Options) -> CliResult<(String, Frame, Option<NamedTransform>)> {
    let transform = match &opts.transform {
        Some(name) => Some((
            name.clone(),
            sys.transforms
                .get(name)
                .cloned()
                .ok_or_else(|| CliError::validation(format!("[transforms] no transform named {name}")))?,
        )),
        None => None,
    };
    let frame = match (&opts.frame, &transform) {
        (Some(name), _) => (
            name.clone(),
            sys.frames
                .get(name)
                .cloned()
                .ok_or_else(|| CliError::validation(format!("[frames] no frame named {name}")))?,
        ),
        (None, Some((name, tr))) => (format!("adapted to {name}"), bundle::frame_of_chart(tr)),
        (None, None) if sys.frames.len() == 1 => {
            let (k, f) = sys.frames.iter().next().expect("one frame");
            (k.clone(), f.clone())
        }
        _ => return Err(CliError::validation("[frames] pass --frame <name> or --transform <name>")),
    };
    Ok((frame.0, frame.1, transform))
}

fn frame(sys: &SystemFile, opts: &Options) -> CliResult<Report> {
    let (name, f, transform) = pick_frame(sys, opts)?;
    let mut out = String::new();
    writeln!(out, "frame {name}:").unwrap();
    for (i, g) in f.components().iter().enumerate() {
        writeln!(out, "  Gamma{} = {g}", i + 1).unwrap();
    }
    if let Some(l) = &sys.lagrangian {
        writeln!(out, "energy function: {}", ctx("frame", lagrangian::energy_function(&f, l))?).unwrap();
        if let Ok(eq) = lagrangian::second_order_equation(l) {
            if let Ok(a) = lagrangian::relative_acceleration(&eq, &f) {
                writeln!(out, "relative acceleration:").unwrap();
                for (i, x) in a.iter().enumerate() {
                    writeln!(out, "  a{} = {x}", i + 1).unwrap();
                }
            }
        }
    }
    let h = match (&sys.hamiltonian, &sys.lagrangian) {
        (Some(h), _) => Some(h.clone()),
        (None, Some(l)) => hamiltonian::associated_hamiltonian(l).ok(),
        _ => None,
    };
    if let Some(h) = h {
        let split = ctx("frame", hamiltonian::frame_split(&h, &f))?;
        writeln!(out, "hamiltonian split: H_Gamma = {}; E_Gamma = {}", split.frame_part, split.energy).unwrap();
    }
    if let Some((tname, tr)) = transform {
        let xi = ctx("frame", lagrangian::free_motion_transform(&tr))?;
        writeln!(out, "free motion of the {tname} target chart, as inertial forces in the working chart:").unwrap();
        for (i, x) in xi.rhs().expect("free motion is explicit").iter().enumerate() {
            writeln!(out, "  qtt{} = {x}", i + 1).unwrap();
        }
    }
    Ok(Report { text: out, files: Vec::new() })
}

fn observable_operator(dim: usize, name: &str, e: &Expr) -> CliResult<GridOperator> {
    let h = HamiltonianSystem::new(dim, e.clone())
        .map_err(|err| CliError::validation(format!("[quantum] observables.{name}: {err}")))?;
    quantum::quantize_quadratic(&h).map_err(|err| CliError::validation(format!("[quantum] observables.{name}: {err}")))
}

/// Relative defect of Dirac's condition on interior nodes.
fn dirac_error(
    f: &AffineObservable,
    g: &AffineObservable,
    q: &QuantumSection,
    nodes: usize,
    t: f64,
) -> crate::Result<f64> {
    let axes =
        q.grid.axes().iter().map(|a| quantum::Axis::new(a.min, a.max, nodes)).collect::<crate::Result<Vec<_>>>()?;
    let spec = GridSpec::new(axes, q.grid.boundary())?;
    let rho = HalfDensityGrid::from_exprs(spec.clone(), t, &q.initial_re, &q.initial_im)?;
    let d = quantum::dirac_defect(f, g, &rho)?;
    let interior = |j: usize| {
        let idx = spec.multi_index(j);
        (0..spec.dim()).all(|k| idx[k] >= 2 && idx[k] + 2 < nodes)
    };
    let (mut num, mut den) = (0.0, 0.0);
    for j in (0..spec.len()).filter(|j| interior(*j)) {
        num += d.values[j].norm_sqr();
        den += rho.values[j].norm_sqr();
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

fn quantum_cmd(sys: &SystemFile, opts: &Options) -> CliResult<Report> {
    let q = sys.quantum.as_ref().ok_or_else(|| CliError::validation("[quantum] section is required"))?;
    let h = hamiltonian_of(sys, "quantum")?;
    let frame = match (&opts.frame, &opts.transform) {
        (None, None) => None,
        _ => Some(pick_frame(sys, opts)?),
    };
    let ops = ctx("quantum", quantum::hamilton_operator(&h, frame.as_ref().map(|f| &f.1)))?;
    let t0 = opts.t0.or(sys.simulation.t0).unwrap_or(0.0);
    let mut out = String::new();
    let m = ctx("quantum", ops.hamiltonian.assemble(&q.grid, t0))?;
    writeln!(
        out,
        "hamilton operator: {} terms; time-dependent: {}; hermitian defect at t0: {:e}",
        ops.hamiltonian.terms().len(),
        if ops.hamiltonian.is_time_dependent() { "yes" } else { "no" },
        m.hermitian_defect()
    )
    .unwrap();
    if let Some((name, _, _)) = &frame {
        writeln!(
            out,
            "frame {name}: split into {} frame terms and {} energy terms",
            ops.frame_part.terms().len(),
            ops.energy.terms().len()
        )
        .unwrap();
    }

    let pairs: Vec<(Expr, Expr)> =
        if q.dirac.is_empty() { (0..sys.dim).map(|k| (Expr::q(k), Expr::p(k))).collect() } else { q.dirac.clone() };
    let nodes = q.grid.axes()[0].nodes;
    writeln!(out, "dirac check (relative interior defect):").unwrap();
    for (fe, ge) in &pairs {
        let affine = |e: &Expr| {
            AffineObservable::from_expr(e, sys.dim)
                .map_err(|err| CliError::validation(format!("[quantum] dirac: {err}")))
        };
        let (f, g) = (affine(fe)?, affine(ge)?);
        let fine = ctx("quantum", dirac_error(&f, &g, q, nodes, t0))?;
        if nodes / 2 >= quantum::MIN_NODES {
            let coarse = ctx("quantum", dirac_error(&f, &g, q, nodes / 2, t0))?;
            let order = if fine > 0.0 && coarse > 0.0 { (coarse / fine).log2() } else { f64::NAN };
            writeln!(out, "  {{{fe}, {ge}}}: N={}: {coarse:e}; N={nodes}: {fine:e}; order {order:.3}", nodes / 2)
                .unwrap();
        } else {
            writeln!(out, "  {{{fe}, {ge}}}: N={nodes}: {fine:e}").unwrap();
        }
    }

    let mut files = Vec::new();
    let t1 = opts.t1.or(sys.simulation.t1);
    if let Some(t1) = t1 {
        let sp = span(sys, opts)?;
        let rho0 = ctx("quantum", HalfDensityGrid::from_exprs(q.grid.clone(), sp.t0, &q.initial_re, &q.initial_im))?;
        let mut observables: Vec<(String, GridOperator)> = q
            .observables
            .iter()
            .map(|(n, e)| Ok((n.clone(), observable_operator(sys.dim, n, e)?)))
            .collect::<CliResult<_>>()?;
        if let Some((name, _, _)) = &frame {
            observables.push((format!("energy_{}", name.replace(' ', "_")), ops.energy.clone()));
        }
        let history = ctx("quantum", quantum::evolve(&rho0, &ops.hamiltonian, t1, sp.dt, q.record_every))?;
        let n0 = quantum::norm(&rho0);
        let drift = history.iter().fold(0.0f64, |m, g| m.max((quantum::norm(g) - n0).abs()));
        writeln!(out, "evolution: {} snapshots to t = {t1:e}; max norm drift {drift:e}", history.len()).unwrap();

        let mut snap = format!("{}\n", rho0.snapshot_header());
        let mut obs = String::from("t,norm");
        for (name, _) in &observables {
            write!(obs, ",re_{name},im_{name}").unwrap();
        }
        obs.push('\n');
        for g in &history {
            g.snapshot_rows(&mut snap);
            write!(obs, "{:e},{:e}", g.time, quantum::norm(g)).unwrap();
            for (_, op) in &observables {
                let v: Complex64 = ctx("quantum", quantum::expectation(op, g))?;
                write!(obs, ",{:e},{:e}", v.re, v.im).unwrap();
            }
            obs.push('\n');
        }
        files.push(("snapshots.csv".to_string(), snap));
        files.push(("observables.csv".to_string(), obs));
    }
    Ok(Report { text: out, files })
}
