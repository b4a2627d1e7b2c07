//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use jetmech::bundle::{ChartTransform, Frame, VectorField};
use jetmech::hamiltonian::{self, HamiltonianSystem};
use jetmech::lagrangian::{self, LagrangianSystem};
use jetmech::quantum::{
    self, inner_product, norm, AffineObservable, Boundary, CrankNicolson, GridOperator, GridSpec, HalfDensityGrid,
};
use jetmech::symexpr::{parse, Expr, Point, Sym};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("Lagrange/Hamilton equivalence", lagrange_hamilton),
        ("Noether suite", noether),
        ("inertial forces", inertial_forces),
        ("bracket axioms", bracket_axioms),
        ("Dirac condition", dirac),
        ("unitarity and stationarity", unitarity),
        ("frame-split identities", frame_split),
        ("RK4 convergence order", rk4_order),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let r = check();
        if !r.pass {
            failed += 1;
        }
        println!("criterion {} ({name}): {}: {}", k + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn simulate(system: &Path, flag: &str, out: &Path) -> Vec<Vec<f64>> {
    let run = Command::new(env!("CARGO_BIN_EXE_jetmech"))
        .args(["simulate", flag, "--system", system.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(run.status.success(), "simulate {flag} on {}", system.display());
    read_csv(&out.join("trajectory.csv"))
}

fn lagrange_hamilton() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (name, src) in [("oscillator.toml", "qt1^2/2 - q1^2/2"), ("exp_kinetic.toml", "exp(t)*qt1^2/2")] {
        let l = LagrangianSystem::parse(1, src).unwrap();
        let momentum = &l.momenta()[0];
        let dir = tempfile::tempdir().unwrap();
        let (la, ha) = (dir.path().join("l"), dir.path().join("h"));
        std::fs::create_dir_all(&la).unwrap();
        std::fs::create_dir_all(&ha).unwrap();
        let lag = simulate(&fixture(name), "--lagrange", &la);
        let ham = simulate(&fixture(name), "--hamilton", &ha);
        if lag.len() != ham.len() || (lag.last().unwrap()[0] - 2.0 * PI).abs() > 1e-12 {
            return outcome(false, format!("{name}: sample grids differ"));
        }
        for (a, b) in lag.iter().zip(&ham) {
            let pt = Point::new().with(Sym::T, a[0]).with(Sym::Q(0), a[1]).with(Sym::Qt(0), a[2]);
            let p = momentum.evaluate(&pt).unwrap();
            worst = worst.max((a[1] - b[1]).abs()).max((p - b[2]).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-6 && secs < 5.0, format!("max gap {worst:.3e} (<= 1e-6), runtime {secs:.2} s (< 5 s)"))
}

fn noether() -> Outcome {
    let e = |s: &str| parse(s, 1).unwrap();
    let ic = |q: f64, v: f64| Point::new().with(Sym::T, 0.0).with(Sym::Q(0), q).with(Sym::Qt(0), v);

    let free = LagrangianSystem::parse(1, "qt1^2/2").unwrap();
    let shift = VectorField::new(0, vec![e("1")]).unwrap();
    let report = lagrangian::noether_current(&shift, &free).unwrap();
    let mut run = lagrangian::integrate_lagrange(&free, &ic(0.2, 0.7), 1.0, 1e-3).unwrap();
    run.add_monitor("momentum", &report.current).unwrap();
    let momentum = run.drift("momentum").unwrap();

    let osc = LagrangianSystem::parse(1, "qt1^2/2 - q1^2/2").unwrap();
    let energy = lagrangian::energy_function(&Frame::rest(1), &osc).unwrap();
    let time = VectorField::new(1, vec![e("0")]).unwrap();
    let time_report = lagrangian::noether_current(&time, &osc).unwrap();
    let mut run = lagrangian::integrate_lagrange(&osc, &ic(1.0, 0.3), 1.0, 1e-3).unwrap();
    run.add_monitor("energy", &energy).unwrap();
    let energy_drift = run.drift("energy").unwrap();

    let broken = lagrangian::noether_current(&shift, &osc).unwrap();
    run.add_monitor("broken", &broken.current).unwrap();
    let broken_drift = run.drift("broken").unwrap();

    let pass = report.symmetric
        && time_report.symmetric
        && !broken.symmetric
        && momentum <= 1e-6
        && energy_drift <= 1e-6
        && broken_drift > 1e-2;
    outcome(
        pass,
        format!(
            "momentum drift {momentum:.3e}, energy drift {energy_drift:.3e} (<= 1e-6); broken shift drift {broken_drift:.3e} (> 1e-2), flagged {}",
            !broken.symmetric
        ),
    )
}

fn inertial_forces() -> Outcome {
    let w = 0.7;
    let e = |s: &str| parse(s, 2).unwrap();
    let tr = ChartTransform::new(
        vec![e("q1*cos(0.7*t) - q2*sin(0.7*t)"), e("q1*sin(0.7*t) + q2*cos(0.7*t)")],
        vec![e("q1*cos(0.7*t) + q2*sin(0.7*t)"), e("-q1*sin(0.7*t) + q2*cos(0.7*t)")],
    )
    .unwrap();
    let eq = lagrangian::free_motion_transform(&tr).unwrap();
    let rhs = eq.rhs().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rhs_gap: f64 = 0.0;
    for _ in 0..100 {
        let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let pt = Point::new().with(Sym::T, v[0]).with_components(Sym::Q, &v[1..3]).with_components(Sym::Qt, &v[3..5]);
        let want = [2.0 * w * v[4] + w * w * v[1], -2.0 * w * v[3] + w * w * v[2]];
        for i in 0..2 {
            rhs_gap = rhs_gap.max((rhs[i].evaluate(&pt).unwrap() - want[i]).abs());
        }
    }

    // q̄(t) = (1 + t, 0.5 − 2t) read in the rotating chart
    let line = [e("1 + t"), e("0.5 - 2*t")];
    let bindings = [(Sym::Q(0), line[0].clone()), (Sym::Q(1), line[1].clone())].into_iter().collect();
    let path: Vec<Expr> = tr.inverse().iter().map(|g| g.substitute(&bindings)).collect();
    let vel: Vec<Expr> = path.iter().map(|x| x.diff(Sym::T)).collect();
    let acc: Vec<Expr> = vel.iter().map(|x| x.diff(Sym::T)).collect();
    let mut residual: f64 = 0.0;
    for k in 0..100 {
        let t = -5.0 + 0.1 * k as f64;
        let at = Point::new().with(Sym::T, t);
        let q: Vec<f64> = path.iter().map(|x| x.evaluate(&at).unwrap()).collect();
        let qt: Vec<f64> = vel.iter().map(|x| x.evaluate(&at).unwrap()).collect();
        let pt = at.clone().with_components(Sym::Q, &q).with_components(Sym::Qt, &qt);
        for i in 0..2 {
            residual = residual.max((acc[i].evaluate(&at).unwrap() - rhs[i].evaluate(&pt).unwrap()).abs());
        }
    }
    outcome(
        rhs_gap <= 1e-9 && residual <= 1e-9,
        format!("RHS gap {rhs_gap:.3e} at 100 points, straight-line residual {residual:.3e} (<= 1e-9)"),
    )
}

fn random_polynomial(rng: &mut ChaCha8Rng) -> Expr {
    let syms = [Expr::t(), Expr::q(0), Expr::q(1), Expr::p(0), Expr::p(1)];
    Expr::sum((0..rng.gen_range(1..5)).map(|_| {
        let c = Expr::int(rng.gen_range(-3..=3));
        let powers = syms.iter().map(|s| s.pow_int(rng.gen_range(0..=2)));
        Expr::product(std::iter::once(c).chain(powers))
    }))
}

fn random_phase_point(rng: &mut ChaCha8Rng) -> Point {
    [Sym::T, Sym::Q(0), Sym::Q(1), Sym::P(0), Sym::P(1), Sym::P0]
        .into_iter()
        .map(|s| (s, rng.gen_range(-1.0..1.0)))
        .collect()
}

fn bracket_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pb = |f: &Expr, g: &Expr| hamiltonian::poisson_bracket(f, g).unwrap();
    let (mut antisymmetric, mut jacobi, mut zeta) = (true, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let (f, g, h) = (random_polynomial(&mut rng), random_polynomial(&mut rng), random_polynomial(&mut rng));
        antisymmetric &= pb(&f, &g) == -pb(&g, &f);
        let cyclic = pb(&f, &pb(&g, &h)) + pb(&g, &pb(&h, &f)) + pb(&h, &pb(&f, &g));
        let lifted =
            hamiltonian::homogeneous_bracket(&hamiltonian::lift(&f).unwrap(), &hamiltonian::lift(&g).unwrap()).unwrap();
        for _ in 0..5 {
            let pt = random_phase_point(&mut rng);
            jacobi = jacobi.max(cyclic.evaluate(&pt).unwrap().abs());
            zeta = zeta.max((lifted.evaluate(&pt).unwrap() - pb(&f, &g).evaluate(&pt).unwrap()).abs());
        }
    }
    outcome(
        antisymmetric && jacobi <= 1e-9 && zeta <= 1e-12,
        format!("antisymmetry exact: {antisymmetric}; Jacobi {jacobi:.3e} (<= 1e-9); zeta-compatibility {zeta:.3e} (<= 1e-12)"),
    )
}

/// Relative defect of Dirac's condition on interior nodes.
fn dirac_error(f: &AffineObservable, g: &AffineObservable, nodes: usize) -> f64 {
    let spec = GridSpec::uniform(1, -8.0, 8.0, nodes, Boundary::Periodic).unwrap();
    let rho = gaussian(spec, 0.3, 0.5, 1.0);
    let d = quantum::dirac_defect(f, g, &rho).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 2..nodes - 2 {
        num += d.values[j].norm_sqr();
        den += rho.values[j].norm_sqr();
    }
    (num / den).sqrt()
}

fn dirac() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coefficient =
        |rng: &mut ChaCha8Rng| Expr::sum((0..=2).map(|k| Expr::int(rng.gen_range(-2..=2)) * Expr::q(0).pow_int(k)));
    let mut orders = Vec::new();
    let mut pairs = 0;
    while pairs < 5 {
        let f = AffineObservable::new(vec![coefficient(&mut rng)], coefficient(&mut rng)).unwrap();
        let g = AffineObservable::new(vec![coefficient(&mut rng)], coefficient(&mut rng)).unwrap();
        let errs: Vec<f64> = [128, 256, 512].iter().map(|&n| dirac_error(&f, &g, n)).collect();
        if errs[0] < 1e-12 {
            continue;
        }
        pairs += 1;
        orders.push((errs[0] / errs[1]).log2());
        orders.push((errs[1] / errs[2]).log2());
    }

    // (q, p): ([q̂, p̂] − i)ρ equals −i times the averaging stencil defect
    let spec = GridSpec::uniform(1, -8.0, 8.0, 256, Boundary::Periodic).unwrap();
    let rho = gaussian(spec, 0.0, 1.0, 0.0);
    let q = AffineObservable::new(vec![Expr::zero()], Expr::q(0)).unwrap();
    let p = AffineObservable::new(vec![Expr::one()], Expr::zero()).unwrap();
    let d = quantum::dirac_defect(&q, &p, &rho).unwrap();
    let n = rho.values.len();
    let mut stencil_gap: f64 = 0.0;
    for j in 1..n - 1 {
        let avg = (rho.values[j + 1] + rho.values[j - 1]) / 2.0;
        let want = Complex64::new(0.0, -1.0) * (avg - rho.values[j]);
        stencil_gap = stencil_gap.max((d.values[j] - want).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    let lo = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        lo >= 1.9 && hi <= 2.1 && stencil_gap <= 1e-14 && secs < 10.0,
        format!(
            "orders over N = 128, 256, 512 in [{lo:.3}, {hi:.3}] for 5 pairs; (q,p) stencil gap {stencil_gap:.1e}; runtime {secs:.2} s (< 10 s)"
        ),
    )
}

fn gaussian(spec: GridSpec, centre: f64, width: f64, k: f64) -> HalfDensityGrid {
    HalfDensityGrid::from_fn(spec, 0.0, |x| {
        let amp = (PI * width * width).powf(-0.25) * (-((x[0] - centre) / width).powi(2) / 2.0).exp();
        Complex64::from_polar(amp, k * x[0])
    })
    .unwrap()
}

fn unitarity() -> Outcome {
    let start = Instant::now();
    let spec = GridSpec::uniform(1, -10.0, 10.0, 512, Boundary::Periodic).unwrap();
    let osc = HamiltonianSystem::parse(1, "p1^2/2 + q1^2/2").unwrap();
    let ground = gaussian(spec.clone(), 0.0, 1.0, 0.0);

    let mut cn = CrankNicolson::new(quantum::quantize_quadratic(&osc).unwrap(), 1e-3).unwrap();
    let mut rho = gaussian(spec.clone(), 1.0, 1.0, 0.5);
    let mut step_drift: f64 = 0.0;
    let mut before = norm(&rho);
    for _ in 0..10_000 {
        cn.step(&mut rho).unwrap();
        let after = norm(&rho);
        step_drift = step_drift.max((after - before).abs());
        before = after;
    }

    let history = quantum::schrodinger_evolve(&ground, &osc, 2.0 * PI, 1e-3, usize::MAX).unwrap();
    let last = history.last().unwrap();
    let survival = inner_product(&ground, last).unwrap().norm() / (norm(&ground) * norm(&ground));

    let wide = GridSpec::uniform(1, -20.0, 20.0, 2048, Boundary::Periodic).unwrap();
    let free = HamiltonianSystem::parse(1, "p1^2/2").unwrap();
    let packet = gaussian(wide, -5.0, 1.0, 1.0);
    let position = GridOperator::multiply(Complex64::new(1.0, 0.0), Expr::q(0));
    let q0 = quantum::expectation(&position, &packet).unwrap().re;
    let mut ehrenfest: f64 = 0.0;
    for snap in quantum::schrodinger_evolve(&packet, &free, 2.0 * PI, 1e-3, 500).unwrap() {
        let q = quantum::expectation(&position, &snap).unwrap().re;
        ehrenfest = ehrenfest.max((q - q0 - snap.time).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        step_drift <= 1e-10 && survival >= 1.0 - 1e-4 && ehrenfest <= 2e-3 && secs < 60.0,
        format!(
            "per-step norm drift {step_drift:.3e} over 1e4 steps (<= 1e-10); ground-state survival {survival:.8} (>= 1 - 1e-4); Ehrenfest drift {ehrenfest:.3e} (<= 2e-3); runtime {secs:.2} s (< 60 s)"
        ),
    )
}

fn frame_split() -> Outcome {
    let e = |s: &str| parse(s, 2).unwrap();
    let h = HamiltonianSystem::parse(2, "(p1^2 + p2^2)/2 + q1^2*p2/3 + cos(t)*q2^2").unwrap();
    let frame = Frame::new(vec![e("0.7*q2"), e("-0.7*q1 + sin(t)")]).unwrap();
    let split = hamiltonian::frame_split(&h, &frame).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut classical: f64 = 0.0;
    for _ in 0..100 {
        let pt = random_phase_point(&mut rng);
        let gap = h.hamiltonian().evaluate(&pt).unwrap()
            - split.frame_part.evaluate(&pt).unwrap()
            - split.energy.evaluate(&pt).unwrap();
        classical = classical.max(gap.abs());
    }

    let ops = quantum::hamilton_operator(&h, Some(&frame)).unwrap();
    let spec = GridSpec::uniform(2, -3.0, 3.0, 24, Boundary::Periodic).unwrap();
    let mut operator: f64 = 0.0;
    for _ in 0..5 {
        let values =
            (0..spec.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let rho = HalfDensityGrid::new(spec.clone(), rng.gen_range(0.0..1.0), values).unwrap();
        let total = ops.hamiltonian.apply(&rho).unwrap();
        let parts = ops.frame_part.apply(&rho).unwrap();
        let energy = ops.energy.apply(&rho).unwrap();
        let scale = total.values.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for j in 0..spec.len() {
            operator = operator.max((total.values[j] - parts.values[j] - energy.values[j]).norm() / scale);
        }
    }
    outcome(
        classical <= 1e-13 && operator <= 1e-13,
        format!("H - H_G - E_G {classical:.3e}; operator identity {operator:.3e} relative (<= 1e-13)"),
    )
}

fn rk4_order() -> Outcome {
    let osc = LagrangianSystem::parse(1, "qt1^2/2 - q1^2/2").unwrap();
    let ic = Point::new().with(Sym::T, 0.0).with(Sym::Q(0), 1.0).with(Sym::Qt(0), 0.0);
    let err = |dt: f64| {
        let run = lagrangian::integrate_lagrange(&osc, &ic, 10.0, dt).unwrap();
        (run.last()[0] - 10.0f64.cos()).abs()
    };
    let (coarse, fine) = (err(0.1), err(0.05));
    let ratio = coarse / fine;
    outcome((12.0..=20.0).contains(&ratio), format!("error ratio {ratio:.3} for dt 0.1 -> 0.05 (in [12, 20])"))
}
