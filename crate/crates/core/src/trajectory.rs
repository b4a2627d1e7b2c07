//! Fixed-step classical Runge–Kutta integration and sampled trajectories.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::symexpr::{Compiled, Expr, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// Rows hold `(q, q_t)`.
    Velocities,
    /// Rows hold `(q, p)`.
    Momenta,
}

/// Uniformly sampled solution with optional monitored currents.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub kind: StateKind,
    pub dt: f64,
    pub times: Vec<f64>,
    /// One row per sample: `n` positions followed by `n` velocities or momenta.
    pub states: Vec<Vec<f64>>,
    pub monitors: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn positions(&self, k: usize) -> &[f64] {
        &self.states[k][..self.dim]
    }

    pub fn fibre(&self, k: usize) -> &[f64] {
        &self.states[k][self.dim..]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Evaluates `e` on every sample and appends it as a monitor column.
    /// Velocity trajectories see `t, q, q_t`; momentum trajectories `t, q, p`.
    pub fn add_monitor(&mut self, name: &str, e: &Expr) -> Result<()> {
        let layout = match self.kind {
            StateKind::Velocities => Layout::jet(self.dim),
            StateKind::Momenta => Layout::phase(self.dim),
        };
        let c = Compiled::new(e, &layout)?;
        let mut slots = vec![0.0; 1 + 2 * self.dim];
        let mut col = Vec::with_capacity(self.len());
        for (t, row) in self.times.iter().zip(&self.states) {
            slots[0] = *t;
            slots[1..].copy_from_slice(row);
            col.push(c.eval(&slots)?);
        }
        self.monitors.push((name.to_string(), col));
        Ok(())
    }

    /// Max `|m(t_k) − m(t_0)|` of a monitor column.
    pub fn drift(&self, name: &str) -> Option<f64> {
        let col = self.monitor(name)?;
        let first = *col.first()?;
        Some(col.iter().fold(0.0f64, |w, v| w.max((v - first).abs())))
    }

    pub fn header(&self) -> String {
        let fibre = match self.kind {
            StateKind::Velocities => "qt",
            StateKind::Momenta => "p",
        };
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.dim).map(|i| format!("q{i}")));
        cols.extend((1..=self.dim).map(|i| format!("{fibre}{i}")));
        cols.extend(self.monitors.iter().map(|(n, _)| n.clone()));
        cols.join(",")
    }

    /// CSV with a header row and shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for k in 0..self.len() {
            write!(out, "{:e}", self.times[k]).unwrap();
            for v in &self.states[k] {
                write!(out, ",{v:e}").unwrap();
            }
            for (_, col) in &self.monitors {
                write!(out, ",{:e}", col[k]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Number of steps and the uniform step covering `[t0, t1]` with steps no
/// longer than `dt` (exactly `dt` when it divides the span).
pub fn step_plan(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid time span [{t0}, {t1}]")));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((0, dt));
    }
    let ratio = span / dt;
    let steps =
        if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) { ratio.round() } else { ratio.ceil() } as usize;
    let steps = steps.max(1);
    Ok((steps, span / steps as f64))
}

/// Classical RK4 on `y' = rhs(t, y)` over `[t0, t1]`.
pub fn rk4<F>(mut rhs: F, t0: f64, t1: f64, dt: f64, y0: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let (steps, h) = step_plan(t0, t1, dt)?;
    let m = y0.len();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(y0.to_vec());
    let mut y = y0.to_vec();
    let mut tmp = vec![0.0; m];
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = rhs(t, &y)?;
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = rhs(t + 0.5 * h, &tmp)?;
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = rhs(t + 0.5 * h, &tmp)?;
        for i in 0..m {
            tmp[i] = y[i] + h * k3[i];
        }
        let k4 = rhs(t + h, &tmp)?;
        for i in 0..m {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t_next });
        }
        times.push(t_next);
        states.push(y.clone());
    }
    Ok((times, states, h))
}
