use num_complex::Complex64;

use super::grid::{norm, HalfDensityGrid};
use super::operator::{GridOperator, SparseMatrix};
use crate::error::{Error, Result};
use crate::trajectory;

/// Relative residual above which a Crank–Nicolson solve is rejected.
pub const SOLVE_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-300;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// LU factors of a banded matrix, no pivoting.
#[derive(Debug, Clone)]
struct BandLu {
    n: usize,
    bw: usize,
    data: Vec<Complex64>,
}

impl BandLu {
    fn at(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    fn factor(m: &SparseMatrix, bw: usize) -> Result<Self> {
        let n = m.dim();
        let mut lu = BandLu { n, bw, data: vec![ZERO; n * (2 * bw + 1)] };
        for i in 0..n {
            for (j, v) in m.row(i) {
                if i.abs_diff(*j) <= bw {
                    let k = lu.at(i, *j);
                    lu.data[k] = *v;
                }
            }
        }
        for k in 0..n {
            let pivot = lu.data[lu.at(k, k)];
            if pivot.norm() < PIVOT_TOL {
                return Err(Error::LinearSolve { residual: f64::INFINITY });
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let ik = lu.at(i, k);
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..end {
                    let kj = lu.data[lu.at(k, j)];
                    let ij = lu.at(i, j);
                    lu.data[ij] -= l * kj;
                }
            }
        }
        Ok(lu)
    }

    fn solve(&self, b: &mut [Complex64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = b[i];
            for j in start..i {
                s -= self.data[self.at(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let mut s = b[i];
            for j in i + 1..end {
                s -= self.data[self.at(i, j)] * b[j];
            }
            b[i] = s / self.data[self.at(i, i)];
        }
    }
}

/// Dense LU with partial pivoting for the small capacitance system.
#[derive(Debug, Clone)]
struct DenseLu {
    n: usize,
    a: Vec<Complex64>,
    perm: Vec<usize>,
}

impl DenseLu {
    fn factor(mut a: Vec<Complex64>, n: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x * n + k].norm().total_cmp(&a[y * n + k].norm())).unwrap_or(k);
            if a[p * n + k].norm() < PIVOT_TOL {
                return Err(Error::LinearSolve { residual: f64::INFINITY });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let l = a[i * n + k] / a[k * n + k];
                a[i * n + k] = l;
                for j in k + 1..n {
                    let kj = a[k * n + j];
                    a[i * n + j] -= l * kj;
                }
            }
        }
        Ok(DenseLu { n, a, perm })
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|p| b[*p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.a[i * n + j];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.a[i * n + j];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }
}

/// Direct solver for a sparse matrix that is banded apart from a few
/// far-off-diagonal entries (periodic wrap-around), handled by a
/// Sherman–Morrison–Woodbury correction.
#[derive(Debug, Clone)]
pub struct WrapSolver {
    matrix: SparseMatrix,
    band: BandLu,
    /// Columns holding out-of-band entries.
    cols: Vec<usize>,
    /// `B⁻¹U`, one vector per column in `cols`.
    z: Vec<Vec<Complex64>>,
    capacitance: Option<DenseLu>,
}

impl WrapSolver {
    pub fn new(matrix: SparseMatrix, bw: usize) -> Result<Self> {
        let n = matrix.dim();
        let band = BandLu::factor(&matrix, bw)?;
        let mut cols: Vec<usize> = (0..n)
            .flat_map(|i| matrix.row(i).iter().filter(move |(j, _)| i.abs_diff(*j) > bw).map(|(j, _)| *j))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        let m = cols.len();
        let mut z = Vec::with_capacity(m);
        for &c in &cols {
            let mut u = vec![ZERO; n];
            for (i, ui) in u.iter_mut().enumerate() {
                if i.abs_diff(c) > bw {
                    *ui = matrix.get(i, c);
                }
            }
            band.solve(&mut u);
            z.push(u);
        }
        let capacitance = if m == 0 {
            None
        } else {
            // I + Vᵀ B⁻¹ U
            let mut cap = vec![ZERO; m * m];
            for (r, &row) in cols.iter().enumerate() {
                for (c, zc) in z.iter().enumerate() {
                    cap[r * m + c] = zc[row] + if r == c { Complex64::new(1.0, 0.0) } else { ZERO };
                }
            }
            Some(DenseLu::factor(cap, m)?)
        };
        Ok(WrapSolver { matrix, band, cols, z, capacitance })
    }

    /// Solves `A x = b`, failing when the relative residual exceeds [`SOLVE_TOL`].
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = b.to_vec();
        self.band.solve(&mut x);
        if let Some(cap) = &self.capacitance {
            let picked: Vec<Complex64> = self.cols.iter().map(|c| x[*c]).collect();
            let w = cap.solve(&picked);
            for (zc, wc) in self.z.iter().zip(&w) {
                for (xi, zi) in x.iter_mut().zip(zc) {
                    *xi -= zi * wc;
                }
            }
        }
        let ax = self.matrix.matvec(&x);
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE);
        let residual = ax.iter().zip(b).fold(0.0f64, |m, (a, v)| m.max((a - v).norm())) / scale;
        if !(residual <= SOLVE_TOL) {
            return Err(Error::LinearSolve { residual });
        }
        Ok(x)
    }
}

/// Half bandwidth of centred stencils on `spec` in flat indexing.
fn stencil_bandwidth(spec: &super::grid::GridSpec) -> usize {
    (0..spec.dim()).map(|k| spec.stride(k)).sum()
}

/// Crank–Nicolson propagator for `∂_tρ = −i𝓗̂(t)ρ`:
/// `(I + i(dt/2)𝓗̂(t+dt/2))ρ_new = (I − i(dt/2)𝓗̂(t+dt/2))ρ_old`.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    op: GridOperator,
    dt: f64,
    frozen: Option<(SparseMatrix, WrapSolver)>,
}

impl CrankNicolson {
    pub fn new(op: GridOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        Ok(CrankNicolson { op, dt, frozen: None })
    }

    fn matrices(&self, rho: &HalfDensityGrid, dt: f64) -> Result<(SparseMatrix, WrapSolver)> {
        let h = self.op.assemble(&rho.spec, rho.time + 0.5 * dt)?;
        let n = rho.spec.len();
        let lhs = SparseMatrix::identity(n).add(&h.scale(Complex64::new(0.0, 0.5 * dt)));
        Ok((h, WrapSolver::new(lhs, stencil_bandwidth(&rho.spec))?))
    }

    /// Advances `rho` by `dt` (or the step given, when shorter at the end of a span).
    pub fn step_by(&mut self, rho: &mut HalfDensityGrid, dt: f64) -> Result<()> {
        let reuse = !self.op.is_time_dependent() && dt == self.dt;
        let owned;
        let (h, solver) = if reuse {
            if self.frozen.is_none() {
                self.frozen = Some(self.matrices(rho, dt)?);
            }
            let f = self.frozen.as_ref().expect("frozen matrices were just built");
            (&f.0, &f.1)
        } else {
            owned = self.matrices(rho, dt)?;
            (&owned.0, &owned.1)
        };
        let hr = h.matvec(&rho.values);
        let c = Complex64::new(0.0, 0.5 * dt);
        let rhs: Vec<Complex64> = rho.values.iter().zip(&hr).map(|(r, v)| r - c * v).collect();
        rho.values = solver.solve(&rhs)?;
        rho.time += dt;
        Ok(())
    }

    pub fn step(&mut self, rho: &mut HalfDensityGrid) -> Result<()> {
        let dt = self.dt;
        self.step_by(rho, dt)
    }
}

/// Evolves `rho` to `t1`, keeping the initial grid and every
/// `record_every`-th step (and always the final one).
pub fn evolve(
    rho: &HalfDensityGrid,
    op: &GridOperator,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<Vec<HalfDensityGrid>> {
    let (steps, h) = trajectory::step_plan(rho.time, t1, dt)?;
    let every = record_every.max(1);
    let mut cn = CrankNicolson::new(op.clone(), h)?;
    let mut cur = rho.clone();
    let start = norm(rho);
    let mut history = vec![cur.clone()];
    for k in 1..=steps {
        cn.step(&mut cur)?;
        if k == steps {
            cur.time = t1;
        }
        if !norm(&cur).is_finite() || (start > 0.0 && norm(&cur) > 2.0 * start) {
            return Err(Error::NonFinite { t: cur.time });
        }
        if k % every == 0 || k == steps {
            history.push(cur.clone());
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::grid::{Boundary, GridSpec};
    use crate::quantum::operator::Factor;

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn wrap_solver_matches_product() {
        for (dim, b) in [(1, Boundary::Periodic), (2, Boundary::Periodic), (1, Boundary::Dirichlet)] {
            let spec = GridSpec::uniform(dim, -1.0, 1.0, 8, b).unwrap();
            let lap = GridOperator::term(Complex64::new(0.0, 1.0), vec![Factor::Div(0, crate::symexpr::Expr::one())]);
            let op = if dim == 2 {
                lap + GridOperator::term(Complex64::new(0.3, 0.0), vec![Factor::D(0), Factor::D(1)])
            } else {
                lap
            };
            let m = SparseMatrix::identity(spec.len()).add(&op.assemble(&spec, 0.0).unwrap());
            let solver = WrapSolver::new(m.clone(), stencil_bandwidth(&spec)).unwrap();
            let x = random_vec(spec.len(), 7);
            let b = m.matvec(&x);
            let got = solver.solve(&b).unwrap();
            for (g, w) in got.iter().zip(&x) {
                assert!((g - w).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let spec = GridSpec::uniform(1, -1.0, 1.0, 16, Boundary::Periodic).unwrap();
        let rho = HalfDensityGrid::new(spec, 0.0, random_vec(16, 3)).unwrap();
        let hist = evolve(&rho, &GridOperator::zero(), 1.0, 0.1, 5).unwrap();
        assert_eq!(hist.len(), 3);
        assert_eq!(hist.last().unwrap().values, rho.values);
        assert_eq!(hist.last().unwrap().time, 1.0);
    }
}
