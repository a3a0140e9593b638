//! Vlasov and linearized Vlasov solvers on a periodic `x` × uniform `v` grid.
//!
//! Densities are stored as Fourier modes in `x` sampled on the `v` grid. Strang splitting:
//! exact phase rotation for free transport, cubic B-spline shift in `v` for the force step.
//! The shift is applied in the `v`-Fourier domain, which makes it exactly mass preserving.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{InitialDensity, Observable, Spatial, TorusPotential};
use crate::numerics::wrap_unit;

/// Mode cutoff and velocity grid. `nx` collocation points carry modes `|n| < nx/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub nx: usize,
    pub nv: usize,
    pub vmax: f64,
    pub dt: f64,
}

impl PhaseGrid {
    /// Default grid for `F°` on `[0, t_end]`: 64 collocation points, `V_max = R + 1 + t_end ‖∇V‖_∞`.
    pub fn default_for(f0: &InitialDensity, v: &TorusPotential, t_end: f64) -> Self {
        let vmax = f0.support_radius() + 1.0 + t_end * v.grad_bound();
        Self { nx: 64, nv: 256, vmax, dt: 1e-3 }
    }

    pub fn h(&self) -> f64 {
        2.0 * self.vmax / self.nv as f64
    }

    pub fn v(&self, j: usize) -> f64 {
        -self.vmax + j as f64 * self.h()
    }

    pub fn max_mode(&self) -> i32 {
        self.nx as i32 / 2 - 1
    }

    /// Mode number of storage slot `i` (FFT order); the Nyquist slot is unused.
    pub fn mode(&self, i: usize) -> i32 {
        if i < self.nx / 2 {
            i as i32
        } else {
            i as i32 - self.nx as i32
        }
    }

    pub fn slot(&self, n: i32) -> Option<usize> {
        if n.abs() > self.max_mode() {
            None
        } else if n >= 0 {
            Some(n as usize)
        } else {
            Some((self.nx as i32 + n) as usize)
        }
    }

    fn validate(&self, f0_radius: f64) -> Result<()> {
        if !self.nx.is_power_of_two() || self.nx < 4 || self.nv % 2 != 0 || self.nv < 16 {
            return Err(Error::Input(format!("grid needs nx a power of two ≥ 4 and even nv ≥ 16, got {} × {}", self.nx, self.nv)));
        }
        if !(self.dt > 0.0) || self.vmax <= f0_radius {
            return Err(Error::Input("need dt > 0 and V_max beyond the initial support".into()));
        }
        let cfl = self.vmax * self.max_mode() as f64 * self.dt;
        if cfl >= 1.0 {
            return Err(Error::Cfl(format!("V_max·K·dt = {cfl:.3} ≥ 1")));
        }
        Ok(())
    }
}

/// `F(t)` as modes `F̂_n(v_j)`, slot-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    pub grid: PhaseGrid,
    pub data: Vec<Complex64>,
    pub t: f64,
}

impl GridDensity {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self { grid: grid.clone(), data: vec![Complex64::new(0.0, 0.0); grid.nx * grid.nv], t: 0.0 }
    }

    /// Exact modes of `ρ°(x) f°(v)` sampled on the grid.
    pub fn from_initial(f0: &InitialDensity, grid: &PhaseGrid) -> Result<Self> {
        if f0.dim() != 1 {
            return Err(Error::Input("phase-space grids are one-dimensional".into()));
        }
        let mut g = Self::zeros(grid);
        let fv: Vec<f64> = (0..grid.nv).map(|j| f0.f(&[grid.v(j)])).collect();
        let mut put = |n: i32, c: Complex64| -> Result<()> {
            let s = grid.slot(n).ok_or_else(|| Error::Input(format!("spatial mode {n} beyond grid cutoff")))?;
            for j in 0..grid.nv {
                g.data[s * grid.nv + j] += c * fv[j];
            }
            Ok(())
        };
        put(0, Complex64::new(1.0, 0.0))?;
        if let Spatial::Fourier(terms) = f0.spatial() {
            for (n, a) in terms {
                put(n[0], Complex64::new(a / 2.0, 0.0))?;
                put(-n[0], Complex64::new(a / 2.0, 0.0))?;
            }
        }
        Ok(g)
    }

    /// Modes of an arbitrary function `J(x, v)` sampled at the collocation points.
    pub fn from_fn(grid: &PhaseGrid, j: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(grid);
        let fft = FftPlanner::new().plan_fft_forward(grid.nx);
        let mut col = vec![Complex64::new(0.0, 0.0); grid.nx];
        for jv in 0..grid.nv {
            for (i, c) in col.iter_mut().enumerate() {
                *c = Complex64::new(j(i as f64 / grid.nx as f64, grid.v(jv)), 0.0);
            }
            fft.process(&mut col);
            for (i, c) in col.iter().enumerate() {
                g.data[i * grid.nv + jv] = c / grid.nx as f64;
            }
        }
        g.data[grid.nx / 2 * grid.nv..(grid.nx / 2 + 1) * grid.nv].iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        g
    }

    pub fn mode_row(&self, n: i32) -> Option<&[Complex64]> {
        let s = self.grid.slot(n)?;
        Some(&self.data[s * self.grid.nv..(s + 1) * self.grid.nv])
    }

    /// `∫F̂_n(v) dv`.
    pub fn density_mode(&self, n: i32) -> Complex64 {
        self.mode_row(n).map_or(Complex64::new(0.0, 0.0), |r| r.iter().sum::<Complex64>() * self.grid.h())
    }

    pub fn mass(&self) -> f64 {
        self.density_mode(0).re
    }

    /// `∫∫ φ F dx dv = Σ_n ∫ φ̂_n F̂_{-n} dv`.
    pub fn pairing(&self, phi: &Observable) -> f64 {
        let g = &self.grid;
        let mut s = Complex64::new(0.0, 0.0);
        let kmax = phi.max_mode().min(g.max_mode());
        for n in -kmax..=kmax {
            let row = self.mode_row(-n).expect("within cutoff");
            for j in 0..g.nv {
                s += phi.mode_coefficient(n, g.v(j)) * row[j];
            }
        }
        s.re * g.h()
    }

    /// `(∫∫ |F|²)^{1/2}` by Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.h()).sqrt()
    }

    /// Largest deviation from `F̂_{-n} = conj F̂_n`.
    pub fn reality_error(&self) -> f64 {
        let g = &self.grid;
        let mut e: f64 = 0.0;
        for n in 0..=g.max_mode() {
            let (a, b) = (self.mode_row(n).unwrap(), self.mode_row(-n).unwrap());
            for j in 0..g.nv {
                e = e.max((a[j] - b[j].conj()).norm());
            }
        }
        e
    }

    /// Real-space values on the collocation grid, `x`-major.
    pub fn to_real(&self) -> Vec<f64> {
        let g = &self.grid;
        let fft = FftPlanner::new().plan_fft_inverse(g.nx);
        let mut out = vec![0.0; g.nx * g.nv];
        let mut col = vec![Complex64::new(0.0, 0.0); g.nx];
        for j in 0..g.nv {
            for i in 0..g.nx {
                col[i] = self.data[i * g.nv + j];
            }
            fft.process(&mut col);
            for i in 0..g.nx {
                out[i * g.nv + j] = col[i].re;
            }
        }
        out
    }

    /// Most negative real-space value (spline undershoot diagnostic).
    pub fn min_value(&self) -> f64 {
        self.to_real().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `F(x, -v)`.
    pub fn velocity_reflected(&self) -> Self {
        let g = &self.grid;
        let mut out = self.clone();
        for s in 0..g.nx {
            for j in 0..g.nv {
                // v_j ↦ -v_j maps index j to nv - j (mod nv)
                out.data[s * g.nv + (g.nv - j) % g.nv] = self.data[s * g.nv + j];
            }
        }
        out
    }

    /// Largest `|F̂|` over the outermost `w` velocity cells on either side, relative to the maximum.
    pub fn edge_fraction(&self, w: usize) -> (f64, f64) {
        let g = &self.grid;
        let peak = self.data.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let mut edge: f64 = 0.0;
        let mut vedge = 0.0;
        for s in 0..g.nx {
            for j in (0..w).chain(g.nv - w..g.nv) {
                let a = self.data[s * g.nv + j].norm();
                if a > edge {
                    edge = a;
                    vedge = g.v(j);
                }
            }
        }
        (edge / peak, vedge)
    }

    /// `k, v, Re, Im` table.
    pub fn to_csv(&self, config_hash: &str) -> String {
        use std::fmt::Write as _;
        let g = &self.grid;
        let mut s = format!("# config_hash={config_hash} t={}\nk,v,re,im\n", self.t);
        for n in -g.max_mode()..=g.max_mode() {
            let row = self.mode_row(n).unwrap();
            for j in 0..g.nv {
                let _ = writeln!(s, "{},{:.10},{:.17e},{:.17e}", n, g.v(j), row[j].re, row[j].im);
            }
        }
        s
    }
}

fn bspline3(u: f64) -> f64 {
    let a = u.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        0.0
    }
}

/// FFT machinery for the velocity-space spline operations.
struct VelocityOps {
    nv: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    xfwd: Arc<dyn Fft<f64>>,
    xinv: Arc<dyn Fft<f64>>,
    prefilter: Vec<f64>,
    deriv: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl VelocityOps {
    fn new(grid: &PhaseGrid) -> Self {
        let mut p = FftPlanner::new();
        let nv = grid.nv;
        let prefilter = (0..nv).map(|q| (4.0 + 2.0 * (TAU * q as f64 / nv as f64).cos()) / 6.0).collect::<Vec<_>>();
        let h = grid.h();
        let deriv = (0..nv)
            .map(|q| {
                let xi = TAU * q as f64 / nv as f64;
                Complex64::new(0.0, xi.sin()) / (h * prefilter[q])
            })
            .collect();
        Self {
            nv,
            fwd: p.plan_fft_forward(nv),
            inv: p.plan_fft_inverse(nv),
            xfwd: p.plan_fft_forward(grid.nx),
            xinv: p.plan_fft_inverse(grid.nx),
            prefilter,
            deriv,
            scratch: vec![Complex64::new(0.0, 0.0); nv.max(grid.nx)],
        }
    }

    /// `g(v) ← g(v - s h)` through the interpolating cubic spline.
    fn shift(&mut self, row: &mut [Complex64], s: f64) {
        if s == 0.0 {
            return;
        }
        let nv = self.nv;
        self.fwd.process(row);
        let fl = s.floor() as i64;
        let taps: Vec<(i64, f64)> = (fl - 1..=fl + 2).map(|l| (l, bspline3(l as f64 - s))).collect();
        for q in 0..nv {
            let xi = TAU * q as f64 / nv as f64;
            let mut w = Complex64::new(0.0, 0.0);
            for &(l, b) in &taps {
                w += b * Complex64::from_polar(1.0, -xi * l as f64);
            }
            row[q] *= w / (self.prefilter[q] * nv as f64);
        }
        self.inv.process(row);
    }

    /// Spline derivative `g'` at the nodes.
    fn derivative(&mut self, row: &[Complex64], out: &mut [Complex64]) {
        out.copy_from_slice(row);
        self.fwd.process(out);
        for q in 0..self.nv {
            out[q] *= self.deriv[q] / self.nv as f64;
        }
        self.inv.process(out);
    }
}

/// Time-stepper shared by the nonlinear and linearized solvers.
pub struct VlasovSolver {
    pub grid: PhaseGrid,
    pub potential: TorusPotential,
    ops: VelocityOps,
    phase: Vec<Complex64>,
}

impl VlasovSolver {
    pub fn new(grid: PhaseGrid, potential: TorusPotential, f0_radius: f64) -> Result<Self> {
        if potential.dim() != 1 {
            return Err(Error::Input("Vlasov grids are one-dimensional".into()));
        }
        grid.validate(f0_radius)?;
        let ops = VelocityOps::new(&grid);
        let phase = (0..grid.nx)
            .flat_map(|i| {
                let n = grid.mode(i) as f64;
                let g = grid.clone();
                (0..grid.nv).map(move |j| Complex64::from_polar(1.0, -TAU * n * g.v(j) * g.dt / 2.0))
            })
            .collect();
        Ok(Self { grid, potential, ops, phase })
    }

    fn half_transport(&self, f: &mut GridDensity) {
        for (c, p) in f.data.iter_mut().zip(&self.phase) {
            *c *= p;
        }
        let g = &self.grid;
        f.data[g.nx / 2 * g.nv..(g.nx / 2 + 1) * g.nv].iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
    }

    /// `(∇V ∗ ρ)(x_i)` on the collocation grid for density modes of `f`.
    fn field(&mut self, f: &GridDensity) -> Vec<f64> {
        let g = &self.grid;
        let mut col = vec![Complex64::new(0.0, 0.0); g.nx];
        for &(n, vh) in self.potential.half_modes() {
            for m in [n[0], -n[0]] {
                if let Some(s) = g.slot(m) {
                    let rho = f.density_mode(m);
                    col[s] = Complex64::new(0.0, TAU * m as f64) * vh * rho;
                }
            }
        }
        self.ops.xinv.process(&mut col);
        col.iter().map(|c| c.re).collect()
    }

    fn to_x(&mut self, f: &mut GridDensity) {
        let g = &self.grid;
        let col = &mut self.ops.scratch[..g.nx];
        for j in 0..g.nv {
            for i in 0..g.nx {
                col[i] = f.data[i * g.nv + j];
            }
            self.ops.xinv.process(col);
            for i in 0..g.nx {
                f.data[i * g.nv + j] = Complex64::new(col[i].re, 0.0);
            }
        }
    }

    fn to_modes(&mut self, f: &mut GridDensity) {
        let g = &self.grid;
        let col = &mut self.ops.scratch[..g.nx];
        for j in 0..g.nv {
            for i in 0..g.nx {
                col[i] = f.data[i * g.nv + j];
            }
            self.ops.xfwd.process(col);
            for i in 0..g.nx {
                f.data[i * g.nv + j] = col[i] / g.nx as f64;
            }
        }
    }

    /// One Strang step of the nonlinear equation `∂_t F + v ∂_x F - (∇V∗ρ) ∂_v F = 0`.
    pub fn step(&mut self, f: &mut GridDensity) {
        self.half_transport(f);
        if !self.potential.is_zero() {
            let e = self.field(f);
            self.to_x(f);
            let (nv, h, dt) = (self.grid.nv, self.grid.h(), self.grid.dt);
            for (i, ei) in e.iter().enumerate() {
                // F(v) ← F(v + E dt)
                self.ops.shift(&mut f.data[i * nv..(i + 1) * nv], -ei * dt / h);
            }
            self.to_modes(f);
        }
        self.half_transport(f);
        f.t += self.grid.dt;
    }

    /// One Strang step of the linearized pair `(F, U)`.
    pub fn step_linear(&mut self, f: &mut GridDensity, u: &mut GridDensity) {
        self.half_transport(f);
        self.half_transport(u);
        if !self.potential.is_zero() {
            let ef = self.field(f);
            let eu = self.field(u);
            self.to_x(f);
            self.to_x(u);
            let (nv, h, dt) = (self.grid.nv, self.grid.h(), self.grid.dt);
            let mut df = vec![Complex64::new(0.0, 0.0); nv];
            for i in 0..self.grid.nx {
                let fr = &mut f.data[i * nv..(i + 1) * nv];
                let ur = &mut u.data[i * nv..(i + 1) * nv];
                self.ops.derivative(fr, &mut df);
                for j in 0..nv {
                    ur[j] += dt * eu[i] * df[j].re;
                }
                self.ops.shift(fr, -ef[i] * dt / h);
                self.ops.shift(ur, -ef[i] * dt / h);
            }
            self.to_modes(f);
            self.to_modes(u);
        }
        self.half_transport(f);
        self.half_transport(u);
        f.t += self.grid.dt;
        u.t += self.grid.dt;
    }

    fn check_support(&self, f: &GridDensity) -> Result<()> {
        let (frac, v) = f.edge_fraction(4);
        if frac > 1e-10 {
            return Err(Error::DomainOverflow { v: v.abs(), vmax: self.grid.vmax });
        }
        Ok(())
    }
}

/// Snapshots of a Vlasov run plus the density modes felt by the potential at every step.
#[derive(Clone, Debug)]
pub struct VlasovSolution {
    pub snapshots: Vec<GridDensity>,
    /// `ρ̂_n(t_s)` for every half-mode of the potential, at `t_s = s·dt`, `s = 0..=steps`.
    pub field_modes: Vec<Vec<Complex64>>,
    pub max_mass_error: f64,
    pub max_undershoot: f64,
}

fn field_modes(f: &GridDensity, v: &TorusPotential) -> Vec<Complex64> {
    v.half_modes().iter().map(|(n, _)| f.density_mode(n[0])).collect()
}

fn steps_for(t: f64, dt: f64) -> Result<usize> {
    let s = t / dt;
    if (s - s.round()).abs() > 1e-6 || t < 0.0 {
        return Err(Error::Config(format!("time {t} not on the dt = {dt} grid")));
    }
    Ok(s.round() as usize)
}

/// Nonlinear Vlasov solve from `F°`, with snapshots at `times`.
pub fn solve_vlasov(f0: &InitialDensity, v: &TorusPotential, grid: &PhaseGrid, times: &[f64]) -> Result<VlasovSolution> {
    let mut solver = VlasovSolver::new(grid.clone(), v.clone(), f0.support_radius())?;
    let mut f = GridDensity::from_initial(f0, grid)?;
    let targets: Vec<usize> = times.iter().map(|&t| steps_for(t, grid.dt)).collect::<Result<_>>()?;
    let last = targets.iter().copied().max().unwrap_or(0);
    let mut snapshots = vec![None; times.len()];
    let mut modes = vec![field_modes(&f, v)];
    let mut max_mass_error: f64 = (f.mass() - 1.0).abs();
    let mut max_undershoot: f64 = 0.0;
    for s in 0..=last {
        for (i, &t) in targets.iter().enumerate() {
            if t == s {
                snapshots[i] = Some(f.clone());
                max_undershoot = max_undershoot.max(-f.min_value());
            }
        }
        if s == last {
            break;
        }
        solver.step(&mut f);
        solver.check_support(&f)?;
        max_mass_error = max_mass_error.max((f.mass() - 1.0).abs());
        modes.push(field_modes(&f, v));
    }
    Ok(VlasovSolution { snapshots: snapshots.into_iter().map(|s| s.expect("filled")).collect(), field_modes: modes, max_mass_error, max_undershoot })
}

/// Linearized flow `U[J°]` around the Vlasov solution from `F°`, snapshots at `times`.
pub fn solve_linearized(j0: &GridDensity, f0: &InitialDensity, v: &TorusPotential, times: &[f64]) -> Result<Vec<GridDensity>> {
    let grid = &j0.grid;
    let mut solver = VlasovSolver::new(grid.clone(), v.clone(), f0.support_radius())?;
    let mut f = GridDensity::from_initial(f0, grid)?;
    let mut u = j0.clone();
    let targets: Vec<usize> = times.iter().map(|&t| steps_for(t, grid.dt)).collect::<Result<_>>()?;
    let last = targets.iter().copied().max().unwrap_or(0);
    let mut out = vec![None; times.len()];
    for s in 0..=last {
        for (i, &t) in targets.iter().enumerate() {
            if t == s {
                out[i] = Some(u.clone());
            }
        }
        if s == last {
            break;
        }
        solver.step_linear(&mut f, &mut u);
        solver.check_support(&f)?;
    }
    Ok(out.into_iter().map(|s| s.expect("filled")).collect())
}

/// Time-dependent mean field `a(t, x) = -(∇V ∗ ρ_t)(x)` replayed from a Vlasov run.
pub struct MeanFieldFlow {
    modes: Vec<(i32, f64)>,
    rho: Vec<Vec<Complex64>>,
    vlasov_dt: f64,
}

impl MeanFieldFlow {
    pub fn new(sol: &VlasovSolution, v: &TorusPotential, vlasov_dt: f64) -> Self {
        Self { modes: v.half_modes().iter().map(|(n, c)| (n[0], *c)).collect(), rho: sol.field_modes.clone(), vlasov_dt }
    }

    fn accel(&self, s: usize, x: f64) -> f64 {
        let mut a = 0.0;
        for (m, &(n, vh)) in self.modes.iter().enumerate() {
            let z = self.rho[s][m] * Complex64::from_polar(1.0, TAU * n as f64 * x);
            a += 2.0 * TAU * n as f64 * vh * z.im;
        }
        a
    }

    /// Velocity-Verlet characteristics in the replayed field; `dt` must be a multiple of the Vlasov step.
    pub fn advance(&self, x: &mut [f64], v: &mut [f64], dt: f64, steps: usize) -> Result<()> {
        let ratio = dt / self.vlasov_dt;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::Config("particle step not a multiple of the Vlasov step".into()));
        }
        let r = ratio.round() as usize;
        if steps * r >= self.rho.len() {
            return Err(Error::Config("Vlasov run shorter than the requested flow".into()));
        }
        for (xi, vi) in x.iter_mut().zip(v.iter_mut()) {
            let mut a = self.accel(0, *xi);
            for s in 0..steps {
                *vi += 0.5 * dt * a;
                *xi = wrap_unit(*xi + dt * *vi);
                a = self.accel((s + 1) * r, *xi);
                *vi += 0.5 * dt * a;
            }
        }
        Ok(())
    }
}

/// `∫ φ(Φ_t z) F°(z) dz` for the discrete characteristic map `Φ_t` of a [`MeanFieldFlow`], by
/// trapezoid quadrature on an `nx × nv` grid covering the support of `F°`.
pub fn flow_quadrature(flow: &MeanFieldFlow, f0: &InitialDensity, phi: &[Observable], dt: f64, steps: usize, nx: usize, nv: usize) -> Result<Vec<f64>> {
    if f0.dim() != 1 || nx == 0 || nv < 2 {
        return Err(Error::Input("flow quadrature needs a one-dimensional density and a nonempty grid".into()));
    }
    let r = f0.support_radius();
    let hv = 2.0 * r / (nv - 1) as f64;
    let mut x = Vec::with_capacity(nx * nv);
    let mut v = Vec::with_capacity(nx * nv);
    let mut w = Vec::with_capacity(nx * nv);
    for i in 0..nx {
        let xi = i as f64 / nx as f64;
        for j in 0..nv {
            let vj = -r + j as f64 * hv;
            let weight = f0.eval_density(&[xi], &[vj]) * hv / nx as f64;
            if weight != 0.0 {
                x.push(xi);
                v.push(vj);
                w.push(weight);
            }
        }
    }
    flow.advance(&mut x, &mut v, dt, steps)?;
    Ok(phi.iter().map(|p| (0..x.len()).map(|i| w[i] * p.eval(&x[i..i + 1], &v[i..i + 1])).sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn cfl_guard() {
        let f0 = presets::inhomogeneous_1d();
        let g = PhaseGrid { nx: 64, nv: 128, vmax: 4.0, dt: 0.01 };
        assert!(matches!(VlasovSolver::new(g, presets::potential_1d(), f0.support_radius()), Err(Error::Cfl(_))));
    }

    #[test]
    fn spline_shift_preserves_sum_and_moves_bump() {
        let g = PhaseGrid { nx: 4, nv: 128, vmax: 4.0, dt: 1e-3 };
        let mut ops = VelocityOps::new(&g);
        let f = |v: f64| (-(v * v) * 4.0).exp();
        let mut row: Vec<Complex64> = (0..g.nv).map(|j| Complex64::new(f(g.v(j)), 0.0)).collect();
        let before: f64 = row.iter().map(|c| c.re).sum();
        ops.shift(&mut row, 3.3);
        let after: f64 = row.iter().map(|c| c.re).sum();
        assert!((before - after).abs() < 1e-12);
        for j in 0..g.nv {
            assert!((row[j].re - f(g.v(j) - 3.3 * g.h())).abs() < 2e-5);
        }
    }

    #[test]
    fn overflow_guard_fires() {
        let f0 = presets::inhomogeneous_1d();
        let g = PhaseGrid { nx: 16, nv: 64, vmax: 1.3, dt: 1e-2 };
        let r = solve_vlasov(&f0, &TorusPotential::cosine_1d(4.0), &g, &[2.0]);
        assert!(matches!(r, Err(Error::DomainOverflow { .. })));
    }

    #[test]
    fn characteristics_and_grid_agree() {
        let f0 = presets::inhomogeneous_1d();
        let pot = presets::potential_1d();
        let grid = PhaseGrid::default_for(&f0, &pot, 1.0);
        let sol = solve_vlasov(&f0, &pot, &grid, &[1.0]).unwrap();
        let flow = MeanFieldFlow::new(&sol, &pot, grid.dt);
        let phi = [presets::obs_cos_x(), presets::obs_v2()];
        let q = flow_quadrature(&flow, &f0, &phi, grid.dt, 1000, 64, 201).unwrap();
        for (p, qi) in phi.iter().zip(&q) {
            let g = sol.snapshots[0].pairing(p);
            assert!((g - qi).abs() < 1e-4, "{}: {g} {qi}", p.label);
        }
    }
}
