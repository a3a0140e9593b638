//! Spatially homogeneous Bogolyubov correction `H²`, its drive on the velocity density and the
//! limiting fluctuation variance.
//!
//! Two representations are provided. The grid route integrates each Fourier mode
//! `Ĥ_k(v₁, v₂)` of `H²` on an `N_v × N_v` velocity grid (one dimension). The propagator route
//! writes the two-particle linearized operator as `ℓ_k ⊗ 1 + 1 ⊗ ℓ_{-k}` and evaluates the
//! one-particle resolvents through Volterra equations for their velocity averages, which reduces
//! the drive to one-dimensional integrals along `k̂` in any dimension.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lenard_balescu::{ProjectedDensity, VelocityTest};
use crate::model::{InitialDensity, Observable, TorusPotential};
use crate::numerics::{cubic_interp, simpson};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Uniform velocity grid `-vmax + j·h`, `j < nv`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H2Grid {
    pub nv: usize,
    pub vmax: f64,
}

impl H2Grid {
    /// Grid spanning exactly the support of `f°`.
    pub fn for_density(f: &InitialDensity, nv: usize) -> Self {
        Self { nv, vmax: f.support_radius() }
    }

    pub fn h(&self) -> f64 {
        2.0 * self.vmax / (self.nv - 1) as f64
    }

    pub fn v(&self, j: usize) -> f64 {
        -self.vmax + j as f64 * self.h()
    }

    fn check(&self) -> Result<()> {
        if self.nv < 8 || !(self.vmax > 0.0) {
            return Err(Error::Input("H2 grid needs nv ≥ 8 and vmax > 0".into()));
        }
        Ok(())
    }
}

/// Fourier modes `Ĥ_k(v₁, v₂)`, row-major in `(v₁, v₂)`, for `k = ±2πn`, `0 < |n| ≤ K_H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCorrelation {
    pub grid: H2Grid,
    pub t: f64,
    pub modes: Vec<(i32, Vec<C64>)>,
}

impl ModeCorrelation {
    pub fn zero(grid: H2Grid, ns: &[i32]) -> Self {
        Self { grid, t: 0.0, modes: ns.iter().map(|&n| (n, vec![ZERO; grid.nv * grid.nv])).collect() }
    }

    pub fn mode(&self, n: i32) -> Option<&[C64]> {
        self.modes.iter().find(|(m, _)| *m == n).map(|(_, h)| h.as_slice())
    }

    pub fn max_abs(&self) -> f64 {
        self.modes.iter().flat_map(|(_, h)| h.iter().map(|z| z.norm())).fold(0.0, f64::max)
    }

    /// `max |Ĥ_{-k} - conj Ĥ_k|`.
    pub fn reality_error(&self) -> f64 {
        let mut e: f64 = 0.0;
        for (n, h) in &self.modes {
            match self.mode(-n) {
                Some(g) => {
                    for (a, b) in h.iter().zip(g) {
                        e = e.max((b - a.conj()).norm());
                    }
                }
                None => return f64::INFINITY,
            }
        }
        e
    }

    /// `max |Ĥ_k(v₁, v₂) - Ĥ_{-k}(v₂, v₁)|`.
    pub fn exchange_error(&self) -> f64 {
        let nv = self.grid.nv;
        let mut e: f64 = 0.0;
        for (n, h) in &self.modes {
            let Some(g) = self.mode(-n) else { return f64::INFINITY };
            for i in 0..nv {
                for j in 0..nv {
                    e = e.max((h[i * nv + j] - g[j * nv + i]).norm());
                }
            }
        }
        e
    }

    /// `B_k(v₁) = ∫ Ĥ_k(v₁, v₂) dv₂`.
    pub fn marginal(&self, n: i32) -> Option<Vec<C64>> {
        let nv = self.grid.nv;
        let h = self.grid.h();
        self.mode(n).map(|m| (0..nv).map(|i| m[i * nv..(i + 1) * nv].iter().sum::<C64>() * h).collect())
    }

    pub fn to_csv(&self, n: i32, config_hash: &str) -> Option<String> {
        let m = self.mode(n)?;
        let nv = self.grid.nv;
        let mut s = format!("# config_hash={config_hash}\n# n={n} t={}\nv1,v2,re,im\n", self.t);
        for i in 0..nv {
            for j in 0..nv {
                let z = m[i * nv + j];
                let _ = writeln!(s, "{:.8e},{:.8e},{:.12e},{:.12e}", self.grid.v(i), self.grid.v(j), z.re, z.im);
            }
        }
        Some(s)
    }
}

fn check_homogeneous_1d(f: &InitialDensity, pot: &TorusPotential) -> Result<()> {
    if f.dim() != 1 || pot.dim() != 1 {
        return Err(Error::Input("the H2 grid solver is one-dimensional".into()));
    }
    if !f.is_homogeneous() {
        return Err(Error::Input("the H2 system is closed only for a homogeneous background".into()));
    }
    Ok(())
}

struct ModeData {
    kv: Vec<f64>,
    ivd: Vec<C64>,
    source: Vec<C64>,
}

fn mode_data(f: &InitialDensity, vhat: f64, n: i32, grid: H2Grid) -> ModeData {
    let k = TAU * n as f64;
    let nv = grid.nv;
    let fv: Vec<f64> = (0..nv).map(|j| f.f(&[grid.v(j)])).collect();
    let d: Vec<f64> = (0..nv).map(|j| k * f.grad_f(&[grid.v(j)])[0]).collect();
    let mut source = vec![ZERO; nv * nv];
    for i in 0..nv {
        for j in 0..nv {
            source[i * nv + j] = I * vhat * (d[i] * fv[j] - fv[i] * d[j]);
        }
    }
    ModeData { kv: (0..nv).map(|j| k * grid.v(j)).collect(), ivd: d.iter().map(|x| I * vhat * x).collect(), source }
}

/// `Ŝ_k(v₁, v₂) = i k V̂(k) (∂_{v₁} - ∂_{v₂})(f°(v₁) f°(v₂))` on the grid.
pub fn source_mode(f: &InitialDensity, pot: &TorusPotential, n: i32, grid: H2Grid) -> Result<Vec<C64>> {
    check_homogeneous_1d(f, pot)?;
    grid.check()?;
    if n == 0 {
        return Err(Error::UndefinedDirection);
    }
    Ok(mode_data(f, pot.vhat([n, 0, 0]), n, grid).source)
}

// ∂_t H = -ik(v₁-v₂)H + iV̂ D(v₁)⟨H(·,v₂)⟩ - iV̂ D(v₂)⟨H(v₁,·)⟩ + S
fn rhs(md: &ModeData, nv: usize, h: f64, x: &[C64], out: &mut [C64], a: &mut [C64], b: &mut [C64]) {
    a.iter_mut().for_each(|z| *z = ZERO);
    for i in 0..nv {
        let row = &x[i * nv..(i + 1) * nv];
        let mut s = ZERO;
        for (aj, z) in a.iter_mut().zip(row) {
            *aj += z;
            s += z;
        }
        b[i] = s * h;
    }
    a.iter_mut().for_each(|z| *z *= h);
    for i in 0..nv {
        let base = i * nv;
        for j in 0..nv {
            let idx = base + j;
            out[idx] = C64::new(0.0, md.kv[j] - md.kv[i]) * x[idx] + md.ivd[i] * a[j] - md.ivd[j] * b[i] + md.source[idx];
        }
    }
}

/// Integration controls for [`evolve_h2`].
#[derive(Clone, Debug, PartialEq)]
pub struct H2Options {
    pub dt: f64,
    /// Retained modes `0 < |n| ≤ k_max`.
    pub k_max: i32,
    /// Output times; rounded to the step grid.
    pub times: Vec<f64>,
}

impl H2Options {
    pub fn new(times: Vec<f64>) -> Self {
        Self { dt: 1e-3, k_max: 8, times }
    }
}

/// Snapshots of `H²` and the size of the discarded potential tail `Σ_{|n| > K_H} |V̂(n)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct H2Trajectory {
    pub snapshots: Vec<ModeCorrelation>,
    pub dropped_tail: f64,
}

/// RK4 integration of `∂_t Ĥ_k + iL° Ĥ_k = Ŝ_k` from `Ĥ_k = 0`, modes in parallel.
pub fn evolve_h2(f: &InitialDensity, pot: &TorusPotential, grid: H2Grid, opts: &H2Options) -> Result<H2Trajectory> {
    check_homogeneous_1d(f, pot)?;
    grid.check()?;
    if !(opts.dt > 0.0) || opts.times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Input("H2 integration needs dt > 0 and nonnegative output times".into()));
    }
    let mut ns: Vec<i32> = pot.modes().iter().map(|(n, _)| n[0]).filter(|n| *n != 0 && n.abs() <= opts.k_max).collect();
    ns.sort_by_key(|n| (n.abs(), *n));
    let dropped_tail = pot.modes().iter().filter(|(n, _)| n[0].abs() > opts.k_max).map(|(_, c)| c.abs()).sum();
    let kmax = ns.iter().map(|n| n.abs()).max().unwrap_or(0);
    let cfl = TAU * kmax as f64 * grid.vmax * opts.dt;
    if cfl >= 0.5 {
        return Err(Error::Cfl(format!("|k| vmax dt = {cfl:.3} ≥ 0.5")));
    }
    let steps: Vec<usize> = opts.times.iter().map(|t| (t / opts.dt).round() as usize).collect();
    let last = steps.iter().copied().max().unwrap_or(0);
    let nv = grid.nv;
    let h = grid.h();
    let dt = opts.dt;
    let per_mode: Vec<Vec<Vec<C64>>> = ns
        .par_iter()
        .map(|&n| {
            let md = mode_data(f, pot.vhat([n, 0, 0]), n, grid);
            let len = nv * nv;
            let mut x = vec![ZERO; len];
            let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]);
            let (mut a, mut b) = (vec![ZERO; nv], vec![ZERO; nv]);
            let mut out = vec![Vec::new(); steps.len()];
            for s in 0..=last {
                for (o, &st) in out.iter_mut().zip(&steps) {
                    if st == s {
                        *o = x.clone();
                    }
                }
                if s == last {
                    break;
                }
                rhs(&md, nv, h, &x, &mut k1, &mut a, &mut b);
                for ((t, xi), ki) in tmp.iter_mut().zip(&x).zip(&k1) {
                    *t = xi + ki * (0.5 * dt);
                }
                rhs(&md, nv, h, &tmp, &mut k2, &mut a, &mut b);
                for ((t, xi), ki) in tmp.iter_mut().zip(&x).zip(&k2) {
                    *t = xi + ki * (0.5 * dt);
                }
                rhs(&md, nv, h, &tmp, &mut k3, &mut a, &mut b);
                for ((t, xi), ki) in tmp.iter_mut().zip(&x).zip(&k3) {
                    *t = xi + ki * dt;
                }
                rhs(&md, nv, h, &tmp, &mut k4, &mut a, &mut b);
                for (idx, xi) in x.iter_mut().enumerate() {
                    *xi += (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]) * (dt / 6.0);
                }
            }
            out
        })
        .collect();
    let snapshots = steps
        .iter()
        .enumerate()
        .map(|(si, &st)| ModeCorrelation {
            grid,
            t: st as f64 * dt,
            modes: ns.iter().zip(&per_mode).map(|(&n, m)| (n, m[si].clone())).collect(),
        })
        .collect();
    Ok(H2Trajectory { snapshots, dropped_tail })
}

/// Leading-order `N∂_t f` on the velocity grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Drive {
    pub grid: H2Grid,
    pub values: Vec<f64>,
    /// Largest imaginary part discarded from the mode sum.
    pub imag_residual: f64,
}

impl Drive {
    pub fn integral(&self) -> f64 {
        self.grid.h() * self.values.iter().sum::<f64>()
    }

    /// `∫ ψ · drive dv` by the grid sum.
    pub fn pairing(&self, psi: impl Fn(f64) -> f64) -> f64 {
        self.grid.h() * self.values.iter().enumerate().map(|(j, d)| psi(self.grid.v(j)) * d).sum::<f64>()
    }
}

// Flux form of the fourth-order central difference with zero end fluxes, so the sum telescopes.
fn d4_padded(g: &[C64], h: f64) -> Vec<C64> {
    let n = g.len() as i64;
    let at = |i: i64| if i < 0 || i >= n { ZERO } else { g[i as usize] };
    let flux = |i: i64| {
        if i < 0 || i >= n - 1 {
            ZERO
        } else {
            (7.0 * (at(i) + at(i + 1)) - at(i - 1) - at(i + 2)) / 12.0
        }
    };
    (0..n).map(|i| (flux(i) - flux(i - 1)) / h).collect()
}

/// `∂_v Σ_k (-ikV̂(k)) ∫ Ĥ_k(v, v_*) dv_*`, differentiated in fourth-order flux form
/// so the output telescopes to zero mass.
pub fn bogolyubov_drive(h2: &ModeCorrelation, pot: &TorusPotential) -> Drive {
    let nv = h2.grid.nv;
    let mut g = vec![ZERO; nv];
    for (n, _) in &h2.modes {
        let vh = pot.vhat([*n, 0, 0]);
        if vh == 0.0 {
            continue;
        }
        let b = h2.marginal(*n).expect("mode present");
        let c = -I * TAU * *n as f64 * vh;
        for (gi, bi) in g.iter_mut().zip(&b) {
            *gi += c * bi;
        }
    }
    let d = d4_padded(&g, h2.grid.h());
    let imag_residual = d.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Drive { grid: h2.grid, values: d.iter().map(|z| z.re).collect(), imag_residual }
}

/// `σ_φ² = Var_{f°}(φ) + Σ_k ∬ φ̂_{-k}(v₁) φ̂_k(v₂) Ĥ_k(v₁, v₂)` on the `H²` grid.
pub fn limiting_variance(phi: &Observable, f: &InitialDensity, h2: &ModeCorrelation) -> Result<f64> {
    if f.dim() != 1 || !f.is_homogeneous() {
        return Err(Error::Input("the variance formula is evaluated for homogeneous one-dimensional densities".into()));
    }
    let grid = h2.grid;
    let nv = grid.nv;
    let h = grid.h();
    let fv: Vec<f64> = (0..nv).map(|j| f.f(&[grid.v(j)])).collect();
    let mmax = phi.max_mode();
    let mass: f64 = h * fv.iter().sum::<f64>();
    let zero: Vec<f64> = (0..nv).map(|j| phi.mode_coefficient(0, grid.v(j)).re).collect();
    let mean = h * fv.iter().zip(&zero).map(|(a, b)| a * b).sum::<f64>() / mass;
    let mut second = 0.0;
    for j in 0..nv {
        let v = grid.v(j);
        second += h * fv[j] * (zero[j] - mean).powi(2);
        for m in (-mmax..=mmax).filter(|m| *m != 0) {
            second += h * fv[j] * phi.mode_coefficient(m, v).norm_sqr();
        }
    }
    let mut pair = ZERO;
    for (n, hk) in &h2.modes {
        if n.abs() > mmax {
            continue;
        }
        let a: Vec<C64> = (0..nv).map(|j| phi.mode_coefficient(-n, grid.v(j))).collect();
        let b: Vec<C64> = (0..nv).map(|j| phi.mode_coefficient(*n, grid.v(j))).collect();
        for i in 0..nv {
            if a[i] == ZERO {
                continue;
            }
            let row: C64 = hk[i * nv..(i + 1) * nv].iter().zip(&b).map(|(x, y)| x * y).sum();
            pair += a[i] * row;
        }
    }
    let s2 = second + pair.re * h * h;
    let tol = 1e-10 * second.max(1.0);
    if s2 < -tol {
        return Err(Error::NumericalInconsistency(format!("negative limiting variance {s2:e}")));
    }
    Ok(s2)
}

/// Trapezoid solution of `ρ(τ) = F(τ) + ∫_0^τ K(τ - r) ρ(r) dr` on `τ_j = j·dt`.
pub fn solve_volterra(forcing: &[C64], kernel: &[C64], dt: f64) -> Vec<C64> {
    let m = forcing.len();
    let mut rho = Vec::with_capacity(m);
    if m == 0 {
        return rho;
    }
    rho.push(forcing[0]);
    let denom = 1.0 - 0.5 * dt * kernel[0];
    for n in 1..m {
        let mut s = 0.5 * kernel[n] * rho[0];
        for j in 1..n {
            s += kernel[n - j] * rho[j];
        }
        rho.push((forcing[n] + dt * s) / denom);
    }
    rho
}

/// `Σ_y Δy w(y) e^{-iκ(y)τ_j}` for `j < m`, trapezoid in `y`, phases advanced by recurrence.
fn oscillatory_sums(w: &[C64], kappa: &[f64], dy: f64, dt: f64, m: usize) -> Vec<C64> {
    let step: Vec<C64> = kappa.iter().map(|k| C64::from_polar(1.0, -k * dt)).collect();
    let mut ph: Vec<C64> = w.iter().enumerate().map(|(i, x)| x * trap_w(i, w.len()) * dy).collect();
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        if j % 256 == 0 && j > 0 {
            for (i, p) in ph.iter_mut().enumerate() {
                *p = w[i] * trap_w(i, w.len()) * dy * C64::from_polar(1.0, -kappa[i] * dt * j as f64);
            }
        }
        out.push(ph.iter().sum());
        for (p, s) in ph.iter_mut().zip(&step) {
            *p *= s;
        }
    }
    out
}

fn trap_w(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Exact weights of `∫_0^dt e^{-iκu} (linear interpolant) du`: `Φ(τ+dt) = zΦ(τ) + w₀ρ(τ) + w₁ρ(τ+dt)`.
fn exp_weights(kappa: f64, dt: f64) -> (C64, C64, C64) {
    let c = I * kappa;
    let x = c * dt;
    let z = (-x).exp();
    let (e1, a) = if x.norm() < 1e-3 {
        (dt * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0), dt * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0))
    } else {
        ((1.0 - z) / c, (1.0 - z * (1.0 + x)) / (c * c * dt))
    };
    (z, a, e1 - a)
}

/// Integration controls for the propagator route.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveOptions {
    pub dt: f64,
    /// Nodes of the projection grid along `k̂`.
    pub ny: usize,
}

impl Default for DriveOptions {
    fn default() -> Self {
        Self { dt: 1e-3, ny: 801 }
    }
}

/// `⟨ψ, N∂_t f⟩(t_j)` at `t_j = j·dt`, one column per test function.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveHistory {
    pub dt: f64,
    pub tests: Vec<VelocityTest>,
    pub values: Vec<Vec<f64>>,
}

impl DriveHistory {
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\nt");
        for (i, _) in self.tests.iter().enumerate() {
            let _ = write!(s, ",test{i}");
        }
        s.push('\n');
        for (j, row) in self.values.iter().enumerate() {
            let _ = write!(s, "{}", j as f64 * self.dt);
            for v in row {
                let _ = write!(s, ",{v:.12e}");
            }
            s.push('\n');
        }
        s
    }
}

fn line_weights(f: &InitialDensity, proj: &ProjectedDensity, tests: &[VelocityTest]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = f.dim();
    let dir = proj.dir;
    let kv = [proj.knorm * dir[0], proj.knorm * dir[1]];
    let r = f.support_radius();
    let perp = [-dir[1], dir[0]];
    tests
        .iter()
        .map(|test| {
            let cols: Vec<(f64, f64)> = (0..proj.len())
                .into_par_iter()
                .map(|i| {
                    let y = proj.y(i);
                    let at = |s: f64| [y * dir[0] + s * perp[0], y * dir[1] + s * perp[1]];
                    let term = |v: [f64; 2]| {
                        let vv = [v[0], v[1], 0.0];
                        let g = test.grad(v);
                        let kg = kv[0] * g[0] + if d > 1 { kv[1] * g[1] } else { 0.0 };
                        let gf = f.grad_f(&vv[..d]);
                        let kf = kv[0] * gf[0] + if d > 1 { kv[1] * gf[1] } else { 0.0 };
                        (kg * kf, kg * f.f(&vv[..d]))
                    };
                    if d == 1 {
                        return term(at(0.0));
                    }
                    let w = (r * r - y * y).max(0.0).sqrt();
                    if w == 0.0 {
                        return (0.0, 0.0);
                    }
                    (simpson(|s| term(at(s)).0, -w, w, 400), simpson(|s| term(at(s)).1, -w, w, 400))
                })
                .collect();
            (cols.iter().map(|c| c.0).collect(), cols.iter().map(|c| c.1).collect())
        })
        .collect()
}

/// Resolvent averages `ρ_F(τ) = ⟨E_τ f°⟩`, `ρ_D(τ) = ⟨E_τ k·∇f°⟩` for one mode.
struct ModeResolvent {
    rho_f: Vec<C64>,
    rho_d: Vec<C64>,
}

fn mode_resolvent(proj: &ProjectedDensity, vhat: f64, dt: f64, m: usize) -> ModeResolvent {
    let kappa: Vec<f64> = (0..proj.len()).map(|i| proj.knorm * proj.y(i)).collect();
    let pi: Vec<C64> = proj.pi.iter().map(|x| C64::new(*x, 0.0)).collect();
    let dpi: Vec<C64> = proj.dpi.iter().map(|x| C64::new(proj.knorm * x, 0.0)).collect();
    let fd = oscillatory_sums(&dpi, &kappa, proj.dy, dt, m);
    let ff = oscillatory_sums(&pi, &kappa, proj.dy, dt, m);
    let kernel: Vec<C64> = fd.iter().map(|z| I * vhat * z).collect();
    ModeResolvent { rho_f: solve_volterra(&ff, &kernel, dt), rho_d: solve_volterra(&fd, &kernel, dt) }
}

/// Weak pairings of the Bogolyubov drive through the propagator representation:
/// per `±k` pair, `⟨ψ, drive⟩ = -2V̂² Re ∫_0^t Σ_y Δy [a(y,τ)Ψ_D(y) - b(y,τ)Ψ_F(y)] dτ` with
/// `Ψ_D, Ψ_F` the line integrals of `(k·∇ψ)(k·∇f°)` and `(k·∇ψ) f°`.
pub fn drive_pairings(f: &InitialDensity, pot: &TorusPotential, tests: &[VelocityTest], t_end: f64, opts: DriveOptions) -> Result<DriveHistory> {
    if f.dim() != pot.dim() || f.dim() > 2 {
        return Err(Error::Input("drive pairings need matching dimensions d ≤ 2".into()));
    }
    if !f.is_homogeneous() {
        return Err(Error::Input("drive pairings need a homogeneous background".into()));
    }
    if !(opts.dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Input("drive pairings need dt > 0 and t_end ≥ 0".into()));
    }
    let m = (t_end / opts.dt).ceil() as usize + 1;
    let dt = opts.dt;
    let parts: Vec<Result<Vec<Vec<f64>>>> = pot
        .half_modes()
        .iter()
        .filter(|(_, vh)| *vh != 0.0)
        .map(|&(n, vh)| {
            let proj = ProjectedDensity::from_density(f, n, opts.ny)?;
            let res = mode_resolvent(&proj, vh, dt, m);
            let lw = line_weights(f, &proj, tests);
            let ny = proj.len();
            let kappa: Vec<f64> = (0..ny).map(|i| proj.knorm * proj.y(i)).collect();
            let wts: Vec<(C64, C64, C64)> = kappa.iter().map(|k| exp_weights(*k, dt)).collect();
            let step: Vec<C64> = kappa.iter().map(|k| C64::from_polar(1.0, -k * dt)).collect();
            let mut phase = vec![C64::new(1.0, 0.0); ny];
            let mut phi_d = vec![ZERO; ny];
            let mut phi_f = vec![ZERO; ny];
            let ivh = I * vh;
            let mut p = vec![ZERO; tests.len()];
            let mut prev = vec![ZERO; tests.len()];
            let mut rows = Vec::with_capacity(m);
            for j in 0..m {
                if j > 0 {
                    for i in 0..ny {
                        let (z, w0, w1) = wts[i];
                        phi_d[i] = z * phi_d[i] + w0 * res.rho_d[j - 1] + w1 * res.rho_d[j];
                        phi_f[i] = z * phi_f[i] + w0 * res.rho_f[j - 1] + w1 * res.rho_f[j];
                        phase[i] = if j % 256 == 0 { C64::from_polar(1.0, -kappa[i] * dt * j as f64) } else { phase[i] * step[i] };
                    }
                }
                let crf = res.rho_f[j].conj();
                let crd = res.rho_d[j].conj();
                let mut cur = vec![ZERO; tests.len()];
                for i in 0..ny {
                    let w = proj.dy * trap_w(i, ny);
                    let a = (phase[i] + ivh * phi_d[i]) * crf - ivh * phi_f[i] * crd;
                    let b = phase[i] * crd;
                    for (c, (psd, psf)) in cur.iter_mut().zip(&lw) {
                        *c += w * (a * psd[i] - b * psf[i]);
                    }
                }
                if j > 0 {
                    for ((pp, c), pr) in p.iter_mut().zip(&cur).zip(&prev) {
                        *pp += 0.5 * dt * (c + pr);
                    }
                }
                rows.push(p.iter().map(|z| -2.0 * vh * vh * z.re).collect());
                prev = cur;
            }
            Ok(rows)
        })
        .collect();
    let mut values = vec![vec![0.0; tests.len()]; m];
    for part in parts {
        for (row, add) in values.iter_mut().zip(part?) {
            for (a, b) in row.iter_mut().zip(add) {
                *a += b;
            }
        }
    }
    Ok(DriveHistory { dt, tests: tests.to_vec(), values })
}

/// Linearized-Vlasov adjoint `ψ_t` of a one-dimensional observable: the fluctuation
/// `√N(∫φ dμ_N^t - ∫φ F^t)` is asymptotically `√N ∫ψ_t d(μ_N^0 - F°)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointObservable {
    pub phi: Observable,
    pub t: f64,
    /// Tabulation grid `-R + j·h` of the interaction part.
    pub v0: f64,
    pub h: f64,
    /// `(n, V̂(n), Q_n)` for `n > 0`, with `ψ̂_n = e^{-ik v t} φ̂_{-n} + iV̂ Q_n`.
    pub modes: Vec<(i32, f64, Vec<C64>)>,
    mean: f64,
    variance: f64,
}

impl AdjointObservable {
    /// `ψ̂_n(v)` for `n > 0`.
    pub fn mode(&self, n: i32, v: f64) -> C64 {
        let k = TAU * n as f64;
        let free = C64::from_polar(1.0, -k * v * self.t) * self.phi.mode_coefficient(-n, v);
        match self.modes.iter().find(|(m, _, _)| *m == n) {
            Some((_, vh, q)) => free + I * *vh * cubic_interp(q, self.v0, self.h, v),
            None => free,
        }
    }

    /// `ψ(x, v) = φ̂_0(v) + 2 Re Σ_{n>0} e^{-2πinx} ψ̂_n(v)`.
    pub fn eval(&self, x: f64, v: f64) -> f64 {
        let mut s = self.phi.mode_coefficient(0, v).re;
        for n in 1..=self.phi.max_mode() {
            s += 2.0 * (C64::from_polar(1.0, -TAU * n as f64 * x) * self.mode(n, v)).re;
        }
        s
    }

    /// `∫ψ dF° = ∫φ̂_0 f°`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `Var_{F°}(ψ_t)`, the limiting variance of the fluctuation.
    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Resolution of [`adjoint_observable`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjointOptions {
    pub dt: f64,
    pub nv: usize,
}

impl Default for AdjointOptions {
    fn default() -> Self {
        Self { dt: 1e-3, nv: 2001 }
    }
}

/// Solve `∂_s u = -ikv u + iV̂⟨k f°' u⟩` backward from `u = φ̂_{-n}` for each mode of `φ`.
pub fn adjoint_observable(phi: &Observable, f: &InitialDensity, pot: &TorusPotential, t: f64, opts: AdjointOptions) -> Result<AdjointObservable> {
    check_homogeneous_1d(f, pot)?;
    if !(opts.dt > 0.0 && t >= 0.0 && opts.nv >= 8) {
        return Err(Error::Input("adjoint needs dt > 0, t ≥ 0 and nv ≥ 8".into()));
    }
    let r = f.support_radius();
    let nv = opts.nv;
    let h = 2.0 * r / (nv - 1) as f64;
    let vs: Vec<f64> = (0..nv).map(|j| -r + j as f64 * h).collect();
    let fv: Vec<f64> = vs.iter().map(|v| f.f(&[*v])).collect();
    let steps = (t / opts.dt).round() as usize;
    let dt = if steps > 0 { t / steps as f64 } else { opts.dt };
    let m = steps + 1;
    let mut modes = Vec::new();
    for n in 1..=phi.max_mode() {
        let vh = pot.vhat([n, 0, 0]);
        if vh == 0.0 {
            continue;
        }
        let k = TAU * n as f64;
        let kappa: Vec<f64> = vs.iter().map(|v| k * v).collect();
        let d: Vec<C64> = vs.iter().map(|v| C64::new(k * f.grad_f(&[*v])[0], 0.0)).collect();
        let kernel: Vec<C64> = oscillatory_sums(&d, &kappa, h, dt, m).iter().map(|z| I * vh * z).collect();
        let dphi: Vec<C64> = vs.iter().zip(&d).map(|(v, dv)| dv * phi.mode_coefficient(-n, *v)).collect();
        let forcing = oscillatory_sums(&dphi, &kappa, h, dt, m);
        let mm = solve_volterra(&forcing, &kernel, dt);
        let q: Vec<C64> = kappa
            .iter()
            .map(|&kv| {
                let (z, w0, w1) = exp_weights(kv, dt);
                let mut acc = ZERO;
                for j in 1..m {
                    acc = z * acc + w0 * mm[j - 1] + w1 * mm[j];
                }
                acc
            })
            .collect();
        modes.push((n, vh, q));
    }
    let mut adj = AdjointObservable { phi: phi.clone(), t, v0: -r, h, modes, mean: 0.0, variance: 0.0 };
    let (mut mean, mut second) = (0.0, 0.0);
    for (j, &v) in vs.iter().enumerate() {
        let w = h * trap_w(j, nv) * fv[j];
        let p0 = phi.mode_coefficient(0, v).re;
        mean += w * p0;
        second += w * p0 * p0;
        for n in 1..=phi.max_mode() {
            second += 2.0 * w * adj.mode(n, v).norm_sqr();
        }
    }
    adj.mean = mean;
    adj.variance = second - mean * mean;
    Ok(adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn setup() -> (InitialDensity, TorusPotential) {
        (presets::homogeneous_1d(), presets::potential_1d_weak())
    }

    #[test]
    fn source_matches_hand_expansion() {
        let (f, pot) = setup();
        let grid = H2Grid::for_density(&f, 41);
        let s = source_mode(&f, &pot, 1, grid).unwrap();
        // f = (1 - v²)⁴ / Z with Z = 256/315, f' = -8v(1 - v²)³ / Z
        let z = 256.0 / 315.0;
        let fv = |v: f64| (1.0 - v * v).powi(4) / z;
        let dv = |v: f64| -8.0 * v * (1.0 - v * v).powi(3) / z;
        let k = TAU;
        for (i, j) in [(5, 30), (12, 12), (20, 7), (33, 18), (26, 39)] {
            let (a, b) = (grid.v(i), grid.v(j));
            let want = C64::new(0.0, k * 0.1 * (dv(a) * fv(b) - fv(a) * dv(b)));
            assert!((s[i * 41 + j] - want).norm() < 1e-12, "{} {want}", s[i * 41 + j]);
        }
    }

    #[test]
    fn source_exchange_form() {
        let (f, pot) = setup();
        let grid = H2Grid::for_density(&f, 33);
        let sp = source_mode(&f, &pot, 1, grid).unwrap();
        let sm = source_mode(&f, &pot, -1, grid).unwrap();
        for i in 0..33 {
            for j in 0..33 {
                assert!((sp[i * 33 + j] - sm[j * 33 + i]).norm() < 1e-15);
            }
        }
        let zero = source_mode(&f, &TorusPotential::zero(1), 1, grid).unwrap();
        assert!(zero.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn zero_potential_gives_zero_correlation() {
        let (f, _) = setup();
        let tr = evolve_h2(&f, &TorusPotential::cosine_1d(0.0), H2Grid::for_density(&f, 33), &H2Options::new(vec![0.5])).unwrap();
        assert!(tr.snapshots[0].max_abs() == 0.0);
    }

    #[test]
    fn first_step_is_duhamel_leading_term() {
        let (f, pot) = setup();
        let grid = H2Grid::for_density(&f, 33);
        let s = source_mode(&f, &pot, 1, grid).unwrap();
        let smax = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut errs = Vec::new();
        for dt in [1e-3, 5e-4] {
            let opts = H2Options { dt, k_max: 8, times: vec![dt] };
            let tr = evolve_h2(&f, &pot, grid, &opts).unwrap();
            let h = tr.snapshots[0].mode(1).unwrap();
            errs.push(h.iter().zip(&s).map(|(a, b)| (a - b * dt).norm()).fold(0.0, f64::max) / (smax * dt));
        }
        // relative error O(dt): halves with the step
        assert!(errs[0] < 0.05 && (errs[1] / errs[0] - 0.5).abs() < 0.05, "{errs:?}");
    }

    #[test]
    fn symmetries_survive_and_match_half_step() {
        let (f, pot) = setup();
        let grid = H2Grid::for_density(&f, 49);
        let a = evolve_h2(&f, &pot, grid, &H2Options { dt: 2e-3, k_max: 8, times: vec![4.0] }).unwrap();
        let b = evolve_h2(&f, &pot, grid, &H2Options { dt: 1e-3, k_max: 8, times: vec![4.0] }).unwrap();
        let (ha, hb) = (&a.snapshots[0], &b.snapshots[0]);
        assert!(ha.reality_error() < 1e-9 && ha.exchange_error() < 1e-9);
        let diff = ha.mode(1).unwrap().iter().zip(hb.mode(1).unwrap()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8 * hb.max_abs().max(1.0), "{diff}");
    }

    #[test]
    fn cfl_and_input_guards() {
        let (f, pot) = setup();
        let grid = H2Grid::for_density(&f, 33);
        assert!(matches!(evolve_h2(&f, &pot, grid, &H2Options { dt: 0.2, k_max: 8, times: vec![1.0] }), Err(Error::Cfl(_))));
        assert!(evolve_h2(&presets::inhomogeneous_1d(), &pot, grid, &H2Options::new(vec![1.0])).is_err());
        assert!(matches!(source_mode(&f, &pot, 0, grid), Err(Error::UndefinedDirection)));
    }

    #[test]
    fn dropped_tail_reported() {
        let (f, _) = setup();
        let pot = TorusPotential::from_half(1, &[([1, 0, 0], 0.1), ([3, 0, 0], 0.01)]).unwrap();
        let opts = H2Options { dt: 1e-3, k_max: 2, times: vec![0.0] };
        let tr = evolve_h2(&f, &pot, H2Grid::for_density(&f, 17), &opts).unwrap();
        assert!((tr.dropped_tail - 0.02).abs() < 1e-15);
        assert_eq!(tr.snapshots[0].modes.len(), 2);
    }

    #[test]
    fn drive_vanishes_for_zero_correlation_and_has_zero_mass() {
        let (f, pot) = setup();
        let grid = H2Grid::for_density(&f, 65);
        let z = ModeCorrelation::zero(grid, &[-1, 1]);
        assert!(bogolyubov_drive(&z, &pot).values.iter().all(|x| *x == 0.0));
        let tr = evolve_h2(&f, &pot, grid, &H2Options::new(vec![1.0])).unwrap();
        let d = bogolyubov_drive(&tr.snapshots[0], &pot);
        assert!(d.integral().abs() < 1e-12 && d.imag_residual < 1e-12);
    }

    #[test]
    fn variance_at_time_zero_and_constant_observable() {
        let (f, pot) = setup();
        let grid = H2Grid::for_density(&f, 65);
        let tr = evolve_h2(&f, &pot, grid, &H2Options::new(vec![0.0, 1.0])).unwrap();
        // Var(cos 2πx - v sin 2πx) = 1/2 + ⟨v²⟩/2 with ⟨v²⟩ = 1/11 for the q = 4 bump
        let s0 = limiting_variance(&presets::obs_cos_x(), &f, &tr.snapshots[0]).unwrap();
        assert!((s0 - 6.0 / 11.0).abs() < 1e-8, "{s0}");
        let c = Observable::constant("c", 2.5);
        assert!(limiting_variance(&c, &f, &tr.snapshots[1]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn variance_routes_agree() {
        let (f, pot) = (presets::homogeneous_1d(), presets::potential_1d_homogeneous());
        let phi = presets::obs_cos_x();
        let tr = evolve_h2(&f, &pot, H2Grid::for_density(&f, 129), &H2Options::new(vec![1.0])).unwrap();
        let s_grid = limiting_variance(&phi, &f, &tr.snapshots[0]).unwrap();
        let adj = adjoint_observable(&phi, &f, &pot, 1.0, AdjointOptions { dt: 1e-3, nv: 1601 }).unwrap();
        assert!((s_grid - adj.variance()).abs() < 1e-5 * s_grid, "{s_grid} {}", adj.variance());
        assert!((adj.mean()).abs() < 1e-15);
    }

    #[test]
    fn adjoint_without_interaction_is_free_transport() {
        let f = presets::homogeneous_1d();
        let phi = presets::obs_cos_x();
        let adj = adjoint_observable(&phi, &f, &TorusPotential::cosine_1d(0.0), 0.7, AdjointOptions::default()).unwrap();
        for (x, v) in [(0.1, 0.3), (0.8, -0.6)] {
            assert!((adj.eval(x, v) - phi.eval(&[x + v * 0.7], &[v])).abs() < 1e-13);
        }
    }

    #[test]
    fn drive_routes_agree_in_one_dimension() {
        let (f, pot) = setup();
        let tr = evolve_h2(&f, &pot, H2Grid::for_density(&f, 129), &H2Options::new(vec![1.0])).unwrap();
        let grid_pair = bogolyubov_drive(&tr.snapshots[0], &pot).pairing(|v| v.powi(4));
        let hist = drive_pairings(&f, &pot, &[VelocityTest::monomial(4, 0)], 1.0, DriveOptions::default()).unwrap();
        let prop = hist.values[1000][0];
        assert!((grid_pair - prop).abs() < 1e-4 * prop.abs(), "{grid_pair} {prop}");
    }

    #[test]
    fn one_dimensional_drive_decays() {
        let (f, pot) = setup();
        let hist = drive_pairings(&f, &pot, &[VelocityTest::monomial(4, 0)], 6.0, DriveOptions::default()).unwrap();
        let early = hist.values[1000][0].abs();
        let late = hist.values[6000][0].abs();
        assert!(late < 1e-3 * early, "{early} {late}");
    }

    #[test]
    fn volterra_exponential() {
        // ρ' = cρ, ρ(0) = 1 written as ρ = 1 + c∫ρ
        let c = C64::new(-0.7, 1.3);
        let mut errs = Vec::new();
        for dt in [0.01, 0.005] {
            let m = (2.0 / dt) as usize + 1;
            let rho = solve_volterra(&vec![C64::new(1.0, 0.0); m], &vec![c; m], dt);
            errs.push((rho[m - 1] - (c * 2.0).exp()).norm());
        }
        assert!(errs[0] < 1e-4 && (errs[0] / errs[1] - 4.0).abs() < 0.1, "{errs:?}");
    }

    #[test]
    fn exponential_weights_integrate_linear_data_exactly() {
        for kappa in [0.0, 1e-4, 0.3, 40.0] {
            let dt = 0.01;
            let (z, w0, w1) = exp_weights(kappa, dt);
            assert!((z - C64::from_polar(1.0, -kappa * dt)).norm() < 1e-15);
            // ∫_0^dt e^{-iκ(dt-s)} (a + b s) ds
            let (a, b) = (0.4, -2.0);
            let want = simpson(|s| ((-kappa * (dt - s)).cos()) * (a + b * s), 0.0, dt, 200);
            let wim = simpson(|s| ((-kappa * (dt - s)).sin()) * (a + b * s), 0.0, dt, 200);
            let got = w0 * a + w1 * (a + b * dt);
            assert!((got - C64::new(want, wim)).norm() < 1e-13, "{kappa}");
        }
    }
}
