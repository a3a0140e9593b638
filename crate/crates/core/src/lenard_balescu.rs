//! Dispersion function, Lenard–Balescu operator, entropy production and the resolvent limit
//! `T_ω`, together with the Laplace-transform consistency check against the Bogolyubov drive.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bogolyubov::{drive_pairings, DriveOptions};
use crate::error::{Error, Result};
use crate::model::{InitialDensity, ModeIndex, TorusPotential};
use crate::numerics::{cubic_interp, simpson};

const I: C64 = C64::new(0.0, 1.0);

fn direction(n: ModeIndex, dim: usize) -> Result<([f64; 2], f64)> {
    let n1 = if dim > 1 { n[1] as f64 } else { 0.0 };
    let m = (n[0] as f64).hypot(n1);
    if m == 0.0 {
        return Err(Error::UndefinedDirection);
    }
    Ok(([n[0] as f64 / m, n1 / m], TAU * m))
}

/// Projection `π_k(y) = ∫ δ(y - k̂·v) f(v) dv` on a uniform `y`-grid, with `π_k'`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedDensity {
    pub n: ModeIndex,
    /// Unit vector `k̂`.
    pub dir: [f64; 2],
    /// `|k| = 2π|n|`.
    pub knorm: f64,
    pub y0: f64,
    pub dy: f64,
    pub pi: Vec<f64>,
    pub dpi: Vec<f64>,
}

impl ProjectedDensity {
    /// Line integrals of `f°` and `k̂·∇f°` across the support, `ny` nodes on `[-R, R]`.
    pub fn from_density(f: &InitialDensity, n: ModeIndex, ny: usize) -> Result<Self> {
        let d = f.dim();
        if d > 2 {
            return Err(Error::Input("projections are implemented for d = 1, 2".into()));
        }
        let (dir, knorm) = direction(n, d)?;
        let r = f.support_radius();
        let ny = ny.max(8);
        let dy = 2.0 * r / (ny - 1) as f64;
        let perp = [-dir[1], dir[0]];
        let vals: Vec<(f64, f64)> = (0..ny)
            .into_par_iter()
            .map(|i| {
                let y = -r + i as f64 * dy;
                if d == 1 {
                    let v = [y * dir[0]];
                    return (f.f(&v), dir[0] * f.grad_f(&v)[0]);
                }
                let w = (r * r - y * y).max(0.0).sqrt();
                if w == 0.0 {
                    return (0.0, 0.0);
                }
                let at = |s: f64| [y * dir[0] + s * perp[0], y * dir[1] + s * perp[1]];
                let p = simpson(|s| f.f(&at(s)), -w, w, 600);
                let dp = simpson(
                    |s| {
                        let g = f.grad_f(&at(s));
                        dir[0] * g[0] + dir[1] * g[1]
                    },
                    -w,
                    w,
                    600,
                );
                (p, dp)
            })
            .collect();
        Ok(Self { n, dir, knorm, y0: -r, dy, pi: vals.iter().map(|v| v.0).collect(), dpi: vals.iter().map(|v| v.1).collect() })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y0 + i as f64 * self.dy
    }

    /// Trapezoid mass `∫ π_k dy`.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.pi, self.dy)
    }

    /// `y π_k'(y) ≤ tol` everywhere.
    pub fn is_vlasov_stable(&self, tol: f64) -> bool {
        (0..self.len()).all(|i| self.y(i) * self.dpi[i] <= tol)
    }

    /// Projection for `-k`: `π_{-k}(y) = π_k(-y)`.
    pub fn reflected(&self) -> Self {
        let last = self.y(self.len() - 1);
        Self {
            n: [-self.n[0], -self.n[1], -self.n[2]],
            dir: [-self.dir[0], -self.dir[1]],
            knorm: self.knorm,
            y0: -last,
            dy: self.dy,
            pi: self.pi.iter().rev().copied().collect(),
            dpi: self.dpi.iter().rev().map(|v| -v).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("y,pi,dpi\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{:.8e},{:.10e},{:.10e}", self.y(i), self.pi[i], self.dpi[i]);
        }
        s
    }
}

fn trapezoid(v: &[f64], h: f64) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => 0.0,
        n => h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1])),
    }
}

/// `∫ g(y)/(y - z) dy` for the piecewise-linear interpolant of `g` on the grid `y0 + m·dy`.
/// A real `z` is read as `z + i0·side`.
pub fn cauchy_linear<G: Fn(usize) -> C64>(y0: f64, dy: f64, len: usize, g: G, z: C64, side: f64) -> C64 {
    if len < 2 {
        return C64::new(0.0, 0.0);
    }
    let mut total = g(len - 1) - g(0);
    let mut prev_slope = C64::new(0.0, 0.0);
    let mut gm = g(0);
    for m in 0..len {
        let ym = y0 + m as f64 * dy;
        let next = if m + 1 < len { Some(g(m + 1)) } else { None };
        let slope = next.map_or(C64::new(0.0, 0.0), |gn| (gn - gm) / dy);
        let mut coef = (prev_slope - slope) * (z - ym);
        if m == 0 {
            coef -= gm;
        }
        if m + 1 == len {
            coef += gm;
        }
        if coef != C64::new(0.0, 0.0) {
            let d = C64::new(ym, 0.0) - z;
            let ln = if z.im != 0.0 {
                Some(d.ln())
            } else if d.re != 0.0 {
                Some(C64::new(d.re.abs().ln(), if d.re < 0.0 { -side.signum() * PI } else { 0.0 }))
            } else {
                None
            };
            if let Some(ln) = ln {
                total += coef * ln;
            }
        }
        prev_slope = slope;
        if let Some(gn) = next {
            gm = gn;
        }
    }
    total
}

fn cauchy_real(y0: f64, dy: f64, g: &[f64], z: C64, side: f64) -> C64 {
    cauchy_linear(y0, dy, g.len(), |i| C64::new(g[i], 0.0), z, side)
}

/// Principal value `PV ∫ g(u)/(u - x) du` by singularity subtraction: midpoint nodes placed so the
/// pole sits on a cell edge, `g` interpolated cubically, plus the analytic log term.
/// Returns `(PV, g(x))`.
pub fn principal_value(y0: f64, dy: f64, g: &[f64], x: f64, refine: usize) -> (f64, f64) {
    let a = y0;
    let b = y0 + (g.len() - 1) as f64 * dy;
    let gx = cubic_interp(g, y0, dy, x);
    if x <= a || x >= b {
        let s: f64 = (0..g.len())
            .map(|j| {
                let u = y0 + j as f64 * dy;
                let w = if j == 0 || j + 1 == g.len() { 0.5 } else { 1.0 };
                if u == x {
                    0.0
                } else {
                    w * dy * g[j] / (u - x)
                }
            })
            .sum();
        return (s, gx);
    }
    let delta = dy / refine.max(1) as f64;
    let jlo = ((a - x) / delta).floor() as i64;
    let jhi = ((b - x) / delta).ceil() as i64 - 1;
    let mut s = 0.0;
    for j in jlo..=jhi {
        let c0 = (x + j as f64 * delta).max(a);
        let c1 = (x + (j + 1) as f64 * delta).min(b);
        let u = 0.5 * (c0 + c1);
        s += (c1 - c0) * (cubic_interp(g, y0, dy, u) - gx) / (u - x);
    }
    (s + gx * ((b - x) / (x - a)).ln(), gx)
}

/// Evaluation point of the dispersion function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frequency {
    /// Off-axis `ω` with `Im ω ≠ 0`.
    Complex(C64),
    /// Boundary value at real `y`, approached from `side = +1` (above) or `-1` (below).
    Boundary { y: f64, side: f64 },
}

/// `ε°(k, ω) = 1 - V̂(k) ∫ π_k'(u) / (u - ω/|k|) du`.
pub fn dispersion_projected(proj: &ProjectedDensity, vhat: f64, w: Frequency) -> Result<C64> {
    if vhat == 0.0 {
        return Ok(C64::new(1.0, 0.0));
    }
    match w {
        Frequency::Complex(z) => {
            if z.im == 0.0 {
                return Err(Error::Input("real frequency needs an explicit side, use Frequency::Boundary".into()));
            }
            Ok(1.0 - vhat * cauchy_real(proj.y0, proj.dy, &proj.dpi, z / proj.knorm, 0.0))
        }
        Frequency::Boundary { y, side } => {
            let (pv, g) = principal_value(proj.y0, proj.dy, &proj.dpi, y / proj.knorm, 1);
            Ok(1.0 - vhat * C64::new(pv, side.signum() * PI * g))
        }
    }
}

/// Cached projections of `f°` along every mode of `V`.
pub struct Dispersion {
    vhat: Vec<(ModeIndex, f64)>,
    proj: Vec<ProjectedDensity>,
    dim: usize,
}

impl Dispersion {
    pub fn new(f: &InitialDensity, pot: &TorusPotential, ny: usize) -> Result<Self> {
        if f.dim() != pot.dim() {
            return Err(Error::Input("density and potential dimensions differ".into()));
        }
        let vhat: Vec<(ModeIndex, f64)> = pot.modes().to_vec();
        let proj = vhat.iter().map(|(n, _)| ProjectedDensity::from_density(f, *n, ny)).collect::<Result<Vec<_>>>()?;
        Ok(Self { vhat, proj, dim: f.dim() })
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.vhat.iter().map(|(n, _)| *n)
    }

    pub fn projection(&self, n: ModeIndex) -> Option<&ProjectedDensity> {
        self.vhat.iter().position(|(m, _)| *m == n).map(|i| &self.proj[i])
    }

    /// `ε°(k, ω)` for `k = 2πn`; modes outside the potential have `V̂ = 0` and `ε = 1`.
    pub fn eval(&self, n: ModeIndex, w: Frequency) -> Result<C64> {
        direction(n, self.dim)?;
        match self.vhat.iter().position(|(m, _)| *m == n) {
            Some(i) => dispersion_projected(&self.proj[i], self.vhat[i].1, w),
            None => Ok(C64::new(1.0, 0.0)),
        }
    }

    /// `k, y, Re ε, Im ε` rows for the boundary values `y + i0·side` at the given frequencies.
    pub fn scan_csv(&self, ys: &[f64], side: f64) -> Result<String> {
        let mut s = String::from("k1,k2,y,re_eps,im_eps\n");
        for (n, _) in &self.vhat {
            for &y in ys {
                let e = self.eval(*n, Frequency::Boundary { y, side })?;
                let _ = writeln!(s, "{},{},{:.6e},{:.12e},{:.12e}", n[0], n[1], y, e.re, e.im);
            }
        }
        Ok(s)
    }
}

/// Velocity-space test function for weak pairings.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum VelocityTest {
    /// `Σ c v_1^a v_2^b`.
    Polynomial(Vec<(f64, [u32; 2])>),
    /// `exp(-|v|²/w²)`.
    Gaussian(f64),
}

fn pw(x: f64, a: u32) -> f64 {
    x.powi(a as i32)
}

impl VelocityTest {
    pub fn monomial(a: u32, b: u32) -> Self {
        VelocityTest::Polynomial(vec![(1.0, [a, b])])
    }

    pub fn eval(&self, v: [f64; 2]) -> f64 {
        match self {
            VelocityTest::Polynomial(terms) => terms.iter().map(|(c, [a, b])| c * pw(v[0], *a) * pw(v[1], *b)).sum(),
            VelocityTest::Gaussian(w) => (-(v[0] * v[0] + v[1] * v[1]) / (w * w)).exp(),
        }
    }

    pub fn grad(&self, v: [f64; 2]) -> [f64; 2] {
        match self {
            VelocityTest::Polynomial(terms) => {
                let mut g = [0.0; 2];
                for (c, [a, b]) in terms {
                    if *a > 0 {
                        g[0] += c * *a as f64 * pw(v[0], a - 1) * pw(v[1], *b);
                    }
                    if *b > 0 {
                        g[1] += c * *b as f64 * pw(v[0], *a) * pw(v[1], b - 1);
                    }
                }
                g
            }
            VelocityTest::Gaussian(w) => {
                let e = self.eval(v);
                [-2.0 * v[0] / (w * w) * e, -2.0 * v[1] / (w * w) * e]
            }
        }
    }

    /// `v₁⁴ + v₂⁴`, `v₁²v₂²` and `e^{-2|v|²}`; none is a collision invariant.
    pub fn standard() -> Vec<VelocityTest> {
        vec![
            VelocityTest::Polynomial(vec![(1.0, [4, 0]), (1.0, [0, 4])]),
            VelocityTest::monomial(2, 2),
            VelocityTest::Gaussian(std::f64::consts::FRAC_1_SQRT_2),
        ]
    }
}

/// Scalar field on the square grid `lo + i·h`, `i, j < n`, stored row-major in `(v₁, v₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneField {
    pub n: usize,
    pub lo: f64,
    pub h: f64,
    pub data: Vec<f64>,
}

impl PlaneField {
    pub fn from_fn<F: Fn([f64; 2]) -> f64>(n: usize, lo: f64, h: f64, f: F) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f([lo + i as f64 * h, lo + j as f64 * h]);
            }
        }
        Self { n, lo, h, data }
    }

    /// Sample `f°` on `n²` nodes with four empty nodes beyond the support on every side.
    pub fn from_density(f: &InitialDensity, n: usize) -> Result<Self> {
        if f.dim() != 2 {
            return Err(Error::Input("plane fields need a two-dimensional density".into()));
        }
        if n < 16 {
            return Err(Error::Input("plane grid needs at least 16 nodes per axis".into()));
        }
        let r = f.support_radius();
        let h = 2.0 * r / (n - 9) as f64;
        Ok(Self::from_fn(n, -r - 4.0 * h, h, |v| f.f(&v)))
    }

    pub fn v(&self, i: usize, j: usize) -> [f64; 2] {
        [self.lo + i as f64 * self.h, self.lo + j as f64 * self.h]
    }

    pub fn integral(&self) -> f64 {
        self.h * self.h * self.data.iter().sum::<f64>()
    }

    pub fn moment<F: Fn([f64; 2]) -> f64>(&self, g: F) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += g(self.v(i, j)) * self.data[i * self.n + j];
            }
        }
        s * self.h * self.h
    }

    pub fn l1_norm(&self) -> f64 {
        self.h * self.h * self.data.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Fourth-order central differences, zero outside the grid.
    pub fn gradient(&self) -> [Vec<f64>; 2] {
        [d4(&self.data, self.n, self.h, 0), d4(&self.data, self.n, self.h, 1)]
    }

    fn clear_margin(&self, w: usize) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| (i >= w && j >= w && i + w < n && j + w < n) || self.data[i * n + j] == 0.0))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("v1,v2,value\n");
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.v(i, j);
                let _ = writeln!(s, "{:.6e},{:.6e},{:.10e}", v[0], v[1], self.data[i * self.n + j]);
            }
        }
        s
    }
}

fn d4(data: &[f64], n: usize, h: f64, axis: usize) -> Vec<f64> {
    let at = |i: i64, j: i64| if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 { 0.0 } else { data[i as usize * n + j as usize] };
    let mut out = vec![0.0; n * n];
    for i in 0..n as i64 {
        for j in 0..n as i64 {
            let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
            out[i as usize * n + j as usize] = (at(i - 2 * di, j - 2 * dj) - 8.0 * at(i - di, j - dj) + 8.0 * at(i + di, j + dj)
                - at(i + 2 * di, j + 2 * dj))
                / (12.0 * h);
        }
    }
    out
}

/// `∂₁J₁ + ∂₂J₂` by fourth-order central differences.
pub fn divergence(n: usize, h: f64, j: &[Vec<f64>; 2]) -> Vec<f64> {
    let a = d4(&j[0], n, h, 0);
    let b = d4(&j[1], n, h, 1);
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lattice lines `k̂·v = y_ℓ` through the grid nodes for a rational direction.
struct Lines {
    p: [i64; 2],
    pnorm: f64,
    lmin: i64,
    count: usize,
    dy: f64,
    y_first: f64,
}

impl Lines {
    fn new(field: &PlaneField, n: ModeIndex) -> Self {
        let g = gcd(n[0] as i64, n[1] as i64);
        let p = [n[0] as i64 / g, n[1] as i64 / g];
        let pnorm = ((p[0] * p[0] + p[1] * p[1]) as f64).sqrt();
        let m = field.n as i64 - 1;
        let corners = [0, p[0] * m, p[1] * m, (p[0] + p[1]) * m];
        let lmin = *corners.iter().min().unwrap();
        let lmax = *corners.iter().max().unwrap();
        let dy = field.h / pnorm;
        let y_first = (field.lo * (p[0] + p[1]) as f64 + field.h * lmin as f64) / pnorm;
        Self { p, pnorm, lmin, count: (lmax - lmin + 1) as usize, dy, y_first }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        (self.p[0] * i as i64 + self.p[1] * j as i64 - self.lmin) as usize
    }

    fn y(&self, l: usize) -> f64 {
        self.y_first + l as f64 * self.dy
    }
}

/// Per-line sums `h|p| Σ_line g` for each supplied node field.
fn line_sums(field: &PlaneField, lines: &Lines, nodes: &[&[f64]]) -> Vec<Vec<f64>> {
    let w = field.h * lines.pnorm;
    let mut out = vec![vec![0.0; lines.count]; nodes.len()];
    for i in 0..field.n {
        for j in 0..field.n {
            let l = lines.index(i, j);
            for (o, g) in out.iter_mut().zip(nodes) {
                o[l] += w * g[i * field.n + j];
            }
        }
    }
    out
}

/// `ε(k, k·v - i0; ∇f)` on every line carrying mass, with the refinement change of the principal value.
fn line_dispersion(lines: &Lines, dpi: &[f64], occupied: &[bool], vhat: f64, n: ModeIndex) -> Result<(Vec<C64>, f64, f64)> {
    let mut eps = vec![C64::new(1.0, 0.0); lines.count];
    let mut min_abs = f64::INFINITY;
    let mut change: f64 = 0.0;
    for l in 0..lines.count {
        if !occupied[l] {
            continue;
        }
        let y = lines.y(l);
        let (pv, g) = principal_value(lines.y_first, lines.dy, dpi, y, 1);
        let (pv2, _) = principal_value(lines.y_first, lines.dy, dpi, y, 2);
        let e = 1.0 - vhat * C64::new(pv, -PI * g);
        change = change.max(vhat * (pv2 - pv).abs());
        if e.norm() < 0.1 {
            return Err(Error::NearSingularDispersion { value: e.norm(), k: [n[0], n[1]], y });
        }
        min_abs = min_abs.min(e.norm());
        eps[l] = e;
    }
    Ok((eps, min_abs, change))
}

/// Output of [`lb_operator`].
#[derive(Clone, Debug, PartialEq)]
pub struct LbField {
    pub value: PlaneField,
    pub flux: [Vec<f64>; 2],
    pub min_abs_eps: f64,
    /// `‖∇·J_D‖_{L¹}` of the diffusion half `f_*∇f` of the flux alone, the scale of the cancellation.
    pub diffusion_l1: f64,
    /// Largest change of `V̂·PV` when the principal-value quadrature is refined twofold.
    pub pv_refinement_change: f64,
}

impl LbField {
    /// `∫ ψ LB(f) dv` on the grid.
    pub fn pairing(&self, test: &VelocityTest) -> f64 {
        self.value.moment(|v| test.eval(v))
    }

    /// `-∫ ∇ψ · J dv`, the same pairing without differentiating the flux.
    pub fn flux_pairing(&self, test: &VelocityTest) -> f64 {
        let n = self.value.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let g = test.grad(self.value.v(i, j));
                s -= g[0] * self.flux[0][i * n + j] + g[1] * self.flux[1][i * n + j];
            }
        }
        s * self.value.h * self.value.h
    }
}

fn check_plane(f: &PlaneField, pot: &TorusPotential) -> Result<()> {
    if pot.dim() != 2 {
        return Err(Error::Input("the Lenard–Balescu operator is evaluated in two dimensions".into()));
    }
    if !f.clear_margin(4) {
        return Err(Error::Input("density must vanish within four nodes of the grid edge".into()));
    }
    Ok(())
}

/// `LB(f) = ∇·Σ_k π V̂(k)² (k⊗k) ∫ δ(k·(v - v_*)) |ε|⁻² (f_*∇f - f∇_*f_*) dv_*` on the grid.
///
/// The `v_*` integral over each resonance line is the lattice-line sum, so the discrete flux
/// integrates exactly to zero against `1`, `v` and `|v|²`.
pub fn lb_operator(f: &PlaneField, pot: &TorusPotential) -> Result<LbField> {
    check_plane(f, pot)?;
    let n = f.n;
    let grad = f.gradient();
    let parts: Vec<Result<([Vec<f64>; 2], [Vec<f64>; 2], f64, f64)>> = pot
        .half_modes()
        .par_iter()
        .filter(|(_, vh)| *vh != 0.0)
        .map(|&(m, vh)| {
            let lines = Lines::new(f, m);
            let khat = [lines.p[0] as f64 / lines.pnorm, lines.p[1] as f64 / lines.pnorm];
            let knorm = TAU * ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            let dk: Vec<f64> = grad[0].iter().zip(&grad[1]).map(|(a, b)| khat[0] * a + khat[1] * b).collect();
            let mag: Vec<f64> = f.data.iter().zip(&dk).map(|(a, b)| a.abs() + b.abs()).collect();
            let sums = line_sums(f, &lines, &[&f.data, &dk, &mag]);
            let occupied: Vec<bool> = sums[2].iter().map(|s| *s > 0.0).collect();
            let (eps, min_abs, change) = line_dispersion(&lines, &sums[1], &occupied, vh, m)?;
            let mut j = [vec![0.0; n * n], vec![0.0; n * n]];
            let mut jd = [vec![0.0; n * n], vec![0.0; n * n]];
            for a in 0..n {
                for b in 0..n {
                    let idx = a * n + b;
                    let l = lines.index(a, b);
                    if !occupied[l] {
                        continue;
                    }
                    let c = 2.0 * PI * vh * vh * knorm / eps[l].norm_sqr();
                    let d = c * sums[0][l] * dk[idx];
                    let s = d - c * f.data[idx] * sums[1][l];
                    j[0][idx] += s * khat[0];
                    j[1][idx] += s * khat[1];
                    jd[0][idx] += d * khat[0];
                    jd[1][idx] += d * khat[1];
                }
            }
            Ok((j, jd, min_abs, change))
        })
        .collect();
    let mut flux = [vec![0.0; n * n], vec![0.0; n * n]];
    let mut diffusion = [vec![0.0; n * n], vec![0.0; n * n]];
    let mut min_abs_eps = f64::INFINITY;
    let mut change: f64 = 0.0;
    for p in parts {
        let (j, jd, m, c) = p?;
        for a in 0..2 {
            for (x, y) in flux[a].iter_mut().zip(&j[a]) {
                *x += y;
            }
            for (x, y) in diffusion[a].iter_mut().zip(&jd[a]) {
                *x += y;
            }
        }
        min_abs_eps = min_abs_eps.min(m);
        change = change.max(c);
    }
    let value = PlaneField { n, lo: f.lo, h: f.h, data: divergence(n, f.h, &flux) };
    let diffusion_l1 = f.h * f.h * divergence(n, f.h, &diffusion).iter().map(|x| x.abs()).sum::<f64>();
    Ok(LbField { value, flux, min_abs_eps, diffusion_l1, pv_refinement_change: change })
}

/// The operator vanishes identically in one dimension.
pub fn lb_operator_1d(values: &[f64]) -> Vec<f64> {
    vec![0.0; values.len()]
}

/// `-∬ ((∇-∇_*)√(ff_*))·B((∇-∇_*)√(ff_*))`, written per resonance line as
/// `-Σ c_ℓ (π_ℓ A_ℓ - C_ℓ²)` with Cauchy–Schwarz-nonnegative brackets.
pub fn entropy_production(f: &PlaneField, pot: &TorusPotential) -> Result<f64> {
    check_plane(f, pot)?;
    if let Some(x) = f.data.iter().find(|x| **x < 0.0 || !x.is_finite()) {
        return Err(Error::Domain(format!("entropy production needs f ≥ 0, found {x:e}")));
    }
    let grad = f.gradient();
    let g: Vec<f64> = f.data.iter().map(|x| x.sqrt()).collect();
    let parts: Vec<Result<f64>> = pot
        .half_modes()
        .par_iter()
        .filter(|(_, vh)| *vh != 0.0)
        .map(|&(m, vh)| {
            let lines = Lines::new(f, m);
            let khat = [lines.p[0] as f64 / lines.pnorm, lines.p[1] as f64 / lines.pnorm];
            let knorm = TAU * ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            let dk: Vec<f64> = grad[0].iter().zip(&grad[1]).map(|(a, b)| khat[0] * a + khat[1] * b).collect();
            let dg: Vec<f64> = dk.iter().zip(&g).map(|(d, s)| if *s > 0.0 { d / (2.0 * s) } else { 0.0 }).collect();
            let dg2: Vec<f64> = dg.iter().map(|x| x * x).collect();
            let gdg: Vec<f64> = dg.iter().zip(&g).map(|(a, b)| a * b).collect();
            let mag: Vec<f64> = f.data.iter().zip(&dk).map(|(a, b)| a.abs() + b.abs()).collect();
            let sums = line_sums(f, &lines, &[&f.data, &dk, &dg2, &gdg, &mag]);
            let occupied: Vec<bool> = sums[4].iter().map(|s| *s > 0.0).collect();
            let (eps, _, _) = line_dispersion(&lines, &sums[1], &occupied, vh, m)?;
            let mut total = 0.0;
            for l in 0..lines.count {
                if occupied[l] {
                    let bracket = sums[0][l] * sums[2][l] - sums[3][l] * sums[3][l];
                    total += lines.dy * 2.0 * bracket / eps[l].norm_sqr();
                }
            }
            Ok(2.0 * PI * vh * vh * knorm * total)
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    let value = -total;
    if value > 1e-10 {
        return Err(Error::NumericalInconsistency(format!("positive entropy production {value:e}")));
    }
    Ok(value)
}

/// Closed-form resolvent field `T_ω` on a plane grid and its divergence.
#[derive(Clone, Debug, PartialEq)]
pub struct TOmega {
    pub n: usize,
    pub lo: f64,
    pub h: f64,
    pub t: [Vec<C64>; 2],
    pub div: Vec<C64>,
    /// `max |T_ω| / ((|f°| + |∇f°|) log(2 + |Re ω|/|Im ω|))` over the support.
    pub bound_constant: f64,
}

impl TOmega {
    /// `∫ ψ ∇·T_ω = -∫ ∇ψ · Re T_ω`.
    pub fn pairing(&self, test: &VelocityTest) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let v = [self.lo + i as f64 * self.h, self.lo + j as f64 * self.h];
                let g = test.grad(v);
                let idx = i * self.n + j;
                s -= g[0] * self.t[0][idx].re + g[1] * self.t[1][idx].re;
            }
        }
        s * self.h * self.h
    }

    /// Largest `|Im T_ω|` relative to `max |T_ω|`.
    pub fn imaginary_fraction(&self) -> f64 {
        let mut im: f64 = 0.0;
        let mut all: f64 = 0.0;
        for a in 0..2 {
            for z in &self.t[a] {
                im = im.max(z.im.abs());
                all = all.max(z.norm());
            }
        }
        if all == 0.0 {
            0.0
        } else {
            im / all
        }
    }
}

/// Resolution of [`t_omega`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TOmegaOptions {
    pub grid_n: usize,
    pub ny: usize,
    pub nalpha: usize,
}

impl Default for TOmegaOptions {
    fn default() -> Self {
        Self { grid_n: 48, ny: 801, nalpha: 2001 }
    }
}

/// `T_ω(v) = Σ_k i k V̂ f°(v)(1/ε°(k, k·v + ω) - 1) + Σ_k k V̂ L̃_ω(k, v)` with the symmetrized
/// `α`-integral `L̃_ω` evaluated by product integration against its Lorentzian factor.
pub fn t_omega(f: &InitialDensity, pot: &TorusPotential, omega: C64, opts: TOmegaOptions) -> Result<TOmega> {
    if omega.im <= 0.0 {
        return Err(Error::HalfPlane(omega.im));
    }
    if f.dim() != 2 || pot.dim() != 2 {
        return Err(Error::Input("T_omega is evaluated in two dimensions".into()));
    }
    let grid = PlaneField::from_density(f, opts.grid_n)?;
    let n = grid.n;
    let r = f.support_radius();
    let fv = grid.data.clone();
    let gradf: Vec<[f64; 3]> = (0..n * n).map(|idx| f.grad_f(&grid.v(idx / n, idx % n))).collect();
    let parts: Vec<Result<[Vec<C64>; 2]>> = pot
        .modes()
        .par_iter()
        .filter(|(_, vh)| *vh != 0.0)
        .map(|&(m, vh)| {
            let proj = ProjectedDensity::from_density(f, m, opts.ny)?;
            let kn = proj.knorm;
            let kvec = [kn * proj.dir[0], kn * proj.dir[1]];
            let c_pi = |z: C64| cauchy_real(proj.y0, proj.dy, &proj.pi, z, 0.0);
            let c_dpi = |z: C64| cauchy_real(proj.y0, proj.dy, &proj.dpi, z, 0.0);
            let eps_tab: Vec<C64> = (0..proj.len()).map(|i| 1.0 - vh * c_dpi(proj.y(i) + omega / kn)).collect();
            let amax = kn * r + 10.0 + 10.0 * omega.norm();
            let na = opts.nalpha.max(16);
            let da = 2.0 * amax / (na - 1) as f64;
            let q: Vec<C64> = (0..na)
                .map(|j| {
                    let a = -amax + j as f64 * da;
                    let e1 = 1.0 - vh * c_dpi((omega / 2.0 - a) / kn);
                    let e2 = 1.0 - vh * c_dpi(-(omega / 2.0 + a) / kn);
                    let c1 = c_pi((omega / 2.0 - a) / kn) / kn;
                    let c2 = c_pi(-(a + omega / 2.0) / kn) / kn;
                    (c1 - c2) / (e1 * e2)
                })
                .collect();
            let cq = |z: C64| cauchy_linear(-amax, da, na, |i| q[i], z, 0.0);
            let ell: Vec<C64> = (0..proj.len())
                .map(|i| {
                    let ky = kn * proj.y(i);
                    0.25 / PI * (cq(-ky - omega / 2.0) - cq(-ky + omega / 2.0))
                })
                .collect();
            let mut t = [vec![C64::new(0.0, 0.0); n * n], vec![C64::new(0.0, 0.0); n * n]];
            for idx in 0..n * n {
                let v = grid.v(idx / n, idx % n);
                let y = proj.dir[0] * v[0] + proj.dir[1] * v[1];
                if y.abs() > r || (fv[idx] == 0.0 && gradf[idx][0] == 0.0 && gradf[idx][1] == 0.0) {
                    continue;
                }
                let e = cubic_interp(&eps_tab, proj.y0, proj.dy, y);
                let l = cubic_interp(&ell, proj.y0, proj.dy, y);
                let kgrad = kvec[0] * gradf[idx][0] + kvec[1] * gradf[idx][1];
                let s = I * vh * fv[idx] * (1.0 / e - 1.0) + vh * vh * kgrad * l;
                t[0][idx] += kvec[0] * s;
                t[1][idx] += kvec[1] * s;
            }
            Ok(t)
        })
        .collect();
    let mut t = [vec![C64::new(0.0, 0.0); n * n], vec![C64::new(0.0, 0.0); n * n]];
    for p in parts {
        let p = p?;
        for a in 0..2 {
            for (x, y) in t[a].iter_mut().zip(&p[a]) {
                *x += y;
            }
        }
    }
    let re = [t[0].iter().map(|z| z.re).collect(), t[1].iter().map(|z| z.re).collect()];
    let im = [t[0].iter().map(|z| z.im).collect(), t[1].iter().map(|z| z.im).collect()];
    let dre = divergence(n, grid.h, &re);
    let dim_ = divergence(n, grid.h, &im);
    let div = dre.iter().zip(&dim_).map(|(a, b)| C64::new(*a, *b)).collect();
    let logf = (2.0 + omega.re.abs() / omega.im).ln();
    let scale = fv.iter().zip(&gradf).map(|(a, g)| a.abs() + g[0].hypot(g[1])).fold(0.0, f64::max);
    let mut bound_constant: f64 = 0.0;
    for idx in 0..n * n {
        let w = fv[idx].abs() + gradf[idx][0].hypot(gradf[idx][1]);
        if w > 1e-6 * scale {
            let mag = (t[0][idx].norm_sqr() + t[1][idx].norm_sqr()).sqrt();
            bound_constant = bound_constant.max(mag / (w * logf));
        }
    }
    Ok(TOmega { n, lo: grid.lo, h: grid.h, t, div, bound_constant })
}

/// Smooth bump weight `χ` on `[a, b]`, normalized to total mass `mass`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpWeight {
    pub a: f64,
    pub b: f64,
    norm: f64,
}

impl BumpWeight {
    pub fn new(a: f64, b: f64, mass: f64) -> Result<Self> {
        if !(b > a && a >= 0.0) {
            return Err(Error::Input("bump weight needs 0 ≤ a < b".into()));
        }
        let raw = Self { a, b, norm: 1.0 };
        let z = simpson(|t| raw.eval(t), a, b, 2000);
        Ok(Self { a, b, norm: mass / z })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = (2.0 * t - self.a - self.b) / (self.b - self.a);
        if s.abs() >= 1.0 {
            0.0
        } else {
            self.norm * (-1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn mass(&self) -> f64 {
        simpson(|t| self.eval(t), self.a, self.b, 2000)
    }

    /// `g_χ(α) = (1/2π) ∫ e^{(iα+1)τ} χ(τ) dτ / (iα + 1)`.
    pub fn laplace_weight(&self, alpha: f64) -> C64 {
        let re = simpson(|t| self.eval(t) * t.exp() * (alpha * t).cos(), self.a, self.b, 2000);
        let im = simpson(|t| self.eval(t) * t.exp() * (alpha * t).sin(), self.a, self.b, 2000);
        C64::new(re, im) / (C64::new(1.0, alpha) * TAU)
    }
}

/// Resolution of [`laplace_consistency`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceOptions {
    /// Plane grid of the Lenard–Balescu side.
    pub grid_n: usize,
    /// Projection nodes of the time-domain side.
    pub ny: usize,
    pub dt: f64,
}

impl Default for LaplaceOptions {
    fn default() -> Self {
        Self { grid_n: 32, ny: 1601, dt: 1e-3 }
    }
}

/// Time-averaged drive against `(∫χ)·LB(f°)`, one row per `t_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceReport {
    pub t_n: Vec<f64>,
    pub tests: Vec<VelocityTest>,
    /// `∫ χ(τ) ⟨ψ, N∂_t h⟩(t_N τ) dτ` per `t_N` and test function.
    pub lhs: Vec<Vec<f64>>,
    /// `(∫χ) ⟨ψ, LB(f°)⟩` per test function.
    pub rhs: Vec<f64>,
    /// `|lhs - rhs| / |rhs|` in the Euclidean norm over test functions.
    pub deviation: Vec<f64>,
}

impl LaplaceReport {
    pub fn is_decreasing(&self) -> bool {
        self.deviation.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\nt_N,test,lhs,rhs,deviation\n");
        for (i, t) in self.t_n.iter().enumerate() {
            for (k, test) in self.tests.iter().enumerate() {
                let _ = writeln!(s, "{t},{:?},{:.10e},{:.10e},{:.6e}", test, self.lhs[i][k], self.rhs[k], self.deviation[i]);
            }
        }
        s
    }
}

/// Compare `∫χ(τ)(N∂_t h)(t_N τ)dτ` from the time-domain Bogolyubov drive with `(∫χ)·LB(f°)`.
pub fn laplace_consistency(
    f: &InitialDensity,
    pot: &TorusPotential,
    chi: &BumpWeight,
    t_n: &[f64],
    tests: &[VelocityTest],
    opts: LaplaceOptions,
) -> Result<LaplaceReport> {
    if t_n.is_empty() || tests.is_empty() {
        return Err(Error::Input("need at least one t_N and one test function".into()));
    }
    let t_end = t_n.iter().fold(0.0, |a: f64, b| a.max(*b)) * chi.b;
    let hist = drive_pairings(f, pot, tests, t_end, DriveOptions { dt: opts.dt, ny: opts.ny })?;
    let mut lhs = Vec::new();
    for &tn in t_n {
        let mut row = vec![0.0; tests.len()];
        let steps = (tn * chi.b / opts.dt).ceil() as usize;
        if steps >= hist.values.len() {
            return Err(Error::InsufficientData { need: steps + 1, got: hist.values.len() });
        }
        for (s, vals) in hist.values.iter().enumerate().take(steps + 1) {
            let t = s as f64 * opts.dt;
            let w = chi.eval(t / tn) * opts.dt / tn;
            if w != 0.0 {
                for (r, v) in row.iter_mut().zip(vals) {
                    *r += w * v;
                }
            }
        }
        lhs.push(row);
    }
    let mass = chi.mass();
    let rhs: Vec<f64> = if f.dim() == 1 {
        vec![0.0; tests.len()]
    } else {
        let field = PlaneField::from_density(f, opts.grid_n)?;
        let lb = lb_operator(&field, pot)?;
        tests.iter().map(|t| mass * lb.pairing(t)).collect()
    };
    let rnorm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let deviation = lhs
        .iter()
        .map(|row| {
            let d = row.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if rnorm > 0.0 {
                d / rnorm
            } else {
                d
            }
        })
        .collect();
    Ok(LaplaceReport { t_n: t_n.to_vec(), tests: tests.to_vec(), lhs, rhs, deviation })
}
