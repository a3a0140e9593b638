//! Potentials, initial densities and observables on the torus `[0,1)^d`.
//!
//! Fourier modes are indexed by integer vectors `n`, with wavevector `k = 2πn`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::simpson;

/// Integer Fourier index; unused trailing components are zero.
pub type ModeIndex = [i32; 3];

fn neg(n: ModeIndex) -> ModeIndex {
    [-n[0], -n[1], -n[2]]
}

fn is_positive_half(n: ModeIndex) -> bool {
    for c in n {
        if c != 0 {
            return c > 0;
        }
    }
    false
}

fn norm2(n: ModeIndex) -> f64 {
    n.iter().map(|&c| (c as f64) * (c as f64)).sum()
}

/// Even, real interaction potential `V(x) = Σ V̂(n) e^{2πi n·x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPotential {
    dim: usize,
    modes: Vec<(ModeIndex, f64)>,
    half: Vec<(ModeIndex, f64)>,
    cutoff: f64,
}

impl TorusPotential {
    /// Build from a full coefficient table; both `n` and `-n` must be listed with equal values.
    pub fn new(dim: usize, coeffs: Vec<(ModeIndex, f64)>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("dimension {dim} not in 1..=3")));
        }
        let mut modes: Vec<(ModeIndex, f64)> = Vec::with_capacity(coeffs.len());
        for (n, c) in coeffs {
            if n[dim..].iter().any(|&x| x != 0) {
                return Err(Error::Input(format!("mode {n:?} has components beyond dim {dim}")));
            }
            if !c.is_finite() {
                return Err(Error::Input(format!("non-finite coefficient at {n:?}")));
            }
            if modes.iter().any(|(m, _)| *m == n) {
                return Err(Error::Input(format!("mode {n:?} listed twice")));
            }
            modes.push((n, c));
        }
        for (n, c) in &modes {
            match modes.iter().find(|(m, _)| *m == neg(*n)) {
                Some((_, c2)) if c2 == c => {}
                _ => return Err(Error::Input(format!("coefficient table not even at {n:?}"))),
            }
        }
        modes.sort_by(|a, b| a.0.cmp(&b.0));
        let half = modes.iter().copied().filter(|(n, _)| is_positive_half(*n)).collect();
        let cutoff = modes.iter().map(|(n, _)| norm2(*n).sqrt()).fold(0.0, f64::max);
        Ok(Self { dim, modes, half, cutoff })
    }

    /// Build from one representative per `±n` pair.
    pub fn from_half(dim: usize, half: &[(ModeIndex, f64)]) -> Result<Self> {
        let mut full = Vec::new();
        for &(n, c) in half {
            if n == [0, 0, 0] {
                full.push((n, c));
            } else {
                full.push((n, c));
                full.push((neg(n), c));
            }
        }
        Self::new(dim, full)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, Vec::new()).expect("empty table is valid")
    }

    /// `V(x) = amp·cos(2πx)` on the circle.
    pub fn cosine_1d(amp: f64) -> Self {
        Self::from_half(1, &[([1, 0, 0], amp / 2.0)]).expect("valid")
    }

    /// Isotropic `V̂(n) = amp·exp(-|n|²/2)` for `0 < |n| ≤ nmax` in two dimensions.
    pub fn gaussian_2d(amp: f64, nmax: i32) -> Self {
        let mut half = Vec::new();
        for a in -nmax..=nmax {
            for b in -nmax..=nmax {
                let n = [a, b, 0];
                if is_positive_half(n) && norm2(n) <= (nmax * nmax) as f64 {
                    half.push((n, amp * (-0.5 * norm2(n)).exp()));
                }
            }
        }
        Self::from_half(2, &half).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Maximal `|n|` over stored modes.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn modes(&self) -> &[(ModeIndex, f64)] {
        &self.modes
    }

    /// One representative per `±n` pair, excluding `n = 0`.
    pub fn half_modes(&self) -> &[(ModeIndex, f64)] {
        &self.half
    }

    pub fn vhat(&self, n: ModeIndex) -> f64 {
        self.modes.iter().find(|(m, _)| *m == n).map_or(0.0, |p| p.1)
    }

    pub fn is_zero(&self) -> bool {
        self.half.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.modes.iter().all(|&(_, c)| c >= 0.0)
    }

    /// Upper bound `Σ_n |2πn| |V̂(n)|` on `‖∇V‖_∞`.
    pub fn grad_bound(&self) -> f64 {
        self.modes.iter().map(|(n, c)| TAU * norm2(*n).sqrt() * c.abs()).sum()
    }

    /// Upper bound `Σ_n |V̂(n)|` on `‖V‖_∞`.
    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(|(_, c)| c.abs()).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.vhat([0, 0, 0]);
        for &(n, c) in &self.half {
            v += 2.0 * c * (TAU * dot(n, x)).cos();
        }
        v
    }

    /// `∇V(x) = -Σ_{half} 2 k V̂ sin(k·x)`.
    pub fn eval_force_kernel(&self, x: &[f64]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for &(n, c) in &self.half {
            let s = (TAU * dot(n, x)).sin();
            for i in 0..self.dim {
                g[i] -= 2.0 * c * TAU * n[i] as f64 * s;
            }
        }
        g
    }
}

fn dot(n: ModeIndex, x: &[f64]) -> f64 {
    x.iter().zip(n.iter()).map(|(a, &b)| a * b as f64).sum()
}

/// Spatial factor `ρ°` of the initial density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Spatial {
    Homogeneous,
    /// `ρ(x) = 1 + Σ a_n cos(2π n·x)` over the listed half-modes.
    Fourier(Vec<(ModeIndex, f64)>),
}

/// Velocity profile `f°`, stored unnormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VelocityProfile {
    /// `(1 - |v/R|²)^q_+`.
    Bump { radius: f64, q: f64 },
    /// `(1 - Σ (v_i/R_i)²)^q_+`.
    AnisoBump { radii: [f64; 3], q: f64 },
    /// `exp(-|v|²/2σ²)` restricted to `|v| < radius`.
    TruncGauss { sigma: f64, radius: f64 },
}

/// Factorized density `F°(x,v) = ρ°(x) f°(v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDensity {
    dim: usize,
    spatial: Spatial,
    velocity: VelocityProfile,
    norm: f64,
    rho_max: f64,
}

impl InitialDensity {
    pub fn new(dim: usize, spatial: Spatial, velocity: VelocityProfile) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("dimension {dim} not in 1..=3")));
        }
        let mut rho_max = 1.0;
        if let Spatial::Fourier(terms) = &spatial {
            let mut s = 0.0;
            for (n, a) in terms {
                if !is_positive_half(*n) || n[dim..].iter().any(|&c| c != 0) {
                    return Err(Error::Input(format!("spatial mode {n:?} not a valid half-mode")));
                }
                s += a.abs();
            }
            if s > 1.0 {
                return Err(Error::Input(format!("spatial amplitudes sum to {s} > 1; density would go negative")));
            }
            rho_max = 1.0 + s;
        }
        match &velocity {
            VelocityProfile::Bump { radius, q } if *radius > 0.0 && *q >= 1.0 => {}
            VelocityProfile::AnisoBump { radii, q } if radii[..dim].iter().all(|&r| r > 0.0) && *q >= 1.0 => {}
            VelocityProfile::TruncGauss { sigma, radius } if *sigma > 0.0 && *radius > 0.0 => {}
            _ => return Err(Error::Input(format!("invalid velocity profile {velocity:?}"))),
        }
        let norm = velocity_mass(dim, &velocity);
        Ok(Self { dim, spatial, velocity, norm, rho_max })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spatial(&self) -> &Spatial {
        &self.spatial
    }

    pub fn velocity(&self) -> &VelocityProfile {
        &self.velocity
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.spatial, Spatial::Homogeneous)
    }

    /// Velocity normalization constant `∫ g`, computed by radial quadrature at construction.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// Largest `|v|` where `f° > 0`.
    pub fn support_radius(&self) -> f64 {
        match &self.velocity {
            VelocityProfile::Bump { radius, .. } => *radius,
            VelocityProfile::AnisoBump { radii, .. } => radii[..self.dim].iter().copied().fold(0.0, f64::max),
            VelocityProfile::TruncGauss { radius, .. } => *radius,
        }
    }

    pub fn rho(&self, x: &[f64]) -> f64 {
        match &self.spatial {
            Spatial::Homogeneous => 1.0,
            Spatial::Fourier(terms) => 1.0 + terms.iter().map(|(n, a)| a * (TAU * dot(*n, x)).cos()).sum::<f64>(),
        }
    }

    /// Normalized velocity density `f°(v)`.
    pub fn f(&self, v: &[f64]) -> f64 {
        shape(self.dim, &self.velocity, v).0 / self.norm
    }

    /// `∇f°(v)`.
    pub fn grad_f(&self, v: &[f64]) -> [f64; 3] {
        let (_, g) = shape(self.dim, &self.velocity, v);
        [g[0] / self.norm, g[1] / self.norm, g[2] / self.norm]
    }

    pub fn eval_density(&self, x: &[f64], v: &[f64]) -> f64 {
        self.rho(x) * self.f(v)
    }

    /// Draw one phase point; `x` and `v` must have length `dim`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64], v: &mut [f64]) {
        loop {
            for xi in x.iter_mut() {
                *xi = rng.gen::<f64>();
            }
            if self.is_homogeneous() || rng.gen::<f64>() * self.rho_max < self.rho(x) {
                break;
            }
        }
        self.sample_velocity(rng, v);
    }

    pub fn sample_velocity<R: Rng + ?Sized>(&self, rng: &mut R, v: &mut [f64]) {
        let d = self.dim;
        match &self.velocity {
            VelocityProfile::Bump { radius, q } => {
                unit_ball_bump(rng, d, *q, v);
                v.iter_mut().for_each(|c| *c *= radius);
            }
            VelocityProfile::AnisoBump { radii, q } => {
                unit_ball_bump(rng, d, *q, v);
                v.iter_mut().zip(radii.iter()).for_each(|(c, r)| *c *= r);
            }
            VelocityProfile::TruncGauss { sigma, radius } => loop {
                let mut r2 = 0.0;
                for c in v.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *c = sigma * z;
                    r2 += *c * *c;
                }
                if r2 < radius * radius {
                    break;
                }
            },
        }
    }
}

fn unit_ball_bump<R: Rng + ?Sized>(rng: &mut R, d: usize, q: f64, v: &mut [f64]) {
    if d == 1 {
        let b = Beta::new(q + 1.0, q + 1.0).expect("valid beta").sample(rng);
        v[0] = 2.0 * b - 1.0;
        return;
    }
    // r² ~ Beta(d/2, q+1), direction uniform
    let s = Beta::new(d as f64 / 2.0, q + 1.0).expect("valid beta").sample(rng);
    let mut norm = 0.0;
    for c in v.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *c = z;
        norm += z * z;
    }
    let scale = s.sqrt() / norm.sqrt();
    v.iter_mut().for_each(|c| *c *= scale);
}

fn shape(dim: usize, p: &VelocityProfile, v: &[f64]) -> (f64, [f64; 3]) {
    let mut g = [0.0; 3];
    match p {
        VelocityProfile::Bump { radius, q } => {
            let s: f64 = v[..dim].iter().map(|c| c * c).sum::<f64>() / (radius * radius);
            if s >= 1.0 {
                return (0.0, g);
            }
            let w = (1.0 - s).powf(q - 1.0);
            for i in 0..dim {
                g[i] = -2.0 * q * w * v[i] / (radius * radius);
            }
            (w * (1.0 - s), g)
        }
        VelocityProfile::AnisoBump { radii, q } => {
            let s: f64 = (0..dim).map(|i| (v[i] / radii[i]).powi(2)).sum();
            if s >= 1.0 {
                return (0.0, g);
            }
            let w = (1.0 - s).powf(q - 1.0);
            for i in 0..dim {
                g[i] = -2.0 * q * w * v[i] / (radii[i] * radii[i]);
            }
            (w * (1.0 - s), g)
        }
        VelocityProfile::TruncGauss { sigma, radius } => {
            let r2: f64 = v[..dim].iter().map(|c| c * c).sum();
            if r2 >= radius * radius {
                return (0.0, g);
            }
            let e = (-0.5 * r2 / (sigma * sigma)).exp();
            for i in 0..dim {
                g[i] = -v[i] / (sigma * sigma) * e;
            }
            (e, g)
        }
    }
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => TAU,
        _ => 4.0 * PI,
    }
}

fn velocity_mass(dim: usize, p: &VelocityProfile) -> f64 {
    let n = 20_000;
    match p {
        VelocityProfile::Bump { radius, q } => {
            let r = *radius;
            sphere_area(dim) * simpson(|s| s.powi(dim as i32 - 1) * (1.0 - (s / r).powi(2)).max(0.0).powf(*q), 0.0, r, n)
        }
        VelocityProfile::AnisoBump { radii, q } => {
            let jac: f64 = radii[..dim].iter().product();
            jac * sphere_area(dim) * simpson(|s| s.powi(dim as i32 - 1) * (1.0 - s * s).max(0.0).powf(*q), 0.0, 1.0, n)
        }
        VelocityProfile::TruncGauss { sigma, radius } => {
            let sg = *sigma;
            sphere_area(dim) * simpson(|s| s.powi(dim as i32 - 1) * (-0.5 * s * s / (sg * sg)).exp(), 0.0, *radius, n)
        }
    }
}

/// Velocity envelope multiplying a polynomial factor of an observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    One,
    /// `(1 - |v/R|²)^q_+`, `q` integer so the envelope is `C^{q-1}`.
    Bump { radius: f64, q: u32 },
}

impl Envelope {
    fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Envelope::One => 1.0,
            Envelope::Bump { radius, q } => {
                let s: f64 = v.iter().map(|c| c * c).sum::<f64>() / (radius * radius);
                if s >= 1.0 {
                    0.0
                } else {
                    (1.0 - s).powi(*q as i32)
                }
            }
        }
    }
}

/// One separable term `Re[c e^{2πi n·x}] · v^p · envelope(v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsTerm {
    pub n: ModeIndex,
    pub coef: (f64, f64),
    pub powers: [u32; 3],
    pub envelope: Envelope,
}

impl ObsTerm {
    pub fn new(n: ModeIndex, coef: Complex64, powers: [u32; 3], envelope: Envelope) -> Self {
        Self { n, coef: (coef.re, coef.im), powers, envelope }
    }

    fn c(&self) -> Complex64 {
        Complex64::new(self.coef.0, self.coef.1)
    }

    fn h(&self, v: &[f64]) -> f64 {
        let mut p = 1.0;
        for (i, &vi) in v.iter().enumerate() {
            p *= vi.powi(self.powers[i] as i32);
        }
        p * self.envelope.eval(v)
    }

    fn eval(&self, x: &[f64], v: &[f64]) -> f64 {
        let th = TAU * dot(self.n, x);
        let c = self.c();
        (c.re * th.cos() - c.im * th.sin()) * self.h(v)
    }
}

/// Test function on phase space: a finite sum of separable terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub label: String,
    pub terms: Vec<ObsTerm>,
}

impl Observable {
    pub fn new(label: impl Into<String>, terms: Vec<ObsTerm>) -> Self {
        Self { label: label.into(), terms }
    }

    pub fn constant(label: impl Into<String>, c: f64) -> Self {
        Self::new(label, vec![ObsTerm::new([0, 0, 0], Complex64::new(c, 0.0), [0; 3], Envelope::One)])
    }

    pub fn eval(&self, x: &[f64], v: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x, v)).sum()
    }

    /// Smoothness order: derivatives up to this order are bounded.
    pub fn smoothness(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| match t.envelope {
                Envelope::One => u32::MAX,
                Envelope::Bump { q, .. } => q.saturating_sub(1),
            })
            .min()
            .unwrap_or(u32::MAX)
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.n == [0, 0, 0] && t.powers == [0; 3] && t.envelope == Envelope::One)
    }

    /// Largest `|n|_∞` among the terms.
    pub fn max_mode(&self) -> i32 {
        self.terms.iter().flat_map(|t| t.n.iter().map(|c| c.abs())).max().unwrap_or(0)
    }

    /// Coefficient `φ̂_m(v)` in `φ(x,v) = Σ_m φ̂_m(v) e^{2πi m x}` (one dimension).
    pub fn mode_coefficient(&self, m: i32, v: f64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let h = t.h(&[v]);
            let c = t.c();
            if t.n[0] == 0 {
                if m == 0 {
                    s += c.re * h;
                }
            } else {
                if t.n[0] == m {
                    s += 0.5 * c * h;
                }
                if t.n[0] == -m {
                    s += 0.5 * c.conj() * h;
                }
            }
        }
        s
    }
}

/// Reference presets used by the experiments and tests.
pub mod presets {
    use super::*;

    /// Interacting one-dimensional potential `V = cos 2πx`.
    pub fn potential_1d() -> TorusPotential {
        TorusPotential::cosine_1d(1.0)
    }

    /// Weakly coupled stable one-dimensional potential for the homogeneous experiments.
    pub fn potential_1d_weak() -> TorusPotential {
        TorusPotential::cosine_1d(0.2)
    }

    /// Homogeneous variance-convergence potential `V = 2cos 2πx`; `V̂ ≥ 0` keeps the bump stable.
    pub fn potential_1d_homogeneous() -> TorusPotential {
        TorusPotential::cosine_1d(2.0)
    }

    /// Two-dimensional Gaussian-tail potential with `Σ V̂ ≤ 0.1`.
    pub fn potential_2d() -> TorusPotential {
        TorusPotential::gaussian_2d(0.019, 3)
    }

    pub fn bump_1d() -> VelocityProfile {
        VelocityProfile::Bump { radius: 1.0, q: 4.0 }
    }

    /// `ρ° = 1 + ½cos 2πx`, bump velocities.
    pub fn inhomogeneous_1d() -> InitialDensity {
        InitialDensity::new(1, Spatial::Fourier(vec![([1, 0, 0], 0.5)]), bump_1d()).expect("valid")
    }

    pub fn homogeneous_1d() -> InitialDensity {
        InitialDensity::new(1, Spatial::Homogeneous, bump_1d()).expect("valid")
    }

    pub fn bump_2d() -> InitialDensity {
        InitialDensity::new(2, Spatial::Homogeneous, VelocityProfile::Bump { radius: 1.0, q: 4.0 }).expect("valid")
    }

    pub fn aniso_2d() -> InitialDensity {
        InitialDensity::new(2, Spatial::Homogeneous, VelocityProfile::AnisoBump { radii: [1.0, 0.6, 1.0], q: 4.0 })
            .expect("valid")
    }

    pub fn maxwellian_2d() -> InitialDensity {
        InitialDensity::new(2, Spatial::Homogeneous, VelocityProfile::TruncGauss { sigma: 0.35, radius: 1.9 })
            .expect("valid")
    }

    /// Five homogeneous two-dimensional densities for the entropy and conservation checks.
    pub fn densities_2d() -> Vec<(&'static str, InitialDensity)> {
        let mk = |v| InitialDensity::new(2, Spatial::Homogeneous, v).expect("valid");
        vec![
            ("bump", bump_2d()),
            ("aniso", aniso_2d()),
            ("maxwellian", maxwellian_2d()),
            ("bump_q2", mk(VelocityProfile::Bump { radius: 0.8, q: 2.0 })),
            ("aniso_wide", mk(VelocityProfile::AnisoBump { radii: [0.7, 1.1, 1.0], q: 3.0 })),
        ]
    }

    /// `cos(2πx) - v sin(2πx)`, sensitive to the spatial mode.
    pub fn obs_cos_x() -> Observable {
        Observable::new(
            "cos_x",
            vec![
                ObsTerm::new([1, 0, 0], Complex64::new(1.0, 0.0), [0; 3], Envelope::One),
                ObsTerm::new([1, 0, 0], Complex64::new(0.0, 1.0), [1, 0, 0], Envelope::One),
            ],
        )
    }

    /// Velocity-only observable `v²`.
    pub fn obs_v2() -> Observable {
        Observable::new("v2", vec![ObsTerm::new([0; 3], Complex64::new(1.0, 0.0), [2, 0, 0], Envelope::One)])
    }

    /// Skewed observable mixing space and velocity, used for third-cumulant scans.
    pub fn obs_skew() -> Observable {
        Observable::new(
            "skew",
            vec![
                ObsTerm::new([0; 3], Complex64::new(1.0, 0.0), [3, 0, 0], Envelope::One),
                ObsTerm::new([1, 0, 0], Complex64::new(0.5, 0.0), [0; 3], Envelope::One),
                ObsTerm::new([0; 3], Complex64::new(1.0, 0.0), [1, 0, 0], Envelope::One),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_odd_table() {
        assert!(TorusPotential::new(1, vec![([1, 0, 0], 0.5), ([-1, 0, 0], 0.4)]).is_err());
        assert!(TorusPotential::new(1, vec![([1, 0, 0], 0.5)]).is_err());
    }

    #[test]
    fn gaussian_2d_has_28_modes() {
        let v = TorusPotential::gaussian_2d(0.019, 3);
        assert_eq!(v.modes().len(), 28);
        assert_eq!(v.half_modes().len(), 14);
        assert!(v.sup_bound() <= 0.1);
        assert!(v.is_positive_definite());
    }

    #[test]
    fn bump_sampler_matches_second_moment() {
        // E v² for (1-v²)^q on [-1,1] is 1/(2q+3)
        let f = presets::homogeneous_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut x, mut v) = ([0.0], [0.0]);
        let n = 200_000;
        let mut m2 = 0.0;
        for _ in 0..n {
            f.sample(&mut rng, &mut x, &mut v);
            m2 += v[0] * v[0];
        }
        m2 /= n as f64;
        assert!((m2 - 1.0 / 11.0).abs() < 4.0 * (1.0 / 11.0 / n as f64).sqrt());
    }

    #[test]
    fn spatial_sampler_matches_first_mode() {
        // E cos 2πx = a/2 for ρ = 1 + a cos 2πx
        let f = presets::inhomogeneous_1d();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut x, mut v) = ([0.0], [0.0]);
        let n = 200_000;
        let mut s = 0.0;
        for _ in 0..n {
            f.sample(&mut rng, &mut x, &mut v);
            s += (TAU * x[0]).cos();
        }
        s /= n as f64;
        assert!((s - 0.25).abs() < 4.0 * (0.5 / n as f64).sqrt());
    }

    #[test]
    fn bump_2d_radial_law() {
        // (1-r²)^q on the unit disk: E r² = 1/(q+2)
        let f = presets::bump_2d();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut x, mut v) = ([0.0; 2], [0.0; 2]);
        let n = 100_000;
        let mut m = 0.0;
        for _ in 0..n {
            f.sample(&mut rng, &mut x, &mut v);
            m += v[0] * v[0] + v[1] * v[1];
        }
        m /= n as f64;
        assert!((m - 1.0 / 6.0).abs() < 0.003);
    }
}
