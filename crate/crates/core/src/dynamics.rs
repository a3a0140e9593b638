//! Mean-field Newton dynamics on the torus, integrated by velocity Verlet.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{InitialDensity, Observable, TorusPotential};
use crate::numerics::{sin_cos_turns, wrap_unit};

/// Positions in `[0,1)^d` and velocities of `n` particles, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    pub dim: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    pub steps: u64,
    pub seed: Option<u64>,
}

impl ParticleState {
    pub fn new(dim: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() || x.len() % dim != 0 {
            return Err(Error::Input(format!("inconsistent lengths {} / {} for dim {dim}", x.len(), v.len())));
        }
        let x = x.into_iter().map(wrap).collect();
        Ok(Self { dim, x, v, t: 0.0, steps: 0, seed: None })
    }

    /// `n` iid draws from `density` using a ChaCha stream seeded by `seed`.
    pub fn sample(density: &InitialDensity, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = density.dim();
        let mut x = vec![0.0; n * d];
        let mut v = vec![0.0; n * d];
        for j in 0..n {
            density.sample(&mut rng, &mut x[j * d..(j + 1) * d], &mut v[j * d..(j + 1) * d]);
        }
        Self { dim: d, x, v, t: 0.0, steps: 0, seed: Some(seed) }
    }

    pub fn n(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn xj(&self, j: usize) -> &[f64] {
        &self.x[j * self.dim..(j + 1) * self.dim]
    }

    pub fn vj(&self, j: usize) -> &[f64] {
        &self.v[j * self.dim..(j + 1) * self.dim]
    }

    /// Mean velocity `(1/N) Σ v_j`.
    pub fn momentum(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.dim).map(|i| self.v.iter().skip(i).step_by(self.dim).sum::<f64>() / n).collect()
    }

    /// `(1/N) Σ_j φ(z_j)`.
    pub fn empirical_mean(&self, phi: &Observable) -> f64 {
        let n = self.n();
        (0..n).map(|j| phi.eval(self.xj(j), self.vj(j))).sum::<f64>() / n as f64
    }

    /// Appends `(t, particle, x.., v..)` rows to `out`.
    pub fn write_csv_rows(&self, out: &mut String) {
        for j in 0..self.n() {
            let _ = write!(out, "{},{}", self.t, j);
            for c in self.xj(j).iter().chain(self.vj(j)) {
                let _ = write!(out, ",{c:.17e}");
            }
            out.push('\n');
        }
    }
}

#[inline]
fn wrap(x: f64) -> f64 {
    wrap_unit(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForceMethod {
    Direct,
    FourierAccelerated,
}

/// Time step, horizon, force evaluation and potential; the integrator is always velocity Verlet.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub force_method: ForceMethod,
    pub potential: TorusPotential,
}

impl SimConfig {
    pub fn new(potential: TorusPotential, dt: f64, t_end: f64, force_method: ForceMethod) -> Result<Self> {
        if !(dt > 0.0) || !(t_end >= 0.0) {
            return Err(Error::Config(format!("need dt > 0 and t_end ≥ 0, got dt = {dt}, t_end = {t_end}")));
        }
        // with ∇V(0) = 0 the Fourier path needs no self-interaction correction
        let g0 = potential.eval_force_kernel(&[0.0; 3][..potential.dim()]);
        assert!(g0.iter().all(|c| c.abs() < 1e-12), "even potential must have zero self-force");
        Ok(Self { dt, t_end, force_method, potential })
    }

    /// Step-size heuristic `0.1 / (1 + max|k| Σ|V̂|)`.
    pub fn stability_heuristic(&self) -> f64 {
        0.1 / (1.0 + TAU * self.potential.cutoff() * self.potential.sup_bound())
    }

    pub fn within_heuristic(&self) -> bool {
        self.dt <= self.stability_heuristic() * (1.0 + 1e-12)
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    /// Step indices for the requested times; each time must sit on the `dt` grid.
    pub fn sample_steps(&self, times: &[f64]) -> Result<Vec<u64>> {
        times
            .iter()
            .map(|&t| {
                let s = t / self.dt;
                if t < 0.0 || t > self.t_end * (1.0 + 1e-12) || (s - s.round()).abs() > 1e-6 {
                    Err(Error::Config(format!("sample time {t} not on the dt = {} grid within [0, {}]", self.dt, self.t_end)))
                } else {
                    Ok(s.round() as u64)
                }
            })
            .collect()
    }
}

/// `F_j = -(1/N) Σ_{l≠j} ∇V(x_j - x_l)`.
pub fn mean_field_force(state: &ParticleState, v: &TorusPotential, method: ForceMethod) -> Vec<f64> {
    let mut f = vec![0.0; state.x.len()];
    let mut ws = Workspace::default();
    compute_force(state, v, method, &mut f, &mut ws);
    f
}

#[derive(Default)]
struct Workspace {
    c: Vec<f64>,
    s: Vec<f64>,
}

fn compute_force(state: &ParticleState, pot: &TorusPotential, method: ForceMethod, f: &mut [f64], ws: &mut Workspace) {
    let d = state.dim;
    let n = state.n();
    f.iter_mut().for_each(|c| *c = 0.0);
    if n < 2 {
        return;
    }
    let inv_n = 1.0 / n as f64;
    match method {
        ForceMethod::Direct => {
            for j in 0..n {
                for l in 0..n {
                    if l == j {
                        continue;
                    }
                    let mut dx = [0.0; 3];
                    for i in 0..d {
                        dx[i] = state.x[j * d + i] - state.x[l * d + i];
                    }
                    let g = pot.eval_force_kernel(&dx[..d]);
                    for i in 0..d {
                        f[j * d + i] -= inv_n * g[i];
                    }
                }
            }
        }
        ForceMethod::FourierAccelerated => {
            ws.c.resize(n, 0.0);
            ws.s.resize(n, 0.0);
            for &(m, vh) in pot.half_modes() {
                let (mut cs, mut ss) = (0.0, 0.0);
                if d == 1 {
                    let m0 = m[0] as f64;
                    for ((x, c), s) in state.x.iter().zip(ws.c.iter_mut()).zip(ws.s.iter_mut()) {
                        (*s, *c) = sin_cos_turns(m0 * x);
                        cs += *c;
                        ss += *s;
                    }
                } else {
                    for j in 0..n {
                        let mut ph = 0.0;
                        for i in 0..d {
                            ph += m[i] as f64 * state.x[j * d + i];
                        }
                        let (s, c) = sin_cos_turns(ph);
                        ws.c[j] = c;
                        ws.s[j] = s;
                        cs += c;
                        ss += s;
                    }
                }
                for i in 0..d {
                    let a = 2.0 * TAU * m[i] as f64 * vh * inv_n;
                    if a == 0.0 {
                        continue;
                    }
                    for ((fj, s), c) in f.iter_mut().skip(i).step_by(d).zip(&ws.s).zip(&ws.c) {
                        *fj += a * (s * cs - c * ss);
                    }
                }
            }
        }
    }
}

/// Velocity-Verlet integrator with a cached force.
pub struct Stepper<'a> {
    cfg: &'a SimConfig,
    force: Vec<f64>,
    ws: Workspace,
    fresh: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SimConfig) -> Self {
        Self { cfg, force: Vec::new(), ws: Workspace::default(), fresh: false }
    }

    /// Kick-drift-kick step; positions re-reduced mod 1.
    pub fn step(&mut self, st: &mut ParticleState) {
        let dt = self.cfg.dt;
        if !self.fresh || self.force.len() != st.x.len() {
            self.force.resize(st.x.len(), 0.0);
            compute_force(st, &self.cfg.potential, self.cfg.force_method, &mut self.force, &mut self.ws);
        }
        for (v, f) in st.v.iter_mut().zip(&self.force) {
            *v += 0.5 * dt * f;
        }
        for (x, v) in st.x.iter_mut().zip(&st.v) {
            *x = wrap(*x + dt * v);
        }
        compute_force(st, &self.cfg.potential, self.cfg.force_method, &mut self.force, &mut self.ws);
        for (v, f) in st.v.iter_mut().zip(&self.force) {
            *v += 0.5 * dt * f;
        }
        self.fresh = true;
        st.steps += 1;
        st.t = st.steps as f64 * dt;
    }

    /// Forget the cached force, e.g. after the state was modified externally.
    pub fn invalidate(&mut self) {
        self.fresh = false;
    }
}

/// One velocity-Verlet step.
pub fn step(state: &ParticleState, cfg: &SimConfig) -> ParticleState {
    let mut st = state.clone();
    Stepper::new(cfg).step(&mut st);
    st
}

/// `E = (1/2N) Σ|v_j|² + (1/2N²) Σ_{j≠l} V(x_j - x_l)`.
pub fn energy(state: &ParticleState, pot: &TorusPotential) -> f64 {
    let n = state.n();
    let nf = n as f64;
    let d = state.dim;
    let kin = 0.5 * state.v.iter().map(|v| v * v).sum::<f64>() / nf;
    let mut pair = pot.vhat([0, 0, 0]) * nf * nf;
    for &(m, vh) in pot.half_modes() {
        let (mut cs, mut ss) = (0.0, 0.0);
        for j in 0..n {
            let ph: f64 = (0..d).map(|i| m[i] as f64 * state.x[j * d + i]).sum();
            let (s, c) = sin_cos_turns(ph);
            cs += c;
            ss += s;
        }
        pair += 2.0 * vh * (cs * cs + ss * ss);
    }
    pair -= nf * pot.eval(&[0.0; 3][..d]);
    kin + 0.5 * pair / (nf * nf)
}

/// Invoke `visit(i, state)` at each requested step index while integrating to the last one.
pub fn integrate_with<F: FnMut(usize, &ParticleState)>(state: &mut ParticleState, cfg: &SimConfig, steps: &[u64], mut visit: F) {
    let mut stepper = Stepper::new(cfg);
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by_key(|&i| steps[i]);
    for i in order {
        while state.steps < steps[i] {
            stepper.step(state);
        }
        visit(i, state);
    }
}

/// `(1/N) Σ_j φ(z_j^t)` for every sample time (outer index) and observable.
pub fn run_trajectory(state0: &ParticleState, cfg: &SimConfig, observables: &[Observable], sample_times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let steps = cfg.sample_steps(sample_times)?;
    let mut st = state0.clone();
    let mut out = vec![Vec::new(); steps.len()];
    integrate_with(&mut st, cfg, &steps, |i, s| {
        out[i] = observables.iter().map(|o| s.empirical_mean(o)).collect();
    });
    Ok(out)
}

/// Same run with initial data of particles in `indices` replaced by `replacement` (phase points
/// laid out as `x.., v..` per particle).
pub fn resampled_rerun(
    state0: &ParticleState,
    indices: &[usize],
    replacement: &[Vec<f64>],
    cfg: &SimConfig,
    observables: &[Observable],
    sample_times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let st = replace_particles(state0, indices, replacement)?;
    run_trajectory(&st, cfg, observables, sample_times)
}

pub fn replace_particles(state0: &ParticleState, indices: &[usize], replacement: &[Vec<f64>]) -> Result<ParticleState> {
    if indices.len() != replacement.len() {
        return Err(Error::Input("one replacement per index required".into()));
    }
    let d = state0.dim;
    let mut st = state0.clone();
    for (&j, z) in indices.iter().zip(replacement) {
        if j >= st.n() || z.len() != 2 * d {
            return Err(Error::Input(format!("bad replacement for particle {j}")));
        }
        for i in 0..d {
            st.x[j * d + i] = wrap(z[i]);
            st.v[j * d + i] = z[d + i];
        }
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_misaligned_times() {
        let cfg = SimConfig::new(TorusPotential::cosine_1d(1.0), 0.01, 1.0, ForceMethod::FourierAccelerated).unwrap();
        assert!(cfg.sample_steps(&[0.5, 1.0]).is_ok());
        assert!(matches!(cfg.sample_steps(&[0.505]), Err(Error::Config(_))));
        assert!(cfg.sample_steps(&[1.5]).is_err());
        assert!(SimConfig::new(TorusPotential::cosine_1d(1.0), 0.0, 1.0, ForceMethod::Direct).is_err());
    }

    #[test]
    fn wrap_stays_in_unit_interval() {
        for x in [-1e-17, -0.25, 1.0, 2.5, 0.999_999_999_999_999_9] {
            let w = wrap(x);
            assert!((0.0..1.0).contains(&w), "{x} -> {w}");
        }
    }
}
