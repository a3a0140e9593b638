//! Invariant suite: one self-check per structural property of every module.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::bogolyubov::{adjoint_observable, bogolyubov_drive, evolve_h2, limiting_variance, AdjointOptions, H2Grid, H2Options};
use crate::dynamics::{energy, integrate_with, ForceMethod, ParticleState, SimConfig};
use crate::error::Result;
use crate::lenard_balescu::{entropy_production, lb_operator, lb_operator_1d, Dispersion, Frequency, PlaneField};
use crate::model::{presets, TorusPotential};
use crate::numerics::norm_quantile;
use crate::partitions::{cumulant_coefficients, cumulants_to_moments, enumerate_partitions, moments_to_cumulants, MomentVector};
use crate::stats::{kolmogorov_distance, EmpiricalSample};
use crate::vlasov::{solve_vlasov, GridDensity, PhaseGrid};

/// Outcome of one invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn push(&mut self, module: &'static str, name: &'static str, value: f64, tolerance: f64) {
        let passed = value.is_finite() && value <= tolerance;
        self.checks.push(Check { module, name, value, tolerance, passed });
    }

    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\nmodule,check,value,tolerance,passed\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{:.6e},{:.1e},{}", c.module, c.name, c.value, c.tolerance, c.passed);
        }
        s
    }
}

/// Run every invariant; the whole suite takes well under a minute on one core.
pub fn run_verify() -> Result<VerifyReport> {
    let mut r = VerifyReport::default();
    partitions_checks(&mut r)?;
    stats_checks(&mut r)?;
    dynamics_checks(&mut r)?;
    vlasov_checks(&mut r)?;
    bogolyubov_checks(&mut r)?;
    lenard_balescu_checks(&mut r)?;
    Ok(r)
}

fn partitions_checks(r: &mut VerifyReport) -> Result<()> {
    let mut bell = vec![1u64];
    for n in 0..8 {
        let mut c = 1u64;
        let mut b = 0u64;
        for k in 0..=n {
            b += c * bell[k];
            c = c * (n - k) as u64 / (k + 1) as u64;
        }
        bell.push(b);
    }
    let mut worst: f64 = 0.0;
    for m in 1..=8 {
        worst = worst.max((enumerate_partitions(m)?.len() as f64 - bell[m] as f64).abs());
    }
    r.push("partitions", "bell_counts", worst, 0.0);
    let mu = MomentVector(vec![0.3, 1.2, -0.4, 2.5, 0.7, 3.1]);
    let back = cumulants_to_moments(&moments_to_cumulants(&mu));
    let err = mu.0.iter().zip(&back.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    r.push("partitions", "moment_cumulant_round_trip", err, 1e-12);
    let k4: Vec<i128> = cumulant_coefficients(4).into_iter().map(|(_, c)| c).collect();
    let target = [1i128, -4, -3, 12, -6];
    let diff = k4.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<i128>() + (k4.len() as i128 - 5).abs();
    r.push("partitions", "kappa4_coefficients", diff as f64, 0.0);
    Ok(())
}

fn stats_checks(r: &mut VerifyReport) -> Result<()> {
    let n = 1000;
    let q: Vec<f64> = (0..n).map(|i| norm_quantile((i as f64 + 0.5) / n as f64)).collect();
    let d = kolmogorov_distance(&EmpiricalSample::new(q)?);
    r.push("stats", "stratified_kolmogorov", (d - 0.5 / n as f64).abs(), 1e-12);
    Ok(())
}

fn dynamics_checks(r: &mut VerifyReport) -> Result<()> {
    let pot = presets::potential_1d();
    let cfg = SimConfig::new(pot.clone(), 1e-3, 1.0, ForceMethod::FourierAccelerated)?;
    let mut st = ParticleState::sample(&presets::inhomogeneous_1d(), 1000, 11);
    let e0 = energy(&st, &pot);
    let p0 = st.momentum()[0];
    integrate_with(&mut st, &cfg, &[1000], |_, _| {});
    r.push("dynamics", "energy_drift", (energy(&st, &pot) - e0).abs(), 1e-6);
    r.push("dynamics", "momentum_drift", (st.momentum()[0] - p0).abs(), 1e-10);
    Ok(())
}

fn vlasov_checks(r: &mut VerifyReport) -> Result<()> {
    let f0 = presets::inhomogeneous_1d();
    let pot = presets::potential_1d();
    let grid = PhaseGrid { nx: 32, nv: 256, vmax: 3.5, dt: 2e-3 };
    let sol = solve_vlasov(&f0, &pot, &grid, &[1.0])?;
    r.push("vlasov", "mass_error", sol.max_mass_error, 1e-8);
    r.push("vlasov", "reality_error", sol.snapshots[0].reality_error(), 1e-12);
    let zero = TorusPotential::zero(1);
    let free = solve_vlasov(&f0, &zero, &grid, &[1.0])?;
    let t = 1.0;
    let exact = GridDensity::from_fn(&grid, |x, v| f0.eval_density(&[x - v * t], &[v]));
    let err = free.snapshots[0].data.iter().zip(&exact.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    r.push("vlasov", "free_transport", err, 1e-6);
    Ok(())
}

fn bogolyubov_checks(r: &mut VerifyReport) -> Result<()> {
    let f = presets::homogeneous_1d();
    let pot = presets::potential_1d_weak();
    let grid = H2Grid::for_density(&f, 97);
    let tr = evolve_h2(&f, &pot, grid, &H2Options::new(vec![1.0, 4.0]))?;
    let sym = tr.snapshots.iter().map(|s| s.reality_error().max(s.exchange_error())).fold(0.0, f64::max);
    r.push("bogolyubov", "h2_symmetries", sym, 1e-9);
    let drive = bogolyubov_drive(&tr.snapshots[0], &pot);
    r.push("bogolyubov", "drive_mass", drive.integral().abs(), 1e-10);
    r.push("bogolyubov", "drive_imaginary", drive.imag_residual, 1e-10);
    let phi = presets::obs_cos_x();
    let s2 = limiting_variance(&phi, &f, &tr.snapshots[0])?;
    r.push("bogolyubov", "variance_nonnegative", (-s2).max(0.0), 0.0);
    let adj = adjoint_observable(&phi, &f, &pot, 1.0, AdjointOptions { dt: 2e-3, nv: 801 })?;
    r.push("bogolyubov", "variance_two_routes", (adj.variance() - s2).abs() / s2, 1e-4);
    Ok(())
}

fn lenard_balescu_checks(r: &mut VerifyReport) -> Result<()> {
    let f = presets::bump_2d();
    let pot = presets::potential_2d();
    let disp = Dispersion::new(&f, &pot, 401)?;
    let mut conj: f64 = 0.0;
    let mut bound: f64 = 0.0;
    for n in disp.modes() {
        for y in [-1.3, -0.4, 0.0, 0.7, 2.0] {
            let up = disp.eval(n, Frequency::Boundary { y, side: 1.0 })?;
            let down = disp.eval(n, Frequency::Boundary { y, side: -1.0 })?;
            conj = conj.max((up - down.conj()).norm());
        }
        for (re, im) in [(0.5, 0.1), (-2.0, 0.5), (0.0, 1.0), (3.0, -0.2)] {
            let w = Complex64::new(re, im);
            let e = disp.eval(n, Frequency::Complex(w))?;
            bound = bound.max(1.0 - re.abs() / w.norm() - e.norm());
        }
    }
    r.push("lenard_balescu", "dispersion_conjugate_symmetry", conj, 1e-10);
    r.push("lenard_balescu", "dispersion_lower_bound", bound.max(0.0), 0.0);
    let free = Dispersion::new(&f, &TorusPotential::zero(2), 101)?;
    let e = free.eval([1, 0, 0], Frequency::Complex(Complex64::new(0.3, 0.2)))?;
    r.push("lenard_balescu", "dispersion_free", (e - 1.0).norm(), 0.0);
    let field = PlaneField::from_density(&f, 32)?;
    let lb = lb_operator(&field, &pot)?;
    let cons = [lb.value.integral(), lb.value.moment(|v| v[0]), lb.value.moment(|v| v[1]), lb.value.moment(|v| v[0] * v[0] + v[1] * v[1])];
    r.push("lenard_balescu", "lb_conservation", cons.iter().map(|x| x.abs()).fold(0.0, f64::max), 1e-8);
    r.push("lenard_balescu", "entropy_sign", entropy_production(&field, &pot)?.max(0.0), 1e-10);
    let one_d = lb_operator_1d(&[0.1, 0.5, 0.2]);
    r.push("lenard_balescu", "lb_one_dimension", one_d.iter().map(|x| x.abs()).fold(0.0, f64::max), 0.0);
    Ok(())
}
