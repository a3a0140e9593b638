//! Acceptance criteria AC1–AC12. Prints one PASS/FAIL line per criterion and exits nonzero if a
//! non-stretch criterion fails. Positional arguments select criteria, e.g. `-- AC4 AC9`.

use std::f64::consts::TAU;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chaoslab::bogolyubov::{adjoint_observable, evolve_h2, limiting_variance, AdjointOptions, H2Grid, H2Options};
use chaoslab::dynamics::{integrate_with, ForceMethod, SimConfig};
use chaoslab::ensemble::{
    estimate_correlation_pairing, estimate_cumulant, estimate_glauber_norm, k3_with_control, run_replicas, run_replicas_map,
    scaling_slope, GlauberPlan, ReplicaPlan, SampleMatrix, SlopeFit, DEFAULT_BUDGET,
};
use chaoslab::lenard_balescu::{
    entropy_production, laplace_consistency, lb_operator, lb_operator_1d, BumpWeight, Dispersion, Frequency, LaplaceOptions,
    PlaneField, VelocityTest,
};
use chaoslab::model::{presets, Observable, TorusPotential};
use chaoslab::numerics::jackknife_sums;
use chaoslab::partitions::{cumulant_coefficients, cumulants_to_moments, enumerate_partitions, k_statistics, moments_to_cumulants, MomentVector};
use chaoslab::stats::{clt_experiment, VarianceSource};
use chaoslab::verify::run_verify;
use chaoslab::vlasov::{flow_quadrature, solve_vlasov, MeanFieldFlow, PhaseGrid};

const DT: f64 = 0.01;
const NS: [usize; 5] = [256, 512, 1024, 2048, 4096];
const SHARED_R: usize = 20_000;

struct Outcome {
    pass: bool,
    stretch: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, stretch: false, detail }
    }
}

// Oracle for the inhomogeneous preset: F° = (1 + ½cos 2πx) · (315/256)(1 - v²)⁴ on |v| < 1.
fn oracle_density(x: f64, v: f64) -> f64 {
    if v.abs() >= 1.0 {
        return 0.0;
    }
    (1.0 + 0.5 * (TAU * x).cos()) * 315.0 / 256.0 * (1.0 - v * v).powi(4)
}

// Central moments E(φ-μ)^k, k = 2, 3, under F°: trapezoid in x (periodic), Simpson in v.
fn oracle_central_moments(phi: &Observable) -> (f64, f64, f64) {
    let (nx, nv) = (256, 2000);
    let hv = 2.0 / nv as f64;
    let mut raw = [0.0; 4];
    for i in 0..nx {
        let x = i as f64 / nx as f64;
        for j in 0..=nv {
            let v = -1.0 + j as f64 * hv;
            let w = if j == 0 || j == nv { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            let wt = w * hv / 3.0 / nx as f64 * oracle_density(x, v);
            let y = phi.eval(&[x], &[v]);
            for (k, r) in raw.iter_mut().enumerate() {
                *r += wt * y.powi(k as i32);
            }
        }
    }
    let mu = raw[1] / raw[0];
    let m2 = raw[2] / raw[0] - mu * mu;
    let m3 = raw[3] / raw[0] - 3.0 * mu * raw[2] / raw[0] + 2.0 * mu.powi(3);
    (mu, m2, m3)
}

fn slope_text(fit: &SlopeFit) -> String {
    if fit.noise_dominated {
        "noise-dominated".into()
    } else {
        format!("{:.3} ± {:.3}", fit.slope, fit.stderr)
    }
}

fn slope_within(fit: &SlopeFit, target: f64, tol: f64) -> bool {
    !fit.noise_dominated && (fit.slope - target).abs() <= tol
}

fn observables() -> Vec<Observable> {
    vec![presets::obs_cos_x(), presets::obs_v2(), presets::obs_skew()]
}

struct Shared {
    samples: Vec<SampleMatrix>,
    labels: Vec<String>,
}

fn shared_ensemble() -> Shared {
    let t = Instant::now();
    let obs = observables();
    let plan = ReplicaPlan {
        ns: NS.to_vec(),
        replicas: SHARED_R,
        master_seed: 20_240_601,
        sim: SimConfig::new(presets::potential_1d(), DT, 1.0, ForceMethod::FourierAccelerated).unwrap(),
        density: presets::inhomogeneous_1d(),
        observables: obs.clone(),
        sample_times: vec![0.0, 1.0],
        budget: DEFAULT_BUDGET,
    };
    let samples = run_replicas(&plan).unwrap();
    println!("      shared ensemble N = {NS:?}, R = {SHARED_R}, dt = {DT}: {:.1} s", t.elapsed().as_secs_f64());
    Shared { samples, labels: obs.iter().map(|o| o.label.clone()).collect() }
}

fn ac1(sh: &Shared) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (o, lab) in sh.labels.iter().enumerate() {
        let pts: Vec<(f64, f64, f64)> = sh
            .samples
            .iter()
            .map(|sm| {
                let k = estimate_cumulant(&sm.column(1, o), 2).unwrap();
                (sm.n as f64, k.value, k.stderr)
            })
            .collect();
        let fit = scaling_slope(&pts).unwrap();
        if o == 0 {
            pass = slope_within(&fit, -1.0, 0.15);
        }
        lines.push(format!("{lab} {}", slope_text(&fit)));
    }
    Outcome::new(pass, format!("Var slope (target -1 ± 0.15 on cos_x): {}", lines.join(", ")))
}

fn ac2() -> Outcome {
    let phi = presets::obs_cos_x();
    let (_, _, m3) = oracle_central_moments(&phi);
    let ns = [128usize, 256, 512];
    let plan = ReplicaPlan {
        ns: ns.to_vec(),
        replicas: 200_000,
        master_seed: 20_240_602,
        sim: SimConfig::new(presets::potential_1d(), DT, 1.0, ForceMethod::FourierAccelerated).unwrap(),
        density: presets::inhomogeneous_1d(),
        observables: vec![phi],
        sample_times: vec![0.0, 1.0],
        budget: DEFAULT_BUDGET,
    };
    let samples = run_replicas(&plan).unwrap();
    let mut pts = Vec::new();
    let mut rows = Vec::new();
    for sm in &samples {
        let n = sm.n as f64;
        let k = k3_with_control(&sm.column(1, 0), &sm.column(0, 0), m3 / (n * n)).unwrap();
        rows.push(format!("N={} k3={:.3e}±{:.1e}", sm.n, k.value, k.stderr));
        pts.push((n, k.value, k.stderr));
    }
    let fit = scaling_slope(&pts).unwrap();
    let resolved = slope_within(&fit, -2.0, 0.4) && fit.stderr <= 0.4;
    let verdict = if resolved {
        format!("slope {} (target -2 ± 0.4)", slope_text(&fit))
    } else {
        // R needed scales as stderr²
        let floor: Vec<String> = pts.iter().map(|(n, k, se)| format!("N={n}: |k3|/se = {:.2}", k.abs() / se)).collect();
        let r_needed = 200_000.0 * (fit.stderr / 0.4).powi(2);
        format!(
            "noise-dominated report: slope {} does not resolve ±0.4; {}; resolving the slope to ±0.4 needs R ≈ {r_needed:.1e}",
            slope_text(&fit),
            floor.join(", ")
        )
    };
    let pass = resolved || fit.noise_dominated || fit.stderr > 0.4;
    Outcome::new(pass, format!("{verdict}; {}", rows.join(", ")))
}

fn ac3(sh: &Shared) -> Outcome {
    let sm = &sh.samples[0];
    let n = sm.n as f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (o, phi) in observables().iter().enumerate() {
        let (_, m2, _) = oracle_central_moments(phi);
        let k2 = estimate_cumulant(&sm.column(0, o), 2).unwrap();
        let z = (k2.value - m2 / n) / k2.stderr;
        pass &= z.abs() <= 3.0;
        let mut zs = vec![z];
        for m in [2, 3] {
            let c = estimate_correlation_pairing(sm, 0, o, m).unwrap();
            for e in [c.route_a, c.route_b] {
                let zc = e.value / e.stderr;
                pass &= zc.abs() <= 3.0;
                zs.push(zc);
            }
        }
        parts.push(format!("{} z=[{}]", phi.label, zs.iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>().join(",")));
    }
    Outcome::new(pass, format!("t=0, N={}: variance z then G² (a,b), G³ (a,b) z-scores: {}", sm.n, parts.join("; ")))
}

fn ac4() -> Outcome {
    let phi = presets::obs_cos_x();
    let (_, m2, _) = oracle_central_moments(&phi);
    let f = presets::inhomogeneous_1d();
    let sim = SimConfig::new(presets::potential_1d(), DT, 1.0, ForceMethod::FourierAccelerated).unwrap();
    let ns = [128usize, 256, 512, 1024];
    let plan = |n: usize, m: usize, time: f64, outer: usize| GlauberPlan {
        n,
        outer,
        m,
        p: 2.0,
        resamples: 16,
        tuples: 4,
        time,
        master_seed: 20_240_604 + n as u64,
        budget: DEFAULT_BUDGET,
    };
    let mut pts = Vec::new();
    let mut pass = true;
    let mut zero_z = Vec::new();
    for &n in &ns {
        let g = estimate_glauber_norm(&f, &sim, &phi, &plan(n, 1, 1.0, 400)).unwrap();
        pts.push((n as f64, g.pooled, g.pooled_stderr));
        let g0 = estimate_glauber_norm(&f, &sim, &phi, &plan(n, 1, 0.0, 400)).unwrap();
        let z = (g0.pooled - m2.sqrt() / n as f64) / g0.pooled_stderr;
        pass &= z.abs() <= 3.0;
        zero_z.push(z);
    }
    let fit = scaling_slope(&pts).unwrap();
    pass &= slope_within(&fit, -1.0, 0.2);
    let g2 = estimate_glauber_norm(&f, &sim, &phi, &plan(128, 2, 0.0, 400)).unwrap();
    let z2 = g2.pooled_power.value / g2.pooled_power.stderr;
    pass &= z2.abs() <= 3.0;
    Outcome::new(
        pass,
        format!(
            "t=1 slope {} (target -1 ± 0.2); t=0 closed-form z {:?}; m=2 at t=0 z {:.2}",
            slope_text(&fit),
            zero_z.iter().map(|z| (z * 100.0).round() / 100.0).collect::<Vec<_>>(),
            z2
        ),
    )
}

fn ac5(sh: &Shared) -> Outcome {
    let t = Instant::now();
    let f0 = presets::inhomogeneous_1d();
    let pot = presets::potential_1d();
    let grid = PhaseGrid::default_for(&f0, &pot, 1.0);
    let sol = solve_vlasov(&f0, &pot, &grid, &[1.0]).unwrap();
    let flow = MeanFieldFlow::new(&sol, &pot, grid.dt);
    let obs = observables();
    let q = flow_quadrature(&flow, &f0, &obs, DT, (1.0 / DT).round() as usize, 128, 401).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for (o, phi) in obs.iter().enumerate() {
        let vl = sol.snapshots[0].pairing(phi);
        let mut bias = Vec::new();
        let mut sd = Vec::new();
        for sm in &sh.samples {
            let ys = sm.column(1, o);
            let r = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / r;
            let s = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
            bias.push((sm.n as f64, mean - q[o], s / r.sqrt()));
            sd.push((sm.n as f64, s, s / (2.0 * (r - 1.0)).sqrt()));
        }
        let fb = scaling_slope(&bias).unwrap();
        let fs = scaling_slope(&sd).unwrap();
        if o == 0 {
            pass = slope_within(&fb, -1.0, 0.3) && slope_within(&fs, -0.5, 0.1);
        }
        lines.push(format!(
            "{} bias {} sd {} (Q - Vlasov {:.1e})",
            phi.label,
            slope_text(&fb),
            slope_text(&fs),
            q[o] - vl
        ));
    }
    Outcome::new(
        pass,
        format!("targets -1 ± 0.3 and -0.5 ± 0.1 on cos_x: {} [{:.1} s for the Vlasov side]", lines.join("; "), t.elapsed().as_secs_f64()),
    )
}

fn ac6() -> Outcome {
    let f = presets::homogeneous_1d();
    let pot = presets::potential_1d_homogeneous();
    let phi = presets::obs_cos_x();
    let tr = evolve_h2(&f, &pot, H2Grid::for_density(&f, 257), &H2Options::new(vec![1.0])).unwrap();
    let sigma2 = limiting_variance(&phi, &f, &tr.snapshots[0]).unwrap();
    let adj = adjoint_observable(&phi, &f, &pot, 1.0, AdjointOptions { dt: 1e-3, nv: 2001 }).unwrap();
    let sim = SimConfig::new(pot.clone(), DT, 1.0, ForceMethod::FourierAccelerated).unwrap();
    let steps = sim.sample_steps(&[1.0]).unwrap();
    let mut pts = Vec::new();
    let mut rows = Vec::new();
    for n in [256usize, 1024, 4096] {
        let pairs: Vec<[f64; 2]> = run_replicas_map(&f, n, 20_000, 20_240_606, |_, mut st| {
            let e = (0..st.n()).map(|j| adj.eval(st.xj(j)[0], st.vj(j)[0])).sum::<f64>() / n as f64 - adj.mean();
            let mut y = 0.0;
            integrate_with(&mut st, &sim, &steps, |_, s| y = s.empirical_mean(&phi));
            [y, e]
        });
        let mut feat = Vec::with_capacity(4 * pairs.len());
        for [y, e] in &pairs {
            let d = y - e;
            feat.extend_from_slice(&[d, d * d, *e, d * e]);
        }
        let nf = n as f64;
        let var_psi = adj.variance();
        let (dn, se) = jackknife_sums(&feat, 4, |s, r| {
            let rf = r as f64;
            let var_d = (s[1] - s[0] * s[0] / rf) / (rf - 1.0);
            let cov = (s[3] - s[0] * s[2] / rf) / (rf - 1.0);
            nf * (var_d + 2.0 * cov) + var_psi - sigma2
        });
        rows.push(format!("N={n} D={dn:.2e}±{se:.1e}"));
        pts.push((nf, dn, se));
    }
    let fit = scaling_slope(&pts).unwrap();
    Outcome::new(
        slope_within(&fit, -1.0, 0.4),
        format!(
            "|N Var - σ²| slope {} (target -1 ± 0.4), σ² = {sigma2:.6} (adjoint route {:.6}); {}",
            slope_text(&fit),
            adj.variance(),
            rows.join(", ")
        ),
    )
}

fn ac7(sh: &Shared) -> Outcome {
    let data: Vec<(usize, Vec<f64>)> = sh.samples.iter().map(|sm| (sm.n, sm.truncated(10_000).column(1, 0))).collect();
    let rep = clt_experiment(&data, VarianceSource::MonteCarlo, 7).unwrap();
    let last = rep.rows.last().unwrap();
    let pass = last.n == 4096 && last.d_k < 0.05 && rep.monotone;
    let ks: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.d_k)).collect();
    Outcome::new(pass, format!("d_K by N = [{}], monotone {}, floor 2/√R = {:.3}", ks.join(", "), rep.monotone, 2.0 * last.floor))
}

fn ac8() -> Outcome {
    let t = Instant::now();
    let rep = run_verify().unwrap();
    let secs = t.elapsed().as_secs_f64();
    let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let pick = |n: &str| rep.get(n).map_or(f64::NAN, |c| c.value);
    Outcome::new(
        rep.all_passed() && secs <= 300.0,
        format!(
            "{}/{} checks in {secs:.1} s; energy drift {:.1e}, mass {:.1e}, free transport {:.1e}, H² symmetries {:.1e}{}",
            rep.passed(),
            rep.checks.len(),
            pick("energy_drift"),
            pick("mass_error"),
            pick("free_transport"),
            pick("h2_symmetries"),
            if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
        ),
    )
}

fn ac9() -> Outcome {
    let res: Vec<f64> = (0..20).map(|i| -3.0 + 6.0 * i as f64 / 19.0).collect();
    let pos = [0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 2.0, 3.5];
    let ims: Vec<f64> = pos.iter().flat_map(|b| [*b, -*b]).collect();
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_conj: f64 = 0.0;
    let mut evals = 0;
    let cases = [
        (presets::bump_2d(), presets::potential_2d()),
        (presets::aniso_2d(), presets::potential_2d()),
        (presets::homogeneous_1d(), presets::potential_1d_homogeneous()),
    ];
    for (f, pot) in &cases {
        let disp = Dispersion::new(f, pot, 801).unwrap();
        for n in disp.modes().collect::<Vec<_>>() {
            for &re in &res {
                for &im in &ims {
                    let w = Complex64::new(re, im);
                    let e = disp.eval(n, Frequency::Complex(w)).unwrap();
                    let ec = disp.eval(n, Frequency::Complex(w.conj())).unwrap();
                    worst_bound = worst_bound.max(1.0 - re.abs() / w.norm() - e.norm());
                    worst_conj = worst_conj.max((ec - e.conj()).norm());
                    evals += 1;
                }
            }
        }
    }
    let mut free_dev: f64 = 0.0;
    for (f, dim) in [(presets::bump_2d(), 2), (presets::homogeneous_1d(), 1)] {
        let disp = Dispersion::new(&f, &TorusPotential::zero(dim), 101).unwrap();
        for n in [[1, 0, 0], [1, 1, 0], [0, 2, 0]].iter().filter(|n| dim == 2 || n[1] == 0) {
            for &re in &res {
                for &im in &ims {
                    free_dev = free_dev.max((disp.eval(*n, Frequency::Complex(Complex64::new(re, im))).unwrap() - 1.0).norm());
                }
            }
        }
    }
    Outcome::new(
        worst_bound <= 0.0 && worst_conj <= 1e-10 && free_dev == 0.0,
        format!("{evals} evaluations: max(1 - |Re ω|/|ω| - |ε|) = {worst_bound:.3e}, conjugate symmetry {worst_conj:.1e}, V̂ ≡ 0 deviation {free_dev:.1e}"),
    )
}

fn ac10() -> Outcome {
    let pot = presets::potential_2d();
    let mut cons: f64 = 0.0;
    let mut ent = f64::NEG_INFINITY;
    let mut maxw = f64::NAN;
    let mut notes = Vec::new();
    for (name, f) in presets::densities_2d() {
        let field = PlaneField::from_density(&f, 64).unwrap();
        let lb = lb_operator(&field, &pot).unwrap();
        let m = [lb.value.integral(), lb.value.moment(|v| v[0]), lb.value.moment(|v| v[1]), lb.value.moment(|v| v[0] * v[0] + v[1] * v[1])];
        cons = m.iter().fold(cons, |a, x| a.max(x.abs()));
        let s = entropy_production(&field, &pot).unwrap();
        ent = ent.max(s);
        if name == "maxwellian" {
            maxw = lb.value.l1_norm() / lb.diffusion_l1;
        }
        notes.push(format!("{name} {s:.2e}"));
    }
    let one_d = lb_operator_1d(&[0.2, 0.7, 0.1, 0.0]);
    let zero_1d = one_d.iter().all(|x| *x == 0.0);
    Outcome::new(
        cons < 1e-8 && ent <= 1e-10 && maxw < 1e-3 && zero_1d,
        format!(
            "64² grid: conservation {cons:.1e}, entropy production [{}], Maxwellian ‖LB‖₁/‖diffusion‖₁ {maxw:.2e}, d=1 zero {zero_1d}",
            notes.join(", ")
        ),
    )
}

fn ac11() -> Outcome {
    let chi = BumpWeight::new(0.5, 1.5, 1.0).unwrap();
    let rep = laplace_consistency(
        &presets::bump_2d(),
        &presets::potential_2d(),
        &chi,
        &[2.0, 4.0, 8.0],
        &VelocityTest::standard(),
        LaplaceOptions::default(),
    )
    .unwrap();
    let last = *rep.deviation.last().unwrap();
    let dev: Vec<String> = rep.deviation.iter().map(|d| format!("{d:.4}")).collect();
    Outcome {
        pass: rep.is_decreasing() && last < 0.1,
        stretch: true,
        detail: format!("deviation at t_N = 2, 4, 8: [{}], decreasing {}, final < 10% {}", dev.join(", "), rep.is_decreasing(), last < 0.1),
    }
}

fn ac12() -> Outcome {
    let mut bell = vec![1u64];
    for n in 0..8usize {
        let mut c = 1u64;
        let mut b = 0u64;
        for k in 0..=n {
            b += c * bell[k];
            c = c * (n - k) as u64 / (k + 1) as u64;
        }
        bell.push(b);
    }
    let counts_ok = (1..=8).all(|m| enumerate_partitions(m).unwrap().len() as u64 == bell[m]);
    let mu = MomentVector(vec![0.5, 0.9, -0.2, 3.3, 1.1, 7.0]);
    let back = cumulants_to_moments(&moments_to_cumulants(&mu));
    let trip = mu.0.iter().zip(&back.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let k4: Vec<i128> = cumulant_coefficients(4).into_iter().map(|(_, c)| c).collect();
    let k4_ok = k4 == vec![1, -4, -3, 12, -6];
    let p: f64 = 0.3;
    let q = 1.0 - p;
    let kappa = [p, p * q, p * q * (1.0 - 2.0 * p), p * q * (1.0 - 6.0 * p * q)];
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_612);
    let reps = 20_000;
    let mut acc = vec![Vec::with_capacity(reps); 4];
    for _ in 0..reps {
        let s: Vec<f64> = (0..12).map(|_| if rng.gen::<f64>() < p { 1.0 } else { 0.0 }).collect();
        for (m, a) in acc.iter_mut().enumerate() {
            a.push(k_statistics(&s, m + 1).unwrap().value);
        }
    }
    let zs: Vec<f64> = acc
        .iter()
        .zip(&kappa)
        .map(|(a, k)| {
            let r = a.len() as f64;
            let mean = a.iter().sum::<f64>() / r;
            let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
            (mean - k) / (sd / r.sqrt())
        })
        .collect();
    let unbiased = zs.iter().all(|z| z.abs() <= 3.0);
    Outcome::new(
        counts_ok && trip < 1e-12 && k4_ok && unbiased,
        format!(
            "Bell counts {counts_ok}, round trip {trip:.1e}, κ₄ coefficients {k4:?}, k-statistic z-scores {:?}",
            zs.iter().map(|z| (z * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).map(|a| a.to_uppercase()).collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let needs_shared = ["AC1", "AC3", "AC5", "AC7"].iter().any(|id| wanted(id));
    println!("acceptance: {} criteria selected", (1..=12).filter(|i| wanted(&format!("AC{i}"))).count());
    let shared = if needs_shared { Some(shared_ensemble()) } else { None };
    let sh = || shared.as_ref().expect("shared ensemble");
    let mut failures = 0;
    let mut stretch_failures = 0;
    for i in 1..=12 {
        let id = format!("AC{i}");
        if !wanted(&id) {
            continue;
        }
        let t = Instant::now();
        let out = match i {
            1 => ac1(sh()),
            2 => ac2(),
            3 => ac3(sh()),
            4 => ac4(),
            5 => ac5(sh()),
            6 => ac6(),
            7 => ac7(sh()),
            8 => ac8(),
            9 => ac9(),
            10 => ac10(),
            11 => ac11(),
            _ => ac12(),
        };
        let tag = match (out.pass, out.stretch) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (stretch, reported)",
        };
        if !out.pass {
            if out.stretch {
                stretch_failures += 1;
            } else {
                failures += 1;
            }
        }
        println!("{id:<5} {tag}  {}  [{:.1} s]", out.detail, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {failures} failed, {stretch_failures} stretch reported");
    if failures > 0 {
        std::process::exit(1);
    }
}
