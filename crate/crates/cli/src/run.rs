//! Execution of each experiment kind into tables and a summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chaoslab::bogolyubov::{adjoint_observable, evolve_h2, limiting_variance, AdjointOptions, H2Grid, H2Options};
use chaoslab::ensemble::{estimate_cumulant, estimate_glauber_norm, run_replicas, scaling_slope, GlauberPlan, ReplicaPlan, SampleMatrix, SlopeFit};
use chaoslab::lenard_balescu::{
    entropy_production, laplace_consistency, lb_operator, BumpWeight, Dispersion, Frequency, LaplaceOptions, PlaneField, VelocityTest,
};
use chaoslab::stats::{clt_experiment, VarianceSource};
use chaoslab::verify::run_verify;
use chaoslab::vlasov::{flow_quadrature, solve_vlasov, MeanFieldFlow, PhaseGrid};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};

/// Tables (file name, CSV body without the hash line) and summary of one run.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub tables: Vec<(String, String)>,
    /// Scalars that `[check]` entries may target.
    pub quantities: BTreeMap<String, f64>,
    pub details: serde_json::Map<String, Value>,
    /// Set when the experiment itself reports failure (verify).
    pub failed: bool,
}

impl RunOutput {
    fn table(&mut self, name: &str, body: String) {
        self.tables.push((name.to_string(), body));
    }

    fn quantity(&mut self, name: &str, v: f64) {
        self.quantities.insert(name.to_string(), v);
    }

    fn detail(&mut self, name: &str, v: Value) {
        self.details.insert(name.to_string(), v);
    }
}

pub fn run(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    match cfg.kind {
        Kind::CumulantScan => cumulant_scan(cfg),
        Kind::GlauberScan => glauber_scan(cfg),
        Kind::MeanfieldBias => meanfield_bias(cfg),
        Kind::BogolyubovVariance => bogolyubov_variance(cfg),
        Kind::Clt => clt(cfg),
        Kind::DispersionScan => dispersion_scan(cfg),
        Kind::LbEval => lb_eval(cfg),
        Kind::LbLaplace => lb_laplace(cfg),
        Kind::Verify => verify(),
    }
}

fn slope_json(fit: &SlopeFit) -> Value {
    json!({
        "slope": fit.slope,
        "stderr": fit.stderr,
        "intercept": fit.intercept,
        "noise_dominated": fit.noise_dominated,
        "points": fit.points,
    })
}

fn ensemble(cfg: &ExperimentConfig) -> chaoslab::Result<Vec<SampleMatrix>> {
    let m = cfg.model();
    let plan = ReplicaPlan {
        ns: cfg.plan.ns.clone(),
        replicas: cfg.plan.replicas,
        master_seed: cfg.plan.seed,
        sim: cfg.sim(cfg.t_end())?,
        density: m.density.clone(),
        observables: m.observables.clone(),
        sample_times: cfg.plan.times.clone(),
        budget: cfg.plan.budget,
    };
    plan.check_budget()?;
    run_replicas(&plan)
}

fn cumulant_scan(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let samples = ensemble(cfg)?;
    let mut out = RunOutput::default();
    let mut csv = String::from("N,time,observable,order,value,stderr\n");
    let mut slopes = serde_json::Map::new();
    let last = cfg.plan.times.len() - 1;
    for (o, phi) in cfg.model().observables.iter().enumerate() {
        for &m in &cfg.plan.orders {
            let mut pts = Vec::new();
            for sm in &samples {
                for (t, time) in sm.times.iter().enumerate() {
                    let k = estimate_cumulant(&sm.column(t, o), m)?;
                    let _ = writeln!(csv, "{},{},{},{},{:.10e},{:.4e}", sm.n, time, phi.label, m, k.value, k.stderr);
                    if t == last {
                        pts.push((sm.n as f64, k.value, k.stderr));
                    }
                }
            }
            if pts.len() >= 3 {
                let fit = scaling_slope(&pts)?;
                if o == 0 && (m == 2 || m == 3) {
                    out.quantity(&format!("kappa{m}_slope"), fit.slope);
                }
                slopes.insert(format!("{}/kappa{m}", phi.label), slope_json(&fit));
            }
        }
    }
    out.table("cumulants.csv", csv);
    out.detail("slopes_at_final_time", Value::Object(slopes));
    Ok(out)
}

fn glauber_scan(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let m = cfg.model();
    let phi = &m.observables[0];
    let time = cfg.plan.times[0];
    let sim = cfg.sim(time)?;
    let mut out = RunOutput::default();
    let mut csv = String::from("N,m,p,time,norm,stderr,pooled,pooled_stderr,inner_bias\n");
    let mut pts = Vec::new();
    for &n in &cfg.plan.ns {
        let plan = GlauberPlan {
            n,
            outer: cfg.plan.replicas,
            m: cfg.plan.glauber_order,
            p: cfg.plan.p,
            resamples: cfg.plan.resamples,
            tuples: cfg.plan.tuples,
            time,
            master_seed: cfg.plan.seed.wrapping_add(n as u64),
            budget: cfg.plan.budget,
        };
        let g = estimate_glauber_norm(&m.density, &sim, phi, &plan)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.10e},{:.4e},{:.10e},{:.4e},{:.4e}",
            n, g.m, g.p, time, g.norm, g.stderr, g.pooled, g.pooled_stderr, g.inner_bias
        );
        pts.push((n as f64, g.pooled, g.pooled_stderr));
    }
    out.table("glauber.csv", csv);
    if pts.len() >= 3 {
        let fit = scaling_slope(&pts)?;
        out.quantity("norm_slope", fit.slope);
        out.detail("norm_slope", slope_json(&fit));
    }
    out.detail("observable", json!(phi.label));
    Ok(out)
}

fn phase_grid(cfg: &ExperimentConfig, t_end: f64) -> PhaseGrid {
    let m = cfg.model();
    let mut g = PhaseGrid::default_for(&m.density, &m.potential, t_end);
    if let Some(nx) = cfg.grid.vlasov_nx {
        g.nx = nx;
    }
    if let Some(nv) = cfg.grid.vlasov_nv {
        g.nv = nv;
    }
    if let Some(dt) = cfg.grid.vlasov_dt {
        g.dt = dt;
    }
    g
}

fn meanfield_bias(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let m = cfg.model();
    let time = cfg.plan.times[0];
    let samples = ensemble(cfg)?;
    let grid = phase_grid(cfg, time);
    let sol = solve_vlasov(&m.density, &m.potential, &grid, &[time])?;
    let flow = MeanFieldFlow::new(&sol, &m.potential, grid.dt);
    let steps = (time / cfg.plan.dt).round() as usize;
    let q = flow_quadrature(&flow, &m.density, &m.observables, cfg.plan.dt, steps, cfg.grid.quad_nx, cfg.grid.quad_nv)?;
    let mut out = RunOutput::default();
    let mut csv = String::from("N,observable,mean,reference,bias,stderr,sd\n");
    let mut refs = serde_json::Map::new();
    for (o, phi) in m.observables.iter().enumerate() {
        let mut bias = Vec::new();
        let mut sd = Vec::new();
        for sm in &samples {
            let ys = sm.column(0, o);
            let r = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / r;
            let s = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
            let _ = writeln!(csv, "{},{},{:.10e},{:.10e},{:.4e},{:.4e},{:.4e}", sm.n, phi.label, mean, q[o], mean - q[o], s / r.sqrt(), s);
            bias.push((sm.n as f64, mean - q[o], s / r.sqrt()));
            sd.push((sm.n as f64, s, s / (2.0 * (r - 1.0)).sqrt()));
        }
        refs.insert(
            phi.label.clone(),
            json!({ "flow_quadrature": q[o], "vlasov_grid": sol.snapshots[0].pairing(phi) }),
        );
        if bias.len() >= 3 {
            let fb = scaling_slope(&bias)?;
            let fs = scaling_slope(&sd)?;
            if o == 0 {
                out.quantity("bias_slope", fb.slope);
                out.quantity("sd_slope", fs.slope);
            }
            out.detail(&format!("{}/bias_slope", phi.label), slope_json(&fb));
            out.detail(&format!("{}/sd_slope", phi.label), slope_json(&fs));
        }
    }
    out.table("bias.csv", csv);
    out.detail("references", Value::Object(refs));
    out.detail("vlasov_mass_error", json!(sol.max_mass_error));
    Ok(out)
}

fn bogolyubov_variance(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let m = cfg.model();
    let opts = H2Options { dt: cfg.grid.h2_dt, ..H2Options::new(cfg.plan.times.clone()) };
    let tr = evolve_h2(&m.density, &m.potential, H2Grid::for_density(&m.density, cfg.grid.h2_nv), &opts)?;
    let mut out = RunOutput::default();
    let mut csv = String::from("time,observable,sigma2_h2,sigma2_adjoint,relative_difference\n");
    let mut worst: f64 = 0.0;
    for (snap, &t) in tr.snapshots.iter().zip(&cfg.plan.times) {
        for phi in &m.observables {
            let s2 = limiting_variance(phi, &m.density, snap)?;
            let adj = adjoint_observable(phi, &m.density, &m.potential, t, AdjointOptions { dt: cfg.grid.h2_dt, nv: cfg.grid.adjoint_nv })?;
            let rel = (adj.variance() - s2).abs() / s2.abs().max(1e-300);
            worst = worst.max(rel);
            let _ = writeln!(csv, "{},{},{:.10e},{:.10e},{:.3e}", t, phi.label, s2, adj.variance(), rel);
        }
    }
    out.table("variance.csv", csv);
    if let Some(body) = tr.snapshots.last().and_then(|s| s.to_csv(1, "")) {
        out.table("h2_mode1.csv", strip_hash(body));
    }
    out.quantity("variance_routes", worst);
    out.detail("dropped_tail", json!(tr.dropped_tail));
    Ok(out)
}

fn clt(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let m = cfg.model();
    let samples = ensemble(cfg)?;
    let source = if cfg.plan.variance == "limit" {
        let tr = evolve_h2(&m.density, &m.potential, H2Grid::for_density(&m.density, cfg.grid.h2_nv), &H2Options::new(cfg.plan.times.clone()))?;
        VarianceSource::Limit(limiting_variance(&m.observables[0], &m.density, &tr.snapshots[0])?)
    } else {
        VarianceSource::MonteCarlo
    };
    let data: Vec<(usize, Vec<f64>)> = samples.iter().map(|sm| (sm.n, sm.column(0, 0))).collect();
    let rep = clt_experiment(&data, source, cfg.plan.seed)?;
    let mut out = RunOutput::default();
    out.table("clt.csv", strip_hash(rep.to_csv("")));
    if let Some(last) = rep.rows.last() {
        out.quantity("d_k_final", last.d_k);
    }
    out.detail("monotone", json!(rep.monotone));
    if let Some(fit) = &rep.slope_d_k {
        out.detail("d_k_slope", slope_json(fit));
    }
    out.detail("observable", json!(m.observables[0].label));
    Ok(out)
}

fn dispersion_scan(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let m = cfg.model();
    let disp = Dispersion::new(&m.density, &m.potential, cfg.grid.ny)?;
    let s = &cfg.scan;
    let ys: Vec<f64> = (0..s.points).map(|i| s.y_min + (s.y_max - s.y_min) * i as f64 / (s.points - 1) as f64).collect();
    let mut out = RunOutput::default();
    out.table("dispersion.csv", disp.scan_csv(&ys, s.side)?);
    let mut min_abs = f64::INFINITY;
    let mut modes = 0;
    for n in disp.modes() {
        modes += 1;
        for &y in &ys {
            min_abs = min_abs.min(disp.eval(n, Frequency::Boundary { y, side: s.side })?.norm());
        }
    }
    out.quantity("min_abs_eps", min_abs);
    out.detail("modes", json!(modes));
    Ok(out)
}

fn test_name(t: &VelocityTest) -> String {
    match t {
        VelocityTest::Polynomial(terms) => terms
            .iter()
            .map(|(c, [a, b])| format!("{c}*v1^{a}*v2^{b}"))
            .collect::<Vec<_>>()
            .join("+"),
        VelocityTest::Gaussian(w) => format!("exp(-|v|^2/{w:.6}^2)"),
    }
}

fn lb_eval(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let m = cfg.model();
    let field = PlaneField::from_density(&m.density, cfg.grid.plane_n)?;
    let lb = lb_operator(&field, &m.potential)?;
    let moments = [
        lb.value.integral(),
        lb.value.moment(|v| v[0]),
        lb.value.moment(|v| v[1]),
        lb.value.moment(|v| v[0] * v[0] + v[1] * v[1]),
    ];
    let conservation = moments.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let entropy = entropy_production(&field, &m.potential)?;
    let mut out = RunOutput::default();
    let mut csv = String::from("test,pairing,flux_pairing\n");
    for t in VelocityTest::standard() {
        let _ = writeln!(csv, "\"{}\",{:.10e},{:.10e}", test_name(&t), lb.pairing(&t), lb.flux_pairing(&t));
    }
    out.table("lb_pairings.csv", csv);
    out.table("lb_field.csv", lb.value.to_csv());
    out.quantity("conservation", conservation);
    out.detail("entropy_production", json!(entropy));
    out.detail("l1_over_diffusion", json!(lb.value.l1_norm() / lb.diffusion_l1.max(1e-300)));
    out.detail("min_abs_eps", json!(lb.min_abs_eps));
    out.detail("pv_refinement_change", json!(lb.pv_refinement_change));
    Ok(out)
}

fn lb_laplace(cfg: &ExperimentConfig) -> chaoslab::Result<RunOutput> {
    let m = cfg.model();
    let chi = BumpWeight::new(0.5, 1.5, 1.0)?;
    let opts = LaplaceOptions { grid_n: cfg.grid.plane_n, ny: cfg.grid.ny, dt: cfg.grid.drive_dt };
    let rep = laplace_consistency(&m.density, &m.potential, &chi, &cfg.plan.t_n, &VelocityTest::standard(), opts)?;
    let mut out = RunOutput::default();
    out.table("laplace.csv", strip_hash(rep.to_csv("")));
    if let Some(d) = rep.deviation.last() {
        out.quantity("deviation_final", *d);
    }
    out.detail("deviation", json!(rep.deviation));
    out.detail("decreasing", json!(rep.is_decreasing()));
    Ok(out)
}

fn verify() -> chaoslab::Result<RunOutput> {
    let rep = run_verify()?;
    let mut out = RunOutput::default();
    out.table("verify.csv", strip_hash(rep.to_csv("")));
    out.quantity("pass_count", rep.passed() as f64);
    let failures: Vec<String> = rep.checks.iter().filter(|c| !c.passed).map(|c| format!("{}::{}", c.module, c.name)).collect();
    out.detail("checks", json!(rep.checks.len()));
    out.detail("failures", json!(failures));
    out.failed = !rep.all_passed();
    Ok(out)
}

/// Drop a leading `# config_hash` line written by a core table writer.
fn strip_hash(body: String) -> String {
    match body.strip_prefix("# config_hash=") {
        Some(rest) => rest.split_once('\n').map(|(_, b)| b.to_string()).unwrap_or_default(),
        None => body,
    }
}
