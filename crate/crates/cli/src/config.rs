//! Experiment configuration: TOML text validated against a fixed schema, reporting every error.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chaoslab::dynamics::{ForceMethod, SimConfig};
use chaoslab::ensemble::{ReplicaPlan, DEFAULT_BUDGET};
use chaoslab::model::{presets, InitialDensity, Observable, Spatial, TorusPotential, VelocityProfile};
use toml::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    CumulantScan,
    GlauberScan,
    MeanfieldBias,
    BogolyubovVariance,
    Clt,
    DispersionScan,
    LbEval,
    LbLaplace,
    Verify,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::CumulantScan,
        Kind::GlauberScan,
        Kind::MeanfieldBias,
        Kind::BogolyubovVariance,
        Kind::Clt,
        Kind::DispersionScan,
        Kind::LbEval,
        Kind::LbLaplace,
        Kind::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::CumulantScan => "cumulant-scan",
            Kind::GlauberScan => "glauber-scan",
            Kind::MeanfieldBias => "meanfield-bias",
            Kind::BogolyubovVariance => "bogolyubov-variance",
            Kind::Clt => "clt",
            Kind::DispersionScan => "dispersion-scan",
            Kind::LbEval => "lb-eval",
            Kind::LbLaplace => "lb-laplace",
            Kind::Verify => "verify",
        }
    }

    fn uses_ensemble(self) -> bool {
        matches!(self, Kind::CumulantScan | Kind::GlauberScan | Kind::MeanfieldBias | Kind::Clt)
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown experiment kind \"{s}\""))
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One validation failure, qualified by its key path.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub potential_name: String,
    pub density_name: String,
    pub potential: TorusPotential,
    pub density: InitialDensity,
    pub observables: Vec<Observable>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanConfig {
    pub ns: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub dt: f64,
    pub budget: f64,
    pub orders: Vec<usize>,
    pub resamples: usize,
    pub tuples: usize,
    pub glauber_order: usize,
    pub p: f64,
    pub variance: String,
    pub t_n: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub vlasov_nx: Option<usize>,
    pub vlasov_nv: Option<usize>,
    pub vlasov_dt: Option<f64>,
    pub adjoint_nv: usize,
    pub h2_nv: usize,
    pub h2_dt: f64,
    pub ny: usize,
    pub plane_n: usize,
    pub drive_dt: f64,
    pub quad_nx: usize,
    pub quad_nv: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub y_min: f64,
    pub y_max: f64,
    pub points: usize,
    pub side: f64,
}

/// Declared tolerance `[target, tol]` for a named summary quantity.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Tolerance {
    pub target: f64,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub model: Option<ModelConfig>,
    pub plan: PlanConfig,
    pub grid: GridConfig,
    pub scan: ScanConfig,
    pub checks: BTreeMap<String, Tolerance>,
    pub out_dir: String,
}

impl ExperimentConfig {
    pub fn model(&self) -> &ModelConfig {
        self.model.as_ref().expect("validated model section")
    }

    pub fn sim(&self, t_end: f64) -> chaoslab::Result<SimConfig> {
        SimConfig::new(self.model().potential.clone(), self.plan.dt, t_end, ForceMethod::FourierAccelerated)
    }

    pub fn t_end(&self) -> f64 {
        self.plan.times.iter().copied().fold(0.0, f64::max)
    }

    /// Particle·mode·step work of the configured experiment.
    pub fn estimated_cost(&self) -> Option<f64> {
        let m = self.model.as_ref()?;
        let sim = self.sim(self.t_end().max(self.plan.dt)).ok()?;
        Some(match self.kind {
            Kind::GlauberScan => {
                let steps = sim.total_steps().max(1) as f64;
                let subsets = ((1usize << self.plan.glauber_order) - 1) as f64;
                let runs = self.plan.replicas as f64 * (self.plan.tuples as f64 * subsets * self.plan.resamples as f64 + 1.0);
                self.plan.ns.iter().map(|&n| runs * n as f64 * steps).sum()
            }
            _ => ReplicaPlan {
                ns: self.plan.ns.clone(),
                replicas: self.plan.replicas,
                master_seed: self.plan.seed,
                sim,
                density: m.density.clone(),
                observables: m.observables.clone(),
                sample_times: self.plan.times.clone(),
                budget: self.plan.budget,
            }
            .cost(),
        })
    }
}

pub fn potential_preset(name: &str) -> Option<TorusPotential> {
    Some(match name {
        "potential_1d" => presets::potential_1d(),
        "potential_1d_weak" => presets::potential_1d_weak(),
        "potential_1d_homogeneous" => presets::potential_1d_homogeneous(),
        "potential_2d" => presets::potential_2d(),
        _ => return None,
    })
}

pub fn density_preset(name: &str) -> Option<InitialDensity> {
    Some(match name {
        "inhomogeneous_1d" => presets::inhomogeneous_1d(),
        "homogeneous_1d" => presets::homogeneous_1d(),
        _ => return presets::densities_2d().into_iter().find(|(n, _)| format!("{n}_2d") == name).map(|(_, d)| d),
    })
}

pub fn observable_preset(name: &str) -> Option<Observable> {
    Some(match name {
        "cos_x" => presets::obs_cos_x(),
        "v2" => presets::obs_v2(),
        "skew" => presets::obs_skew(),
        _ => return None,
    })
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("model", &["potential", "density", "observables"]),
    ("plan", &["ns", "replicas", "seed", "times", "dt", "budget", "orders", "resamples", "tuples", "order", "p", "variance", "t_n"]),
    ("grid", &["vlasov_nx", "vlasov_nv", "vlasov_dt", "adjoint_nv", "h2_nv", "h2_dt", "ny", "plane_n", "drive_dt", "quad_nx", "quad_nv"]),
    ("scan", &["y_min", "y_max", "points", "side"]),
    ("check", &["kappa2_slope", "kappa3_slope", "norm_slope", "bias_slope", "sd_slope", "d_k_final", "variance_routes", "deviation_final", "conservation", "pass_count"]),
    ("output", &["dir"]),
];

struct Reader<'a> {
    root: &'a toml::Table,
    errors: Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError { path: path.into(), message: message.into() });
    }

    fn get(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.root.get(section).and_then(|s| s.as_table()).and_then(|t| t.get(key))
    }

    fn float(&mut self, section: &str, key: &str) -> Option<f64> {
        let path = format!("{section}.{key}");
        match self.get(section, key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.err(path, "expected a number");
                None
            }
        }
    }

    fn float_or(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.float(section, key).unwrap_or(default)
    }

    fn uint(&mut self, section: &str, key: &str) -> Option<usize> {
        let path = format!("{section}.{key}");
        match self.get(section, key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.err(path, "expected a nonnegative integer");
                None
            }
        }
    }

    fn uint_or(&mut self, section: &str, key: &str, default: usize) -> usize {
        self.uint(section, key).unwrap_or(default)
    }

    fn string(&mut self, section: &str, key: &str) -> Option<String> {
        let path = format!("{section}.{key}");
        match self.get(section, key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.err(path, "expected a string");
                None
            }
        }
    }

    fn array(&mut self, section: &str, key: &str) -> Option<&'a Vec<Value>> {
        let path = format!("{section}.{key}");
        match self.get(section, key)? {
            Value::Array(a) => Some(a),
            _ => {
                self.err(path, "expected a list");
                None
            }
        }
    }

    fn floats(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let a = self.array(section, key)?;
        let mut out = Vec::new();
        for (i, v) in a.iter().enumerate() {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(x) => out.push(*x as f64),
                _ => self.err(format!("{section}.{key}[{i}]"), "expected a number"),
            }
        }
        Some(out)
    }

    fn ints(&mut self, section: &str, key: &str) -> Option<Vec<i64>> {
        let a = self.array(section, key)?;
        let mut out = Vec::new();
        for (i, v) in a.iter().enumerate() {
            match v {
                Value::Integer(x) => out.push(*x),
                _ => self.err(format!("{section}.{key}[{i}]"), "expected an integer"),
            }
        }
        Some(out)
    }

    fn strings(&mut self, section: &str, key: &str) -> Option<Vec<String>> {
        let a = self.array(section, key)?;
        let mut out = Vec::new();
        for (i, v) in a.iter().enumerate() {
            match v {
                Value::String(s) => out.push(s.clone()),
                _ => self.err(format!("{section}.{key}[{i}]"), "expected a string"),
            }
        }
        Some(out)
    }
}

/// Summary quantities a `[check]` entry may target, per kind.
pub fn check_keys(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::CumulantScan => &["kappa2_slope", "kappa3_slope"],
        Kind::GlauberScan => &["norm_slope"],
        Kind::MeanfieldBias => &["bias_slope", "sd_slope"],
        Kind::Clt => &["d_k_final"],
        Kind::BogolyubovVariance => &["variance_routes"],
        Kind::LbEval => &["conservation"],
        Kind::LbLaplace => &["deviation_final"],
        Kind::Verify => &["pass_count"],
        Kind::DispersionScan => &[],
    }
}

fn required_keys(kind: Kind) -> &'static [(&'static str, &'static str)] {
    match kind {
        Kind::CumulantScan | Kind::MeanfieldBias | Kind::Clt | Kind::GlauberScan => &[
            ("model", "potential"),
            ("model", "density"),
            ("model", "observables"),
            ("plan", "ns"),
            ("plan", "replicas"),
        ],
        Kind::BogolyubovVariance => &[("model", "potential"), ("model", "density"), ("model", "observables"), ("plan", "times")],
        Kind::DispersionScan | Kind::LbEval | Kind::LbLaplace => &[("model", "potential"), ("model", "density")],
        Kind::Verify => &[],
    }
}

/// Parse and validate `text` for experiment `kind`, returning every error found.
pub fn parse_config(text: &str, kind: Kind) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let root: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => return Err(vec![ConfigError { path: "<document>".into(), message: e.to_string().trim().to_string() }]),
    };
    let mut r = Reader { root: &root, errors: Vec::new() };
    for (key, value) in &root {
        if key == "kind" {
            match value.as_str().map(Kind::from_str) {
                Some(Ok(k)) if k == kind => {}
                Some(Ok(k)) => r.err("kind", format!("config declares \"{k}\" but \"{kind}\" was requested")),
                _ => r.err("kind", "expected an experiment kind string"),
            }
            continue;
        }
        match SECTIONS.iter().find(|(s, _)| s == key) {
            None => r.err(key.clone(), "unknown key"),
            Some((section, keys)) => match value.as_table() {
                None => r.err(key.clone(), "expected a table"),
                Some(t) => {
                    for k in t.keys() {
                        if !keys.contains(&k.as_str()) {
                            r.err(format!("{section}.{k}"), "unknown key");
                        }
                    }
                }
            },
        }
    }
    for (section, key) in required_keys(kind) {
        if r.get(section, key).is_none() {
            r.err(format!("{section}.{key}"), "missing required field");
        }
    }

    let model = read_model(&mut r, kind);
    let plan = read_plan(&mut r, kind);
    let grid = GridConfig {
        vlasov_nx: r.uint("grid", "vlasov_nx"),
        vlasov_nv: r.uint("grid", "vlasov_nv"),
        vlasov_dt: r.float("grid", "vlasov_dt"),
        adjoint_nv: r.uint_or("grid", "adjoint_nv", 2001),
        h2_nv: r.uint_or("grid", "h2_nv", 129),
        h2_dt: r.float_or("grid", "h2_dt", 1e-3),
        ny: r.uint_or("grid", "ny", 801),
        plane_n: r.uint_or("grid", "plane_n", if kind == Kind::LbLaplace { 32 } else { 64 }),
        drive_dt: r.float_or("grid", "drive_dt", 1e-3),
        quad_nx: r.uint_or("grid", "quad_nx", 128),
        quad_nv: r.uint_or("grid", "quad_nv", 401),
    };
    for (key, v) in [("h2_nv", grid.h2_nv), ("ny", grid.ny), ("quad_nv", grid.quad_nv)] {
        if v < 5 {
            r.err(format!("grid.{key}"), "needs at least 5 nodes");
        }
    }
    if grid.adjoint_nv < 8 {
        r.err("grid.adjoint_nv", "needs at least 8 nodes");
    }
    if grid.plane_n < 16 {
        r.err("grid.plane_n", "needs at least 16 nodes per axis");
    }
    for (key, v) in [("vlasov_dt", grid.vlasov_dt.unwrap_or(1.0)), ("h2_dt", grid.h2_dt), ("drive_dt", grid.drive_dt)] {
        if !(v > 0.0) {
            r.err(format!("grid.{key}"), "must be positive");
        }
    }
    let scan = ScanConfig {
        y_min: r.float_or("scan", "y_min", -12.0),
        y_max: r.float_or("scan", "y_max", 12.0),
        points: r.uint_or("scan", "points", 97),
        side: r.float_or("scan", "side", 1.0),
    };
    if !(scan.y_max > scan.y_min) || scan.points < 2 {
        r.err("scan", "needs y_min < y_max and at least 2 points");
    }
    if scan.side != 1.0 && scan.side != -1.0 {
        r.err("scan.side", "must be +1 or -1");
    }
    let mut checks = BTreeMap::new();
    if let Some(t) = root.get("check").and_then(|c| c.as_table()) {
        for key in t.keys() {
            if let Some(v) = r.floats("check", key) {
                if !check_keys(kind).contains(&key.as_str()) {
                    r.err(format!("check.{key}"), format!("{kind} does not report this quantity"));
                } else if v.len() == 2 && v[1] >= 0.0 {
                    checks.insert(key.clone(), Tolerance { target: v[0], tol: v[1] });
                } else {
                    r.err(format!("check.{key}"), "expected [target, tolerance] with tolerance ≥ 0");
                }
            }
        }
    }
    if kind == Kind::Clt && plan.variance == "limit" && model.as_ref().is_some_and(|m| !m.density.is_homogeneous()) {
        r.err("plan.variance", "the limiting variance is only available for a homogeneous density");
    }
    let out_dir = r.string("output", "dir").unwrap_or_else(|| "chaoslab-out".into());

    let cfg = ExperimentConfig { kind, model, plan, grid, scan, checks, out_dir };
    if r.errors.is_empty() && kind.uses_ensemble() {
        if let Some(cost) = cfg.estimated_cost() {
            if cost > cfg.plan.budget {
                r.err("plan.budget", format!("budget exceeded: estimated cost {cost:.3e} exceeds cap {:.3e}", cfg.plan.budget));
            }
        }
    }
    if r.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(r.errors)
    }
}

fn read_model(r: &mut Reader, kind: Kind) -> Option<ModelConfig> {
    if kind == Kind::Verify {
        return None;
    }
    let potential = r.get("model", "potential").and_then(|v| model_entry(r, "model.potential", v, potential_preset, parametric_potential));
    let density = r.get("model", "density").and_then(|v| model_entry(r, "model.density", v, density_preset, parametric_density));
    let pot_name = r.get("model", "potential").map(entry_name);
    let den_name = r.get("model", "density").map(entry_name);
    let mut observables = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, name) in r.strings("model", "observables").unwrap_or_default().into_iter().enumerate() {
        if let Some(first) = seen.get(&name) {
            r.err(format!("model.observables[{i}]"), format!("duplicate observable label \"{name}\" (also at model.observables[{first}])"));
            continue;
        }
        seen.insert(name.clone(), i);
        match observable_preset(&name) {
            Some(o) => observables.push(o),
            None => r.err(format!("model.observables[{i}]"), format!("unknown observable preset \"{name}\"")),
        }
    }
    let (potential, density) = (potential?, density?);
    if potential.dim() != density.dim() {
        r.err("model", format!("potential is {}-dimensional but density is {}-dimensional", potential.dim(), density.dim()));
        return None;
    }
    let needs_1d = matches!(kind, Kind::CumulantScan | Kind::GlauberScan | Kind::MeanfieldBias | Kind::Clt | Kind::BogolyubovVariance);
    if needs_1d && density.dim() != 1 {
        r.err("model.density", format!("{kind} runs one-dimensional presets"));
    }
    if kind == Kind::BogolyubovVariance && !density.is_homogeneous() {
        r.err("model.density", "the variance formula needs a homogeneous density");
    }
    if matches!(kind, Kind::LbEval | Kind::LbLaplace) && density.dim() != 2 {
        r.err("model.density", format!("{kind} needs a two-dimensional density"));
    }
    Some(ModelConfig {
        potential_name: pot_name.unwrap_or_default(),
        density_name: den_name.unwrap_or_default(),
        potential,
        density,
        observables,
    })
}

fn entry_name(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A preset is either a name or an inline table `{ preset = "...", <numeric parameters> }`.
fn model_entry<T>(
    r: &mut Reader,
    path: &str,
    v: &Value,
    named: fn(&str) -> Option<T>,
    parametric: fn(&str, &mut Params) -> Result<T, String>,
) -> Option<T> {
    match v {
        Value::String(name) => {
            let found = named(name);
            if found.is_none() {
                r.err(path, format!("unknown preset \"{name}\""));
            }
            found
        }
        Value::Table(t) => {
            let Some(preset) = t.get("preset").and_then(|p| p.as_str()) else {
                r.err(format!("{path}.preset"), "missing required field");
                return None;
            };
            let mut params = Params { table: t, errors: Vec::new(), used: vec!["preset"] };
            let out = parametric(preset, &mut params);
            for k in t.keys().filter(|_| out.is_ok()) {
                if !params.used.contains(&k.as_str()) {
                    params.errors.push(ConfigError { path: k.clone(), message: "unknown key".into() });
                }
            }
            for e in params.errors {
                r.err(format!("{path}.{}", e.path), e.message);
            }
            match out {
                Ok(x) => Some(x),
                Err(m) => {
                    r.err(path, m);
                    None
                }
            }
        }
        _ => {
            r.err(path, "expected a preset name or a parameter table");
            None
        }
    }
}

struct Params<'a> {
    table: &'a toml::Table,
    errors: Vec<ConfigError>,
    used: Vec<&'static str>,
}

impl Params<'_> {
    fn num(&mut self, key: &'static str, default: f64) -> f64 {
        self.used.push(key);
        match self.table.get(key) {
            None => default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(_) => {
                self.errors.push(ConfigError { path: key.into(), message: "expected a number".into() });
                default
            }
        }
    }

    fn nums(&mut self, key: &'static str, default: &[f64]) -> Vec<f64> {
        self.used.push(key);
        match self.table.get(key).and_then(|v| v.as_array()) {
            None if self.table.contains_key(key) => {
                self.errors.push(ConfigError { path: key.into(), message: "expected a list of numbers".into() });
                default.to_vec()
            }
            None => default.to_vec(),
            Some(a) => a.iter().map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)).unwrap_or(f64::NAN)).collect(),
        }
    }
}

fn parametric_potential(preset: &str, p: &mut Params) -> Result<TorusPotential, String> {
    match preset {
        "cosine_1d" => Ok(TorusPotential::cosine_1d(p.num("amplitude", 1.0))),
        "gaussian_2d" => {
            let nmax = p.num("nmax", 3.0);
            if !(nmax >= 1.0 && nmax <= 16.0 && nmax.fract() == 0.0) {
                return Err("nmax must be an integer in 1..=16".into());
            }
            Ok(TorusPotential::gaussian_2d(p.num("amplitude", 0.019), nmax as i32))
        }
        _ => Err(format!("unknown parametric potential \"{preset}\" (cosine_1d, gaussian_2d)")),
    }
}

fn parametric_density(preset: &str, p: &mut Params) -> Result<InitialDensity, String> {
    let dim = p.num("dim", 1.0);
    if dim != 1.0 && dim != 2.0 {
        return Err("dim must be 1 or 2".into());
    }
    let dim = dim as usize;
    let modulation = p.num("modulation", 0.0);
    let spatial = if modulation == 0.0 {
        Spatial::Homogeneous
    } else if dim == 1 {
        Spatial::Fourier(vec![([1, 0, 0], modulation)])
    } else {
        return Err("modulation is only available in one dimension".into());
    };
    let velocity = match preset {
        "bump" => VelocityProfile::Bump { radius: p.num("radius", 1.0), q: p.num("q", 4.0) },
        "aniso_bump" => {
            let r = p.nums("radii", &[1.0, 0.6]);
            if r.len() != dim {
                return Err(format!("radii needs {dim} entries"));
            }
            let mut radii = [1.0; 3];
            radii[..dim].copy_from_slice(&r);
            VelocityProfile::AnisoBump { radii, q: p.num("q", 4.0) }
        }
        "trunc_gauss" => VelocityProfile::TruncGauss { sigma: p.num("sigma", 0.35), radius: p.num("radius", 1.9) },
        _ => return Err(format!("unknown parametric density \"{preset}\" (bump, aniso_bump, trunc_gauss)")),
    };
    InitialDensity::new(dim, spatial, velocity).map_err(|e| e.to_string())
}

fn read_plan(r: &mut Reader, kind: Kind) -> PlanConfig {
    let ns_raw = r.ints("plan", "ns").unwrap_or_default();
    let mut ns = Vec::new();
    for (i, n) in ns_raw.iter().enumerate() {
        if *n < 2 {
            r.err(format!("plan.ns[{i}]"), "N must be ≥ 2");
        } else {
            ns.push(*n as usize);
        }
    }
    let replicas = r.uint("plan", "replicas").unwrap_or(0);
    if kind.uses_ensemble() && replicas != 0 && replicas < 32 {
        r.err("plan.replicas", "need at least 32 replicas");
    }
    let default_times: Vec<f64> = match kind {
        Kind::CumulantScan => vec![0.0, 1.0],
        _ => vec![1.0],
    };
    let times = r.floats("plan", "times").unwrap_or(default_times);
    if times.is_empty() {
        r.err("plan.times", "needs at least one time");
    }
    for (i, t) in times.iter().enumerate() {
        if !(*t >= 0.0 && t.is_finite()) {
            r.err(format!("plan.times[{i}]"), "times must be finite and ≥ 0");
        }
    }
    let dt = r.float_or("plan", "dt", 0.01);
    if !(dt > 0.0) {
        r.err("plan.dt", "must be positive");
    } else {
        for (i, t) in times.iter().enumerate() {
            let s = t / dt;
            if (s - s.round()).abs() > 1e-6 {
                r.err(format!("plan.times[{i}]"), format!("{t} is not a multiple of dt = {dt}"));
            }
        }
    }
    let orders: Vec<usize> = r.ints("plan", "orders").map(|v| v.into_iter().map(|x| x.max(0) as usize).collect()).unwrap_or_else(|| vec![2, 3]);
    for (i, m) in orders.iter().enumerate() {
        if !(1..=4).contains(m) {
            r.err(format!("plan.orders[{i}]"), "cumulant order must be in 1..=4");
        }
    }
    let glauber_order = r.uint_or("plan", "order", 1);
    if !(1..=2).contains(&glauber_order) {
        r.err("plan.order", "Glauber order must be 1 or 2");
    }
    let resamples = r.uint_or("plan", "resamples", 16);
    if resamples < 8 {
        r.err("plan.resamples", "need at least 8 resamples");
    }
    let variance = r.string("plan", "variance").unwrap_or_else(|| "monte-carlo".into());
    if variance != "monte-carlo" && variance != "limit" {
        r.err("plan.variance", "expected \"monte-carlo\" or \"limit\"");
    }
    let t_n = r.floats("plan", "t_n").unwrap_or_else(|| vec![2.0, 4.0, 8.0]);
    if t_n.iter().any(|t| !(*t > 0.0)) {
        r.err("plan.t_n", "entries must be positive");
    }
    let budget = r.float_or("plan", "budget", DEFAULT_BUDGET);
    if kind.uses_ensemble() && matches!(kind, Kind::MeanfieldBias | Kind::Clt | Kind::GlauberScan) && times.len() != 1 {
        r.err("plan.times", format!("{kind} takes a single time"));
    }
    PlanConfig {
        ns,
        replicas,
        seed: r.uint_or("plan", "seed", 1) as u64,
        times,
        dt,
        budget,
        orders,
        resamples,
        tuples: r.uint_or("plan", "tuples", 4).max(1),
        glauber_order,
        p: r.float_or("plan", "p", 2.0),
        variance,
        t_n,
    }
}
