use std::fs;
use std::path::Path;
use std::process::Command;

use chaoslab_cli::{parse_config, Kind};

const MINIMAL: &str = r#"
[model]
potential = "potential_1d"
density = "inhomogeneous_1d"
observables = ["cos_x"]

[plan]
ns = [16, 32]
replicas = 64
times = [0.0, 0.1]
"#;

fn chaoslab(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_chaoslab")).current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn messages(text: &str, kind: Kind) -> Vec<String> {
    parse_config(text, kind).unwrap_err().iter().map(|e| e.to_string()).collect()
}

#[test]
fn minimal_config_takes_defaults() {
    let cfg = parse_config(MINIMAL, Kind::CumulantScan).unwrap();
    assert_eq!(cfg.plan.seed, 1);
    assert_eq!(cfg.plan.dt, 0.01);
    assert_eq!(cfg.plan.orders, vec![2, 3]);
    assert_eq!(cfg.out_dir, "chaoslab-out");
    assert!(cfg.checks.is_empty());
    assert_eq!(cfg.model().observables[0].label, "cos_x");
}

#[test]
fn particle_count_below_two_is_rejected() {
    let text = MINIMAL.replace("ns = [16, 32]", "ns = [0, 32]");
    let msgs = messages(&text, Kind::CumulantScan);
    assert!(msgs.iter().any(|m| m == "plan.ns[0]: N must be ≥ 2"), "{msgs:?}");
}

#[test]
fn duplicate_labels_name_both_positions() {
    let text = MINIMAL.replace(r#"["cos_x"]"#, r#"["cos_x", "v2", "cos_x"]"#);
    let msgs = messages(&text, Kind::CumulantScan);
    assert!(msgs.iter().any(|m| m.contains("model.observables[2]") && m.contains("model.observables[0]")), "{msgs:?}");
}

#[test]
fn all_errors_are_reported_together() {
    let text = MINIMAL.replace("replicas = 64", "replicas = \"many\"\nfoo = 1").replace("potential_1d\"", "nope\"");
    let msgs = messages(&text, Kind::CumulantScan);
    assert!(msgs.iter().any(|m| m.starts_with("plan.replicas")), "{msgs:?}");
    assert!(msgs.iter().any(|m| m == "plan.foo: unknown key"), "{msgs:?}");
    assert!(msgs.iter().any(|m| m.starts_with("model.potential")), "{msgs:?}");
}

#[test]
fn missing_sections_and_kind_mismatch() {
    let msgs = messages("kind = \"clt\"\n", Kind::LbEval);
    assert!(msgs.iter().any(|m| m.starts_with("kind:")), "{msgs:?}");
    assert!(msgs.iter().any(|m| m == "model.potential: missing required field"), "{msgs:?}");
    let msgs = messages("[model]\npotential = \"potential_1d\"\ndensity = \"inhomogeneous_1d\"\n", Kind::LbEval);
    assert!(msgs.iter().any(|m| m.contains("two-dimensional")), "{msgs:?}");
}

#[test]
fn budget_refusal_reports_cost() {
    let text = MINIMAL.replace("replicas = 64", "replicas = 64\nbudget = 1000.0");
    let msgs = messages(&text, Kind::CumulantScan);
    assert!(msgs.iter().any(|m| m.starts_with("plan.budget: budget exceeded: estimated cost")), "{msgs:?}");
}

#[test]
fn checks_must_target_reported_quantities() {
    let text = format!("{MINIMAL}\n[check]\nnorm_slope = [-1.0, 0.2]\nkappa2_slope = [-1.0]\n");
    let msgs = messages(&text, Kind::CumulantScan);
    assert!(msgs.iter().any(|m| m.starts_with("check.norm_slope")), "{msgs:?}");
    assert!(msgs.iter().any(|m| m.starts_with("check.kappa2_slope: expected [target, tolerance]")), "{msgs:?}");
}

#[test]
fn invalid_config_exits_nonzero_with_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &MINIMAL.replace("ns = [16, 32]", "ns = [1]"));
    let out = chaoslab(dir.path(), &["cumulant-scan", "--config", &cfg, "--out", "o"]);
    assert!(!out.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["config_hash"].as_str().unwrap().len(), 64);
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/error.json")).unwrap()).unwrap();
    assert_eq!(saved, rec);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MINIMAL);
    let run = |out: &str| {
        let o = chaoslab(dir.path(), &["cumulant-scan", "--config", &cfg, "--out", out, "--seed", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read_to_string(dir.path().join(out).join("summary.json")).unwrap(),
            fs::read_to_string(dir.path().join(out).join("cumulants.csv")).unwrap(),
        )
    };
    let (a, ta) = run("a");
    let (b, tb) = run("b");
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let s: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(s["seed"], 5);
    assert!(ta.starts_with(&format!("# config_hash={}\n", s["config_hash"].as_str().unwrap())));
    let o = chaoslab(dir.path(), &["cumulant-scan", "--config", &cfg, "--out", "c", "--seed", "6"]);
    assert!(o.status.success());
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c/summary.json")).unwrap()).unwrap();
    assert_ne!(c["config_hash"], s["config_hash"]);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lb.toml",
        "[model]\npotential = \"potential_2d\"\ndensity = \"bump_2d\"\n[grid]\nplane_n = 24\n[check]\nconservation = [1.0, 1e-3]\n",
    );
    let out = chaoslab(dir.path(), &["lb-eval", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(s["checks"]["conservation"]["passed"], false);
    assert!(s["quantities"]["conservation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", "kind = \"verify\"\n");
    let out = chaoslab(dir.path(), &["verify", "--config", &cfg, "--out", "v", "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/summary.json")).unwrap()).unwrap();
    assert_eq!(s["details"]["failures"].as_array().unwrap().len(), 0);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threads"], 1);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        let kind: Kind = text.parse::<toml::Table>().unwrap()["kind"].as_str().unwrap().parse().unwrap();
        if let Err(e) = parse_config(&text, kind) {
            panic!("{}: {e:?}", p.display());
        }
    }
}

#[test]
fn presets_accept_numeric_parameters() {
    let text = MINIMAL
        .replace("potential = \"potential_1d\"", "potential = { preset = \"cosine_1d\", amplitude = 0.5 }")
        .replace("density = \"inhomogeneous_1d\"", "density = { preset = \"bump\", radius = 1.2, q = 3, modulation = 0.25 }");
    let cfg = parse_config(&text, Kind::CumulantScan).unwrap();
    assert_eq!(cfg.model().potential, chaoslab::model::TorusPotential::cosine_1d(0.5));
    assert!(!cfg.model().density.is_homogeneous());
    let bad = MINIMAL.replace("potential = \"potential_1d\"", "potential = { preset = \"cosine_1d\", amp = 0.5 }");
    let msgs = messages(&bad, Kind::CumulantScan);
    assert!(msgs.iter().any(|m| m == "model.potential.amp: unknown key"), "{msgs:?}");
    let bad = MINIMAL.replace("density = \"inhomogeneous_1d\"", "density = { preset = \"aniso_bump\", radii = [1.0, 0.5] }");
    let msgs = messages(&bad, Kind::CumulantScan);
    assert!(msgs.iter().any(|m| m.starts_with("model.density: radii needs 1 entries")), "{msgs:?}");
}
