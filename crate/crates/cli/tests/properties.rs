use chaoslab_cli::{parse_config, Kind};
use proptest::prelude::*;

fn config(ns: &[i64], replicas: i64) -> String {
    format!(
        "[model]\npotential = \"potential_1d\"\ndensity = \"inhomogeneous_1d\"\nobservables = [\"cos_x\"]\n[plan]\nns = {ns:?}\nreplicas = {replicas}\ntimes = [0.1]\n"
    )
}

proptest! {
    #[test]
    fn every_small_particle_count_is_reported(ns in prop::collection::vec(0i64..40, 1..8)) {
        let res = parse_config(&config(&ns, 64), Kind::CumulantScan);
        let bad: Vec<usize> = ns.iter().enumerate().filter(|(_, n)| **n < 2).map(|(i, _)| i).collect();
        match res {
            Ok(cfg) => {
                prop_assert!(bad.is_empty());
                prop_assert_eq!(cfg.plan.ns.len(), ns.len());
            }
            Err(errs) => {
                let flagged: Vec<String> = errs.iter().filter(|e| e.message == "N must be ≥ 2").map(|e| e.path.clone()).collect();
                let expected: Vec<String> = bad.iter().map(|i| format!("plan.ns[{i}]")).collect();
                prop_assert_eq!(flagged, expected);
            }
        }
    }

    #[test]
    fn parsing_is_total(text in "[a-z\\[\\]=\" \n0-9.]{0,80}") {
        for kind in Kind::ALL {
            let _ = parse_config(&text, kind);
        }
    }

    #[test]
    fn budget_verdict_matches_cost(budget in 1e3f64..1e9) {
        let text = config(&[16, 32, 64], 64).replace("times = [0.1]", &format!("times = [0.1]\nbudget = {budget:e}"));
        match parse_config(&text, Kind::CumulantScan) {
            Ok(cfg) => prop_assert!(cfg.estimated_cost().unwrap() <= budget),
            Err(errs) => prop_assert!(errs.iter().any(|e| e.path == "plan.budget")),
        }
    }
}
