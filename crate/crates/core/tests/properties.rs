use std::collections::BTreeMap;
use std::sync::OnceLock;

use chaoslab::bogolyubov::{bogolyubov_drive, evolve_h2, H2Grid, H2Options};
use chaoslab::dynamics::{integrate_with, ForceMethod, ParticleState, SimConfig};
use chaoslab::ensemble::estimate_cumulant;
use chaoslab::lenard_balescu::{entropy_production, lb_operator, Dispersion, Frequency, PlaneField};
use chaoslab::model::{presets, InitialDensity, Spatial, TorusPotential, VelocityProfile};
use chaoslab::partitions::{
    correlation_pairing_from_marginal_pairings, cumulants_to_moments, marginal_pairing_from_correlation_pairings, moments_to_cumulants,
    MomentVector,
};
use chaoslab::stats::{kolmogorov_distance, EmpiricalSample};
use num_complex::Complex64;
use proptest::prelude::*;

fn bump_dispersion() -> &'static Dispersion {
    static D: OnceLock<Dispersion> = OnceLock::new();
    D.get_or_init(|| Dispersion::new(&presets::bump_2d(), &presets::potential_2d(), 401).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_cumulant_round_trip(mu in prop::collection::vec(-2.0f64..2.0, 1..7)) {
        let back = cumulants_to_moments(&moments_to_cumulants(&MomentVector(mu.clone())));
        for (a, b) in mu.iter().zip(&back.0) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn pairing_expansions_invert(vals in prop::collection::vec(-1.5f64..1.5, 5)) {
        let marg: BTreeMap<usize, f64> = (1..=5).zip(vals.iter().copied()).collect();
        let corr: BTreeMap<usize, f64> =
            (1..=5).map(|m| (m, correlation_pairing_from_marginal_pairings(&marg, m).unwrap())).collect();
        for m in 1..=5 {
            let back = marginal_pairing_from_correlation_pairings(&corr, m).unwrap();
            prop_assert!((back - marg[&m]).abs() <= 1e-9 * (1.0 + marg[&m].abs()));
        }
    }

    #[test]
    fn k_statistics_are_shift_invariant_and_homogeneous(
        xs in prop::collection::vec(-3.0f64..3.0, 40..80),
        a in 0.2f64..3.0,
        b in -5.0f64..5.0,
    ) {
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        for m in [2usize, 3] {
            let kx = estimate_cumulant(&xs, m).unwrap().value;
            let ky = estimate_cumulant(&ys, m).unwrap().value;
            let scale = a.powi(m as i32);
            prop_assert!((ky - scale * kx).abs() <= 1e-8 * (1.0 + (scale * kx).abs()), "m={} {} vs {}", m, ky, scale * kx);
        }
    }

    #[test]
    fn kolmogorov_distance_is_bounded(xs in prop::collection::vec(-6.0f64..6.0, 1..200)) {
        let n = xs.len() as f64;
        let d = kolmogorov_distance(&EmpiricalSample::new(xs).unwrap());
        prop_assert!(d <= 1.0 + 1e-12);
        prop_assert!(d >= 0.5 / n - 1e-12);
    }

    #[test]
    fn dispersion_conjugate_symmetry_and_lower_bound(re in -3.0f64..3.0, im in 0.02f64..3.0) {
        let disp = bump_dispersion();
        let w = Complex64::new(re, im);
        for n in disp.modes() {
            let up = disp.eval(n, Frequency::Complex(w)).unwrap();
            let down = disp.eval(n, Frequency::Complex(w.conj())).unwrap();
            prop_assert!((up - down.conj()).norm() <= 1e-10);
            prop_assert!(up.norm() >= 1.0 - re.abs() / w.norm() - 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn momentum_is_conserved(seed in 0u64..1_000_000, n in 8usize..200, amp in 0.1f64..3.0) {
        let pot = TorusPotential::cosine_1d(amp);
        let cfg = SimConfig::new(pot, 1e-2, 0.5, ForceMethod::FourierAccelerated).unwrap();
        let mut st = ParticleState::sample(&presets::inhomogeneous_1d(), n, seed);
        let p0 = st.momentum()[0];
        integrate_with(&mut st, &cfg, &[50], |_, _| {});
        prop_assert!((st.momentum()[0] - p0).abs() <= 1e-11);
    }

    #[test]
    fn lb_conserves_and_dissipates(r1 in 0.5f64..1.2, r2 in 0.5f64..1.2, q in 2.0f64..4.0) {
        let f = InitialDensity::new(2, Spatial::Homogeneous, VelocityProfile::AnisoBump { radii: [r1, r2, 1.0], q }).unwrap();
        let pot = presets::potential_2d();
        let field = PlaneField::from_density(&f, 32).unwrap();
        let lb = lb_operator(&field, &pot).unwrap();
        let moments = [
            lb.value.integral(),
            lb.value.moment(|v| v[0]),
            lb.value.moment(|v| v[1]),
            lb.value.moment(|v| v[0] * v[0] + v[1] * v[1]),
        ];
        for m in moments {
            prop_assert!(m.abs() <= 1e-12 * (1.0 + lb.diffusion_l1));
        }
        prop_assert!(entropy_production(&field, &pot).unwrap() <= 1e-12);
    }

    #[test]
    fn h2_symmetries_and_drive_mass(amp in 0.1f64..2.0, t in 0.1f64..2.0) {
        let f = presets::homogeneous_1d();
        let pot = TorusPotential::cosine_1d(amp);
        let t = (t * 100.0).round() / 100.0;
        let tr = evolve_h2(&f, &pot, H2Grid::for_density(&f, 33), &H2Options { dt: 5e-3, ..H2Options::new(vec![t]) }).unwrap();
        let s = &tr.snapshots[0];
        prop_assert!(s.reality_error() <= 1e-9 * (1.0 + s.max_abs()));
        prop_assert!(s.exchange_error() <= 1e-9 * (1.0 + s.max_abs()));
        let d = bogolyubov_drive(s, &pot);
        prop_assert!(d.integral().abs() <= 1e-12);
    }
}
