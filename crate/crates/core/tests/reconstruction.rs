use std::f64::consts::PI;

use proptest::prelude::*;
use protoclone::doublewell::{level_gap, solve_levels, Level, Parity, WellGeometry};
use protoclone::exec::Exec;
use protoclone::probe::{probe_momentum, ProbeConfig};
use protoclone::reconstruction::{
    angular_error, calibration_constant, clone_state, invert_cos, measure_axis, monte_carlo, solve_phi, trial_rng,
    AxisPlan, MonteCarloSetup, SolveOptions,
};
use protoclone::spin::{angles_to_axis, axis_overlap_cos, BlochAngles};
use protoclone::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn demo() -> (WellGeometry, Level, ProbeConfig) {
    let g = WellGeometry::new(1.0, 1.0, 1250.0).unwrap();
    let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
    let gap = level_gap(&g, 1).unwrap();
    let probe = ProbeConfig::new(1e-3 * g.c() * gap, 100.0 / gap, 1e-3 * g.c()).unwrap();
    (g, lv, probe)
}

fn dot_cos(m: &BlochAngles, n: &BlochAngles) -> f64 {
    angles_to_axis(m).dot(&angles_to_axis(n))
}

#[test]
fn calibration_matches_ground_kick() {
    let (g, lv, probe) = demo();
    let c = calibration_constant(&g, &lv, &probe).unwrap();
    let p0 = probe_momentum(&BlochAngles::new(0.0, 0.0), &g, &lv, &probe).unwrap().p_final;
    assert!((c + p0).abs() <= 1e-15 * c);
    assert!(((c - 0.1 * 0.5 * 1.143_857_067_448_867_4) / c).abs() < 1e-9);
    let c2 = calibration_constant(&g, &lv, &probe.with_time(2.0 * probe.t).unwrap()).unwrap();
    assert!((c2 / c - 2.0).abs() < 1e-15);
}

#[test]
fn measured_cosines_match_dot_products() {
    let (g, lv, probe) = demo();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hidden = BlochAngles::new(1.1, 2.3);
    let z = measure_axis(&hidden, &BlochAngles::z_axis(), &g, &lv, &probe, 0.0, &mut rng).unwrap();
    assert!((z.cos_theta - 1.1f64.cos()).abs() < 1e-12);
    let self_axis = measure_axis(&hidden, &hidden, &g, &lv, &probe, 0.0, &mut rng).unwrap();
    assert!((self_axis.cos_theta - 1.0).abs() < 1e-12);
    for _ in 0..50 {
        let m = BlochAngles::new(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI));
        let n = BlochAngles::new(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI));
        let r = measure_axis(&m, &n, &g, &lv, &probe, 0.0, &mut rng).unwrap();
        assert!((r.cos_theta - dot_cos(&m, &n)).abs() < 1e-12);
        assert!((r.cos_theta - axis_overlap_cos(&m, &n)).abs() < 1e-12);
    }
}

#[test]
fn plan_exclusions() {
    let ok_n = BlochAngles::new(PI / 3.0, PI / 5.0);
    let ok_l = BlochAngles::new(2.0 * PI / 5.0, 4.0 * PI / 5.0);
    assert!(AxisPlan::new(ok_n, ok_l).is_ok());
    let bad = [
        (BlochAngles::new(0.0, PI / 5.0), ok_l),
        (BlochAngles::new(PI / 3.0, 0.0), ok_l),
        (ok_n, BlochAngles::new(0.0, 4.0 * PI / 5.0)),
        (ok_n, BlochAngles::new(PI / 3.0, 4.0 * PI / 5.0)),
        (ok_n, BlochAngles::new(2.0 * PI / 5.0, 0.0)),
        (ok_n, BlochAngles::new(2.0 * PI / 5.0, PI / 5.0)),
        (ok_n, BlochAngles::new(2.0 * PI / 5.0, PI / 5.0 + 5e-10)),
    ];
    for (n, l) in bad {
        assert!(matches!(AxisPlan::new(n, l), Err(Error::InvalidPlan(_))), "{n:?} {l:?}");
    }
}

#[test]
fn solve_phi_recovers_hidden_phase() {
    let plan = AxisPlan::default();
    let hidden = BlochAngles::new(0.9, 1.0);
    let cm = hidden.theta().cos();
    let mn = dot_cos(&hidden, &plan.n_axis());
    let ml = dot_cos(&hidden, &plan.l_axis());
    let sol = solve_phi(cm, mn, ml, &plan, &SolveOptions::default()).unwrap();
    assert!((sol.phi_hat - 1.0).abs() < 1e-9);
    assert!(sol.residuals[0] < 1e-8 && sol.residuals[1] < 1e-8);
    assert!(!sol.fallback_used);
    // Both members of a pair satisfy their own constraint.
    let sm = hidden.theta().sin();
    for (cands, axis, meas) in [(sol.candidates_n, plan.n_axis(), mn), (sol.candidates_l, plan.l_axis(), ml)] {
        for phi in cands {
            let v = cm * axis.theta().cos() + sm * axis.theta().sin() * (phi - axis.phi()).cos();
            assert!((v - meas).abs() < 1e-12);
        }
    }
}

#[test]
fn solve_phi_boundary_policy() {
    let plan = AxisPlan::default();
    let cm: f64 = 0.3;
    let sm = (1.0 - cm * cm).sqrt();
    let n = plan.n_axis();
    let edge = cm * n.theta().cos() + sm * n.theta().sin();
    let ml = 0.0;
    // Just past the edge by rounding: clamped.
    let r = solve_phi(cm, edge + 1e-10 * sm * n.theta().sin(), ml, &plan, &SolveOptions { tolerance: 10.0, nearest_fallback: false });
    assert!(r.is_ok());
    let r = solve_phi(cm, edge + 1e-6, ml, &plan, &SolveOptions::default());
    assert!(matches!(r, Err(Error::InconsistentMeasurement { .. })));
    assert!(matches!(solve_phi(1.0, 0.5, 0.5, &plan, &SolveOptions::default()), Err(Error::Pole { .. })));
}

#[test]
fn inconsistent_pairs_are_flagged_unless_fallback() {
    let plan = AxisPlan::default();
    let a = BlochAngles::new(1.0, 1.0);
    let b = BlochAngles::new(1.0, 2.5);
    let cm = a.theta().cos();
    let mn = dot_cos(&a, &plan.n_axis());
    let ml = dot_cos(&b, &plan.l_axis());
    let strict = solve_phi(cm, mn, ml, &plan, &SolveOptions::default());
    assert!(matches!(strict, Err(Error::NoCommonSolution { .. })));
    let loose = solve_phi(cm, mn, ml, &plan, &SolveOptions { nearest_fallback: true, ..SolveOptions::default() }).unwrap();
    assert!(loose.fallback_used);
}

#[test]
fn noiseless_round_trip_over_random_states() {
    let (g, lv, probe) = demo();
    let plan = AxisPlan::default();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let mut rng = trial_rng(99, i);
        let hidden = BlochAngles::new(rng.random_range(0.1..PI - 0.1), rng.random_range(0.0..2.0 * PI));
        let est = clone_state(&hidden, &plan, &g, &lv, &probe, 0.0, false, &mut rng).unwrap();
        assert!(!est.pole_flag);
        assert!(est.residuals[0] < 1e-8 && est.residuals[1] < 1e-8);
        worst = worst.max(angular_error(&hidden, &est.angles()));
        let ket = est.clone_ket();
        assert!((ket.norm_sqr() - 1.0).abs() < 1e-14);
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn named_hidden_state() {
    let (g, lv, probe) = demo();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hidden = BlochAngles::new(PI / 3.0, 5.0 * PI / 4.0);
    let est = clone_state(&hidden, &AxisPlan::default(), &g, &lv, &probe, 0.0, false, &mut rng).unwrap();
    assert!(angular_error(&hidden, &est.angles()) < 1e-6);
    let cands = est.phi_candidates_n.unwrap();
    assert!(cands.iter().any(|c| (c - est.phi_hat).abs() < 1e-6));
}

#[test]
fn pole_states_are_flagged() {
    let (g, lv, probe) = demo();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let est = clone_state(&BlochAngles::new(0.0, 0.0), &AxisPlan::default(), &g, &lv, &probe, 0.0, false, &mut rng).unwrap();
    assert!(est.pole_flag);
    assert_eq!(est.theta_hat, 0.0);
    assert_eq!(est.phi_hat, 0.0);
    let ket = est.clone_ket();
    assert_eq!(ket.c0().re, 1.0);
    assert_eq!(ket.c1().norm(), 0.0);
}

#[test]
fn noise_degrades_monotonically() {
    let (g, lv, probe) = demo();
    let plan = AxisPlan::default();
    let c = calibration_constant(&g, &lv, &probe).unwrap();
    let setup = MonteCarloSetup { plan: &plan, geom: &g, level: &lv, probe: &probe, theta_margin: 0.1 };
    let mut last = 0.0;
    for k in [0.001, 0.003, 0.01, 0.03] {
        let s = monte_carlo(&setup, k * c, 100, 17, Exec::default()).unwrap();
        assert!(s.rms_error.is_finite() && s.rms_error > 0.0);
        assert!(s.rms_error >= last, "σ={k}C: {} < {last}", s.rms_error);
        last = s.rms_error;
    }
}

#[test]
fn monte_carlo_is_thread_count_independent() {
    let (g, lv, probe) = demo();
    let plan = AxisPlan::default();
    let c = calibration_constant(&g, &lv, &probe).unwrap();
    let setup = MonteCarloSetup { plan: &plan, geom: &g, level: &lv, probe: &probe, theta_margin: 0.1 };
    let a = monte_carlo(&setup, 0.01 * c, 40, 5, Exec::Sequential).unwrap();
    let b = monte_carlo(&setup, 0.01 * c, 40, 5, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn clamp_flag_on_overshoot() {
    let r = invert_cos(-1.05, 1.0).unwrap();
    assert!(r.clamped);
    assert_eq!(r.cos_theta, 1.0);
    assert!(!invert_cos(-0.5, 1.0).unwrap().clamped);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solve_phi_inverts_forward_model(theta in 0.1..(PI - 0.1), phi in 0.0..(2.0 * PI)) {
        let plan = AxisPlan::default();
        let h = BlochAngles::new(theta, phi);
        let sol = solve_phi(theta.cos(), dot_cos(&h, &plan.n_axis()), dot_cos(&h, &plan.l_axis()), &plan, &SolveOptions::default()).unwrap();
        prop_assert!(angular_error(&h, &BlochAngles::new(theta, sol.phi_hat)) < 1e-6);
        prop_assert!(sol.residuals[0] < 1e-8 && sol.residuals[1] < 1e-8);
    }
}
