use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use protoclone::doublewell::{level_gap, solve_levels, Level, Parity, WellGeometry};
use protoclone::exec::Exec;
use protoclone::probe::{probe_momentum, ProbeConfig};
use protoclone::spin::{BlochAngles, C64};
use protoclone::stern_gerlach::{FieldPulse, PacketPrep};
use protoclone::tdse::*;
use protoclone::Error;

fn oracle_geometry() -> (WellGeometry, Level, f64) {
    let g = WellGeometry::new(1.0, 0.6, 20.0).unwrap();
    let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
    let gap = level_gap(&g, 1).unwrap();
    (g, lv, gap)
}

fn gaussian(grid: Grid1D, z0: f64, p0: f64, sigma: f64, spin: [C64; 2]) -> SpinorField {
    let mut f = SpinorField::from_fn(grid, |z| {
        let x = z - z0;
        let g = C64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), p0 * x);
        [spin[0] * g, spin[1] * g]
    });
    f.normalize().unwrap();
    f
}

const UP: [C64; 2] = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];

#[test]
fn oracle_geometry_constants() {
    let (_, lv, gap) = oracle_geometry();
    assert!((lv.k - 2.463_099_380_035_657_3).abs() < 1e-12);
    assert!((gap - 1.130_458_637_073_664_6).abs() < 1e-10);
}

#[test]
fn free_packet_keeps_its_momentum() {
    let grid = Grid1D::new(-40.0, 40.0, 4096, 2e-3).unwrap();
    let mut psi = gaussian(grid, 0.0, 1.0, 1.0, UP);
    let mut prop = Propagator::new(grid);
    let p0 = prop.component_momenta(&psi)[0];
    assert!((p0 - 1.0).abs() < 1e-6);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        prop.propagate(&mut psi, &FreeSpace, 0.0, 0.5).unwrap();
        worst = worst.max((prop.component_momenta(&psi)[0] - p0).abs());
    }
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn coherent_state_oscillates_at_classical_period() {
    let omega: f64 = 1.3;
    let grid = Grid1D::new(-10.0, 10.0, 2048, 1e-3).unwrap();
    let mut psi = gaussian(grid, 2.0, 0.0, (0.5 / omega).sqrt(), UP);
    let pot = Harmonic { omega, center: 0.0 };
    let mut samples = Vec::new();
    Propagator::new(grid)
        .propagate_observed(&mut psi, &pot, 0.0, 3.5 * TAU / omega, 10, |t, f| {
            samples.push((t, f.component_positions()[0]));
        })
        .unwrap();
    // Downward zero crossings, linearly interpolated.
    let crossings: Vec<f64> = samples
        .windows(2)
        .filter(|w| w[0].1 > 0.0 && w[1].1 <= 0.0)
        .map(|w| w[0].0 + (w[1].0 - w[0].0) * w[0].1 / (w[0].1 - w[1].1))
        .collect();
    assert!(crossings.len() >= 3);
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let expected = TAU / omega;
    assert!(((period - expected) / expected).abs() < 1e-3, "{period} vs {expected}");
}

#[test]
fn norm_survives_ten_thousand_steps() {
    let grid = Grid1D::new(-10.0, 10.0, 1024, 1e-3).unwrap();
    let mut psi = gaussian(grid, 1.0, 0.5, 0.7, [C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
    let stats = Propagator::new(grid)
        .propagate(&mut psi, &Harmonic { omega: 1.0, center: 0.5 }, 0.0, 10.0)
        .unwrap();
    assert_eq!(stats.steps, 10_000);
    assert!((psi.norm_sqr() - 1.0).abs() < 1e-8);
    assert!(stats.norm_drift() < 1e-10 * 10.0);
}

#[test]
fn spin_components_never_mix() {
    let grid = Grid1D::new(-10.0, 10.0, 1024, 1e-3).unwrap();
    let pulse = GradientPulse { force: 3.0, tau: 0.5 };
    for pot in [&pulse as &dyn Potential, &Harmonic { omega: 2.0, center: 1.0 }, &FreeSpace] {
        let mut psi = gaussian(grid, 0.0, 0.3, 0.8, UP);
        Propagator::new(grid).propagate(&mut psi, pot, 0.0, 1.0).unwrap();
        assert_eq!(psi.component_norms()[1], 0.0);
        assert!(psi.down.iter().all(|c| c.norm() == 0.0));
    }
}

#[test]
fn stability_guard_and_grid_checks() {
    assert!(Grid1D::new(-1.0, 1.0, 1000, 1e-3).is_err());
    assert!(Grid1D::new(-1.0, 1.0, 512, 1e-3).is_err());
    assert!(Grid1D::new(1.0, -1.0, 1024, 1e-3).is_err());
    let grid = Grid1D::new(-1.0, 1.0, 1024, 0.1).unwrap();
    let mut psi = gaussian(grid, 0.0, 0.0, 0.1, UP);
    let wall = Barrier { c: 0.5, v0: 100.0 };
    let r = Propagator::new(grid).propagate(&mut psi, &wall, 0.0, 1.0);
    assert!(matches!(r, Err(Error::Stability(_))));
    let other = gaussian(Grid1D::new(-1.0, 1.0, 2048, 0.1).unwrap(), 0.0, 0.0, 0.1, UP);
    assert!(matches!(psi.overlap(&other), Err(Error::GridMismatch)));
}

#[test]
fn ground_level_is_stationary_and_detuned_profile_is_not() {
    let (g, lv, gap) = oracle_geometry();
    let spec = GridSpec::default();
    let s = stationarity_check(&lv, &g, 100.0 / gap, &spec).unwrap();
    assert!(s.fidelity >= 1.0 - 1e-6, "{}", s.fidelity);
    assert!(s.phase_rate_error() < 1e-3);
    assert!(s.norm_drift < 1e-10 * s.steps as f64 / 1000.0);
    let bad = detuned_ground(&g, 0.5 * PI / g.a()).unwrap();
    let b = stationarity_check(&bad, &g, 100.0 / gap, &spec).unwrap();
    assert!(b.fidelity < 0.99, "{}", b.fidelity);
}

#[test]
fn split_branches_carry_the_analytic_kick() {
    let pulse = FieldPulse::new(-2.0, 1.0, BlochAngles::z_axis(), -1.0).unwrap();
    let prep = PacketPrep::minimal(0.5).unwrap();
    let up = split_evolution(&BlochAngles::new(0.0, 0.0), &pulse, &prep, 2048).unwrap();
    assert_eq!(up.expected_plus, 1.0);
    assert!(((up.momenta[0].unwrap() - up.expected_plus) / up.expected_plus).abs() < 1e-2);
    assert_eq!(up.momenta[1], None);
    assert!(up.cross_transfer < 1e-14);
    let eq = split_evolution(&BlochAngles::new(FRAC_PI_2, 0.7), &pulse, &prep, 2048).unwrap();
    for w in eq.weights {
        assert!((w - 0.5).abs() < 1e-3);
    }
    assert!(((eq.momenta[1].unwrap() + eq.expected_plus) / eq.expected_plus).abs() < 1e-2);
    let idle = FieldPulse::new(-2.0, 0.0, BlochAngles::z_axis(), -1.0).unwrap();
    let z = split_evolution(&BlochAngles::new(0.0, 0.0), &idle, &prep, 2048).unwrap();
    assert!(z.momenta[0].unwrap().abs() < 1e-10);
    let tilted = FieldPulse::new(-2.0, 1.0, BlochAngles::new(0.3, 0.0), -1.0).unwrap();
    assert!(split_evolution(&BlochAngles::new(0.0, 0.0), &tilted, &prep, 2048).is_err());
}

#[test]
fn slow_ramps_trap_the_ground_level() {
    let (g, _, _) = oracle_geometry();
    let curve = trap_curve(&g, &[0.0, 10.0, 100.0], &GridSpec { npts: 1024, dt: 4e-3 }, Exec::default()).unwrap();
    assert!(curve[0].fidelity < curve[2].fidelity);
    assert!(curve.windows(2).all(|w| w[1].fidelity >= w[0].fidelity));
    assert!(curve[2].fidelity >= 0.9);
}

#[test]
fn coarse_time_step_fails_the_convergence_check() {
    let (g, lv, gap) = oracle_geometry();
    let schedule = RampSchedule::linear(&g, 100.0 / gap).unwrap();
    let q = |spec: &GridSpec| adiabatic_trap(&schedule, &g, &lv, spec);
    let coarse = convergence_check(q, &GridSpec { npts: 1024, dt: 0.1 }, 1.0, 1e-9).unwrap();
    assert!(!coarse.passed, "{coarse:?}");
}

#[test]
fn ramp_endpoints_are_enforced() {
    let (g, lv, _) = oracle_geometry();
    let spec = GridSpec { npts: 1024, dt: 4e-3 };
    let lifted = RampSchedule::new(g.c(), vec![(0.0, 1.0), (1.0, g.v0())]).unwrap();
    assert!(adiabatic_trap(&lifted, &g, &lv, &spec).is_err());
    let short = RampSchedule::new(g.c(), vec![(0.0, 0.0), (1.0, 0.5 * g.v0())]).unwrap();
    assert!(adiabatic_trap(&short, &g, &lv, &spec).is_err());
    assert!(RampSchedule::linear(&g, 0.0).is_err());
}

#[test]
fn weak_coupling_preserves_the_level() {
    let (g, lv, gap) = oracle_geometry();
    let spec = GridSpec { npts: 1024, dt: 4e-3 };
    let probe = ProbeConfig::new(1e-3 * g.c() * gap, 100.0 / gap, 1e-3 * g.c()).unwrap();
    let soft = 1e-3 * g.c();
    let weak = protected_interaction(&lv, &g, &probe, soft, 0.0, &spec).unwrap();
    assert!(weak.survival >= 0.999);
    assert!((weak.weakness_ratio - 1e-3).abs() < 1e-15);
    assert!(weak.mean_kernel > 0.0);
    let strong = protected_interaction(&lv, &g, &probe.with_coupling(100.0 * probe.coupling).unwrap(), soft, 0.0, &spec).unwrap();
    assert!(strong.survival < weak.survival);
    assert!(protected_interaction(&lv, &g, &probe, soft, g.c(), &spec).is_err());
}

#[test]
fn numeric_phase_gradient_matches_the_analytic_kick() {
    let g = WellGeometry::new(1.0, 1.0, 1250.0).unwrap();
    let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
    let gap = level_gap(&g, 1).unwrap();
    let probe = ProbeConfig::new(1e-3 * g.c() * gap, 100.0 / gap, 1e-3 * g.c()).unwrap();
    let grid = default_za_grid(1e-2 * g.c());
    for s in [1e-3, 1e-4] {
        let r = probe_phase_gradient(&BlochAngles::new(0.0, 0.0), &lv, &g, &probe, s * g.c(), &grid).unwrap();
        assert!((r.ratio().unwrap() - 1.0).abs() < 5e-3);
        assert!(((r.kick + r.calibration) / r.calibration).abs() < 5e-3);
    }
    let eq = probe_phase_gradient(&BlochAngles::new(FRAC_PI_2, 1.0), &lv, &g, &probe, 1e-3 * g.c(), &grid).unwrap();
    assert!(eq.kick.abs() < 1e-6 * eq.calibration);
    assert_eq!(eq.ratio(), None);
    let tilt = BlochAngles::new(1.0, 0.0);
    let t1 = probe_phase_gradient(&tilt, &lv, &g, &probe, 1e-3 * g.c(), &grid).unwrap();
    let analytic = probe_momentum(&tilt, &g, &lv, &probe).unwrap().p_final;
    assert!(((t1.kick - analytic) / analytic).abs() < 5e-3);
    for m in [2.0, 4.0] {
        let tm = probe_phase_gradient(&tilt, &lv, &g, &probe.with_time(m * probe.t).unwrap(), 1e-3 * g.c(), &grid).unwrap();
        assert!((tm.kick / (m * t1.kick) - 1.0).abs() < 1e-12);
    }
    assert!(probe_phase_gradient(&tilt, &lv, &g, &probe, 1e-3 * g.c(), &[0.0, 0.1, 0.2]).is_err());
}

#[test]
fn full_oracle_report_passes() {
    let report = run_oracle(&OracleConfig::default(), Exec::default()).unwrap();
    for r in &report.rows {
        println!(
            "{:<48} {:>14.6e} {} {:<12.4e} {} {}",
            r.name,
            r.measured,
            r.relation.symbol(),
            r.bound,
            if r.passed { "ok" } else { "FAIL" },
            r.detail
        );
    }
    assert!(report.passed());
    assert!(report.rows.len() >= 18);
}

#[test]
fn oracle_config_validation() {
    let cfg = OracleConfig::default();
    assert!(run_oracle(&OracleConfig { horizon: -1.0, ..cfg.clone() }, Exec::Sequential).is_err());
    assert!(run_oracle(&OracleConfig { trap_ratios: vec![10.0, 1.0], ..cfg }, Exec::Sequential).is_err());
}

#[test]
fn oracle_config_rejects_unknown_keys() {
    let ok: OracleConfig = serde_json::from_str(r#"{"horizon": 50.0}"#).unwrap();
    assert_eq!(ok.horizon, 50.0);
    assert!(serde_json::from_str::<OracleConfig>(r#"{"horizn": 50.0}"#).is_err());
    assert!(serde_json::from_str::<OracleConfig>(r#"{"geometry": {"a": 1.0, "b": 0.4, "v0": 1.0}}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_is_unitary(omega in 0.2f64..3.0, center in -2.0f64..2.0, p0 in -2.0f64..2.0) {
        let grid = Grid1D::new(-10.0, 10.0, 1024, 2e-3).unwrap();
        let mut psi = gaussian(grid, 0.0, p0, 0.8, [C64::new(0.8, 0.0), C64::new(0.0, 0.6)]);
        let stats = Propagator::new(grid).propagate(&mut psi, &Harmonic { omega, center }, 0.0, 2.0).unwrap();
        prop_assert!(stats.norm_drift() < 1e-10 * stats.steps as f64 / 1000.0 + 1e-14);
    }
}
