use std::f64::consts::PI;

use proptest::prelude::*;
use protoclone::doublewell::{level_gap, solve_levels, Level, Parity, WellGeometry};
use protoclone::probe::{
    adiabaticity_ratio, calibration_constant, discriminate, f_of_za, f_prime_fd, g_of_za, g_prime_zero, h_of_za,
    h_prime_zero, kick_integral, probe_momentum, weakness_ratio, Label, ProbeConfig, ProbeWarning,
};
use protoclone::spin::BlochAngles;
use protoclone::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DEMO_KICK_I: f64 = 0.583_432_353_526_495_8;
const DEMO_A2: f64 = 1.960_565_026_150_749_3;
const DEMO_A2_I: f64 = 1.143_857_067_448_867_4;

fn demo() -> (WellGeometry, Level, ProbeConfig) {
    let g = WellGeometry::new(1.0, 1.0, 1250.0).unwrap();
    let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
    let gap = level_gap(&g, 1).unwrap();
    let probe = ProbeConfig::new(1e-3 * g.c() * gap, 100.0 / gap, 1e-3 * g.c()).unwrap();
    (g, lv, probe)
}

fn simpson_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn demo_kick_integral_matches_oracles() {
    let (g, lv, _) = demo();
    let i = kick_integral(&g, &lv).unwrap();
    let k = lv.k;
    let o = g.outer();
    let oracle = simpson_adaptive(&|z: f64| (k * (o - z)).sin().powi(2) / (z * z), g.c(), o, 1e-13);
    assert!(((i - oracle) / oracle).abs() < 1e-10, "{i} vs {oracle}");
    assert!(((i - DEMO_KICK_I) / DEMO_KICK_I).abs() < 1e-10, "{i}");
    assert!(((lv.a_amp * lv.a_amp - DEMO_A2) / DEMO_A2).abs() < 1e-10);
    let a2i = h_prime_zero(&g, &lv, 0.0).unwrap();
    assert!(((a2i - DEMO_A2_I) / DEMO_A2_I).abs() < 1e-10);
}

#[test]
fn kick_integral_vanishes_for_distant_wells() {
    let mut last = f64::INFINITY;
    for b in [1.0, 3.0, 10.0, 30.0, 100.0] {
        let g = WellGeometry::new(1.0, b, 1250.0).unwrap();
        let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
        let i = kick_integral(&g, &lv).unwrap();
        assert!(i > 0.0 && i < last);
        last = i;
    }
    assert!(last < 1e-4);
}

#[test]
fn kick_law_endpoints() {
    let (g, lv, probe) = demo();
    let p = |theta: f64| probe_momentum(&BlochAngles::new(theta, 0.4), &g, &lv, &probe).unwrap();
    let c = calibration_constant(&g, &lv, &probe).unwrap();
    let zero = p(0.0);
    assert!(zero.p_final < 0.0);
    assert!((zero.p_final + c).abs() <= 1e-15 * c);
    assert!((zero.p_final + 0.0572).abs() < 1e-3);
    assert_eq!(p(PI / 2.0).p_final, 0.0);
    assert!(((p(PI).p_final - c) / c).abs() < 1e-15);
    for th in [0.3, 1.1, 2.0, 2.9] {
        let r = p(th);
        assert!(r.p_final >= zero.p_final && r.p_final <= c);
    }
}

#[test]
fn kick_law_is_linear_in_cos_theta() {
    let (g, lv, probe) = demo();
    let c = calibration_constant(&g, &lv, &probe).unwrap();
    let pts: Vec<(f64, f64)> = (0..19)
        .map(|i| {
            let th = PI * i as f64 / 18.0;
            let r = probe_momentum(&BlochAngles::new(th, 1.0), &g, &lv, &probe).unwrap();
            (th.cos(), r.p_final)
        })
        .collect();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    assert!(((slope + c) / c).abs() < 1e-12);
    for (x, y) in &pts {
        assert!((y - slope * x).abs() < 1e-12 * c);
    }
}

#[test]
fn probe_leaves_system_untouched() {
    let (g, lv, probe) = demo();
    let spin = BlochAngles::new(1.2, 2.5);
    let r = probe_momentum(&spin, &g, &lv, &probe).unwrap();
    assert_eq!(r.system.spin, spin);
    assert_eq!(r.system.level, lv);
    assert!(!r.system.collapsed);
    assert!(r.warnings.is_empty());
    assert!((r.adiabatic_ratio - 100.0).abs() < 1e-9);
    assert!(r.weakness_ratio <= 1e-3 * (1.0 + 1e-12));
}

#[test]
fn probe_warns_outside_regime() {
    let (g, lv, probe) = demo();
    let gap = level_gap(&g, 1).unwrap();
    let bad = probe.with_time(10.0 / gap).unwrap().with_coupling(0.1 * g.c() * gap).unwrap();
    let r = probe_momentum(&BlochAngles::new(0.5, 0.0), &g, &lv, &bad).unwrap();
    assert_eq!(r.warnings.len(), 2);
    assert!(matches!(r.warnings[0], ProbeWarning::NotAdiabatic { .. }));
    assert!(matches!(r.warnings[1], ProbeWarning::NotWeak { .. }));
    assert!(r.p_final.is_finite());
}

#[test]
fn probe_rejects_excited_levels() {
    let (g, _, probe) = demo();
    let excited = solve_levels(&g, Parity::Sym, 2).unwrap()[1];
    let anti = solve_levels(&g, Parity::Antisym, 1).unwrap()[0];
    let spin = BlochAngles::new(0.5, 0.0);
    assert!(probe_momentum(&spin, &g, &excited, &probe).is_err());
    assert!(probe_momentum(&spin, &g, &anti, &probe).is_err());
}

#[test]
fn finite_difference_matches_analytic_derivative() {
    let (g, lv, probe) = demo();
    let step = 1e-5 * g.c();
    for th in [0.0, 0.4, 1.0, 2.2, PI] {
        let spin = BlochAngles::new(th, 0.7);
        let fd = f_prime_fd(&g, &lv, &spin, &probe, step).unwrap();
        let an = h_prime_zero(&g, &lv, th).unwrap();
        assert!((fd - an).abs() <= 1e-3 * an.abs().max(1e-3 * DEMO_A2_I), "θ={th}: {fd} vs {an}");
    }
}

#[test]
fn f_difference_is_proportional_to_cos_theta() {
    let (g, lv, probe) = demo();
    let d = 1e-4 * g.c();
    let odd = |th: f64| {
        let s = BlochAngles::new(th, 0.0);
        f_of_za(&g, &lv, &s, d, &probe).unwrap() - f_of_za(&g, &lv, &s, -d, &probe).unwrap()
    };
    let base = odd(0.0);
    for th in [0.5, 1.0, 2.0, 3.0] {
        let ratio = odd(th) / base;
        assert!((ratio - th.cos()).abs() < 1e-4, "θ={th}: {ratio}");
    }
}

#[test]
fn h_is_even_on_the_equator() {
    let (g, lv, _) = demo();
    let s = BlochAngles::new(PI / 2.0, 0.3);
    for za in [0.01, 0.1, 0.3] {
        let l = h_of_za(&g, &lv, &s, za).unwrap();
        let r = h_of_za(&g, &lv, &s, -za).unwrap();
        assert!((l - r).abs() < 1e-12 * l.abs());
    }
}

#[test]
fn g_is_even_and_its_slope_vanishes() {
    for (a, b, v0) in [(1.0, 1.0, 1250.0), (1.0, 0.6, 20.0), (1.0, 2.0, 100.0)] {
        let g = WellGeometry::new(a, b, v0).unwrap();
        let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
        let scale = h_prime_zero(&g, &lv, 0.0).unwrap().abs();
        for eps in [1e-2, 1e-3, 1e-4] {
            let eps = eps * g.c();
            let probe = ProbeConfig::new(1e-3, 1.0, eps).unwrap();
            for za in [0.1 * eps, 0.5 * eps] {
                assert_eq!(g_of_za(&g, &lv, za, eps).unwrap(), g_of_za(&g, &lv, -za, eps).unwrap());
            }
            let gp = g_prime_zero(&g, &lv, &probe).unwrap();
            assert!(gp.abs() < 1e-8 * scale, "{gp}");
        }
    }
}

#[test]
fn probe_domain_is_enforced() {
    let (g, lv, probe) = demo();
    let s = BlochAngles::new(0.3, 0.0);
    assert!(matches!(
        f_of_za(&g, &lv, &s, probe.epsilon_reg, &probe),
        Err(Error::ProbeDomain { .. })
    ));
    assert!(f_of_za(&g, &lv, &s, 0.5 * probe.epsilon_reg, &probe).is_ok());
}

#[test]
fn ratio_scaling() {
    let (g, lv, probe) = demo();
    let gap = level_gap(&g, 1).unwrap();
    assert!((adiabaticity_ratio(100.0 / gap, gap).unwrap() - 100.0).abs() < 1e-9);
    let w = weakness_ratio(&g, &probe, gap).unwrap();
    assert!(w <= 1e-3 * (1.0 + 1e-12));
    let tiny = probe.with_coupling(1e-300).unwrap();
    assert!(weakness_ratio(&g, &tiny, gap).unwrap() < 1e-250);
    let far = WellGeometry::new(1.0, 50.0, 1250.0).unwrap();
    assert!(weakness_ratio(&far, &probe, gap).unwrap() < w);
    let c1 = calibration_constant(&g, &lv, &probe).unwrap();
    let c2 = calibration_constant(&g, &lv, &probe.with_time(2.0 * probe.t).unwrap()).unwrap();
    assert!((c2 - 2.0 * c1).abs() < 1e-15 * c2);
}

#[test]
fn discrimination_noiseless_and_noisy() {
    let (g, lv, probe) = demo();
    let levels = vec![lv];
    let weights = vec![1.0];
    let zero = BlochAngles::new(0.0, 0.0);
    let plus = BlochAngles::new(PI / 2.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d0 = discriminate(&zero, &g, &levels, &weights, &probe, 0.0, &mut rng).unwrap();
    let dp = discriminate(&plus, &g, &levels, &weights, &probe, 0.0, &mut rng).unwrap();
    assert_eq!(d0.label, Label::Zero);
    assert!(d0.momentum < 0.0);
    assert_eq!(dp.label, Label::Plus);
    assert!(dp.momentum.abs() < 1e-15);
    let sigma = 0.1 * d0.zero_response.abs();
    let mut wrong = 0;
    for i in 0..10_000 {
        let (s, want) = if i % 2 == 0 { (&zero, Label::Zero) } else { (&plus, Label::Plus) };
        if discriminate(s, &g, &levels, &weights, &probe, sigma, &mut rng).unwrap().label != want {
            wrong += 1;
        }
    }
    // The threshold sits 5σ from both responses.
    assert!(wrong <= 10, "{wrong}");
}

#[test]
fn discrimination_over_level_mixture() {
    let g = WellGeometry::new(1.0, 1.0, 1250.0).unwrap();
    let mut levels = solve_levels(&g, Parity::Sym, 3).unwrap();
    levels.extend(solve_levels(&g, Parity::Antisym, 1).unwrap());
    let probe = ProbeConfig::new(1e-3, 10.0, 1e-3).unwrap();
    let weights = [0.6, 0.3, 0.2, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z = discriminate(&BlochAngles::new(0.0, 0.0), &g, &levels, &weights, &probe, 0.0, &mut rng).unwrap();
    let p = discriminate(&BlochAngles::new(PI / 2.0, 0.0), &g, &levels, &weights, &probe, 0.0, &mut rng).unwrap();
    assert_eq!(z.label, Label::Zero);
    assert_eq!(p.label, Label::Plus);
    assert!(matches!(
        discriminate(&BlochAngles::new(0.0, 0.0), &g, &levels, &[0.0; 4], &probe, 0.0, &mut rng),
        Err(Error::DegenerateWeights(_))
    ));
}

#[test]
fn discrimination_is_seed_deterministic() {
    let (g, lv, probe) = demo();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50)
            .map(|_| {
                discriminate(&BlochAngles::new(PI / 2.0, 0.0), &g, &[lv], &[1.0], &probe, 0.01, &mut rng)
                    .unwrap()
                    .momentum
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kick_is_antisymmetric_and_phi_blind(theta in 0.0..PI, phi1 in 0.0..6.28f64, phi2 in 0.0..6.28f64) {
        let (g, lv, probe) = demo();
        let p = |t: f64, f: f64| probe_momentum(&BlochAngles::new(t, f), &g, &lv, &probe).unwrap().p_final;
        let c = calibration_constant(&g, &lv, &probe).unwrap();
        prop_assert!((p(theta, phi1) + p(PI - theta, phi1)).abs() < 1e-14 * c);
        prop_assert_eq!(p(theta, phi1), p(theta, phi2));
    }

    #[test]
    fn kick_integral_positive(a in 0.5..2.0f64, ratio in 0.55..3.0f64, alpha in 5.0..60.0f64) {
        let g = WellGeometry::new(a, ratio * a, 0.5 * (alpha / a).powi(2)).unwrap();
        let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
        prop_assert!(kick_integral(&g, &lv).unwrap() > 0.0);
    }
}
