//! From probe momenta back to a Bloch vector.
//!
//! The ẑ run fixes `θ_m`. Each of the two extra axes fixes `cos(φ_m − φ_axis)`
//! and so a mirror pair of candidates for `φ_m`; the estimate is the candidate
//! the two pairs share.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::doublewell::{Level, WellGeometry};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::probe::{probe_momentum, ProbeConfig, ProbeWarning};
use crate::spin::{angles_to_axis, bloch_to_ket, BlochAngles, SpinKet};
use crate::stern_gerlach::{recombine, split, FieldPulse};

pub use crate::probe::calibration_constant;

/// Angular tolerance of the axis-plan exclusions.
pub const PLAN_TOL: f64 = 1e-9;
/// `θ̂` this close to a pole leaves `φ` undefined.
pub const POLE_THETA_TOL: f64 = 1e-6;
/// Default common-candidate tolerance for noiseless data.
pub const MATCH_TOL: f64 = 1e-6;
/// Rounding slack allowed on an `arccos` argument.
const ARG_SLACK: f64 = 1e-9;

fn circ_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

fn near_angle(x: f64, y: f64) -> bool {
    circ_dist(x, y) <= PLAN_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPlan {
    n_axis: BlochAngles,
    l_axis: BlochAngles,
}

impl AxisPlan {
    /// Rejects axes that leave `φ_m` undetermined: `θ_n ∉ {0, π}`, `φ_n ≠ 0`,
    /// `θ_l ∉ {0, π, θ_n}`, `φ_l ∉ {0, φ_n, φ_n + π}`.
    pub fn new(n_axis: BlochAngles, l_axis: BlochAngles) -> Result<Self> {
        let (tn, pn) = (n_axis.theta(), n_axis.phi());
        let (tl, pl) = (l_axis.theta(), l_axis.phi());
        if tn.abs() <= PLAN_TOL || (PI - tn).abs() <= PLAN_TOL {
            return Err(Error::InvalidPlan(format!("theta_n = {tn} lies on a pole")));
        }
        if near_angle(pn, 0.0) {
            return Err(Error::InvalidPlan("phi_n must differ from 0".into()));
        }
        if tl.abs() <= PLAN_TOL || (PI - tl).abs() <= PLAN_TOL {
            return Err(Error::InvalidPlan(format!("theta_l = {tl} lies on a pole")));
        }
        if (tl - tn).abs() <= PLAN_TOL {
            return Err(Error::InvalidPlan("theta_l must differ from theta_n".into()));
        }
        if near_angle(pl, 0.0) || near_angle(pl, pn) {
            return Err(Error::InvalidPlan("phi_l must differ from 0 and phi_n".into()));
        }
        if near_angle(pl, pn + PI) {
            return Err(Error::InvalidPlan("phi_l opposite phi_n gives mirror-identical candidates".into()));
        }
        Ok(Self { n_axis, l_axis })
    }

    pub fn n_axis(&self) -> BlochAngles {
        self.n_axis
    }

    pub fn l_axis(&self) -> BlochAngles {
        self.l_axis
    }
}

impl Default for AxisPlan {
    fn default() -> Self {
        Self::new(BlochAngles::new(PI / 3.0, PI / 5.0), BlochAngles::new(2.0 * PI / 5.0, 4.0 * PI / 5.0))
            .expect("default plan is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub cos_theta: f64,
    pub clamped: bool,
}

/// `clamp(−p/C, −1, 1)`.
pub fn invert_cos(p_measured: f64, c: f64) -> Result<Inversion> {
    if !(c > 0.0) {
        return Err(invalid("C", format!("calibration constant must be positive, got {c}")));
    }
    let x = -p_measured / c;
    Ok(Inversion {
        cos_theta: x.clamp(-1.0, 1.0),
        clamped: x.abs() > 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMeasurement {
    pub axis: BlochAngles,
    pub momentum: f64,
    pub cos_theta: f64,
    pub clamped: bool,
    pub warnings: Vec<ProbeWarning>,
}

/// Protective measurement of `cos θ` between the hidden state and `axis`.
///
/// The state is rotated into the axis frame by a split, probed, and the split
/// undone so the hidden state is available for the next axis.
pub fn measure_axis<R: Rng + ?Sized>(
    hidden: &BlochAngles,
    axis: &BlochAngles,
    geom: &WellGeometry,
    level: &Level,
    probe: &ProbeConfig,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<AxisMeasurement> {
    let pulse = FieldPulse::new(-1.0, 1.0, *axis, -1.0)?;
    let state = split(hidden, &pulse);
    let in_frame = BlochAngles::new(state.theta_ma, state.phi_ma);
    let kick = probe_momentum(&in_frame, geom, level, probe)?;
    recombine(&state)?;
    let mut momentum = kick.p_final;
    if noise_sigma > 0.0 {
        momentum += Normal::new(0.0, noise_sigma)
            .map_err(|e| invalid("noise_sigma", e.to_string()))?
            .sample(rng);
    }
    let inv = invert_cos(momentum, calibration_constant(geom, level, probe)?)?;
    Ok(AxisMeasurement {
        axis: *axis,
        momentum,
        cos_theta: inv.cos_theta,
        clamped: inv.clamped,
        warnings: kick.warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Largest accepted circular distance between the matched candidates.
    pub tolerance: f64,
    /// Accept the nearest pair whatever its distance, and clamp any
    /// out-of-range `arccos` argument.
    pub nearest_fallback: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: MATCH_TOL,
            nearest_fallback: false,
        }
    }
}

impl SolveOptions {
    /// Tolerance for `cos θ` readouts with standard deviation `sigma_cos`,
    /// three standard deviations propagated through both `arccos` branches.
    pub fn for_noise(sigma_cos: f64, cos_theta_m: f64, meas: [f64; 2], plan: &AxisPlan) -> Self {
        if !(sigma_cos > 0.0) {
            return Self::default();
        }
        let sm = (1.0 - cos_theta_m * cos_theta_m).max(0.0).sqrt();
        let spread = |axis: BlochAngles, m: f64| {
            let denom = (sm * axis.theta().sin()).abs().max(f64::MIN_POSITIVE);
            let x = ((m - cos_theta_m * axis.theta().cos()) / denom).clamp(-1.0, 1.0);
            let d = 3.0 * sigma_cos / denom;
            (d / (1.0 - x * x).max(d).sqrt()).min(PI)
        };
        Self {
            tolerance: MATCH_TOL + spread(plan.n_axis, meas[0]) + spread(plan.l_axis, meas[1]),
            nearest_fallback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSolution {
    pub phi_hat: f64,
    pub candidates_n: [f64; 2],
    pub candidates_l: [f64; 2],
    /// Constraint residuals of `phi_hat` on the n̂ and l̂ axes.
    pub residuals: [f64; 2],
    /// Circular distance of the matched pair.
    pub distance: f64,
    pub fallback_used: bool,
}

fn candidates(cos_theta_m: f64, meas: f64, axis: &BlochAngles, clamp_all: bool) -> Result<[f64; 2]> {
    let sm = (1.0 - cos_theta_m * cos_theta_m).max(0.0).sqrt();
    let denom = sm * axis.theta().sin();
    if denom.abs() <= PLAN_TOL {
        return Err(Error::Pole { theta: cos_theta_m.acos() });
    }
    let arg = (meas - cos_theta_m * axis.theta().cos()) / denom;
    if arg.abs() > 1.0 + ARG_SLACK && !clamp_all {
        return Err(Error::InconsistentMeasurement { value: arg });
    }
    let eta = arg.clamp(-1.0, 1.0).acos();
    let phi = axis.phi();
    Ok([(phi + eta).rem_euclid(TAU), (phi - eta).rem_euclid(TAU)])
}

fn constraint_residual(cos_theta_m: f64, phi: f64, axis: &BlochAngles, meas: f64) -> f64 {
    let sm = (1.0 - cos_theta_m * cos_theta_m).max(0.0).sqrt();
    (cos_theta_m * axis.theta().cos() + sm * axis.theta().sin() * (phi - axis.phi()).cos() - meas).abs()
}

/// Common `φ_m` of the n̂ and l̂ constraint equations.
pub fn solve_phi(cos_theta_m: f64, meas_n: f64, meas_l: f64, plan: &AxisPlan, opts: &SolveOptions) -> Result<PhiSolution> {
    if cos_theta_m.abs() >= 1.0 - PLAN_TOL {
        return Err(Error::Pole { theta: cos_theta_m.clamp(-1.0, 1.0).acos() });
    }
    let cn = candidates(cos_theta_m, meas_n, &plan.n_axis, opts.nearest_fallback)?;
    let cl = candidates(cos_theta_m, meas_l, &plan.l_axis, opts.nearest_fallback)?;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &x in &cn {
        for &y in &cl {
            let d = circ_dist(x, y);
            if d < best.0 {
                best = (d, x, y);
            }
        }
    }
    let (distance, x, y) = best;
    let fallback_used = distance > opts.tolerance;
    if fallback_used && !opts.nearest_fallback {
        return Err(Error::NoCommonSolution {
            distance,
            tolerance: opts.tolerance,
        });
    }
    // Circular midpoint of the matched pair.
    let phi_hat = (x + 0.5 * ((y - x + PI).rem_euclid(TAU) - PI)).rem_euclid(TAU);
    Ok(PhiSolution {
        phi_hat,
        candidates_n: cn,
        candidates_l: cl,
        residuals: [
            constraint_residual(cos_theta_m, phi_hat, &plan.n_axis, meas_n),
            constraint_residual(cos_theta_m, phi_hat, &plan.l_axis, meas_l),
        ],
        distance,
        fallback_used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub phi_candidates_n: Option<[f64; 2]>,
    pub phi_candidates_l: Option<[f64; 2]>,
    pub residuals: [f64; 2],
    pub pole_flag: bool,
    pub clamped: bool,
    pub fallback_used: bool,
    pub measurements: [f64; 3],
    pub warnings: Vec<ProbeWarning>,
    #[serde(skip)]
    pub prepared_clone: Option<SpinKet>,
}

impl Estimate {
    pub fn angles(&self) -> BlochAngles {
        BlochAngles::new(self.theta_hat, self.phi_hat)
    }

    pub fn clone_ket(&self) -> SpinKet {
        self.prepared_clone.unwrap_or_else(|| bloch_to_ket(&self.angles()))
    }
}

/// Great-circle distance between two Bloch directions.
pub fn angular_error(a: &BlochAngles, b: &BlochAngles) -> f64 {
    angles_to_axis(a).angle_to(&angles_to_axis(b))
}

/// Full protocol: θ from ẑ, then φ from the plan's two axes.
#[allow(clippy::too_many_arguments)]
pub fn clone_state<R: Rng + ?Sized>(
    hidden: &BlochAngles,
    plan: &AxisPlan,
    geom: &WellGeometry,
    level: &Level,
    probe: &ProbeConfig,
    noise_sigma: f64,
    nearest_fallback: bool,
    rng: &mut R,
) -> Result<Estimate> {
    let z = measure_axis(hidden, &BlochAngles::z_axis(), geom, level, probe, noise_sigma, rng)?;
    let theta_hat = z.cos_theta.acos();
    let mut warnings = z.warnings.clone();
    if theta_hat <= POLE_THETA_TOL || theta_hat >= PI - POLE_THETA_TOL {
        let angles = BlochAngles::new(theta_hat, 0.0);
        return Ok(Estimate {
            theta_hat,
            phi_hat: 0.0,
            phi_candidates_n: None,
            phi_candidates_l: None,
            residuals: [0.0; 2],
            pole_flag: true,
            clamped: z.clamped,
            fallback_used: false,
            measurements: [z.cos_theta, f64::NAN, f64::NAN],
            warnings,
            prepared_clone: Some(bloch_to_ket(&angles)),
        });
    }
    let n = measure_axis(hidden, &plan.n_axis, geom, level, probe, noise_sigma, rng)?;
    let l = measure_axis(hidden, &plan.l_axis, geom, level, probe, noise_sigma, rng)?;
    warnings.extend(n.warnings.iter().cloned());
    warnings.extend(l.warnings.iter().cloned());
    let mut opts = if noise_sigma > 0.0 {
        let c = calibration_constant(geom, level, probe)?;
        SolveOptions::for_noise(noise_sigma / c, z.cos_theta, [n.cos_theta, l.cos_theta], plan)
    } else {
        SolveOptions::default()
    };
    opts.nearest_fallback = nearest_fallback;
    let sol = solve_phi(z.cos_theta, n.cos_theta, l.cos_theta, plan, &opts)?;
    let angles = BlochAngles::new(theta_hat, sol.phi_hat);
    Ok(Estimate {
        theta_hat,
        phi_hat: sol.phi_hat,
        phi_candidates_n: Some(sol.candidates_n),
        phi_candidates_l: Some(sol.candidates_l),
        residuals: sol.residuals,
        pole_flag: false,
        clamped: z.clamped || n.clamped || l.clamped,
        fallback_used: sol.fallback_used,
        measurements: [z.cos_theta, n.cos_theta, l.cos_theta],
        warnings,
        prepared_clone: Some(bloch_to_ket(&angles)),
    })
}

/// Seeded random hidden state with `θ ∈ [margin, π − margin]`.
pub fn random_hidden<R: Rng + ?Sized>(rng: &mut R, margin: f64) -> BlochAngles {
    BlochAngles::new(rng.random_range(margin..=PI - margin), rng.random_range(0.0..TAU))
}

/// Per-trial generator: one ChaCha stream per trial index under a shared seed.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub hidden: BlochAngles,
    pub estimate: BlochAngles,
    pub error: f64,
    pub pole_flag: bool,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub noise_sigma: f64,
    pub trials: usize,
    pub rms_error: f64,
    pub max_error: f64,
    pub fallbacks: usize,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSetup<'a> {
    pub plan: &'a AxisPlan,
    pub geom: &'a WellGeometry,
    pub level: &'a Level,
    pub probe: &'a ProbeConfig,
    pub theta_margin: f64,
}

/// Independent cloning trials; trial `i` draws from stream `i` of `seed`.
/// The nearest-pair fallback is enabled so noisy trials always yield an
/// estimate.
pub fn monte_carlo(setup: &MonteCarloSetup<'_>, noise_sigma: f64, trials: usize, seed: u64, exec: Exec) -> Result<MonteCarloSummary> {
    if trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    let run = |i: usize| -> Result<TrialOutcome> {
        let mut rng = trial_rng(seed, i);
        let hidden = random_hidden(&mut rng, setup.theta_margin);
        let est = clone_state(&hidden, setup.plan, setup.geom, setup.level, setup.probe, noise_sigma, true, &mut rng)?;
        let estimate = est.angles();
        Ok(TrialOutcome {
            hidden,
            estimate,
            error: angular_error(&hidden, &estimate),
            pole_flag: est.pole_flag,
            fallback_used: est.fallback_used,
        })
    };
    let outcomes = exec.map_indexed(trials, run).into_iter().collect::<Result<Vec<_>>>()?;
    let sum_sq: f64 = outcomes.iter().map(|o| o.error * o.error).sum();
    Ok(MonteCarloSummary {
        noise_sigma,
        trials,
        rms_error: (sum_sq / trials as f64).sqrt(),
        max_error: outcomes.iter().map(|o| o.error).fold(0.0, f64::max),
        fallbacks: outcomes.iter().filter(|o| o.fallback_used).count(),
        outcomes,
    })
}
