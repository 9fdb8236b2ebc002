//! Oracle runs that test the analytic modules against direct propagation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{Barrier, GradientPulse, Grid1D, PropagationStats, Propagator, ProtectedCoupling, RampSchedule, SoftCoulomb, SpinorField};
use crate::doublewell::{
    eval_eigenstate, level_gap, normalize_level, solve_levels, spatial_profile, Level, Parity, WellGeometry,
};
use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::probe::{calibration_constant, probe_momentum, ProbeConfig};
use crate::quadrature::integrate;
use crate::spin::{bloch_to_ket, BlochAngles, C64};
use crate::stern_gerlach::{FieldPulse, PacketPrep};
use crate::{HBAR, MASS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub npts: usize,
    pub dt: f64,
}

impl GridSpec {
    pub fn refined(self) -> Self {
        Self {
            npts: 2 * self.npts,
            dt: 0.5 * self.dt,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { npts: 2048, dt: 2e-3 }
    }
}

/// Dirichlet box spanning the outer walls of the double well.
pub fn box_grid(geom: &WellGeometry, spec: &GridSpec) -> Result<Grid1D> {
    Grid1D::new(-geom.outer(), geom.outer(), spec.npts, spec.dt)
}

/// Spin-up copy of the level's spatial profile, normalized on the grid.
pub fn level_field(grid: Grid1D, level: &Level, geom: &WellGeometry) -> Result<SpinorField> {
    let up = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let mut f = SpinorField::from_profile(grid, up, |z| spatial_profile(level, geom, z));
    f.normalize()?;
    Ok(f)
}

fn fidelity(a: &SpinorField, b: &SpinorField) -> Result<f64> {
    Ok(a.overlap(b)?.norm_sqr())
}

/// Steps between phase samples so the phase moves less than one radian.
fn phase_stride(energy: f64, dt: f64) -> usize {
    ((1.0 / (energy.abs() * dt / HBAR)).floor() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub fidelity: f64,
    pub phase_rate: f64,
    pub expected_rate: f64,
    pub norm_drift: f64,
    pub steps: usize,
}

impl Stationarity {
    pub fn phase_rate_error(&self) -> f64 {
        ((self.phase_rate - self.expected_rate) / self.expected_rate).abs()
    }
}

/// Evolves the level under the bare double well and tracks overlap and phase.
pub fn stationarity_check(level: &Level, geom: &WellGeometry, duration: f64, spec: &GridSpec) -> Result<Stationarity> {
    let grid = box_grid(geom, spec)?;
    let start = level_field(grid, level, geom)?;
    let mut psi = start.clone();
    let mut prop = Propagator::new(grid);
    let mut unwrapped = 0.0;
    let mut last = 0.0;
    let mut last_t = 0.0;
    let stride = phase_stride(level.energy, spec.dt);
    let stats = prop.propagate_observed(&mut psi, &Barrier::of(geom), 0.0, duration, stride, |t, f| {
        if let Ok(ov) = start.overlap(f) {
            let arg = ov.arg();
            let mut d = arg - last;
            d -= TAU * (d / TAU).round();
            unwrapped += d;
            last = arg;
            last_t = t;
        }
    })?;
    Ok(Stationarity {
        fidelity: fidelity(&start, &psi)?,
        phase_rate: if last_t > 0.0 { unwrapped / last_t } else { 0.0 },
        expected_rate: -level.energy / HBAR,
        norm_drift: stats.norm_drift(),
        steps: stats.steps,
    })
}

/// Symmetric profile with a wavenumber that is not a root, for negative
/// controls.
pub fn detuned_ground(geom: &WellGeometry, k: f64) -> Result<Level> {
    let alpha = geom.alpha();
    if !(k < alpha) {
        return Err(invalid("geometry", "barrier too low for a detuned bound profile"));
    }
    let q = ((alpha - k) * (alpha + k)).sqrt();
    Ok(normalize_level(
        &Level {
            parity: Parity::Sym,
            n: 1,
            k,
            q,
            energy: 0.5 * k * k / MASS,
            a_amp: 1.0,
            b_amp: 0.0,
            residual: f64::NAN,
        },
        geom,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitEvolution {
    /// Component weights `(↑, ↓)` after the pulse.
    pub weights: [f64; 2],
    /// Mean momentum of each populated component.
    pub momenta: [Option<f64>; 2],
    /// Analytic `|+⟩` kick `γ·Bi·ħτ/2`.
    pub expected_plus: f64,
    /// Largest weight that appeared in a component that started empty.
    pub cross_transfer: f64,
    pub norm_drift: f64,
}

/// Free Gaussian packet under the Stern-Gerlach gradient along ẑ.
pub fn split_evolution(spin: &BlochAngles, pulse: &FieldPulse, prep: &PacketPrep, npts: usize) -> Result<SplitEvolution> {
    if !pulse.axis.is_pole() || pulse.axis.theta() != 0.0 {
        return Err(invalid("pulse.axis", "grid splitting runs along +z only"));
    }
    if !(prep.dz > 0.0) {
        return Err(invalid("prep.dz", "need a packet of finite width"));
    }
    let grad = GradientPulse::of(pulse);
    let kick = pulse.plus_momentum();
    let travel = (kick.abs() + prep.p0.abs()) * pulse.tau / MASS;
    let half = 12.0 * prep.dz + travel;
    let grid_dz = 2.0 * half / npts as f64;
    let k_needed = (kick.abs() + prep.p0.abs() + 10.0 * prep.dp) / HBAR;
    if PI / grid_dz < 2.0 * k_needed {
        return Err(invalid("npts", "grid too coarse for the kicked packet"));
    }
    let steps = 1000.0;
    let mut dt = if pulse.tau > 0.0 { pulse.tau / steps } else { 1e-3 };
    let span = 2.0 * grad.force.abs() * half;
    if span > 0.0 {
        dt = dt.min(0.25 * PI * HBAR / span);
    }
    let grid = Grid1D::new(prep.z0 - half, prep.z0 + half, npts, dt)?;
    let ket = bloch_to_ket(spin);
    let sigma = prep.dz;
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    let mut psi = SpinorField::from_fn(grid, |z| {
        let x = z - prep.z0;
        let g = C64::from_polar(norm * (-x * x / (4.0 * sigma * sigma)).exp(), prep.p0 * x / HBAR);
        [ket.c0() * g, ket.c1() * g]
    });
    psi.normalize()?;
    let before = psi.component_norms();
    let mut prop = Propagator::new(grid);
    let stats = prop.propagate(&mut psi, &grad, 0.0, pulse.tau)?;
    let weights = psi.component_norms();
    let p = prop.component_momenta(&psi);
    let mom = |s: usize| if weights[s] > 0.0 { Some(p[s] / weights[s]) } else { None };
    Ok(SplitEvolution {
        weights,
        momenta: [mom(0), mom(1)],
        expected_plus: kick,
        cross_transfer: (0..2).filter(|&s| before[s] == 0.0).map(|s| weights[s]).fold(0.0, f64::max),
        norm_drift: stats.norm_drift(),
    })
}

/// Fidelity with `target` after ramping the barrier up from a free box.
pub fn adiabatic_trap(schedule: &RampSchedule, geom: &WellGeometry, target: &Level, spec: &GridSpec) -> Result<f64> {
    if schedule.initial().v0 != 0.0 {
        return Err(invalid("schedule", "ramp must start from the free box"));
    }
    let fin = schedule.final_barrier();
    if (fin.v0 - geom.v0()).abs() > 1e-12 * geom.v0() || (fin.c - geom.c()).abs() > 1e-12 {
        return Err(invalid("schedule", "ramp must end at the target geometry"));
    }
    let grid = box_grid(geom, spec)?;
    let len = grid.length();
    let up = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let mut psi = SpinorField::from_profile(grid, up, |z| (PI * z / len).cos());
    psi.normalize()?;
    Propagator::new(grid).propagate(&mut psi, schedule, 0.0, schedule.duration())?;
    fidelity(&level_field(grid, target, geom)?, &psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapPoint {
    /// Ramp duration in units of `ħ/gap`.
    pub ratio: f64,
    pub duration: f64,
    pub fidelity: f64,
}

/// Ramp-time sweep; a ratio of zero is the sudden switch, one grid step long.
pub fn trap_curve(geom: &WellGeometry, ratios: &[f64], spec: &GridSpec, exec: Exec) -> Result<Vec<TrapPoint>> {
    let target = solve_levels(geom, Parity::Sym, 1)?[0];
    let gap = level_gap(geom, 1)?;
    exec.map(ratios, |&ratio| {
        let duration = (ratio * HBAR / gap).max(spec.dt);
        let schedule = RampSchedule::linear(geom, duration)?;
        Ok(TrapPoint {
            ratio,
            duration,
            fidelity: adiabatic_trap(&schedule, geom, &target, spec)?,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtectedRun {
    pub survival: f64,
    /// Time average of `⟨1/√((z − za)² + s²)⟩`.
    pub mean_kernel: f64,
    pub weakness_ratio: f64,
    pub norm_drift: f64,
}

/// Evolves the level under the well plus the softened probe coupling for the
/// probe time `T`.
pub fn protected_interaction(
    level: &Level,
    geom: &WellGeometry,
    probe: &ProbeConfig,
    softening: f64,
    za: f64,
    spec: &GridSpec,
) -> Result<ProtectedRun> {
    if za.abs() >= geom.c() {
        return Err(crate::Error::ProbeDomain { za, cutoff: geom.c() });
    }
    if !(softening > 0.0) {
        return Err(invalid("softening", "must be positive"));
    }
    let grid = box_grid(geom, spec)?;
    let start = level_field(grid, level, geom)?;
    let mut psi = start.clone();
    let kernel = SoftCoulomb { za, softening };
    let pot = ProtectedCoupling {
        barrier: Barrier::of(geom),
        coupling: probe.coupling,
        kernel,
    };
    let dz = grid.dz();
    let mut sum = 0.0;
    let mut samples = 0usize;
    let stride = phase_stride(level.energy, spec.dt);
    let stats: PropagationStats = Propagator::new(grid).propagate_observed(&mut psi, &pot, 0.0, probe.t, stride, |_, f| {
        sum += f.expectation(|z| kernel.cell(z, dz));
        samples += 1;
    })?;
    let gap = level_gap(geom, 1)?;
    Ok(ProtectedRun {
        survival: fidelity(&start, &psi)?,
        mean_kernel: sum / samples as f64,
        weakness_ratio: probe.coupling / (geom.c() * gap),
        norm_drift: stats.norm_drift(),
    })
}

/// `|ψ↑|² + |ψ↓|²` of the spinor eigenstate.
pub fn spinor_density(level: &Level, geom: &WellGeometry, spin: &BlochAngles, z: f64) -> f64 {
    let [u, d] = eval_eigenstate(level, geom, spin, z);
    u.norm_sqr() + d.norm_sqr()
}

/// `⟨φ| 1/√((z − za)² + s²) |φ⟩` by adaptive quadrature, split at the
/// region joins and at `za`.
pub fn softened_expectation(level: &Level, geom: &WellGeometry, spin: &BlochAngles, kernel: &SoftCoulomb) -> Result<f64> {
    let (c, o) = (geom.c(), geom.outer());
    let za = kernel.za;
    if za.abs() >= c {
        return Err(crate::Error::ProbeDomain { za, cutoff: c });
    }
    let f = |z: f64| spinor_density(level, geom, spin, z) * kernel.at(z);
    let mut total = 0.0;
    for (lo, hi) in [(-o, -c), (-c, za), (za, c), (c, o)] {
        let r = integrate(f, lo, hi, 1e-300, 1e-13);
        if !r.converged {
            return Err(invalid("quadrature", format!("no convergence on [{lo}, {hi}]")));
        }
        total += r.value;
    }
    Ok(total)
}

/// Odd-part derivative at 0 from samples at `±x_i`, eliminating the
/// `x³, x⁵, …` terms.
fn odd_derivative(xs: &[f64], odd: &[f64]) -> Result<f64> {
    let k = xs.len();
    let mut m: Vec<Vec<f64>> = xs.iter().map(|&x| (0..k).map(|j| x.powi(2 * j as i32 + 1)).collect()).collect();
    let mut rhs = odd.to_vec();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() == 0.0 {
            return Err(invalid("za_grid", "offsets must be distinct and nonzero"));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            for cc in col..k {
                m[r][cc] -= f * m[col][cc];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut sol = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|cc| m[r][cc] * sol[cc]).sum();
        sol[r] = (rhs[r] - s) / m[r][r];
    }
    Ok(sol[0])
}

/// Symmetric five-point probe grid with spacing `step`.
pub fn default_za_grid(step: f64) -> Vec<f64> {
    vec![-2.0 * step, -step, 0.0, step, 2.0 * step]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGradient {
    pub f_prime: f64,
    pub kick: f64,
    pub analytic: f64,
    pub calibration: f64,
    pub softening: f64,
}

impl PhaseGradient {
    /// Numeric over analytic kick; `None` when the analytic kick is at the
    /// rounding level of `C`.
    pub fn ratio(&self) -> Option<f64> {
        (self.analytic.abs() > 1e-12 * self.calibration.abs()).then(|| self.kick / self.analytic)
    }
}

/// Probe kick `−λ·T·f'(0)` with `f` the softened expectation over `za_grid`.
pub fn probe_phase_gradient(
    spin: &BlochAngles,
    level: &Level,
    geom: &WellGeometry,
    probe: &ProbeConfig,
    softening: f64,
    za_grid: &[f64],
) -> Result<PhaseGradient> {
    let mut pos: Vec<f64> = za_grid.iter().copied().filter(|&x| x > 0.0).collect();
    pos.sort_by(f64::total_cmp);
    let symmetric = pos.iter().all(|x| za_grid.iter().any(|&y| y == -x));
    if pos.is_empty() || !symmetric || za_grid.iter().filter(|&&x| x < 0.0).count() != pos.len() {
        return Err(invalid("za_grid", "must be symmetric about 0"));
    }
    let f = |za: f64| softened_expectation(level, geom, spin, &SoftCoulomb { za, softening });
    let odd = pos
        .iter()
        .map(|&x| Ok(0.5 * (f(x)? - f(-x)?)))
        .collect::<Result<Vec<_>>>()?;
    let f_prime = odd_derivative(&pos, &odd)?;
    Ok(PhaseGradient {
        f_prime,
        kick: -probe.coupling * probe.t * f_prime,
        analytic: probe_momentum(spin, geom, level, probe)?.p_final,
        calibration: calibration_constant(geom, level, probe)?,
        softening,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub coarse: f64,
    pub fine: f64,
    pub target: f64,
    pub floor: f64,
    pub passed: bool,
}

/// Refinement test: halving `dz` and `dt` must move `q` by less than 10% of
/// its distance to `target`, plus an absolute `floor`.
pub fn convergence_check<F>(q: F, spec: &GridSpec, target: f64, floor: f64) -> Result<Convergence>
where
    F: Fn(&GridSpec) -> Result<f64>,
{
    let coarse = q(spec)?;
    let fine = q(&spec.refined())?;
    Ok(Convergence {
        coarse,
        fine,
        target,
        floor,
        passed: (coarse - fine).abs() <= 0.1 * (coarse - target).abs() + floor,
    })
}
