//! Protective probe.
//!
//! A probe charge parked at `z_a ≈ 0` between the wells couples to the trapped
//! electron through `λ/|z − z_a|`. Over a long weak interaction the probe
//! picks up the momentum `−λ·T·f'(0)` with `f(z_a) = ⟨φ|1/|z − z_a||φ⟩`. For
//! the ground level `f'(0) = cos θ · A² · I` with the kick integral
//!
//! ```text
//! I = ∫_{b−a/2}^{b+a/2} sin²(k(b + a/2 − z)) / z² dz.
//! ```

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::doublewell::{barrier_shape, level_gap, Level, Parity, WellGeometry};
use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;
use crate::spin::{polar_cos, BlochAngles};

const QUAD_REL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Coulomb strength `e²/4πε0` in natural units.
    pub coupling: f64,
    /// Interaction time.
    pub t: f64,
    /// Lower cutoff of the barrier integral in `g(z_a)`.
    pub epsilon_reg: f64,
    pub za0: f64,
    /// Warn when `T·gap/ħ` falls below this.
    pub adiabatic_min: f64,
    /// Warn when `λ/((b − a/2)·gap)` exceeds this.
    pub weakness_max: f64,
}

impl ProbeConfig {
    pub fn new(coupling: f64, t: f64, epsilon_reg: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(invalid("coupling", format!("must be positive, got {coupling}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("T", format!("must be positive, got {t}")));
        }
        if !(epsilon_reg > 0.0) {
            return Err(invalid("epsilon_reg", format!("must be positive, got {epsilon_reg}")));
        }
        Ok(Self {
            coupling,
            t,
            epsilon_reg,
            za0: 0.0,
            adiabatic_min: 100.0,
            weakness_max: 1e-2,
        })
    }

    pub fn with_time(self, t: f64) -> Result<Self> {
        ProbeConfig::new(self.coupling, t, self.epsilon_reg)?;
        Ok(Self { t, ..self })
    }

    pub fn with_coupling(self, coupling: f64) -> Result<Self> {
        ProbeConfig::new(coupling, self.t, self.epsilon_reg)?;
        Ok(Self { coupling, ..self })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProbeWarning {
    NotAdiabatic { ratio: f64, min: f64 },
    NotWeak { ratio: f64, max: f64 },
}

impl std::fmt::Display for ProbeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProbeWarning::NotAdiabatic { ratio, min } => {
                write!(f, "adiabatic ratio T*gap = {ratio:.3e} is below {min:.3e}")
            }
            ProbeWarning::NotWeak { ratio, max } => {
                write!(f, "weakness ratio lambda/(c*gap) = {ratio:.3e} exceeds {max:.3e}")
            }
        }
    }
}

/// The system side of the protective interaction. The probe only reads it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtectedSystem {
    pub spin: BlochAngles,
    pub level: Level,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickResult {
    pub kick_integral: f64,
    pub h_prime0: f64,
    pub g_prime0: f64,
    pub p_final: f64,
    pub adiabatic_ratio: f64,
    pub weakness_ratio: f64,
    pub system: ProtectedSystem,
    pub warnings: Vec<ProbeWarning>,
}

/// `I = ∫ sin²(k(b + a/2 − z))/z² dz` over the upper well.
pub fn kick_integral(geom: &WellGeometry, level: &Level) -> Result<f64> {
    let outer = geom.outer();
    let k = level.k;
    let r = integrate(
        |z| {
            let s = (k * (outer - z)).sin();
            s * s / (z * z)
        },
        geom.c(),
        outer,
        0.0,
        QUAD_REL,
    );
    if !r.converged {
        return Err(invalid("kick_integral", "quadrature did not converge"));
    }
    Ok(r.value)
}

/// Upper- and lower-well weights of the spinor level.
fn well_weights(level: &Level, spin: &BlochAngles) -> (f64, f64) {
    let (s, c) = (0.5 * spin.theta()).sin_cos();
    match level.parity {
        Parity::Sym => (c * c, s * s),
        Parity::Antisym => (s * s, c * c),
    }
}

/// `±1` for the orientation of `h'(0)` relative to `cos θ`.
fn parity_sign(level: &Level) -> f64 {
    match level.parity {
        Parity::Sym => 1.0,
        Parity::Antisym => -1.0,
    }
}

/// Well part of `f(z_a)`: both wells mapped onto the upper one.
pub fn h_of_za(geom: &WellGeometry, level: &Level, spin: &BlochAngles, za: f64) -> Result<f64> {
    let outer = geom.outer();
    let c = geom.c();
    if za.abs() >= c {
        return Err(Error::ProbeDomain { za, cutoff: c });
    }
    let k = level.k;
    let sin2 = move |z: f64| (k * (outer - z)).sin().powi(2);
    let up = integrate(|z| sin2(z) / (z - za), c, outer, 0.0, QUAD_REL).value;
    let down = integrate(|z| sin2(z) / (z + za), c, outer, 0.0, QUAD_REL).value;
    let (w_up, w_down) = well_weights(level, spin);
    Ok(level.a_amp * level.a_amp * (w_up * up + w_down * down))
}

/// Barrier part of `f(z_a)` with lower cutoff `ε`. Defined for `|z_a| < ε`.
pub fn g_of_za(geom: &WellGeometry, level: &Level, za: f64, epsilon_reg: f64) -> Result<f64> {
    let c = geom.c();
    if za.abs() >= epsilon_reg || epsilon_reg >= c {
        return Err(Error::ProbeDomain { za, cutoff: epsilon_reg });
    }
    let edge = level.a_amp * (level.k * geom.a()).sin();
    let shape = |z: f64| barrier_shape(level, geom, z);
    let r = integrate(
        |z| {
            let s = shape(z);
            s * s * (1.0 / (z + za) + 1.0 / (z - za))
        },
        epsilon_reg,
        c,
        0.0,
        QUAD_REL,
    );
    Ok(edge * edge * r.value)
}

pub fn f_of_za(geom: &WellGeometry, level: &Level, spin: &BlochAngles, za: f64, probe: &ProbeConfig) -> Result<f64> {
    Ok(h_of_za(geom, level, spin, za)? + g_of_za(geom, level, za, probe.epsilon_reg)?)
}

/// `h'(0) = ±cos θ · A² · I`, `+` for symmetric levels.
pub fn h_prime_zero(geom: &WellGeometry, level: &Level, theta_m: f64) -> Result<f64> {
    Ok(parity_sign(level) * polar_cos(theta_m) * level.a_amp * level.a_amp * kick_integral(geom, level)?)
}

/// Central difference of `g` at 0 with step `ε/10`.
pub fn g_prime_zero(geom: &WellGeometry, level: &Level, probe: &ProbeConfig) -> Result<f64> {
    let h = 0.1 * probe.epsilon_reg;
    let gp = g_of_za(geom, level, h, probe.epsilon_reg)?;
    let gm = g_of_za(geom, level, -h, probe.epsilon_reg)?;
    Ok((gp - gm) / (2.0 * h))
}

/// Central difference of `f` at 0.
pub fn f_prime_fd(geom: &WellGeometry, level: &Level, spin: &BlochAngles, probe: &ProbeConfig, step: f64) -> Result<f64> {
    let fp = f_of_za(geom, level, spin, step, probe)?;
    let fm = f_of_za(geom, level, spin, -step, probe)?;
    Ok((fp - fm) / (2.0 * step))
}

pub fn adiabaticity_ratio(t: f64, gap: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(invalid("gap", format!("must be positive, got {gap}")));
    }
    Ok(t * gap / crate::HBAR)
}

pub fn weakness_ratio(geom: &WellGeometry, probe: &ProbeConfig, gap: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(invalid("gap", format!("must be positive, got {gap}")));
    }
    Ok(probe.coupling / (geom.c() * gap))
}

/// `C = λ·T·A²·I`; the ground-level probe momentum is `−C·cos θ`.
pub fn calibration_constant(geom: &WellGeometry, level: &Level, probe: &ProbeConfig) -> Result<f64> {
    Ok(probe.coupling * probe.t * level.a_amp * level.a_amp * kick_integral(geom, level)?)
}

/// Probe momentum after protectively measuring the ground level.
pub fn probe_momentum(spin: &BlochAngles, geom: &WellGeometry, level: &Level, probe: &ProbeConfig) -> Result<KickResult> {
    if level.parity != Parity::Sym || level.n != 1 {
        return Err(invalid("level", "protective measurement needs the nondegenerate ground level s1"));
    }
    let gap = level_gap(geom, 1)?;
    let kick_integral = kick_integral(geom, level)?;
    let h_prime0 = spin.cos_theta() * level.a_amp * level.a_amp * kick_integral;
    let g_prime0 = g_prime_zero(geom, level, probe)?;
    let p_final = -probe.coupling * probe.t * h_prime0;
    let adiabatic_ratio = adiabaticity_ratio(probe.t, gap)?;
    let weakness = weakness_ratio(geom, probe, gap)?;
    let mut warnings = Vec::new();
    if adiabatic_ratio < probe.adiabatic_min {
        warnings.push(ProbeWarning::NotAdiabatic {
            ratio: adiabatic_ratio,
            min: probe.adiabatic_min,
        });
    }
    if weakness > probe.weakness_max {
        warnings.push(ProbeWarning::NotWeak {
            ratio: weakness,
            max: probe.weakness_max,
        });
    }
    Ok(KickResult {
        kick_integral,
        h_prime0,
        g_prime0,
        p_final,
        adiabatic_ratio,
        weakness_ratio: weakness,
        system: ProtectedSystem {
            spin: *spin,
            level: *level,
            collapsed: false,
        },
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Zero,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    pub label: Label,
    pub momentum: f64,
    /// Noiseless momentum for `|0⟩`; the decision threshold is half of it.
    pub zero_response: f64,
}

/// Weighted probe kicks of a level superposition, per level
/// `−λ·T·(±cos θ)·A_i²·I_i`.
pub fn superposition_kick(
    theta: f64,
    geom: &WellGeometry,
    levels: &[Level],
    weights: &[f64],
    probe: &ProbeConfig,
) -> Result<f64> {
    if levels.len() != weights.len() || levels.is_empty() {
        return Err(Error::DegenerateWeights("need one weight per level".into()));
    }
    let total: f64 = weights.iter().map(|w| w * w).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }
    let mut p = 0.0;
    for (lv, w) in levels.iter().zip(weights) {
        p += w * w / total * -probe.coupling * probe.t * h_prime_zero(geom, lv, theta)?;
    }
    Ok(p)
}

/// Decides between `|0⟩` and `|+⟩` from one (optionally noisy) probe readout.
pub fn discriminate<R: Rng + ?Sized>(
    spin: &BlochAngles,
    geom: &WellGeometry,
    levels: &[Level],
    weights: &[f64],
    probe: &ProbeConfig,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Discrimination> {
    let zero_response = superposition_kick(0.0, geom, levels, weights, probe)?;
    if zero_response == 0.0 {
        return Err(Error::DegenerateWeights("level kicks cancel for |0>".into()));
    }
    let mut momentum = superposition_kick(spin.theta(), geom, levels, weights, probe)?;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| invalid("noise_sigma", e.to_string()))?;
        momentum += normal.sample(rng);
    }
    let label = if momentum / zero_response > 0.5 { Label::Zero } else { Label::Plus };
    Ok(Discrimination {
        label,
        momentum,
        zero_response,
    })
}
