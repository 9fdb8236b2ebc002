//! Run configuration: JSON loading, validation and resolution into model types.

use std::f64::consts::PI;
use std::path::Path;

use protoclone::doublewell::{bound_level_count, level_gap, solve_levels, Level, Parity, WellGeometry};
use protoclone::probe::{calibration_constant, ProbeConfig};
use protoclone::reconstruction::{random_hidden, trial_rng, AxisPlan};
use protoclone::spin::BlochAngles;
use protoclone::stern_gerlach::FieldPulse;
use protoclone::tdse::{GridSpec, OracleConfig};
use protoclone::HBAR;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// The demo configuration shipped in `configs/demo.json`.
pub const DEMO_CONFIG: &str = include_str!("../../../configs/demo.json");

/// Stream index reserved for drawing a hidden state when none is configured.
const HIDDEN_STREAM: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: WellGeometry,
    #[serde(default = "default_levels")]
    pub levels: usize,
    pub probe: ProbeSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub plan: PlanSection,
    /// Hidden state; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<AnglesSection>,
    /// Momentum noise in units of the calibration constant `C`.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_trials")]
    pub discriminate_trials: usize,
    #[serde(default = "default_margin")]
    pub theta_margin: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_levels() -> usize {
    5
}

fn default_trials() -> usize {
    100
}

fn default_margin() -> f64 {
    0.1
}

/// Probe strength and duration, either absolute or as ratios to the gap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// `λ / (c·gap)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weakness_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    /// `T·gap/ħ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adiabatic_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_reg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softening: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softening_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub bi: f64,
    pub tau: f64,
    pub gamma: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self { bi: -2.0, tau: 1.0, gamma: -1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub theta_n: f64,
    pub phi_n: f64,
    pub theta_l: f64,
    pub phi_l: f64,
}

impl Default for PlanSection {
    fn default() -> Self {
        let p = AxisPlan::default();
        Self {
            theta_n: p.n_axis().theta(),
            phi_n: p.n_axis().phi(),
            theta_l: p.l_axis().theta(),
            phi_l: p.l_axis().phi(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglesSection {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub geometry: WellGeometry,
    pub trap_ratios: Vec<f64>,
    pub control_factor: f64,
    pub convergence_grid: GridSpec,
    pub convergence_floor: f64,
    #[serde(default = "default_split_npts")]
    pub split_npts: usize,
    #[serde(default = "default_packet_dp")]
    pub packet_dp: f64,
}

fn default_split_npts() -> usize {
    2048
}

fn default_packet_dp() -> f64 {
    0.5
}

impl Default for OracleSection {
    fn default() -> Self {
        let o = OracleConfig::default();
        Self {
            geometry: o.geometry,
            trap_ratios: o.trap_ratios,
            control_factor: o.control_factor,
            convergence_grid: o.convergence_grid,
            convergence_floor: o.convergence_floor,
            split_npts: o.split_npts,
            packet_dp: o.packet_dp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCommand {
    Spectrum,
    Kick,
    Clone,
    MonteCarlo,
    Discriminate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    #[default]
    Cartesian,
    Zip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the config, e.g. `hidden.theta` or `geometry.v0`.
    pub path: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<LinearRange>,
}

impl SweepAxis {
    pub fn points(&self) -> Result<Vec<Value>, CliError> {
        match (&self.range, self.values.is_empty()) {
            (Some(_), false) => Err(CliError::config(format!("sweep axis `{}`: give values or range, not both", self.path))),
            (None, true) => Err(CliError::config(format!("sweep axis `{}` is empty", self.path))),
            (None, false) => Ok(self.values.clone()),
            (Some(r), true) => {
                if r.count == 0 {
                    return Err(CliError::config(format!("sweep axis `{}` is empty", self.path)));
                }
                if !(r.start.is_finite() && r.stop.is_finite()) {
                    return Err(CliError::config(format!("sweep axis `{}`: range must be finite", self.path)));
                }
                Ok((0..r.count)
                    .map(|i| {
                        let x = if r.count == 1 {
                            r.start
                        } else {
                            r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64
                        };
                        Value::from(x)
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub command: SweepCommand,
    #[serde(default)]
    pub mode: SweepMode,
    pub axes: Vec<SweepAxis>,
}

/// Everything a command needs, built and checked from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub geom: WellGeometry,
    pub ground: Level,
    pub gap: f64,
    pub probe: ProbeConfig,
    pub softening: f64,
    pub pulse: FieldPulse,
    pub plan: AxisPlan,
    pub hidden: BlochAngles,
    pub hidden_drawn: bool,
    pub calibration: f64,
    pub noise_sigma: f64,
    pub oracle: OracleConfig,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn one_of(name: &str, abs: Option<f64>, rel: Option<f64>, scale: f64, default_rel: Option<f64>) -> Result<f64, CliError> {
    match (abs, rel, default_rel) {
        (Some(_), Some(_), _) => Err(CliError::config(format!("probe: give {name} or its ratio, not both"))),
        (Some(x), None, _) => positive(name, x),
        (None, Some(r), _) => Ok(positive(name, r)? * scale),
        (None, None, Some(r)) => Ok(r * scale),
        (None, None, None) => Err(CliError::config(format!("probe: {name} or its ratio is required"))),
    }
}

fn angles(name: &str, theta: f64, phi: f64) -> Result<BlochAngles, CliError> {
    if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
        return Err(CliError::config(format!("{name}: need theta in [0, pi] and finite phi, got ({theta}, {phi})")));
    }
    Ok(BlochAngles::new(theta, phi))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn demo() -> Self {
        Self::from_json(DEMO_CONFIG).expect("shipped demo config parses")
    }

    /// Validates every section and derives the model objects.
    pub fn resolve(&self) -> Result<Setup, CliError> {
        let geom = self.geometry;
        let m = CliError::model;
        if self.levels == 0 {
            return Err(CliError::config("levels must be at least 1"));
        }
        for parity in [Parity::Sym, Parity::Antisym] {
            let have = bound_level_count(&geom, parity);
            if self.levels > have {
                return Err(CliError::config(format!(
                    "levels = {} but the geometry binds only {have} {} levels",
                    self.levels,
                    parity.label()
                )));
            }
        }
        let ground = solve_levels(&geom, Parity::Sym, 1).map_err(m)?[0];
        let gap = level_gap(&geom, 1).map_err(m)?;
        if !(gap > 0.0) {
            return Err(CliError::config("geometry has no resolvable tunneling gap"));
        }
        let c = geom.c();
        let p = &self.probe;
        let coupling = one_of("coupling", p.coupling, p.weakness_ratio, c * gap, None)?;
        let time = one_of("time", p.time, p.adiabatic_ratio, HBAR / gap, None)?;
        let epsilon = one_of("epsilon_reg", p.epsilon_reg, p.epsilon_fraction, c, Some(1e-3))?;
        let softening = one_of("softening", p.softening, p.softening_fraction, c, Some(epsilon / c))?;
        if softening >= c {
            return Err(CliError::config("probe: softening must be smaller than the barrier half-width"));
        }
        let probe = ProbeConfig::new(coupling, time, epsilon).map_err(m)?;
        let pulse = FieldPulse::new(self.pulse.bi, self.pulse.tau, BlochAngles::z_axis(), self.pulse.gamma).map_err(m)?;
        let plan = AxisPlan::new(
            angles("plan.n", self.plan.theta_n, self.plan.phi_n)?,
            angles("plan.l", self.plan.theta_l, self.plan.phi_l)?,
        )
        .map_err(m)?;
        if !(0.0..PI / 2.0).contains(&self.theta_margin) {
            return Err(CliError::config(format!("theta_margin must lie in [0, pi/2), got {}", self.theta_margin)));
        }
        let (hidden, hidden_drawn) = match self.hidden {
            Some(h) => (angles("hidden", h.theta, h.phi)?, false),
            None => (random_hidden(&mut trial_rng(self.seed, HIDDEN_STREAM), self.theta_margin), true),
        };
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CliError::config(format!("noise must be finite and nonnegative, got {}", self.noise)));
        }
        if self.trials == 0 || self.discriminate_trials == 0 {
            return Err(CliError::config("trial counts must be at least 1"));
        }
        let calibration = calibration_constant(&geom, &ground, &probe).map_err(m)?;
        let oracle = self.oracle_config(gap, softening)?;
        oracle.validate().map_err(m)?;
        if let Some(sweep) = &self.sweep {
            if sweep.axes.is_empty() {
                return Err(CliError::config("sweep has no axes"));
            }
        }
        Ok(Setup {
            config: self.clone(),
            geom,
            ground,
            gap,
            probe,
            softening,
            pulse,
            plan,
            hidden,
            hidden_drawn,
            calibration,
            noise_sigma: self.noise * calibration,
            oracle,
        })
    }

    fn oracle_config(&self, gap: f64, softening: f64) -> Result<OracleConfig, CliError> {
        let c = self.geometry.c();
        let o = &self.oracle;
        let weakness = self.probe.weakness_ratio.unwrap_or_else(|| self.probe.coupling.unwrap_or(0.0) / (c * gap));
        let horizon = self.probe.adiabatic_ratio.unwrap_or_else(|| self.probe.time.unwrap_or(0.0) * gap / HBAR);
        Ok(OracleConfig {
            geometry: o.geometry,
            probe_geometry: self.geometry,
            grid: self.grid,
            horizon,
            weakness_ratio: weakness,
            control_factor: o.control_factor,
            softening_fraction: softening / c,
            za_step_fraction: 1e-2,
            trap_ratios: o.trap_ratios.clone(),
            split_npts: o.split_npts,
            pulse_bi: self.pulse.bi,
            pulse_tau: self.pulse.tau,
            gamma: self.pulse.gamma,
            packet_dp: o.packet_dp,
            convergence_grid: o.convergence_grid,
            convergence_floor: o.convergence_floor,
        })
    }

    /// Copy with the dotted `path` set to `value`; the path must already exist.
    pub fn with_override(&self, path: &str, value: &Value) -> Result<Self, CliError> {
        let mut doc = serde_json::to_value(self).map_err(|e| CliError::config(e.to_string()))?;
        let pointer = format!("/{}", path.replace('.', "/"));
        match doc.pointer_mut(&pointer) {
            Some(slot) => *slot = value.clone(),
            None => return Err(CliError::config(format!("sweep path `{path}` does not name a config field"))),
        }
        serde_json::from_value(doc).map_err(|e| CliError::config(format!("sweep `{path}` = {value}: {e}")))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canon.as_bytes()))
    }
}
