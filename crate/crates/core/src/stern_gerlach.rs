//! Stern–Gerlach splitting at the level of packet centers and weights.
//!
//! A gradient pulse along an axis gives the `|+⟩` branch the momentum
//! `γ·Bi·(ħ/2)·τ` and the `|−⟩` branch its negative. With `γ < 0` and the
//! conventional `Bi < 0` the spin-up branch moves toward positive `z`.

use serde::{Deserialize, Serialize};

use crate::doublewell::Level;
use crate::error::{invalid, Error, Result};
use crate::spin::{decompose_in_axis, AxisFrame, BlochAngles};
use crate::{HBAR, MASS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPulse {
    pub bi: f64,
    pub tau: f64,
    pub axis: BlochAngles,
    pub gamma: f64,
    /// Static field along the pulse axis; only its precession is tracked.
    pub b0: f64,
}

impl FieldPulse {
    pub fn new(bi: f64, tau: f64, axis: BlochAngles, gamma: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(invalid("tau", format!("must be a finite nonnegative time, got {tau}")));
        }
        if !(gamma < 0.0) {
            return Err(invalid("gamma", format!("electron gyromagnetic ratio is negative, got {gamma}")));
        }
        if !bi.is_finite() {
            return Err(invalid("Bi", "must be finite"));
        }
        Ok(Self {
            bi,
            tau,
            axis,
            gamma,
            b0: 0.0,
        })
    }

    pub fn with_static_field(self, b0: f64) -> Self {
        Self { b0, ..self }
    }

    /// Signed momentum of the `|+⟩` branch.
    pub fn plus_momentum(&self) -> f64 {
        self.gamma * self.bi * (0.5 * HBAR) * self.tau
    }
}

/// Gaussian packet before the pulse, centered at rest at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketPrep {
    pub dp: f64,
    pub dz: f64,
    pub p0: f64,
    pub z0: f64,
}

impl PacketPrep {
    pub fn new(dp: f64, dz: f64) -> Result<Self> {
        if !(dp >= 0.0 && dz >= 0.0) {
            return Err(invalid("packet", "spreads must be nonnegative"));
        }
        if dp * dz < 0.5 * HBAR - 1e-12 {
            return Err(invalid("packet", format!("Δz·Δp = {} violates the uncertainty bound", dp * dz)));
        }
        Ok(Self { dp, dz, p0: 0.0, z0: 0.0 })
    }

    /// Minimum-uncertainty packet with the given momentum spread.
    pub fn minimal(dp: f64) -> Result<Self> {
        if !(dp > 0.0) {
            return Err(invalid("dp", "must be positive for a minimum-uncertainty packet"));
        }
        Self::new(dp, 0.5 * HBAR / dp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitState {
    /// State before the pulse, kept for lossless recombination.
    pub original: BlochAngles,
    pub axis: BlochAngles,
    pub theta_ma: f64,
    /// Relative phase in the pulse frame, including static-field precession.
    pub phi_ma: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub entangled: bool,
    /// Precession angle `−γ B0 τ` about the pulse axis.
    pub precession: f64,
    pub prep: Option<PacketPrep>,
    pub measured: bool,
}

impl SplitState {
    /// Records a momentum measurement; the state can no longer be recombined.
    pub fn mark_measured(&mut self) {
        self.measured = true;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recombined {
    pub angles: BlochAngles,
    /// Packet after recombination: same `Δp`, `Δz` no longer minimal.
    pub prep: Option<PacketPrep>,
    pub dz_grown: bool,
}

pub fn kick_magnitude(pulse: &FieldPulse) -> f64 {
    pulse.plus_momentum().abs()
}

/// `Bi·τ` whose kick carries kinetic energy `E` of the level.
///
/// The returned product is negative, matching the `Bi < 0` convention with
/// `τ > 0`.
pub fn match_pulse_to_level(level: &Level, gamma: f64) -> Result<f64> {
    if !(gamma < 0.0) {
        return Err(invalid("gamma", "must be negative"));
    }
    let p = (2.0 * MASS * level.energy).sqrt();
    Ok(-2.0 * p / (gamma.abs() * HBAR))
}

pub fn split(spin: &BlochAngles, pulse: &FieldPulse) -> SplitState {
    split_packet(spin, pulse, None)
}

pub fn split_packet(spin: &BlochAngles, pulse: &FieldPulse, prep: Option<PacketPrep>) -> SplitState {
    let frame = AxisFrame::new(pulse.axis);
    let d = decompose_in_axis(spin, &frame);
    let (w_plus, w_minus) = d.weights();
    let p = pulse.plus_momentum();
    let precession = -pulse.gamma * pulse.b0 * pulse.tau;
    SplitState {
        original: *spin,
        axis: pulse.axis,
        theta_ma: d.theta_mn,
        phi_ma: (d.phi_mn + precession).rem_euclid(std::f64::consts::TAU),
        p_plus: p,
        p_minus: -p,
        w_plus,
        w_minus,
        entangled: d.phi_identifiable,
        precession,
        prep,
        measured: false,
    }
}

/// Reverses the pulse: branch momenta return to zero and the spin state is
/// the one that entered [`split`].
pub fn recombine(state: &SplitState) -> Result<Recombined> {
    if state.measured {
        return Err(Error::AlreadyMeasured);
    }
    Ok(Recombined {
        angles: state.original,
        prep: state.prep,
        dz_grown: true,
    })
}

/// Worst-case kinetic-energy spread `(Δp² + 2|kick|Δp)/(2M)`.
pub fn energy_uncertainty(prep: &PacketPrep, kick: f64) -> f64 {
    (prep.dp * prep.dp + 2.0 * kick.abs() * prep.dp) / (2.0 * MASS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn z_pulse(bi: f64, tau: f64) -> FieldPulse {
        FieldPulse::new(bi, tau, BlochAngles::z_axis(), -1.0).unwrap()
    }

    #[test]
    fn kick_examples() {
        assert_eq!(kick_magnitude(&z_pulse(-2.0, 0.0)), 0.0);
        assert_eq!(kick_magnitude(&z_pulse(-2.0, 1.0)), 1.0);
        assert_eq!(kick_magnitude(&z_pulse(-4.0, 1.0)), 2.0);
        assert!(FieldPulse::new(1.0, 1.0, BlochAngles::z_axis(), 1.0).is_err());
    }

    #[test]
    fn up_state_does_not_split() {
        let s = split(&BlochAngles::new(0.0, 0.0), &z_pulse(-2.0, 1.0));
        assert!(!s.entangled);
        assert_eq!(s.w_plus, 1.0);
        assert!(s.p_plus > 0.0);
        let r = recombine(&s).unwrap();
        assert_eq!(r.angles.theta(), 0.0);
    }

    #[test]
    fn equator_splits_evenly() {
        let s = split(&BlochAngles::new(PI / 2.0, 0.3), &z_pulse(-2.0, 1.0));
        assert!((s.w_plus - 0.5).abs() < 1e-15 && (s.w_minus - 0.5).abs() < 1e-15);
        assert!(s.entangled);
        assert_eq!(s.p_plus, -s.p_minus);
    }

    #[test]
    fn measured_state_cannot_recombine() {
        let mut s = split(&BlochAngles::new(1.0, 0.3), &z_pulse(-2.0, 1.0));
        s.mark_measured();
        assert_eq!(recombine(&s), Err(Error::AlreadyMeasured));
    }

    #[test]
    fn energy_spread_examples() {
        let p = PacketPrep { dp: 0.0, dz: 1.0, p0: 0.0, z0: 0.0 };
        assert_eq!(energy_uncertainty(&p, 3.0), 0.0);
        let p = PacketPrep::minimal(0.2).unwrap();
        assert!((energy_uncertainty(&p, 0.0) - 0.02).abs() < 1e-16);
        assert!(PacketPrep::new(0.1, 1.0).is_err());
    }
}
