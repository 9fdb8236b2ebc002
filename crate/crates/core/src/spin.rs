//! Spin-1/2 states, measurement-axis frames and closed-form spin analyses.
//!
//! Kets use the computational basis `|0⟩ = S_z up`, `|1⟩ = S_z down`. Two-spin
//! vectors are ordered `|00⟩, |01⟩, |10⟩, |11⟩` (first factor most
//! significant).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::HBAR;

pub type C64 = Complex64;
pub type Matrix2 = [[C64; 2]; 2];
pub type Matrix4 = [[C64; 4]; 4];
pub type Vector4 = [C64; 4];

/// Polar angles closer than this to 0 or π are treated as poles.
pub const POLE_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

fn reduce_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Point on the Bloch sphere.
///
/// `theta` is clamped to `[0, π]` and `phi` reduced to `[0, 2π)`. At the poles
/// `phi` carries no information and is stored as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    theta: f64,
    phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Self {
        let theta = theta.clamp(0.0, PI);
        let pole = theta <= POLE_TOL || theta >= PI - POLE_TOL;
        let phi = if pole || !phi.is_finite() { 0.0 } else { reduce_angle(phi) };
        Self { theta, phi }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// True when `phi` is not identifiable.
    pub fn is_pole(&self) -> bool {
        self.theta <= POLE_TOL || self.theta >= PI - POLE_TOL
    }

    pub fn z_axis() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn cos_theta(&self) -> f64 {
        polar_cos(self.theta)
    }
}

/// `cos θ` evaluated as `sin(π/2 − θ)`, so it is exactly zero at `θ = π/2`
/// and exactly `±1` at the poles.
pub fn polar_cos(theta: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 - theta).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("vector", "cannot normalize a zero or non-finite vector"));
        }
        Ok(Self {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> [f64; 3] {
        [
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        ]
    }

    /// Angle to `o`, accurate near 0 and π where `acos` loses digits.
    pub fn angle_to(&self, o: &Self) -> f64 {
        let c = self.cross(o);
        let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        s.atan2(self.dot(o))
    }

    pub fn to_angles(&self) -> BlochAngles {
        let theta = self.x.hypot(self.y).atan2(self.z);
        BlochAngles::new(theta, self.y.atan2(self.x))
    }
}

pub fn angles_to_axis(angles: &BlochAngles) -> UnitVec3 {
    let (st, ct) = angles.theta.sin_cos();
    let (sp, cp) = angles.phi.sin_cos();
    UnitVec3 {
        x: st * cp,
        y: st * sp,
        z: ct,
    }
}

/// Normalized spin state.
///
/// Built through [`SpinKet::new`] the global phase is canonical: `c0` real and
/// nonnegative, or `c1` real and nonnegative when `c0 = 0`. Frame kets keep the
/// phase convention of their defining formula and are built with
/// [`SpinKet::with_phase`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinKet {
    c0: C64,
    c1: C64,
}

impl SpinKet {
    pub fn new(c0: C64, c1: C64) -> Result<Self> {
        let k = Self::with_phase(c0, c1)?;
        let pivot = if k.c0.norm() > 0.0 { k.c0 } else { k.c1 };
        let phase = pivot.conj() / pivot.norm();
        Ok(Self {
            c0: k.c0 * phase,
            c1: k.c1 * phase,
        })
    }

    /// Normalizes without touching the global phase.
    pub fn with_phase(c0: C64, c1: C64) -> Result<Self> {
        let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("ket", "zero or non-finite amplitudes"));
        }
        Ok(Self { c0: c0 / n, c1: c1 / n })
    }

    pub fn up() -> Self {
        Self {
            c0: C64::new(1.0, 0.0),
            c1: ZERO,
        }
    }

    pub fn down() -> Self {
        Self {
            c0: ZERO,
            c1: C64::new(1.0, 0.0),
        }
    }

    pub fn c0(&self) -> C64 {
        self.c0
    }

    pub fn c1(&self) -> C64 {
        self.c1
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.c0.conj() * other.c0 + self.c1.conj() * other.c1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    /// `|self⟩ ⊗ |other⟩`.
    pub fn kron(&self, other: &Self) -> Vector4 {
        [
            self.c0 * other.c0,
            self.c0 * other.c1,
            self.c1 * other.c0,
            self.c1 * other.c1,
        ]
    }
}

pub fn bloch_to_ket(angles: &BlochAngles) -> SpinKet {
    let (s, c) = (0.5 * angles.theta).sin_cos();
    SpinKet {
        c0: C64::new(c, 0.0),
        c1: C64::from_polar(s, angles.phi),
    }
}

pub fn ket_to_bloch(ket: &SpinKet) -> BlochAngles {
    let theta = 2.0 * ket.c1.norm().atan2(ket.c0.norm());
    BlochAngles::new(theta, ket.c1.arg() - ket.c0.arg())
}

/// `S·n̂ = (ħ/2) σ·n̂`.
pub fn spin_operator(axis: &UnitVec3) -> Matrix2 {
    let h = 0.5 * HBAR;
    [
        [C64::new(h * axis.z, 0.0), C64::new(h * axis.x, -h * axis.y)],
        [C64::new(h * axis.x, h * axis.y), C64::new(-h * axis.z, 0.0)],
    ]
}

pub fn apply2(m: &Matrix2, k: &SpinKet) -> [C64; 2] {
    [
        m[0][0] * k.c0 + m[0][1] * k.c1,
        m[1][0] * k.c0 + m[1][1] * k.c1,
    ]
}

/// Eigenbasis of `S·n̂` for a measurement axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisFrame {
    pub angles: BlochAngles,
    pub axis: UnitVec3,
    pub plus_ket: SpinKet,
    pub minus_ket: SpinKet,
}

impl AxisFrame {
    /// `|+⟩ = cos(θ/2)|0⟩ + sin(θ/2)e^{iφ}|1⟩`,
    /// `|−⟩ = −sin(θ/2)|0⟩ + cos(θ/2)e^{iφ}|1⟩`.
    pub fn new(angles: BlochAngles) -> Self {
        let (s, c) = (0.5 * angles.theta).sin_cos();
        let e = C64::from_polar(1.0, angles.phi);
        Self {
            angles,
            axis: angles_to_axis(&angles),
            plus_ket: SpinKet {
                c0: C64::new(c, 0.0),
                c1: e * s,
            },
            minus_ket: SpinKet {
                c0: C64::new(-s, 0.0),
                c1: e * c,
            },
        }
    }

    pub fn z() -> Self {
        Self::new(BlochAngles::z_axis())
    }
}

/// Cosine of the angle between two Bloch directions.
pub fn axis_overlap_cos(m: &BlochAngles, n: &BlochAngles) -> f64 {
    let c = m.theta.cos() * n.theta.cos() + (m.phi - n.phi).cos() * m.theta.sin() * n.theta.sin();
    c.clamp(-1.0, 1.0)
}

/// `(θ_mn, φ_mn)` of a state in an axis frame, with
/// `|m⟩ ∝ cos(θ_mn/2)|+⟩ + sin(θ_mn/2)e^{iφ_mn}|−⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDecomposition {
    pub theta_mn: f64,
    pub phi_mn: f64,
    pub phi_identifiable: bool,
}

impl AxisDecomposition {
    pub fn weights(&self) -> (f64, f64) {
        let c = (0.5 * self.theta_mn).cos();
        let p = c * c;
        (p, 1.0 - p)
    }
}

pub fn decompose_in_axis(m: &BlochAngles, frame: &AxisFrame) -> AxisDecomposition {
    let ket = bloch_to_ket(m);
    let a_plus = frame.plus_ket.inner(&ket);
    let a_minus = frame.minus_ket.inner(&ket);
    let theta_mn = 2.0 * a_minus.norm().atan2(a_plus.norm());
    let pole = a_plus.norm() <= POLE_TOL || a_minus.norm() <= POLE_TOL;
    let phi_mn = if pole {
        0.0
    } else {
        reduce_angle(a_minus.arg() - a_plus.arg())
    };
    AxisDecomposition {
        theta_mn,
        phi_mn,
        phi_identifiable: !pole,
    }
}

pub fn mat_vec4(m: &Matrix4, v: &Vector4) -> Vector4 {
    let mut out = [ZERO; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

/// Max-norm distance of `D†D` from the identity.
pub fn unitarity_defect(m: &Matrix4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let g: C64 = (0..4).map(|k| m[k][i].conj() * m[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).norm());
        }
    }
    worst
}

/// The fixed operator with `D|0⟩|0⟩ = |0⟩|0⟩` and `D|+⟩|0⟩ = |+⟩|+⟩`.
pub fn plus_state_cloner() -> Matrix4 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let s = 2f64.sqrt();
    let c = |x: f64| C64::new(x * r, 0.0);
    [
        [c(s), ZERO, c(1.0 - s), ZERO],
        [ZERO, ZERO, c(1.0), ZERO],
        [ZERO, ZERO, c(1.0), ZERO],
        [ZERO, ZERO, c(1.0), ZERO],
    ]
}

/// A state-dependent operator with `D|0⟩|0⟩ = |0⟩|0⟩` and `D|m⟩|0⟩ = |m⟩|m⟩`.
///
/// Only the `|00⟩` and `|10⟩` columns are populated; the `cot(θ/2)` factor
/// makes the construction undefined at `θ = 0`.
pub fn nonunitary_cloner(angles: &BlochAngles) -> Result<Matrix4> {
    let theta = angles.theta;
    if theta <= POLE_TOL {
        return Err(Error::Pole { theta });
    }
    let (s, c) = (0.5 * theta).sin_cos();
    let cot = c / s;
    let e = C64::from_polar(1.0, angles.phi);
    let mut d = [[ZERO; 4]; 4];
    d[0][0] = C64::new(1.0, 0.0);
    d[0][2] = e.conj() * (cot * (c - 1.0));
    d[1][2] = C64::new(c, 0.0);
    d[2][2] = C64::new(c, 0.0);
    d[3][2] = e * s;
    Ok(d)
}

/// `‖cos(θ/2)|00⟩ + sin(θ/2)e^{iφ}|11⟩ − |m⟩|m⟩‖`: how far a linear cloner
/// fixed on the basis states lands from the true clone.
pub fn linearity_obstruction_check(angles: &BlochAngles) -> f64 {
    let ket = bloch_to_ket(angles);
    let linear = [ket.c0, ZERO, ZERO, ket.c1];
    let clone = ket.kron(&ket);
    linear
        .iter()
        .zip(&clone)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Outcome of protecting with a static field along ẑ instead of m̂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrongProtection {
    /// First-order `B̂·m̂` in the large-`T` expansion.
    pub cos_theta_bm: f64,
    /// `B̂·m̂` from the full resultant field vector.
    pub cos_theta_bm_exact: f64,
    pub p_plus: f64,
    pub p_minus: f64,
}

pub fn wrong_protection_outcome(
    m: &BlochAngles,
    n: &BlochAngles,
    b0: f64,
    bi: f64,
    qn: f64,
    t: f64,
) -> Result<WrongProtection> {
    if !(b0 > 0.0) {
        return Err(invalid("B0", format!("must be positive, got {b0}")));
    }
    if !(t > 0.0) {
        return Err(invalid("T", format!("must be positive, got {t}")));
    }
    let cos_m = m.theta.cos();
    let cos_n = n.theta.cos();
    let cos_mn = axis_overlap_cos(m, n);
    let g = bi * qn / t;
    let first = (cos_m + g / b0 * (cos_mn - cos_m * cos_n)).clamp(-1.0, 1.0);

    let nv = angles_to_axis(n);
    let bx = g * nv.x;
    let by = g * nv.y;
    let bz = b0 + g * nv.z;
    let exact = match UnitVec3::new(bx, by, bz) {
        Ok(bhat) => bhat.dot(&angles_to_axis(m)).clamp(-1.0, 1.0),
        Err(_) => first,
    };

    // Evaluate the larger probability and take its complement so the pair
    // sums to one with no extra rounding.
    let p_plus_raw = 0.5 * (1.0 + first);
    let (p_plus, p_minus) = if p_plus_raw >= 0.5 {
        (p_plus_raw, 1.0 - p_plus_raw)
    } else {
        let p_minus = 0.5 * (1.0 - first);
        (1.0 - p_minus, p_minus)
    };
    Ok(WrongProtection {
        cos_theta_bm: first,
        cos_theta_bm_exact: exact,
        p_plus,
        p_minus,
    })
}

/// Momentum of the wave-packet center in the frame co-moving with it.
pub fn cwp_kick(theta_m: f64, gamma: f64, bi: f64, tau: f64) -> f64 {
    gamma * bi * polar_cos(theta_m) * (0.5 * HBAR) * tau
}
