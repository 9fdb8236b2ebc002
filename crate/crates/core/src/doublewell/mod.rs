//! Finite symmetric double well.
//!
//! Two wells of width `a` centered at `±b`, hard walls at `±(b + a/2)` and a
//! barrier of height `V0` on `|z| < c = b − a/2`. Bound states below `V0`
//! have wavenumber `k` inside the wells and decay constant
//! `q = √(α² − k²)` with `α = √(2 V0)` in the barrier. Even and odd spatial
//! profiles satisfy
//!
//! ```text
//! symmetric:      tan(ka) + (k/q)·coth(qc) = 0
//! antisymmetric:  tan(ka) + (k/q)·tanh(qc) = 0
//! ```
//!
//! with exactly one root in each branch `ka ∈ ((n − ½)π, nπ)` that lies below
//! `α`.

mod basis;
mod grid;
mod roots;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin::{BlochAngles, C64};

pub use basis::{
    basis_member, completeness_curve, completeness_residual, gaussian_test_wave, infinite_well_state,
    orthonormal_basis, BasisMember,
};
pub use grid::{overlap, SpinorWave, WaveGrid, DEFAULT_GRID_POINTS};
pub use roots::{bound_level_count, solve_levels, tunneling_gap, level_gap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry")]
pub struct WellGeometry {
    a: f64,
    b: f64,
    v0: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    a: f64,
    b: f64,
    v0: f64,
}

impl TryFrom<RawGeometry> for WellGeometry {
    type Error = crate::Error;

    fn try_from(r: RawGeometry) -> Result<Self> {
        Self::new(r.a, r.b, r.v0)
    }
}

impl WellGeometry {
    /// `v0` may be `f64::INFINITY` for the hard-wall limit.
    pub fn new(a: f64, b: f64, v0: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid("a", format!("well width must be positive, got {a}")));
        }
        if !(b.is_finite() && b - 0.5 * a > 0.0) {
            return Err(invalid("b", format!("need b > a/2 for a nonempty barrier, got b = {b}, a = {a}")));
        }
        if v0.is_nan() || v0 <= 0.0 {
            return Err(invalid("V0", format!("barrier height must be positive, got {v0}")));
        }
        Ok(Self { a, b, v0 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Barrier half-width `b − a/2`.
    pub fn c(&self) -> f64 {
        self.b - 0.5 * self.a
    }

    /// Outer wall position `b + a/2`.
    pub fn outer(&self) -> f64 {
        self.b + 0.5 * self.a
    }

    pub fn alpha(&self) -> f64 {
        barrier_alpha(self)
    }

    pub fn with_v0(&self, v0: f64) -> Result<Self> {
        Self::new(self.a, self.b, v0)
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        Self::new(self.a, b, self.v0)
    }

    pub fn region(&self, z: f64) -> Region {
        let az = z.abs();
        if az > self.outer() {
            Region::Outside
        } else if z >= self.c() {
            Region::UpperWell
        } else if z <= -self.c() {
            Region::LowerWell
        } else {
            Region::Barrier
        }
    }
}

/// Spatial region of the double well. Joins belong to the wells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    LowerWell,
    Barrier,
    UpperWell,
    Outside,
}

/// `α = √(2 M V0)/ħ`; infinite for the hard-wall sentinel.
pub fn barrier_alpha(geom: &WellGeometry) -> f64 {
    (2.0 * crate::MASS * geom.v0).sqrt() / crate::HBAR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Sym,
    Antisym,
}

impl Parity {
    pub fn label(&self) -> &'static str {
        match self {
            Parity::Sym => "sym",
            Parity::Antisym => "antisym",
        }
    }
}

/// A solved bound level.
///
/// `a_amp` and `b_amp` normalize the spinor eigenstate:
/// `A²·W + B²·∫_barrier (cosh|sinh)²(qz) dz = 1`, where `W` is the squared
/// norm of `sin(k(b + a/2 − z))` over one well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub parity: Parity,
    pub n: usize,
    pub k: f64,
    pub q: f64,
    pub energy: f64,
    pub a_amp: f64,
    pub b_amp: f64,
    pub residual: f64,
}

fn check_window(k: f64, geom: &WellGeometry) -> Result<(f64, f64)> {
    let alpha = geom.alpha();
    if !(k > 0.0 && k < alpha) {
        return Err(Error::OutsideBoundWindow { k, alpha });
    }
    let q = ((alpha - k) * (alpha + k)).sqrt();
    Ok((q, q * geom.c()))
}

/// `tan(ka) + (k/q)·coth(qc)`; zero at even-parity levels.
pub fn sym_residual(k: f64, geom: &WellGeometry) -> Result<f64> {
    let (q, x) = check_window(k, geom)?;
    Ok((k * geom.a).tan() + k / (q * x.tanh()))
}

/// `tan(ka) + (k/q)·tanh(qc)`; zero at odd-parity levels.
pub fn antisym_residual(k: f64, geom: &WellGeometry) -> Result<f64> {
    let (q, x) = check_window(k, geom)?;
    Ok((k * geom.a).tan() + k / q * x.tanh())
}

pub fn residual(parity: Parity, k: f64, geom: &WellGeometry) -> Result<f64> {
    match parity {
        Parity::Sym => sym_residual(k, geom),
        Parity::Antisym => antisym_residual(k, geom),
    }
}

/// `(c + sinh(2qc)/(2q)) / cosh²(qc)` without overflow.
fn sym_barrier_weight(q: f64, c: f64) -> f64 {
    let x = q * c;
    let sech = 1.0 / x.cosh();
    c * sech * sech + x.tanh() / q
}

/// `(sinh(2qc)/(2q) − c) / sinh²(qc)` without overflow or cancellation.
fn antisym_barrier_weight(q: f64, c: f64) -> f64 {
    let x = q * c;
    if x < 1e-2 {
        let x2 = x * x;
        c * (2.0 / 3.0 - 4.0 * x2 / 45.0)
    } else {
        let csch = 1.0 / x.sinh();
        1.0 / (q * x.tanh()) - c * csch * csch
    }
}

/// `∫ sin²(k(b + a/2 − z)) dz` over one well.
pub(crate) fn well_weight(k: f64, a: f64) -> f64 {
    0.5 * a - (2.0 * k * a).sin() / (4.0 * k)
}

/// Fills `a_amp`, `b_amp` so the spinor state has unit norm and the spatial
/// profile is continuous at `z = ±c`. The result does not depend on spin.
pub fn normalize_level(level: &Level, geom: &WellGeometry) -> Level {
    let a = geom.a;
    let c = geom.c();
    let k = level.k;
    let q = level.q;
    let s = (k * a).sin();
    let ratio = match level.parity {
        Parity::Sym => sym_barrier_weight(q, c),
        Parity::Antisym => antisym_barrier_weight(q, c),
    };
    let w = well_weight(k, a);
    let a_amp = 1.0 / (w + s * s * ratio).sqrt();
    let edge = (q * c).min(700.0);
    let b_amp = match level.parity {
        Parity::Sym => a_amp * s / edge.cosh(),
        Parity::Antisym => a_amp * s / edge.sinh(),
    };
    Level {
        a_amp,
        b_amp: if q * c > 700.0 { 0.0 } else { b_amp },
        ..*level
    }
}

/// `cosh(qz)/cosh(qc)` for `|z| ≤ c`, safe for large `qc`.
pub(crate) fn cosh_ratio(q: f64, z: f64, c: f64) -> f64 {
    let x = q * c;
    if x < 20.0 {
        (q * z).cosh() / x.cosh()
    } else {
        let y = q * z.abs();
        (y - x).exp() * (1.0 + (-2.0 * y).exp()) / (1.0 + (-2.0 * x).exp())
    }
}

/// `sinh(qz)/sinh(qc)` for `|z| ≤ c`, safe for large `qc`.
pub(crate) fn sinh_ratio(q: f64, z: f64, c: f64) -> f64 {
    let x = q * c;
    if x < 20.0 {
        (q * z).sinh() / x.sinh()
    } else {
        let y = q * z.abs();
        z.signum() * (y - x).exp() * (1.0 - (-2.0 * y).exp()) / (1.0 - (-2.0 * x).exp())
    }
}

/// Barrier shape normalized to 1 at the upper join.
pub(crate) fn barrier_shape(level: &Level, geom: &WellGeometry, z: f64) -> f64 {
    match level.parity {
        Parity::Sym => cosh_ratio(level.q, z, geom.c()),
        Parity::Antisym => sinh_ratio(level.q, z, geom.c()),
    }
}

/// Spinor eigenstate `(ψ↑, ψ↓)` evaluated in an explicit region.
///
/// Symmetric level: `cos(θ/2)|0⟩ A sin(k(b+a/2−z))` in the upper well,
/// `sin(θ/2)e^{iφ}|1⟩ A sin(k(b+a/2+z))` in the lower well and
/// `|m⟩ B cosh(qz)` in the barrier. The antisymmetric level swaps the well
/// weights to `sin(θ/2)`, `−cos(θ/2)e^{iφ}` and carries
/// `(sin(θ/2)|0⟩ + cos(θ/2)e^{iφ}|1⟩) B sinh(qz)` in the barrier.
pub fn eval_in_region(level: &Level, geom: &WellGeometry, spin: &BlochAngles, z: f64, region: Region) -> [C64; 2] {
    let (s, c) = (0.5 * spin.theta()).sin_cos();
    let e = Complex64::from_polar(1.0, spin.phi());
    let (w_up, w_down) = match level.parity {
        Parity::Sym => (C64::new(c, 0.0), e * s),
        Parity::Antisym => (C64::new(s, 0.0), -e * c),
    };
    let outer = geom.outer();
    let zero = C64::new(0.0, 0.0);
    match region {
        Region::UpperWell => {
            let f = level.a_amp * (level.k * (outer - z)).sin();
            [w_up * f, zero]
        }
        Region::LowerWell => {
            let f = level.a_amp * (level.k * (outer + z)).sin();
            [zero, w_down * f]
        }
        Region::Barrier => {
            let f = level.a_amp * (level.k * geom.a).sin() * barrier_shape(level, geom, z);
            match level.parity {
                Parity::Sym => [C64::new(c * f, 0.0), e * (s * f)],
                Parity::Antisym => [C64::new(s * f, 0.0), e * (c * f)],
            }
        }
        Region::Outside => [zero, zero],
    }
}

pub fn eval_eigenstate(level: &Level, geom: &WellGeometry, spin: &BlochAngles, z: f64) -> [C64; 2] {
    eval_in_region(level, geom, spin, z, geom.region(z))
}

/// Spin-independent spatial eigenfunction of the level, normalized on the
/// full line: `A' sin(k(b + a/2 − |z|))` in the wells (odd continuation for
/// the antisymmetric level) joined to `B' cosh(qz)` or `B' sinh(qz)`.
pub fn spatial_profile(level: &Level, geom: &WellGeometry, z: f64) -> f64 {
    let scale = 1.0 / (1.0 + level.a_amp * level.a_amp * well_weight(level.k, geom.a)).sqrt();
    let amp = level.a_amp * scale;
    match geom.region(z) {
        Region::Outside => 0.0,
        Region::UpperWell => amp * (level.k * (geom.outer() - z)).sin(),
        Region::LowerWell => {
            let v = amp * (level.k * (geom.outer() + z)).sin();
            match level.parity {
                Parity::Sym => v,
                Parity::Antisym => -v,
            }
        }
        Region::Barrier => amp * (level.k * geom.a).sin() * barrier_shape(level, geom, z),
    }
}

/// Mismatch at the join `z = c` between the well-side and barrier-side
/// values of `(ψ, ψ')`, using the stored `B`. By symmetry the join at `−c`
/// gives the same numbers.
pub fn join_mismatch(level: &Level, geom: &WellGeometry) -> (f64, f64) {
    let c = geom.c();
    let x = level.q * c;
    let well_val = level.a_amp * (level.k * geom.a).sin();
    let well_der = -level.k * level.a_amp * (level.k * geom.a).cos();
    let (bar_val, bar_der) = match level.parity {
        Parity::Sym => (level.b_amp * x.cosh(), level.b_amp * level.q * x.sinh()),
        Parity::Antisym => (level.b_amp * x.sinh(), level.b_amp * level.q * x.cosh()),
    };
    ((well_val - bar_val).abs(), (well_der - bar_der).abs())
}

/// Hard-wall (`V0 → ∞`) wavenumber of level `n`.
pub fn infinite_well_k(n: usize, geom: &WellGeometry) -> f64 {
    n as f64 * PI / geom.a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> WellGeometry {
        WellGeometry::new(1.0, 1.0, 1250.0).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let g = |v0| WellGeometry::new(1.0, 1.0, v0).unwrap();
        assert_eq!(g(0.5).alpha(), 1.0);
        assert_eq!(g(50.0).alpha(), 10.0);
        assert!(g(f64::INFINITY).alpha().is_infinite());
        assert!(g(2.0).alpha() < g(3.0).alpha());
    }

    #[test]
    fn geometry_validation() {
        assert!(WellGeometry::new(1.0, 0.5, 1.0).is_err());
        assert!(WellGeometry::new(0.0, 1.0, 1.0).is_err());
        assert!(WellGeometry::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn residual_window() {
        let g = demo();
        assert!(sym_residual(50.0, &g).is_err());
        assert!(sym_residual(0.0, &g).is_err());
        // At the demo geometry coth(qc) and tanh(qc) round to the same double.
        assert!(antisym_residual(2.0, &g).unwrap() <= sym_residual(2.0, &g).unwrap());
        let shallow = WellGeometry::new(1.0, 0.6, 20.0).unwrap();
        assert!(antisym_residual(2.0, &shallow).unwrap() < sym_residual(2.0, &shallow).unwrap());
    }

    #[test]
    fn sym_residual_blows_up_at_alpha() {
        let g = WellGeometry::new(1.0, 1.0, 12.5).unwrap();
        let alpha = g.alpha();
        let near = sym_residual(alpha * (1.0 - 1e-10), &g).unwrap();
        assert!(near > 1e3);
    }

    #[test]
    fn barrier_weights_match_direct_forms() {
        let (q, c): (f64, f64) = (3.0, 0.4);
        let x = q * c;
        let direct_s = (c + (2.0 * x).sinh() / (2.0 * q)) / x.cosh().powi(2);
        let direct_a = ((2.0 * x).sinh() / (2.0 * q) - c) / x.sinh().powi(2);
        assert!((sym_barrier_weight(q, c) - direct_s).abs() < 1e-14);
        assert!((antisym_barrier_weight(q, c) - direct_a).abs() < 1e-14);
        let q = 0.02;
        let x: f64 = q * c;
        let direct_a = ((2.0 * x).sinh() / (2.0 * q) - c) / x.sinh().powi(2);
        assert!((antisym_barrier_weight(q, c) - direct_a).abs() < 1e-7);
    }

    #[test]
    fn barrier_ratios_are_overflow_safe() {
        let r = cosh_ratio(2000.0, 0.5, 0.5);
        assert!((r - 1.0).abs() < 1e-15);
        assert!(cosh_ratio(2000.0, 0.0, 0.5) < 1e-300);
        assert!((sinh_ratio(2000.0, -0.5, 0.5) + 1.0).abs() < 1e-15);
        assert!((cosh_ratio(3.0, 0.2, 0.5) - (0.6f64).cosh() / (1.5f64).cosh()).abs() < 1e-15);
    }

    #[test]
    fn eigenstate_pointwise() {
        let g = demo();
        let lv = solve_levels(&g, Parity::Sym, 1).unwrap()[0];
        let spin = BlochAngles::new(0.9, 0.3);
        let wall = eval_eigenstate(&lv, &g, &spin, g.outer());
        assert!(wall[0].norm() < 1e-13 && wall[1].norm() < 1e-13);
        let anti = solve_levels(&g, Parity::Antisym, 1).unwrap()[0];
        let mid = eval_eigenstate(&anti, &g, &spin, 0.0);
        assert!(mid[0].norm() == 0.0 && mid[1].norm() == 0.0);
        let center = eval_eigenstate(&lv, &g, &spin, 0.0);
        let m = crate::spin::bloch_to_ket(&spin);
        assert!((center[0] - m.c0() * lv.b_amp).norm() < 1e-15 * lv.a_amp.max(1.0));
        assert!((center[1] - m.c1() * lv.b_amp).norm() <= 1e-14 * lv.b_amp.abs().max(1e-300));
    }
}
