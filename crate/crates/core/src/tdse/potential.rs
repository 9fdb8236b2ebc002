use serde::{Deserialize, Serialize};

use crate::doublewell::WellGeometry;
use crate::error::{invalid, Result};
use crate::stern_gerlach::FieldPulse;
use crate::HBAR;

/// Spin-diagonal potential `(V↑, V↓)`.
pub trait Potential: Sync {
    fn values(&self, t: f64, z: f64) -> [f64; 2];

    /// Average over the cell `[z − dz/2, z + dz/2]`. Potentials with jumps or
    /// sharp peaks override this so the grid sees the right integral.
    fn cell_values(&self, t: f64, z: f64, dz: f64) -> [f64; 2] {
        let _ = dz;
        self.values(t, z)
    }

    fn time_dependent(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpace;

impl Potential for FreeSpace {
    fn values(&self, _: f64, _: f64) -> [f64; 2] {
        [0.0; 2]
    }
}

/// Length of `[lo, hi] ∩ [−c, c]`.
fn barrier_overlap(lo: f64, hi: f64, c: f64) -> f64 {
    (hi.min(c) - lo.max(-c)).max(0.0)
}

/// Barrier of height `v0` on `|z| < c`; the box walls bound the wells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub c: f64,
    pub v0: f64,
}

impl Barrier {
    pub fn of(geom: &WellGeometry) -> Self {
        Self { c: geom.c(), v0: geom.v0() }
    }

    fn cell(&self, v0: f64, z: f64, dz: f64) -> f64 {
        v0 * barrier_overlap(z - 0.5 * dz, z + 0.5 * dz, self.c) / dz
    }
}

impl Potential for Barrier {
    fn values(&self, _: f64, z: f64) -> [f64; 2] {
        let v = if z.abs() < self.c { self.v0 } else { 0.0 };
        [v; 2]
    }

    fn cell_values(&self, _: f64, z: f64, dz: f64) -> [f64; 2] {
        [self.cell(self.v0, z, dz); 2]
    }
}

/// Barrier height as a piecewise-linear function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub c: f64,
    /// `(t, V)` knots with strictly increasing `t`.
    knots: Vec<(f64, f64)>,
}

impl RampSchedule {
    pub fn new(c: f64, knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("schedule", "need at least one knot"));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(invalid("schedule", "knot times must increase strictly"));
        }
        if knots.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(invalid("schedule", "knots must be finite"));
        }
        Ok(Self { c, knots })
    }

    /// Linear rise from no barrier to `geom` over `duration`.
    pub fn linear(geom: &WellGeometry, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(invalid("duration", "must be positive"));
        }
        Self::new(geom.c(), vec![(0.0, 0.0), (duration, geom.v0())])
    }

    pub fn duration(&self) -> f64 {
        self.knots.last().unwrap().0 - self.knots[0].0
    }

    pub fn height(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }

    pub fn initial(&self) -> Barrier {
        Barrier { c: self.c, v0: self.knots[0].1 }
    }

    pub fn final_barrier(&self) -> Barrier {
        Barrier {
            c: self.c,
            v0: self.knots[self.knots.len() - 1].1,
        }
    }
}

impl Potential for RampSchedule {
    fn values(&self, t: f64, z: f64) -> [f64; 2] {
        Barrier { c: self.c, v0: self.height(t) }.values(t, z)
    }

    fn cell_values(&self, t: f64, z: f64, dz: f64) -> [f64; 2] {
        Barrier { c: self.c, v0: self.height(t) }.cell_values(t, z, dz)
    }

    fn time_dependent(&self) -> bool {
        self.knots.len() > 1
    }
}

/// Stern-Gerlach gradient `V↑,↓ = ∓γ·Bi·(ħ/2)·z`, switched on for `0 ≤ t < τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPulse {
    pub force: f64,
    pub tau: f64,
}

impl GradientPulse {
    pub fn of(pulse: &FieldPulse) -> Self {
        Self {
            force: pulse.gamma * pulse.bi * 0.5 * HBAR,
            tau: pulse.tau,
        }
    }
}

impl Potential for GradientPulse {
    fn values(&self, t: f64, z: f64) -> [f64; 2] {
        if (0.0..self.tau).contains(&t) {
            [-self.force * z, self.force * z]
        } else {
            [0.0; 2]
        }
    }

    fn time_dependent(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub omega: f64,
    pub center: f64,
}

impl Potential for Harmonic {
    fn values(&self, _: f64, z: f64) -> [f64; 2] {
        let d = z - self.center;
        [0.5 * crate::MASS * self.omega * self.omega * d * d; 2]
    }

    fn cell_values(&self, _: f64, z: f64, dz: f64) -> [f64; 2] {
        let d = z - self.center;
        [0.5 * crate::MASS * self.omega * self.omega * (d * d + dz * dz / 12.0); 2]
    }
}

/// Softened Coulomb kernel `1/√((z − za)² + s²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftCoulomb {
    pub za: f64,
    pub softening: f64,
}

impl SoftCoulomb {
    pub fn at(&self, z: f64) -> f64 {
        1.0 / ((z - self.za).powi(2) + self.softening * self.softening).sqrt()
    }

    /// Exact cell average via `asinh`.
    pub fn cell(&self, z: f64, dz: f64) -> f64 {
        let s = self.softening;
        let lo = (z - 0.5 * dz - self.za) / s;
        let hi = (z + 0.5 * dz - self.za) / s;
        (hi.asinh() - lo.asinh()) / dz
    }
}

/// Double-well barrier plus the probe coupling `λ·κ(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtectedCoupling {
    pub barrier: Barrier,
    pub coupling: f64,
    pub kernel: SoftCoulomb,
}

impl Potential for ProtectedCoupling {
    fn values(&self, t: f64, z: f64) -> [f64; 2] {
        let [v, _] = self.barrier.values(t, z);
        [v + self.coupling * self.kernel.at(z); 2]
    }

    fn cell_values(&self, t: f64, z: f64, dz: f64) -> [f64; 2] {
        let [v, _] = self.barrier.cell_values(t, z, dz);
        [v + self.coupling * self.kernel.cell(z, dz); 2]
    }
}
