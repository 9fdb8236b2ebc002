//! Grid propagation of the time-dependent Schrödinger equation.
//!
//! The box `[zmin, zmax]` has Dirichlet walls. Each step is Crank-Nicolson,
//! `(1 + iHdt/2ħ)ψ' = (1 − iHdt/2ħ)ψ`, with the three-point Laplacian and
//! cell-averaged potentials sampled at mid-step. The scheme is unitary and a
//! function of the discrete `H`, so discrete eigenstates are exactly
//! stationary. The two spin components evolve independently under
//! spin-diagonal potentials.

mod checks;
mod oracle;
mod potential;

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin::C64;
use crate::{HBAR, MASS};

pub use checks::*;
pub use oracle::*;
pub use potential::*;

/// Largest accepted phase `dt·(V_max − V_min)/ħ` per step.
pub const MAX_POTENTIAL_PHASE: f64 = PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    zmin: f64,
    zmax: f64,
    npts: usize,
    dt: f64,
}

impl Grid1D {
    /// `npts` intervals; the `npts − 1` interior nodes carry the field.
    pub fn new(zmin: f64, zmax: f64, npts: usize, dt: f64) -> Result<Self> {
        if !(zmax > zmin) || !zmin.is_finite() || !zmax.is_finite() {
            return Err(invalid("grid", format!("need zmin < zmax, got [{zmin}, {zmax}]")));
        }
        if npts < 1024 || !npts.is_power_of_two() {
            return Err(invalid("npts", format!("must be a power of two >= 1024, got {npts}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(Self { zmin, zmax, npts, dt })
    }

    pub fn zmin(&self) -> f64 {
        self.zmin
    }

    pub fn zmax(&self) -> f64 {
        self.zmax
    }

    pub fn npts(&self) -> usize {
        self.npts
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn length(&self) -> f64 {
        self.zmax - self.zmin
    }

    pub fn dz(&self) -> f64 {
        self.length() / self.npts as f64
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.npts - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        self.zmin + self.dz() * (j + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.node(j)).collect()
    }

    /// Eigenvalue of the discrete kinetic operator on box mode `m ≥ 1`.
    pub fn mode_energy(&self, m: usize) -> f64 {
        let h = self.dz();
        HBAR * HBAR / (MASS * h * h) * (1.0 - (PI * m as f64 / self.npts as f64).cos())
    }

    pub fn with_dt(self, dt: f64) -> Result<Self> {
        Self::new(self.zmin, self.zmax, self.npts, dt)
    }

    /// Same box with twice the intervals and half the step.
    pub fn refined(self) -> Result<Self> {
        Self::new(self.zmin, self.zmax, 2 * self.npts, 0.5 * self.dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: Grid1D,
    pub up: Vec<C64>,
    pub down: Vec<C64>,
}

impl SpinorField {
    pub fn from_fn<F: Fn(f64) -> [C64; 2]>(grid: Grid1D, f: F) -> Self {
        let (up, down) = (0..grid.len()).map(|j| f(grid.node(j))).map(|[u, d]| (u, d)).unzip();
        Self { grid, up, down }
    }

    /// Real profile times a constant spinor.
    pub fn from_profile<F: Fn(f64) -> f64>(grid: Grid1D, spinor: [C64; 2], f: F) -> Self {
        Self::from_fn(grid, |z| {
            let v = f(z);
            [spinor[0] * v, spinor[1] * v]
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn component_norms(&self) -> [f64; 2] {
        let h = self.grid.dz();
        [
            h * self.up.iter().map(|v| v.norm_sqr()).sum::<f64>(),
            h * self.down.iter().map(|v| v.norm_sqr()).sum::<f64>(),
        ]
    }

    pub fn norm_sqr(&self) -> f64 {
        let [u, d] = self.component_norms();
        u + d
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) {
            return Err(invalid("field", "cannot normalize a zero field"));
        }
        for v in self.up.iter_mut().chain(self.down.iter_mut()) {
            *v /= n;
        }
        Ok(())
    }

    pub fn overlap(&self, other: &Self) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let h = self.grid.dz();
        let s: C64 = self
            .up
            .iter()
            .zip(&other.up)
            .chain(self.down.iter().zip(&other.down))
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * h)
    }

    /// `Σ_σ ∫ |ψ_σ|² g(z) dz`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let h = self.grid.dz();
        (0..self.grid.len())
            .map(|j| g(self.grid.node(j)) * (self.up[j].norm_sqr() + self.down[j].norm_sqr()))
            .sum::<f64>()
            * h
    }

    /// Per-component `∫ |ψ_σ|² z dz`, unnormalized.
    pub fn component_positions(&self) -> [f64; 2] {
        let h = self.grid.dz();
        let mut out = [0.0; 2];
        for j in 0..self.grid.len() {
            let z = self.grid.node(j);
            out[0] += z * self.up[j].norm_sqr();
            out[1] += z * self.down[j].norm_sqr();
        }
        [out[0] * h, out[1] * h]
    }
}

/// Spectral derivative through an FFT of the odd extension.
struct Spectral {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    buf: Vec<C64>,
    scratch: Vec<C64>,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * n);
        let ifft = planner.plan_fft_inverse(2 * n);
        let len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        Self {
            n,
            fft,
            ifft,
            buf: vec![C64::new(0.0, 0.0); 2 * n],
            scratch: vec![C64::new(0.0, 0.0); len],
        }
    }

    fn derivative(&mut self, x: &[C64], h: f64, out: &mut [C64]) {
        let n = self.n;
        self.buf[0] = C64::new(0.0, 0.0);
        self.buf[n] = C64::new(0.0, 0.0);
        for (j, &v) in x.iter().enumerate() {
            self.buf[j + 1] = v;
            self.buf[2 * n - j - 1] = -v;
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let span = 2.0 * n as f64 * h;
        for m in 0..2 * n {
            let freq = match m.cmp(&n) {
                std::cmp::Ordering::Less => m as f64,
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => m as f64 - 2.0 * n as f64,
            };
            self.buf[m] *= C64::new(0.0, TAU * freq / span);
        }
        self.ifft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / (2 * n) as f64;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.buf[j + 1] * scale;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub steps: usize,
    pub dt: f64,
    pub norm_before: f64,
    pub norm_after: f64,
}

impl PropagationStats {
    pub fn norm_drift(&self) -> f64 {
        (self.norm_after - self.norm_before).abs()
    }
}

/// Factored Crank-Nicolson step for one spin component.
#[derive(Debug, Clone, Default)]
struct CnFactors {
    /// Diagonal of `1 − iHdt/2ħ`.
    rhs_diag: Vec<C64>,
    /// Off-diagonal of `1 + iHdt/2ħ`; the right-hand side uses its negative.
    off: C64,
    /// Thomas sweep coefficients.
    upper: Vec<C64>,
    inv_pivot: Vec<C64>,
}

impl CnFactors {
    fn build(&mut self, v: &[f64], h: f64, dt: f64) {
        let n = v.len();
        let e = -HBAR * HBAR / (2.0 * MASS * h * h);
        let w = C64::new(0.0, 0.5 * dt / HBAR);
        self.off = w * e;
        self.rhs_diag.resize(n, C64::new(0.0, 0.0));
        self.upper.resize(n, C64::new(0.0, 0.0));
        self.inv_pivot.resize(n, C64::new(0.0, 0.0));
        let mut prev_upper = C64::new(0.0, 0.0);
        for j in 0..n {
            let hd = v[j] - 2.0 * e;
            let diag = C64::new(1.0, 0.0) + w * hd;
            self.rhs_diag[j] = C64::new(1.0, 0.0) - w * hd;
            let pivot = diag - self.off * prev_upper;
            let inv = pivot.inv();
            self.inv_pivot[j] = inv;
            self.upper[j] = self.off * inv;
            prev_upper = self.upper[j];
        }
    }

    fn step(&self, psi: &mut [C64], work: &mut Vec<C64>) {
        let n = psi.len();
        work.resize(n, C64::new(0.0, 0.0));
        let zero = C64::new(0.0, 0.0);
        let mut prev = zero;
        for j in 0..n {
            let left = if j > 0 { psi[j - 1] } else { zero };
            let right = if j + 1 < n { psi[j + 1] } else { zero };
            let rhs = self.rhs_diag[j] * psi[j] - self.off * (left + right);
            prev = (rhs - self.off * prev) * self.inv_pivot[j];
            work[j] = prev;
        }
        let mut next = zero;
        for j in (0..n).rev() {
            next = work[j] - self.upper[j] * next;
            psi[j] = next;
        }
    }
}

pub struct Propagator {
    grid: Grid1D,
    spectral: Spectral,
    factors: [CnFactors; 2],
    cells: [Vec<f64>; 2],
    work: Vec<C64>,
}

impl Propagator {
    pub fn new(grid: Grid1D) -> Self {
        Self {
            grid,
            spectral: Spectral::new(grid.npts()),
            factors: [CnFactors::default(), CnFactors::default()],
            cells: [vec![0.0; grid.len()], vec![0.0; grid.len()]],
            work: Vec::with_capacity(grid.len()),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn prepare_potential<P: Potential + ?Sized>(&mut self, pot: &P, t: f64, dt: f64) -> Result<()> {
        let h = self.grid.dz();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..self.grid.len() {
            let v = pot.cell_values(t, self.grid.node(j), h);
            for (s, &vs) in v.iter().enumerate() {
                if !vs.is_finite() {
                    return Err(Error::Stability(format!("non-finite potential at z = {}", self.grid.node(j))));
                }
                lo = lo.min(vs);
                hi = hi.max(vs);
                self.cells[s][j] = vs;
            }
        }
        if dt * (hi - lo) / HBAR >= MAX_POTENTIAL_PHASE {
            return Err(Error::Stability(format!(
                "dt*(Vmax - Vmin) = {:.3e} exceeds {:.3e}; reduce dt",
                dt * (hi - lo) / HBAR,
                MAX_POTENTIAL_PHASE
            )));
        }
        for s in 0..2 {
            self.factors[s].build(&self.cells[s], h, dt);
        }
        Ok(())
    }

    pub fn propagate<P: Potential + ?Sized>(
        &mut self,
        field: &mut SpinorField,
        pot: &P,
        t0: f64,
        duration: f64,
    ) -> Result<PropagationStats> {
        self.propagate_observed(field, pot, t0, duration, 0, |_, _| {})
    }

    /// Propagates over `duration` with steps no longer than the grid `dt`,
    /// calling `observe(t, field)` at the start, every `every` steps and at
    /// the end (`every = 0` disables intermediate calls).
    pub fn propagate_observed<P, F>(
        &mut self,
        field: &mut SpinorField,
        pot: &P,
        t0: f64,
        duration: f64,
        every: usize,
        mut observe: F,
    ) -> Result<PropagationStats>
    where
        P: Potential + ?Sized,
        F: FnMut(f64, &SpinorField),
    {
        if *field.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(invalid("duration", format!("must be finite and nonnegative, got {duration}")));
        }
        let steps = (duration / self.grid.dt() - 1e-9).ceil().max(0.0) as usize;
        let dt = if steps > 0 { duration / steps as f64 } else { 0.0 };
        let norm_before = field.norm_sqr();
        let active = field.component_norms().map(|n| n > 0.0);
        observe(t0, field);
        if steps > 0 {
            let static_pot = !pot.time_dependent();
            if static_pot {
                self.prepare_potential(pot, t0 + 0.5 * dt, dt)?;
            }
            for step in 0..steps {
                let t = t0 + step as f64 * dt;
                if !static_pot {
                    self.prepare_potential(pot, t + 0.5 * dt, dt)?;
                }
                for (s, psi) in [&mut field.up, &mut field.down].into_iter().enumerate() {
                    if active[s] {
                        self.factors[s].step(psi, &mut self.work);
                    }
                }
                if every > 0 && (step + 1) % every == 0 && step + 1 < steps {
                    observe(t + dt, field);
                }
            }
            observe(t0 + duration, field);
        }
        Ok(PropagationStats {
            steps,
            dt,
            norm_before,
            norm_after: field.norm_sqr(),
        })
    }

    /// Per-component `∫ ψ_σ* (−iħ ∂_z) ψ_σ dz`, unnormalized.
    pub fn component_momenta(&mut self, field: &SpinorField) -> [f64; 2] {
        let h = self.grid.dz();
        let mut d = vec![C64::new(0.0, 0.0); self.grid.len()];
        let mut out = [0.0; 2];
        for (s, psi) in [&field.up, &field.down].into_iter().enumerate() {
            self.spectral.derivative(psi, h, &mut d);
            let acc: C64 = psi.iter().zip(&d).map(|(a, b)| a.conj() * b).sum();
            out[s] = (C64::new(0.0, -HBAR) * acc * h).re;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 1000, 1e-3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 512, 1e-3).is_err());
        assert!(Grid1D::new(1.0, 0.0, 1024, 1e-3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1024, 0.0).is_err());
        let g = Grid1D::new(-1.0, 1.0, 1024, 1e-3).unwrap();
        assert_eq!(g.len(), 1023);
        assert_eq!(g.node(511), 0.0);
        assert_eq!(g.refined().unwrap().npts(), 2048);
    }

    #[test]
    fn spectral_derivative_of_a_sine() {
        let g = Grid1D::new(0.0, 2.0, 1024, 1e-3).unwrap();
        let mut s = Spectral::new(g.npts());
        let k = PI * 5.0 / 2.0;
        let x: Vec<C64> = g.nodes().iter().map(|&z| C64::new((k * z).sin(), 0.0)).collect();
        let mut d = vec![C64::new(0.0, 0.0); x.len()];
        s.derivative(&x, g.dz(), &mut d);
        for (z, v) in g.nodes().iter().zip(&d) {
            assert!((v.re - k * (k * z).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn box_mode_is_stationary() {
        let g = Grid1D::new(0.0, 2.0, 1024, 1e-2).unwrap();
        let mode = |z: f64| (PI * 3.0 * z / 2.0).sin();
        let mut f = SpinorField::from_profile(g, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)], mode);
        f.normalize().unwrap();
        let start = f.clone();
        let mut p = Propagator::new(g);
        let stats = p.propagate(&mut f, &FreeSpace, 0.0, 1.0).unwrap();
        let ov = start.overlap(&f).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
        let e = g.mode_energy(3);
        let per_step = -2.0 * (0.5 * e * stats.dt).atan();
        let expected = C64::from_polar(1.0, per_step * stats.steps as f64);
        assert!((ov - expected).norm() < 1e-10);
    }
}
