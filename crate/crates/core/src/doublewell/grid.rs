use std::sync::Arc;

use super::{eval_in_region, Level, Region, WellGeometry};
use crate::error::{invalid, Error, Result};
use crate::quadrature::simpson_weights;
use crate::spin::{BlochAngles, C64};

pub const DEFAULT_GRID_POINTS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    h: f64,
    n: usize,
    region: Region,
}

/// Sampling grid over `[−(b + a/2), b + a/2]` made of three Simpson panels:
/// lower well, barrier, upper well.
///
/// The join nodes `±c` appear twice, once per side, so functions that jump
/// across a join are sampled on both sides and each panel integrates a smooth
/// function.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveGrid {
    segments: [Segment; 3],
    z: Vec<f64>,
    w: Vec<f64>,
    region: Vec<Region>,
}

fn odd_at_least(n: f64) -> usize {
    let n = (n.round() as usize).max(3);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

impl WaveGrid {
    /// Splits about `npts` nodes over the three panels in proportion to
    /// their lengths.
    pub fn new(geom: &WellGeometry, npts: usize) -> Result<Arc<Self>> {
        if npts < 9 {
            return Err(invalid("npts", format!("need at least 9 grid points, got {npts}")));
        }
        let a = geom.a();
        let c = geom.c();
        let outer = geom.outer();
        let total = 2.0 * a + 2.0 * c;
        let n_well = odd_at_least(npts as f64 * a / total);
        let n_bar = odd_at_least(npts as f64 * 2.0 * c / total);
        let seg = |start: f64, len: f64, n: usize, region| Segment {
            start,
            h: len / (n - 1) as f64,
            n,
            region,
        };
        let segments = [
            seg(-outer, a, n_well, Region::LowerWell),
            seg(-c, 2.0 * c, n_bar, Region::Barrier),
            seg(c, a, n_well, Region::UpperWell),
        ];
        let mut z = Vec::with_capacity(2 * n_well + n_bar);
        let mut w = Vec::with_capacity(z.capacity());
        let mut region = Vec::with_capacity(z.capacity());
        for s in &segments {
            let end = s.start + s.h * (s.n - 1) as f64;
            for i in 0..s.n {
                // Pin the last node to the exact panel end.
                z.push(if i + 1 == s.n { end } else { s.start + s.h * i as f64 });
                region.push(s.region);
            }
            w.extend(simpson_weights(s.n, s.h));
        }
        Ok(Arc::new(Self { segments, z, w, region }))
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.z
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Quadrature of a real function sampled region-aware.
    pub fn integrate<F: Fn(f64, Region) -> f64>(&self, f: F) -> f64 {
        self.z
            .iter()
            .zip(&self.w)
            .zip(&self.region)
            .map(|((&z, &w), &r)| w * f(z, r))
            .sum()
    }
}

/// Two-component wavefunction sampled on a [`WaveGrid`].
#[derive(Debug, Clone)]
pub struct SpinorWave {
    grid: Arc<WaveGrid>,
    up: Vec<C64>,
    down: Vec<C64>,
}

impl SpinorWave {
    pub fn from_fn<F: Fn(f64, Region) -> [C64; 2]>(grid: &Arc<WaveGrid>, f: F) -> Self {
        let mut up = Vec::with_capacity(grid.len());
        let mut down = Vec::with_capacity(grid.len());
        for (&z, &r) in grid.z.iter().zip(&grid.region) {
            let [u, d] = f(z, r);
            up.push(u);
            down.push(d);
        }
        Self {
            grid: Arc::clone(grid),
            up,
            down,
        }
    }

    /// Samples the spinor eigenstate of a level.
    pub fn eigenstate(grid: &Arc<WaveGrid>, level: &Level, geom: &WellGeometry, spin: &BlochAngles) -> Self {
        Self::from_fn(grid, |z, r| eval_in_region(level, geom, spin, z, r))
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.grid
    }

    pub fn up(&self) -> &[C64] {
        &self.up
    }

    pub fn down(&self) -> &[C64] {
        &self.down
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid
            .w
            .iter()
            .zip(self.up.iter().zip(&self.down))
            .map(|(w, (u, d))| w * (u.norm_sqr() + d.norm_sqr()))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, s: C64) {
        for v in self.up.iter_mut().chain(self.down.iter_mut()) {
            *v *= s;
        }
    }

    /// `self ← self − s·other` on a shared grid.
    pub fn sub_scaled(&mut self, s: C64, other: &Self) -> Result<()> {
        same_grid(self, other)?;
        for (a, b) in self.up.iter_mut().zip(&other.up) {
            *a -= s * b;
        }
        for (a, b) in self.down.iter_mut().zip(&other.down) {
            *a -= s * b;
        }
        Ok(())
    }
}

fn same_grid(u: &SpinorWave, v: &SpinorWave) -> Result<()> {
    if Arc::ptr_eq(&u.grid, &v.grid) || *u.grid == *v.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `⟨u|v⟩ = Σ_σ ∫ conj(u_σ) v_σ dz` by composite Simpson.
pub fn overlap(u: &SpinorWave, v: &SpinorWave) -> Result<C64> {
    same_grid(u, v)?;
    let w = &u.grid.w;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..w.len() {
        acc += w[i] * (u.up[i].conj() * v.up[i] + u.down[i].conj() * v.down[i]);
    }
    Ok(acc)
}
