use std::f64::consts::PI;
use std::sync::Arc;

use super::grid::{overlap, SpinorWave, WaveGrid};
use super::{bound_level_count, solve_levels, Level, Parity, Region, WellGeometry};
use crate::error::{invalid, Result};
use crate::spin::{bloch_to_ket, BlochAngles, C64};

/// Vectors whose norm drops below this after projection are treated as
/// linearly dependent and skipped.
const DEPENDENCE_TOL: f64 = 1e-10;

/// Hard-wall (`V0 → ∞`) spinor eigenstate of level `n`.
///
/// `cos(θ/2)|0⟩√(2/a) sin(k(b+a/2−z))` on the upper well plus
/// `sin(θ/2)e^{iφ}|1⟩√(2/a) sin(k(b+a/2+z))` on the lower well for the
/// symmetric member; the antisymmetric member uses `sin(θ/2)` and
/// `−cos(θ/2)e^{iφ}`. `k = nπ/a`.
pub fn infinite_well_state(n: usize, parity: Parity, geom: &WellGeometry, spin: &BlochAngles, z: f64) -> [C64; 2] {
    let level = Level {
        parity,
        n,
        k: super::infinite_well_k(n, geom),
        q: f64::INFINITY,
        energy: 0.0,
        a_amp: (2.0 / geom.a()).sqrt(),
        b_amp: 0.0,
        residual: 0.0,
    };
    match geom.region(z) {
        Region::Barrier | Region::Outside => [C64::new(0.0, 0.0); 2],
        r => super::eval_in_region(&level, geom, spin, z, r),
    }
}

/// Member of the completeness family, in Gram-Schmidt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMember {
    Sym(usize),
    Antisym(usize),
    /// Above-barrier standing wave `|m⟩√(2/L) cos(lπz/L)`, `L = 2b + a`.
    Prime(usize),
}

/// The `i`-th member (0-based) of `φ_s1, φ_a1, …, φ_sM, φ_aM, φ'_{2M+1}, …`.
pub fn basis_member(i: usize, pairs: usize) -> BasisMember {
    if i < 2 * pairs {
        let n = i / 2 + 1;
        if i % 2 == 0 {
            BasisMember::Sym(n)
        } else {
            BasisMember::Antisym(n)
        }
    } else {
        BasisMember::Prime(2 * pairs + 1 + (i - 2 * pairs))
    }
}

fn raw_members(grid: &Arc<WaveGrid>, geom: &WellGeometry, spin: &BlochAngles, count: usize) -> Result<Vec<SpinorWave>> {
    let pairs = bound_level_count(geom, Parity::Sym)
        .min(bound_level_count(geom, Parity::Antisym))
        .min(count.div_ceil(2));
    let (sym, anti) = if pairs > 0 {
        (
            solve_levels(geom, Parity::Sym, pairs)?,
            solve_levels(geom, Parity::Antisym, pairs)?,
        )
    } else {
        (Vec::new(), Vec::new())
    };
    let m = bloch_to_ket(spin);
    let len = 2.0 * geom.b() + geom.a();
    let amp = (2.0 / len).sqrt();
    Ok((0..count)
        .map(|i| match basis_member(i, pairs) {
            BasisMember::Sym(n) => SpinorWave::eigenstate(grid, &sym[n - 1], geom, spin),
            BasisMember::Antisym(n) => SpinorWave::eigenstate(grid, &anti[n - 1], geom, spin),
            BasisMember::Prime(l) => SpinorWave::from_fn(grid, |z, _| {
                let f = amp * (l as f64 * PI * z / len).cos();
                [m.c0() * f, m.c1() * f]
            }),
        })
        .collect())
}

/// Modified Gram-Schmidt, applied twice per vector, over the first `count`
/// family members. Dependent members are dropped.
pub fn orthonormal_basis(
    grid: &Arc<WaveGrid>,
    geom: &WellGeometry,
    spin: &BlochAngles,
    count: usize,
) -> Result<Vec<SpinorWave>> {
    let mut basis: Vec<SpinorWave> = Vec::with_capacity(count);
    for mut v in raw_members(grid, geom, spin, count)? {
        let start = v.norm();
        for _ in 0..2 {
            for e in &basis {
                let c = overlap(e, &v)?;
                v.sub_scaled(c, e)?;
            }
        }
        let n = v.norm();
        if n > DEPENDENCE_TOL * start.max(1.0) {
            v.scale(C64::new(1.0 / n, 0.0));
            basis.push(v);
        }
    }
    Ok(basis)
}

/// Residual norm of projecting `test` onto the first `1..=count` members.
///
/// Entry `N − 1` is `‖test − P_N test‖`. Projections are nested, so the curve
/// is non-increasing up to rounding.
pub fn completeness_curve(test: &SpinorWave, geom: &WellGeometry, spin: &BlochAngles, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid("N", "need at least one basis member"));
    }
    let basis = orthonormal_basis(test.grid(), geom, spin, count)?;
    let mut r = test.clone();
    let mut curve = Vec::with_capacity(count);
    for e in &basis {
        for _ in 0..2 {
            let c = overlap(e, &r)?;
            r.sub_scaled(c, e)?;
        }
        curve.push(r.norm());
    }
    // Members dropped as dependent leave the residual unchanged.
    while curve.len() < count {
        curve.push(*curve.last().unwrap_or(&test.norm()));
    }
    Ok(curve)
}

pub fn completeness_residual(test: &SpinorWave, geom: &WellGeometry, spin: &BlochAngles, count: usize) -> Result<f64> {
    Ok(*completeness_curve(test, geom, spin, count)?.last().expect("count >= 1"))
}

/// Spin-up Gaussian of width `a/10` centered in the upper well, normalized on
/// the grid.
pub fn gaussian_test_wave(grid: &Arc<WaveGrid>, geom: &WellGeometry) -> SpinorWave {
    let sigma = 0.1 * geom.a();
    let center = geom.b();
    let mut w = SpinorWave::from_fn(grid, |z, r| {
        let v = if r == Region::UpperWell {
            (-0.5 * ((z - center) / sigma).powi(2)).exp()
        } else {
            0.0
        };
        [C64::new(v, 0.0), C64::new(0.0, 0.0)]
    });
    let n = w.norm();
    w.scale(C64::new(1.0 / n, 0.0));
    w
}
