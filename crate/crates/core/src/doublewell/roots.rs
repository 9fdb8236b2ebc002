use std::f64::consts::PI;

use super::{normalize_level, residual, Level, Parity, WellGeometry};
use crate::error::{invalid, Error, Result};

/// Distance kept from tan asymptotes and from `k = α` when bracketing.
const GUARD: f64 = 1e-9;
/// Bisection stops once the bracket is this narrow (relative to `k`).
const BISECT_TOL: f64 = 1e-12;
/// Below this relative splitting the gap comes from the linearized formula.
const LINEARIZE_BELOW: f64 = 1e-6;

/// Number of bound levels of the given parity.
pub fn bound_level_count(geom: &WellGeometry, parity: Parity) -> usize {
    let alpha = geom.alpha();
    if !alpha.is_finite() {
        return usize::MAX;
    }
    let aa = alpha * geom.a();
    let full = (aa / PI + 0.5).floor();
    if full < 1.0 {
        return 0;
    }
    let n = full as usize;
    // The last branch is cut by k = α. The symmetric residual still diverges
    // to +∞ there, the antisymmetric one tends to tan(αa) + αc.
    let last_cut = aa < n as f64 * PI;
    if parity == Parity::Antisym && last_cut {
        let limit = aa.tan() + alpha * geom.c();
        if limit <= 0.0 {
            return n - 1;
        }
    }
    n
}

fn branch_bracket(geom: &WellGeometry, n: usize) -> (f64, f64) {
    let a = geom.a();
    let alpha = geom.alpha();
    let lo = (n as f64 - 0.5) * PI / a;
    let hi = (n as f64 * PI / a).min(alpha);
    let guard = GUARD * hi.max(1.0);
    (lo + guard, hi - guard)
}

fn solve_branch(geom: &WellGeometry, parity: Parity, n: usize) -> Result<Level> {
    let (mut lo, mut hi) = branch_bracket(geom, n);
    let f = |k: f64| residual(parity, k, geom);
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::NoBracket { branch: n });
    }
    while hi - lo > BISECT_TOL * hi {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let k = secant_polish(&f, lo, hi)?;
    let alpha = geom.alpha();
    let q = ((alpha - k) * (alpha + k)).sqrt();
    let level = Level {
        parity,
        n,
        k,
        q,
        energy: 0.5 * k * k * crate::HBAR * crate::HBAR / crate::MASS,
        a_amp: 0.0,
        b_amp: 0.0,
        residual: f(k)?,
    };
    Ok(normalize_level(&level, geom))
}

/// Secant steps confined to `[lo, hi]`; returns the abscissa with the
/// smallest residual seen.
fn secant_polish<F: Fn(f64) -> Result<f64>>(f: &F, lo: f64, hi: f64) -> Result<f64> {
    let (mut x0, mut x1) = (lo, hi);
    let (mut f0, mut f1) = (f(x0)?, f(x1)?);
    let (mut best, mut fbest) = if f0.abs() < f1.abs() { (x0, f0) } else { (x1, f1) };
    for _ in 0..8 {
        if f1 == f0 || fbest == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 >= lo && x2 <= hi) {
            break;
        }
        let f2 = f(x2)?;
        if f2.abs() < fbest.abs() {
            best = x2;
            fbest = f2;
        }
        (x0, f0, x1, f1) = (x1, f1, x2, f2);
    }
    Ok(best)
}

/// Solves the first `count` levels of one parity, ordered by `k`.
pub fn solve_levels(geom: &WellGeometry, parity: Parity, count: usize) -> Result<Vec<Level>> {
    if count == 0 {
        return Err(invalid("count", "need at least one level"));
    }
    if !geom.v0().is_finite() {
        return Err(invalid("V0", "finite barrier required; use the hard-wall helpers for V0 = ∞"));
    }
    let available = bound_level_count(geom, parity);
    if available < count {
        return Err(Error::InsufficientLevels { requested: count, available });
    }
    (1..=count).map(|n| solve_branch(geom, parity, n)).collect()
}

fn antisym_slope(k: f64, geom: &WellGeometry) -> f64 {
    let a = geom.a();
    let c = geom.c();
    let alpha = geom.alpha();
    let q = ((alpha - k) * (alpha + k)).sqrt();
    let x = q * c;
    let sec2 = 1.0 / (k * a).cos().powi(2);
    let th = x.tanh();
    let sech2 = 1.0 - th * th;
    a * sec2 + th / q * (1.0 + k * k / (q * q)) - k * k * c / (q * q) * sech2
}

/// `E_an − E_sn` for level pair `n`.
///
/// When the splitting is below `1e-6·k` the two roots agree to most of their
/// digits, so `k_a − k_s` comes from one Newton step on the antisymmetric
/// condition starting at `k_s`, where its residual is exactly
/// `−(k/q)(coth − tanh)(qc) = −2k/(q·sinh 2qc)`.
pub fn level_gap(geom: &WellGeometry, n: usize) -> Result<f64> {
    if !geom.v0().is_finite() {
        return Ok(0.0);
    }
    let sym = solve_levels(geom, Parity::Sym, n)?[n - 1];
    let ks = sym.k;
    let x = sym.q * geom.c();
    let offset = if x < 20.0 {
        -(2.0 * ks / (sym.q * (2.0 * x).sinh()))
    } else {
        -(4.0 * ks / sym.q) * (-2.0 * x).exp() / (1.0 - (-4.0 * x).exp())
    };
    let delta_lin = -offset / antisym_slope(ks, geom);
    let delta = if delta_lin.abs() < LINEARIZE_BELOW * ks {
        delta_lin
    } else {
        let anti = solve_levels(geom, Parity::Antisym, n)?[n - 1];
        anti.k - ks
    };
    Ok(0.5 * delta * (2.0 * ks + delta) * crate::HBAR * crate::HBAR / crate::MASS)
}

/// Tunneling splitting `E_a1 − E_s1` of the lowest pair.
pub fn tunneling_gap(geom: &WellGeometry) -> Result<f64> {
    level_gap(geom, 1)
}
