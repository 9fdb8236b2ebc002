//! Protective-measurement estimation of an unknown spin-1/2 state.
//!
//! The pipeline runs in natural units (`ħ = M = 1`, Coulomb strength folded
//! into a single coupling `λ`):
//!
//! 1. [`spin`]: Bloch charts, axis frames, the explicit non-unitary cloner
//!    matrices and the closed-form side analyses.
//! 2. [`doublewell`]: quantization of the finite symmetric double well,
//!    normalization, eigenfunctions, orthonormality and completeness checks.
//! 3. [`stern_gerlach`]: spin-conditioned momentum kicks, pulse matching and
//!    recombination bookkeeping.
//! 4. [`probe`]: the probe momentum law `p = −λ T A² I cos θ` and the
//!    discrimination mode.
//! 5. [`reconstruction`]: inversion of probe momenta along three axes into a
//!    full `(θ, φ)` estimate.
//! 6. [`tdse`]: an independent grid propagator used as a brute-force oracle.

pub mod doublewell;
pub mod error;
pub mod exec;
pub mod probe;
pub mod quadrature;
pub mod reconstruction;
pub mod spin;
pub mod stern_gerlach;
pub mod tdse;

pub use error::{Error, Result};

/// Reduced Planck constant in natural units.
pub const HBAR: f64 = 1.0;
/// Electron mass in natural units.
pub const MASS: f64 = 1.0;
