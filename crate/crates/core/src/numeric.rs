//! Shared numeric policy and small helpers.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerances used across the crate. Every threshold that decides a
/// classification or a validation lives here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Matrix identities (unitarity, Hermiticity, reconstruction).
    pub algebraic: f64,
    /// Eigenvalue comparisons.
    pub spectral: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        algebraic: 1e-12,
        spectral: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Reduce an angle to `[0, 2π)`, snapping values within `1e-12` of `2π` to zero.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let w = theta.rem_euclid(two_pi);
    if two_pi - w < 1e-12 {
        0.0
    } else {
        w
    }
}

/// Reduce an angle to `(-π, π]`.
pub fn wrap_symmetric(theta: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let w = wrap_angle(theta);
    if w > pi {
        w - std::f64::consts::TAU
    } else {
        w
    }
}
