//! Central tolerance record.
//!
//! Every numerical threshold used by the validation and convergence logic
//! lives here, so callers can tighten or relax them in one place.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Algebraic identities (transform relations, conservation).
    pub algebraic: f64,
    /// Radial limits and boundary extrapolation.
    pub radial: f64,
    /// Unit modulus of atom positions.
    pub modulus: f64,
    /// Total mass of a probability measure.
    pub mass: f64,
    /// Minimum angular separation of distinct atoms.
    pub atom_separation: f64,
    /// `||U^dagger U - 1||_max` for dense operators.
    pub unitarity: f64,
    /// Norm of state vectors.
    pub state_norm: f64,
    /// Boundary modulus deviation accepted for inner functions.
    pub inner: f64,
    /// `1 - |gamma_k|` below which the Schur algorithm terminates.
    pub verblunsky_termination: f64,
    /// Relative residual below which numerator and denominator share a root.
    pub coprime: f64,
    /// Convergence threshold for quadrature refinement.
    pub quadrature: f64,
    /// Survival probability below which a run counts as returned.
    pub survival: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-10,
            radial: 1e-6,
            modulus: 1e-12,
            mass: 1e-10,
            atom_separation: 1e-9,
            unitarity: 1e-10,
            state_norm: 1e-12,
            inner: 1e-8,
            verblunsky_termination: 1e-10,
            coprime: 1e-10,
            quadrature: 1e-10,
            survival: 1e-6,
        }
    }
}

/// Radii `r_k = 1 - 2^{-k}` for `k` in `first..=last`.
pub fn geometric_r_schedule(first: u32, last: u32) -> Vec<f64> {
    (first..=last).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect()
}

/// Default radial schedule `k = 4..20`.
pub fn default_r_schedule() -> Vec<f64> {
    geometric_r_schedule(4, 20)
}
