//! Desk-scale Morse-theoretic model of the directed Fukaya–Seidel category of
//! a holomorphic Morse polynomial `F : ℂ → ℂ`.
//!
//! The pipeline runs bottom-up:
//!
//! - [`landscape`]: critical data, clockwise ordering, convexity, slopes;
//! - [`flow`]: gradient flowlines of `f_θ = Re(e^{-iθ}F)` and connection counts;
//! - [`transport`]: linearization along flowlines, symplectic transport, gradings;
//! - [`floer`]: a finite-difference Floer strip solver and its diagnostics;
//! - [`category`]: the directed 𝔽₂ category, A∞ checks, Picard–Lefschetz wall crossing.

pub mod category;
pub mod error;
pub mod f2;
pub mod floer;
pub mod flow;
pub mod landscape;
pub mod ode;
pub mod poly;
pub mod roots;
pub mod transport;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use poly::HolomorphicFunction;

use serde::{Deserialize, Serialize};

/// Numerical tolerances shared across modules. Every report embeds the set
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Residual `|F'|` accepted for a critical point.
    pub root: f64,
    /// Minimum distance between two critical values.
    pub value_separation: f64,
    /// Minimum angular distance between a critical value and the ray `ℓ_α`.
    pub ray_clearance: f64,
    /// Maximum drift of `g_θ` along an accepted flowline.
    pub conservation: f64,
    /// Maximum distance of `F∘γ` from the segment `[F(x), F(y)]`.
    pub segment: f64,
    /// Relative and absolute tolerance of the adaptive integrator.
    pub integrator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            root: 1e-12,
            value_separation: 1e-9,
            ray_clearance: 1e-9,
            conservation: 1e-8,
            segment: 1e-6,
            integrator: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.root,
            self.value_separation,
            self.ray_clearance,
            self.conservation,
            self.segment,
            self.integrator,
        ];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(Error::Precondition("tolerances must be positive".into()))
        }
    }
}
