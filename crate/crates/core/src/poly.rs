//! Univariate complex polynomials, the holomorphic functions the whole
//! pipeline is built on.
//!
//! With `h = e^{-iθ} F` we write `f_θ = Re h` and `g_θ = Im h`. In the flat
//! metric on ℂ the gradient of `f_θ` is `conj(h')`, the gradient of `g_θ` is
//! `i·conj(h')`, and the real Hessian of `f_θ` is `[[a, -b], [-b, -a]]` with
//! `h'' = a + ib`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `e^{iθ}`.
pub fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

/// Normalize an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = a.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Signed distance of `a` from `b` on the circle, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = wrap_angle(a - b);
    if d > pi {
        d - std::f64::consts::TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolomorphicFunction {
    coefficients: Vec<Complex64>,
}

/// Value and first three derivatives at one point.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub value: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
}

impl HolomorphicFunction {
    /// Coefficients are given constant term first. Trailing exact zeros are
    /// rejected rather than trimmed, so the caller's degree is what it says.
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::DegreeTooLow {
                degree: coefficients.len().saturating_sub(1),
                required: 1,
            });
        }
        let lead = coefficients[coefficients.len() - 1];
        if lead.norm() == 0.0 || !lead.is_finite() {
            return Err(Error::ZeroLeadingCoefficient);
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("non-finite coefficient".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn from_real(coefficients: &[f64]) -> Result<Self> {
        Self::new(coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// `z³/3 − z`.
    pub fn cubic_example() -> Self {
        Self::from_real(&[0.0, -1.0, 0.0, 1.0 / 3.0]).expect("valid")
    }

    /// `z⁴/4 − z`.
    pub fn quartic_example() -> Self {
        Self::from_real(&[0.0, -1.0, 0.0, 0.0, 0.25]).expect("valid")
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Horner evaluation of `F, F', F'', F'''` in one sweep.
    pub fn jet(&self, z: Complex64) -> Jet {
        let zero = Complex64::new(0.0, 0.0);
        let (mut p0, mut p1, mut p2, mut p3) = (zero, zero, zero, zero);
        for &c in self.coefficients.iter().rev() {
            p3 = p3 * z + p2;
            p2 = p2 * z + p1;
            p1 = p1 * z + p0;
            p0 = p0 * z + c;
        }
        Jet {
            value: p0,
            d1: p1,
            d2: p2 * 2.0,
            d3: p3 * 6.0,
        }
    }

    pub fn d1(&self, z: Complex64) -> Complex64 {
        self.jet(z).d1
    }

    pub fn d2(&self, z: Complex64) -> Complex64 {
        self.jet(z).d2
    }

    /// `Σ |a_k| |z|^k`, the scale against which evaluation residuals of the
    /// derivative are judged.
    pub fn derivative_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * r + k as f64 * c.norm())
    }

    /// Coefficients of `F'`, constant term first.
    pub fn derivative_coefficients(&self) -> Vec<Complex64> {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect()
    }

    /// `F + c`.
    pub fn translated(&self, c: Complex64) -> Self {
        let mut coefficients = self.coefficients.clone();
        coefficients[0] += c;
        Self { coefficients }
    }

    /// `w · F` for a nonzero complex scalar.
    pub fn scaled(&self, w: Complex64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|&c| c * w).collect(),
        }
    }

    /// `F(w z)`, a holomorphic change of the domain coordinate.
    pub fn precomposed_with_scaling(&self, w: Complex64) -> Self {
        let mut p = Complex64::new(1.0, 0.0);
        let coefficients = self
            .coefficients
            .iter()
            .map(|&c| {
                let out = c * p;
                p *= w;
                out
            })
            .collect();
        Self { coefficients }
    }

    /// `f_θ(z) = Re(e^{-iθ} F(z))`.
    pub fn f_theta(&self, theta: f64, z: Complex64) -> f64 {
        (cis(-theta) * self.eval(z)).re
    }

    /// `g_θ(z) = Im(e^{-iθ} F(z))`.
    pub fn g_theta(&self, theta: f64, z: Complex64) -> f64 {
        (cis(-theta) * self.eval(z)).im
    }

    /// `∇f_θ(z) = conj(e^{-iθ} F'(z))` as a tangent vector in ℂ ≅ ℝ².
    pub fn grad_f(&self, theta: f64, z: Complex64) -> Complex64 {
        (cis(-theta) * self.d1(z)).conj()
    }

    /// Real 2×2 Hessian of `f_θ` at `z`.
    pub fn hessian_f(&self, theta: f64, z: Complex64) -> Matrix2<f64> {
        hessian_from_second_derivative(cis(-theta) * self.d2(z))
    }
}

/// Real Hessian of `Re h` given `h''`.
pub fn hessian_from_second_derivative(h2: Complex64) -> Matrix2<f64> {
    Matrix2::new(h2.re, -h2.im, -h2.im, -h2.re)
}

/// The standard complex structure on ℝ², multiplication by `i`.
pub fn standard_j() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}
