//! All roots of a complex polynomial: companion-matrix eigenvalues polished
//! by Newton, with Aberth–Ehrlich as the fallback.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const NEWTON_MAX_ITERS: usize = 60;
const ABERTH_MAX_ITERS: usize = 500;

fn horner(coefficients: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    let (mut p, mut dp) = (zero, zero);
    for &c in coefficients.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn backward_scale(coefficients: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coefficients.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Eigenvalues of the companion matrix of the monic normalization.
pub fn companion_roots(coefficients: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = coefficients.len() - 1;
    let lead = coefficients[n];
    if n == 1 {
        return Some(vec![-coefficients[0] / lead]);
    }
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -coefficients[i] / lead;
    }
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)?;
    let values = schur.eigenvalues()?;
    let roots: Vec<Complex64> = values.iter().copied().collect();
    roots.iter().all(|r| r.is_finite()).then_some(roots)
}

/// Simultaneous Aberth–Ehrlich iteration.
pub fn aberth_roots(coefficients: &[Complex64], tol: f64) -> Option<Vec<Complex64>> {
    let n = coefficients.len() - 1;
    let lead = coefficients[n].norm();
    // Cauchy-style radius for the initial circle.
    let radius = 1.0
        + coefficients[..n]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..ABERTH_MAX_ITERS {
        let mut worst = 0.0_f64;
        for k in 0..n {
            let (p, dp) = horner(coefficients, z[k]);
            if p.norm() <= tol * backward_scale(coefficients, z[k]) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| Complex64::new(1.0, 0.0) / (z[k] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                return None;
            }
            z[k] -= step;
            worst = worst.max(step.norm() / (1.0 + z[k].norm()));
        }
        if worst < tol {
            return Some(z);
        }
    }
    let converged = z
        .iter()
        .all(|&r| horner(coefficients, r).0.norm() <= 1e3 * tol * backward_scale(coefficients, r));
    converged.then_some(z)
}

/// Newton refinement until `|p(z)| ≤ tol · scale(z)`. Returns `None` when the
/// residual target is not met.
pub fn newton_polish(coefficients: &[Complex64], z0: Complex64, tol: f64) -> Option<Complex64> {
    let mut z = z0;
    for _ in 0..NEWTON_MAX_ITERS {
        let (p, dp) = horner(coefficients, z);
        if p.norm() <= tol * backward_scale(coefficients, z).max(1.0) {
            return Some(z);
        }
        if dp.norm() == 0.0 {
            return None;
        }
        let step = p / dp;
        z -= step;
        if !z.is_finite() {
            return None;
        }
    }
    let (p, _) = horner(coefficients, z);
    (p.norm() <= tol * backward_scale(coefficients, z).max(1.0)).then_some(z)
}

/// All `deg` roots of the polynomial, polished to residual `tol`.
pub fn polynomial_roots(coefficients: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let polish = |seeds: Vec<Complex64>| -> Option<Vec<Complex64>> {
        seeds
            .into_iter()
            .map(|z| newton_polish(coefficients, z, tol))
            .collect()
    };
    if let Some(roots) = companion_roots(coefficients).and_then(polish) {
        return Ok(roots);
    }
    aberth_roots(coefficients, tol)
        .and_then(polish)
        .ok_or_else(|| Error::RootFindingFailed("companion and Aberth iterations did not converge".into()))
}
