//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the flow or transport modules: separatrices are
//! followed in arclength with step-doubled RK4, Hessians come from finite
//! differences of `f_θ`, and gradings from the winding of `γ̇`.

#![allow(dead_code)]

use std::f64::consts::PI;

use fsforge_core::category::CoefficientPath;
use fsforge_core::flow::Flowline;
use fsforge_core::{Complex64, HolomorphicFunction};
use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn horner(coefficients: &[Complex64], z: Complex64) -> Complex64 {
    coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn derivative(coefficients: &[Complex64]) -> Vec<Complex64> {
    coefficients.iter().enumerate().skip(1).map(|(k, &a)| a * k as f64).collect()
}

/// `f_θ(z) = Re(e^{-iθ}F(z))` from the raw coefficients.
pub fn f_theta(f: &HolomorphicFunction, theta: f64, z: Complex64) -> f64 {
    (Complex64::from_polar(1.0, -theta) * horner(f.coefficients(), z)).re
}

/// `∇f_θ` as the conjugate of `e^{-iθ}F'`.
fn gradient(dcoef: &[Complex64], theta: f64, z: Complex64) -> Complex64 {
    (Complex64::from_polar(1.0, -theta) * horner(dcoef, z)).conj()
}

/// Central-difference Hessian of `f_θ` at `z`.
pub fn fd_hessian(f: &HolomorphicFunction, theta: f64, z: Complex64) -> Matrix2<f64> {
    let h = 1e-4;
    let v = |dx: f64, dy: f64| f_theta(f, theta, z + c(dx, dy));
    let fxx = (v(h, 0.0) - 2.0 * v(0.0, 0.0) + v(-h, 0.0)) / (h * h);
    let fyy = (v(0.0, h) - 2.0 * v(0.0, 0.0) + v(0.0, -h)) / (h * h);
    let fxy = (v(h, h) - v(h, -h) - v(-h, h) + v(-h, -h)) / (4.0 * h * h);
    Matrix2::new(fxx, fxy, fxy, fyy)
}

/// Angle in `[0, π)` of the eigenline of the Hessian with the given sign.
pub fn eigenline(f: &HolomorphicFunction, theta: f64, z: Complex64, positive: bool) -> f64 {
    let eig = SymmetricEigen::new(fd_hessian(f, theta, z));
    let k = if (eig.eigenvalues[0] > eig.eigenvalues[1]) == positive { 0 } else { 1 };
    let v = eig.eigenvectors.column(k);
    let angle = v[1].atan2(v[0]).rem_euclid(PI);
    // Keep the branch [0, π) when rounding lands just below π.
    if PI - angle < 1e-6 {
        0.0
    } else {
        angle
    }
}

/// Where a separatrix ends up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fate {
    Captured(usize),
    Escaped,
    Stalled,
}

/// Follows both unstable separatrices of `points[source]` for the flow of
/// `f_θ`, in arclength, with step-doubled RK4 at local tolerance `tol`.
pub fn separatrix_fates(f: &HolomorphicFunction, points: &[Complex64], source: usize, theta: f64, tol: f64) -> [Fate; 2] {
    let dcoef = derivative(f.coefficients());
    let x = points[source];
    let beta = eigenline(f, theta, x, true);
    let e = Complex64::from_polar(1.0, beta);
    let r_max = 10.0 * (1.0 + points.iter().map(|p| p.norm()).fold(0.0, f64::max));
    let field = |z: Complex64| {
        let g = gradient(&dcoef, theta, z);
        g / g.norm()
    };
    let rk4 = |z: Complex64, h: f64| {
        let k1 = field(z);
        let k2 = field(z + k1 * (h / 2.0));
        let k3 = field(z + k2 * (h / 2.0));
        let k4 = field(z + k3 * h);
        z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    };
    let follow = |sign: f64| -> Fate {
        let mut z = x + e * (sign * 1e-5);
        let mut h: f64 = 1e-4;
        let mut length = 0.0;
        while length < 200.0 {
            let nearest = points
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != source)
                .map(|(_, p)| (z - p).norm())
                .fold(f64::INFINITY, f64::min);
            h = h.min(0.5 * nearest);
            let full = rk4(z, h);
            let half = rk4(rk4(z, h / 2.0), h / 2.0);
            let err = (full - half).norm() / 15.0;
            if err > tol {
                h *= 0.5;
                if h < 1e-14 {
                    return Fate::Stalled;
                }
                continue;
            }
            z = half;
            length += h;
            if err < tol / 64.0 {
                h = (h * 2.0).min(0.02);
            }
            if z.norm() > r_max {
                return Fate::Escaped;
            }
            for (k, p) in points.iter().enumerate() {
                if k != source && (z - p).norm() < 1e-3 {
                    return Fate::Captured(k);
                }
            }
        }
        Fate::Stalled
    };
    [follow(1.0), follow(-1.0)]
}

/// Critical points as roots of `F'` by Newton from a seed grid, deduplicated.
pub fn oracle_critical_points(f: &HolomorphicFunction) -> Vec<Complex64> {
    let d1 = derivative(f.coefficients());
    let d2 = derivative(&d1);
    let mut found: Vec<Complex64> = Vec::new();
    for a in -12..=12 {
        for b in -12..=12 {
            let mut z = c(a as f64 * 0.25, b as f64 * 0.25);
            for _ in 0..100 {
                let step = horner(&d1, z) / horner(&d2, z);
                if !step.is_finite() {
                    break;
                }
                z -= step;
                if step.norm() < 1e-15 {
                    break;
                }
            }
            if horner(&d1, z).norm() < 1e-12 && !found.iter().any(|p| (p - z).norm() < 1e-8) {
                found.push(z);
            }
        }
    }
    found
}

/// Number of separatrices from `source` that land on `target` at the slope
/// of the segment between their values.
pub fn oracle_count(f: &HolomorphicFunction, points: &[Complex64], source: usize, target: usize, tol: f64) -> usize {
    let ws: Vec<Complex64> = points.iter().map(|&p| horner(f.coefficients(), p)).collect();
    let theta = (ws[target] - ws[source]).arg();
    separatrix_fates(f, points, source, theta, tol)
        .iter()
        .filter(|&&fate| fate == Fate::Captured(target))
        .count()
}

/// A frozen oracle count, keyed by critical point positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEntry {
    pub source: [f64; 2],
    pub target: [f64; 2],
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub name: String,
    pub coefficients: Vec<[f64; 2]>,
    pub counts: Vec<CountEntry>,
}

pub fn function_of(case: &CaseCounts) -> HolomorphicFunction {
    HolomorphicFunction::new(case.coefficients.iter().map(|a| c(a[0], a[1])).collect()).unwrap()
}

/// Oracle counts for every ordered pair of critical points of `f`.
pub fn oracle_case(name: &str, f: &HolomorphicFunction, tol: f64) -> CaseCounts {
    let points = oracle_critical_points(f);
    let mut counts = Vec::new();
    for s in 0..points.len() {
        for t in 0..points.len() {
            if s != t {
                counts.push(CountEntry {
                    source: [points[s].re, points[s].im],
                    target: [points[t].re, points[t].im],
                    count: oracle_count(f, &points, s, t, tol),
                });
            }
        }
    }
    counts.sort_by(|a, b| {
        (a.source[0], a.source[1], a.target[0], a.target[1])
            .partial_cmp(&(b.source[0], b.source[1], b.target[0], b.target[1]))
            .unwrap()
    });
    CaseCounts {
        name: name.to_string(),
        coefficients: f.coefficients().iter().map(|a| [a.re, a.im]).collect(),
        counts,
    }
}

/// Local tolerance of the oracle, ten times tighter than the library default.
pub const ORACLE_TOLERANCE: f64 = 1e-11;

/// The two wall-crossing families used throughout the tests, with the fixed
/// critical points whose segment is crossed.
pub fn wall_families() -> Vec<(&'static str, CoefficientPath, [Complex64; 2])> {
    let symmetric = [c(1.0, 0.0), c(-1.0, 0.0)];
    let skew = [c(1.2, 0.3), c(-0.8, -0.2)];
    vec![
        (
            "symmetric",
            CoefficientPath::moving_critical_point(&symmetric, &[c(0.0, 0.3), c(0.0, 1.0)]).unwrap(),
            symmetric,
        ),
        (
            "skew",
            CoefficientPath::moving_critical_point(&skew, &[c(0.3, 1.5), c(0.1, 0.2)]).unwrap(),
            skew,
        ),
    ]
}

/// Grading predicted from the winding of `γ̇`: a line transported by the
/// linearized flow never meets the line of `γ̇`, so it stays on the same
/// π-sheet relative to `arg γ̇(t)` from start to end.
pub fn winding_grading(flowline: &Flowline, lift_x: f64, lift_y: f64) -> i64 {
    let mut angles = Vec::with_capacity(flowline.samples.len());
    let mut prev: Option<f64> = None;
    for s in &flowline.samples {
        let a = s.v.arg();
        let a = match prev {
            None => a,
            Some(p) => p + (a - p + PI).rem_euclid(2.0 * PI) - PI,
        };
        angles.push(a);
        prev = Some(a);
    }
    let g_start = angles[0];
    let g_end = angles[angles.len() - 1];
    ((lift_x - g_start + g_end - PI / 2.0 - lift_y) / PI).round() as i64
}
