//! Critical data of `F`, the clockwise ordering of objects relative to the
//! ray `ℓ_α`, convex position, segment slopes, and the tamed-pair checks.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{angle_diff, wrap_angle, HolomorphicFunction};
use crate::roots::polynomial_roots;
use crate::Tolerances;

/// Roots of `F'` closer than this are treated as one multiple root.
const MULTIPLE_ROOT_RADIUS: f64 = 1e-6;
const HULL_ANGLE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalDatum {
    pub point: Complex64,
    pub value: Complex64,
    pub hessian: Complex64,
}

/// Critical points of `F`, ordered by the argument of the point in `[0, 2π)`
/// and then by modulus.
pub fn critical_points(f: &HolomorphicFunction, tol: &Tolerances) -> Result<Vec<CriticalDatum>> {
    if f.degree() < 2 {
        return Err(Error::DegreeTooLow {
            degree: f.degree(),
            required: 2,
        });
    }
    if !(tol.root > 0.0) {
        return Err(Error::Precondition("root tolerance must be positive".into()));
    }
    let derivative = f.derivative_coefficients();
    let mut roots = polynomial_roots(&derivative, tol.root)?;

    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            let scale = 1.0 + roots[i].norm().max(roots[j].norm());
            if (roots[i] - roots[j]).norm() < MULTIPLE_ROOT_RADIUS * scale {
                let point = (roots[i] + roots[j]) * 0.5;
                return Err(Error::NonMorse {
                    point,
                    hessian_norm: f.d2(point).norm(),
                });
            }
        }
    }

    roots.sort_by(|a, b| {
        point_angle(*a)
            .total_cmp(&point_angle(*b))
            .then(a.norm().total_cmp(&b.norm()))
    });

    let data: Vec<CriticalDatum> = roots
        .into_iter()
        .map(|point| {
            let jet = f.jet(point);
            CriticalDatum {
                point,
                value: jet.value,
                hessian: jet.d2,
            }
        })
        .collect();

    for d in &data {
        if d.hessian.norm() < tol.root * f.derivative_scale(d.point).max(1.0) {
            return Err(Error::NonMorse {
                point: d.point,
                hessian_norm: d.hessian.norm(),
            });
        }
    }
    for i in 0..data.len() {
        for j in (i + 1)..data.len() {
            let distance = (data[i].value - data[j].value).norm();
            if distance < tol.value_separation {
                return Err(Error::DegenerateValues { i, j, distance });
            }
        }
    }
    Ok(data)
}

fn point_angle(z: Complex64) -> f64 {
    if z.norm() < 1e-14 {
        return 0.0;
    }
    let a = wrap_angle(z.arg());
    if TAU - a < 1e-9 {
        0.0
    } else {
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGeometry {
    pub alpha: f64,
    pub values: Vec<Complex64>,
    /// Critical indices sorted by increasing clockwise angle.
    pub order: Vec<usize>,
    /// Clockwise angle from `ℓ_α` to each value, indexed by critical index.
    pub clockwise_angles: Vec<f64>,
    pub convex: bool,
    /// A value lying in the convex hull of the others, when not convex.
    pub interior_witness: Option<usize>,
    /// `slopes[i][j] = arg(F(x_j) − F(x_i))` in `[0, 2π)`; `None` on the diagonal.
    pub slopes: Vec<Vec<Option<f64>>>,
    /// Arguments of the critical values, sorted.
    pub exceptional_angles: Vec<f64>,
}

impl PhaseGeometry {
    /// Position of critical index `i` in the clockwise order.
    pub fn rank(&self, i: usize) -> usize {
        self.order.iter().position(|&k| k == i).expect("index in order")
    }

    /// `x ≺ y`.
    pub fn precedes(&self, x: usize, y: usize) -> bool {
        self.rank(x) < self.rank(y)
    }

    pub fn slope(&self, i: usize, j: usize) -> Option<f64> {
        self.slopes[i][j]
    }
}

/// Clockwise angle from the ray at angle `alpha` to `w`, in `[0, 2π)`.
pub fn clockwise_angle(alpha: f64, w: Complex64) -> f64 {
    wrap_angle(alpha - w.arg())
}

pub fn phase_geometry(crit: &[CriticalDatum], alpha: f64, tol: &Tolerances) -> Result<PhaseGeometry> {
    let values: Vec<Complex64> = crit.iter().map(|d| d.value).collect();
    phase_geometry_of_values(&values, alpha, tol)
}

pub fn phase_geometry_of_values(values: &[Complex64], alpha: f64, tol: &Tolerances) -> Result<PhaseGeometry> {
    if !alpha.is_finite() {
        return Err(Error::Precondition("alpha must be finite".into()));
    }
    let alpha = wrap_angle(alpha);
    for (index, w) in values.iter().enumerate() {
        if w.norm() < tol.value_separation {
            return Err(Error::ValueAtOrigin { index });
        }
    }
    for (index, w) in values.iter().enumerate() {
        if angle_diff(w.arg(), alpha).abs() < tol.ray_clearance {
            return Err(Error::ValueOnRay { index, alpha });
        }
    }
    let clockwise_angles: Vec<f64> = values.iter().map(|&w| clockwise_angle(alpha, w)).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| clockwise_angles[a].total_cmp(&clockwise_angles[b]));
    for pair in order.windows(2) {
        if (clockwise_angles[pair[1]] - clockwise_angles[pair[0]]).abs() < tol.ray_clearance {
            return Err(Error::AmbiguousOrder {
                i: pair[0],
                j: pair[1],
            });
        }
    }
    let interior_witness = interior_witness(values);
    Ok(PhaseGeometry {
        alpha,
        values: values.to_vec(),
        order,
        clockwise_angles,
        convex: interior_witness.is_none(),
        interior_witness,
        slopes: slope_matrix(values),
        exceptional_angles: exceptional_angles(values),
    })
}

/// `arg(w_j − w_i)`, with the lower triangle derived from the upper one so
/// that `slopes[j][i] = slopes[i][j] + π (mod 2π)` holds exactly.
pub fn slope_matrix(values: &[Complex64]) -> Vec<Vec<Option<f64>>> {
    let n = values.len();
    let mut slopes = vec![vec![None; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = wrap_angle((values[j] - values[i]).arg());
            slopes[i][j] = Some(s);
            slopes[j][i] = Some(wrap_angle(s + PI));
        }
    }
    slopes
}

/// Sorted arguments of the values in `[0, 2π)`: the angles `α` at which the
/// clockwise order changes.
pub fn exceptional_angles(values: &[Complex64]) -> Vec<f64> {
    let mut a: Vec<f64> = values.iter().map(|w| wrap_angle(w.arg())).collect();
    a.sort_by(f64::total_cmp);
    a
}

/// Whether `p` lies in the closed convex hull of `others`. The test looks for
/// an angular gap wider than π among the directions from `p` to the others.
pub fn in_convex_hull(p: Complex64, others: &[Complex64]) -> bool {
    if others.is_empty() {
        return false;
    }
    let scale = others.iter().map(|w| (w - p).norm()).fold(0.0, f64::max);
    let mut dirs = Vec::with_capacity(others.len());
    for w in others {
        let d = w - p;
        if d.norm() <= 1e-12 * scale.max(1e-300) {
            return true;
        }
        dirs.push(wrap_angle(d.arg()));
    }
    dirs.sort_by(f64::total_cmp);
    let mut max_gap = TAU - (dirs[dirs.len() - 1] - dirs[0]);
    for w in dirs.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap <= PI + HULL_ANGLE_EPS
}

/// First value lying in the hull of the others, if any. Collinear middle
/// points count as inside.
pub fn interior_witness(values: &[Complex64]) -> Option<usize> {
    (0..values.len()).find(|&i| {
        let others: Vec<Complex64> = values
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &w)| w)
            .collect();
        in_convex_hull(values[i], &others)
    })
}

/// `ρ(z) = ½|∇F|² = |F'(z)|²` in the flat metric.
pub fn conformal_factor(f: &HolomorphicFunction, z: Complex64) -> f64 {
    f.d1(z).norm_sqr()
}

/// `{f_θ, g_θ} = df_θ(X_{g_θ})` from the real partial derivatives, with
/// `X_H = (∂_y H, −∂_x H)` so that `X_{g_θ} = ∇f_θ`.
pub fn poisson_bracket(f: &HolomorphicFunction, theta: f64, z: Complex64) -> f64 {
    let h1 = crate::poly::cis(-theta) * f.d1(z);
    let (fx, fy) = (h1.re, -h1.im);
    let (gx, gy) = (h1.im, h1.re);
    let xg = Vector2::new(gy, -gx);
    fx * xg.x + fy * xg.y
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientLikeReport {
    pub theta: f64,
    pub min_bracket: f64,
    pub argmin: Complex64,
    pub pass: bool,
    /// Zeros of `∇f_θ` located by a real Newton search.
    pub gradient_zeros: Vec<Complex64>,
    pub critical_sets_agree: bool,
}

/// Checks that `X_{g_θ}` is gradient-like for `f_θ` on the samples and that
/// `Crit(f_θ) = Crit(F)`.
pub fn check_gradient_like(
    f: &HolomorphicFunction,
    theta: f64,
    samples: &[Complex64],
    margin: f64,
    tol: &Tolerances,
) -> Result<GradientLikeReport> {
    let crit = critical_points(f, tol)?;
    if samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    for &z in samples {
        if let Some(d) = crit.iter().find(|d| (d.point - z).norm() < margin) {
            return Err(Error::Precondition(format!(
                "sample {z} within {margin} of critical point {}",
                d.point
            )));
        }
    }
    let (mut min_bracket, mut argmin) = (f64::INFINITY, samples[0]);
    for &z in samples {
        let b = poisson_bracket(f, theta, z);
        if b < min_bracket {
            min_bracket = b;
            argmin = z;
        }
    }
    if min_bracket <= 0.0 {
        return Err(Error::NonPositiveBracket {
            point: argmin,
            value: min_bracket,
        });
    }
    let radius = 1.5 * (1.0 + crit.iter().map(|d| d.point.norm()).fold(0.0, f64::max));
    let gradient_zeros = gradient_zeros(f, theta, radius);
    let critical_sets_agree = gradient_zeros.len() == crit.len()
        && crit.iter().all(|d| {
            gradient_zeros
                .iter()
                .any(|z| (z - d.point).norm() < 1e-8 * (1.0 + d.point.norm()))
        });
    Ok(GradientLikeReport {
        theta,
        min_bracket,
        argmin,
        pass: true,
        gradient_zeros,
        critical_sets_agree,
    })
}

/// Zeros of the real gradient field `∇f_θ`, found by two-dimensional Newton
/// iteration with the real Hessian from a grid of seeds in `[-R, R]²`.
pub fn gradient_zeros(f: &HolomorphicFunction, theta: f64, radius: f64) -> Vec<Complex64> {
    const SEEDS: usize = 24;
    let mut found: Vec<Complex64> = Vec::new();
    for a in 0..SEEDS {
        for b in 0..SEEDS {
            let mut z = Complex64::new(
                -radius + 2.0 * radius * (a as f64 + 0.5) / SEEDS as f64,
                -radius + 2.0 * radius * (b as f64 + 0.5) / SEEDS as f64,
            );
            let mut converged = false;
            for _ in 0..80 {
                let g = f.grad_f(theta, z);
                let h = f.hessian_f(theta, z);
                let Some(hinv) = h.try_inverse() else { break };
                let step = hinv * Vector2::new(g.re, g.im);
                z -= Complex64::new(step.x, step.y);
                if !z.is_finite() || z.norm() > 10.0 * radius {
                    break;
                }
                if step.norm() < 1e-15 * (1.0 + z.norm()) {
                    converged = true;
                    break;
                }
            }
            let residual = f.grad_f(theta, z).norm();
            if (converged || residual < 1e-13 * f.derivative_scale(z).max(1.0))
                && z.is_finite()
                && !found.iter().any(|w| (w - z).norm() < 1e-6)
            {
                found.push(z);
            }
        }
    }
    found
}
