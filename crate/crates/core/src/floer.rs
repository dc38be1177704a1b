//! Finite-difference Floer strips `u : [−S,S]×[−T,T] → ℂ` solving
//!
//! ```text
//! ∂_s u + i(∂_t u − ∇f_θ(u)) = 0,   ∇f_θ(u) = conj(e^{-iθ}F'(u)),
//! ```
//!
//! with Dirichlet data taken from the asymptotic flowlines on the left and
//! right edges and the critical points on the bottom and top edges.
//!
//! The field is stored row-major in `s`: node `(i, j)` sits at
//! `values[i·nt + j]`. Residuals live on interior nodes only.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{action, Flowline};
use crate::landscape::CriticalDatum;
use crate::poly::{cis, standard_j, wrap_angle, HolomorphicFunction};

pub const MIN_NODES: usize = 16;
/// Width, in cells, of the corner blend on the top and bottom edges.
pub const BLEND_CELLS: usize = 5;
/// Convergence is declared at `‖r‖ < RESIDUAL_FACTOR·√(ns·nt)`.
pub const RESIDUAL_FACTOR: f64 = 1e-8;
/// `ρ = |F'(u)|²` below which a node is excluded from the holomorphy check.
pub const HOLOMORPHY_FLOOR: f64 = 0.1;
pub const HOLOMORPHY_TOLERANCE: f64 = 1e-4;
pub const ROTATION_TOLERANCE: f64 = 1e-4;
/// Relative tolerance of the energy identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-3;

/// Rectangle `[−S,S]×[−T,T]` with `ns × nt` nodes including the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub s_half: f64,
    pub t_half: f64,
    pub ns: usize,
    pub nt: usize,
}

impl Grid {
    pub fn new(s_half: f64, t_half: f64, ns: usize, nt: usize) -> Result<Self> {
        let grid = Grid {
            s_half,
            t_half,
            ns,
            nt,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(half, half, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns < MIN_NODES || self.nt < MIN_NODES {
            return Err(Error::Precondition(format!(
                "grid {}x{} is below the minimum {MIN_NODES}x{MIN_NODES}",
                self.ns, self.nt
            )));
        }
        if self.ns % 2 == 1 || self.nt % 2 == 1 {
            // With an odd number of interior nodes the central difference has
            // a sawtooth null vector, and the strip operator becomes singular.
            return Err(Error::Precondition(format!(
                "grid {}x{} must have even node counts",
                self.ns, self.nt
            )));
        }
        if !(self.s_half > 0.0 && self.t_half > 0.0 && self.s_half.is_finite() && self.t_half.is_finite()) {
            return Err(Error::Precondition("grid half-widths must be positive".into()));
        }
        Ok(())
    }

    /// A rectangle scaled by `factor` with `factor` times the nodes, so the
    /// spacing stays nearly the same.
    pub fn enlarged(&self, factor: usize) -> Grid {
        Grid {
            s_half: self.s_half * factor as f64,
            t_half: self.t_half * factor as f64,
            ns: self.ns * factor,
            nt: self.nt * factor,
        }
    }

    pub fn ds(&self) -> f64 {
        2.0 * self.s_half / (self.ns - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.t_half / (self.nt - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        -self.s_half + i as f64 * self.ds()
    }

    pub fn t(&self, j: usize) -> f64 {
        -self.t_half + j as f64 * self.dt()
    }

    pub fn len(&self) -> usize {
        self.ns * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.ns || j + 1 == self.nt
    }

    fn interior(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.ns - 1).flat_map(move |i| (1..self.nt - 1).map(move |j| (i, j)))
    }
}

/// Limit of `u(s, ·)` as `s → ∓∞`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Asymptote {
    Flowline(Box<Flowline>),
    Constant { index: usize, point: Complex64 },
}

impl Asymptote {
    pub fn position(&self, t: f64) -> Complex64 {
        match self {
            Asymptote::Flowline(g) => g.position(t),
            Asymptote::Constant { point, .. } => *point,
        }
    }

    /// `∫_γ λ`, which equals the action because `g_θ` is constant on `γ`.
    pub fn action(&self) -> f64 {
        match self {
            Asymptote::Flowline(g) => action(g),
            Asymptote::Constant { .. } => 0.0,
        }
    }

    fn ends(&self) -> (usize, usize) {
        match self {
            Asymptote::Flowline(g) => (g.source, g.target),
            Asymptote::Constant { index, .. } => (*index, *index),
        }
    }
}

/// A two-ended strip problem. Problems with more ends are not representable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloerProblem {
    pub function: HolomorphicFunction,
    pub theta: f64,
    pub gamma0: Asymptote,
    pub gamma1: Asymptote,
    pub x0: usize,
    pub x1: usize,
    pub point0: Complex64,
    pub point1: Complex64,
    pub grid: Grid,
    /// The solver aborts once `|u|` exceeds this radius.
    pub r_max: f64,
}

impl FloerProblem {
    pub fn new(
        function: &HolomorphicFunction,
        crit: &[CriticalDatum],
        theta: f64,
        gamma0: Asymptote,
        gamma1: Asymptote,
        grid: Grid,
    ) -> Result<Self> {
        grid.validate()?;
        let (x0, x1) = gamma0.ends();
        if gamma1.ends() != (x0, x1) {
            return Err(Error::Precondition(format!(
                "asymptotes join {:?} and {:?}",
                (x0, x1),
                gamma1.ends()
            )));
        }
        if x0 >= crit.len() || x1 >= crit.len() {
            return Err(Error::Precondition("asymptote index out of range".into()));
        }
        for gamma in [&gamma0, &gamma1] {
            match gamma {
                Asymptote::Flowline(g) => {
                    if wrap_angle(g.theta - theta).abs() > 1e-12 {
                        return Err(Error::Precondition(format!(
                            "flowline slope {} differs from problem angle {theta}",
                            g.theta
                        )));
                    }
                    if g.function != *function {
                        return Err(Error::Precondition("flowline belongs to a different function".into()));
                    }
                }
                Asymptote::Constant { index, point } => {
                    if (point - crit[*index].point).norm() > 1e-9 * (1.0 + point.norm()) {
                        return Err(Error::Precondition("constant asymptote is not the critical point".into()));
                    }
                }
            }
        }
        let scale = crit.iter().map(|c| c.point.norm()).fold(0.0, f64::max);
        Ok(FloerProblem {
            function: function.clone(),
            theta,
            gamma0,
            gamma1,
            x0,
            x1,
            point0: crit[x0].point,
            point1: crit[x1].point,
            grid,
            r_max: 10.0 * (1.0 + scale),
        })
    }

    /// `γ₀ = γ₁ = γ`, whose unique nearby solution is `u(s,t) = γ(t)`.
    pub fn trivial(function: &HolomorphicFunction, crit: &[CriticalDatum], gamma: &Flowline, grid: Grid) -> Result<Self> {
        let a = Asymptote::Flowline(Box::new(gamma.clone()));
        Self::new(function, crit, gamma.theta, a.clone(), a, grid)
    }

    pub fn constant(function: &HolomorphicFunction, crit: &[CriticalDatum], x: usize, theta: f64, grid: Grid) -> Result<Self> {
        let point = crit
            .get(x)
            .ok_or_else(|| Error::Precondition(format!("no critical point {x}")))?
            .point;
        let a = Asymptote::Constant { index: x, point };
        Self::new(function, crit, theta, a.clone(), a, grid)
    }

    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        grid.validate()?;
        Ok(FloerProblem { grid, ..self.clone() })
    }

    /// `∇f_θ(u)`.
    pub fn gradient(&self, u: Complex64) -> Complex64 {
        (cis(-self.theta) * self.function.d1(u)).conj()
    }

    /// The Dirichlet value at boundary node `(i, j)`.
    pub fn boundary_value(&self, i: usize, j: usize) -> Complex64 {
        let g = &self.grid;
        let t = g.t(j);
        if i == 0 {
            return self.gamma0.position(t);
        }
        if i + 1 == g.ns {
            return self.gamma1.position(t);
        }
        let (x, t_end) = if j == 0 { (self.point0, -g.t_half) } else { (self.point1, g.t_half) };
        let left = blend_weight(i);
        let right = blend_weight(g.ns - 1 - i);
        x + (self.gamma0.position(t_end) - x) * left + (self.gamma1.position(t_end) - x) * right
    }

    /// `u⁰(s,t) = (1−σ(s))γ₀(t) + σ(s)γ₁(t)` inside, Dirichlet data on the boundary.
    pub fn initial_guess(&self) -> Vec<Complex64> {
        let g = &self.grid;
        let mut values = vec![Complex64::new(0.0, 0.0); g.len()];
        for i in 0..g.ns {
            let sigma = smoothstep(i as f64 / (g.ns - 1) as f64);
            for j in 0..g.nt {
                values[g.index(i, j)] = if g.is_boundary(i, j) {
                    self.boundary_value(i, j)
                } else {
                    let t = g.t(j);
                    self.gamma0.position(t) * (1.0 - sigma) + self.gamma1.position(t) * sigma
                };
            }
        }
        values
    }

    fn check_shape(&self, values: &[Complex64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::ShapeMismatch {
                expected: (self.grid.ns, self.grid.nt),
                got: (values.len() / self.grid.nt.max(1), self.grid.nt),
            });
        }
        Ok(())
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Weight of a corner value at distance `k` cells from its corner.
fn blend_weight(k: usize) -> f64 {
    if k >= BLEND_CELLS {
        0.0
    } else {
        1.0 - smoothstep(k as f64 / BLEND_CELLS as f64)
    }
}

/// A grid field with its residual and energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloerField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub residual_norm: f64,
    pub energy: f64,
    pub solved: bool,
    pub iterations: usize,
}

impl FloerField {
    /// Wraps arbitrary values, computing the residual norm and energy.
    pub fn from_values(problem: &FloerProblem, values: Vec<Complex64>) -> Result<Self> {
        problem.check_shape(&values)?;
        let r = residual_values(problem, &values);
        let residual_norm = norm(&r);
        let energy = energy_of(problem, &values);
        Ok(FloerField {
            grid: problem.grid,
            values,
            residual_norm,
            energy,
            solved: false,
            iterations: 0,
        })
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.index(i, j)]
    }

    /// `u(s, t) = γ(t)` sampled on the problem grid.
    pub fn s_independent(problem: &FloerProblem, gamma: &Asymptote) -> Result<Self> {
        let g = problem.grid;
        let mut values = Vec::with_capacity(g.len());
        for _ in 0..g.ns {
            for j in 0..g.nt {
                values.push(gamma.position(g.t(j)));
            }
        }
        Self::from_values(problem, values)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn check_field(problem: &FloerProblem, field: &FloerField) -> Result<()> {
    if field.grid != problem.grid || field.values.len() != problem.grid.len() {
        return Err(Error::ShapeMismatch {
            expected: (problem.grid.ns, problem.grid.nt),
            got: (field.grid.ns, field.grid.nt),
        });
    }
    Ok(())
}

/// Central-difference residual at interior nodes; boundary entries are zero.
pub fn residual(problem: &FloerProblem, field: &FloerField) -> Result<Vec<Complex64>> {
    check_field(problem, field)?;
    Ok(residual_values(problem, &field.values))
}

fn residual_values(problem: &FloerProblem, u: &[Complex64]) -> Vec<Complex64> {
    let g = &problem.grid;
    let (hs, ht) = (0.5 / g.ds(), 0.5 / g.dt());
    let i_unit = Complex64::i();
    let mut r = vec![Complex64::new(0.0, 0.0); g.len()];
    for (i, j) in g.interior() {
        let k = g.index(i, j);
        let us = (u[k + g.nt] - u[k - g.nt]) * hs;
        let ut = (u[k + 1] - u[k - 1]) * ht;
        r[k] = us + i_unit * (ut - problem.gradient(u[k]));
    }
    r
}

/// Linearization of the residual at a fixed field: `Jδ = D_sδ + iD_tδ − i·conj(aδ)`
/// with `a = e^{-iθ}F''(u)`, acting on fields that vanish on the boundary.
struct Linearization<'a> {
    grid: &'a Grid,
    a: Vec<Complex64>,
}

impl Linearization<'_> {
    fn apply(&self, d: &[Complex64], out: &mut [Complex64]) {
        let g = self.grid;
        let (hs, ht) = (0.5 / g.ds(), 0.5 / g.dt());
        let i_unit = Complex64::i();
        for (i, j) in g.interior() {
            let k = g.index(i, j);
            let ds = (d[k + g.nt] - d[k - g.nt]) * hs;
            let dt = (d[k + 1] - d[k - 1]) * ht;
            out[k] = ds + i_unit * dt - i_unit * (self.a[k] * d[k]).conj();
        }
    }

    /// Adjoint for the real inner product `Re Σ conj(x)y`:
    /// `J*w = −D_s w + iD_t w + c·conj(w)` with `c = −i·conj(a)`.
    fn apply_adjoint(&self, w: &[Complex64], out: &mut [Complex64]) {
        let g = self.grid;
        let (hs, ht) = (0.5 / g.ds(), 0.5 / g.dt());
        let i_unit = Complex64::i();
        for (i, j) in g.interior() {
            let k = g.index(i, j);
            let ws = (w[k + g.nt] - w[k - g.nt]) * hs;
            let wt = (w[k + 1] - w[k - 1]) * ht;
            out[k] = -ws + i_unit * wt - i_unit * self.a[k].conj() * w[k].conj();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub cgls_max_iterations: usize,
    /// Inner solves stop once `‖Jδ + r‖ ≤ cgls_tolerance·‖r‖`.
    pub cgls_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 40,
            cgls_max_iterations: 4000,
            cgls_tolerance: 1e-6,
        }
    }
}

/// Least-squares solution of `Jδ ≈ b` by conjugate gradients on the normal
/// equations.
fn cgls(op: &Linearization<'_>, b: &[Complex64], tol: f64, max_iter: usize) -> Vec<Complex64> {
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let mut s = vec![zero; n];
    op.apply_adjoint(&r, &mut s);
    let mut p = s.clone();
    let mut q = vec![zero; n];
    let mut gamma = dot(&s, &s);
    let b_norm = norm(b);
    let gamma0 = gamma;
    for _ in 0..max_iter {
        if gamma <= 1e-30 * gamma0.max(1e-300) {
            break;
        }
        op.apply(&p, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for k in 0..n {
            x[k] += p[k] * alpha;
            r[k] -= q[k] * alpha;
        }
        if norm(&r) <= tol * b_norm {
            break;
        }
        op.apply_adjoint(&r, &mut s);
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for k in 0..n {
            p[k] = s[k] + p[k] * beta;
        }
    }
    x
}

/// Gauss–Newton from the blended initial guess.
pub fn solve(problem: &FloerProblem) -> Result<FloerField> {
    solve_from(problem, problem.initial_guess(), &SolverSettings::default())
}

/// Gauss–Newton with backtracking from `initial`, whose boundary entries
/// are overwritten by the Dirichlet data.
pub fn solve_from(problem: &FloerProblem, initial: Vec<Complex64>, settings: &SolverSettings) -> Result<FloerField> {
    problem.check_shape(&initial)?;
    let g = problem.grid;
    let mut u = initial;
    for i in 0..g.ns {
        for j in 0..g.nt {
            if g.is_boundary(i, j) {
                u[g.index(i, j)] = problem.boundary_value(i, j);
            }
        }
    }
    let target = RESIDUAL_FACTOR * (g.len() as f64).sqrt();
    let mut r = residual_values(problem, &u);
    let mut r_norm = norm(&r);
    let rot = cis(-problem.theta);
    for iteration in 0..=settings.max_iterations {
        if u.iter().any(|z| !z.is_finite() || z.norm() > problem.r_max) {
            return Err(Error::DivergedField { r_max: problem.r_max });
        }
        if r_norm < target {
            let energy = energy_of(problem, &u);
            return Ok(FloerField {
                grid: g,
                values: u,
                residual_norm: r_norm,
                energy,
                solved: true,
                iterations: iteration,
            });
        }
        if iteration == settings.max_iterations {
            break;
        }
        let op = Linearization {
            grid: &g,
            a: u.iter().map(|&z| rot * problem.function.d2(z)).collect(),
        };
        let b: Vec<Complex64> = r.iter().map(|z| -z).collect();
        let delta = cgls(&op, &b, settings.cgls_tolerance, settings.cgls_max_iterations);
        let mut step = 1.0;
        loop {
            let trial: Vec<Complex64> = u.iter().zip(&delta).map(|(z, d)| z + d * step).collect();
            let r_trial = residual_values(problem, &trial);
            let n_trial = norm(&r_trial);
            if n_trial < (1.0 - 1e-4 * step) * r_norm {
                u = trial;
                r = r_trial;
                r_norm = n_trial;
                break;
            }
            step *= 0.5;
            if step < 1e-8 {
                return Err(Error::NoConvergence {
                    iterations: iteration + 1,
                    residual: r_norm,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        residual: r_norm,
    })
}

/// Derivative fields `(∂_s u, ∂_t u)`: central differences inside,
/// second-order one-sided differences on the boundary.
pub fn derivatives(grid: &Grid, u: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let (ns, nt) = (grid.ns, grid.nt);
    let (ds, dt) = (grid.ds(), grid.dt());
    let mut us = vec![Complex64::new(0.0, 0.0); u.len()];
    let mut ut = us.clone();
    let at = |i: usize, j: usize| u[i * nt + j];
    for i in 0..ns {
        for j in 0..nt {
            let k = i * nt + j;
            us[k] = if i == 0 {
                (at(0, j) * -3.0 + at(1, j) * 4.0 - at(2, j)) / (2.0 * ds)
            } else if i + 1 == ns {
                (at(i, j) * 3.0 - at(i - 1, j) * 4.0 + at(i - 2, j)) / (2.0 * ds)
            } else {
                (at(i + 1, j) - at(i - 1, j)) / (2.0 * ds)
            };
            ut[k] = if j == 0 {
                (at(i, 0) * -3.0 + at(i, 1) * 4.0 - at(i, 2)) / (2.0 * dt)
            } else if j + 1 == nt {
                (at(i, j) * 3.0 - at(i, j - 1) * 4.0 + at(i, j - 2)) / (2.0 * dt)
            } else {
                (at(i, j + 1) - at(i, j - 1)) / (2.0 * dt)
            };
        }
    }
    (us, ut)
}

fn trapezoid_weight(grid: &Grid, i: usize, j: usize) -> f64 {
    let ws = if i == 0 || i + 1 == grid.ns { 0.5 } else { 1.0 };
    let wt = if j == 0 || j + 1 == grid.nt { 0.5 } else { 1.0 };
    ws * wt * grid.ds() * grid.dt()
}

fn energy_of(problem: &FloerProblem, u: &[Complex64]) -> f64 {
    let g = &problem.grid;
    let (us, ut) = derivatives(g, u);
    let mut total = 0.0;
    for i in 0..g.ns {
        for j in 0..g.nt {
            let k = g.index(i, j);
            let density = us[k].norm_sqr() + (ut[k] - problem.gradient(u[k])).norm_sqr();
            total += 0.5 * density * trapezoid_weight(g, i, j);
        }
    }
    total
}

/// Trapezoid quadrature of `½∬ |∂_s u|² + |∂_t u − ∇f_θ(u)|²`.
pub fn energy(problem: &FloerProblem, field: &FloerField) -> Result<f64> {
    check_field(problem, field)?;
    Ok(energy_of(problem, &field.values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentityReport {
    pub energy: f64,
    pub action0: f64,
    pub action1: f64,
    pub action_difference: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares `E(u)` with `A₁ − A₀`.
pub fn energy_identity_check(problem: &FloerProblem, field: &FloerField) -> Result<EnergyIdentityReport> {
    let energy = energy(problem, field)?;
    let action0 = problem.gamma0.action();
    let action1 = problem.gamma1.action();
    let action_difference = action1 - action0;
    let gap = (energy - action_difference).abs();
    let tolerance = IDENTITY_TOLERANCE * (1.0 + action0.abs() + action1.abs());
    Ok(EnergyIdentityReport {
        energy,
        action0,
        action1,
        action_difference,
        gap,
        tolerance,
        pass: gap < tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub s_half: f64,
    pub t_half: f64,
    pub ns: usize,
    pub nt: usize,
    pub energy: f64,
    pub action_difference: f64,
    pub gap: f64,
}

/// Solves on `base`, then on rectangles `2, 4, …, 2^doublings` times larger at
/// the same spacing, recording the energy-identity gap of each.
pub fn truncation_study(problem: &FloerProblem, doublings: usize) -> Result<Vec<TruncationRow>> {
    (0..=doublings)
        .map(|k| {
            let grid = problem.grid.enlarged(1 << k);
            let p = problem.with_grid(grid)?;
            let field = solve(&p)?;
            let report = energy_identity_check(&p, &field)?;
            Ok(TruncationRow {
                s_half: grid.s_half,
                t_half: grid.t_half,
                ns: grid.ns,
                nt: grid.nt,
                energy: report.energy,
                action_difference: report.action_difference,
                gap: report.gap,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolomorphyReport {
    pub admissible_nodes: usize,
    /// Mean of `c = F'(u)(∂_s u + i∂_t u)/ρ(u)` over admissible nodes.
    pub mean: Complex64,
    /// The constant the identity predicts, `i·e^{iθ}`.
    pub expected: Complex64,
    pub max_deviation: f64,
    pub max_deviation_from_expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub interior_sup: f64,
    pub boundary_sup: f64,
}

/// Checks that `∂̄(F∘u)/ρ(u)` is constant on nodes with `ρ > HOLOMORPHY_FLOOR`.
///
/// The `∂̄` of `v = F∘u` is taken through the chain rule, `F'(u)(D_s u + iD_t u)`,
/// so on a discrete solution it is exact up to the solver residual.
pub fn holomorphy_diagnostic(problem: &FloerProblem, field: &FloerField) -> Result<HolomorphyReport> {
    check_field(problem, field)?;
    let g = &problem.grid;
    let u = &field.values;
    let (us, ut) = derivatives(g, u);
    let mut cs = Vec::new();
    let mut interior_sup: f64 = 0.0;
    let mut boundary_sup: f64 = 0.0;
    for i in 0..g.ns {
        for j in 0..g.nt {
            let k = g.index(i, j);
            let v = problem.function.eval(u[k]).norm();
            if g.is_boundary(i, j) {
                boundary_sup = boundary_sup.max(v);
                continue;
            }
            interior_sup = interior_sup.max(v);
            let d1 = problem.function.d1(u[k]);
            let rho = d1.norm_sqr();
            if rho > HOLOMORPHY_FLOOR {
                cs.push(d1 * (us[k] + Complex64::i() * ut[k]) / rho);
            }
        }
    }
    let expected = Complex64::i() * cis(problem.theta);
    let n = cs.len();
    let mean = if n == 0 {
        expected
    } else {
        cs.iter().sum::<Complex64>() / n as f64
    };
    let max_deviation = cs.iter().map(|c| (c - mean).norm()).fold(0.0, f64::max);
    let max_deviation_from_expected = cs.iter().map(|c| (c - expected).norm()).fold(0.0, f64::max);
    Ok(HolomorphyReport {
        admissible_nodes: n,
        mean,
        expected,
        max_deviation,
        max_deviation_from_expected,
        tolerance: HOLOMORPHY_TOLERANCE,
        pass: max_deviation < HOLOMORPHY_TOLERANCE,
        interior_sup,
        boundary_sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub phi: f64,
    pub samples: usize,
    /// Max residual of the rotated equation at the rotated sample nodes.
    pub max_residual: f64,
    /// Max residual of the original equation at interior grid nodes.
    pub max_grid_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Max discrepancy between the two written forms of the equation at
    /// random points.
    pub form_discrepancy: f64,
}

/// Four-point Lagrange weights on nodes `−1, 0, 1, 2` at offset `x ∈ [0, 1]`.
fn cubic_weights(x: f64) -> [f64; 4] {
    [
        -x * (x - 1.0) * (x - 2.0) / 6.0,
        (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
        -(x + 1.0) * x * (x - 2.0) / 2.0,
        (x + 1.0) * x * (x - 1.0) / 6.0,
    ]
}

/// Bicubic Lagrange interpolation of up to three fields at `(s, t)`, using
/// only cells whose 4×4 stencil avoids the boundary nodes. `None` outside.
fn interpolate<const N: usize>(grid: &Grid, fields: [&[Complex64]; N], s: f64, t: f64) -> Option<[Complex64; N]> {
    let locate = |x: f64, lo: f64, h: f64, n: usize| -> Option<(usize, f64)> {
        let pos = (x - lo) / h;
        let snapped = if (pos - pos.round()).abs() < 1e-9 { pos.round() } else { pos };
        let first = 2.0;
        let last = (n - 3) as f64;
        if snapped < first || snapped > last {
            return None;
        }
        let cell = (snapped.floor() as usize).min(n - 4);
        Some((cell, snapped - cell as f64))
    };
    let (ci, fx) = locate(s, -grid.s_half, grid.ds(), grid.ns)?;
    let (cj, fy) = locate(t, -grid.t_half, grid.dt(), grid.nt)?;
    let wx = cubic_weights(fx);
    let wy = cubic_weights(fy);
    let mut out = [Complex64::new(0.0, 0.0); N];
    for (a, wa) in wx.iter().enumerate() {
        for (b, wb) in wy.iter().enumerate() {
            let k = grid.index(ci + a - 1, cj + b - 1);
            for (o, f) in out.iter_mut().zip(fields.iter()) {
                *o += f[k] * (wa * wb);
            }
        }
    }
    Some(out)
}

/// Resamples the field at grid nodes of the rotated coordinate `z′ = e^{iφ}z`
/// and evaluates `∂_{s′}u + i(∂_{t′}u − ∇f_{θ+φ}(u))` there.
///
/// Values and derivative fields are interpolated bicubically; the rotated
/// derivatives follow from the chain rule.
pub fn rotation_covariance_check(problem: &FloerProblem, field: &FloerField, phi: f64) -> Result<RotationReport> {
    check_field(problem, field)?;
    let g = &problem.grid;
    let u = &field.values;
    let (us, ut) = derivatives(g, u);
    let (sin, cos) = phi.sin_cos();
    let rot = cis(-(problem.theta + phi));
    let back = cis(-phi);
    let mut samples = 0;
    let mut max_residual: f64 = 0.0;
    for i in 0..g.ns {
        for j in 0..g.nt {
            let zp = Complex64::new(g.s(i), g.t(j));
            let z = back * zp;
            let Some([v, vs, vt]) = interpolate(g, [u, &us, &ut], z.re, z.im) else {
                continue;
            };
            let d_sp = vs * cos - vt * sin;
            let d_tp = vs * sin + vt * cos;
            let res = d_sp + Complex64::i() * (d_tp - (rot * problem.function.d1(v)).conj());
            max_residual = max_residual.max(res.norm());
            samples += 1;
        }
    }
    let max_grid_residual = residual_values(problem, u).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let form_discrepancy = witten_form_discrepancy(problem, field, 100, 0x5eed);
    let tolerance = ROTATION_TOLERANCE;
    Ok(RotationReport {
        phi,
        samples,
        max_residual,
        max_grid_residual,
        tolerance,
        pass: samples > 0 && max_residual < tolerance && form_discrepancy < 1e-12,
        form_discrepancy,
    })
}

/// Evaluates at random points both written forms of the equation:
///
/// - `E = ∂_s u + J(∂_t u − ∇f_θ)`;
/// - the `J`-antilinear form `∂̄_J u + Im(∇̄F ⊗ dz̄)` with `∇̄F = ∇f − i∇g`,
///   whose `ds` and `dt` components must equal `E` and `−J E`.
///
/// Vectors are handled as real pairs with `J` the standard matrix and `∇g_θ`
/// computed as `∇f_{θ+π/2}`. Returns the largest relative discrepancy.
pub fn witten_form_discrepancy(problem: &FloerProblem, field: &FloerField, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = standard_j();
    let scale = field.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let vec2 = |z: Complex64| nalgebra::Vector2::new(z.re, z.im);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let mut sample = || Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
        let (u, u_s, u_t) = (sample(), sample(), sample());
        let grad_f = vec2(problem.function.grad_f(problem.theta, u));
        let grad_g = vec2(problem.function.grad_f(problem.theta + PI / 2.0, u));
        let (u_s, u_t) = (vec2(u_s), vec2(u_t));
        let floer = u_s + j * (u_t - grad_f);
        // Im((∇f − i∇g)(ds − i dt)) = −∇g ds − ∇f dt.
        let witten_s = u_s + j * u_t - grad_g;
        let witten_t = u_t - j * u_s - grad_f;
        let size = 1.0 + u_s.norm() + u_t.norm() + grad_f.norm();
        let d = ((witten_s - floer).norm()).max((witten_t + j * floer).norm()) / size;
        worst = worst.max(d);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmwEnergyRow {
    pub lambda: f64,
    /// `∫_Q |du − X(u)|²` with `X = (i/2)·conj(e^{-iθ}F'(u)) dz̄`, a perturbation
    /// whose integrand is unchanged under `z → e^{iφ}z`, `F → e^{-iφ}F`.
    pub perturbed_energy: f64,
    /// `∫_Q |∇F(u)|²` with `|∇F|² = 2|F'|²`.
    pub gradient_term: f64,
    /// `∫_Q u*ω`.
    pub omega: f64,
    /// `|F(x₁) − F(x₀)|·Λ`.
    pub linear_term: f64,
}

/// The rotation-invariant energy on centered squares of side `Λ`, for
/// reporting its growth in `Λ`.
pub fn gmw_energy(problem: &FloerProblem, field: &FloerField, lambdas: &[f64]) -> Result<Vec<GmwEnergyRow>> {
    check_field(problem, field)?;
    let g = &problem.grid;
    let u = &field.values;
    let (us, ut) = derivatives(g, u);
    let rot = cis(-problem.theta);
    let value_gap = (problem.function.eval(problem.point1) - problem.function.eval(problem.point0)).norm();
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let half = 0.5 * lambda;
            let mut row = GmwEnergyRow {
                lambda,
                perturbed_energy: 0.0,
                gradient_term: 0.0,
                omega: 0.0,
                linear_term: value_gap * lambda,
            };
            let cell = g.ds() * g.dt();
            for i in 0..g.ns {
                for j in 0..g.nt {
                    if g.s(i).abs() > half + 1e-12 || g.t(j).abs() > half + 1e-12 {
                        continue;
                    }
                    let k = g.index(i, j);
                    let w = (rot * problem.function.d1(u[k])).conj();
                    let x_s = Complex64::i() * w * 0.5;
                    let x_t = w * 0.5;
                    row.perturbed_energy += ((us[k] - x_s).norm_sqr() + (ut[k] - x_t).norm_sqr()) * cell;
                    row.gradient_term += 2.0 * w.norm_sqr() * cell;
                    row.omega += (us[k].conj() * ut[k]).im * cell;
                }
            }
            row
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confidence {
    Low,
    High,
}

/// A generator of `Hom(x₀, x₁)` with its absolute grading.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradedGenerator {
    pub flowline: Flowline,
    pub grading: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M1Settings {
    pub grid: Grid,
    pub seeds: usize,
    pub seed: u64,
    /// Size of the random bumps added to the seed interpolants.
    pub bump_amplitude: f64,
}

/// Outcome of the multi-start search for one ordered generator pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M1Attempt {
    pub from: usize,
    pub to: usize,
    pub clusters: usize,
    pub coarse_clusters: usize,
    pub half_seed_clusters: usize,
    pub confidence: Confidence,
    pub failures: Vec<String>,
}

/// `m₁` on `Hom(x₀, x₁)`: `matrix[i][j]` is the coefficient of generator `i`
/// in `m₁(generator j)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M1Estimate {
    pub gradings: Vec<i64>,
    pub matrix: Vec<Vec<u8>>,
    pub confidence: Vec<Vec<Confidence>>,
    pub attempts: Vec<M1Attempt>,
}

impl M1Estimate {
    /// A matrix built from supplied counts `(from, to, count)`, all marked
    /// high confidence.
    pub fn from_counts(gradings: Vec<i64>, counts: &[(usize, usize, u64)]) -> Result<Self> {
        let n = gradings.len();
        let mut matrix = vec![vec![0u8; n]; n];
        for &(from, to, count) in counts {
            if from >= n || to >= n {
                return Err(Error::Precondition(format!("generator pair ({from}, {to}) out of range")));
            }
            matrix[to][from] = (count % 2) as u8;
        }
        Ok(M1Estimate {
            gradings,
            matrix,
            confidence: vec![vec![Confidence::High; n]; n],
            attempts: Vec::new(),
        })
    }
}

/// Multi-start solves of the strip problem between two generators, counted
/// by clusters of converged fields. Only pairs whose gradings differ by one
/// are attempted; solver failures are recorded, never fatal.
pub fn m1_estimate(
    f: &HolomorphicFunction,
    crit: &[CriticalDatum],
    generators: &[GradedGenerator],
    settings: &M1Settings,
) -> Result<M1Estimate> {
    let n = generators.len();
    let gradings: Vec<i64> = generators.iter().map(|g| g.grading).collect();
    let mut matrix = vec![vec![0u8; n]; n];
    let mut confidence = vec![vec![Confidence::High; n]; n];
    let mut attempts = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if gradings[to] - gradings[from] != 1 {
                continue;
            }
            let a = &generators[from].flowline;
            let b = &generators[to].flowline;
            let problem = FloerProblem::new(
                f,
                crit,
                a.theta,
                Asymptote::Flowline(Box::new(a.clone())),
                Asymptote::Flowline(Box::new(b.clone())),
                settings.grid,
            )?;
            let attempt = count_pair(&problem, settings, from, to);
            matrix[to][from] = (attempt.clusters % 2) as u8;
            confidence[to][from] = attempt.confidence;
            attempts.push(attempt);
        }
    }
    Ok(M1Estimate {
        gradings,
        matrix,
        confidence,
        attempts,
    })
}

fn count_pair(problem: &FloerProblem, settings: &M1Settings, from: usize, to: usize) -> M1Attempt {
    let (clusters, mut failures) = multistart_clusters(problem, settings.seeds, settings.seed, settings.bump_amplitude);
    let half = settings.seeds.div_ceil(2);
    let (half_seed_clusters, _) = multistart_clusters(problem, half, settings.seed, settings.bump_amplitude);
    let coarse_grid = Grid {
        ns: (settings.grid.ns / 2).max(MIN_NODES),
        nt: (settings.grid.nt / 2).max(MIN_NODES),
        ..settings.grid
    };
    let coarse_clusters = match problem.with_grid(coarse_grid) {
        Ok(p) => {
            let (c, f) = multistart_clusters(&p, settings.seeds, settings.seed, settings.bump_amplitude);
            failures.extend(f.into_iter().map(|e| format!("coarse: {e}")));
            c
        }
        Err(e) => {
            failures.push(e.to_string());
            usize::MAX
        }
    };
    let stable = clusters == half_seed_clusters && clusters == coarse_clusters;
    M1Attempt {
        from,
        to,
        clusters,
        coarse_clusters,
        half_seed_clusters,
        confidence: if stable { Confidence::High } else { Confidence::Low },
        failures,
    }
}

/// Converged solutions from `seeds` randomized starts, grouped by relative
/// `L²` distance. Returns the cluster count and the per-seed failures.
pub fn multistart_clusters(problem: &FloerProblem, seeds: usize, seed: u64, amplitude: f64) -> (usize, Vec<String>) {
    let g = problem.grid;
    let base = problem.initial_guess();
    let results: Vec<Result<FloerField>> = (0..seeds)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut start = base.clone();
            if k > 0 {
                add_random_bumps(&g, &mut start, &mut rng, amplitude);
            }
            solve_from(problem, start, &SolverSettings::default())
        })
        .collect();
    let mut representatives: Vec<Vec<Complex64>> = Vec::new();
    let mut failures = Vec::new();
    for (k, result) in results.into_iter().enumerate() {
        match result {
            Ok(field) => {
                let scale = norm(&field.values).max(1.0);
                let known = representatives.iter().any(|r| {
                    let d: Vec<Complex64> = r.iter().zip(&field.values).map(|(a, b)| a - b).collect();
                    norm(&d) < 1e-4 * scale
                });
                if !known {
                    representatives.push(field.values);
                }
            }
            Err(e) => failures.push(format!("seed {k}: {e}")),
        }
    }
    (representatives.len(), failures)
}

fn add_random_bumps(grid: &Grid, values: &mut [Complex64], rng: &mut ChaCha8Rng, amplitude: f64) {
    for _ in 0..3 {
        let cs = rng.gen_range(-0.5..0.5) * grid.s_half;
        let ct = rng.gen_range(-0.5..0.5) * grid.t_half;
        let width = rng.gen_range(0.1..0.3) * grid.s_half.min(grid.t_half);
        let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amplitude;
        for i in 1..grid.ns - 1 {
            for j in 1..grid.nt - 1 {
                let r2 = ((grid.s(i) - cs).powi(2) + (grid.t(j) - ct).powi(2)) / (width * width);
                values[grid.index(i, j)] += a * (-r2).exp();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{find_connections, ShootingConfig};
    use crate::landscape::critical_points;
    use crate::Tolerances;

    fn cubic_setup() -> (HolomorphicFunction, Vec<CriticalDatum>, Flowline) {
        let f = HolomorphicFunction::cubic_example();
        let tol = Tolerances::default();
        let crit = critical_points(&f, &tol).unwrap();
        let config = ShootingConfig::for_critical_points(&crit, &tol);
        let c = find_connections(&f, &crit, 0, 1, &config, &tol)
            .or_else(|_| find_connections(&f, &crit, 1, 0, &config, &tol))
            .unwrap();
        let gamma = c.flowlines[0].clone();
        (f, crit, gamma)
    }

    #[test]
    fn grid_rejects_small_counts() {
        assert!(matches!(Grid::new(1.0, 1.0, 8, 32), Err(Error::Precondition(_))));
        assert!(matches!(Grid::new(1.0, 1.0, 33, 32), Err(Error::Precondition(_))));
        let g = Grid::square(3.0, 32).unwrap();
        let big = g.enlarged(2);
        assert!((big.ds() / g.ds() - 1.0).abs() < 0.02);
        assert_eq!(big.ns, 64);
    }

    #[test]
    fn constant_field_has_zero_residual_and_energy() {
        let (f, crit, _) = cubic_setup();
        let p = FloerProblem::constant(&f, &crit, 0, 0.3, Grid::square(3.0, 24).unwrap()).unwrap();
        let field = solve(&p).unwrap();
        assert_eq!(field.iterations, 0);
        assert!(field.residual_norm < 1e-12);
        assert!(field.energy.abs() < 1e-20);
        let h = holomorphy_diagnostic(&p, &field).unwrap();
        assert_eq!(h.admissible_nodes, 0);
        assert!(h.pass);
    }

    #[test]
    fn mismatched_angle_is_rejected() {
        let (f, crit, gamma) = cubic_setup();
        let a = Asymptote::Flowline(Box::new(gamma.clone()));
        let err = FloerProblem::new(&f, &crit, gamma.theta + 0.1, a.clone(), a, Grid::square(5.0, 32).unwrap());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, 32).unwrap()).unwrap();
        let q = p.with_grid(Grid::square(5.0, 40).unwrap()).unwrap();
        let field = FloerField::from_values(&q, q.initial_guess()).unwrap();
        assert!(matches!(residual(&p, &field), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn random_field_has_nonzero_residual() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, 32).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<Complex64> = (0..p.grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let field = FloerField::from_values(&p, values).unwrap();
        let r = residual(&p, &field).unwrap();
        assert!(norm(&r) > 1.0);
        assert!(r[0].norm() == 0.0);
    }

    #[test]
    fn linearization_adjoint_passes_dot_product_test() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::new(4.0, 5.0, 20, 24).unwrap()).unwrap();
        let g = p.grid;
        let rot = cis(-p.theta);
        let u = p.initial_guess();
        let op = Linearization {
            grid: &g,
            a: u.iter().map(|&z| rot * f.d2(z)).collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut random = || -> Vec<Complex64> {
            (0..g.len())
                .map(|k| {
                    let (i, j) = (k / g.nt, k % g.nt);
                    if g.is_boundary(i, j) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    }
                })
                .collect()
        };
        let (x, y) = (random(), random());
        let mut jx = vec![Complex64::new(0.0, 0.0); g.len()];
        let mut jty = jx.clone();
        op.apply(&x, &mut jx);
        op.apply_adjoint(&y, &mut jty);
        let lhs = dot(&jx, &y);
        let rhs = dot(&x, &jty);
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn s_independent_interpolant_has_second_order_residual() {
        let (f, crit, gamma) = cubic_setup();
        let mut errors = Vec::new();
        for n in [64, 128, 256] {
            let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, n).unwrap()).unwrap();
            let field = FloerField::s_independent(&p, &p.gamma0).unwrap();
            let r = residual(&p, &field).unwrap();
            errors.push(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{errors:?}");
        }
    }

    #[test]
    fn trivial_problem_converges_to_s_independent_solution() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, 64).unwrap()).unwrap();
        let field = solve(&p).unwrap();
        assert!(field.solved);
        assert!(field.residual_norm < RESIDUAL_FACTOR * (p.grid.len() as f64).sqrt());
        let g = p.grid;
        let mut worst: f64 = 0.0;
        for i in 0..g.ns {
            for j in 0..g.nt {
                worst = worst.max((field.value(i, j) - gamma.position(g.t(j))).norm());
            }
        }
        assert!(worst < 1e-2, "{worst}");
        let id = energy_identity_check(&p, &field).unwrap();
        assert!(id.pass, "{id:?}");
        let h = holomorphy_diagnostic(&p, &field).unwrap();
        assert!(h.pass, "{h:?}");
        assert!(h.admissible_nodes > 0);
    }

    #[test]
    fn energy_is_quadratic_in_a_bump() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, 64).unwrap()).unwrap();
        let base = solve(&p).unwrap();
        let g = p.grid;
        let bumped = |eps: f64| {
            let mut v = base.values.clone();
            for i in 1..g.ns - 1 {
                for j in 1..g.nt - 1 {
                    let r2 = g.s(i).powi(2) + g.t(j).powi(2);
                    v[g.index(i, j)] += Complex64::new(eps, 0.5 * eps) * (-r2).exp();
                }
            }
            FloerField::from_values(&p, v).unwrap().energy - base.energy
        };
        let (e1, e2) = (bumped(1e-2), bumped(2e-2));
        assert!(e1 > 0.0);
        assert!((e2 / e1 - 4.0).abs() < 0.05, "{e1} {e2}");
    }

    #[test]
    fn perturbed_field_fails_holomorphy() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, 64).unwrap()).unwrap();
        let mut field = solve(&p).unwrap();
        let g = p.grid;
        for i in 1..g.ns - 1 {
            for j in 1..g.nt - 1 {
                let r2 = g.s(i).powi(2) + g.t(j).powi(2);
                field.values[g.index(i, j)] += Complex64::new(0.05, 0.0) * (-r2).exp();
            }
        }
        assert!(!holomorphy_diagnostic(&p, &field).unwrap().pass);
    }

    #[test]
    fn zero_rotation_reproduces_the_grid_residual() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, 48).unwrap()).unwrap();
        let field = FloerField::s_independent(&p, &p.gamma0).unwrap();
        let report = rotation_covariance_check(&p, &field, 0.0).unwrap();
        let r = residual(&p, &field).unwrap();
        let g = p.grid;
        let mut inner: f64 = 0.0;
        for i in 2..g.ns - 2 {
            for j in 2..g.nt - 2 {
                inner = inner.max(r[g.index(i, j)].norm());
            }
        }
        assert!((report.max_residual - inner).abs() < 1e-12);
        assert!(report.form_discrepancy < 1e-12);
    }

    #[test]
    fn target_rotation_rotates_the_solution() {
        let (f, crit, gamma) = cubic_setup();
        let grid = Grid::square(5.0, 48).unwrap();
        let p = FloerProblem::trivial(&f, &crit, &gamma, grid).unwrap();
        let field = solve(&p).unwrap();

        let psi = 0.7;
        let w = cis(psi);
        let tol = Tolerances::default();
        let f2 = f.precomposed_with_scaling(w.inv());
        let crit2 = critical_points(&f2, &tol).unwrap();
        let config = ShootingConfig::for_critical_points(&crit2, &tol);
        let target = crit2.iter().position(|c| (c.point - w * gamma.target_point).norm() < 1e-8).unwrap();
        let source = crit2.iter().position(|c| (c.point - w * gamma.source_point).norm() < 1e-8).unwrap();
        let gamma2 = find_connections(&f2, &crit2, source, target, &config, &tol).unwrap().flowlines[0].clone();
        let p2 = FloerProblem::trivial(&f2, &crit2, &gamma2, grid).unwrap();
        let field2 = solve(&p2).unwrap();
        let worst = field
            .values
            .iter()
            .zip(&field2.values)
            .map(|(a, b)| (w * a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn multistart_finds_one_trivial_solution() {
        let (f, crit, gamma) = cubic_setup();
        let p = FloerProblem::trivial(&f, &crit, &gamma, Grid::square(5.0, 32).unwrap()).unwrap();
        let (clusters, failures) = multistart_clusters(&p, 4, 1, 0.05);
        assert!(failures.is_empty(), "{failures:?}");
        assert_eq!(clusters, 1);
    }

    #[test]
    fn m1_of_single_generator_is_zero() {
        let (f, crit, gamma) = cubic_setup();
        let settings = M1Settings {
            grid: Grid::square(5.0, 32).unwrap(),
            seeds: 2,
            seed: 0,
            bump_amplitude: 0.05,
        };
        let gens = [GradedGenerator {
            flowline: gamma,
            grading: 0,
        }];
        let m = m1_estimate(&f, &crit, &gens, &settings).unwrap();
        assert_eq!(m.matrix, vec![vec![0]]);
        assert!(m.attempts.is_empty());
    }

    #[test]
    fn equal_gradings_are_not_attempted() {
        let (f, crit, gamma) = cubic_setup();
        let settings = M1Settings {
            grid: Grid::square(5.0, 32).unwrap(),
            seeds: 2,
            seed: 0,
            bump_amplitude: 0.05,
        };
        let gens = [
            GradedGenerator {
                flowline: gamma.clone(),
                grading: 0,
            },
            GradedGenerator {
                flowline: gamma,
                grading: 0,
            },
        ];
        let m = m1_estimate(&f, &crit, &gens, &settings).unwrap();
        assert_eq!(m.matrix, vec![vec![0, 0], vec![0, 0]]);
        assert!(m.attempts.is_empty());
    }

    #[test]
    fn supplied_counts_pass_through() {
        let m = M1Estimate::from_counts(vec![0, 1], &[(0, 1, 1)]).unwrap();
        assert_eq!(m.matrix, vec![vec![0, 0], vec![1, 0]]);
    }
}
