//! The linearization `v̇ = ∇²f_θ(γ(t)) v` along a flowline, its symplectic
//! transport map `φ_γ`, the nondegeneracy test, and absolute gradings from
//! the winding of transported Lagrangian lines.
//!
//! A line in ℝ² is tracked by an unwrapped angle, so a path of lines is a
//! real function defined modulo a global multiple of π. Gradings count how
//! many π-sheets the transported line crosses on its way from `Δ̃_x` to `Δ̃_y`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Flowline, SeparableFlowline};
use crate::landscape::CriticalDatum;
use crate::poly::{cis, hessian_from_second_derivative, standard_j};

/// Bound on the condition number of a transport map.
pub const CONDITION_BOUND: f64 = 1e12;
/// Target for `‖H(t) − H(±∞)‖` at the ends of the transport window.
pub const WINDOW_HESSIAN_TOLERANCE: f64 = 1e-8;
/// Principal angles below this count as equal lines.
pub const ANGLE_AGREE: f64 = 1e-6;
/// Principal angles above this count as distinct lines.
pub const ANGLE_DISAGREE: f64 = 1e-3;
/// Node spacing on the exponential tails of the window.
const TAIL_SPACING: f64 = 0.05;
/// Largest entry the raw fundamental matrix may reach anywhere inside the
/// window on which `φ_γ` is evaluated. Beyond this, cancellation between
/// growing and decaying solutions swamps the symplectic invariants.
pub const PHI_GROWTH_BUDGET: f64 = 1e4;
/// End radii tried, in order, for the `φ_γ` window.
const PHI_RADII: [f64; 6] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
pub const DEFAULT_SUBSTEPS: usize = 4;

/// Label recorded with every grading.
pub const GRADING_CONVENTION: &str =
    "kernel v' = Hess(f_theta) v; Delta_x = negative eigenline; closing path clockwise through (-pi, 0]; lift Delta~ = beta + k*pi";

#[derive(Debug, Clone)]
enum HessianSource {
    Flowline {
        flowline: Box<Flowline>,
        /// Hessian of the frozen component of a separable connection, with
        /// the block position of the moving component.
        frozen: Option<(usize, Matrix2<f64>)>,
    },
    Constant(DMatrix<f64>),
}

/// `v̇ = H(t) v` on a finite window, with the Hessian sampled at the nodes
/// used for transport.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub dim: usize,
    /// Ends where the Hessian has settled to its limits; lines and
    /// subspaces are tracked over this window.
    pub window: (f64, f64),
    /// Sub-window on which the raw fundamental matrix `φ_γ` is formed.
    pub phi_window: (f64, f64),
    pub sample_times: Vec<f64>,
    pub hessian_samples: Vec<DMatrix<f64>>,
    pub j: DMatrix<f64>,
    /// First coordinate of the 2×2 block carrying the flowline.
    pub moving_block: usize,
    source: HessianSource,
}

fn block_j(dim: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(dim, dim);
    let j2 = standard_j();
    for b in (0..dim).step_by(2) {
        j.view_mut((b, b), (2, 2)).copy_from(&j2);
    }
    j
}

fn tail_nodes(from: f64, to: f64) -> Vec<f64> {
    let n = ((to - from).abs() / TAIL_SPACING).ceil().max(1.0) as usize;
    (0..n).map(|k| from + (to - from) * k as f64 / n as f64).collect()
}

impl LinearizedSystem {
    fn build(source: HessianSource, dim: usize, moving_block: usize, window: (f64, f64), interior: Vec<f64>) -> Self {
        let mut times = Vec::new();
        if let Some(&first) = interior.first() {
            times.extend(tail_nodes(window.0, first));
            times.extend(interior.iter().copied());
            let last = *interior.last().unwrap();
            let mut tail = tail_nodes(last, window.1);
            tail.remove(0);
            times.extend(tail);
            times.push(window.1);
        } else {
            times.extend(tail_nodes(window.0, window.1));
            times.push(window.1);
        }
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut system = Self {
            dim,
            window,
            phi_window: window,
            sample_times: times,
            hessian_samples: Vec::new(),
            j: block_j(dim),
            moving_block,
            source,
        };
        system.hessian_samples = system.sample_times.iter().map(|&t| system.hessian(t)).collect();
        system
    }

    /// Picks the widest window, starting from the settled one and stepping
    /// the end radii up by decades, on which the raw transport stays within
    /// [`PHI_GROWTH_BUDGET`].
    fn choose_phi_window(&mut self, substeps: usize) -> Result<()> {
        let Some(fl) = self.flowline().cloned() else {
            return Ok(());
        };
        let mut candidates = vec![self.window];
        candidates.extend(PHI_RADII.iter().map(|&r| fl.window_for_radius(r)));
        let identity = DMatrix::identity(self.dim, self.dim);
        for &(a, b) in &candidates {
            let (a, b) = (a.max(self.window.0), b.min(self.window.1));
            if b <= a {
                continue;
            }
            let (_, states) = propagate(self, &identity, a, b, substeps)?;
            let growth = states.iter().map(|v| v.abs().max()).fold(0.0, f64::max);
            self.phi_window = (a, b);
            if growth <= PHI_GROWTH_BUDGET {
                break;
            }
        }
        Ok(())
    }

    /// A system with constant `H` on `[t0, t1]`.
    pub fn constant(h: DMatrix<f64>, window: (f64, f64)) -> Result<Self> {
        let dim = h.nrows();
        if dim == 0 || dim % 2 != 0 || h.ncols() != dim {
            return Err(Error::ShapeMismatch {
                expected: (dim + dim % 2, dim + dim % 2),
                got: (h.nrows(), h.ncols()),
            });
        }
        if !(window.1 > window.0) {
            return Err(Error::Precondition("empty window".into()));
        }
        Ok(Self::build(HessianSource::Constant(h), dim, 0, window, Vec::new()))
    }

    pub fn hessian(&self, t: f64) -> DMatrix<f64> {
        match &self.source {
            HessianSource::Constant(h) => h.clone(),
            HessianSource::Flowline { flowline, frozen } => {
                let z = flowline.position(t);
                let h2 = cis(-flowline.theta) * flowline.function.d2(z);
                let moving = hessian_from_second_derivative(h2);
                match frozen {
                    None => DMatrix::from_column_slice(2, 2, moving.as_slice()),
                    Some((block, fixed)) => {
                        let mut h = DMatrix::zeros(4, 4);
                        h.view_mut((*block, *block), (2, 2)).copy_from(&moving);
                        let other = 2 - block;
                        h.view_mut((other, other), (2, 2)).copy_from(fixed);
                        h
                    }
                }
            }
        }
    }

    /// `γ̇(t) = ∇f_θ(γ(t))` embedded in the state space, if the system comes
    /// from a flowline.
    pub fn velocity(&self, t: f64) -> Option<DVector<f64>> {
        match &self.source {
            HessianSource::Constant(_) => None,
            HessianSource::Flowline { flowline, .. } => {
                let v = flowline.function.grad_f(flowline.theta, flowline.position(t));
                let mut out = DVector::zeros(self.dim);
                out[self.moving_block] = v.re;
                out[self.moving_block + 1] = v.im;
                Some(out)
            }
        }
    }

    pub fn flowline(&self) -> Option<&Flowline> {
        match &self.source {
            HessianSource::Flowline { flowline, .. } => Some(flowline),
            HessianSource::Constant(_) => None,
        }
    }

    /// `max_t ‖J H(t) + H(t) J‖`.
    pub fn max_anticommutator(&self) -> f64 {
        self.hessian_samples
            .iter()
            .map(|h| (&self.j * h + h * &self.j).abs().max())
            .fold(0.0, f64::max)
    }

    /// `max_t max(|tr H(t)| on each 2×2 block, ‖H − Hᵀ‖)`.
    pub fn max_trace_and_asymmetry(&self) -> f64 {
        self.hessian_samples
            .iter()
            .map(|h| {
                let asym = (h - h.transpose()).abs().max();
                let trace = (0..self.dim)
                    .step_by(2)
                    .map(|b| (h[(b, b)] + h[(b + 1, b + 1)]).abs())
                    .fold(0.0, f64::max);
                asym.max(trace)
            })
            .fold(0.0, f64::max)
    }

    /// Max over interior samples of `|d/dt γ̇ − H γ̇|`, the time derivative
    /// taken as a central difference of the gradient field along `γ̇`.
    pub fn kernel_residual(&self, delta: f64) -> Option<f64> {
        let HessianSource::Flowline { flowline, .. } = &self.source else {
            return None;
        };
        let f = &flowline.function;
        let theta = flowline.theta;
        let mut worst: f64 = 0.0;
        for s in &flowline.samples {
            let dv = (f.grad_f(theta, s.z + s.v * delta) - f.grad_f(theta, s.z - s.v * delta)) / (2.0 * delta);
            let h = hessian_from_second_derivative(cis(-theta) * f.d2(s.z));
            let hv = h * nalgebra::Vector2::new(s.v.re, s.v.im);
            worst = worst.max(((dv.re - hv.x).powi(2) + (dv.im - hv.y).powi(2)).sqrt());
        }
        Some(worst)
    }
}

fn window_radius(f: &crate::poly::HolomorphicFunction, z: num_complex::Complex64) -> f64 {
    WINDOW_HESSIAN_TOLERANCE / (1.0 + f.jet(z).d3.norm())
}

/// The linearization along an accepted flowline, on a window whose ends lie
/// where the Hessian has settled to its limits.
pub fn linearized_system(flowline: &Flowline) -> Result<LinearizedSystem> {
    if flowline.samples.len() < 2 {
        return Err(Error::Precondition("flowline has fewer than two samples".into()));
    }
    let r0 = window_radius(&flowline.function, flowline.source_point);
    let r1 = window_radius(&flowline.function, flowline.target_point);
    let (w0, _) = flowline.window_for_radius(r0);
    let (_, w1) = flowline.window_for_radius(r1);
    let interior: Vec<f64> = flowline.samples.iter().map(|s| s.t).collect();
    let mut system = LinearizedSystem::build(
        HessianSource::Flowline {
            flowline: Box::new(flowline.clone()),
            frozen: None,
        },
        2,
        0,
        (w0, w1),
        interior,
    );
    system.choose_phi_window(DEFAULT_SUBSTEPS)?;
    Ok(system)
}

/// The block-diagonal linearization of a separable connection on ℂ².
pub fn linearized_separable(connection: &SeparableFlowline) -> Result<LinearizedSystem> {
    let base = linearized_system(&connection.flowline)?;
    let fixed = hessian_from_second_derivative(cis(-connection.flowline.theta) * connection.frozen_hessian);
    let block = 2 * connection.moving;
    let interior: Vec<f64> = connection.flowline.samples.iter().map(|s| s.t).collect();
    let mut system = LinearizedSystem::build(
        HessianSource::Flowline {
            flowline: Box::new(connection.flowline.clone()),
            frozen: Some((block, fixed)),
        },
        4,
        block,
        base.window,
        interior,
    );
    system.choose_phi_window(DEFAULT_SUBSTEPS)?;
    Ok(system)
}

/// Two-stage Gauss–Legendre step for `V̇ = H(t) V` from `t` to `t + h`
/// (`h` may be negative). The method is symplectic, so `ω` and `det` are
/// preserved up to roundoff.
fn gauss_step(system: &LinearizedSystem, v: &DMatrix<f64>, t: f64, h: f64) -> Result<DMatrix<f64>> {
    let s3 = 3f64.sqrt() / 6.0;
    let (c1, c2) = (0.5 - s3, 0.5 + s3);
    let (a11, a12, a21, a22) = (0.25, 0.25 - s3, 0.25 + s3, 0.25);
    let d = system.dim;
    let h1 = system.hessian(t + c1 * h);
    let h2 = system.hessian(t + c2 * h);
    let mut m = DMatrix::<f64>::identity(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).zip_apply(&(&h1 * (-h * a11)), |x, y| *x += y);
    m.view_mut((0, d), (d, d)).zip_apply(&(&h1 * (-h * a12)), |x, y| *x += y);
    m.view_mut((d, 0), (d, d)).zip_apply(&(&h2 * (-h * a21)), |x, y| *x += y);
    m.view_mut((d, d), (d, d)).zip_apply(&(&h2 * (-h * a22)), |x, y| *x += y);
    let mut rhs = DMatrix::zeros(2 * d, v.ncols());
    rhs.view_mut((0, 0), (d, v.ncols())).copy_from(&(&h1 * v));
    rhs.view_mut((d, 0), (d, v.ncols())).copy_from(&(&h2 * v));
    let k = m.lu().solve(&rhs).ok_or_else(|| Error::StepFailure {
        t,
        reason: "singular collocation system".into(),
    })?;
    let k1 = k.view((0, 0), (d, v.ncols()));
    let k2 = k.view((d, 0), (d, v.ncols()));
    Ok(v + (k1 + k2) * (0.5 * h))
}

/// Nodes of the system grid strictly between `a` and `b`, ordered from `a`.
fn path_nodes(system: &LinearizedSystem, a: f64, b: f64) -> Vec<f64> {
    let (lo, hi) = (a.min(b), a.max(b));
    let mut nodes: Vec<f64> = system
        .sample_times
        .iter()
        .copied()
        .filter(|&t| t > lo + 1e-14 && t < hi - 1e-14)
        .collect();
    if a > b {
        nodes.reverse();
    }
    let mut out = vec![a];
    out.extend(nodes);
    out.push(b);
    out
}

/// Transports the columns of `v0` from `a` to `b`, returning the state at
/// every node passed.
pub fn propagate(
    system: &LinearizedSystem,
    v0: &DMatrix<f64>,
    a: f64,
    b: f64,
    substeps: usize,
) -> Result<(Vec<f64>, Vec<DMatrix<f64>>)> {
    if v0.nrows() != system.dim {
        return Err(Error::ShapeMismatch {
            expected: (system.dim, v0.ncols()),
            got: (v0.nrows(), v0.ncols()),
        });
    }
    let substeps = substeps.max(1);
    let nodes = path_nodes(system, a, b);
    let mut states = vec![v0.clone()];
    let mut v = v0.clone();
    for w in nodes.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for k in 0..substeps {
            v = gauss_step(system, &v, w[0] + k as f64 * h, h)?;
        }
        states.push(v.clone());
    }
    Ok((nodes, states))
}

/// Like [`propagate`], but re-orthonormalizes the columns at every node, so
/// only the spanned subspace is transported. Safe over windows of any length.
pub fn propagate_span(
    system: &LinearizedSystem,
    basis: &DMatrix<f64>,
    a: f64,
    b: f64,
    substeps: usize,
) -> Result<(Vec<f64>, Vec<DMatrix<f64>>)> {
    if basis.nrows() != system.dim {
        return Err(Error::ShapeMismatch {
            expected: (system.dim, basis.ncols()),
            got: (basis.nrows(), basis.ncols()),
        });
    }
    let substeps = substeps.max(1);
    let nodes = path_nodes(system, a, b);
    let mut v = orthonormal(basis);
    let mut states = vec![v.clone()];
    for w in nodes.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for k in 0..substeps {
            v = gauss_step(system, &v, w[0] + k as f64 * h, h)?;
        }
        v = orthonormal(&v);
        states.push(v.clone());
    }
    Ok((nodes, states))
}

fn omega(j: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    v.transpose() * j * v
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn line_angle(x: f64, y: f64) -> f64 {
    y.atan2(x)
}

/// Representative of `angle` modulo π closest to `reference`.
pub fn nearest_mod_pi(angle: f64, reference: f64) -> f64 {
    angle - ((angle - reference) / PI).round() * PI
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportFrame {
    /// `φ_γ` in the flat frame, row-major.
    pub phi: Vec<Vec<f64>>,
    pub phi_window: (f64, f64),
    pub times: Vec<f64>,
    /// Unwrapped angle of the transported line `Δ_x` at each time.
    pub lagrangian_path: Vec<f64>,
    pub det_error: f64,
    /// `max_t |ω(v₁, v₂)(t) − ω(v₁, v₂)(t₀)|` over basis solution pairs.
    pub omega_drift: f64,
    pub condition: f64,
    pub substeps: usize,
}

impl TransportFrame {
    pub fn phi_matrix(&self) -> DMatrix<f64> {
        let n = self.phi.len();
        DMatrix::from_fn(n, n, |i, j| self.phi[i][j])
    }

    /// The path angles reduced to `[0, π)`.
    pub fn wrapped_path(&self) -> Vec<f64> {
        self.lagrangian_path.iter().map(|a| a.rem_euclid(PI)).collect()
    }
}

/// `φ_γ` over the system's `phi_window`, and the line of `initial_line` (an
/// angle in the moving block) tracked over the full window.
pub fn transport_with_line(system: &LinearizedSystem, initial_line: f64, substeps: usize) -> Result<TransportFrame> {
    let d = system.dim;
    let (pa, pb) = system.phi_window;
    let (_, states) = propagate(system, &DMatrix::identity(d, d), pa, pb, substeps)?;
    let omega0 = omega(&system.j, &states[0]);
    let omega_drift = states
        .iter()
        .map(|v| (omega(&system.j, v) - &omega0).abs().max())
        .fold(0.0, f64::max);
    let phi = states.last().unwrap().clone();
    let condition = condition_number(&phi);
    if condition > CONDITION_BOUND {
        return Err(Error::IllConditioned {
            condition,
            bound: CONDITION_BOUND,
        });
    }

    let mut e = DVector::zeros(d);
    e[system.moving_block] = initial_line.cos();
    e[system.moving_block + 1] = initial_line.sin();
    let (a, b) = system.window;
    let (times, lines) = propagate_span(system, &DMatrix::from_columns(&[e]), a, b, substeps)?;
    let mut path = Vec::with_capacity(lines.len());
    let mut previous = initial_line;
    for w in &lines {
        let raw = line_angle(w[system.moving_block], w[system.moving_block + 1]);
        let angle = nearest_mod_pi(raw, previous);
        if (angle - previous).abs() > PI / 4.0 {
            return Err(Error::AngularResolutionExceeded {
                angle: (angle - previous).abs(),
            });
        }
        path.push(angle);
        previous = angle;
    }
    Ok(TransportFrame {
        phi: (0..d).map(|i| (0..d).map(|j| phi[(i, j)]).collect()).collect(),
        phi_window: system.phi_window,
        times,
        lagrangian_path: path,
        det_error: (phi.determinant() - 1.0).abs(),
        omega_drift,
        condition,
        substeps,
    })
}

/// Transport over the system window, tracking the line `Δ_x` for a flowline
/// system and the first coordinate axis otherwise.
pub fn transport_matrix(system: &LinearizedSystem) -> Result<TransportFrame> {
    transport_matrix_with_substeps(system, DEFAULT_SUBSTEPS)
}

pub fn transport_matrix_with_substeps(system: &LinearizedSystem, substeps: usize) -> Result<TransportFrame> {
    let line = match system.flowline() {
        Some(fl) => source_lagrangian(fl),
        None => 0.0,
    };
    transport_with_line(system, line, substeps)
}

fn source_lagrangian(fl: &Flowline) -> f64 {
    lagrangian_angle(fl.function.d2(fl.source_point), fl.theta)
}

fn target_lagrangian(fl: &Flowline) -> f64 {
    lagrangian_angle(fl.function.d2(fl.target_point), fl.theta)
}

fn lagrangian_angle(hessian: num_complex::Complex64, theta: f64) -> f64 {
    (0.5 * (PI + theta - hessian.arg())).rem_euclid(PI)
}

/// `Δ_x`: the negative eigenline of `∇²f_θ(x)`, as an angle `β ∈ [0, π)`
/// with `2β ≡ π + θ − arg F''(x)`.
pub fn distinguished_lagrangian(x: &CriticalDatum, theta: f64) -> Result<f64> {
    if x.hessian.norm() == 0.0 || !x.hessian.is_finite() {
        return Err(Error::NonMorse {
            point: x.point,
            hessian_norm: x.hessian.norm(),
        });
    }
    Ok(lagrangian_angle(x.hessian, theta))
}

/// Signed count of the crossings `a(t) ≡ b(t) (mod π)` along a path of
/// unwrapped line angles.
pub fn maslov_index(path: &[(f64, f64)]) -> Result<i64> {
    const TANGENCY: f64 = 1e-12;
    let (Some(first), Some(last)) = (path.first(), path.last()) else {
        return Err(Error::Precondition("empty path".into()));
    };
    for (a, b) in [first, last] {
        let r = (a - b).rem_euclid(PI);
        if r < TANGENCY || PI - r < TANGENCY {
            return Err(Error::EndpointTangency);
        }
    }
    let mut index = 0i64;
    for w in path.windows(2) {
        let d0 = w[0].0 - w[0].1;
        let d1 = w[1].0 - w[1].1;
        index += (d1 / PI).floor() as i64 - (d0 / PI).floor() as i64;
    }
    Ok(index)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub nondegenerate: bool,
    /// Dimension of `T U_x ∩ T S_y` at the comparison time.
    pub intersection_dim: usize,
    pub principal_angles: Vec<f64>,
    /// Angles from `γ̇(t₀)` to the transported unstable and stable spaces.
    pub velocity_angles: Option<(f64, f64)>,
    pub t0: f64,
}

/// Eigenvectors of a symmetric matrix whose eigenvalues satisfy `keep`.
fn eigenspace(h: &DMatrix<f64>, keep: impl Fn(f64) -> bool) -> DMatrix<f64> {
    let eig = h.clone().symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..h.nrows())
        .filter(|&k| keep(eig.eigenvalues[k]))
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(h.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn orthonormal(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    m.clone().qr().q().columns(0, m.ncols()).into_owned()
}

fn angle_to_span(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if q.ncols() == 0 {
        return FRAC_PI_2;
    }
    let proj = q.transpose() * v;
    (proj.norm() / v.norm()).clamp(0.0, 1.0).acos()
}

/// Transports the unstable-plus-center space at the start of the window
/// forward and the stable-plus-center space at the end backward, and
/// compares them at `t₀ = 0` (clamped into the window).
pub fn nondegenerate(system: &LinearizedSystem) -> Result<NondegeneracyReport> {
    nondegenerate_with_substeps(system, DEFAULT_SUBSTEPS)
}

pub fn nondegenerate_with_substeps(system: &LinearizedSystem, substeps: usize) -> Result<NondegeneracyReport> {
    let (a, b) = system.window;
    // For a flowline compare at the sample nearest t = 0, where the stored
    // velocity is the field itself rather than an interpolant.
    let t0 = match system.flowline() {
        Some(fl) => fl
            .samples
            .iter()
            .map(|s| s.t)
            .min_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap_or(0.0),
        None => 0.0,
    }
    .clamp(a, b);
    let h_start = system.hessian(a);
    let h_end = system.hessian(b);
    let eps = 1e-9 * (1.0 + h_start.abs().max().max(h_end.abs().max()));
    let u0 = eigenspace(&h_start, |l| l > -eps);
    let s0 = eigenspace(&h_end, |l| l < eps);
    let u = if u0.ncols() > 0 {
        propagate_span(system, &u0, a, t0, substeps)?.1.pop().unwrap()
    } else {
        u0
    };
    let s = if s0.ncols() > 0 {
        propagate_span(system, &s0, b, t0, substeps)?.1.pop().unwrap()
    } else {
        s0
    };
    let qu = orthonormal(&u);
    let qs = orthonormal(&s);
    let principal_angles: Vec<f64> = if qu.ncols() == 0 || qs.ncols() == 0 {
        Vec::new()
    } else {
        let sv = (qu.transpose() * &qs).svd(false, false).singular_values;
        let mut angles: Vec<f64> = sv.iter().map(|c| c.clamp(0.0, 1.0).acos()).collect();
        angles.sort_by(f64::total_cmp);
        angles
    };
    if let Some(&angle) = principal_angles
        .iter()
        .find(|&&x| x >= ANGLE_AGREE && x <= ANGLE_DISAGREE)
    {
        return Err(Error::AngularResolutionExceeded { angle });
    }
    let intersection_dim = principal_angles.iter().filter(|&&x| x < ANGLE_AGREE).count();
    let velocity_angles = system
        .velocity(t0)
        .map(|v| (angle_to_span(&qu, &v), angle_to_span(&qs, &v)));
    let nondegenerate = match velocity_angles {
        Some((au, as_)) => {
            for x in [au, as_] {
                if (ANGLE_AGREE..=ANGLE_DISAGREE).contains(&x) {
                    return Err(Error::AngularResolutionExceeded { angle: x });
                }
            }
            intersection_dim == 1 && au < ANGLE_AGREE && as_ < ANGLE_AGREE
        }
        None => intersection_dim == 0,
    };
    Ok(NondegeneracyReport {
        nondegenerate,
        intersection_dim,
        principal_angles,
        velocity_angles,
        t0,
    })
}

/// Integer lifts `Δ̃_i = β_i + sheets[i]·π` of the distinguished lines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftConvention {
    pub sheets: Vec<i64>,
}

impl LiftConvention {
    pub fn sheet(&self, index: usize) -> i64 {
        self.sheets.get(index).copied().unwrap_or(0)
    }

    pub fn shifted(&self, index: usize, by: i64) -> Self {
        let mut sheets = self.sheets.clone();
        if sheets.len() <= index {
            sheets.resize(index + 1, 0);
        }
        sheets[index] += by;
        Self { sheets }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradingDatum {
    pub source: usize,
    pub target: usize,
    pub ray: usize,
    /// `Δ̃_x`, the lift the transport starts from.
    pub lift: f64,
    /// `Δ̃_y`.
    pub target_lift: f64,
    /// Transported angle at the end of the window, before snapping.
    pub end_angle: f64,
    /// The end angle snapped to the expanding eigenline at `y`.
    pub snapped_angle: f64,
    /// Rotation of the closing short path, in `(−π, 0]`.
    pub closing_rotation: f64,
    pub grading: i64,
    pub action: f64,
    pub convention: String,
}

/// Absolute grading of a nondegenerate flowline.
pub fn absolute_grading(flowline: &Flowline, lift: &LiftConvention) -> Result<GradingDatum> {
    absolute_grading_with_substeps(flowline, lift, DEFAULT_SUBSTEPS)
}

pub fn absolute_grading_with_substeps(flowline: &Flowline, lift: &LiftConvention, substeps: usize) -> Result<GradingDatum> {
    let system = linearized_system(flowline)?;
    let report = nondegenerate_with_substeps(&system, substeps)?;
    if !report.nondegenerate {
        return Err(Error::Precondition("flowline is degenerate".into()));
    }
    let beta_x = source_lagrangian(flowline);
    let beta_y = target_lagrangian(flowline);
    let lift_x = beta_x + lift.sheet(flowline.source) as f64 * PI;
    let lift_y = beta_y + lift.sheet(flowline.target) as f64 * PI;
    let frame = transport_with_line(&system, lift_x, substeps)?;
    let end_angle = *frame.lagrangian_path.last().unwrap();

    // Forward transport carries a generic line onto the expanding eigenline
    // of the limiting Hessian at y, which is Δ_y turned by a right angle.
    let expanding = beta_y + FRAC_PI_2;
    let snapped_angle = nearest_mod_pi(expanding, end_angle);
    let miss = (snapped_angle - end_angle).abs();
    if miss > ANGLE_DISAGREE {
        return Err(Error::AngularResolutionExceeded { angle: miss });
    }
    let closing_rotation = -(snapped_angle - beta_y).rem_euclid(PI);
    let final_angle = snapped_angle + closing_rotation;
    let sheets = (final_angle - lift_y) / PI;
    let grading = sheets.round();
    debug_assert!((sheets - grading).abs() < 1e-9);
    Ok(GradingDatum {
        source: flowline.source,
        target: flowline.target,
        ray: flowline.ray,
        lift: lift_x,
        target_lift: lift_y,
        end_angle,
        snapped_angle,
        closing_rotation,
        grading: grading as i64,
        action: flowline.action,
        convention: GRADING_CONVENTION.to_string(),
    })
}

/// `gr(γ₀, γ₁; Γ) = gr(γ₁) − gr(γ₀)`.
pub fn relative_grading(g0: &GradingDatum, g1: &GradingDatum) -> i64 {
    g1.grading - g0.grading
}
