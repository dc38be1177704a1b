//! Gradient flowlines of `f_θ`, separatrix shooting between critical points,
//! the symplectic action, and the `Hom` bases built from connection counts.
//!
//! In complex dimension one the unstable manifold of a saddle is a pair of
//! rays, so counting connections `x → y` means following both separatrices
//! out of `x` at the slope `θ = arg(F(y) − F(x))` and recording which of them
//! land on `y`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{critical_points, CriticalDatum, PhaseGeometry};
use crate::ode::{integrate, Control, Dp5Settings, OdeEnd, OdeSample};
use crate::poly::{cis, wrap_angle, HolomorphicFunction};
use crate::Tolerances;

/// Distance from a critical value below which it counts as lying on a segment.
const SEGMENT_BLOCK_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub launch_radius: f64,
    pub capture_radius: f64,
    /// Once captured, integration continues until this close to the target
    /// or until the distance stops decreasing.
    pub settle_radius: f64,
    /// Backward integration from the launch point stops this close to the source.
    pub pretail_radius: f64,
    pub r_max: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_time: f64,
}

impl ShootingConfig {
    pub fn for_critical_points(crit: &[CriticalDatum], tol: &Tolerances) -> Self {
        let reach = crit.iter().map(|d| d.point.norm()).fold(0.0, f64::max);
        Self {
            launch_radius: 1e-4,
            capture_radius: 1e-3,
            settle_radius: 1e-7,
            pretail_radius: 1e-7,
            r_max: 10.0 * (1.0 + reach),
            rtol: tol.integrator,
            atol: tol.integrator,
            max_step: 0.05,
            max_time: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.launch_radius,
            self.capture_radius,
            self.settle_radius,
            self.pretail_radius,
            self.r_max,
            self.rtol,
            self.atol,
            self.max_step,
            self.max_time,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Precondition("shooting parameters must be positive".into()));
        }
        if !(self.launch_radius < self.capture_radius && self.capture_radius < self.r_max) {
            return Err(Error::Precondition(
                "need launch_radius < capture_radius < r_max".into(),
            ));
        }
        Ok(())
    }

    fn dp5(&self) -> Dp5Settings {
        Dp5Settings {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
            initial_step: 1e-3_f64.min(self.max_step),
            max_time: self.max_time,
            ..Dp5Settings::default()
        }
    }
}

/// `∇f_θ(z) = conj(e^{-iθ}F'(z))`.
pub fn gradient_field(f: &HolomorphicFunction, theta: f64, z: Complex64) -> Complex64 {
    f.grad_f(theta, z)
}

/// The two unit directions `±e^{iβ}` of the unstable manifold of `x` for the
/// flow of `∇f_θ`, with `2β = θ − arg F''(x)`.
pub fn unstable_directions(x: &CriticalDatum, theta: f64) -> Result<[Complex64; 2]> {
    if x.hessian.norm() == 0.0 || !x.hessian.is_finite() {
        return Err(Error::NonMorse {
            point: x.point,
            hessian_norm: x.hessian.norm(),
        });
    }
    let beta = 0.5 * (theta - x.hessian.arg());
    let e = cis(beta);
    Ok([e, -e])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Captured by the critical point with this index.
    Captured(usize),
    /// Left the disc `|z| ≤ r_max`.
    Runaway,
    /// `f_θ` rose past the target level, so the target can no longer be reached.
    PassedTarget,
    MaxTime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowPath {
    pub theta: f64,
    pub samples: Vec<OdeSample>,
    pub termination: Termination,
    /// `max |g_θ(z(t)) − g_θ(z(0))|` over the samples.
    pub drift: f64,
}

/// Integrates `ż = ∇f_θ(z)` from `z0`.
///
/// `exclude` names a critical point that cannot capture (the source of a
/// separatrix, whose launch point already lies inside its capture disc), and
/// `target` enables the early `PassedTarget` exit.
pub fn integrate_flow(
    f: &HolomorphicFunction,
    theta: f64,
    z0: Complex64,
    crit: &[CriticalDatum],
    config: &ShootingConfig,
    tol: &Tolerances,
    exclude: Option<usize>,
    target: Option<usize>,
) -> Result<FlowPath> {
    config.validate()?;
    if let Some(d) = crit.iter().find(|d| d.point == z0) {
        return Err(Error::Precondition(format!("start {} is a critical point", d.point)));
    }
    let rot = cis(-theta);
    let g0 = (rot * f.eval(z0)).im;
    let target_level = target.map(|k| (rot * crit[k].value).re);
    let margin = 1e-9 * (1.0 + target_level.map_or(0.0, f64::abs));

    let mut termination = None;
    let mut drift: f64 = 0.0;
    let mut drift_error = None;
    let mut decreasing = 0usize;
    let mut settling: Option<(usize, f64)> = None;
    let mut previous_speed = f64::INFINITY;

    let observer = |samples: &[OdeSample]| {
        let s = samples[samples.len() - 1];
        let w = rot * f.eval(s.z);
        let d = (w.im - g0).abs();
        drift = drift.max(d);
        if d > tol.conservation * w.norm().max(1.0) {
            drift_error = Some(d);
            return Control::Stop;
        }
        if s.z.norm() > config.r_max {
            termination = Some(Termination::Runaway);
            return Control::Stop;
        }
        if let Some((k, best)) = settling {
            let dist = (s.z - crit[k].point).norm();
            if dist >= best {
                // Closest approach passed; drop the receding sample.
                termination = Some(Termination::Captured(k));
                return Control::Stop;
            }
            settling = Some((k, dist));
            if dist < config.settle_radius {
                termination = Some(Termination::Captured(k));
                return Control::Stop;
            }
            return Control::Continue;
        }
        let speed = s.v.norm();
        let nearest = crit
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != exclude)
            .map(|(k, c)| (k, (s.z - c.point).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((k, dist)) if dist < config.capture_radius => {
                decreasing = if speed < previous_speed { decreasing + 1 } else { 0 };
                if decreasing >= 3 {
                    settling = Some((k, dist));
                }
            }
            _ => decreasing = 0,
        }
        previous_speed = speed;
        if let Some(level) = target_level {
            if settling.is_none() && w.re > level + margin {
                termination = Some(Termination::PassedTarget);
                return Control::Stop;
            }
        }
        Control::Continue
    };

    let (mut samples, end) = integrate(|z| f.grad_f(theta, z), 0.0, z0, 1.0, &config.dp5(), observer)?;
    if let Some(d) = drift_error {
        return Err(Error::DriftExceeded {
            drift: d,
            tolerance: tol.conservation,
        });
    }
    let termination = match (termination, end) {
        (Some(t), _) => t,
        (None, OdeEnd::MaxTime) => Termination::MaxTime,
        (None, OdeEnd::Stopped) => unreachable!("observer stops only with a reason"),
    };
    if let Termination::Captured(k) = termination {
        // The final sample is either inside the settle radius or the first
        // receding one; keep the closest.
        let n = samples.len();
        if n >= 2 && (samples[n - 1].z - crit[k].point).norm() > (samples[n - 2].z - crit[k].point).norm() {
            samples.pop();
        }
    }
    Ok(FlowPath {
        theta,
        samples,
        termination,
        drift,
    })
}

/// A sampled gradient trajectory from `source` to `target`.
///
/// Between samples the path is the cubic Hermite interpolant of the stored
/// positions and velocities. Outside the sampled range it is continued by
/// the linearized exponential approach to the endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Flowline {
    pub function: HolomorphicFunction,
    pub theta: f64,
    pub source: usize,
    pub target: usize,
    pub source_point: Complex64,
    pub target_point: Complex64,
    pub source_value: Complex64,
    pub target_value: Complex64,
    /// `|F''|` at the source and target: the exponential rates of the tails.
    pub source_rate: f64,
    pub target_rate: f64,
    /// Which unstable ray of the source the flowline leaves along (0 or 1).
    pub ray: usize,
    pub samples: Vec<OdeSample>,
    pub conserved_drift: f64,
    pub segment_deviation: f64,
    pub action: f64,
}

impl Flowline {
    pub fn t_first(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_last(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    fn interval(&self, t: f64) -> usize {
        let k = self.samples.partition_point(|s| s.t <= t);
        k.clamp(1, self.samples.len() - 1) - 1
    }

    pub fn position(&self, t: f64) -> Complex64 {
        let first = self.samples[0];
        let last = self.samples[self.samples.len() - 1];
        if t <= first.t {
            return self.source_point + (first.z - self.source_point) * (self.source_rate * (t - first.t)).exp();
        }
        if t >= last.t {
            return self.target_point + (last.z - self.target_point) * (-self.target_rate * (t - last.t)).exp();
        }
        let k = self.interval(t);
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        a.z * (2.0 * s3 - 3.0 * s2 + 1.0)
            + a.v * (h * (s3 - 2.0 * s2 + s))
            + b.z * (-2.0 * s3 + 3.0 * s2)
            + b.v * (h * (s3 - s2))
    }

    pub fn velocity(&self, t: f64) -> Complex64 {
        let first = self.samples[0];
        let last = self.samples[self.samples.len() - 1];
        if t <= first.t {
            return (first.z - self.source_point)
                * (self.source_rate * (self.source_rate * (t - first.t)).exp());
        }
        if t >= last.t {
            return (last.z - self.target_point)
                * (-self.target_rate * (-self.target_rate * (t - last.t)).exp());
        }
        let k = self.interval(t);
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let s2 = s * s;
        (a.z * (6.0 * s2 - 6.0 * s) + b.z * (-6.0 * s2 + 6.0 * s)) / h
            + a.v * (3.0 * s2 - 4.0 * s + 1.0)
            + b.v * (3.0 * s2 - 2.0 * s)
    }

    /// The same trajectory with time shifted by `dt`.
    pub fn time_shifted(&self, dt: f64) -> Flowline {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.t += dt;
        }
        out
    }

    /// `F(γ(t_k))` at every sample.
    pub fn value_image(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| self.function.eval(s.z)).collect()
    }

    /// Times `(t_start, t_end)` at which the flowline is `radius` away from
    /// its source and target. Radii below the sampled range are reached on
    /// the exponential tails; larger ones at the first (last) sample that far out.
    pub fn window_for_radius(&self, radius: f64) -> (f64, f64) {
        let first = self.samples[0];
        let last = self.samples[self.samples.len() - 1];
        let d0 = (first.z - self.source_point).norm();
        let d1 = (last.z - self.target_point).norm();
        let t_start = if radius <= d0 {
            first.t - (d0 / radius).ln() / self.source_rate
        } else {
            self.samples
                .iter()
                .find(|s| (s.z - self.source_point).norm() >= radius)
                .map_or(first.t, |s| s.t)
        };
        let t_end = if radius <= d1 {
            last.t + (d1 / radius).ln() / self.target_rate
        } else {
            self.samples
                .iter()
                .rev()
                .find(|s| (s.z - self.target_point).norm() >= radius)
                .map_or(last.t, |s| s.t)
        };
        (t_start, t_end)
    }
}

/// Distance from `w` to the closed segment `[a, b]`, and the position of the
/// projection along it in `[0, 1]` before clamping.
fn segment_distance(w: Complex64, a: Complex64, b: Complex64) -> (f64, f64) {
    let d = b - a;
    let s = ((w - a) * d.conj()).re / d.norm_sqr();
    let p = a + d * s.clamp(0.0, 1.0);
    ((w - p).norm(), s)
}

/// `𝒜_θ(γ) = ∫_γ λ − ∫ (g_θ(γ) − g_θ(x)) dt` with `λ = ½ Im(z̄ dz)`.
///
/// The line integral is exact on each Hermite interval (three-point
/// Gauss–Legendre on a degree-5 integrand); the tails are the straight
/// segments from the source to the first sample and from the last sample to
/// the target.
pub fn action(flowline: &Flowline) -> f64 {
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut line = 0.0;
    for w in flowline.samples.windows(2) {
        let (t0, t1) = (w[0].t, w[1].t);
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t0 + t1);
        for (node, weight) in nodes.iter().zip(weights) {
            let t = mid + half * node;
            let z = flowline.position(t);
            let v = flowline.velocity(t);
            line += weight * half * 0.5 * (z.conj() * v).im;
        }
    }
    let first = flowline.samples[0].z;
    let last = flowline.samples[flowline.samples.len() - 1].z;
    line += 0.5 * (flowline.source_point.conj() * first).im;
    line += 0.5 * (last.conj() * flowline.target_point).im;

    let rot = cis(-flowline.theta);
    let g0 = (rot * flowline.source_value).im;
    let mut drift_integral = 0.0;
    for w in flowline.samples.windows(2) {
        let a = (rot * flowline.function.eval(w[0].z)).im - g0;
        let b = (rot * flowline.function.eval(w[1].z)).im - g0;
        drift_integral += 0.5 * (a + b) * (w[1].t - w[0].t);
    }
    line - drift_integral
}

/// Max over interior samples of `|d/dt F(γ(t)) − ρ(γ(t)) e^{iθ}|`, where the
/// derivative is a fourth-order central difference of `F` along short local
/// re-integrations of the flow.
pub fn speed_law_residual(flowline: &Flowline, step: f64) -> Result<f64> {
    let f = &flowline.function;
    let theta = flowline.theta;
    let settings = Dp5Settings {
        rtol: 1e-13,
        atol: 1e-15,
        max_step: step / 4.0,
        initial_step: step / 16.0,
        max_time: step,
        ..Dp5Settings::default()
    };
    let flow_by = |z: Complex64, dt: f64| -> Result<Complex64> {
        let settings = Dp5Settings {
            max_time: dt.abs(),
            ..settings
        };
        let (s, _) = integrate(|w| f.grad_f(theta, w), 0.0, z, dt.signum(), &settings, |_| Control::Continue)?;
        Ok(s[s.len() - 1].z)
    };
    let n = flowline.samples.len();
    let mut worst: f64 = 0.0;
    for s in &flowline.samples[2.min(n)..n.saturating_sub(2)] {
        let p1 = f.eval(flow_by(s.z, step)?);
        let p2 = f.eval(flow_by(s.z, 2.0 * step)?);
        let m1 = f.eval(flow_by(s.z, -step)?);
        let m2 = f.eval(flow_by(s.z, -2.0 * step)?);
        let derivative = (-p2 + p1 * 8.0 - m1 * 8.0 + m2) / (12.0 * step);
        let expected = cis(theta) * f.d1(s.z).norm_sqr();
        worst = worst.max((derivative - expected).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotOutcome {
    Hit,
    Missed(Termination),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Shot {
    pub ray: usize,
    pub direction: Complex64,
    pub outcome: ShotOutcome,
    pub drift: f64,
    pub steps: usize,
}

/// Follows both unstable rays of `source` at an arbitrary angle `θ` and
/// reports which of them land on `target`. Hits are assembled into
/// flowlines; this is the primitive behind [`find_connections`], which fixes
/// `θ` to the segment slope.
pub fn shoot(
    f: &HolomorphicFunction,
    crit: &[CriticalDatum],
    theta: f64,
    source: usize,
    target: usize,
    config: &ShootingConfig,
    tol: &Tolerances,
) -> Result<(Vec<Shot>, Vec<Flowline>)> {
    config.validate()?;
    if source >= crit.len() || target >= crit.len() || source == target {
        return Err(Error::Precondition(format!("bad pair ({source}, {target})")));
    }
    let x = crit[source];
    let rot = cis(-theta);
    let g_x = (rot * x.value).im;
    let mut shots = Vec::with_capacity(2);
    let mut flowlines = Vec::new();
    for (ray, dir) in unstable_directions(&x, theta)?.into_iter().enumerate() {
        let mut z0 = x.point + dir * config.launch_radius;
        // One Newton step along ∇g_θ puts the launch point on the level set.
        let grad_g = Complex64::i() * (rot * f.d1(z0)).conj();
        z0 -= grad_g * (((rot * f.eval(z0)).im - g_x) / grad_g.norm_sqr());

        let path = integrate_flow(f, theta, z0, crit, config, tol, Some(source), Some(target))?;
        let outcome = match path.termination {
            Termination::Captured(k) if k == target => ShotOutcome::Hit,
            Termination::MaxTime => {
                return Err(Error::Inconclusive(format!(
                    "ray {ray} from {source} neither captured nor escaped within t = {}",
                    config.max_time
                )))
            }
            other => ShotOutcome::Missed(other),
        };
        shots.push(Shot {
            ray,
            direction: dir,
            outcome,
            drift: path.drift,
            steps: path.samples.len(),
        });
        if outcome == ShotOutcome::Hit {
            flowlines.push(assemble_flowline(f, crit, theta, source, target, ray, path, config, tol)?);
        }
    }
    Ok((shots, flowlines))
}

#[allow(clippy::too_many_arguments)]
fn assemble_flowline(
    f: &HolomorphicFunction,
    crit: &[CriticalDatum],
    theta: f64,
    source: usize,
    target: usize,
    ray: usize,
    path: FlowPath,
    config: &ShootingConfig,
    tol: &Tolerances,
) -> Result<Flowline> {
    let x = crit[source];
    let y = crit[target];
    let launch = path.samples[0].z;

    // Backward from the launch point towards the source.
    let pretail_settings = Dp5Settings {
        rtol: config.rtol,
        atol: config.atol,
        max_step: config.max_step,
        initial_step: 1e-3_f64.min(config.max_step),
        max_time: config.max_time,
        ..Dp5Settings::default()
    };
    let mut best = f64::INFINITY;
    let (mut pre, _) = integrate(|z| f.grad_f(theta, z), 0.0, launch, -1.0, &pretail_settings, |s| {
        let d = (s[s.len() - 1].z - x.point).norm();
        if d < config.pretail_radius || d > best {
            return Control::Stop;
        }
        best = d;
        Control::Continue
    })?;
    let n = pre.len();
    if n >= 2 && (pre[n - 1].z - x.point).norm() > (pre[n - 2].z - x.point).norm() {
        pre.pop();
    }
    pre.reverse();
    pre.pop();
    let mut samples = pre;
    samples.extend(path.samples);

    let rot = cis(-theta);
    let span = (rot * (y.value - x.value)).re;
    let f_rel = |z: Complex64| (rot * (f.eval(z) - x.value)).re;

    let mut flowline = Flowline {
        function: f.clone(),
        theta,
        source,
        target,
        source_point: x.point,
        target_point: y.point,
        source_value: x.value,
        target_value: y.value,
        source_rate: x.hessian.norm(),
        target_rate: y.hessian.norm(),
        ray,
        samples,
        conserved_drift: 0.0,
        segment_deviation: 0.0,
        action: 0.0,
    };

    // Put t = 0 where F∘γ crosses the midpoint of the segment.
    let half = 0.5 * span;
    let k = flowline
        .samples
        .iter()
        .position(|s| f_rel(s.z) >= half)
        .ok_or_else(|| Error::FlowlineRejected("never reaches the segment midpoint".into()))?;
    let t_mid = if k == 0 {
        flowline.samples[0].t
    } else {
        let (mut lo, mut hi) = (flowline.samples[k - 1].t, flowline.samples[k].t);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f_rel(flowline.position(mid)) < half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    for s in &mut flowline.samples {
        s.t -= t_mid;
    }

    let g_x = (rot * x.value).im;
    let mut drift: f64 = 0.0;
    let mut deviation: f64 = 0.0;
    let mut previous = f64::NEG_INFINITY;
    let monotone_slack = 1e-12 * (1.0 + span.abs());
    for s in &flowline.samples {
        let w = f.eval(s.z);
        drift = drift.max(((rot * w).im - g_x).abs());
        deviation = deviation.max(segment_distance(w, x.value, y.value).0);
        let level = f_rel(s.z);
        if level < previous - monotone_slack {
            return Err(Error::FlowlineRejected(format!(
                "F∘γ moves backwards along the segment at t = {}",
                s.t
            )));
        }
        previous = previous.max(level);
        if s.z.norm() > config.r_max {
            return Err(Error::FlowlineRejected("left the compactness disc".into()));
        }
    }
    if flowline.samples.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::FlowlineRejected("sample times not increasing".into()));
    }
    if drift >= tol.conservation {
        return Err(Error::DriftExceeded {
            drift,
            tolerance: tol.conservation,
        });
    }
    if deviation >= tol.segment {
        return Err(Error::FlowlineRejected(format!(
            "F∘γ strays {deviation:e} from the segment"
        )));
    }
    flowline.conserved_drift = drift;
    flowline.segment_deviation = deviation;
    flowline.action = action(&flowline);
    Ok(flowline)
}

/// Connections `x → y` at the slope `θ = arg(F(y) − F(x))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Connections {
    pub source: usize,
    pub target: usize,
    pub theta: f64,
    pub shots: Vec<Shot>,
    pub flowlines: Vec<Flowline>,
    pub count_mod2: u8,
}

/// The segment `(w_a, w_b)` must not pass through another critical value.
pub fn check_segment_clear(values: &[Complex64], a: usize, b: usize) -> Result<()> {
    for (k, &w) in values.iter().enumerate() {
        if k == a || k == b {
            continue;
        }
        let (dist, _) = segment_distance(w, values[a], values[b]);
        if dist < SEGMENT_BLOCK_DISTANCE {
            return Err(Error::InteriorCriticalValue {
                source_index: a,
                target: b,
                index: k,
            });
        }
    }
    Ok(())
}

pub fn find_connections(
    f: &HolomorphicFunction,
    crit: &[CriticalDatum],
    source: usize,
    target: usize,
    config: &ShootingConfig,
    tol: &Tolerances,
) -> Result<Connections> {
    if source >= crit.len() || target >= crit.len() || source == target {
        return Err(Error::Precondition(format!("bad pair ({source}, {target})")));
    }
    let values: Vec<Complex64> = crit.iter().map(|d| d.value).collect();
    let delta = values[target] - values[source];
    if delta.norm() < tol.value_separation {
        return Err(Error::DegenerateValues {
            i: source,
            j: target,
            distance: delta.norm(),
        });
    }
    check_segment_clear(&values, source, target)?;
    let theta = wrap_angle(delta.arg());
    let (shots, flowlines) = shoot(f, crit, theta, source, target, config, tol)?;
    let count_mod2 = (flowlines.len() % 2) as u8;
    Ok(Connections {
        source,
        target,
        theta,
        shots,
        flowlines,
        count_mod2,
    })
}

/// Connections for every ordered pair, computed in parallel. Pairs whose
/// count is undefined carry their error.
pub fn all_connections(
    f: &HolomorphicFunction,
    crit: &[CriticalDatum],
    config: &ShootingConfig,
    tol: &Tolerances,
) -> BTreeMap<(usize, usize), Result<Connections>> {
    let n = crit.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| ((i, j), find_connections(f, crit, i, j, config, tol)))
        .collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum HomBasis {
    Zero,
    Identity,
    Generators(Connections),
}

impl HomBasis {
    pub fn rank(&self) -> usize {
        match self {
            HomBasis::Zero => 0,
            HomBasis::Identity => 1,
            HomBasis::Generators(c) => c.flowlines.len(),
        }
    }
}

/// `Hom(x, y)`: zero when `x ≻ y`, the identity when `x = y`, and the
/// connecting flowlines otherwise.
pub fn hom_basis(
    f: &HolomorphicFunction,
    crit: &[CriticalDatum],
    geometry: &PhaseGeometry,
    x: usize,
    y: usize,
    config: &ShootingConfig,
    tol: &Tolerances,
) -> Result<HomBasis> {
    if x == y {
        return Ok(HomBasis::Identity);
    }
    if !geometry.precedes(x, y) {
        return Ok(HomBasis::Zero);
    }
    Ok(HomBasis::Generators(find_connections(f, crit, x, y, config, tol)?))
}

/// `W(z₁, z₂) = F₁(z₁) + F₂(z₂)` on ℂ².
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparableFunction {
    pub first: HolomorphicFunction,
    pub second: HolomorphicFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparableCritical {
    pub indices: (usize, usize),
    pub point: (Complex64, Complex64),
    pub value: Complex64,
}

/// A connection of `W` in which one component follows a flowline and the
/// other sits at a critical point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparableFlowline {
    /// 0 if `z₁` moves, 1 if `z₂` moves.
    pub moving: usize,
    pub flowline: Flowline,
    pub frozen_point: Complex64,
    pub frozen_hessian: Complex64,
}

impl SeparableFunction {
    pub fn components(&self) -> [&HolomorphicFunction; 2] {
        [&self.first, &self.second]
    }

    pub fn critical_data(&self, tol: &Tolerances) -> Result<[Vec<CriticalDatum>; 2]> {
        Ok([critical_points(&self.first, tol)?, critical_points(&self.second, tol)?])
    }

    pub fn critical_points(&self, tol: &Tolerances) -> Result<Vec<SeparableCritical>> {
        let [c1, c2] = self.critical_data(tol)?;
        let mut out = Vec::new();
        for (i, a) in c1.iter().enumerate() {
            for (j, b) in c2.iter().enumerate() {
                out.push(SeparableCritical {
                    indices: (i, j),
                    point: (a.point, b.point),
                    value: a.value + b.value,
                });
            }
        }
        for i in 0..out.len() {
            for j in (i + 1)..out.len() {
                let distance = (out[i].value - out[j].value).norm();
                if distance < tol.value_separation {
                    return Err(Error::DegenerateValues { i, j, distance });
                }
            }
        }
        Ok(out)
    }

    /// Connections `x → y` of `W`. Exactly one component may move: when both
    /// do, the relative time shift gives a one-parameter family and the
    /// connection is not isolated.
    pub fn connections(
        &self,
        x: (usize, usize),
        y: (usize, usize),
        tol: &Tolerances,
    ) -> Result<Vec<SeparableFlowline>> {
        let all = self.critical_points(tol)?;
        let index = |p: (usize, usize)| all.iter().position(|c| c.indices == p);
        let (Some(ix), Some(iy)) = (index(x), index(y)) else {
            return Err(Error::Precondition("unknown critical index".into()));
        };
        let values: Vec<Complex64> = all.iter().map(|c| c.value).collect();
        check_segment_clear(&values, ix, iy)?;
        let moving = match (x.0 != y.0, x.1 != y.1) {
            (true, false) => 0,
            (false, true) => 1,
            (false, false) => return Err(Error::Precondition("source equals target".into())),
            (true, true) => {
                return Err(Error::Precondition(
                    "both components move: connections form a non-isolated family".into(),
                ))
            }
        };
        let crit = self.critical_data(tol)?;
        let (from, to, frozen) = if moving == 0 { (x.0, y.0, x.1) } else { (x.1, y.1, x.0) };
        let comp = self.components()[moving];
        let config = ShootingConfig::for_critical_points(&crit[moving], tol);
        let connections = find_connections(comp, &crit[moving], from, to, &config, tol)?;
        let frozen_datum = crit[1 - moving][frozen];
        Ok(connections
            .flowlines
            .into_iter()
            .map(|flowline| SeparableFlowline {
                moving,
                frozen_point: frozen_datum.point,
                frozen_hessian: frozen_datum.hessian,
                flowline,
            })
            .collect())
    }
}
