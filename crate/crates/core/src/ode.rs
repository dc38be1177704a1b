//! Adaptive Dormand–Prince 5(4) integration of `ż = v(z)` on a complex state,
//! with an observer that may stop the integration after any accepted step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dp5Settings {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub initial_step: f64,
    pub max_time: f64,
    pub max_steps: usize,
}

impl Default for Dp5Settings {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_step: 0.05,
            initial_step: 1e-3,
            max_time: 200.0,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted point of a trajectory: time, state and `ż` at that state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSample {
    pub t: f64,
    pub z: Complex64,
    pub v: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeEnd {
    /// The observer asked to stop.
    Stopped,
    /// `|t − t0|` reached `max_time`.
    MaxTime,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `ż = direction · field(z)` from `z0`. Sample times run in the
/// sign of `direction`; the stored `v` is the signed velocity `dz/dt`.
///
/// The observer sees every accepted sample (the initial one included) and the
/// integration ends when it returns [`Control::Stop`] or `max_time` elapses.
pub fn integrate<V, O>(
    field: V,
    t0: f64,
    z0: Complex64,
    direction: f64,
    settings: &Dp5Settings,
    mut observer: O,
) -> Result<(Vec<OdeSample>, OdeEnd)>
where
    V: Fn(Complex64) -> Complex64,
    O: FnMut(&[OdeSample]) -> Control,
{
    let dir = direction.signum();
    let rhs = |z: Complex64| field(z) * dir;
    let mut samples = vec![OdeSample { t: t0, z: z0, v: rhs(z0) }];
    if !samples[0].v.is_finite() {
        return Err(Error::StepFailure {
            t: t0,
            reason: "non-finite field at initial point".into(),
        });
    }
    if observer(&samples) == Control::Stop {
        return Ok((samples, OdeEnd::Stopped));
    }
    let mut h = settings.initial_step.min(settings.max_step);
    let mut elapsed = 0.0;
    let mut z = z0;
    let mut k1 = samples[0].v;
    let min_step = 1e-14 * settings.max_step.max(1.0);

    for _ in 0..settings.max_steps {
        if elapsed >= settings.max_time - min_step {
            return Ok((samples, OdeEnd::MaxTime));
        }
        h = h.min(settings.max_time - elapsed).min(settings.max_step);
        let k2 = rhs(z + k1 * (h * A21));
        let k3 = rhs(z + (k1 * A31 + k2 * A32) * h);
        let k4 = rhs(z + (k1 * A41 + k2 * A42 + k3 * A43) * h);
        let k5 = rhs(z + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
        let k6 = rhs(z + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
        let z_new = z + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
        let k7 = rhs(z_new);
        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let scale = settings.atol + settings.rtol * z.norm().max(z_new.norm());
        let ratio = err.norm() / scale;

        if !ratio.is_finite() || !z_new.is_finite() {
            h *= 0.25;
            if h < min_step {
                return Err(Error::StepFailure {
                    t: t0 + dir * elapsed,
                    reason: "non-finite state".into(),
                });
            }
            continue;
        }
        if ratio <= 1.0 {
            elapsed += h;
            z = z_new;
            k1 = k7;
            samples.push(OdeSample {
                t: t0 + dir * elapsed,
                z,
                v: k7 * dir,
            });
            if observer(&samples) == Control::Stop {
                return Ok((samples, OdeEnd::Stopped));
            }
        }
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if ratio > 1.0 && h < min_step {
            return Err(Error::StepFailure {
                t: t0 + dir * elapsed,
                reason: format!("step size underflow ({h:e})"),
            });
        }
    }
    Err(Error::StepFailure {
        t: t0 + dir * elapsed,
        reason: "step budget exhausted".into(),
    })
}
