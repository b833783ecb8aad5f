use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Motion of the defunct spacecraft relative to the reference orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum TargetMode {
    /// Rides the reference orbit exactly: `q₀ ≡ 0`.
    #[default]
    Stationary,
    /// Damped oscillator driven by a sinusoidal bias,
    /// `q̈₀ = -ω₀² q₀ - 2ξω₀ q̇₀ + a ⊙ sin(Ω t)`.
    BoundedDrift {
        natural_frequency: f64,
        damping_ratio: f64,
        bias_amplitude: [f64; 3],
        bias_frequency: f64,
    },
}


#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetState {
    pub q: Vector3<f64>,
    pub q_dot: Vector3<f64>,
}

impl TargetMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetMode::Stationary => Ok(()),
            TargetMode::BoundedDrift { natural_frequency, damping_ratio, bias_amplitude, bias_frequency } => {
                if !(natural_frequency > 0.0) || !(damping_ratio > 0.0 && damping_ratio < 1.0) {
                    return Err(Error::config(
                        "bounded_drift needs natural_frequency > 0 and 0 < damping_ratio < 1",
                    ));
                }
                if bias_amplitude.iter().chain([&bias_frequency]).any(|x| !x.is_finite()) {
                    return Err(Error::config("bounded_drift bias must be finite"));
                }
                Ok(())
            }
        }
    }

    /// `f₀(q₀, q̇₀)` at time `t`.
    pub fn accel(&self, target: &TargetState, t: f64) -> Vector3<f64> {
        match *self {
            TargetMode::Stationary => Vector3::zeros(),
            TargetMode::BoundedDrift { natural_frequency: w0, damping_ratio: xi, bias_amplitude, bias_frequency } => {
                let bias = Vector3::from(bias_amplitude) * (bias_frequency * t).sin();
                -w0 * w0 * target.q - 2.0 * xi * w0 * target.q_dot + bias
            }
        }
    }

    /// Bounds `(q̄₀, q̄̇₀)` on position and velocity norms for motion started
    /// at rest at the origin, from the L1 norms of the oscillator's impulse
    /// response and its derivative.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            TargetMode::Stationary => (0.0, 0.0),
            TargetMode::BoundedDrift { natural_frequency: w0, damping_ratio: xi, bias_amplitude, .. } => {
                let a = xi * w0;
                let wd = w0 * (1.0 - xi * xi).sqrt();
                let amp = Vector3::from(bias_amplitude).norm();
                (amp / (a * wd), amp * (1.0 + a / wd) / a)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::integrator::rk4_step;
    use nalgebra::DVector;

    fn drift(amp: f64) -> TargetMode {
        TargetMode::BoundedDrift {
            natural_frequency: 0.01,
            damping_ratio: 0.7,
            bias_amplitude: [amp, amp, amp],
            bias_frequency: 0.02,
        }
    }

    fn propagate(mode: TargetMode, duration: f64) -> (f64, f64, TargetState) {
        let dt = 0.5;
        let mut x = DVector::zeros(6);
        let f = |t: f64, s: &DVector<f64>| -> Result<DVector<f64>> {
            let st = TargetState { q: s.fixed_rows::<3>(0).into(), q_dot: s.fixed_rows::<3>(3).into() };
            let a = mode.accel(&st, t);
            Ok(DVector::from_iterator(6, st.q_dot.iter().chain(a.iter()).copied()))
        };
        let (mut qmax, mut vmax) = (0.0_f64, 0.0_f64);
        let mut t = 0.0;
        while t < duration {
            x = rk4_step(t, &x, dt, &f).unwrap();
            t += dt;
            qmax = qmax.max(x.rows(0, 3).norm());
            vmax = vmax.max(x.rows(3, 3).norm());
        }
        let end = TargetState { q: x.fixed_rows::<3>(0).into(), q_dot: x.fixed_rows::<3>(3).into() };
        (qmax, vmax, end)
    }

    #[test]
    fn stationary_has_no_acceleration() {
        let s = TargetState { q: Vector3::new(1.0, 2.0, 3.0), q_dot: Vector3::new(-1.0, 0.5, 2.0) };
        assert_eq!(TargetMode::Stationary.accel(&s, 12.0), Vector3::zeros());
        assert_eq!(TargetMode::Stationary.bounds(), (0.0, 0.0));
    }

    #[test]
    fn unbiased_drift_from_rest_stays_put() {
        let (_, _, end) = propagate(drift(0.0), 1000.0);
        assert_eq!(end, TargetState::default());
    }

    #[test]
    fn biased_drift_respects_analytic_bounds() {
        let mode = drift(0.001);
        let (qb, vb) = mode.bounds();
        let (qmax, vmax, _) = propagate(mode, 3600.0);
        assert!(qmax > 0.0 && qmax <= qb, "{qmax} vs {qb}");
        assert!(vmax > 0.0 && vmax <= vb, "{vmax} vs {vb}");
    }

    #[test]
    fn overdamped_drift_is_rejected() {
        let bad = TargetMode::BoundedDrift {
            natural_frequency: 0.01,
            damping_ratio: 1.5,
            bias_amplitude: [0.0; 3],
            bias_frequency: 0.0,
        };
        assert!(bad.validate().is_err());
    }
}
