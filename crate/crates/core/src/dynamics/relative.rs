use nalgebra::Vector3;

use super::{RectRelState, ReferenceOrbit};
use crate::error::{Result, Singularity};

/// Relative acceleration in the rotating local frame for a non-circular
/// reference orbit, with perturbation and control accelerations added.
pub fn rect_relative_accel(
    state: &RectRelState,
    orbit: &ReferenceOrbit,
    tau_dot: f64,
    perturbation: &Vector3<f64>,
    u: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    let r = orbit.r;
    if !(r > 0.0) {
        return Err(Singularity::ReferenceRadius { r }.into());
    }
    let (x, y, z) = (state.pos.x, state.pos.y, state.pos.z);
    let (vx, vy) = (state.vel.x, state.vel.y);
    let d2 = (r + x) * (r + x) + y * y + z * z;
    if !(d2 > 0.0) {
        return Err(Singularity::CentralBody { distance: d2.sqrt() }.into());
    }
    let d3 = d2 * d2.sqrt();
    let mu = orbit.mu;
    let tau = orbit.tau;
    let gravity = Vector3::new(mu / (r * r) - mu * (r + x) / d3, -mu * y / d3, -mu * z / d3);
    let frame = Vector3::new(
        2.0 * tau * vy + tau_dot * y + tau * tau * x,
        -2.0 * tau * vx - tau_dot * x + tau * tau * y,
        0.0,
    );
    Ok(frame + gravity + perturbation + u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MU: f64 = 3.986004418e14;

    fn orbit(tau: f64) -> ReferenceOrbit {
        ReferenceOrbit { r: 6.671e6, r_dot: 0.0, tau, arg_latitude: 0.0, mu: MU }
    }

    #[test]
    fn co_located_with_reference_has_no_acceleration() {
        let s = RectRelState { pos: Vector3::zeros(), vel: Vector3::zeros() };
        let a = rect_relative_accel(&s, &orbit(1.1e-3), 0.0, &Vector3::zeros(), &Vector3::zeros()).unwrap();
        assert!(a.norm() < 1e-12);
    }

    #[test]
    fn pure_cross_track_offset_without_rotation() {
        let z = 1000.0;
        let o = orbit(0.0);
        let s = RectRelState { pos: Vector3::new(0.0, 0.0, z), vel: Vector3::zeros() };
        let a = rect_relative_accel(&s, &o, 0.0, &Vector3::zeros(), &Vector3::zeros()).unwrap();
        let expected = -MU * z / (o.r * o.r + z * z).powf(1.5);
        assert!((a.z - expected).abs() <= 1e-15 * expected.abs());
    }

    #[test]
    fn control_enters_additively() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = RectRelState {
                pos: Vector3::from_fn(|_, _| rng.random_range(-5e3..5e3)),
                vel: Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0)),
            };
            let o = orbit(1.15e-3);
            let zero = rect_relative_accel(&s, &o, 1e-7, &Vector3::zeros(), &Vector3::zeros()).unwrap();
            let one = rect_relative_accel(&s, &o, 1e-7, &Vector3::zeros(), &Vector3::x()).unwrap();
            let diff = one - zero;
            assert!((diff - Vector3::x()).norm() < 1e-12);
        }
    }
}
