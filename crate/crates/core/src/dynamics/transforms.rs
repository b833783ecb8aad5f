use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, Singularity};

/// Range floor and pole margin. Crossing either aborts a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularityGuards {
    pub sigma_floor: f64,
    pub pole_guard: f64,
}

impl Default for SingularityGuards {
    fn default() -> Self {
        Self { sigma_floor: 1e-3, pole_guard: 1e-6 }
    }
}

impl SingularityGuards {
    pub fn check_sigma(&self, sigma: f64) -> Result<()> {
        if !(sigma > self.sigma_floor) {
            return Err(Singularity::RangeFloor { sigma, floor: self.sigma_floor }.into());
        }
        Ok(())
    }

    pub fn check_phi(&self, phi: f64) -> Result<()> {
        if !(phi.abs() < FRAC_PI_2 - self.pole_guard) {
            return Err(Singularity::Pole { phi, guard: self.pole_guard }.into());
        }
        Ok(())
    }

    pub fn check(&self, s: &SphericalRelState) -> Result<()> {
        self.check_sigma(s.sigma())?;
        self.check_phi(s.phi())
    }
}

/// `q = (σ, γ, φ)` and `q̇`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalRelState {
    pub q: Vector3<f64>,
    pub q_dot: Vector3<f64>,
}

impl SphericalRelState {
    pub fn new(q: Vector3<f64>, q_dot: Vector3<f64>) -> Self {
        Self { q, q_dot }
    }

    pub fn sigma(&self) -> f64 {
        self.q[0]
    }

    pub fn gamma(&self) -> f64 {
        self.q[1]
    }

    pub fn phi(&self) -> f64 {
        self.q[2]
    }
}

/// Radial / in-track / cross-track position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectRelState {
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
}

/// Unit vectors `(e_σ, e_γ, e_φ)` of the spherical chart at `(γ, φ)`.
pub fn spherical_basis(gamma: f64, phi: f64) -> [Vector3<f64>; 3] {
    let (sg, cg) = gamma.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [
        Vector3::new(cp * cg, cp * sg, sp),
        Vector3::new(-sg, cg, 0.0),
        Vector3::new(-sp * cg, -sp * sg, cp),
    ]
}

pub fn spherical_to_rect(s: &SphericalRelState) -> RectRelState {
    let (sigma, gamma, phi) = (s.q[0], s.q[1], s.q[2]);
    let [e_s, e_g, e_p] = spherical_basis(gamma, phi);
    let vel = e_s * s.q_dot[0] + e_g * (sigma * phi.cos() * s.q_dot[1]) + e_p * (sigma * s.q_dot[2]);
    RectRelState { pos: e_s * sigma, vel }
}

/// Inverse chart with `σ > 0`, `γ ∈ (-π, π]`, `φ ∈ (-π/2, π/2)`.
pub fn rect_to_spherical(r: &RectRelState, guards: &SingularityGuards) -> Result<SphericalRelState> {
    let p = r.pos;
    let sigma = p.norm();
    guards.check_sigma(sigma)?;
    let rho_xy = p.x.hypot(p.y);
    let phi = p.z.atan2(rho_xy);
    guards.check_phi(phi)?;
    let gamma = p.y.atan2(p.x);
    let [e_s, e_g, e_p] = spherical_basis(gamma, phi);
    let q_dot = Vector3::new(
        r.vel.dot(&e_s),
        r.vel.dot(&e_g) / (sigma * phi.cos()),
        r.vel.dot(&e_p) / sigma,
    );
    Ok(SphericalRelState { q: Vector3::new(sigma, gamma, phi), q_dot })
}
