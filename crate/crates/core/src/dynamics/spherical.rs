//! Range/azimuth/elevation form of the relative dynamics,
//! `q̈ = f(q, q̇) + g(q) u + ω(τ, τ̇, q, q̇)`.
//!
//! The functions at module level are obtained by substituting the chart into
//! the rectangular equations. The [`printed`] submodule keeps the printed
//! component expressions verbatim; they differ from the substitution in the
//! azimuth gravity term and the elevation disturbance term, and are retained
//! only so that difference can be measured.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{spherical_basis, ReferenceOrbit, SingularityGuards, SphericalRelState};
use crate::error::Result;

/// Which expression set the spherical plant integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphericalForm {
    #[default]
    Derived,
    Printed,
}

/// `g(σ) = diag(1, 1/σ, 1/σ)`.
pub fn control_effectiveness_g(sigma: f64, guards: &SingularityGuards) -> Result<Matrix3<f64>> {
    guards.check_sigma(sigma)?;
    Ok(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0 / sigma, 1.0 / sigma)))
}

/// `g⁻¹(σ) = diag(1, σ, σ)`.
pub fn control_effectiveness_g_inv(sigma: f64, guards: &SingularityGuards) -> Result<Matrix3<f64>> {
    guards.check_sigma(sigma)?;
    Ok(Matrix3::from_diagonal(&Vector3::new(1.0, sigma, sigma)))
}

/// Physical thrust acceleration that produces `g(σ) u` in the spherical
/// coordinates: `u₁ e_σ + u₂ cosφ e_γ + u₃ e_φ`.
pub fn control_to_rect(u: &Vector3<f64>, s: &SphericalRelState) -> Vector3<f64> {
    let [e_s, e_g, e_p] = spherical_basis(s.gamma(), s.phi());
    e_s * u[0] + e_g * (u[1] * s.phi().cos()) + e_p * u[2]
}

/// Components of a local-frame acceleration as spherical second derivatives.
pub fn project_accel(a: &Vector3<f64>, s: &SphericalRelState) -> Vector3<f64> {
    let [e_s, e_g, e_p] = spherical_basis(s.gamma(), s.phi());
    let sigma = s.sigma();
    Vector3::new(a.dot(&e_s), a.dot(&e_g) / (sigma * s.phi().cos()), a.dot(&e_p) / sigma)
}

fn servicer_distance_cubed(sigma: f64, gamma: f64, phi: f64, r: f64) -> f64 {
    let d2 = r * r + sigma * sigma + 2.0 * r * sigma * gamma.cos() * phi.cos();
    d2 * d2.sqrt()
}

/// Drift `f`: differential gravity, the velocity terms that do not involve
/// the frame rotation, and the projected perturbation acceleration.
pub fn drift_f(
    s: &SphericalRelState,
    orbit: &ReferenceOrbit,
    perturbation: &Vector3<f64>,
    guards: &SingularityGuards,
) -> Result<Vector3<f64>> {
    guards.check(s)?;
    let (sigma, gamma, phi) = (s.sigma(), s.gamma(), s.phi());
    let (sd, pd) = (s.q_dot[0], s.q_dot[2]);
    let (sg, cg) = gamma.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (r, mu) = (orbit.r, orbit.mu);
    let d3 = servicer_distance_cubed(sigma, gamma, phi, r);
    let p = project_accel(perturbation, s);
    let f_sigma = sigma * pd * pd - mu * (r * cg * cp + sigma) / d3 + mu / (r * r) * cg * cp + p[0];
    let f_gamma = mu * sg / (sigma * cp) * (r / d3 - 1.0 / (r * r)) + p[1];
    let f_phi = -2.0 * sd * pd / sigma - mu / (r * r * sigma) * cg * sp + mu * r * cg * sp / (sigma * d3) + p[2];
    Ok(Vector3::new(f_sigma, f_gamma, f_phi))
}

/// Frame-rotation terms `ω`.
pub fn disturbance_omega(tau: f64, tau_dot: f64, s: &SphericalRelState, guards: &SingularityGuards) -> Result<Vector3<f64>> {
    guards.check(s)?;
    let (sigma, phi) = (s.sigma(), s.phi());
    let (sd, gd, pd) = (s.q_dot[0], s.q_dot[1], s.q_dot[2]);
    let w = tau + gd;
    let (sp, cp) = phi.sin_cos();
    Ok(Vector3::new(
        w * w * sigma * cp * cp,
        2.0 * w * pd * phi.tan() - tau_dot - 2.0 * w * sd / sigma,
        -w * w * sp * cp,
    ))
}

/// `q̈` of the chosen expression set.
pub fn spherical_accel(
    s: &SphericalRelState,
    orbit: &ReferenceOrbit,
    tau_dot: f64,
    perturbation: &Vector3<f64>,
    u: &Vector3<f64>,
    form: SphericalForm,
    guards: &SingularityGuards,
) -> Result<Vector3<f64>> {
    let g = control_effectiveness_g(s.sigma(), guards)?;
    let (f, w) = match form {
        SphericalForm::Derived => (
            drift_f(s, orbit, perturbation, guards)?,
            disturbance_omega(orbit.tau, tau_dot, s, guards)?,
        ),
        SphericalForm::Printed => (
            printed::drift_f(s, orbit, perturbation, guards)?,
            printed::disturbance_omega(orbit.tau, tau_dot, s, guards)?,
        ),
    };
    Ok(f + g * u + w)
}

/// The printed component expressions, including perturbations added
/// directly per rectangular axis.
pub mod printed {
    use super::*;

    pub fn drift_f(
        s: &SphericalRelState,
        orbit: &ReferenceOrbit,
        perturbation: &Vector3<f64>,
        guards: &SingularityGuards,
    ) -> Result<Vector3<f64>> {
        guards.check(s)?;
        let (sigma, gamma, phi) = (s.sigma(), s.gamma(), s.phi());
        let (sd, pd) = (s.q_dot[0], s.q_dot[2]);
        let (sg, cg) = gamma.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let (r, mu) = (orbit.r, orbit.mu);
        let d3 = servicer_distance_cubed(sigma, gamma, phi, r);
        let sec = 1.0 / cp;
        Ok(Vector3::new(
            sigma * pd * pd - mu * (r * cg * cp + sigma) / d3 + mu / (r * r) * cg * cp + perturbation[0],
            mu * (r * sg * sec) / (sigma * d3) + mu / (r * r * sigma) * sg * sec + perturbation[1],
            -2.0 * sd * pd / sigma - mu / (r * r * sigma) * cg * sp + mu * r * cg * sp / (sigma * d3) + perturbation[2],
        ))
    }

    pub fn disturbance_omega(
        tau: f64,
        tau_dot: f64,
        s: &SphericalRelState,
        guards: &SingularityGuards,
    ) -> Result<Vector3<f64>> {
        guards.check(s)?;
        let (sigma, phi) = (s.sigma(), s.phi());
        let (sd, gd, pd) = (s.q_dot[0], s.q_dot[1], s.q_dot[2]);
        Ok(Vector3::new(
            (tau * tau + 2.0 * tau * gd + gd * gd) * sigma * phi.cos().powi(2),
            2.0 * (tau + gd) * pd * phi.tan() - tau_dot - 2.0 * (tau + gd) * sd / sigma,
            -0.5 * (tau + gd).powi(2),
        ))
    }
}
