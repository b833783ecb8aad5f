//! Oblateness and drag, evaluated as the difference between the servicer's
//! and the defunct spacecraft's perturbing accelerations, since relative
//! motion only feels the differential part.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{RectRelState, ReferenceOrbit};
use crate::error::{Error, Result, Singularity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    pub mu: f64,
    pub earth_radius: f64,
    pub j2: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { mu: 3.986004418e14, earth_radius: 6.371e6, j2: 1.08263e-3 }
    }
}

/// Exponential density profile `ρ₀ exp(-(h - h₀) / H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atmosphere {
    pub rho0: f64,
    pub h0: f64,
    pub scale_height: f64,
}

impl Default for Atmosphere {
    fn default() -> Self {
        Self { rho0: 3.614e-11, h0: 300e3, scale_height: 50e3 }
    }
}

impl Atmosphere {
    pub fn density(&self, altitude: f64) -> f64 {
        self.rho0 * (-(altitude - self.h0) / self.scale_height).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacecraftParams {
    pub mass: f64,
    pub area: f64,
    #[serde(default = "default_drag_coeff")]
    pub drag_coeff: f64,
}

fn default_drag_coeff() -> f64 {
    2.2
}

impl SpacecraftParams {
    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.mass > 0.0) || !(self.area >= 0.0) || !(self.drag_coeff >= 0.0) {
            return Err(Error::config(format!(
                "{what}: need mass > 0, area >= 0, drag_coeff >= 0"
            )));
        }
        Ok(())
    }

    pub fn ballistic_factor(&self) -> f64 {
        self.drag_coeff * self.area / self.mass
    }
}

/// `-½ ρ C_d (A/m) |v| v` for velocity `v` relative to the atmosphere.
pub fn drag_accel(velocity: &Vector3<f64>, params: &SpacecraftParams, altitude: f64, atm: &Atmosphere) -> Vector3<f64> {
    let factor = params.ballistic_factor();
    if factor == 0.0 {
        return Vector3::zeros();
    }
    -0.5 * atm.density(altitude) * factor * velocity.norm() * velocity
}

/// Oblateness acceleration at an Earth-centred inertial position.
pub fn j2_accel_inertial(pos: &Vector3<f64>, c: &PhysicalConstants) -> Result<Vector3<f64>> {
    let r2 = pos.norm_squared();
    if !(r2 > 0.0) {
        return Err(Singularity::CentralBody { distance: r2.sqrt() }.into());
    }
    let r = r2.sqrt();
    let k = -1.5 * c.j2 * c.mu * c.earth_radius * c.earth_radius / (r2 * r2 * r);
    let zz = 5.0 * pos.z * pos.z / r2;
    Ok(Vector3::new(k * pos.x * (1.0 - zz), k * pos.y * (1.0 - zz), k * pos.z * (3.0 - zz)))
}

/// Rotation whose columns are the radial, in-track and orbit-normal axes in
/// the inertial frame (node on the inertial x axis).
pub fn lvlh_to_inertial(arg_latitude: f64, inclination: f64) -> Matrix3<f64> {
    let (su, cu) = arg_latitude.sin_cos();
    let (si, ci) = inclination.sin_cos();
    let radial = Vector3::new(cu, ci * su, si * su);
    let normal = Vector3::new(0.0, -si, ci);
    let along = normal.cross(&radial);
    Matrix3::from_columns(&[radial, along, normal])
}

/// Physical context shared by every servicer.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub constants: PhysicalConstants,
    pub inclination: f64,
    pub j2: bool,
    pub drag: bool,
    pub atmosphere: Atmosphere,
    pub target: SpacecraftParams,
}

impl Environment {
    pub fn unperturbed(constants: PhysicalConstants) -> Self {
        Self {
            constants,
            inclination: 0.0,
            j2: false,
            drag: false,
            atmosphere: Atmosphere::default(),
            target: SpacecraftParams { mass: 1.0, area: 0.0, drag_coeff: 0.0 },
        }
    }

    pub fn any_perturbation(&self) -> bool {
        self.j2 || self.drag
    }

    /// Perturbing acceleration of a servicer at `rel` minus that of the
    /// defunct spacecraft, in local-frame components.
    pub fn relative_perturbation(
        &self,
        orbit: &ReferenceOrbit,
        rel: &RectRelState,
        servicer: &SpacecraftParams,
    ) -> Result<Vector3<f64>> {
        let mut a = Vector3::zeros();
        if !self.any_perturbation() {
            return Ok(a);
        }
        let ref_pos = Vector3::new(orbit.r, 0.0, 0.0);
        let sat_pos = ref_pos + rel.pos;
        if self.j2 {
            let rot = lvlh_to_inertial(orbit.arg_latitude, self.inclination);
            let sat = j2_accel_inertial(&(rot * sat_pos), &self.constants)?;
            let refd = j2_accel_inertial(&(rot * ref_pos), &self.constants)?;
            a += rot.transpose() * (sat - refd);
        }
        if self.drag {
            let tau = orbit.tau;
            let ref_vel = Vector3::new(orbit.r_dot, orbit.r * tau, 0.0);
            let transport = Vector3::new(-tau * rel.pos.y, tau * rel.pos.x, 0.0);
            let sat_vel = ref_vel + rel.vel + transport;
            let re = self.constants.earth_radius;
            a += drag_accel(&sat_vel, servicer, sat_pos.norm() - re, &self.atmosphere)
                - drag_accel(&ref_vel, &self.target, orbit.r - re, &self.atmosphere);
        }
        Ok(a)
    }
}
