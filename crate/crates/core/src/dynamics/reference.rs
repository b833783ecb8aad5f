use serde::{Deserialize, Serialize};

use super::PhysicalConstants;
use crate::error::{Result, Singularity};

/// Planar state of the defunct spacecraft's orbit in polar form.
///
/// `arg_latitude` is the angle swept from the ascending node; only the J2
/// model needs it, to place the local frame inside the inclined orbit plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOrbit {
    pub r: f64,
    pub r_dot: f64,
    pub tau: f64,
    pub arg_latitude: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRates {
    pub r_ddot: f64,
    pub tau_dot: f64,
}

/// `r̈ = r τ² - μ / r²`, `τ̇ = -2 ṙ τ / r`.
pub fn reference_derivs(orbit: &ReferenceOrbit) -> Result<ReferenceRates> {
    let r = orbit.r;
    if !(r > 0.0) {
        return Err(Singularity::ReferenceRadius { r }.into());
    }
    Ok(ReferenceRates {
        r_ddot: r * orbit.tau * orbit.tau - orbit.mu / (r * r),
        tau_dot: -2.0 * orbit.r_dot * orbit.tau / r,
    })
}

impl ReferenceOrbit {
    /// Specific angular momentum `r² τ`.
    pub fn angular_momentum(&self) -> f64 {
        self.r * self.r * self.tau
    }

    /// Specific orbital energy `½(ṙ² + r²τ²) - μ/r`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.r_dot * self.r_dot + self.r * self.r * self.tau * self.tau) - self.mu / self.r
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.r, self.r_dot, self.tau, self.arg_latitude]
    }

    pub fn from_slice(s: &[f64], mu: f64) -> Self {
        Self { r: s[0], r_dot: s[1], tau: s[2], arg_latitude: s[3], mu }
    }

    /// Time derivative of [`Self::to_array`].
    pub fn state_derivative(&self) -> Result<[f64; 4]> {
        let rates = reference_derivs(self)?;
        Ok([self.r_dot, rates.r_ddot, rates.tau_dot, self.tau])
    }
}

/// Orbit geometry given by altitudes above the mean Earth radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub periapsis_altitude: f64,
    pub apoapsis_altitude: f64,
    pub inclination: f64,
}

impl OrbitSpec {
    pub fn periapsis_radius(&self, c: &PhysicalConstants) -> f64 {
        c.earth_radius + self.periapsis_altitude
    }

    pub fn apoapsis_radius(&self, c: &PhysicalConstants) -> f64 {
        c.earth_radius + self.apoapsis_altitude
    }

    /// Mean of the two altitudes, re-referenced to the Earth's center.
    pub fn semi_major_axis(&self, c: &PhysicalConstants) -> f64 {
        c.earth_radius + 0.5 * (self.periapsis_altitude + self.apoapsis_altitude)
    }

    /// Periapsis speed from vis-viva.
    pub fn periapsis_speed(&self, c: &PhysicalConstants) -> f64 {
        let rp = self.periapsis_radius(c);
        let a = self.semi_major_axis(c);
        (c.mu * (2.0 / rp - 1.0 / a)).sqrt()
    }

    pub fn period(&self, c: &PhysicalConstants) -> f64 {
        let a = self.semi_major_axis(c);
        2.0 * std::f64::consts::PI * (a * a * a / c.mu).sqrt()
    }

    /// Reference state at periapsis, which is placed at the ascending node.
    pub fn initial_state(&self, c: &PhysicalConstants) -> ReferenceOrbit {
        let rp = self.periapsis_radius(c);
        ReferenceOrbit { r: rp, r_dot: 0.0, tau: self.periapsis_speed(c) / rp, arg_latitude: 0.0, mu: c.mu }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(self.periapsis_altitude > 0.0) || !(self.apoapsis_altitude >= self.periapsis_altitude) {
            return Err(Error::config("orbit needs 0 < periapsis_altitude <= apoapsis_altitude"));
        }
        if !self.inclination.is_finite() {
            return Err(Error::config("orbit inclination must be finite"));
        }
        Ok(())
    }
}
