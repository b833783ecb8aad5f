//! Relative orbital motion of a servicer about the defunct spacecraft.
//!
//! The defunct spacecraft flies the reference orbit and carries a rotating
//! local frame: `x` radial, `y` in-track, `z` cross-track. A servicer's
//! relative position is either rectangular `(x, y, z)` or spherical
//! `(σ, γ, φ)` = (range, azimuth, elevation) with
//!
//! ```text
//! x = σ cosφ cosγ,   y = σ cosφ sinγ,   z = σ sinφ
//! ```

mod perturbations;
mod reference;
mod relative;
pub mod spherical;
mod target;
mod transforms;

pub use perturbations::{
    drag_accel, j2_accel_inertial, lvlh_to_inertial, Atmosphere, Environment, PhysicalConstants,
    SpacecraftParams,
};
pub use reference::{reference_derivs, OrbitSpec, ReferenceOrbit, ReferenceRates};
pub use relative::rect_relative_accel;
pub use spherical::{
    control_effectiveness_g, control_effectiveness_g_inv, control_to_rect, disturbance_omega, drift_f,
    project_accel, spherical_accel, SphericalForm,
};
pub use target::{TargetMode, TargetState};
pub use transforms::{
    rect_to_spherical, spherical_basis, spherical_to_rect, RectRelState, SingularityGuards,
    SphericalRelState,
};
