use std::fmt;

use serde::{Deserialize, Serialize};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coordinate or model singularities. Hitting one aborts a run; nothing is clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Singularity {
    /// Relative range at or below the configured floor.
    RangeFloor { sigma: f64, floor: f64 },
    /// Elevation within the pole guard of +/- pi/2.
    Pole { phi: f64, guard: f64 },
    /// Reference orbital radius is not positive.
    ReferenceRadius { r: f64 },
    /// Servicer position coincides with the central body.
    CentralBody { distance: f64 },
}

impl fmt::Display for Singularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Singularity::RangeFloor { sigma, floor } => {
                write!(f, "range {sigma:.6e} m at or below floor {floor:.3e} m")
            }
            Singularity::Pole { phi, guard } => {
                write!(f, "elevation {phi:.9} rad outside the {guard:.1e} rad pole guard")
            }
            Singularity::ReferenceRadius { r } => write!(f, "reference radius {r:.6e} m is not positive"),
            Singularity::CentralBody { distance } => {
                write!(f, "servicer within {distance:.3e} m of the central body")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singularity: {0}")]
    Singularity(Singularity),

    #[error("protocol error at agent {agent}: {detail}")]
    Protocol { agent: usize, detail: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<Singularity> for Error {
    fn from(s: Singularity) -> Self {
        Error::Singularity(s)
    }
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures that happen while integrating a valid scenario.
    pub fn is_runtime(&self) -> bool {
        matches!(self, Error::Singularity(_) | Error::NonFinite(_) | Error::Protocol { .. })
    }
}
