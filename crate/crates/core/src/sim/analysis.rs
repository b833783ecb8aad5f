//! Gain report for a scenario, with bounds either supplied or estimated.

use nalgebra::{DVector, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::dynamics::{disturbance_omega, drift_f, spherical_to_rect, SphericalRelState, TargetMode};
use crate::error::{Error, Result};
use crate::stability::{
    estimate_hessian_bound, estimate_l_phi, estimate_lipschitz, gain_report, BoundEstimates, BoundProvenance,
    GainReport,
};

pub const LIPSCHITZ_PAIRS: usize = 10_000;
pub const L_PHI_SAMPLES: usize = 10_000;
pub const HESSIAN_PAIRS: usize = 2_000;

/// Rate ranges used when sampling states for the drift and disturbance
/// bounds: `|σ̇| ≤ 1 m/s`, `|γ̇|, |φ̇| ≤ 1e-3 rad/s`.
const RANGE_RATE: f64 = 1.0;
const ANGLE_RATE: f64 = 1e-3;

/// User-pinned bounds. Any field left out is estimated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOverrides {
    pub lipschitz: Option<f64>,
    pub l_phi: Option<f64>,
    pub d_bound: Option<f64>,
    pub omega_bar: Option<f64>,
    pub omega_dot_bar: Option<f64>,
    pub q0_bar: Option<f64>,
    pub q0_dot_bar: Option<f64>,
    pub theta_bar: Option<f64>,
    pub eps_bar: Option<f64>,
    pub m_bound: Option<f64>,
    pub chi: Option<f64>,
}

impl BoundOverrides {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config(format!("bounds file: {e}")))
    }
}

fn sample_state(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> SphericalRelState {
    let o = &cfg.initial_offsets;
    let q = Vector3::new(
        rng.random_range(o.range[0]..=o.range[1]),
        rng.random_range(o.azimuth[0]..=o.azimuth[1]),
        rng.random_range(o.elevation[0]..=o.elevation[1]),
    );
    let q_dot = Vector3::new(
        rng.random_range(-RANGE_RATE..=RANGE_RATE),
        rng.random_range(-ANGLE_RATE..=ANGLE_RATE),
        rng.random_range(-ANGLE_RATE..=ANGLE_RATE),
    );
    SphericalRelState::new(q, q_dot)
}

fn as_state(v: &DVector<f64>) -> SphericalRelState {
    SphericalRelState::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))
}

/// Largest `‖ω‖` and `‖dω/dt‖` over sampled states at the initial reference
/// orbit, the rate taken along `q̇` by a forward difference.
fn omega_bounds(cfg: &ScenarioConfig, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let orbit = cfg.orbit.initial_state(&cfg.constants);
    let tau_dot = crate::dynamics::reference_derivs(&orbit)?.tau_dot;
    let guards = &cfg.guards;
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let h = 1e-3;
    let (mut w_max, mut w_dot_max) = (0.0_f64, 0.0_f64);
    for _ in 0..samples {
        let s = sample_state(&mut rng, cfg);
        let w = disturbance_omega(orbit.tau, tau_dot, &s, guards)?;
        let ahead = SphericalRelState::new(s.q + s.q_dot * h, s.q_dot);
        let w_ahead = disturbance_omega(orbit.tau, tau_dot, &ahead, guards)?;
        w_max = w_max.max(w.norm());
        w_dot_max = w_dot_max.max((w_ahead - w).norm() / h);
    }
    Ok((w_max, w_dot_max))
}

/// `(q̄₀, q̄̇₀, D)`: target excursion bounds and a bound on its acceleration.
fn target_bounds(cfg: &ScenarioConfig) -> (f64, f64, f64) {
    let offset = Vector3::from(cfg.target.initial).norm();
    let (q, qd) = cfg.target.mode.bounds();
    let accel = match cfg.target.mode {
        TargetMode::Stationary => 0.0,
        TargetMode::BoundedDrift { natural_frequency: w0, damping_ratio: xi, bias_amplitude, .. } => {
            w0 * w0 * (q + offset) + 2.0 * xi * w0 * qd + Vector3::from(bias_amplitude).norm()
        }
    };
    (q + offset, qd, accel)
}

/// Gain report for `cfg`. Bounds missing from `overrides` are estimated by
/// sampling; the report's caveat flag is set whenever that happens.
pub fn scenario_gain_report(cfg: &ScenarioConfig, overrides: Option<&BoundOverrides>, seed: u64) -> Result<GainReport> {
    let pinned = overrides.cloned().unwrap_or_default();
    let interaction = cfg.interaction()?;
    let arch = cfg.architecture()?;
    let n = cfg.n_agents;
    let mut prov = BoundProvenance::default();

    let lipschitz = match pinned.lipschitz {
        Some(v) => v,
        None => {
            let orbit = cfg.orbit.initial_state(&cfg.constants);
            let env = cfg.environment();
            let params = cfg.agents[0];
            let guards = cfg.guards;
            let f = |v: &DVector<f64>| -> Result<DVector<f64>> {
                let s = as_state(v);
                let pert = env.relative_perturbation(&orbit, &spherical_to_rect(&s), &params)?;
                let a = drift_f(&s, &orbit, &pert, &guards)?;
                Ok(DVector::from_column_slice(a.as_slice()))
            };
            let sampler = |rng: &mut ChaCha8Rng| {
                let s = sample_state(rng, cfg);
                DVector::from_iterator(6, s.q.iter().chain(s.q_dot.iter()).copied())
            };
            let est = estimate_lipschitz(f, sampler, LIPSCHITZ_PAIRS, seed)?;
            prov.estimated.push("lipschitz".into());
            prov.lipschitz_samples = Some(est.samples);
            est.value
        }
    };

    let theta_bar = pinned.theta_bar.unwrap_or(cfg.dnn.theta_bar);
    let theta_shell = theta_bar * (1.0 + cfg.dnn.projection_epsilon).sqrt();
    // Network inputs are `[η, ζ̂]`; `η` scales like `λ̄_H` times the largest
    // initial range.
    let kappa_radius = interaction.h_spectrum.max * cfg.initial_offsets.range[1];

    let l_phi = match pinned.l_phi {
        Some(v) => v,
        None => {
            let center = DVector::zeros(arch.param_count());
            let est = estimate_l_phi(&arch, &center, theta_shell, kappa_radius, L_PHI_SAMPLES, seed ^ 1)?;
            prov.estimated.push("l_phi".into());
            prov.l_phi_samples = Some(est.samples);
            est.value
        }
    };
    let m_bound = match pinned.m_bound {
        Some(v) => v,
        None => {
            let est = estimate_hessian_bound(&arch, theta_shell, kappa_radius, HESSIAN_PAIRS, seed ^ 2)?;
            prov.estimated.push("m_bound".into());
            prov.m_samples = Some(est.samples);
            est.value
        }
    };

    let (omega_bar, omega_dot_bar) = match (pinned.omega_bar, pinned.omega_dot_bar) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let (w, wd) = omega_bounds(cfg, LIPSCHITZ_PAIRS, seed ^ 3)?;
            if a.is_none() {
                prov.estimated.push("omega_bar".into());
            }
            if b.is_none() {
                prov.heuristic.push("omega_dot_bar".into());
            }
            (a.unwrap_or(w), b.unwrap_or(wd))
        }
    };

    let (q0, q0_dot, accel) = target_bounds(cfg);
    let mut pick = |v: Option<f64>, fallback: f64, name: &str| {
        v.unwrap_or_else(|| {
            prov.heuristic.push(name.into());
            fallback
        })
    };
    let q0_bar = pick(pinned.q0_bar, q0, "q0_bar");
    let q0_dot_bar = pick(pinned.q0_dot_bar, q0_dot, "q0_dot_bar");
    let d_bound = pick(pinned.d_bound, accel, "d_bound");
    let eps_bar = pick(pinned.eps_bar, 0.0, "eps_bar");
    // Every component of z starts within about twice the largest range,
    // except the weight error, which is within 2θ̄.
    let chi_default = (n as f64).sqrt() * (2.0 * cfg.initial_offsets.range[1] + 2.0 * theta_bar);
    let chi = pick(pinned.chi, chi_default, "chi");

    let bounds = BoundEstimates {
        lipschitz,
        l_phi,
        d_bound,
        omega_bar,
        omega_dot_bar,
        q0_bar,
        q0_dot_bar,
        theta_bar,
        eps_bar,
        m_bound,
        chi,
        n_agents: n,
    };
    gain_report(&cfg.gains, &interaction.h_spectrum, &interaction.j_spectrum, &bounds, prov)
}
