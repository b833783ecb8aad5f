//! The concatenated closed-loop state and its time derivative.
//!
//! Layout of the flat state vector:
//!
//! ```text
//! [0..4)    reference orbit (r, ṙ, τ, argument of latitude)
//! [4..10)   target (q₀, q̇₀)
//! then per servicer:
//!   6       ground truth, spherical (q, q̇) or rectangular (pos, vel)
//!   9       observer (η̂, ζ̂, w)
//!   p       weight estimate θ̂
//! ```
//!
//! Measurements are held between epochs. Broadcasts (`g_j u_j`, `θ̂_j`) are
//! exchanged at every derivative evaluation so all agents see the same
//! stage of the integrator.

use std::ops::Range;

use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, RngCore};

use super::config::{ControlMode, ScenarioConfig, TruthFrame, WeightInit};
use super::measurements::{keyed_stream, sample_measurements, NoiseLevels, StreamPurpose};
use crate::agent::{compute_eta, diagnostic_errors, Agent, Command, ErrorSignals, Measurement, ObserverState};
use crate::dnn::{kaiming_init, Architecture};
use crate::dynamics::{
    control_to_rect, rect_relative_accel, rect_to_spherical, reference_derivs, spherical_accel, spherical_to_rect,
    Environment, RectRelState, ReferenceOrbit, SpacecraftParams, SphericalRelState, TargetMode, TargetState,
};
use crate::error::Result;

const REFERENCE_LEN: usize = 4;
const TARGET_LEN: usize = 6;
const PHYSICAL_LEN: usize = 6;
const OBSERVER_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_agents: usize,
    pub n_weights: usize,
}

impl Layout {
    pub fn stride(&self) -> usize {
        PHYSICAL_LEN + OBSERVER_LEN + self.n_weights
    }

    pub fn len(&self) -> usize {
        REFERENCE_LEN + TARGET_LEN + self.n_agents * self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reference(&self) -> Range<usize> {
        0..REFERENCE_LEN
    }

    pub fn target(&self) -> Range<usize> {
        REFERENCE_LEN..REFERENCE_LEN + TARGET_LEN
    }

    pub fn physical(&self, i: usize) -> Range<usize> {
        let start = REFERENCE_LEN + TARGET_LEN + i * self.stride();
        start..start + PHYSICAL_LEN
    }

    pub fn observer(&self, i: usize) -> Range<usize> {
        let start = self.physical(i).end;
        start..start + OBSERVER_LEN
    }

    pub fn weights(&self, i: usize) -> Range<usize> {
        let start = self.observer(i).end;
        start..start + self.n_weights
    }
}

/// Ground truth decoded from a state vector.
#[derive(Debug, Clone)]
pub struct Truth {
    pub orbit: ReferenceOrbit,
    pub tau_dot: f64,
    pub target: TargetState,
    pub spherical: Vec<SphericalRelState>,
    pub rect: Vec<RectRelState>,
}

impl Truth {
    pub fn errors(&self) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        self.spherical
            .iter()
            .map(|s| (self.target.q - s.q, self.target.q_dot - s.q_dot))
            .unzip()
    }
}

/// Everything observable about the closed loop at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub truth: Truth,
    pub commands: Vec<Command>,
    pub errors: Vec<ErrorSignals>,
}

fn vec3(x: &DVector<f64>, start: usize) -> Vector3<f64> {
    Vector3::new(x[start], x[start + 1], x[start + 2])
}

fn put3(x: &mut DVector<f64>, start: usize, v: &Vector3<f64>) {
    x.rows_mut(start, 3).copy_from(v);
}

/// Static part of a scenario: agents, environment and layout.
#[derive(Debug, Clone)]
pub struct World {
    pub config: ScenarioConfig,
    pub agents: Vec<Agent>,
    pub environment: Environment,
    pub architecture: Architecture,
    pub layout: Layout,
    neighbors: Vec<Vec<usize>>,
    sensing_blocks: Vec<Matrix3<f64>>,
    noise: NoiseLevels,
}

impl World {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let agents = config.build_agents()?;
        let architecture = config.architecture()?;
        let layout = Layout { n_agents: config.n_agents, n_weights: architecture.param_count() };
        Ok(Self {
            neighbors: agents.iter().map(|a| a.neighbors.clone()).collect(),
            sensing_blocks: agents.iter().map(|a| a.sensing_block).collect(),
            noise: NoiseLevels {
                measurement_std: config.noise.measurement_std,
                relative_position_std: config.noise.relative_position_std,
            },
            environment: config.environment(),
            config: config.clone(),
            agents,
            architecture,
            layout,
        })
    }

    pub fn target_mode(&self) -> &TargetMode {
        &self.config.target.mode
    }

    fn servicer_params(&self, i: usize) -> &SpacecraftParams {
        &self.config.agents[i]
    }

    pub fn observer(&self, x: &DVector<f64>, i: usize) -> ObserverState {
        let o = self.layout.observer(i).start;
        ObserverState { eta_hat: vec3(x, o), zeta_hat: vec3(x, o + 3), w_aux: vec3(x, o + 6) }
    }

    pub fn weights(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        x.rows_range(self.layout.weights(i)).into_owned()
    }

    pub fn truth(&self, x: &DVector<f64>) -> Result<Truth> {
        let orbit = ReferenceOrbit::from_slice(&x.as_slice()[self.layout.reference()], self.environment.constants.mu);
        let tau_dot = reference_derivs(&orbit)?.tau_dot;
        let t0 = self.layout.target().start;
        let target = TargetState { q: vec3(x, t0), q_dot: vec3(x, t0 + 3) };
        let guards = &self.config.guards;
        let mut spherical = Vec::with_capacity(self.layout.n_agents);
        let mut rect = Vec::with_capacity(self.layout.n_agents);
        for i in 0..self.layout.n_agents {
            let p = self.layout.physical(i).start;
            let (a, b) = (vec3(x, p), vec3(x, p + 3));
            match self.config.truth_frame {
                TruthFrame::Spherical => {
                    let s = SphericalRelState::new(a, b);
                    guards.check(&s)?;
                    rect.push(spherical_to_rect(&s));
                    spherical.push(s);
                }
                TruthFrame::Rectangular => {
                    let r = RectRelState { pos: a, vel: b };
                    spherical.push(rect_to_spherical(&r, guards)?);
                    rect.push(r);
                }
            }
        }
        Ok(Truth { orbit, tau_dot, target, spherical, rect })
    }

    pub fn measure(&self, truth: &Truth, seed: u64, epoch: u64) -> Result<Vec<Measurement>> {
        let q: Vec<Vector3<f64>> = truth.spherical.iter().map(|s| s.q).collect();
        let outputs: Vec<_> = self.agents.iter().map(|a| a.output.clone()).collect();
        let flags: Vec<bool> = self.agents.iter().map(|a| a.sensing).collect();
        sample_measurements(&truth.target.q, &q, &outputs, &flags, &self.neighbors, &self.noise, seed, epoch)
    }

    fn commands(&self, x: &DVector<f64>, truth: &Truth, meas: &[Measurement]) -> Result<Vec<Command>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, agent)| agent.command(&meas[i], &self.observer(x, i), &self.weights(x, i), truth.spherical[i].sigma()))
            .collect()
    }

    /// Truth, agent commands and diagnostic error signals at state `x`.
    pub fn snapshot(&self, x: &DVector<f64>, meas: &[Measurement]) -> Result<Snapshot> {
        let truth = self.truth(x)?;
        let commands = self.commands(x, &truth, meas)?;
        let (e, e_dot) = truth.errors();
        let observers: Vec<_> = (0..self.layout.n_agents).map(|i| self.observer(x, i)).collect();
        let rho: Vec<_> = commands.iter().map(|c| c.rho).collect();
        let errors = diagnostic_errors(&e, &e_dot, &observers, &rho, &self.neighbors, &self.sensing_blocks, &self.config.gains);
        Ok(Snapshot { truth, commands, errors })
    }

    /// Thrust actually delivered to servicer `i`.
    pub fn applied_control(&self, cmd: &Command) -> Vector3<f64> {
        match self.config.control {
            ControlMode::ClosedLoop => cmd.control.u,
            ControlMode::Off => Vector3::zeros(),
        }
    }

    /// Relative acceleration of servicer `i` in the integrated frame.
    pub fn servicer_accel(&self, truth: &Truth, i: usize, u: &Vector3<f64>) -> Result<Vector3<f64>> {
        let pert = self.environment.relative_perturbation(&truth.orbit, &truth.rect[i], self.servicer_params(i))?;
        let s = &truth.spherical[i];
        match self.config.truth_frame {
            TruthFrame::Spherical => spherical_accel(
                s,
                &truth.orbit,
                truth.tau_dot,
                &pert,
                u,
                self.config.spherical_form,
                &self.config.guards,
            ),
            TruthFrame::Rectangular => {
                rect_relative_accel(&truth.rect[i], &truth.orbit, truth.tau_dot, &pert, &control_to_rect(u, s))
            }
        }
    }

    /// `ẋ` with measurements held at `meas`.
    pub fn derivative(&self, t: f64, x: &DVector<f64>, meas: &[Measurement]) -> Result<DVector<f64>> {
        let truth = self.truth(x)?;
        let commands = self.commands(x, &truth, meas)?;
        let weights: Vec<DVector<f64>> = (0..self.layout.n_agents).map(|i| self.weights(x, i)).collect();
        let broadcasts: Vec<_> = self.agents.iter().zip(&commands).zip(&weights).map(|((a, c), w)| a.broadcast(c, w)).collect();

        let mut dx = DVector::zeros(self.layout.len());
        let rd = truth.orbit.state_derivative()?;
        dx.rows_mut(0, REFERENCE_LEN).copy_from_slice(&rd);
        let t0 = self.layout.target().start;
        put3(&mut dx, t0, &truth.target.q_dot);
        put3(&mut dx, t0 + 3, &self.target_mode().accel(&truth.target, t));

        for (i, agent) in self.agents.iter().enumerate() {
            let inbox: Vec<_> = agent.neighbors.iter().map(|&j| (j, &broadcasts[j])).collect();
            let d = agent.derivatives(&commands[i], &self.observer(x, i), &weights[i], &inbox)?;
            let o = self.layout.observer(i).start;
            put3(&mut dx, o, &d.observer.eta_hat_dot);
            put3(&mut dx, o + 3, &d.observer.zeta_hat_dot);
            put3(&mut dx, o + 6, &d.observer.w_aux_dot);
            dx.rows_range_mut(self.layout.weights(i)).copy_from(&d.theta_dot);

            let u = self.applied_control(&commands[i]);
            let acc = self.servicer_accel(&truth, i, &u)?;
            let p = self.layout.physical(i).start;
            put3(&mut dx, p, &vec3(x, p + 3));
            put3(&mut dx, p + 3, &acc);
        }
        Ok(dx)
    }

    /// Initial state and the epoch-0 measurements.
    ///
    /// Servicers start at uniformly drawn spherical offsets with zero
    /// relative rates; observers start at zero with `ρ(0) = 0`.
    pub fn initialize(&self, seed: u64) -> Result<(DVector<f64>, Vec<Measurement>)> {
        let cfg = &self.config;
        let mut x = DVector::zeros(self.layout.len());
        let orbit = cfg.orbit.initial_state(&cfg.constants);
        x.rows_mut(0, REFERENCE_LEN).copy_from_slice(&orbit.to_array());
        put3(&mut x, self.layout.target().start, &Vector3::from(cfg.target.initial));

        let draw = |rng: &mut rand_chacha::ChaCha8Rng, [lo, hi]: [f64; 2]| if lo < hi { rng.random_range(lo..hi) } else { lo };
        let weight_seed = cfg.dnn.seed.unwrap_or(seed);
        let o = &cfg.initial_offsets;
        for i in 0..self.layout.n_agents {
            let mut rng = keyed_stream(seed, StreamPurpose::InitialOffsets, i as u64, 0);
            let q = Vector3::new(draw(&mut rng, o.range), draw(&mut rng, o.azimuth), draw(&mut rng, o.elevation));
            let s = SphericalRelState::new(q, Vector3::zeros());
            let p = self.layout.physical(i).start;
            match cfg.truth_frame {
                TruthFrame::Spherical => put3(&mut x, p, &q),
                TruthFrame::Rectangular => {
                    let r = spherical_to_rect(&s);
                    put3(&mut x, p, &r.pos);
                    put3(&mut x, p + 3, &r.vel);
                }
            }
            let theta = match cfg.dnn.initialization {
                WeightInit::Kaiming => {
                    let mut wr = keyed_stream(weight_seed, StreamPurpose::Weights, i as u64, 0);
                    kaiming_init(&self.architecture, wr.next_u64())
                }
                WeightInit::Zero => DVector::zeros(self.layout.n_weights),
            };
            x.rows_range_mut(self.layout.weights(i)).copy_from(&theta);
        }

        let truth = self.truth(&x)?;
        let meas = self.measure(&truth, seed, 0)?;
        for (i, agent) in self.agents.iter().enumerate() {
            let eta = compute_eta(i, &agent.neighbors, &meas[i], &agent.output, agent.sensing)?;
            let obs = ObserverState::initial(&eta, &cfg.gains);
            let start = self.layout.observer(i).start;
            put3(&mut x, start, &obs.eta_hat);
            put3(&mut x, start + 3, &obs.zeta_hat);
            put3(&mut x, start + 6, &obs.w_aux);
        }
        Ok((x, meas))
    }
}
