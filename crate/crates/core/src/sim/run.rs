//! Closed-loop stepping, logging and the run summary.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::config::{ControlMode, ScenarioConfig, TruthFrame};
use super::integrator::rk4_step;
use super::log::{LogRow, LogSample, TrajectoryLog};
use super::metrics::{summarize_metrics, MetricsSpec, RunMetrics};
use super::world::{Snapshot, World};
use crate::agent::Measurement;
use crate::dynamics::{disturbance_omega, SphericalForm};
use crate::dynamics::spherical::printed;
use crate::dynamics::drift_f;
use crate::error::{Error, Result};
use crate::topology::TopologyReport;

/// A scenario being integrated one step at a time.
pub struct Simulation<'w> {
    world: &'w World,
    seed: u64,
    x: DVector<f64>,
    meas: Vec<Measurement>,
    step: u64,
    steps_per_measurement: u64,
    rescales: u64,
}

impl<'w> Simulation<'w> {
    pub fn new(world: &'w World, seed: u64) -> Result<Self> {
        let (x, meas) = world.initialize(seed)?;
        Ok(Self { world, seed, x, meas, step: 0, steps_per_measurement: world.config.steps_per_measurement(), rescales: 0 })
    }

    pub fn world(&self) -> &World {
        self.world
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.world.config.integrator.dt
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    /// Measurements held over the current epoch.
    pub fn measurements(&self) -> &[Measurement] {
        &self.meas
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        self.world.snapshot(&self.x, &self.meas)
    }

    /// Number of post-step weight rescalings so far.
    pub fn weight_rescales(&self) -> u64 {
        self.rescales
    }

    /// One integrator step; a new measurement epoch starts when the step
    /// lands on one.
    ///
    /// The projection bounds `‖θ̂‖` only in continuous time. A discrete step
    /// can overshoot the outer shell when the raw update is large, so any
    /// weight vector left outside it is scaled back radially.
    pub fn advance(&mut self) -> Result<()> {
        let dt = self.world.config.integrator.dt;
        let meas = &self.meas;
        let world = self.world;
        self.x = rk4_step(self.time(), &self.x, dt, &|t, x: &DVector<f64>| world.derivative(t, x, meas))?;
        let dnn = &world.config.dnn;
        let limit = dnn.theta_bar * (1.0 + dnn.projection_epsilon).sqrt();
        for i in 0..world.layout.n_agents {
            let mut w = self.x.rows_range_mut(world.layout.weights(i));
            let norm = w.norm();
            if norm > limit {
                w *= limit / norm;
                // Rounding can leave the norm an ulp above the shell.
                while w.norm() > limit {
                    w *= 1.0 - f64::EPSILON;
                }
                self.rescales += 1;
            }
        }
        self.step += 1;
        if self.step.is_multiple_of(self.steps_per_measurement) {
            let truth = self.world.truth(&self.x)?;
            self.meas = self.world.measure(&truth, self.seed, self.step / self.steps_per_measurement)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub t: f64,
    pub step: u64,
    pub kind: String,
    pub message: String,
}

impl AbortInfo {
    fn from_error(t: f64, step: u64, e: &Error) -> Self {
        let kind = match e {
            Error::Singularity(_) => "singularity",
            Error::NonFinite(_) => "non_finite",
            Error::Protocol { .. } => "protocol",
            _ => "internal",
        };
        Self { t, step, kind: kind.into(), message: e.to_string() }
    }
}

/// Largest gap between the printed and the derived spherical
/// accelerations over the logged states, per component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TranscriptionCheck {
    pub max_abs: [f64; 3],
    /// `max |printed - derived| / max |derived|` per component.
    pub max_rel: [f64; 3],
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub measurement_rate: f64,
    pub log_rate: f64,
    pub truth_frame: TruthFrame,
    pub spherical_form: SphericalForm,
    pub control: ControlMode,
    pub completed: bool,
    pub final_time: f64,
    pub abort: Option<AbortInfo>,
    pub topology: TopologyReport,
    pub warnings: Vec<String>,
    pub metrics: Option<RunMetrics>,
    pub metrics_error: Option<String>,
    pub transcription: TranscriptionCheck,
    /// Largest `‖ω_i‖` seen at the logged states.
    pub omega_bar: f64,
    /// Largest `‖Δω_i‖ / Δt` between consecutive logged states.
    pub omega_dot_bar: f64,
    pub max_theta_norm: f64,
    /// `θ̄ √(1 + ε)`, the shell the projection keeps weights inside.
    pub projection_limit: f64,
    pub max_initial_rho: f64,
    /// Steps at which some weight vector had to be scaled back onto the
    /// projection shell.
    pub weight_rescales: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub summary: RunSummary,
}

#[derive(Default)]
struct Extremes {
    transcription: TranscriptionCheck,
    derived_max: [f64; 3],
    omega_bar: f64,
    omega_dot_bar: f64,
    last_omega: Option<(f64, Vec<Vector3<f64>>)>,
    max_theta: f64,
}

fn log_sample(world: &World, t: f64, x: &DVector<f64>, snap: &Snapshot, ext: &mut Extremes) -> Result<LogSample> {
    let truth = &snap.truth;
    let guards = &world.config.guards;
    let mut rows = Vec::with_capacity(world.layout.n_agents + 1);
    let q0 = truth.target.q;
    rows.push(LogRow {
        t,
        agent: 0,
        e_norm: 0.0,
        zeta_tilde_norm: 0.0,
        eta_tilde_norm: 0.0,
        u_x: 0.0,
        u_y: 0.0,
        u_z: 0.0,
        theta_norm: 0.0,
        sigma: q0[0],
        gamma: q0[1],
        phi: q0[2],
    });
    let mut omegas = Vec::with_capacity(world.layout.n_agents);
    for i in 0..world.layout.n_agents {
        let s = &truth.spherical[i];
        let err = &snap.errors[i];
        let u = world.applied_control(&snap.commands[i]);
        let theta_norm = world.weights(x, i).norm();
        ext.max_theta = ext.max_theta.max(theta_norm);
        rows.push(LogRow {
            t,
            agent: i + 1,
            e_norm: err.e.norm(),
            zeta_tilde_norm: err.zeta_tilde.norm(),
            eta_tilde_norm: err.eta_tilde.norm(),
            u_x: u[0],
            u_y: u[1],
            u_z: u[2],
            theta_norm,
            sigma: s.sigma(),
            gamma: s.gamma(),
            phi: s.phi(),
        });

        let omega = disturbance_omega(truth.orbit.tau, truth.tau_dot, s, guards)?;
        ext.omega_bar = ext.omega_bar.max(omega.norm());
        omegas.push(omega);

        let pert = world.environment.relative_perturbation(&truth.orbit, &truth.rect[i], &world.config.agents[i])?;
        let derived = drift_f(s, &truth.orbit, &pert, guards)? + omega;
        let printed_form = printed::drift_f(s, &truth.orbit, &pert, guards)?
            + printed::disturbance_omega(truth.orbit.tau, truth.tau_dot, s, guards)?;
        let tc = &mut ext.transcription;
        for c in 0..3 {
            tc.max_abs[c] = tc.max_abs[c].max((printed_form[c] - derived[c]).abs());
            ext.derived_max[c] = ext.derived_max[c].max(derived[c].abs());
        }
        tc.samples += 1;
    }
    if let Some((t_prev, prev)) = &ext.last_omega {
        let dt = t - t_prev;
        for (a, b) in omegas.iter().zip(prev) {
            ext.omega_dot_bar = ext.omega_dot_bar.max((a - b).norm() / dt);
        }
    }
    ext.last_omega = Some((t, omegas));
    Ok(LogSample { t, reference_r: truth.orbit.r, reference_tau: truth.orbit.tau, rows })
}

/// Run a scenario to completion or to the first runtime failure.
///
/// Configuration problems are returned as errors; singularities and
/// non-finite states end the run early and are recorded in the summary.
pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<RunOutput> {
    run_with_metrics(config, seed, &MetricsSpec::default())
}

pub fn run_with_metrics(config: &ScenarioConfig, seed: u64, spec: &MetricsSpec) -> Result<RunOutput> {
    let world = World::new(config)?;
    let topology = config.interaction()?.report();
    let mut warnings = Vec::new();
    if !topology.trackable {
        warnings.push(format!("sensing set is not trackable (rank {} < 3)", topology.rank));
    }
    if !topology.connected {
        warnings.push("communication graph is not connected".into());
    }
    let hash = config.hash();
    let steps = config.steps();
    let per_log = config.steps_per_log();
    let dt = config.integrator.dt;
    let mut log = TrajectoryLog::new(hash.clone(), per_log as f64 * dt);
    let mut ext = Extremes::default();

    let mut sim = Simulation::new(&world, seed)?;
    let first = sim.snapshot()?;
    let max_initial_rho = first.commands.iter().map(|c| c.rho.norm()).fold(0.0, f64::max);

    let mut abort = None;
    let result = (|| -> Result<()> {
        log.samples.push(log_sample(&world, 0.0, sim.state(), &first, &mut ext)?);
        while sim.step_index() < steps {
            sim.advance()?;
            if sim.step_index() % per_log == 0 {
                let snap = sim.snapshot()?;
                log.samples.push(log_sample(&world, sim.time(), sim.state(), &snap, &mut ext)?);
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        if !e.is_runtime() {
            return Err(e);
        }
        abort = Some(AbortInfo::from_error(sim.time(), sim.step_index(), &e));
    }

    for c in 0..3 {
        if ext.derived_max[c] > 0.0 {
            ext.transcription.max_rel[c] = ext.transcription.max_abs[c] / ext.derived_max[c];
        }
    }
    let (metrics, metrics_error) = match summarize_metrics(&log, spec) {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = RunSummary {
        config_hash: hash,
        seed,
        dt,
        duration: config.integrator.duration,
        measurement_rate: config.noise.measurement_rate,
        log_rate: config.integrator.log_rate,
        truth_frame: config.truth_frame,
        spherical_form: config.spherical_form,
        control: config.control,
        completed: abort.is_none(),
        final_time: log.samples.last().map_or(0.0, |s| s.t),
        abort,
        topology,
        warnings,
        metrics,
        metrics_error,
        transcription: ext.transcription,
        omega_bar: ext.omega_bar,
        omega_dot_bar: ext.omega_dot_bar,
        max_theta_norm: ext.max_theta,
        projection_limit: config.dnn.theta_bar * (1.0 + config.dnn.projection_epsilon).sqrt(),
        max_initial_rho,
        weight_rescales: sim.weight_rescales(),
    };
    Ok(RunOutput { log, summary })
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
