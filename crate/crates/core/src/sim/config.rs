//! Scenario description, validation, and assembly of the runtime objects.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{Agent, Gains};
use crate::dnn::{Activation, Architecture};
use crate::dynamics::{
    Atmosphere, Environment, OrbitSpec, PhysicalConstants, SingularityGuards, SpacecraftParams, SphericalForm,
    TargetMode,
};
use crate::error::{Error, Result};
use crate::topology::{Graph, InteractionMatrices, SensingModel};

pub const SCHEMA_VERSION: u32 = 1;

const SHIPPED_SCENARIO: &str = include_str!("../../scenarios/paper_scenario.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Ring,
    Path,
    Complete,
    Edges { edges: Vec<[usize; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    /// Row-major output matrices, one per agent, each `p_i x 3`.
    pub outputs: Vec<Vec<Vec<f64>>>,
    /// Whether agent `i` sees the target (`b_i`).
    pub flags: Vec<bool>,
    /// Relative singular-value tolerance for the rank test.
    #[serde(default)]
    pub rank_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub j2: bool,
    #[serde(default)]
    pub drag: bool,
    #[serde(default)]
    pub atmosphere: Atmosphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub params: SpacecraftParams,
    #[serde(default)]
    pub mode: TargetMode,
    /// `q₀(0)` in the servicers' coordinates; the defunct spacecraft sits at
    /// the frame origin by default.
    #[serde(default)]
    pub initial: [f64; 3],
}

/// Uniform ranges `[low, high]` for the initial spherical offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetSpec {
    pub range: [f64; 2],
    pub azimuth: [f64; 2],
    pub elevation: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnSpec {
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub last_hidden_activation: Activation,
    /// Weight-norm bound `θ̄` used by the projection.
    pub theta_bar: f64,
    pub projection_epsilon: f64,
    /// Seed for weight initialization; the run seed is used when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub initialization: WeightInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation of every target-measurement channel [m].
    pub measurement_std: f64,
    /// Standard deviation added to each neighbour offset component.
    #[serde(default)]
    pub relative_position_std: f64,
    /// Measurement and message refresh rate [Hz].
    pub measurement_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub duration: f64,
    pub log_rate: f64,
}

/// How weight vectors start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    #[default]
    Kaiming,
    Zero,
}

/// Whether the controller's thrust reaches the plant. With `off` the
/// observers and weight updates still run but servicers coast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    #[default]
    ClosedLoop,
    Off,
}

/// Coordinates in which servicer ground truth is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthFrame {
    #[default]
    Spherical,
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub n_agents: usize,
    pub topology: TopologySpec,
    pub sensing: SensingSpec,
    pub orbit: OrbitSpec,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub perturbations: PerturbationSpec,
    pub target: TargetSpec,
    pub agents: Vec<SpacecraftParams>,
    pub initial_offsets: OffsetSpec,
    pub gains: Gains,
    pub dnn: DnnSpec,
    pub noise: NoiseSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub guards: SingularityGuards,
    #[serde(default)]
    pub truth_frame: TruthFrame,
    #[serde(default)]
    pub spherical_form: SphericalForm,
    #[serde(default)]
    pub control: ControlMode,
}

/// `period / dt` as an integer, or `None` when it is not one.
fn steps_per(period: f64, dt: f64) -> Option<u64> {
    let ratio = period / dt;
    let n = ratio.round();
    (n >= 1.0 && (ratio - n).abs() <= 1e-9 * ratio.max(1.0)).then_some(n as u64)
}

impl ScenarioConfig {
    /// The shipped six-servicer scenario.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_SCENARIO).expect("shipped scenario is valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact serialization of the effective configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(self.dnn.widths.clone(), self.dnn.hidden_activation, self.dnn.last_hidden_activation)
    }

    pub fn graph(&self) -> Result<Graph> {
        match &self.topology {
            TopologySpec::Ring => Graph::ring(self.n_agents),
            TopologySpec::Path => Graph::path(self.n_agents),
            TopologySpec::Complete => Graph::complete(self.n_agents),
            TopologySpec::Edges { edges } => Graph::new(self.n_agents, edges.iter().map(|e| (e[0], e[1]))),
        }
    }

    pub fn sensing_model(&self) -> Result<SensingModel> {
        SensingModel::from_rows(&self.sensing.outputs, self.sensing.flags.clone())
    }

    pub fn interaction(&self) -> Result<InteractionMatrices> {
        InteractionMatrices::analyze(&self.graph()?, &self.sensing_model()?, self.sensing.rank_tolerance)
    }

    pub fn environment(&self) -> Environment {
        Environment {
            constants: self.constants,
            inclination: self.orbit.inclination,
            j2: self.perturbations.j2,
            drag: self.perturbations.drag,
            atmosphere: self.perturbations.atmosphere,
            target: self.target.params,
        }
    }

    pub fn build_agents(&self) -> Result<Vec<Agent>> {
        let graph = self.graph()?;
        let sensing = self.sensing_model()?;
        let network = self.architecture()?;
        Ok((0..self.n_agents)
            .map(|i| Agent {
                index: i,
                neighbors: graph.neighbors(i),
                output: sensing.output(i).clone(),
                sensing: sensing.flag(i),
                sensing_block: sensing.sensing_block(i),
                gains: self.gains.clone(),
                network: network.clone(),
                theta_bar: self.dnn.theta_bar,
                projection_epsilon: self.dnn.projection_epsilon,
                guards: self.guards,
            })
            .collect())
    }

    pub fn output_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.sensing_model()?.outputs().to_vec())
    }

    pub fn steps(&self) -> u64 {
        (self.integrator.duration / self.integrator.dt).round() as u64
    }

    pub fn steps_per_measurement(&self) -> u64 {
        steps_per(1.0 / self.noise.measurement_rate, self.integrator.dt).unwrap_or(1)
    }

    pub fn steps_per_log(&self) -> u64 {
        steps_per(1.0 / self.integrator.log_rate, self.integrator.dt).unwrap_or(1)
    }

    /// Replace the step size and/or duration, re-validating the result.
    pub fn with_overrides(&self, dt: Option<f64>, duration: Option<f64>) -> Result<Self> {
        let mut cfg = self.clone();
        if let Some(dt) = dt {
            cfg.integrator.dt = dt;
        }
        if let Some(d) = duration {
            cfg.integrator.duration = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config(format!("version: expected {SCHEMA_VERSION}, got {}", self.version)));
        }
        let n = self.n_agents;
        if n == 0 {
            return Err(Error::config("n_agents: must be positive"));
        }
        if self.agents.len() != n {
            return Err(Error::config(format!("agents: expected {n} entries, got {}", self.agents.len())));
        }
        if self.sensing.outputs.len() != n || self.sensing.flags.len() != n {
            return Err(Error::config(format!(
                "sensing: expected {n} outputs and flags, got {} and {}",
                self.sensing.outputs.len(),
                self.sensing.flags.len()
            )));
        }
        if let Some(tol) = self.sensing.rank_tolerance {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::config("sensing.rank_tolerance: must lie in (0, 1)"));
            }
        }
        self.graph().map_err(|e| Error::config(format!("topology: {e}")))?;
        self.sensing_model().map_err(|e| Error::config(format!("sensing: {e}")))?;
        self.orbit.validate()?;
        for (name, v) in [
            ("constants.mu", self.constants.mu),
            ("constants.earth_radius", self.constants.earth_radius),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(format!("{name}: must be positive")));
            }
        }
        let atm = &self.perturbations.atmosphere;
        if !(atm.rho0 >= 0.0) || !(atm.scale_height > 0.0) {
            return Err(Error::config("perturbations.atmosphere: need rho0 >= 0 and scale_height > 0"));
        }
        self.target.params.validate("target.params")?;
        self.target.mode.validate()?;
        if self.target.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("target.initial: must be finite"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.validate(&format!("agents[{i}]"))?;
        }
        let o = &self.initial_offsets;
        for (name, [lo, hi]) in [("range", o.range), ("azimuth", o.azimuth), ("elevation", o.elevation)] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::config(format!("initial_offsets.{name}: need finite low <= high")));
            }
        }
        if !(o.range[0] > self.guards.sigma_floor) {
            return Err(Error::config("initial_offsets.range: lower bound must exceed guards.sigma_floor"));
        }
        let pole = std::f64::consts::FRAC_PI_2 - self.guards.pole_guard;
        if !(o.elevation[0] > -pole && o.elevation[1] < pole) {
            return Err(Error::config("initial_offsets.elevation: must stay inside the pole guard"));
        }
        if !(self.guards.sigma_floor > 0.0) || !(self.guards.pole_guard > 0.0) {
            return Err(Error::config("guards: sigma_floor and pole_guard must be positive"));
        }
        let arch = self.architecture().map_err(|e| Error::config(format!("dnn: {e}")))?;
        if arch.input_width() != 6 || arch.output_width() != 3 {
            return Err(Error::config("dnn.widths: input width must be 6 and output width 3"));
        }
        if !(self.dnn.theta_bar > 0.0) || !(self.dnn.projection_epsilon > 0.0) {
            return Err(Error::config("dnn: theta_bar and projection_epsilon must be positive"));
        }
        self.gains.validate(arch.param_count())?;
        let nz = &self.noise;
        if !(nz.measurement_std >= 0.0) || !(nz.relative_position_std >= 0.0) {
            return Err(Error::config("noise: standard deviations must be nonnegative"));
        }
        if !(nz.measurement_rate > 0.0) || !nz.measurement_rate.is_finite() {
            return Err(Error::config("noise.measurement_rate: must be positive"));
        }
        let it = &self.integrator;
        if !(it.dt > 0.0) || !(it.duration > 0.0) || !(it.log_rate > 0.0) || !it.duration.is_finite() {
            return Err(Error::config("integrator: dt, duration and log_rate must be positive"));
        }
        if steps_per(it.duration, it.dt).is_none() {
            return Err(Error::config("integrator.duration: must be an integer multiple of dt"));
        }
        let meas = steps_per(1.0 / nz.measurement_rate, it.dt)
            .ok_or_else(|| Error::config("noise.measurement_rate: period must be an integer multiple of dt"))?;
        let log = steps_per(1.0 / it.log_rate, it.dt)
            .ok_or_else(|| Error::config("integrator.log_rate: period must be an integer multiple of dt"))?;
        if meas % log != 0 && log % meas != 0 {
            return Err(Error::config("integrator.log_rate: log and measurement periods must divide one another"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_scenario_loads() {
        let c = ScenarioConfig::shipped();
        assert_eq!(c.n_agents, 6);
        assert_eq!(c.architecture().unwrap().param_count(), 103);
        assert_eq!(c.steps(), 18_000);
        assert_eq!(c.steps_per_measurement(), 5);
        assert_eq!(c.steps_per_log(), 5);
        assert_eq!(c.agents[2].mass, 25.1687);
        assert!(c.interaction().unwrap().trackability.trackable);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ScenarioConfig::shipped();
        assert_eq!(a.hash(), ScenarioConfig::shipped().hash());
        assert_eq!(a.hash().len(), 64);
        let b = a.with_overrides(Some(0.01), None).unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn json_round_trip() {
        let a = ScenarioConfig::shipped();
        assert_eq!(ScenarioConfig::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn missing_and_unknown_fields_are_named() {
        let mut v: serde_json::Value = serde_json::from_str(SHIPPED_SCENARIO).unwrap();
        v.as_object_mut().unwrap().remove("gains");
        let err = ScenarioConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("gains"), "{err}");
        let mut v: serde_json::Value = serde_json::from_str(SHIPPED_SCENARIO).unwrap();
        v["noise"]["colour"] = serde_json::json!(1);
        let err = ScenarioConfig::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn inconsistent_dimensions_are_rejected() {
        let base = ScenarioConfig::shipped();
        let mut c = base.clone();
        c.agents.pop();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = base.clone();
        c.integrator.dt = 0.03;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.integrator.log_rate = 3.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.gains.gamma = crate::agent::LearningRate::Scalar(0.0);
        assert!(c.validate().is_err());
        let mut c = base;
        c.dnn.widths = vec![6, 4, 2];
        assert!(c.validate().is_err());
    }
}
