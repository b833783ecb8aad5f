//! Per-agent estimation and control.
//!
//! Everything an agent computes is a function of its own sensing (`y_i` and
//! the neighbour offsets `d_ij`), its own observer/weight states, its own
//! range `σ_i`, and what neighbours broadcast (`g_j u_j`, `θ̂_j`). Ground
//! truth enters only through [`diagnostic_errors`], which the simulator uses
//! for logging.
//!
//! The observer realizes the derivative-free filter
//!
//! ```text
//! ρ   = w - (k3 + k4) η̃
//! ẇ   = (1 - k3² - k3 k4) η̃ - (k3 + k4 + k5) ρ
//! η̂̇  = ζ̂
//! ζ̂̇  = Σ_j (g_j u_j - g_i u_i) - b_i C_iᵀC_i g_i u_i - (k3² - 2) η̃ - (2 k3 + k4 + k5) ρ
//! ```
//!
//! with `η̃ = η - η̂`, and the controller is
//! `u = g⁻¹(Φ(κ, θ̂) + k2 (k1 η + ζ̂ - k3 η̃ - ρ))`, `κ = [η; ζ̂]`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dnn::{smooth_projection, Architecture, EvalTrace};
use crate::dynamics::{control_effectiveness_g, control_effectiveness_g_inv, SingularityGuards};
use crate::error::{Error, Result};

/// Learning-rate matrix `Γ`, either `γ I` or a positive diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearningRate {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl LearningRate {
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            LearningRate::Scalar(g) if *g > 0.0 && g.is_finite() => Ok(()),
            LearningRate::Scalar(g) => Err(Error::config(format!("gamma must be positive definite, got {g}"))),
            LearningRate::Diagonal(d) => {
                if d.len() != p {
                    return Err(Error::config(format!("gamma diagonal has {} entries, network has {p} weights", d.len())));
                }
                if d.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    return Err(Error::config("gamma must be positive definite (all diagonal entries > 0)"));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            LearningRate::Scalar(g) => v * *g,
            LearningRate::Diagonal(d) => DVector::from_fn(v.len(), |i, _| d[i] * v[i]),
        }
    }

    /// Extreme eigenvalues of `Γ⁻¹`.
    pub fn inverse_extremes(&self) -> (f64, f64) {
        match self {
            LearningRate::Scalar(g) => (1.0 / g, 1.0 / g),
            LearningRate::Diagonal(d) => {
                let max = d.iter().copied().fold(f64::MIN, f64::max);
                let min = d.iter().copied().fold(f64::MAX, f64::min);
                (1.0 / max, 1.0 / min)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub gamma: LearningRate,
}

impl Gains {
    pub fn uniform(k: f64, k6: f64, gamma: f64) -> Self {
        Self { k1: k, k2: k, k3: k, k4: k, k5: k, k6, gamma: LearningRate::Scalar(gamma) }
    }

    /// Controller gains must be nonnegative; `Γ` positive definite.
    pub fn validate(&self, p: usize) -> Result<()> {
        for (name, k) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("k4", self.k4), ("k5", self.k5), ("k6", self.k6)] {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::config(format!("gain {name} must be finite and nonnegative, got {k}")));
            }
        }
        self.gamma.validate(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObserverState {
    pub eta_hat: Vector3<f64>,
    pub zeta_hat: Vector3<f64>,
    /// Integral state realizing `ρ`.
    pub w_aux: Vector3<f64>,
}

impl ObserverState {
    /// Zero estimates, with the auxiliary state chosen so that `ρ(0) = 0`.
    pub fn initial(eta0: &Vector3<f64>, gains: &Gains) -> Self {
        Self { eta_hat: Vector3::zeros(), zeta_hat: Vector3::zeros(), w_aux: *eta0 * (gains.k3 + gains.k4) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverDerivs {
    pub eta_hat_dot: Vector3<f64>,
    pub zeta_hat_dot: Vector3<f64>,
    pub w_aux_dot: Vector3<f64>,
}

/// Sensed quantities of one agent at a measurement epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// `y_i = C_i (q_0 - q_i) + ν`; empty when the agent cannot see the target.
    pub y: DVector<f64>,
    /// `(j, d_ij)` for every neighbour `j`.
    pub offsets: Vec<(usize, Vector3<f64>)>,
}

/// What agent `j` shares with its neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub effective_control: Vector3<f64>,
    pub weights: DVector<f64>,
}

fn check_senders(agent: usize, neighbors: &[usize], senders: impl Iterator<Item = usize>) -> Result<()> {
    let mut got: Vec<usize> = senders.collect();
    got.sort_unstable();
    if got != neighbors {
        return Err(Error::Protocol {
            agent,
            detail: format!("expected messages from {neighbors:?}, got {got:?}"),
        });
    }
    Ok(())
}

/// `η_i = Σ_j d_ij + b_i C_iᵀ y_i`.
pub fn compute_eta(
    agent: usize,
    neighbors: &[usize],
    measurement: &Measurement,
    output: &DMatrix<f64>,
    sensing: bool,
) -> Result<Vector3<f64>> {
    check_senders(agent, neighbors, measurement.offsets.iter().map(|(j, _)| *j))?;
    let mut eta: Vector3<f64> = measurement.offsets.iter().map(|(_, d)| *d).sum();
    if sensing {
        if measurement.y.len() != output.nrows() {
            return Err(Error::Protocol {
                agent,
                detail: format!("measurement has {} channels, output matrix has {}", measurement.y.len(), output.nrows()),
            });
        }
        let cty = output.transpose() * &measurement.y;
        eta += Vector3::new(cty[0], cty[1], cty[2]);
    }
    Ok(eta)
}

/// `ρ = w - (k3 + k4) η̃`.
pub fn rho_value(w_aux: &Vector3<f64>, eta_tilde: &Vector3<f64>, gains: &Gains) -> Vector3<f64> {
    w_aux - eta_tilde * (gains.k3 + gains.k4)
}

/// Observer right-hand sides.
#[allow(clippy::too_many_arguments)]
pub fn observer_derivs(
    agent: usize,
    neighbors: &[usize],
    obs: &ObserverState,
    neighbor_controls: &[(usize, Vector3<f64>)],
    own_effective_control: &Vector3<f64>,
    eta_tilde: &Vector3<f64>,
    rho: &Vector3<f64>,
    gains: &Gains,
    sensing_block: &Matrix3<f64>,
) -> Result<ObserverDerivs> {
    check_senders(agent, neighbors, neighbor_controls.iter().map(|(j, _)| *j))?;
    let (k3, k4, k5) = (gains.k3, gains.k4, gains.k5);
    let gu = own_effective_control;
    let coupling: Vector3<f64> = neighbor_controls.iter().map(|(_, gj)| gj - gu).sum();
    let zeta_hat_dot = coupling - sensing_block * gu - eta_tilde * (k3 * k3 - 2.0) - rho * (2.0 * k3 + k4 + k5);
    Ok(ObserverDerivs {
        eta_hat_dot: obs.zeta_hat,
        zeta_hat_dot,
        w_aux_dot: eta_tilde * (1.0 - k3 * k3 - k3 * k4) - rho * (k3 + k4 + k5),
    })
}

/// Controller output together with the network evaluation it used.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub u: Vector3<f64>,
    /// `g(σ) u`, the quantity broadcast to neighbours.
    pub effective_control: Vector3<f64>,
    pub network_output: Vector3<f64>,
    pub kappa: DVector<f64>,
    pub trace: EvalTrace,
}

pub fn network_input(eta: &Vector3<f64>, zeta_hat: &Vector3<f64>) -> DVector<f64> {
    DVector::from_iterator(6, eta.iter().chain(zeta_hat.iter()).copied())
}

/// `u = g⁻¹(σ) (Φ(κ, θ̂) + k2 (k1 η + ζ̂ - k3 η̃ - ρ))`.
#[allow(clippy::too_many_arguments)]
pub fn control_input(
    eta: &Vector3<f64>,
    zeta_hat: &Vector3<f64>,
    eta_tilde: &Vector3<f64>,
    rho: &Vector3<f64>,
    theta_hat: &DVector<f64>,
    sigma: f64,
    gains: &Gains,
    network: &Architecture,
    guards: &SingularityGuards,
) -> Result<ControlOutput> {
    let g_inv = control_effectiveness_g_inv(sigma, guards)?;
    let g = control_effectiveness_g(sigma, guards)?;
    let kappa = network_input(eta, zeta_hat);
    let (phi, trace) = network.forward(&kappa, theta_hat)?;
    if phi.len() != 3 {
        return Err(Error::config(format!("network output width must be 3, got {}", phi.len())));
    }
    let phi = Vector3::new(phi[0], phi[1], phi[2]);
    let inner = phi + (eta * gains.k1 + zeta_hat - eta_tilde * gains.k3 - rho) * gains.k2;
    let u = g_inv * inner;
    Ok(ControlOutput { u, effective_control: g * u, network_output: phi, kappa, trace })
}

/// Projected weight rate
/// `proj(Γ (∇Φᵀ (ζ̂ + k1 η) - k6 (θ̂ - Σ_j (θ̂_j - θ̂))), θ̂, θ̄)`.
#[allow(clippy::too_many_arguments)]
pub fn adaptation_derivs(
    agent: usize,
    neighbors: &[usize],
    theta_hat: &DVector<f64>,
    neighbor_weights: &[(usize, &DVector<f64>)],
    eta: &Vector3<f64>,
    zeta_hat: &Vector3<f64>,
    jacobian: &DMatrix<f64>,
    gains: &Gains,
    theta_bar: f64,
    projection_epsilon: f64,
) -> Result<DVector<f64>> {
    check_senders(agent, neighbors, neighbor_weights.iter().map(|(j, _)| *j))?;
    if jacobian.shape() != (3, theta_hat.len()) {
        return Err(Error::contract(format!(
            "jacobian shape {:?} does not match 3 x {}",
            jacobian.shape(),
            theta_hat.len()
        )));
    }
    let signal = zeta_hat + eta * gains.k1;
    let mut raw = jacobian.tr_mul(&DVector::from_column_slice(signal.as_slice()));
    let mut consensus = theta_hat.clone();
    for (_, tj) in neighbor_weights {
        if tj.len() != theta_hat.len() {
            return Err(Error::Protocol { agent, detail: "neighbour weight vector has the wrong length".into() });
        }
        consensus -= *tj - theta_hat;
    }
    raw -= consensus * gains.k6;
    let raw = gains.gamma.apply(&raw);
    Ok(smooth_projection(&raw, theta_hat, theta_bar, projection_epsilon))
}

/// Static description of one agent.
#[derive(Debug, Clone)]
pub struct Agent {
    pub index: usize,
    pub neighbors: Vec<usize>,
    pub output: DMatrix<f64>,
    pub sensing: bool,
    pub sensing_block: Matrix3<f64>,
    pub gains: Gains,
    pub network: Architecture,
    pub theta_bar: f64,
    pub projection_epsilon: f64,
    pub guards: SingularityGuards,
}

/// First phase of an agent update: everything computable before neighbour
/// broadcasts arrive.
#[derive(Debug, Clone)]
pub struct Command {
    pub eta: Vector3<f64>,
    pub eta_tilde: Vector3<f64>,
    pub rho: Vector3<f64>,
    pub control: ControlOutput,
}

#[derive(Debug, Clone)]
pub struct AgentDerivs {
    pub observer: ObserverDerivs,
    pub theta_dot: DVector<f64>,
}

impl Agent {
    pub fn command(&self, m: &Measurement, obs: &ObserverState, theta_hat: &DVector<f64>, sigma: f64) -> Result<Command> {
        let eta = compute_eta(self.index, &self.neighbors, m, &self.output, self.sensing)?;
        let eta_tilde = eta - obs.eta_hat;
        let rho = rho_value(&obs.w_aux, &eta_tilde, &self.gains);
        let control = control_input(
            &eta,
            &obs.zeta_hat,
            &eta_tilde,
            &rho,
            theta_hat,
            sigma,
            &self.gains,
            &self.network,
            &self.guards,
        )?;
        Ok(Command { eta, eta_tilde, rho, control })
    }

    pub fn broadcast(&self, cmd: &Command, theta_hat: &DVector<f64>) -> Broadcast {
        Broadcast { effective_control: cmd.control.effective_control, weights: theta_hat.clone() }
    }

    /// Second phase: observer and weight rates given neighbour broadcasts.
    pub fn derivatives(
        &self,
        cmd: &Command,
        obs: &ObserverState,
        theta_hat: &DVector<f64>,
        inbox: &[(usize, &Broadcast)],
    ) -> Result<AgentDerivs> {
        let controls: Vec<(usize, Vector3<f64>)> = inbox.iter().map(|(j, b)| (*j, b.effective_control)).collect();
        let observer = observer_derivs(
            self.index,
            &self.neighbors,
            obs,
            &controls,
            &cmd.control.effective_control,
            &cmd.eta_tilde,
            &cmd.rho,
            &self.gains,
            &self.sensing_block,
        )?;
        let jac = self.network.jacobian(&cmd.control.kappa, theta_hat, &cmd.control.trace)?;
        let weights: Vec<(usize, &DVector<f64>)> = inbox.iter().map(|(j, b)| (*j, &b.weights)).collect();
        let theta_dot = adaptation_derivs(
            self.index,
            &self.neighbors,
            theta_hat,
            &weights,
            &cmd.eta,
            &obs.zeta_hat,
            &jac,
            &self.gains,
            self.theta_bar,
            self.projection_epsilon,
        )?;
        Ok(AgentDerivs { observer, theta_dot })
    }
}

/// Truth-side error signals of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSignals {
    pub e: Vector3<f64>,
    pub e_dot: Vector3<f64>,
    pub r: Vector3<f64>,
    pub eta: Vector3<f64>,
    pub zeta: Vector3<f64>,
    pub eta_tilde: Vector3<f64>,
    pub zeta_tilde: Vector3<f64>,
    pub r_tilde: Vector3<f64>,
    pub rho: Vector3<f64>,
}

/// Error signals from ground truth: `e_i = q_0 - q_i`, `r = ė + k1 e`,
/// noise-free `η_i = b_i C_iᵀC_i e_i - Σ_j (e_j - e_i)`, `ζ_i = η̇_i`,
/// `η̃ = η - η̂`, `ζ̃ = ζ - ζ̂`, `r̃ = ζ̃ + k3 η̃ + ρ`.
///
/// `rho` is each agent's own filter value, which depends on what it measured.
pub fn diagnostic_errors(
    e: &[Vector3<f64>],
    e_dot: &[Vector3<f64>],
    observers: &[ObserverState],
    rho: &[Vector3<f64>],
    neighbors: &[Vec<usize>],
    sensing_blocks: &[Matrix3<f64>],
    gains: &Gains,
) -> Vec<ErrorSignals> {
    (0..e.len())
        .map(|i| {
            let mut eta = sensing_blocks[i] * e[i];
            let mut zeta = sensing_blocks[i] * e_dot[i];
            for &j in &neighbors[i] {
                eta -= e[j] - e[i];
                zeta -= e_dot[j] - e_dot[i];
            }
            let eta_tilde = eta - observers[i].eta_hat;
            let zeta_tilde = zeta - observers[i].zeta_hat;
            ErrorSignals {
                e: e[i],
                e_dot: e_dot[i],
                r: e_dot[i] + e[i] * gains.k1,
                eta,
                zeta,
                eta_tilde,
                zeta_tilde,
                r_tilde: zeta_tilde + eta_tilde * gains.k3 + rho[i],
                rho: rho[i],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::stack3;
    use crate::topology::{build_interaction_matrix, build_laplacian, Graph, SensingModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gains() -> Gains {
        Gains::uniform(0.65, 1e-4, 0.01)
    }

    fn arch() -> Architecture {
        Architecture::swish_tanh(&[6, 4, 4, 4, 4, 3]).unwrap()
    }

    fn v3(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
        Vector3::from_fn(|_, _| rng.random_range(-s..s))
    }

    #[test]
    fn eta_examples() {
        let m = Measurement { y: DVector::from_vec(vec![1.0, -2.0, 0.5]), offsets: vec![] };
        let eta = compute_eta(0, &[], &m, &DMatrix::identity(3, 3), true).unwrap();
        assert_eq!(eta, Vector3::new(1.0, -2.0, 0.5));

        let m = Measurement { y: DVector::zeros(0), offsets: vec![(1, Vector3::new(1.0, 2.0, 3.0))] };
        let eta = compute_eta(0, &[1], &m, &DMatrix::identity(3, 3), false).unwrap();
        assert_eq!(eta, Vector3::new(1.0, 2.0, 3.0));

        let missing = Measurement { y: DVector::zeros(0), offsets: vec![] };
        assert!(matches!(
            compute_eta(0, &[1], &missing, &DMatrix::identity(3, 3), false),
            Err(Error::Protocol { agent: 0, .. })
        ));
    }

    #[test]
    fn measured_eta_equals_analytic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Graph::path(3).unwrap();
        for _ in 0..50 {
            let q0 = v3(&mut rng, 10.0);
            let q: Vec<_> = (0..3).map(|_| v3(&mut rng, 100.0)).collect();
            let outputs: Vec<DMatrix<f64>> =
                (0..3).map(|i| DMatrix::from_fn(i + 1, 3, |_, _| rng.random_range(-2.0..2.0))).collect();
            let flags = [true, false, true];
            let e: Vec<_> = q.iter().map(|qi| q0 - qi).collect();
            for i in 0..3 {
                let nb = g.neighbors(i);
                let offsets = nb.iter().map(|&j| (j, q[j] - q[i])).collect();
                let y = &outputs[i] * DVector::from_column_slice((q0 - q[i]).as_slice());
                let m = Measurement { y, offsets };
                let measured = compute_eta(i, &nb, &m, &outputs[i], flags[i]).unwrap();
                let block = if flags[i] { outputs[i].transpose() * &outputs[i] } else { DMatrix::zeros(3, 3) };
                let be = &block * DVector::from_column_slice(e[i].as_slice());
                let mut analytic = Vector3::new(be[0], be[1], be[2]);
                for &j in &nb {
                    analytic -= e[j] - e[i];
                }
                assert!((measured - analytic).amax() <= 1e-12 * analytic.amax().max(1.0));
            }
        }
    }

    #[test]
    fn rho_starts_at_zero_and_has_known_equilibrium() {
        let k = gains();
        let eta0 = Vector3::new(3.0, -1.0, 7.0);
        let obs = ObserverState::initial(&eta0, &k);
        assert_eq!(rho_value(&obs.w_aux, &eta0, &k), Vector3::zeros());
        // for constant η̃ = c: ẇ = 0 at ρ = (1 - k3² - k3k4)/(k3 + k4 + k5) c
        let c = Vector3::new(1.0, 2.0, -3.0);
        let ratio: f64 = (1.0 - 0.65 * 0.65 * 2.0) / 1.95;
        assert!((ratio - 0.079487).abs() < 1e-6);
        let rho = c * ratio;
        let d = observer_derivs(0, &[], &obs, &[], &Vector3::zeros(), &c, &rho, &k, &Matrix3::zeros()).unwrap();
        assert!(d.w_aux_dot.norm() < 1e-15);
    }

    #[test]
    fn observer_examples() {
        let k = gains();
        let obs = ObserverState::default();
        let z = Vector3::zeros();
        let d = observer_derivs(0, &[], &obs, &[], &z, &z, &z, &k, &Matrix3::identity()).unwrap();
        assert_eq!((d.eta_hat_dot, d.zeta_hat_dot, d.w_aux_dot), (z, z, z));
        let d = observer_derivs(0, &[], &obs, &[], &z, &Vector3::x(), &z, &k, &Matrix3::identity()).unwrap();
        assert!((d.zeta_hat_dot - Vector3::new(1.5775, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn stacked_observer_matches_ensemble_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = gains();
        let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let sensing = SensingModel::new(
            (0..3).map(|_| DMatrix::from_fn(2, 3, |_, _| rng.random_range(-2.0..2.0))).collect(),
            vec![true, true, false],
        )
        .unwrap();
        let h = build_interaction_matrix(&build_laplacian(&g), &sensing).unwrap();
        let gu: Vec<_> = (0..3).map(|_| v3(&mut rng, 5.0)).collect();
        let et: Vec<_> = (0..3).map(|_| v3(&mut rng, 5.0)).collect();
        let rho: Vec<_> = (0..3).map(|_| v3(&mut rng, 5.0)).collect();
        let mut stacked = Vec::new();
        for i in 0..3 {
            let nb = g.neighbors(i);
            let msgs: Vec<_> = nb.iter().map(|&j| (j, gu[j])).collect();
            let d = observer_derivs(i, &nb, &ObserverState::default(), &msgs, &gu[i], &et[i], &rho[i], &k, &sensing.sensing_block(i))
                .unwrap();
            stacked.push(d.zeta_hat_dot);
        }
        let ensemble = -(&h * stack3(&gu)) - stack3(&et) * (k.k3 * k.k3 - 2.0) - stack3(&rho) * (2.0 * k.k3 + k.k4 + k.k5);
        assert!((stack3(&stacked) - ensemble).amax() < 1e-12);
    }

    #[test]
    fn control_examples() {
        let k = gains();
        let a = arch();
        let z = Vector3::zeros();
        let g = SingularityGuards::default();
        let theta0 = DVector::zeros(103);
        let out = control_input(&z, &z, &z, &z, &theta0, 1.0, &k, &a, &g).unwrap();
        assert_eq!(out.u, z);
        let out = control_input(&Vector3::x(), &z, &z, &z, &theta0, 1.0, &k, &a, &g).unwrap();
        assert!((out.u - Vector3::new(0.4225, 0.0, 0.0)).norm() < 1e-15);
        let eta = Vector3::new(1.0, 2.0, 3.0);
        let one = control_input(&eta, &z, &z, &z, &theta0, 1.0, &k, &a, &g).unwrap();
        let two = control_input(&eta, &z, &z, &z, &theta0, 2.0, &k, &a, &g).unwrap();
        assert_eq!(two.u[0], one.u[0]);
        assert_eq!(two.u[1], 2.0 * one.u[1]);
        assert_eq!(two.u[2], 2.0 * one.u[2]);
        assert!(control_input(&eta, &z, &z, &z, &theta0, 0.0, &k, &a, &g).is_err());
    }

    #[test]
    fn adaptation_examples() {
        let a = arch();
        let k = gains();
        let theta = crate::dnn::kaiming_init(&a, 3) * 0.1;
        let jac = DMatrix::from_element(3, 103, 0.3);
        // ζ̂ + k1 η = 0 and equal neighbour weights: pure forgetting
        let eta = Vector3::new(1.0, -1.0, 2.0);
        let zeta_hat = -eta * k.k1;
        let nb = [(1usize, &theta)];
        let d = adaptation_derivs(0, &[1], &theta, &nb, &eta, &zeta_hat, &jac, &k, 10.0, 0.1).unwrap();
        assert!((d + &theta * (0.01 * 1e-4)).amax() < 1e-18);
        let z = Vector3::zeros();
        let zero = DVector::zeros(103);
        let d = adaptation_derivs(0, &[], &zero, &[], &z, &z, &DMatrix::zeros(3, 103), &k, 10.0, 0.1).unwrap();
        assert_eq!(d, zero);
        assert!(adaptation_derivs(0, &[1], &theta, &[], &z, &z, &jac, &k, 10.0, 0.1).is_err());
    }

    #[test]
    fn interior_adaptation_is_unprojected() {
        let a = arch();
        let k = gains();
        let theta = crate::dnn::kaiming_init(&a, 5) * 0.1;
        let eta = Vector3::new(0.2, 0.1, -0.3);
        let zh = Vector3::new(-0.5, 0.0, 0.4);
        let (_, tr) = a.forward(&network_input(&eta, &zh), &theta).unwrap();
        let jac = a.jacobian(&network_input(&eta, &zh), &theta, &tr).unwrap();
        let d = adaptation_derivs(0, &[], &theta, &[], &eta, &zh, &jac, &k, 10.0, 0.1).unwrap();
        let s = zh + eta * k.k1;
        let expected = (jac.transpose() * DVector::from_column_slice(s.as_slice()) - &theta * k.k6) * 0.01;
        assert!((d - expected).amax() < 1e-16);
    }

    #[test]
    fn diagnostics_satisfy_ensemble_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let k = gains();
        let g = Graph::ring(4).unwrap();
        let sensing = SensingModel::new(
            (0..4).map(|_| DMatrix::from_fn(2, 3, |_, _| rng.random_range(-2.0..2.0))).collect(),
            vec![true, false, true, false],
        )
        .unwrap();
        let h = build_interaction_matrix(&build_laplacian(&g), &sensing).unwrap();
        let blocks: Vec<_> = (0..4).map(|i| sensing.sensing_block(i)).collect();
        let nbs = g.neighbor_lists();
        for _ in 0..20 {
            let e: Vec<_> = (0..4).map(|_| v3(&mut rng, 100.0)).collect();
            let ed: Vec<_> = (0..4).map(|_| v3(&mut rng, 5.0)).collect();
            let obs: Vec<_> = (0..4)
                .map(|_| ObserverState { eta_hat: v3(&mut rng, 50.0), zeta_hat: v3(&mut rng, 5.0), w_aux: Vector3::zeros() })
                .collect();
            let rho: Vec<_> = (0..4).map(|_| v3(&mut rng, 1.0)).collect();
            let sig = diagnostic_errors(&e, &ed, &obs, &rho, &nbs, &blocks, &k);
            let r = stack3(&sig.iter().map(|s| s.r).collect::<Vec<_>>());
            let zeta = stack3(&sig.iter().map(|s| s.zeta).collect::<Vec<_>>());
            let eta = stack3(&sig.iter().map(|s| s.eta).collect::<Vec<_>>());
            assert!((&h * &r - (zeta + &eta * k.k1)).amax() < 1e-10);
            assert!((&h * stack3(&e) - eta).amax() < 1e-10);

            // ensemble controller: g⁻¹(Φ + k2 H r - k2 r̃) with noise-free η
            let a = arch();
            let theta = crate::dnn::kaiming_init(&a, 1) * 0.01;
            let guards = SingularityGuards::default();
            for i in 0..4 {
                let s = &sig[i];
                let sigma = rng.random_range(10.0..100.0);
                let out = control_input(&s.eta, &obs[i].zeta_hat, &s.eta_tilde, &s.rho, &theta, sigma, &k, &a, &guards).unwrap();
                let hr = (&h * &r).fixed_rows::<3>(3 * i).into_owned();
                let ensemble = control_effectiveness_g_inv(sigma, &guards).unwrap()
                    * (out.network_output + (hr - s.r_tilde) * k.k2);
                assert!((out.u - ensemble).amax() <= 1e-10 * out.u.amax().max(1.0));
            }
        }
    }

    #[test]
    fn perfect_observer_has_no_estimation_error() {
        let k = gains();
        let e = vec![Vector3::new(1.0, 2.0, 3.0)];
        let ed = vec![Vector3::new(-1.0, 0.5, 0.0)];
        let obs = vec![ObserverState { eta_hat: e[0], zeta_hat: ed[0], w_aux: Vector3::zeros() }];
        let sig = diagnostic_errors(&e, &ed, &obs, &[Vector3::zeros()], &[vec![]], &[Matrix3::identity()], &k);
        assert_eq!(sig[0].eta, e[0]);
        assert_eq!(sig[0].zeta, ed[0]);
        assert_eq!(sig[0].eta_tilde, Vector3::zeros());
        assert_eq!(sig[0].zeta_tilde, Vector3::zeros());
    }
}
