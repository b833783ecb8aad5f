//! Closed-form gain constants, ultimate-bound radii and the decay envelope,
//! plus sampling estimators for the Lipschitz-type constants they need.
//!
//! The estimators return the largest ratio seen over random samples, which
//! is a lower bound on the true constant. Reports built from estimated
//! inputs carry a caveat flag.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::agent::{Gains, LearningRate};
use crate::dnn::Architecture;
use crate::error::{Error, Result};
use crate::topology::SpectralBounds;

/// Bounds entering the gain conditions. Zero is allowed everywhere so the
/// zero-uncertainty limit can be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundEstimates {
    /// Lipschitz constant `L` of the drift over the operating domain.
    pub lipschitz: f64,
    /// Bound `L_Φ` on the weight-Jacobian norm.
    pub l_phi: f64,
    /// `D`, bound on the unmodelled target term.
    pub d_bound: f64,
    pub omega_bar: f64,
    pub omega_dot_bar: f64,
    pub q0_bar: f64,
    pub q0_dot_bar: f64,
    pub theta_bar: f64,
    pub eps_bar: f64,
    /// Hessian spectral bound `M`.
    pub m_bound: f64,
    /// Radius `χ` of the operating domain.
    pub chi: f64,
    pub n_agents: usize,
}

impl BoundEstimates {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lipschitz", self.lipschitz),
            ("l_phi", self.l_phi),
            ("d_bound", self.d_bound),
            ("omega_bar", self.omega_bar),
            ("omega_dot_bar", self.omega_dot_bar),
            ("q0_bar", self.q0_bar),
            ("q0_dot_bar", self.q0_dot_bar),
            ("theta_bar", self.theta_bar),
            ("eps_bar", self.eps_bar),
            ("m_bound", self.m_bound),
            ("chi", self.chi),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("bound {name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.n_agents == 0 {
            return Err(Error::config("bound n_agents must be positive"));
        }
        Ok(())
    }

    /// `Δ̄ = 2 N M θ̄² + ε̄`.
    pub fn delta_bar(&self) -> f64 {
        2.0 * self.n_agents as f64 * self.m_bound * self.theta_bar * self.theta_bar + self.eps_bar
    }
}

/// The six gain conditions `α₁..α₆`; all must be positive for the
/// Lyapunov argument to close.
pub fn compute_alphas(gains: &Gains, h: &SpectralBounds, j: &SpectralBounds, b: &BoundEstimates) -> [f64; 6] {
    let (k1, k2, k3, k4, k5, k6) = (gains.k1, gains.k2, gains.k3, gains.k4, gains.k5, gains.k6);
    let (hmax, hmin) = (h.max, h.min);
    let ln = b.lipschitz * b.n_agents as f64;
    let lp = b.l_phi;
    [
        2.0 - 2.0 * hmax * lp - 4.0 * ln * hmax * (hmax + 1.0),
        k2 * hmin
            - k2
            - ln * (k3 + 2.0 * (2.0 * hmax + 1.0) + (1.0 + k1) * (2.0 * hmax + 1.0) + 2.0)
            - lp * (1.0 + hmax)
            - 2.0,
        2.0 - lp - ln * (hmax + 1.0),
        k4 - k2 - ln * ((k3 + 2.0 + (1.0 + k1) * (2.0 * hmax + 1.0)) + 1.0) * hmax - lp,
        2.0 * k5 - ln * (hmax + 1.0) - lp,
        k6 * j.min - lp * (k3 + 3.0 * hmax + 3.0),
    ]
}

/// Ultimate-bound constant `δ`.
pub fn compute_delta(gains: &Gains, h: &SpectralBounds, j: &SpectralBounds, b: &BoundEstimates) -> f64 {
    let n = b.n_agents as f64;
    let q = b.q0_bar + b.q0_dot_bar;
    let first = (b.delta_bar() + n * b.omega_bar + 2.0 * b.lipschitz * n * n * q).powi(2) / (h.min * gains.k2);
    let second = (h.max * b.d_bound + 2.0 * b.lipschitz * n * n * h.max * q + n * b.omega_bar * h.max).powi(2)
        / (2.0 * gains.k4);
    let third = gains.k6 * b.theta_bar * b.theta_bar * j.max;
    first + second + third
}

/// `λ₁ = ½ min{1, λ_min(Γ⁻¹)}`, `λ₂ = ½ max{1, λ_max(Γ⁻¹)}`.
pub fn compute_lambdas(gamma: &LearningRate) -> Result<(f64, f64)> {
    let ok = match gamma {
        LearningRate::Scalar(g) => *g > 0.0,
        LearningRate::Diagonal(d) => !d.is_empty() && d.iter().all(|x| *x > 0.0),
    };
    if !ok {
        return Err(Error::contract("learning-rate matrix is not positive definite"));
    }
    let (lo, hi) = gamma.inverse_extremes();
    Ok((0.5 * lo.min(1.0), 0.5 * hi.max(1.0)))
}

/// `λ₃ = ½ min αᵢ`.
pub fn lambda3(alphas: &[f64; 6]) -> f64 {
    0.5 * alphas.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    /// Radius of the ultimate bound set; `None` when `λ₃ ≤ 0`.
    pub uub_radius: Option<f64>,
    /// Radius of the stabilizing initial-condition set; `None` when
    /// `λ₃ ≤ 0` or the radicand is negative.
    pub stabilizing_radius: Option<f64>,
    pub chi_feasible: bool,
    /// `Υ = (λ̄_H (k1 + 1) + k3 + 2) χ`.
    pub upsilon: f64,
}

pub fn sets_and_feasibility(lambda1: f64, lambda2: f64, lambda3: f64, delta: f64, chi: f64, upsilon: f64) -> SetReport {
    if !(lambda3 > 0.0) {
        return SetReport { uub_radius: None, stabilizing_radius: None, chi_feasible: false, upsilon };
    }
    let ratio = lambda2 / lambda1;
    let uub = (ratio * delta / lambda3).sqrt();
    let radicand = chi * chi / ratio - delta / lambda3;
    let threshold = uub * (ratio + 1.0).sqrt();
    SetReport {
        uub_radius: Some(uub),
        stabilizing_radius: (radicand >= 0.0).then(|| radicand.sqrt()),
        chi_feasible: chi > threshold,
        upsilon,
    }
}

pub fn upsilon(gains: &Gains, h: &SpectralBounds, chi: f64) -> f64 {
    (h.max * (gains.k1 + 1.0) + gains.k3 + 2.0) * chi
}

/// Bound on `‖z(t)‖` started from `‖z(t₀)‖ = z0`.
pub fn envelope(elapsed: f64, z0: f64, lambda1: f64, lambda2: f64, lambda3: f64, delta: f64) -> Result<f64> {
    if !(lambda3 > 0.0) {
        return Err(Error::contract("envelope needs lambda3 > 0"));
    }
    let decay = (-(lambda3 / lambda2) * elapsed).exp();
    Ok((lambda2 / lambda1).sqrt() * (z0 * z0 * decay + delta / lambda3 * (1.0 - decay)).sqrt())
}

/// Largest ratio seen by a sampling estimator, with the number of samples
/// that contributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledConstant {
    pub value: f64,
    pub samples: usize,
}

fn ball_point(rng: &mut ChaCha8Rng, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = center.len();
    let dir: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let norm = dir.norm();
    if norm == 0.0 || radius == 0.0 {
        return center.clone();
    }
    let scale = radius * rng.random::<f64>().powf(1.0 / n as f64) / norm;
    center + dir * scale
}

/// `max ‖f(a) - f(b)‖ / ‖a - b‖` over random pairs drawn by `sampler`.
/// Pairs closer than `1e-12` are skipped.
pub fn estimate_lipschitz<F, S>(f: F, mut sampler: S, pairs: usize, seed: u64) -> Result<SampledConstant>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    S: FnMut(&mut ChaCha8Rng) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    let mut used = 0;
    for _ in 0..pairs {
        let a = sampler(&mut rng);
        let b = sampler(&mut rng);
        let gap = (&a - &b).norm();
        if !(gap > 1e-12) {
            continue;
        }
        let (fa, fb) = match (f(&a), f(&b)) {
            (Ok(x), Ok(y)) => (x, y),
            _ => continue,
        };
        best = best.max((fa - fb).norm() / gap);
        used += 1;
    }
    Ok(SampledConstant { value: best, samples: used })
}

/// Uniform sampler over a ball.
pub fn ball_sampler(center: DVector<f64>, radius: f64) -> impl FnMut(&mut ChaCha8Rng) -> DVector<f64> {
    move |rng| ball_point(rng, &center, radius)
}

/// `max ‖∇_θ Φ(κ, θ)‖₂` with `‖κ‖ ≤ kappa_radius` and `θ` in the ball of
/// radius `theta_radius` about `theta_center`.
pub fn estimate_l_phi(
    arch: &Architecture,
    theta_center: &DVector<f64>,
    theta_radius: f64,
    kappa_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<SampledConstant> {
    arch.check_len(theta_center)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = DVector::zeros(arch.input_width());
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let kappa = ball_point(&mut rng, &k0, kappa_radius);
        let theta = ball_point(&mut rng, theta_center, theta_radius);
        let (_, trace) = arch.forward(&kappa, &theta)?;
        let jac = arch.jacobian(&kappa, &theta, &trace)?;
        best = best.max(spectral_norm(&jac));
    }
    Ok(SampledConstant { value: best, samples })
}

/// Lipschitz constant of `θ ↦ ∇_θ Φ(κ, θ)` in spectral norm, standing in
/// for the Hessian bound `M`.
pub fn estimate_hessian_bound(
    arch: &Architecture,
    theta_radius: f64,
    kappa_radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<SampledConstant> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = DVector::zeros(arch.input_width());
    let t0 = DVector::zeros(arch.param_count());
    let mut best = 0.0_f64;
    let mut used = 0;
    for _ in 0..pairs {
        let kappa = ball_point(&mut rng, &k0, kappa_radius);
        let a = ball_point(&mut rng, &t0, theta_radius);
        let b = ball_point(&mut rng, &a, 1e-3 * theta_radius.max(1e-3));
        let gap = (&a - &b).norm();
        if !(gap > 1e-12) {
            continue;
        }
        let ja = arch.jacobian(&kappa, &a, &arch.forward(&kappa, &a)?.1)?;
        let jb = arch.jacobian(&kappa, &b, &arch.forward(&kappa, &b)?.1)?;
        best = best.max(spectral_norm(&(ja - jb)) / gap);
        used += 1;
    }
    Ok(SampledConstant { value: best, samples: used })
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Which bound entries were supplied by the user rather than estimated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundProvenance {
    pub estimated: Vec<String>,
    pub heuristic: Vec<String>,
    pub lipschitz_samples: Option<usize>,
    pub l_phi_samples: Option<usize>,
    pub m_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub alphas: [f64; 6],
    pub violated_alphas: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub delta_bar: f64,
    pub delta: f64,
    pub uub_radius: Option<f64>,
    pub stabilizing_radius: Option<f64>,
    pub chi_feasible: bool,
    pub gains_feasible: bool,
    pub upsilon: f64,
    pub h_spectrum: SpectralBounds,
    pub j_spectrum: SpectralBounds,
    pub bounds: BoundEstimates,
    /// Set when any bound was estimated or defaulted rather than supplied.
    pub caveat: bool,
    pub provenance: BoundProvenance,
}

pub fn gain_report(
    gains: &Gains,
    h: &SpectralBounds,
    j: &SpectralBounds,
    bounds: &BoundEstimates,
    provenance: BoundProvenance,
) -> Result<GainReport> {
    bounds.validate()?;
    let alphas = compute_alphas(gains, h, j, bounds);
    let (l1, l2) = compute_lambdas(&gains.gamma)?;
    let l3 = lambda3(&alphas);
    let delta = compute_delta(gains, h, j, bounds);
    let ups = upsilon(gains, h, bounds.chi);
    let sets = sets_and_feasibility(l1, l2, l3, delta, bounds.chi, ups);
    Ok(GainReport {
        alphas,
        violated_alphas: (0..6).filter(|&i| !(alphas[i] > 0.0)).map(|i| i + 1).collect(),
        lambda1: l1,
        lambda2: l2,
        lambda3: l3,
        delta_bar: bounds.delta_bar(),
        delta,
        uub_radius: sets.uub_radius,
        stabilizing_radius: sets.stabilizing_radius,
        chi_feasible: sets.chi_feasible,
        gains_feasible: l3 > 0.0,
        upsilon: ups,
        h_spectrum: *h,
        j_spectrum: *j,
        bounds: bounds.clone(),
        caveat: !provenance.estimated.is_empty() || !provenance.heuristic.is_empty(),
        provenance,
    })
}

impl GainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Two-column text table.
    pub fn table(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        for (i, a) in self.alphas.iter().enumerate() {
            let mark = if *a > 0.0 { "" } else { "  (violated)" };
            rows.push((format!("alpha{}", i + 1), format!("{a:.6e}{mark}")));
        }
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
        rows.push(("lambda1".into(), format!("{:.6e}", self.lambda1)));
        rows.push(("lambda2".into(), format!("{:.6e}", self.lambda2)));
        rows.push(("lambda3".into(), format!("{:.6e}", self.lambda3)));
        rows.push(("delta_bar".into(), format!("{:.6e}", self.delta_bar)));
        rows.push(("delta".into(), format!("{:.6e}", self.delta)));
        rows.push(("uub_radius".into(), opt(self.uub_radius)));
        rows.push(("stabilizing_radius".into(), opt(self.stabilizing_radius)));
        rows.push(("chi".into(), format!("{:.6e}", self.bounds.chi)));
        rows.push(("chi_feasible".into(), self.chi_feasible.to_string()));
        rows.push(("gains_feasible".into(), self.gains_feasible.to_string()));
        rows.push(("upsilon".into(), format!("{:.6e}", self.upsilon)));
        rows.push(("h_min / h_max".into(), format!("{:.6e} / {:.6e}", self.h_spectrum.min, self.h_spectrum.max)));
        rows.push(("j_min / j_max".into(), format!("{:.6e} / {:.6e}", self.j_spectrum.min, self.j_spectrum.max)));
        let sampled = |v: f64, n: Option<usize>| match n {
            Some(n) => format!("{v:.6e}  ({n} samples)"),
            None => format!("{v:.6e}"),
        };
        let p = &self.provenance;
        rows.push(("L".into(), sampled(self.bounds.lipschitz, p.lipschitz_samples)));
        rows.push(("L_phi".into(), sampled(self.bounds.l_phi, p.l_phi_samples)));
        rows.push(("M".into(), sampled(self.bounds.m_bound, p.m_samples)));
        rows.push(("omega_bar".into(), format!("{:.6e}", self.bounds.omega_bar)));
        rows.push(("caveat".into(), self.caveat.to_string()));
        if !self.provenance.estimated.is_empty() {
            rows.push(("estimated".into(), self.provenance.estimated.join(", ")));
        }
        if !self.provenance.heuristic.is_empty() {
            rows.push(("heuristic".into(), self.provenance.heuristic.join(", ")));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}
