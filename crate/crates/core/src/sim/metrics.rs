//! Steady-state, transient and settling statistics of logged signals.

use serde::{Deserialize, Serialize};

use super::log::TrajectoryLog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSpec {
    /// Length of the trailing window treated as steady state [s].
    pub window: f64,
    /// Settling band `[low, high]`; when absent, `[0, 1.2 × steady max]`.
    pub band: Option<[f64; 2]>,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self { window: 60.0, band: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMetrics {
    pub steady_mean: f64,
    pub steady_max: f64,
    pub initial: f64,
    pub final_value: f64,
    pub peak: f64,
    pub peak_time: f64,
    /// First time after which the signal stays in the band; `None` if the
    /// last sample is outside it.
    pub settling_time: Option<f64>,
}

/// First sample time from which every later sample lies in `[lo, hi]`.
pub fn settling_time(times: &[f64], values: &[f64], band: [f64; 2]) -> Option<f64> {
    let inside = |v: f64| v >= band[0] && v <= band[1];
    let mut start = None;
    for (k, &v) in values.iter().enumerate().rev() {
        if !inside(v) {
            break;
        }
        start = Some(k);
    }
    start.map(|k| times[k])
}

pub fn signal_metrics(times: &[f64], values: &[f64], spec: &MetricsSpec) -> Result<SignalMetrics> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::contract("metrics need a nonempty signal with matching times"));
    }
    let t_end = *times.last().unwrap();
    let span = t_end - times[0];
    if !(spec.window > 0.0) || spec.window > span + 1e-9 {
        return Err(Error::contract(format!(
            "steady-state window {} s exceeds the logged span {span} s",
            spec.window
        )));
    }
    let from = t_end - spec.window - 1e-9;
    let steady: Vec<f64> = times.iter().zip(values).filter(|(t, _)| **t >= from).map(|(_, v)| *v).collect();
    let steady_mean = steady.iter().sum::<f64>() / steady.len() as f64;
    let steady_max = steady.iter().copied().fold(f64::MIN, f64::max);
    let (peak_idx, peak) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |best, (k, v)| if v > best.1 { (k, v) } else { best });
    let band = spec.band.unwrap_or([0.0, 1.2 * steady_max]);
    Ok(SignalMetrics {
        steady_mean,
        steady_max,
        initial: values[0],
        final_value: *values.last().unwrap(),
        peak,
        peak_time: times[peak_idx],
        settling_time: settling_time(times, values, band),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    /// Servicer index as it appears in the CSV (1-based).
    pub agent: usize,
    pub e: SignalMetrics,
    pub zeta_tilde: SignalMetrics,
    pub eta_tilde: SignalMetrics,
    pub max_theta_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub spec: MetricsSpec,
    pub agents: Vec<AgentMetrics>,
    pub median_steady_e: f64,
    pub median_steady_zeta_tilde: f64,
    /// `max_i ‖e_i‖` at the first and last samples.
    pub e_envelope_initial: f64,
    pub e_envelope_final: f64,
    /// Latest time at which any agent's `‖ζ̃_i‖` peaks.
    pub zeta_tilde_peak_time: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize_metrics(log: &TrajectoryLog, spec: &MetricsSpec) -> Result<RunMetrics> {
    if log.samples.is_empty() {
        return Err(Error::contract("empty trajectory log"));
    }
    let times = log.times();
    let mut agents = Vec::new();
    for a in 1..=log.n_servicers() {
        let series = |f: fn(&super::log::LogRow) -> f64| log.series(a, f);
        let theta = series(|r| r.theta_norm);
        agents.push(AgentMetrics {
            agent: a,
            e: signal_metrics(&times, &series(|r| r.e_norm), spec)?,
            zeta_tilde: signal_metrics(&times, &series(|r| r.zeta_tilde_norm), spec)?,
            eta_tilde: signal_metrics(&times, &series(|r| r.eta_tilde_norm), spec)?,
            max_theta_norm: theta.iter().copied().fold(0.0, f64::max),
        });
    }
    let envelope = |k: usize| log.samples[k].rows[1..].iter().map(|r| r.e_norm).fold(0.0, f64::max);
    Ok(RunMetrics {
        spec: *spec,
        median_steady_e: median(&agents.iter().map(|m| m.e.steady_mean).collect::<Vec<_>>()),
        median_steady_zeta_tilde: median(&agents.iter().map(|m| m.zeta_tilde.steady_mean).collect::<Vec<_>>()),
        e_envelope_initial: envelope(0),
        e_envelope_final: envelope(log.samples.len() - 1),
        zeta_tilde_peak_time: agents.iter().map(|m| m.zeta_tilde.peak_time).fold(0.0, f64::max),
        agents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dt: f64, t_end: f64) -> Vec<f64> {
        (0..=(t_end / dt).round() as usize).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn constant_signal() {
        let t = grid(0.1, 360.0);
        let v = vec![3.5; t.len()];
        let m = signal_metrics(&t, &v, &MetricsSpec::default()).unwrap();
        assert_eq!(m.steady_mean, 3.5);
        assert_eq!(m.settling_time, Some(0.0));
    }

    #[test]
    fn exponential_settling_matches_closed_form() {
        let dt = 0.01;
        let t = grid(dt, 360.0);
        let amplitude: f64 = 100.0;
        let v: Vec<f64> = t.iter().map(|t| 5.0 + amplitude * (-0.05 * t).exp()).collect();
        let spec = MetricsSpec { window: 60.0, band: Some([4.0, 6.0]) };
        let m = signal_metrics(&t, &v, &spec).unwrap();
        let crossing = amplitude.ln() / 0.05;
        let ts = m.settling_time.unwrap();
        assert!(ts >= crossing && ts - crossing <= dt + 1e-9, "{ts} vs {crossing}");
        assert_eq!(m.peak_time, 0.0);
    }

    #[test]
    fn never_settling_and_window_errors() {
        let t = grid(1.0, 100.0);
        let v: Vec<f64> = t.to_vec();
        let spec = MetricsSpec { window: 10.0, band: Some([0.0, 1.0]) };
        assert_eq!(signal_metrics(&t, &v, &spec).unwrap().settling_time, None);
        let spec = MetricsSpec { window: 200.0, band: None };
        assert!(signal_metrics(&t, &v, &spec).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
