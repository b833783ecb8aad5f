//! Sampled trajectory and its CSV form.
//!
//! Row `agent = 0` carries the defunct spacecraft (its `sigma, gamma, phi`
//! columns hold `q₀`, everything else is zero); servicers are `1..=N`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 12] = [
    "t",
    "agent",
    "e_norm",
    "zeta_tilde_norm",
    "eta_tilde_norm",
    "u_x",
    "u_y",
    "u_z",
    "theta_norm",
    "sigma",
    "gamma",
    "phi",
];

const HASH_PREFIX: &str = "# config_hash=";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub agent: usize,
    pub e_norm: f64,
    pub zeta_tilde_norm: f64,
    pub eta_tilde_norm: f64,
    pub u_x: f64,
    pub u_y: f64,
    pub u_z: f64,
    pub theta_norm: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSample {
    pub t: f64,
    pub reference_r: f64,
    pub reference_tau: f64,
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub config_hash: String,
    pub period: f64,
    pub samples: Vec<LogSample>,
}

impl TrajectoryLog {
    pub fn new(config_hash: String, period: f64) -> Self {
        Self { config_hash, period, samples: Vec::new() }
    }

    pub fn n_servicers(&self) -> usize {
        self.samples.first().map_or(0, |s| s.rows.len() - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// One column of one agent's rows over time.
    pub fn series(&self, agent: usize, field: impl Fn(&LogRow) -> f64) -> Vec<f64> {
        self.samples.iter().map(|s| field(&s.rows[agent])).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HASH_PREFIX}{}", self.config_hash)?;
        let mut w = csv::Writer::from_writer(out);
        for s in &self.samples {
            for r in &s.rows {
                w.serialize(r).map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::contract(format!("trajectory csv: {other:?}")),
    }
}

/// Parsed trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub config_hash: String,
    pub rows: Vec<LogRow>,
}

pub fn read_csv<R: BufRead>(mut input: R) -> Result<CsvTrajectory> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let config_hash = first
        .trim_end()
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| Error::contract("trajectory csv: missing config hash line"))?
        .to_string();
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::contract(format!("trajectory csv: unexpected header {header:?}")));
    }
    let rows = reader.deserialize().collect::<std::result::Result<Vec<LogRow>, _>>().map_err(csv_error)?;
    Ok(CsvTrajectory { config_hash, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, agent: usize) -> LogRow {
        LogRow {
            t,
            agent,
            e_norm: 1.5,
            zeta_tilde_norm: 0.1,
            eta_tilde_norm: 2e-7,
            u_x: -3.0,
            u_y: 0.0,
            u_z: 1e10,
            theta_norm: 9.0,
            sigma: 2500.0,
            gamma: -0.25,
            phi: 0.125,
        }
    }

    #[test]
    fn csv_round_trip_with_golden_header() {
        let mut log = TrajectoryLog::new("abc".into(), 0.1);
        for k in 0..3 {
            log.samples.push(LogSample {
                t: k as f64 * 0.1,
                reference_r: 7e6,
                reference_tau: 1e-3,
                rows: vec![row(k as f64 * 0.1, 0), row(k as f64 * 0.1, 1)],
            });
        }
        let text = log.to_csv_string().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# config_hash=abc"));
        assert_eq!(lines.next(), Some("t,agent,e_norm,zeta_tilde_norm,eta_tilde_norm,u_x,u_y,u_z,theta_norm,sigma,gamma,phi"));
        let parsed = read_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.config_hash, "abc");
        assert_eq!(parsed.rows.len(), 6);
        assert_eq!(parsed.rows[3], log.samples[1].rows[1]);
    }

    #[test]
    fn missing_hash_line_is_rejected() {
        assert!(read_csv("t,agent\n".as_bytes()).is_err());
    }
}
