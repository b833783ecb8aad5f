//! Plot-data files derived from a run directory's trajectory log.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use servicing_core::dynamics::{spherical_to_rect, SphericalRelState};
use servicing_core::sim::log::{read_csv, LogRow};
use servicing_core::sim::RunSummary;

use crate::{io_failure, read_file, Failure};

/// The trajectory figure covers the first minute only.
pub const TRAJECTORY_WINDOW: f64 = 60.0;

pub const TRAJ_COLUMNS: [&str; 5] = ["t", "agent", "x", "y", "z"];

fn norm_header(prefix: &str, n: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("{prefix}_{i}"))).collect()
}

/// Rows grouped per sample time; every group must list agents `0..=N`.
fn complete_samples(rows: &[LogRow]) -> Result<Vec<&[LogRow]>, Failure> {
    let per = rows.iter().skip(1).position(|r| r.agent == 0).map_or(rows.len(), |k| k + 1);
    if rows.is_empty() || per < 2 {
        return Err(Failure::Io(format!("trajectory has {} rows, too few for one sample", rows.len())));
    }
    if !rows.len().is_multiple_of(per) {
        return Err(Failure::Io(format!(
            "truncated trajectory: {} rows is not a multiple of {per} rows per sample",
            rows.len()
        )));
    }
    let samples: Vec<&[LogRow]> = rows.chunks(per).collect();
    for (k, s) in samples.iter().enumerate() {
        let ordered = s.iter().enumerate().all(|(i, r)| r.agent == i && r.t == s[0].t);
        if !ordered {
            return Err(Failure::Io(format!("malformed trajectory: sample {k} at row {} is out of order", k * per)));
        }
    }
    Ok(samples)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn write_lines(path: &Path, hash: &str, header: &[String], lines: impl Iterator<Item = Vec<f64>>) -> Result<(), Failure> {
    let mut out = create(path)?;
    let mut body = format!("# config_hash={hash}\n{}\n", header.join(","));
    for values in lines {
        let cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        body.push_str(&cells.join(","));
        body.push('\n');
    }
    out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(|e| io_failure(path, e))
}

pub fn export_plots(run: &Path) -> Result<(), Failure> {
    let csv_path = run.join("trajectory.csv");
    let file = File::open(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
    let traj = read_csv(BufReader::new(file)).map_err(|e| Failure::Io(format!("{}: {e}", csv_path.display())))?;
    let samples = complete_samples(&traj.rows)?;
    let n = samples[0].len() - 1;

    let summary_path = run.join("summary.json");
    if summary_path.exists() {
        let summary: RunSummary = serde_json::from_str(&read_file(&summary_path)?)
            .map_err(|e| Failure::Io(format!("{}: {e}", summary_path.display())))?;
        let last = samples.last().unwrap()[0].t;
        if summary.config_hash != traj.config_hash {
            return Err(Failure::Io("trajectory and summary come from different configurations".into()));
        }
        if (last - summary.final_time).abs() > 1e-9 {
            return Err(Failure::Io(format!(
                "truncated trajectory: {} samples end at t = {last} s, summary says {} s",
                samples.len(),
                summary.final_time
            )));
        }
    }

    let hash = &traj.config_hash;
    let traj_header: Vec<String> = TRAJ_COLUMNS.iter().map(|s| s.to_string()).collect();
    let positions = samples.iter().filter(|s| s[0].t <= TRAJECTORY_WINDOW + 1e-9).flat_map(|s| {
        s.iter().map(|r| {
            let q = Vector3::new(r.sigma, r.gamma, r.phi);
            let p = spherical_to_rect(&SphericalRelState::new(q, Vector3::zeros())).pos;
            vec![r.t, r.agent as f64, p.x, p.y, p.z]
        })
    });
    write_lines(&run.join("fig2_traj.csv"), hash, &traj_header, positions)?;

    let norms = |field: fn(&LogRow) -> f64| {
        samples.iter().map(move |s| std::iter::once(s[0].t).chain(s[1..].iter().map(field)).collect::<Vec<f64>>())
    };
    write_lines(&run.join("fig3_zeta.csv"), hash, &norm_header("zeta_tilde_norm", n), norms(|r| r.zeta_tilde_norm))?;
    write_lines(&run.join("fig4_e.csv"), hash, &norm_header("e_norm", n), norms(|r| r.e_norm))?;
    println!("wrote fig2_traj.csv, fig3_zeta.csv, fig4_e.csv to {}", run.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, agent: usize) -> LogRow {
        LogRow {
            t,
            agent,
            e_norm: 0.0,
            zeta_tilde_norm: 0.0,
            eta_tilde_norm: 0.0,
            u_x: 0.0,
            u_y: 0.0,
            u_z: 0.0,
            theta_norm: 0.0,
            sigma: 1.0,
            gamma: 0.0,
            phi: 0.0,
        }
    }

    #[test]
    fn grouping_detects_truncation() {
        let rows: Vec<LogRow> = (0..3).flat_map(|k| (0..3).map(move |a| row(k as f64, a))).collect();
        assert_eq!(complete_samples(&rows).unwrap().len(), 3);
        assert!(complete_samples(&rows[..8]).is_err());
        let mut shuffled = rows.clone();
        shuffled.swap(4, 5);
        assert!(complete_samples(&shuffled).is_err());
    }

    #[test]
    fn norm_headers() {
        assert_eq!(norm_header("e_norm", 2), vec!["t", "e_norm_1", "e_norm_2"]);
    }
}
