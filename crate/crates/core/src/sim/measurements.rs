//! Sensor sampling and the keyed random streams behind it.
//!
//! Every stream is a ChaCha generator whose 32-byte seed is the run seed,
//! a purpose tag, the agent index and the epoch index, so a measurement's
//! noise depends only on which epoch it belongs to, never on the step size.

use nalgebra::{DMatrix, DVector, Vector3};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::agent::Measurement;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    InitialOffsets = 1,
    Weights = 2,
    TargetNoise = 3,
    OffsetNoise = 4,
}

pub fn keyed_stream(seed: u64, purpose: StreamPurpose, agent: u64, epoch: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&agent.to_le_bytes());
    key[24..].copy_from_slice(&epoch.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// What the sensors need to know about ground truth at an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevels {
    pub measurement_std: f64,
    pub relative_position_std: f64,
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::config(format!("noise standard deviation {std}: {e}")))
}

/// `y_i = C_i (q₀ - q_i) + ν` for sensing agents and `d_ij = q_j - q_i`
/// (plus optional noise) for every neighbour.
#[allow(clippy::too_many_arguments)]
pub fn sample_measurements(
    target_q: &Vector3<f64>,
    servicer_q: &[Vector3<f64>],
    outputs: &[DMatrix<f64>],
    flags: &[bool],
    neighbors: &[Vec<usize>],
    noise: &NoiseLevels,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Measurement>> {
    let y_noise = normal(noise.measurement_std)?;
    let d_noise = normal(noise.relative_position_std)?;
    (0..servicer_q.len())
        .map(|i| {
            let y = if flags[i] {
                let e = target_q - servicer_q[i];
                let mut y = &outputs[i] * DVector::from_column_slice(e.as_slice());
                if noise.measurement_std > 0.0 {
                    let mut rng = keyed_stream(seed, StreamPurpose::TargetNoise, i as u64, epoch);
                    y.iter_mut().for_each(|v| *v += y_noise.sample(&mut rng));
                }
                y
            } else {
                DVector::zeros(0)
            };
            let mut rng = keyed_stream(seed, StreamPurpose::OffsetNoise, i as u64, epoch);
            let offsets = neighbors[i]
                .iter()
                .map(|&j| {
                    let mut d = servicer_q[j] - servicer_q[i];
                    if noise.relative_position_std > 0.0 {
                        d.iter_mut().for_each(|v| *v += d_noise.sample(&mut rng));
                    }
                    (j, d)
                })
                .collect();
            Ok(Measurement { y, offsets })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Vec<DMatrix<f64>>, Vec<Vec<usize>>) {
        let c = vec![
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, -1.0, 3.0]),
            DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.5]),
        ];
        (c, vec![vec![1], vec![0]])
    }

    #[test]
    fn noiseless_measurements_are_exact() {
        let (c, nb) = setup();
        let q0 = Vector3::new(1.0, 0.1, -0.2);
        let q = vec![Vector3::new(3000.0, 0.2, 0.1), Vector3::new(4000.0, -0.3, 0.0)];
        let levels = NoiseLevels { measurement_std: 0.0, relative_position_std: 0.0 };
        let m = sample_measurements(&q0, &q, &c, &[true, false], &nb, &levels, 1, 0).unwrap();
        let e = q0 - q[0];
        assert_eq!(m[0].y, DVector::from_vec(vec![e[0] + 2.0 * e[1], -e[1] + 3.0 * e[2]]));
        assert_eq!(m[1].y.len(), 0);
        assert_eq!(m[0].offsets, vec![(1, q[1] - q[0])]);
        assert_eq!(m[1].offsets, vec![(0, q[0] - q[1])]);
    }

    #[test]
    fn co_located_servicer_sees_pure_noise() {
        let (c, nb) = setup();
        let q = vec![Vector3::new(5.0, 0.0, 0.0), Vector3::new(5.0, 0.0, 0.0)];
        let levels = NoiseLevels { measurement_std: 0.5f64.sqrt(), relative_position_std: 0.0 };
        let a = sample_measurements(&q[0], &q, &c, &[true, true], &nb, &levels, 9, 3).unwrap();
        let b = sample_measurements(&Vector3::zeros(), &[Vector3::zeros(), Vector3::zeros()], &c, &[true, true], &nb, &levels, 9, 3)
            .unwrap();
        assert_eq!(a[0].y, b[0].y);
        assert!(a[0].y.norm() > 0.0);
    }

    #[test]
    fn noise_variance_per_channel() {
        let dist = normal(0.5f64.sqrt()).unwrap();
        let mut rng = keyed_stream(42, StreamPurpose::TargetNoise, 0, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((0.48..=0.52).contains(&var), "{var}");
    }

    #[test]
    fn streams_are_keyed_by_epoch_not_order() {
        let (c, nb) = setup();
        let q = vec![Vector3::new(100.0, 0.0, 0.0), Vector3::new(200.0, 0.0, 0.0)];
        let levels = NoiseLevels { measurement_std: 1.0, relative_position_std: 0.1 };
        let later = sample_measurements(&Vector3::zeros(), &q, &c, &[true, true], &nb, &levels, 5, 7).unwrap();
        let _ = sample_measurements(&Vector3::zeros(), &q, &c, &[true, true], &nb, &levels, 5, 6).unwrap();
        let again = sample_measurements(&Vector3::zeros(), &q, &c, &[true, true], &nb, &levels, 5, 7).unwrap();
        assert_eq!(later, again);
        let other = sample_measurements(&Vector3::zeros(), &q, &c, &[true, true], &nb, &levels, 5, 8).unwrap();
        assert_ne!(later[0].y, other[0].y);
    }
}
