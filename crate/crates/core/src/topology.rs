//! Communication graph, heterogeneous sensing, and the interaction matrices
//! that decide whether the swarm can reconstruct the target state.
//!
//! Agents are indexed `0..n` throughout the crate. Each agent `i` measures a
//! partial relative position `y_i = C_i (q_0 - q_i)` when its sensing flag
//! `b_i` is set, and exchanges information with its graph neighbours.
//!
//! The interaction matrix is
//!
//! ```text
//! H = (L ⊗ I_3) + blkdiag(b_1 C_1ᵀC_1, ..., b_N C_NᵀC_N)
//! ```
//!
//! and the weight-consensus matrix is `J = (L + I_N) ⊗ I_p`, whose spectrum
//! is the spectrum of `L + I_N` with multiplicity `p`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, ensure_square, kron, symmetrize};

/// Asymmetry accepted by [`spectral_bounds`] before it is treated as a caller bug.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Static undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n_agents: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Build a graph from unordered pairs. Duplicates and reversed pairs collapse.
    pub fn new(n_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::config("graph needs at least one agent"));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::config(format!("self-loop on agent {a}")));
            }
            if a >= n_agents || b >= n_agents {
                return Err(Error::config(format!(
                    "edge ({a}, {b}) out of range for {n_agents} agents"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { n_agents, edges: set })
    }

    pub fn empty(n_agents: usize) -> Result<Self> {
        Self::new(n_agents, [])
    }

    /// Cycle `0 - 1 - ... - (n-1) - 0`. Two agents give a single edge.
    pub fn ring(n_agents: usize) -> Result<Self> {
        let edges: Vec<_> = match n_agents {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            n => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        Self::new(n_agents, edges)
    }

    pub fn path(n_agents: usize) -> Result<Self> {
        Self::new(n_agents, (1..n_agents).map(|i| (i - 1, i)))
    }

    pub fn complete(n_agents: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n_agents {
            for j in (i + 1)..n_agents {
                edges.push((i, j));
            }
        }
        Self::new(n_agents, edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbour set of `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        (0..self.n_agents).map(|i| self.neighbors(i)).collect()
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.neighbor_lists();
        let mut seen = vec![false; self.n_agents];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Per-agent output matrices `C_i` (m_i x 3) and target-sensing flags `b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingModel {
    outputs: Vec<DMatrix<f64>>,
    flags: Vec<bool>,
}

impl SensingModel {
    pub fn new(outputs: Vec<DMatrix<f64>>, flags: Vec<bool>) -> Result<Self> {
        if outputs.len() != flags.len() {
            return Err(Error::config(format!(
                "{} output matrices but {} sensing flags",
                outputs.len(),
                flags.len()
            )));
        }
        for (i, c) in outputs.iter().enumerate() {
            if c.ncols() != 3 || c.nrows() == 0 {
                return Err(Error::config(format!(
                    "output matrix of agent {i} must be m x 3 with m >= 1, got {}x{}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("output matrix of agent {i} has non-finite entries")));
            }
        }
        Ok(Self { outputs, flags })
    }

    /// Build from row-major nested rows, e.g. parsed JSON.
    pub fn from_rows(rows: &[Vec<Vec<f64>>], flags: Vec<bool>) -> Result<Self> {
        let mut outputs = Vec::with_capacity(rows.len());
        for (i, m) in rows.iter().enumerate() {
            if m.iter().any(|r| r.len() != 3) {
                return Err(Error::config(format!("output matrix of agent {i} must have 3 columns")));
            }
            let flat: Vec<f64> = m.iter().flatten().copied().collect();
            outputs.push(DMatrix::from_row_slice(m.len(), 3, &flat));
        }
        Self::new(outputs, flags)
    }

    pub fn n_agents(&self) -> usize {
        self.outputs.len()
    }

    pub fn output(&self, i: usize) -> &DMatrix<f64> {
        &self.outputs[i]
    }

    pub fn outputs(&self) -> &[DMatrix<f64>] {
        &self.outputs
    }

    pub fn flag(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// `b_i C_iᵀ C_i` as a 3x3 block.
    pub fn sensing_block(&self, i: usize) -> Matrix3<f64> {
        if !self.flags[i] {
            return Matrix3::zeros();
        }
        let c = &self.outputs[i];
        let ctc = c.transpose() * c;
        Matrix3::from_fn(|r, col| ctc[(r, col)])
    }

    /// `Σ_i b_i C_iᵀ C_i`.
    pub fn collective_gram(&self) -> Matrix3<f64> {
        (0..self.n_agents()).map(|i| self.sensing_block(i)).sum()
    }

    pub fn with_flags(&self, flags: Vec<bool>) -> Result<Self> {
        Self::new(self.outputs.clone(), flags)
    }
}

/// `L = D - A`.
pub fn build_laplacian(graph: &Graph) -> DMatrix<f64> {
    let n = graph.n_agents();
    let mut l = DMatrix::zeros(n, n);
    for (a, b) in graph.edges() {
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    l
}

/// `H = (L ⊗ I_3) + blkdiag(b_i C_iᵀ C_i)`.
pub fn build_interaction_matrix(laplacian: &DMatrix<f64>, sensing: &SensingModel) -> Result<DMatrix<f64>> {
    let n = ensure_square(laplacian, "laplacian")?;
    if sensing.n_agents() != n {
        return Err(Error::config(format!(
            "sensing model covers {} agents but the graph has {n}",
            sensing.n_agents()
        )));
    }
    let mut h = kron(laplacian, &DMatrix::identity(3, 3));
    for i in 0..n {
        let block = sensing.sensing_block(i);
        let mut view = h.view_mut((3 * i, 3 * i), (3, 3));
        view += block;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trackability {
    pub trackable: bool,
    pub rank: usize,
}

/// Default rank threshold factor: `σ_max · 3 · ε · max_dim` with `max_dim = 3`.
pub fn default_rank_tolerance() -> f64 {
    3.0 * f64::EPSILON * 3.0
}

/// Numerical rank of `Σ b_i C_iᵀ C_i`; trackable iff the rank is 3.
///
/// `relative_tol` scales the largest singular value to form the threshold;
/// `None` uses [`default_rank_tolerance`].
pub fn check_trackability(sensing: &SensingModel, relative_tol: Option<f64>) -> Trackability {
    let gram = sensing.collective_gram();
    let sv = gram.singular_values();
    let smax = sv.max();
    let threshold = smax * relative_tol.unwrap_or_else(default_rank_tolerance);
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    Trackability { trackable: rank == 3, rank }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub min: f64,
    pub max: f64,
}

/// Extreme eigenvalues of a symmetric matrix.
///
/// Input asymmetry above [`SYMMETRY_TOLERANCE`] (scaled by the largest entry
/// when that exceeds one) is rejected; smaller asymmetry is absorbed by
/// symmetrizing first.
pub fn spectral_bounds(matrix: &DMatrix<f64>) -> Result<SpectralBounds> {
    let n = ensure_square(matrix, "spectral input")?;
    if n == 0 {
        return Err(Error::contract("spectral input is empty"));
    }
    let scale = matrix.amax().max(1.0);
    let skew = asymmetry(matrix);
    if skew > SYMMETRY_TOLERANCE * scale {
        return Err(Error::contract(format!("matrix is not symmetric (max asymmetry {skew:.3e})")));
    }
    let eig = SymmetricEigen::new(symmetrize(matrix));
    Ok(SpectralBounds { min: eig.eigenvalues.min(), max: eig.eigenvalues.max() })
}

/// Everything the gain analysis needs from the graph and sensing model.
#[derive(Debug, Clone)]
pub struct InteractionMatrices {
    pub laplacian: DMatrix<f64>,
    pub h_matrix: DMatrix<f64>,
    pub h_spectrum: SpectralBounds,
    /// Spectrum of `J = (L + I_N) ⊗ I_p`, computed on `L + I_N`.
    pub j_spectrum: SpectralBounds,
    pub trackability: Trackability,
    pub connected: bool,
}

impl InteractionMatrices {
    pub fn analyze(graph: &Graph, sensing: &SensingModel, rank_tol: Option<f64>) -> Result<Self> {
        let laplacian = build_laplacian(graph);
        let h_matrix = build_interaction_matrix(&laplacian, sensing)?;
        let h_spectrum = spectral_bounds(&h_matrix)?;
        let n = graph.n_agents();
        let j_spectrum = spectral_bounds(&(&laplacian + DMatrix::identity(n, n)))?;
        Ok(Self {
            laplacian,
            h_matrix,
            h_spectrum,
            j_spectrum,
            trackability: check_trackability(sensing, rank_tol),
            connected: graph.is_connected(),
        })
    }

    pub fn report(&self) -> TopologyReport {
        TopologyReport {
            rank: self.trackability.rank,
            trackable: self.trackability.trackable,
            connected: self.connected,
            h_min: self.h_spectrum.min,
            h_max: self.h_spectrum.max,
            j_min: self.j_spectrum.min,
            j_max: self.j_spectrum.max,
        }
    }
}

/// JSON shape of the trackability analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub rank: usize,
    pub trackable: bool,
    pub connected: bool,
    pub h_min: f64,
    pub h_max: f64,
    pub j_min: f64,
    pub j_max: f64,
}
