//! Fully connected feedforward network whose weights adapt online.
//!
//! With `k` hidden layers of widths `L_1..L_k`, input width `L_0` and output
//! width `L_{k+1}`, the recursion is
//!
//! ```text
//! φ_0 = V_1ᵀ [κ; 1]
//! φ_j = V_{j+1}ᵀ [ς_j(φ_{j-1}); 1],   j = 1..k
//! ```
//!
//! and the network output is `φ_k`. Each `V_l` is `(L_{l-1} + 1) x L_l`; its
//! last row holds the biases.
//!
//! Flat weight layout (frozen): the matrices `V_1, ..., V_{k+1}` are
//! vectorized column by column and concatenated in layer order, so entry
//! `(row, col)` of `V_l` sits at `offset_l + col * (L_{l-1} + 1) + row`.

mod init;
mod network;
mod projection;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use init::kaiming_init;
pub use network::EvalTrace;
pub use projection::smooth_projection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Swish,
    Tanh,
}

impl Activation {
    /// Value and first derivative at `x`.
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            Activation::Swish => {
                let s = 1.0 / (1.0 + (-x).exp());
                (x * s, s + x * s * (1.0 - s))
            }
            Activation::Tanh => {
                let t = x.tanh();
                (t, 1.0 - t * t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub last_hidden_activation: Activation,
}

impl Architecture {
    pub fn new(widths: Vec<usize>, hidden_activation: Activation, last_hidden_activation: Activation) -> Result<Self> {
        let arch = Self { widths, hidden_activation, last_hidden_activation };
        arch.validate()?;
        Ok(arch)
    }

    /// Swish hidden layers with a tanh final hidden layer.
    pub fn swish_tanh(widths: &[usize]) -> Result<Self> {
        Self::new(widths.to_vec(), Activation::Swish, Activation::Tanh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(Error::config(format!(
                "network needs at least one hidden layer, got widths {:?}",
                self.widths
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::config(format!("network widths must be positive, got {:?}", self.widths)));
        }
        Ok(())
    }

    pub fn hidden_layers(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated widths")
    }

    /// Number of weight matrices, `k + 1`.
    pub fn n_matrices(&self) -> usize {
        self.widths.len() - 1
    }

    /// Shape `(L_{l-1} + 1, L_l)` of `V_l` for `l = 1..=k+1`.
    pub fn matrix_shape(&self, l: usize) -> (usize, usize) {
        (self.widths[l - 1] + 1, self.widths[l])
    }

    /// Flat offset of `V_l`.
    pub fn matrix_offset(&self, l: usize) -> usize {
        (1..l).map(|m| {
            let (r, c) = self.matrix_shape(m);
            r * c
        }).sum()
    }

    /// `p = Σ (L_j + 1) L_{j+1}`.
    pub fn param_count(&self) -> usize {
        self.matrix_offset(self.n_matrices() + 1)
    }

    /// Activation applied to `φ_{j-1}` for `j = 1..=k`.
    pub fn activation(&self, j: usize) -> Activation {
        if j == self.hidden_layers() {
            self.last_hidden_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn check_len(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::contract(format!(
                "weight vector has {} entries, architecture {:?} needs {}",
                theta.len(),
                self.widths,
                self.param_count()
            )));
        }
        Ok(())
    }

    /// Split a flat weight vector into `V_1, ..., V_{k+1}`.
    pub fn unvec(&self, theta: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_len(theta)?;
        Ok((1..=self.n_matrices())
            .map(|l| {
                let (r, c) = self.matrix_shape(l);
                let off = self.matrix_offset(l);
                DMatrix::from_column_slice(r, c, &theta.as_slice()[off..off + r * c])
            })
            .collect())
    }

    /// Inverse of [`Self::unvec`].
    pub fn vec(&self, layers: &[DMatrix<f64>]) -> Result<DVector<f64>> {
        if layers.len() != self.n_matrices() {
            return Err(Error::contract(format!(
                "expected {} weight matrices, got {}",
                self.n_matrices(),
                layers.len()
            )));
        }
        let mut out = Vec::with_capacity(self.param_count());
        for (l, m) in layers.iter().enumerate() {
            if m.shape() != self.matrix_shape(l + 1) {
                return Err(Error::contract(format!(
                    "weight matrix {} has shape {:?}, expected {:?}",
                    l + 1,
                    m.shape(),
                    self.matrix_shape(l + 1)
                )));
            }
            out.extend_from_slice(m.as_slice());
        }
        Ok(DVector::from_vec(out))
    }
}

pub fn param_count(arch: &Architecture) -> usize {
    arch.param_count()
}

/// Portable weight snapshot: architecture header plus the flat vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightCheckpoint {
    pub architecture: Architecture,
    pub theta: Vec<f64>,
}

impl WeightCheckpoint {
    pub fn new(architecture: Architecture, theta: &DVector<f64>) -> Result<Self> {
        architecture.check_len(theta)?;
        Ok(Self { architecture, theta: theta.as_slice().to_vec() })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<(Architecture, DVector<f64>)> {
        let cp: WeightCheckpoint = serde_json::from_str(s)?;
        cp.architecture.validate()?;
        let theta = DVector::from_vec(cp.theta);
        cp.architecture.check_len(&theta)?;
        Ok((cp.architecture, theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(Architecture::swish_tanh(&[6, 4, 4, 4, 4, 3]).unwrap().param_count(), 103);
        assert_eq!(Architecture::swish_tanh(&[2, 3, 1]).unwrap().param_count(), 13);
        assert_eq!(Architecture::swish_tanh(&[3, 5, 5, 2]).unwrap().param_count(), 4 * 5 + 6 * 5 + 6 * 2);
        assert!(Architecture::swish_tanh(&[1, 1]).is_err());
        assert!(Architecture::swish_tanh(&[2, 0, 1]).is_err());
    }

    #[test]
    fn activations_at_zero() {
        assert_eq!(Activation::Swish.eval(0.0), (0.0, 0.5));
        assert_eq!(Activation::Tanh.eval(0.0), (0.0, 1.0));
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        let h = 1e-5;
        for kind in [Activation::Swish, Activation::Tanh] {
            for i in 0..=2000 {
                let x = -10.0 + 0.01 * i as f64;
                let fd = (kind.eval(x + h).0 - kind.eval(x - h).0) / (2.0 * h);
                assert!((fd - kind.eval(x).1).abs() < 1e-9, "{kind:?} at {x}");
            }
        }
    }

    #[test]
    fn last_hidden_layer_uses_its_own_activation() {
        let a = Architecture::swish_tanh(&[6, 4, 4, 4, 4, 3]).unwrap();
        assert_eq!(a.activation(1), Activation::Swish);
        assert_eq!(a.activation(3), Activation::Swish);
        assert_eq!(a.activation(4), Activation::Tanh);
    }

    #[test]
    fn column_stacked_layout() {
        let a = Architecture::swish_tanh(&[2, 3, 1]).unwrap();
        let theta = DVector::from_fn(13, |i, _| i as f64);
        let layers = a.unvec(&theta).unwrap();
        assert_eq!(layers[0].shape(), (3, 3));
        assert_eq!(layers[0][(1, 0)], 1.0);
        assert_eq!(layers[0][(0, 1)], 3.0);
        assert_eq!(layers[1].shape(), (4, 1));
        assert_eq!(layers[1][(0, 0)], 9.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let a = Architecture::swish_tanh(&[6, 4, 4, 4, 4, 3]).unwrap();
        let theta = kaiming_init(&a, 4);
        let json = WeightCheckpoint::new(a.clone(), &theta).unwrap().to_json().unwrap();
        let (a2, t2) = WeightCheckpoint::from_json(&json).unwrap();
        assert_eq!(a, a2);
        assert_eq!(theta, t2);
        assert!(WeightCheckpoint::new(a, &DVector::zeros(5)).is_err());
    }

    proptest! {
        #[test]
        fn vec_unvec_is_a_bijection(
            widths in proptest::collection::vec(1usize..6, 3..6),
            seed in any::<u64>(),
        ) {
            let a = Architecture::swish_tanh(&widths).unwrap();
            let theta = kaiming_init(&a, seed);
            let back = a.vec(&a.unvec(&theta).unwrap()).unwrap();
            prop_assert_eq!(back, theta);
        }
    }
}
