use nalgebra::{DMatrix, DVector};

use super::Architecture;
use crate::error::{Error, Result};

/// Cached forward pass, reused by the weight Jacobian.
#[derive(Debug, Clone)]
pub struct EvalTrace {
    kappa: DVector<f64>,
    theta: DVector<f64>,
    /// Bias-augmented layer inputs `[κ;1], [ς_1(φ_0);1], ..., [ς_k(φ_{k-1});1]`.
    inputs: Vec<DVector<f64>>,
    /// Activation derivatives `ς_j'(φ_{j-1})` for `j = 1..=k`.
    slopes: Vec<DVector<f64>>,
}

impl EvalTrace {
    /// Layer input of `V_l` (bias-augmented).
    pub fn layer_input(&self, l: usize) -> &DVector<f64> {
        &self.inputs[l - 1]
    }

    pub fn matches(&self, kappa: &DVector<f64>, theta: &DVector<f64>) -> bool {
        &self.kappa == kappa && &self.theta == theta
    }
}

/// `y = Vᵀ x` for `V` stored column-major at `theta[off..]` with `rows` rows.
fn apply_transposed(theta: &[f64], off: usize, rows: usize, cols: usize, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(cols, |c, _| {
        let col = &theta[off + c * rows..off + (c + 1) * rows];
        col.iter().zip(x.iter()).map(|(w, v)| w * v).sum()
    })
}

fn augment(v: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len() + 1, v.iter().copied().chain(std::iter::once(1.0)))
}

impl Architecture {
    /// Network output `φ_k` and the trace needed by [`Self::jacobian`].
    pub fn forward(&self, kappa: &DVector<f64>, theta: &DVector<f64>) -> Result<(DVector<f64>, EvalTrace)> {
        self.check_len(theta)?;
        if kappa.len() != self.input_width() {
            return Err(Error::contract(format!(
                "network input has {} entries, expected {}",
                kappa.len(),
                self.input_width()
            )));
        }
        if kappa.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let w = theta.as_slice();
        let k = self.hidden_layers();
        let mut inputs = Vec::with_capacity(k + 1);
        let mut slopes = Vec::with_capacity(k);
        inputs.push(augment(kappa));
        let (r, c) = self.matrix_shape(1);
        let mut pre = apply_transposed(w, 0, r, c, &inputs[0]);
        for j in 1..=k {
            let act = self.activation(j);
            let mut value = DVector::zeros(pre.len());
            let mut slope = DVector::zeros(pre.len());
            for (i, &x) in pre.iter().enumerate() {
                let (v, d) = act.eval(x);
                value[i] = v;
                slope[i] = d;
            }
            inputs.push(augment(&value));
            slopes.push(slope);
            let (r, c) = self.matrix_shape(j + 1);
            pre = apply_transposed(w, self.matrix_offset(j + 1), r, c, &inputs[j]);
        }
        Ok((pre, EvalTrace { kappa: kappa.clone(), theta: theta.clone(), inputs, slopes }))
    }

    /// `∂φ_k / ∂θ`, an `L_{k+1} x p` matrix in the flat weight layout.
    pub fn jacobian(&self, kappa: &DVector<f64>, theta: &DVector<f64>, trace: &EvalTrace) -> Result<DMatrix<f64>> {
        self.check_len(theta)?;
        if !trace.matches(kappa, theta) {
            return Err(Error::contract("evaluation trace does not belong to this input and weight vector"));
        }
        let w = theta.as_slice();
        let out = self.output_width();
        let mut jac = DMatrix::zeros(out, self.param_count());
        // sensitivity of the output to the current layer's pre-activation
        let mut sens = DMatrix::<f64>::identity(out, out);
        for l in (1..=self.n_matrices()).rev() {
            let (rows, cols) = self.matrix_shape(l);
            let off = self.matrix_offset(l);
            let x = trace.layer_input(l);
            for c in 0..cols {
                for r in 0..rows {
                    let xr = x[r];
                    if xr == 0.0 {
                        continue;
                    }
                    let dst = off + c * rows + r;
                    for o in 0..out {
                        jac[(o, dst)] = sens[(o, c)] * xr;
                    }
                }
            }
            if l == 1 {
                break;
            }
            // push through V_l (dropping the bias row) and the activation slope
            let slope = &trace.slopes[l - 2];
            let mut next = DMatrix::zeros(out, rows - 1);
            for r in 0..rows - 1 {
                for o in 0..out {
                    let mut acc = 0.0;
                    for c in 0..cols {
                        acc += sens[(o, c)] * w[off + c * rows + r];
                    }
                    next[(o, r)] = acc * slope[r];
                }
            }
            sens = next;
        }
        Ok(jac)
    }
}
