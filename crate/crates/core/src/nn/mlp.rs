use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::datagen::feature_len;
use crate::error::{Error, Result};

/// Feed-forward regressor: rectified-linear hidden layers and a softplus
/// output, so every prediction is strictly positive.
///
/// All parameters live in one flat vector. Layer `l` maps `dims[l]` inputs
/// to `dims[l + 1]` outputs and stores its weights row-major (one row per
/// output unit) followed by its biases.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    qubits: usize,
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Gradient with the same flat layout as [`MlpModel`] parameters.
pub type Gradients = Vec<f64>;

pub const DEFAULT_HIDDEN: [usize; 3] = [1024, 512, 128];

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `C = A * B (+ C if accumulate)` for strided row-major operands.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        (rows - 1) * rs + (cols.max(1) - 1) * cs
    };
    if k > 0 {
        assert!(last(m, k, a_strides) < a.len());
        assert!(last(k, n, b_strides) < b.len());
    }
    assert!(m * n <= c.len());
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above keep every index the kernel touches inside
    // the three slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl MlpModel {
    /// He-initialized network for `qubits`-qubit residuals. Weights are
    /// rounded to f32 so a saved model reproduces the in-memory one exactly.
    pub fn new(qubits: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let dims = Self::dims_for(qubits, hidden)?;
        let mut params = Vec::with_capacity(Self::param_count_for(&dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(rng);
                params.push((z * std) as f32 as f64);
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(MlpModel {
            qubits,
            dims,
            params,
        })
    }

    /// All-zero parameters.
    pub fn zeros(qubits: usize, hidden: &[usize]) -> Result<Self> {
        let dims = Self::dims_for(qubits, hidden)?;
        let params = vec![0.0; Self::param_count_for(&dims)];
        Ok(MlpModel {
            qubits,
            dims,
            params,
        })
    }

    /// Builds a model from explicit dims and parameters, e.g. for gradient
    /// checks on tiny networks with arbitrary input width.
    pub fn from_parts(qubits: usize, dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) || *dims.last().unwrap() != 1 {
            return Err(Error::Config(format!("bad layer dims {dims:?}")));
        }
        let expected = Self::param_count_for(&dims);
        if params.len() != expected {
            return Err(Error::Shape {
                expected,
                got: params.len(),
            });
        }
        Ok(MlpModel {
            qubits,
            dims,
            params,
        })
    }

    fn dims_for(qubits: usize, hidden: &[usize]) -> Result<Vec<usize>> {
        if qubits == 0 || qubits > crate::gate::MAX_QUBITS {
            return Err(Error::QubitCount(qubits));
        }
        if hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        let mut dims = vec![feature_len(qubits)];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(dims)
    }

    fn param_count_for(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of (weights, biases) for layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let w = Self::param_count_for(&self.dims[..=l]);
        (w, w + self.dims[l] * self.dims[l + 1])
    }

    pub fn layer_weights(&self, l: usize) -> &[f64] {
        let (w, b) = self.layer_offsets(l);
        &self.params[w..b]
    }

    pub fn layer_biases(&self, l: usize) -> &[f64] {
        let (_, b) = self.layer_offsets(l);
        &self.params[b..b + self.dims[l + 1]]
    }

    /// Rounds every parameter to the nearest f32.
    pub fn quantize_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    /// Confirms the model can score `target_qubits`-qubit residuals, either
    /// directly or after identity padding.
    pub fn check_target(&self, target_qubits: usize) -> Result<()> {
        if self.input_dim() != feature_len(self.qubits) || target_qubits > self.qubits {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: feature_len(target_qubits),
            });
        }
        Ok(())
    }

    fn check_batch(&self, batch: &[f64]) -> Result<usize> {
        let width = self.input_dim();
        if !batch.len().is_multiple_of(width) {
            return Err(Error::Shape {
                expected: width,
                got: batch.len() % width,
            });
        }
        Ok(batch.len() / width)
    }

    /// Runs the network, keeping every layer's pre-activations.
    fn forward_trace(&self, batch: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let layers = self.dims.len() - 1;
        let mut pre = Vec::with_capacity(layers);
        let mut act: Vec<f64> = batch.to_vec();
        for l in 0..layers {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let mut z = vec![0.0; rows * dout];
            for r in 0..rows {
                z[r * dout..(r + 1) * dout].copy_from_slice(self.layer_biases(l));
            }
            gemm(
                rows,
                din,
                dout,
                &act,
                (din, 1),
                self.layer_weights(l),
                (1, din),
                &mut z,
                true,
            );
            act = if l + 1 < layers {
                z.iter().map(|&x| x.max(0.0)).collect()
            } else {
                Vec::new()
            };
            pre.push(z);
        }
        pre
    }

    /// Predictions for a row-major batch of feature vectors.
    pub fn forward(&self, batch: &[f64]) -> Result<Vec<f64>> {
        let rows = self.check_batch(batch)?;
        if rows == 0 {
            return Ok(Vec::new());
        }
        let pre = self.forward_trace(batch, rows);
        Ok(pre
            .last()
            .expect("at least one layer")
            .iter()
            .map(|&z| softplus(z))
            .collect())
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        Ok(self.forward(features)?[0])
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// every parameter.
    pub fn loss_and_grad(&self, batch: &[f64], labels: &[f64]) -> Result<(f64, Gradients)> {
        let rows = self.check_batch(batch)?;
        if rows != labels.len() {
            return Err(Error::Shape {
                expected: rows,
                got: labels.len(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        if rows == 0 {
            return Ok((0.0, grads));
        }
        let pre = self.forward_trace(batch, rows);
        let layers = self.dims.len() - 1;
        let out = &pre[layers - 1];
        let mut loss = 0.0;
        // dL/dz at the output through the softplus.
        let mut delta: Vec<f64> = out
            .iter()
            .zip(labels)
            .map(|(&z, &y)| {
                let err = softplus(z) - y;
                loss += err * err;
                2.0 * err / rows as f64 * logistic(z)
            })
            .collect();
        loss /= rows as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        for l in (0..layers).rev() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let input: Vec<f64> = if l == 0 {
                batch.to_vec()
            } else {
                pre[l - 1].iter().map(|&x| x.max(0.0)).collect()
            };
            let (w_off, b_off) = self.layer_offsets(l);
            // dW = delta^T * input
            gemm(
                dout,
                rows,
                din,
                &delta,
                (1, dout),
                &input,
                (din, 1),
                &mut grads[w_off..b_off],
                false,
            );
            let gb = &mut grads[b_off..b_off + dout];
            for r in 0..rows {
                for (g, d) in gb.iter_mut().zip(&delta[r * dout..(r + 1) * dout]) {
                    *g += d;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; rows * din];
                gemm(
                    rows,
                    dout,
                    din,
                    &delta,
                    (dout, 1),
                    self.layer_weights(l),
                    (din, 1),
                    &mut next,
                    false,
                );
                for (d, &z) in next.iter_mut().zip(&pre[l - 1]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok((loss, grads))
    }
}
