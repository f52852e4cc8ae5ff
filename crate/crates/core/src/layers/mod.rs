//! Differentiable building blocks.
//!
//! Each layer is a small struct that records what its backward pass needs
//! in a [`TapeSlot`] during `forward`, and consumes it in `backward`. A
//! second `backward` without an intervening `forward` is an error.

mod conv;
mod dropnode;
mod dropout;
mod linear;
mod loss;
mod pool;

pub use conv::{ConvGrads, GraphConv};
pub use dropnode::{sample_kept_indices, DropNodeDown, DropNodeUp, DropPlan, KeepSpec};
pub use dropout::Dropout;
pub use linear::{Linear, LinearGrads};
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use pool::MeanPool;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: &DenseMatrix) -> DenseMatrix {
        match self {
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        }
    }

    /// `grad ⊙ σ'(z)`.
    pub fn backprop(self, z: &DenseMatrix, grad: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Activation::Relu => {
                if z.shape() != grad.shape() {
                    return Err(Error::shape(
                        "Activation::backprop",
                        format!("{:?} vs {:?}", z.shape(), grad.shape()),
                    ));
                }
                let mut out = grad.clone();
                for (g, &zv) in out.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if zv <= 0.0 {
                        *g = 0.0;
                    }
                }
                Ok(out)
            }
            Activation::Identity => Ok(grad.clone()),
        }
    }
}

/// Holds one layer's cached forward state until the matching backward.
#[derive(Debug)]
pub struct TapeSlot<T> {
    layer: &'static str,
    entry: Option<T>,
}

impl<T> TapeSlot<T> {
    pub fn new(layer: &'static str) -> Self {
        Self { layer, entry: None }
    }

    pub fn record(&mut self, entry: T) {
        self.entry = Some(entry);
    }

    pub fn take(&mut self) -> Result<T> {
        self.entry
            .take()
            .ok_or(Error::MissingTape { layer: self.layer })
    }

    pub fn is_recorded(&self) -> bool {
        self.entry.is_some()
    }

    pub fn clear(&mut self) {
        self.entry = None;
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::dense::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Central-difference gradient of a scalar function of one matrix.
    pub fn numeric_grad(x: &DenseMatrix, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
        let eps = 1e-5;
        let mut grad = DenseMatrix::zeros(x.rows(), x.cols());
        let mut probe = x.clone();
        for k in 0..x.as_slice().len() {
            let orig = probe.as_slice()[k];
            probe.as_mut_slice()[k] = orig + eps;
            let up = f(&probe);
            probe.as_mut_slice()[k] = orig - eps;
            let down = f(&probe);
            probe.as_mut_slice()[k] = orig;
            grad.as_mut_slice()[k] = (up - down) / (2.0 * eps);
        }
        grad
    }

    pub fn max_rel_err(analytic: &DenseMatrix, numeric: &DenseMatrix) -> f64 {
        analytic
            .as_slice()
            .iter()
            .zip(numeric.as_slice())
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
            .fold(0.0, f64::max)
    }

    /// Fixed weighting so a matrix-valued output becomes a scalar loss.
    pub fn probe_weights(rows: usize, cols: usize) -> DenseMatrix {
        random_matrix(rows, cols, 0xfeed)
    }

    pub fn weighted_sum(out: &DenseMatrix, weights: &DenseMatrix) -> f64 {
        out.hadamard(weights).unwrap().sum()
    }
}
