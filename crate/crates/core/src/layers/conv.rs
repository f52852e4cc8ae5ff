use std::sync::Arc;

use super::{Activation, TapeSlot};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Graph convolution `σ(M·H·W)` for any aggregation matrix `M`.
///
/// With `M` from [`agg_gpconv`](crate::aggregation::agg_gpconv) this is the
/// transition-probability convolution; no bias term is used.
#[derive(Debug)]
pub struct GraphConv {
    activation: Activation,
    tape: TapeSlot<ConvTape>,
}

#[derive(Debug)]
struct ConvTape {
    aggregation: Arc<SparseMatrix>,
    input: Arc<DenseMatrix>,
    weight: DenseMatrix,
    pre_activation: DenseMatrix,
}

#[derive(Debug)]
pub struct ConvGrads {
    /// `None` when the caller did not ask for the input gradient.
    pub input: Option<DenseMatrix>,
    pub weight: DenseMatrix,
}

impl GraphConv {
    pub fn new(activation: Activation) -> Self {
        Self {
            activation,
            tape: TapeSlot::new("GraphConv"),
        }
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn forward(
        &mut self,
        aggregation: Arc<SparseMatrix>,
        input: Arc<DenseMatrix>,
        weight: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        let n = input.rows();
        if aggregation.rows() != n || aggregation.cols() != n {
            return Err(Error::shape(
                "GraphConv::forward",
                format!(
                    "aggregation {}x{} for {n} input rows",
                    aggregation.rows(),
                    aggregation.cols()
                ),
            ));
        }
        if input.cols() != weight.rows() {
            return Err(Error::shape(
                "GraphConv::forward",
                format!("input {:?} x weight {:?}", input.shape(), weight.shape()),
            ));
        }
        // H·W first: the feature width usually exceeds the output width.
        let projected = input.matmul(weight)?;
        let pre_activation = aggregation.spmm(&projected)?;
        let out = self.activation.apply(&pre_activation);
        self.tape.record(ConvTape {
            aggregation,
            input,
            weight: weight.clone(),
            pre_activation,
        });
        Ok(out)
    }

    /// `grad_W = Hᵀ·Mᵀ·G'` and `grad_H = Mᵀ·G'·Wᵀ` where `G' = grad ⊙ σ'`.
    pub fn backward(&mut self, grad_out: &DenseMatrix, want_input_grad: bool) -> Result<ConvGrads> {
        let tape = self.tape.take()?;
        let local = self.activation.backprop(&tape.pre_activation, grad_out)?;
        let spread = tape.aggregation.spmm_transposed(&local)?;
        let weight = tape.input.t_matmul(&spread)?;
        let input = if want_input_grad {
            Some(spread.matmul_t(&tape.weight)?)
        } else {
            None
        };
        Ok(ConvGrads { input, weight })
    }

    pub fn clear(&mut self) {
        self.tape.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::agg_gpconv;
    use crate::graph::{add_self_loops, build_adjacency, Graph};
    use crate::layers::testutil::*;

    fn example_m() -> Arc<SparseMatrix> {
        let g = Graph::new(4, [(0, 1), (0, 3), (1, 2), (1, 3)]).unwrap();
        Arc::new(agg_gpconv(&add_self_loops(&build_adjacency(&g).unwrap()).unwrap()).unwrap())
    }

    #[test]
    fn identity_everything_returns_input() {
        let h = random_matrix(5, 3, 1);
        let mut conv = GraphConv::new(Activation::Identity);
        let out = conv
            .forward(Arc::new(SparseMatrix::identity(5)), Arc::new(h.clone()), &DenseMatrix::identity(3))
            .unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn one_hot_features_reproduce_aggregation_rows() {
        let mut conv = GraphConv::new(Activation::Identity);
        let out = conv
            .forward(example_m(), Arc::new(DenseMatrix::identity(4)), &DenseMatrix::identity(4))
            .unwrap();
        assert_eq!(out.row(0), &[1.0 / 3.0, 0.25, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn relu_output_is_nonnegative() {
        let mut conv = GraphConv::new(Activation::Relu);
        let out = conv
            .forward(example_m(), Arc::new(random_matrix(4, 6, 2)), &random_matrix(6, 3, 3))
            .unwrap();
        assert!(out.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn shape_mismatch_and_missing_tape() {
        let mut conv = GraphConv::new(Activation::Relu);
        assert!(conv
            .forward(example_m(), Arc::new(random_matrix(3, 2, 0)), &random_matrix(2, 2, 0))
            .is_err());
        assert!(conv
            .forward(example_m(), Arc::new(random_matrix(4, 2, 0)), &random_matrix(3, 2, 0))
            .is_err());
        assert!(matches!(
            conv.backward(&DenseMatrix::zeros(4, 2), true),
            Err(Error::MissingTape { .. })
        ));
    }

    #[test]
    fn tape_is_consumed() {
        let mut conv = GraphConv::new(Activation::Identity);
        conv.forward(example_m(), Arc::new(random_matrix(4, 2, 0)), &random_matrix(2, 2, 0))
            .unwrap();
        conv.backward(&DenseMatrix::zeros(4, 2), true).unwrap();
        assert!(conv.backward(&DenseMatrix::zeros(4, 2), true).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut conv = GraphConv::new(Activation::Relu);
        conv.forward(example_m(), Arc::new(random_matrix(4, 3, 5)), &random_matrix(3, 2, 6))
            .unwrap();
        let g = conv.backward(&DenseMatrix::zeros(4, 2), true).unwrap();
        assert_eq!(g.weight, DenseMatrix::zeros(3, 2));
        assert_eq!(g.input.unwrap(), DenseMatrix::zeros(4, 3));
    }

    #[test]
    fn identity_aggregation_reduces_to_linear_layer() {
        let h = random_matrix(6, 3, 7);
        let w = random_matrix(3, 2, 8);
        let upstream = random_matrix(6, 2, 9);
        let mut conv = GraphConv::new(Activation::Identity);
        conv.forward(Arc::new(SparseMatrix::identity(6)), Arc::new(h.clone()), &w)
            .unwrap();
        let g = conv.backward(&upstream, true).unwrap();
        assert!(g.weight.max_abs_diff(&h.t_matmul(&upstream).unwrap()) < 1e-14);
        assert!(g.input.unwrap().max_abs_diff(&upstream.matmul_t(&w).unwrap()) < 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for activation in [Activation::Relu, Activation::Identity] {
            let m = example_m();
            let h = random_matrix(4, 5, 11);
            let w = random_matrix(5, 3, 12);
            let probe = probe_weights(4, 3);
            let loss = |h: &DenseMatrix, w: &DenseMatrix| {
                let mut conv = GraphConv::new(activation);
                weighted_sum(&conv.forward(m.clone(), Arc::new(h.clone()), w).unwrap(), &probe)
            };
            let mut conv = GraphConv::new(activation);
            conv.forward(m.clone(), Arc::new(h.clone()), &w).unwrap();
            let g = conv.backward(&probe, true).unwrap();
            let num_w = numeric_grad(&w, |w| loss(&h, w));
            let num_h = numeric_grad(&h, |h| loss(h, &w));
            assert!(max_rel_err(&g.weight, &num_w) < 1e-6, "{activation:?} weight");
            assert!(max_rel_err(&g.input.unwrap(), &num_h) < 1e-6, "{activation:?} input");
        }
    }
}
