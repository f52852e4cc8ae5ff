use std::sync::Arc;

use super::{Activation, TapeSlot};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Fully-connected layer `σ(H·W + b)`.
#[derive(Debug)]
pub struct Linear {
    activation: Activation,
    tape: TapeSlot<LinearTape>,
}

#[derive(Debug)]
struct LinearTape {
    input: Arc<DenseMatrix>,
    weight: DenseMatrix,
    pre_activation: DenseMatrix,
}

#[derive(Debug)]
pub struct LinearGrads {
    pub input: Option<DenseMatrix>,
    pub weight: DenseMatrix,
    pub bias: DenseMatrix,
}

impl Linear {
    pub fn new(activation: Activation) -> Self {
        Self {
            activation,
            tape: TapeSlot::new("Linear"),
        }
    }

    pub fn forward(
        &mut self,
        input: Arc<DenseMatrix>,
        weight: &DenseMatrix,
        bias: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        if input.cols() != weight.rows() || bias.shape() != (1, weight.cols()) {
            return Err(Error::shape(
                "Linear::forward",
                format!(
                    "input {:?}, weight {:?}, bias {:?}",
                    input.shape(),
                    weight.shape(),
                    bias.shape()
                ),
            ));
        }
        let mut pre_activation = input.matmul(weight)?;
        pre_activation.add_row_vector(bias)?;
        let out = self.activation.apply(&pre_activation);
        self.tape.record(LinearTape {
            input,
            weight: weight.clone(),
            pre_activation,
        });
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &DenseMatrix, want_input_grad: bool) -> Result<LinearGrads> {
        let tape = self.tape.take()?;
        let local = self.activation.backprop(&tape.pre_activation, grad_out)?;
        let weight = tape.input.t_matmul(&local)?;
        let bias = local.column_sums();
        let input = if want_input_grad {
            Some(local.matmul_t(&tape.weight)?)
        } else {
            None
        };
        Ok(LinearGrads {
            input,
            weight,
            bias,
        })
    }

    pub fn clear(&mut self) {
        self.tape.clear();
    }
}
