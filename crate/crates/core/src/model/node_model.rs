use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphInput, ModelConfig, ModelParams, Task};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::layers::{
    softmax_cross_entropy, softmax_rows, Activation, DropNodeDown, DropNodeUp, Dropout, GraphConv,
    TapeSlot,
};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug)]
enum Step {
    Dropout(usize),
    Conv(usize),
    Down(usize),
    Up(usize),
}

/// Node classifier: stacked graph convolutions with a row-wise softmax.
///
/// Dropout, when enabled, is applied to the input of every convolution.
/// With DropNode, convolutions between a downsampling layer and its
/// upsampling partner run on the induced subgraph.
#[derive(Debug)]
pub struct NodeModel {
    config: ModelConfig,
    convs: Vec<GraphConv>,
    dropouts: Vec<Dropout>,
    downs: Vec<DropNodeDown>,
    ups: Vec<DropNodeUp>,
    steps: Vec<Step>,
    logits: TapeSlot<DenseMatrix>,
}

impl NodeModel {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.task != Task::Node {
            return Err(Error::Config("NodeModel needs task = node".into()));
        }
        let l = config.num_gpconv;
        let convs = (0..l)
            .map(|i| GraphConv::new(if i + 1 == l { Activation::Identity } else { Activation::Relu }))
            .collect();
        let dropouts = (0..l)
            .map(|_| Dropout::new(config.dropout_rate))
            .collect::<Result<_>>()?;
        let downs = config
            .dropnode
            .iter()
            .map(|&spec| DropNodeDown::new(spec, config.aggregation, !config.paired_upsample))
            .collect();
        let ups = config.dropnode.iter().map(|_| DropNodeUp::new()).collect();
        Ok(Self {
            config: config.clone(),
            convs,
            dropouts,
            downs,
            ups,
            steps: Vec::new(),
            logits: TapeSlot::new("NodeModel"),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Class probabilities, one row per node. Dropout and DropNode are only
    /// active when `training` is set; otherwise the pass is deterministic.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        params: &ModelParams,
        input: &GraphInput,
        training: bool,
        rng: &mut R,
    ) -> Result<DenseMatrix> {
        Ok(softmax_rows(&self.forward_logits(params, input, training, rng)?))
    }

    pub fn forward_logits<R: Rng + ?Sized>(
        &mut self,
        params: &ModelParams,
        input: &GraphInput,
        training: bool,
        rng: &mut R,
    ) -> Result<DenseMatrix> {
        params.check(&self.config)?;
        if input.features.cols() != self.config.input_dim {
            return Err(Error::shape(
                "NodeModel::forward",
                format!(
                    "features have width {}, config expects {}",
                    input.features.cols(),
                    self.config.input_dim
                ),
            ));
        }
        self.clear();
        let l = self.config.num_gpconv;
        let k = if training { self.downs.len() } else { 0 };
        let use_dropout = training && self.config.dropout_rate > 0.0;

        let mut a_tilde: Arc<SparseMatrix> = input.a_tilde.clone();
        let mut aggregation: Arc<SparseMatrix> = input.aggregation.clone();
        // Graph levels to restore on the way back up, with the kept indices
        // and row count of each downsampling step.
        let mut stack: Vec<(Arc<SparseMatrix>, Arc<SparseMatrix>, Vec<usize>, usize)> = Vec::new();
        let mut h = input.features.clone();
        for i in 0..l {
            if use_dropout {
                h = Arc::new(self.dropouts[i].forward(&h, true, rng));
                self.steps.push(Step::Dropout(i));
            }
            let mut out = self.convs[i].forward(aggregation.clone(), h, &params.tensors[i])?;
            self.steps.push(Step::Conv(i));
            if i < k {
                let (sub, plan) = self.downs[i].forward(&out, &a_tilde, None, rng)?;
                self.steps.push(Step::Down(i));
                stack.push((a_tilde, aggregation, plan.kept_indices, plan.input_rows));
                a_tilde = plan.a_tilde;
                aggregation = plan.aggregation;
                out = sub;
            } else if k > 0 && i + 1 + k >= l && i + 1 < l {
                let (prev_a, prev_m, kept, rows) = stack.pop().expect("paired downsample");
                let j = stack.len();
                out = self.ups[j].forward(&out, &kept, rows)?;
                self.steps.push(Step::Up(j));
                a_tilde = prev_a;
                aggregation = prev_m;
            }
            h = Arc::new(out);
        }
        debug_assert!(stack.is_empty());
        let logits = Arc::try_unwrap(h).unwrap_or_else(|a| (*a).clone());
        self.logits.record(logits.clone());
        Ok(logits)
    }

    /// Masked cross-entropy of the last forward pass and its gradient for
    /// every parameter. Rows outside `mask` contribute nothing.
    pub fn backward(
        &mut self,
        params: &ModelParams,
        labels: &[usize],
        mask: &[bool],
    ) -> Result<(f64, ModelParams)> {
        let logits = self.logits.take()?;
        let (loss, grad) = softmax_cross_entropy(&logits, labels, mask)?;
        let grads = self.backward_from(params, grad)?;
        Ok((loss, grads))
    }

    /// Backpropagates a gradient with respect to the logits.
    pub fn backward_from(&mut self, params: &ModelParams, grad_logits: DenseMatrix) -> Result<ModelParams> {
        let mut grads = params.zeros_like();
        let mut grad = grad_logits;
        let steps = std::mem::take(&mut self.steps);
        if steps.is_empty() {
            return Err(Error::MissingTape { layer: "NodeModel" });
        }
        for step in steps.iter().rev() {
            match *step {
                Step::Conv(i) => {
                    let g = self.convs[i].backward(&grad, i > 0)?;
                    grads.tensors[i] = g.weight;
                    match g.input {
                        Some(gi) => grad = gi,
                        None => break,
                    }
                }
                Step::Dropout(i) => grad = self.dropouts[i].backward(&grad)?,
                Step::Down(i) => grad = self.downs[i].backward(&grad)?,
                Step::Up(j) => grad = self.ups[j].backward(&grad)?,
            }
        }
        Ok(grads)
    }

    /// Argmax of the inference-mode forward pass; ties go to the lowest class.
    pub fn predict(&mut self, params: &ModelParams, input: &GraphInput) -> Result<Vec<usize>> {
        // Inference draws no random numbers.
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let probs = self.forward(params, input, false, &mut unused)?;
        self.clear();
        Ok(probs.argmax_rows())
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.logits.clear();
        self.convs.iter_mut().for_each(GraphConv::clear);
        self.dropouts.iter_mut().for_each(Dropout::clear);
        self.downs.iter_mut().for_each(DropNodeDown::clear);
        self.ups.iter_mut().for_each(DropNodeUp::clear);
    }
}
