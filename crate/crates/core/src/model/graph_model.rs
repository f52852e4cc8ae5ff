use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphInput, ModelConfig, ModelParams, Task};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::layers::{
    softmax_cross_entropy, softmax_rows, Activation, DropNodeDown, Dropout, GraphConv, Linear,
    MeanPool, TapeSlot,
};

#[derive(Clone, Copy, Debug)]
enum Step {
    Conv(usize),
    Down(usize),
    ConvDropout(usize),
    Pool,
    Fc(usize),
    FcDropout(usize),
}

/// Graph classifier: convolutions (optionally followed by DropNode
/// downsampling), graph-wise mean pooling, FC layers and a softmax.
///
/// Dropout, when enabled, follows every layer except the classifier.
#[derive(Debug)]
pub struct GraphModel {
    config: ModelConfig,
    convs: Vec<GraphConv>,
    downs: Vec<DropNodeDown>,
    conv_dropouts: Vec<Dropout>,
    pool: MeanPool,
    fcs: Vec<Linear>,
    fc_dropouts: Vec<Dropout>,
    steps: Vec<Step>,
    logits: TapeSlot<DenseMatrix>,
}

impl GraphModel {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.task != Task::Graph {
            return Err(Error::Config("GraphModel needs task = graph".into()));
        }
        let dropout = || Dropout::new(config.dropout_rate);
        Ok(Self {
            config: config.clone(),
            convs: (0..config.num_gpconv).map(|_| GraphConv::new(Activation::Relu)).collect(),
            downs: config
                .dropnode
                .iter()
                .map(|&spec| DropNodeDown::new(spec, config.aggregation, !config.paired_upsample))
                .collect(),
            conv_dropouts: (0..config.num_gpconv).map(|_| dropout()).collect::<Result<_>>()?,
            pool: MeanPool::new(),
            fcs: (0..=config.num_fc)
                .map(|i| {
                    Linear::new(if i == config.num_fc { Activation::Identity } else { Activation::Relu })
                })
                .collect(),
            fc_dropouts: (0..config.num_fc).map(|_| dropout()).collect::<Result<_>>()?,
            steps: Vec::new(),
            logits: TapeSlot::new("GraphModel"),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Class probabilities, one row per graph in the batch.
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
        if input.num_graphs == 0 || input.num_nodes() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if input.features.cols() != self.config.input_dim {
            return Err(Error::shape(
                "GraphModel::forward",
                format!(
                    "features have width {}, config expects {}",
                    input.features.cols(),
                    self.config.input_dim
                ),
            ));
        }
        self.clear();
        let k = if training { self.downs.len() } else { 0 };
        let use_dropout = training && self.config.dropout_rate > 0.0;
        let mut membership = input
            .membership
            .clone()
            .unwrap_or_else(|| vec![0; input.num_nodes()]);
        let mut a_tilde = input.a_tilde.clone();
        let mut aggregation = input.aggregation.clone();
        let mut h = input.features.clone();
        for i in 0..self.convs.len() {
            let mut out = self.convs[i].forward(aggregation.clone(), h, &params.tensors[i])?;
            self.steps.push(Step::Conv(i));
            if i < k {
                let (sub, plan) = self.downs[i].forward(&out, &a_tilde, Some(&membership), rng)?;
                self.steps.push(Step::Down(i));
                a_tilde = plan.a_tilde;
                aggregation = plan.aggregation;
                membership = plan.membership.expect("batched plan carries membership");
                out = sub;
            }
            if use_dropout {
                out = self.conv_dropouts[i].forward(&out, true, rng);
                self.steps.push(Step::ConvDropout(i));
            }
            h = Arc::new(out);
        }
        let mut z = self.pool.forward(&h, &membership, input.num_graphs)?;
        self.steps.push(Step::Pool);
        let offset = self.convs.len();
        for j in 0..self.fcs.len() {
            let (w, b) = (&params.tensors[offset + 2 * j], &params.tensors[offset + 2 * j + 1]);
            z = self.fcs[j].forward(Arc::new(z), w, b)?;
            self.steps.push(Step::Fc(j));
            if use_dropout && j < self.fc_dropouts.len() {
                z = self.fc_dropouts[j].forward(&z, true, rng);
                self.steps.push(Step::FcDropout(j));
            }
        }
        self.logits.record(z.clone());
        Ok(z)
    }

    /// Mean cross-entropy over the graphs of the last forward pass, and the
    /// gradient for every parameter.
    pub fn backward(&mut self, params: &ModelParams, graph_labels: &[usize]) -> Result<(f64, ModelParams)> {
        let logits = self.logits.take()?;
        let mask = vec![true; logits.rows()];
        let (loss, grad) = softmax_cross_entropy(&logits, graph_labels, &mask)?;
        let grads = self.backward_from(params, grad)?;
        Ok((loss, grads))
    }

    pub fn backward_from(&mut self, params: &ModelParams, grad_logits: DenseMatrix) -> Result<ModelParams> {
        let mut grads = params.zeros_like();
        let mut grad = grad_logits;
        let steps = std::mem::take(&mut self.steps);
        if steps.is_empty() {
            return Err(Error::MissingTape { layer: "GraphModel" });
        }
        let offset = self.convs.len();
        for step in steps.iter().rev() {
            match *step {
                Step::Fc(j) => {
                    let g = self.fcs[j].backward(&grad, true)?;
                    grads.tensors[offset + 2 * j] = g.weight;
                    grads.tensors[offset + 2 * j + 1] = g.bias;
                    grad = g.input.expect("requested");
                }
                Step::FcDropout(j) => grad = self.fc_dropouts[j].backward(&grad)?,
                Step::Pool => grad = self.pool.backward(&grad)?,
                Step::ConvDropout(i) => grad = self.conv_dropouts[i].backward(&grad)?,
                Step::Down(i) => grad = self.downs[i].backward(&grad)?,
                Step::Conv(i) => {
                    let g = self.convs[i].backward(&grad, i > 0)?;
                    grads.tensors[i] = g.weight;
                    match g.input {
                        Some(gi) => grad = gi,
                        None => break,
                    }
                }
            }
        }
        Ok(grads)
    }

    /// One label per graph; ties go to the lowest class.
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
        self.downs.iter_mut().for_each(DropNodeDown::clear);
        self.conv_dropouts.iter_mut().for_each(Dropout::clear);
        self.pool.clear();
        self.fcs.iter_mut().for_each(Linear::clear);
        self.fc_dropouts.iter_mut().for_each(Dropout::clear);
    }
}
