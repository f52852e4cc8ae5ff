use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{accuracy, adam_step, init_params, AdamConfig, AdamState, ProtocolSummary, TrainReport, TrainSpec};
use crate::data::NodeDataset;
use crate::error::{Error, Result};
use crate::model::{GraphInput, ModelConfig, ModelParams, NodeModel, ParamRole, param_specs};

/// Adds `λ/2·‖W‖²` over the convolution weights to `loss` and `λ·W` to
/// their gradients.
fn apply_weight_decay(config: &ModelConfig, params: &ModelParams, grads: &mut ModelParams, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut penalty = 0.0;
    for (k, spec) in param_specs(config).iter().enumerate() {
        if spec.role == ParamRole::ConvWeight {
            penalty += 0.5 * lambda * params.tensors[k].squared_norm();
            grads.tensors[k]
                .add_scaled(lambda, &params.tensors[k])
                .expect("gradient has parameter shape");
        }
    }
    penalty
}

fn split_accuracy(pred: &[usize], labels: &[usize], split: &[usize]) -> Result<f64> {
    let p: Vec<usize> = split.iter().map(|&i| pred[i]).collect();
    let t: Vec<usize> = split.iter().map(|&i| labels[i]).collect();
    accuracy(&p, &t)
}

/// Full-batch transductive training of one model.
///
/// The loss only sees train-mask rows. After every update the model is
/// evaluated on the validation split; the parameters with the best
/// validation accuracy (earliest on ties) are used for the test accuracy.
pub fn train_node(dataset: &NodeDataset, config: &ModelConfig, spec: &TrainSpec, seed: u64) -> Result<TrainReport> {
    let input = GraphInput::from_graph(&dataset.graph, config.aggregation)?;
    train_node_prepared(dataset, &input, config, spec, 0, seed)
}

fn train_node_prepared(
    dataset: &NodeDataset,
    input: &GraphInput,
    config: &ModelConfig,
    spec: &TrainSpec,
    run: usize,
    seed: u64,
) -> Result<TrainReport> {
    spec.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    let start = Instant::now();
    let labels = dataset.labels();
    let train_mask = dataset.train_mask();
    let eval_split = if dataset.val.is_empty() { &dataset.train } else { &dataset.val };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = NodeModel::new(config)?;
    let mut params = init_params(config, &mut rng);
    let mut state = AdamState::new(&params);
    let adam = AdamConfig::new(spec.learning_rate);

    let mut train_loss = Vec::with_capacity(spec.epochs);
    let mut val_accuracy = Vec::with_capacity(spec.epochs);
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    for epoch in 0..spec.epochs {
        model.forward_logits(&params, input, true, &mut rng)?;
        let (loss, mut grads) = model.backward(&params, labels, &train_mask)?;
        let penalty = apply_weight_decay(config, &params, &mut grads, spec.weight_decay);
        adam_step(&mut params, &grads, &mut state, &adam)?;
        if !params.is_finite() {
            return Err(Error::InvalidArgument(format!("parameters diverged at epoch {epoch}")));
        }
        train_loss.push(loss + penalty);

        let pred = model.predict(&params, input)?;
        let acc = split_accuracy(&pred, labels, eval_split)?;
        val_accuracy.push(acc);
        if acc > best.0 {
            best = (acc, epoch, params.clone());
        }
        if spec.patience.is_some_and(|p| epoch - best.1 >= p) {
            break;
        }
    }
    let (_, best_epoch, best_params) = best;
    let pred = model.predict(&best_params, input)?;
    let test_accuracy = if dataset.test.is_empty() {
        f64::NAN
    } else {
        split_accuracy(&pred, labels, &dataset.test)?
    };
    Ok(TrainReport {
        run,
        seed,
        epochs_run: train_loss.len(),
        best_epoch,
        train_loss,
        val_accuracy,
        test_accuracy,
        wall_time_ms: spec.record_time.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Runs `spec.runs` independent trainings with seeds `spec.seed + run`,
/// in parallel, and summarizes their test accuracies.
pub fn run_protocol_node(dataset: &NodeDataset, config: &ModelConfig, spec: &TrainSpec) -> Result<ProtocolSummary> {
    if spec.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    config.validate()?;
    let input = GraphInput::from_graph(&dataset.graph, config.aggregation)?;
    let job = |run: usize| train_node_prepared(dataset, &input, config, spec, run, spec.seed.wrapping_add(run as u64));
    let reports = super::run_parallel(spec.jobs, spec.runs, job)?;
    ProtocolSummary::from_runs(reports)
}
