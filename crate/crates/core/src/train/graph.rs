use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{accuracy, adam_step, init_params, AdamConfig, AdamState, ProtocolSummary, TrainReport, TrainSpec};
use crate::data::TuDataset;
use crate::error::{Error, Result};
use crate::model::{GraphInput, GraphModel, ModelConfig, ModelParams};

/// Test indices of each fold.
///
/// Fold sizes differ by at most one, and every class count in a fold is the
/// floor or ceiling of `class_total * fold_size / n`. The fractional parts
/// are distributed with a max-flow so row and column totals stay exact.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let n = labels.len();
    if n < folds {
        return Err(Error::InvalidArgument(format!("{n} graphs cannot be split into {folds} folds")));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let totals: Vec<usize> = (0..num_classes).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
    let sizes: Vec<usize> = (0..folds).map(|f| n / folds + usize::from(f < n % folds)).collect();

    let mut counts = vec![vec![0usize; folds]; num_classes];
    let mut class_left = totals.clone();
    let mut fold_left = sizes.clone();
    let mut fractional = vec![vec![false; folds]; num_classes];
    for c in 0..num_classes {
        for f in 0..folds {
            let num = totals[c] * sizes[f];
            counts[c][f] = num / n;
            fractional[c][f] = num % n != 0;
            class_left[c] -= counts[c][f];
            fold_left[f] -= counts[c][f];
        }
    }
    // Unit-capacity augmenting paths class -> fold; a rounding with these
    // margins always exists, so every class is saturated.
    let mut used = vec![vec![false; folds]; num_classes];
    for c in 0..num_classes {
        while class_left[c] > 0 {
            let mut seen_class = vec![false; num_classes];
            let path = augment(c, &fractional, &used, &fold_left, &mut seen_class)
                .ok_or_else(|| Error::InvalidArgument("stratified rounding failed".into()))?;
            for &(pc, pf, forward) in &path {
                used[pc][pf] = forward;
            }
            let last = path.last().expect("non-empty path").1;
            fold_left[last] -= 1;
            class_left[c] -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    for c in 0..num_classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let mut it = members.into_iter();
        for f in 0..folds {
            let k = counts[c][f] + usize::from(used[c][f]);
            out[f].extend(it.by_ref().take(k));
        }
    }
    for f in out.iter_mut() {
        f.sort_unstable();
    }
    Ok(out)
}

/// DFS for an alternating path from class `c` to a fold with spare room.
/// Returns the edges to flip as `(class, fold, new_used_state)`.
fn augment(
    c: usize,
    fractional: &[Vec<bool>],
    used: &[Vec<bool>],
    fold_left: &[usize],
    seen_class: &mut [bool],
) -> Option<Vec<(usize, usize, bool)>> {
    seen_class[c] = true;
    let folds = fold_left.len();
    for f in 0..folds {
        if !fractional[c][f] || used[c][f] {
            continue;
        }
        if fold_left[f] > 0 {
            return Some(vec![(c, f, true)]);
        }
        // Fold is full: reroute one of its other units elsewhere.
        for c2 in 0..fractional.len() {
            if used[c2][f] && !seen_class[c2] {
                if let Some(mut rest) = augment(c2, fractional, used, fold_left, seen_class) {
                    let mut path = vec![(c, f, true), (c2, f, false)];
                    path.append(&mut rest);
                    return Some(path);
                }
            }
        }
    }
    None
}

fn batches(ds: &TuDataset, indices: &[usize], spec: &TrainSpec, config: &ModelConfig) -> Result<Vec<(GraphInput, Vec<usize>)>> {
    let total: usize = indices.iter().map(|&i| ds.graphs[i].num_nodes()).sum();
    let chunk = if total <= spec.full_batch_max_nodes { indices.len().max(1) } else { spec.batch_size };
    indices
        .chunks(chunk)
        .map(|part| {
            let batch = ds.batch(part)?;
            let labels = batch.graph_labels.clone();
            Ok((GraphInput::from_batch(&batch, config.aggregation)?, labels))
        })
        .collect()
}

fn evaluate(model: &mut GraphModel, params: &ModelParams, eval: &[(GraphInput, Vec<usize>)]) -> Result<f64> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (input, labels) in eval {
        pred.extend(model.predict(params, input)?);
        truth.extend_from_slice(labels);
    }
    accuracy(&pred, &truth)
}

/// Trains on `train_idx` for a fixed number of epochs and reports the
/// accuracy on `test_idx` after the last epoch.
pub fn train_graph(
    ds: &TuDataset,
    config: &ModelConfig,
    spec: &TrainSpec,
    train_idx: &[usize],
    test_idx: &[usize],
    run: usize,
    seed: u64,
) -> Result<TrainReport> {
    spec.validate()?;
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::InvalidArgument("empty train or test fold".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GraphModel::new(config)?;
    let mut params = init_params(config, &mut rng);
    let mut state = AdamState::new(&params);
    let adam = AdamConfig::new(spec.learning_rate);

    let total: usize = train_idx.iter().map(|&i| ds.graphs[i].num_nodes()).sum();
    let full_batch = total <= spec.full_batch_max_nodes;
    let fixed = if full_batch { batches(ds, train_idx, spec, config)? } else { Vec::new() };
    let test = batches(ds, test_idx, spec, config)?;
    let mut order = train_idx.to_vec();
    let mut train_loss = Vec::with_capacity(spec.epochs);
    for _ in 0..spec.epochs {
        let shuffled;
        let epoch_batches = if full_batch {
            &fixed
        } else {
            order.shuffle(&mut rng);
            shuffled = batches(ds, &order, spec, config)?;
            &shuffled
        };
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (input, labels) in epoch_batches {
            model.forward_logits(&params, input, true, &mut rng)?;
            let (loss, grads) = model.backward(&params, labels)?;
            adam_step(&mut params, &grads, &mut state, &adam)?;
            epoch_loss += loss * labels.len() as f64;
            seen += labels.len();
        }
        if !params.is_finite() {
            return Err(Error::InvalidArgument("parameters diverged".into()));
        }
        train_loss.push(epoch_loss / seen as f64);
    }
    let test_accuracy = evaluate(&mut model, &params, &test)?;
    Ok(TrainReport {
        run,
        seed,
        epochs_run: spec.epochs,
        best_epoch: spec.epochs - 1,
        train_loss,
        val_accuracy: Vec::new(),
        test_accuracy,
        wall_time_ms: spec.record_time.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Stratified `spec.folds`-fold cross validation. Fold assignment uses
/// `spec.seed`; fold `k` trains with seed `spec.seed + k`.
pub fn run_protocol_graph(ds: &TuDataset, config: &ModelConfig, spec: &TrainSpec) -> Result<ProtocolSummary> {
    config.validate()?;
    if ds.feature_dim() != Some(config.input_dim) {
        return Err(Error::Config(format!(
            "dataset feature width {:?} does not match input_dim {}",
            ds.feature_dim(),
            config.input_dim
        )));
    }
    let folds = stratified_folds(&ds.graph_labels, spec.folds, spec.seed)?;
    let job = |k: usize| {
        let test = &folds[k];
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        train_graph(ds, config, spec, &train, test, k, spec.seed.wrapping_add(k as u64))
    };
    let reports = super::run_parallel(spec.jobs, folds.len(), job)?;
    ProtocolSummary::from_runs(reports)
}
