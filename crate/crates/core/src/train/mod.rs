//! Optimization, evaluation protocols and gradient checking.

mod gradcheck;
mod graph;
mod node;
mod optim;
mod report;

pub use gradcheck::{
    builtin_configs, compare_gradients, grad_check, graph_fixture, node_fixture, relative_error,
    GradCheckFixture, GradCheckReport, ParamCheck, FD_EPSILON,
};
pub use graph::{run_protocol_graph, stratified_folds, train_graph};
pub use node::{run_protocol_node, train_node};
pub use optim::{adam_step, glorot_uniform, init_params, AdamConfig, AdamState};
pub use report::{mean_std, write_atomic, ProtocolSummary, TrainReport, TrainSpec};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape(
            "accuracy",
            format!("{} predictions for {} labels", pred.len(), truth.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Runs `job(0..n)` on up to `jobs` threads; results come back in index order.
pub(crate) fn run_parallel<T, F>(jobs: Option<usize>, n: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let run = || (0..n).into_par_iter().map(&job).collect::<Result<Vec<T>>>();
    match jobs {
        None => run(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert!((accuracy(&[0, 1, 1], &[0, 1, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&[2, 0, 1], &[2, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn parallel_results_keep_order() {
        let out = run_parallel(Some(3), 20, |i| Ok(i * i)).unwrap();
        assert_eq!(out, (0..20).map(|i| i * i).collect::<Vec<_>>());
    }
}
