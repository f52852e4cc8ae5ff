use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::graph::{block_diag_stack, Graph};
use crate::layers::{softmax_cross_entropy, KeepSpec};
use crate::model::{param_specs, GraphInput, GraphModel, ModelConfig, ModelParams, NodeModel, Task};

use super::init_params;

/// Central-difference step.
pub const FD_EPSILON: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-4)`; the floor keeps near-zero entries from
/// dominating.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> &ParamCheck {
        self.params
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
            .expect("at least one parameter")
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_relative_error < self.tolerance)
    }
}

/// Compares `analytic` with central differences of `loss` for every scalar.
pub fn compare_gradients(
    names: &[String],
    params: &ModelParams,
    analytic: &ModelParams,
    tolerance: f64,
    mut loss: impl FnMut(&ModelParams) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut probe = params.clone();
    let mut checks = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let (mut rel, mut abs) = (0.0f64, 0.0f64);
        for i in 0..params.tensors[k].as_slice().len() {
            let orig = probe.tensors[k].as_slice()[i];
            probe.tensors[k].as_mut_slice()[i] = orig + FD_EPSILON;
            let up = loss(&probe)?;
            probe.tensors[k].as_mut_slice()[i] = orig - FD_EPSILON;
            let down = loss(&probe)?;
            probe.tensors[k].as_mut_slice()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_EPSILON);
            let a = analytic.tensors[k].as_slice()[i];
            rel = rel.max(relative_error(a, numeric));
            abs = abs.max((a - numeric).abs());
        }
        checks.push(ParamCheck {
            name: names.get(k).cloned().unwrap_or_else(|| format!("param{k}")),
            max_relative_error: rel,
            max_abs_error: abs,
        });
    }
    Ok(GradCheckReport {
        tolerance,
        params: checks,
    })
}

/// A small input for gradient checking.
#[derive(Clone, Debug)]
pub enum GradCheckFixture {
    Node {
        input: GraphInput,
        labels: Vec<usize>,
        mask: Vec<bool>,
    },
    Graph {
        input: GraphInput,
        labels: Vec<usize>,
    },
}

fn random_features(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// The four-node example graph with random features and three labeled nodes.
pub fn node_fixture(config: &ModelConfig) -> Result<GradCheckFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6ead);
    let graph = Graph::new(4, [(0, 1), (0, 3), (1, 2), (1, 3)])?
        .with_features(random_features(4, config.input_dim, &mut rng))?;
    Ok(GradCheckFixture::Node {
        input: GraphInput::from_graph(&graph, config.aggregation)?,
        labels: (0..4).map(|i| i % config.num_classes).collect(),
        mask: vec![true, true, false, true],
    })
}

/// A triangle and a four-node path, batched.
pub fn graph_fixture(config: &ModelConfig) -> Result<GradCheckFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a4f);
    let a = Graph::new(3, [(0, 1), (1, 2), (0, 2)])?.with_features(random_features(3, config.input_dim, &mut rng))?;
    let b = Graph::new(4, [(0, 1), (1, 2), (2, 3)])?.with_features(random_features(4, config.input_dim, &mut rng))?;
    let batch = block_diag_stack(&[&a, &b])?;
    Ok(GradCheckFixture::Graph {
        input: GraphInput::from_batch(&batch, config.aggregation)?,
        labels: vec![0, 1 % config.num_classes],
    })
}

/// Small built-in configurations covering every layer type.
pub fn builtin_configs(task: Task) -> Vec<(&'static str, ModelConfig)> {
    match task {
        Task::Node => vec![
            (
                "node",
                ModelConfig {
                    hidden_dim: 5,
                    dropout_rate: 0.0,
                    ..ModelConfig::node_default(3, 2)
                },
            ),
            (
                "node+dropout",
                ModelConfig {
                    hidden_dim: 5,
                    dropout_rate: 0.3,
                    ..ModelConfig::node_default(3, 2)
                },
            ),
            (
                "node+dropnode",
                ModelConfig {
                    hidden_dim: 5,
                    dropnode: vec![KeepSpec::Count(3)],
                    ..ModelConfig::deep_node(3, 2, 3, true)
                },
            ),
        ],
        Task::Graph => {
            let small = ModelConfig {
                hidden_dim: 6,
                fc_dim: 5,
                ..ModelConfig::graph_default(3, 2)
            };
            vec![
                ("graph", ModelConfig { dropout_rate: 0.0, ..small.clone() }),
                ("graph+dropout", ModelConfig { dropout_rate: 0.3, ..small.clone() }),
                (
                    "graph+dropnode",
                    ModelConfig {
                        dropout_rate: 0.0,
                        dropnode: vec![KeepSpec::Ratio(0.75)],
                        ..small
                    },
                ),
            ]
        }
    }
}

/// Checks a model's analytic gradients against central differences. The
/// random draws of dropout and DropNode are replayed from `seed` for every
/// evaluation so the loss is a deterministic function of the parameters.
pub fn grad_check(config: &ModelConfig, fixture: &GradCheckFixture, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    let params = init_params(config, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    let names: Vec<String> = param_specs(config).into_iter().map(|s| s.name).collect();
    match fixture {
        GradCheckFixture::Node { input, labels, mask } => {
            let mut model = NodeModel::new(config)?;
            model.forward_logits(&params, input, true, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let (_, analytic) = model.backward(&params, labels, mask)?;
            compare_gradients(&names, &params, &analytic, tolerance, |p| {
                let logits = model.forward_logits(p, input, true, &mut ChaCha8Rng::seed_from_u64(seed))?;
                Ok(softmax_cross_entropy(&logits, labels, mask)?.0)
            })
        }
        GradCheckFixture::Graph { input, labels } => {
            let mut model = GraphModel::new(config)?;
            model.forward_logits(&params, input, true, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let (_, analytic) = model.backward(&params, labels)?;
            let all = vec![true; labels.len()];
            compare_gradients(&names, &params, &analytic, tolerance, |p| {
                let logits = model.forward_logits(p, input, true, &mut ChaCha8Rng::seed_from_u64(seed))?;
                Ok(softmax_cross_entropy(&logits, labels, &all)?.0)
            })
        }
    }
}
