//! Node- and graph-classification networks built from [`crate::layers`].

mod config;
mod graph_model;
mod node_model;
mod params;

pub use config::{format_schedule, parse_kv, parse_schedule, ModelConfig, Task, DEEP_KEEP_SCHEDULE};
pub use graph_model::GraphModel;
pub use node_model::NodeModel;
pub use params::{param_specs, ModelParams, ParamRole, ParamSpec};

use std::sync::Arc;

use crate::aggregation::AggregationKind;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{add_self_loops, build_adjacency, BatchedGraph, Graph};
use crate::sparse::SparseMatrix;

/// Matrices a forward pass needs, built once per graph (or batch).
#[derive(Clone, Debug)]
pub struct GraphInput {
    /// Adjacency with self-loops.
    pub a_tilde: Arc<SparseMatrix>,
    /// Aggregation matrix of the full graph.
    pub aggregation: Arc<SparseMatrix>,
    pub features: Arc<DenseMatrix>,
    /// Source graph of each row for batched inputs.
    pub membership: Option<Vec<usize>>,
    pub num_graphs: usize,
}

impl GraphInput {
    pub fn from_adjacency(
        adjacency: &SparseMatrix,
        features: DenseMatrix,
        kind: AggregationKind,
    ) -> Result<Self> {
        if adjacency.rows() != features.rows() {
            return Err(Error::shape(
                "GraphInput",
                format!("{} adjacency rows, {} feature rows", adjacency.rows(), features.rows()),
            ));
        }
        let a_tilde = add_self_loops(adjacency)?;
        let aggregation = kind.build(&a_tilde)?;
        Ok(Self {
            a_tilde: Arc::new(a_tilde),
            aggregation: Arc::new(aggregation),
            features: Arc::new(features),
            membership: None,
            num_graphs: 1,
        })
    }

    pub fn from_graph(graph: &Graph, kind: AggregationKind) -> Result<Self> {
        let features = graph
            .features()
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("graph has no features".into()))?;
        Self::from_adjacency(&build_adjacency(graph)?, features, kind)
    }

    pub fn from_batch(batch: &BatchedGraph, kind: AggregationKind) -> Result<Self> {
        if batch.num_graphs() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut input = Self::from_adjacency(&batch.adjacency, batch.features.clone(), kind)?;
        input.membership = Some(batch.membership.clone());
        input.num_graphs = batch.num_graphs();
        Ok(input)
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}
