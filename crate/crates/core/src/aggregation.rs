//! Aggregation-coefficient matrices.
//!
//! A graph convolution computes `σ(M·H·W)`; the choice of `M` is the whole
//! message-passing scheme. Entry `M[i][j]` weighs source node `j` when
//! aggregating toward destination node `i`.
//!
//! | kind                  | matrix              | normalized by              |
//! |-----------------------|---------------------|----------------------------|
//! | `GcnSym`              | `D̃^-½ Ã D̃^-½`       | both endpoints             |
//! | `DgcnnRowStochastic`  | `D̃⁻¹ Ã`             | destination degree (rows)  |
//! | `GpconvColStochastic` | `Ãᵀ D̃⁻¹`            | source degree (columns)    |
//!
//! All three expect `Ã = A + I`, so every diagonal entry is positive and no
//! degree is zero. Degrees are weighted row sums of `Ã`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::degree_vector;
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggregationKind {
    /// Symmetric normalization used by GCN.
    GcnSym,
    /// Destination-degree normalization (one-hop transition probabilities) used by DGCNN.
    DgcnnRowStochastic,
    /// Source-degree normalization: each node spreads unit mass over its neighbors.
    GpconvColStochastic,
}

impl AggregationKind {
    pub const ALL: [AggregationKind; 3] = [
        AggregationKind::GcnSym,
        AggregationKind::DgcnnRowStochastic,
        AggregationKind::GpconvColStochastic,
    ];

    /// Short CLI / config-file name.
    pub fn name(self) -> &'static str {
        match self {
            AggregationKind::GcnSym => "gcn",
            AggregationKind::DgcnnRowStochastic => "dgcnn",
            AggregationKind::GpconvColStochastic => "gpconv",
        }
    }

    /// Builds `M` for this kind from a self-looped adjacency matrix.
    pub fn build(self, a_tilde: &SparseMatrix) -> Result<SparseMatrix> {
        match self {
            AggregationKind::GcnSym => agg_gcn(a_tilde),
            AggregationKind::DgcnnRowStochastic => agg_dgcnn(a_tilde),
            AggregationKind::GpconvColStochastic => agg_gpconv(a_tilde),
        }
    }
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" | "gcnsym" => Ok(AggregationKind::GcnSym),
            "dgcnn" | "dgcnnrowstochastic" => Ok(AggregationKind::DgcnnRowStochastic),
            "gpconv" | "pgcn" | "gpconvcolstochastic" => Ok(AggregationKind::GpconvColStochastic),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregation kind {other:?} (expected gcn, dgcnn or gpconv)"
            ))),
        }
    }
}

/// Random-walk transition matrix `P = D⁻¹A`; row `i` is the distribution
/// of one step from node `i`.
pub fn transition_matrix(adjacency: &SparseMatrix) -> Result<SparseMatrix> {
    let degrees = degree_vector(adjacency)?;
    if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedNode { node });
    }
    Ok(adjacency.map_values(|r, _, v| v / degrees[r]))
}

fn self_looped_degrees(a_tilde: &SparseMatrix) -> Result<Vec<f64>> {
    let degrees = degree_vector(a_tilde)?;
    for i in 0..a_tilde.rows() {
        if a_tilde.get(i, i) <= 0.0 {
            return Err(Error::MissingSelfLoop { node: i });
        }
    }
    Ok(degrees)
}

/// `M_ij = Ã_ij / sqrt(d̃_i d̃_j)`.
pub fn agg_gcn(a_tilde: &SparseMatrix) -> Result<SparseMatrix> {
    let degrees = self_looped_degrees(a_tilde)?;
    // d_i * d_j is commutative, so M_ij and M_ji come out bitwise equal.
    Ok(a_tilde.map_values(|r, c, v| v / (degrees[r] * degrees[c]).sqrt()))
}

/// `M = D̃⁻¹Ã`: row-stochastic.
pub fn agg_dgcnn(a_tilde: &SparseMatrix) -> Result<SparseMatrix> {
    let degrees = self_looped_degrees(a_tilde)?;
    Ok(a_tilde.map_values(|r, _, v| v / degrees[r]))
}

/// `M = Ãᵀ D̃⁻¹`, i.e. `M_ij = Ã_ji / d̃_j`: column-stochastic.
///
/// The transpose is kept even though `Ã` is symmetric for undirected
/// graphs, so the result is the exact transpose of [`agg_dgcnn`].
pub fn agg_gpconv(a_tilde: &SparseMatrix) -> Result<SparseMatrix> {
    let degrees = self_looped_degrees(a_tilde)?;
    Ok(a_tilde.transpose().map_values(|_, c, v| v / degrees[c]))
}
