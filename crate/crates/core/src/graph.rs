//! Undirected graphs and the matrices derived from them.

use std::collections::BTreeMap;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::{block_diagonal, SparseMatrix};

/// An undirected, optionally weighted graph with 0-based node indices.
///
/// Edges are stored canonically as `(i, j, w)` with `i <= j`, sorted and
/// without duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    features: Option<DenseMatrix>,
    node_labels: Option<Vec<usize>>,
}

impl Graph {
    /// Unit-weight graph from an edge list.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::with_weighted_edges(num_nodes, edges.into_iter().map(|(i, j)| (i, j, 1.0)))
    }

    /// Duplicate undirected edges (including `(j, i)` after `(i, j)`) are
    /// dropped with a warning; the first occurrence wins.
    pub fn with_weighted_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut canon: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut duplicates = 0usize;
        for (i, j, w) in edges {
            for idx in [i, j] {
                if idx >= num_nodes {
                    return Err(Error::NodeIndex {
                        index: idx,
                        num_nodes,
                    });
                }
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) has non-positive weight {w}"
                )));
            }
            let key = (i.min(j), i.max(j));
            if canon.contains_key(&key) {
                duplicates += 1;
            } else {
                canon.insert(key, w);
            }
        }
        if duplicates > 0 {
            log::warn!("dropped {duplicates} duplicate undirected edge(s)");
        }
        Ok(Self {
            num_nodes,
            edges: canon.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
            features: None,
            node_labels: None,
        })
    }

    pub fn with_features(mut self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(Error::shape(
                "Graph::with_features",
                format!("{} feature rows for {} nodes", features.rows(), self.num_nodes),
            ));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::shape(
                "Graph::with_node_labels",
                format!("{} labels for {} nodes", labels.len(), self.num_nodes),
            ));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn features(&self) -> Option<&DenseMatrix> {
        self.features.as_ref()
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(DenseMatrix::cols)
    }

    /// Unweighted neighbor counts; a self-loop counts once.
    pub fn edge_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(i, j, _) in &self.edges {
            deg[i] += 1;
            if i != j {
                deg[j] += 1;
            }
        }
        deg
    }

    /// Reorders nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes;
        let mut inverse = vec![usize::MAX; n];
        if perm.len() != n {
            return Err(Error::InvalidArgument("permutation length".into()));
        }
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let mut g = Graph::with_weighted_edges(
            n,
            self.edges.iter().map(|&(i, j, w)| (inverse[i], inverse[j], w)),
        )?;
        if let Some(x) = &self.features {
            g = g.with_features(x.select_rows(perm)?)?;
        }
        if let Some(l) = &self.node_labels {
            g = g.with_node_labels(perm.iter().map(|&o| l[o]).collect())?;
        }
        Ok(g)
    }
}

/// Symmetric adjacency matrix `A` with `A[i][j]` equal to the edge weight.
pub fn build_adjacency(graph: &Graph) -> Result<SparseMatrix> {
    let n = graph.num_nodes;
    let triplets = graph.edges.iter().flat_map(|&(i, j, w)| {
        let mirror = (i != j).then_some((j, i, w));
        std::iter::once((i, j, w)).chain(mirror)
    });
    SparseMatrix::from_triplets(n, n, triplets)
}

/// `Ã = A + I`. Existing diagonal entries are incremented.
pub fn add_self_loops(adjacency: &SparseMatrix) -> Result<SparseMatrix> {
    adjacency.add_diagonal(1.0)
}

/// Row sums of a square nonnegative matrix.
pub fn degree_vector(adjacency: &SparseMatrix) -> Result<Vec<f64>> {
    if !adjacency.is_square() {
        return Err(Error::NotSquare {
            rows: adjacency.rows(),
            cols: adjacency.cols(),
        });
    }
    if let Some((row, col, value)) = adjacency.iter().find(|&(_, _, v)| v < 0.0) {
        return Err(Error::NegativeEntry { row, col, value });
    }
    Ok(adjacency.row_sums())
}

/// Unnormalized Laplacian `L = D − A`.
pub fn laplacian(adjacency: &SparseMatrix) -> Result<SparseMatrix> {
    let degrees = degree_vector(adjacency)?;
    let n = adjacency.rows();
    let off = adjacency.iter().map(|(r, c, v)| (r, c, -v));
    let diag = degrees.into_iter().enumerate().map(|(i, d)| (i, i, d));
    SparseMatrix::from_triplets(n, n, off.chain(diag))
}

/// Several graphs stacked into one block-diagonal graph.
#[derive(Clone, Debug)]
pub struct BatchedGraph {
    pub adjacency: SparseMatrix,
    pub features: DenseMatrix,
    /// Source graph of each stacked row; nondecreasing.
    pub membership: Vec<usize>,
    pub graph_labels: Vec<usize>,
    node_counts: Vec<usize>,
}

impl BatchedGraph {
    pub fn num_graphs(&self) -> usize {
        self.node_counts.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.membership.len()
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.node_counts
    }

    /// Half-open row range occupied by graph `g`.
    pub fn node_range(&self, g: usize) -> std::ops::Range<usize> {
        let start: usize = self.node_counts[..g].iter().sum();
        start..start + self.node_counts[g]
    }

    pub fn with_graph_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_graphs() {
            return Err(Error::shape(
                "BatchedGraph::with_graph_labels",
                format!("{} labels for {} graphs", labels.len(), self.num_graphs()),
            ));
        }
        self.graph_labels = labels;
        Ok(self)
    }
}

/// Stacks adjacency matrices along the diagonal and features vertically.
pub fn block_diag_stack(graphs: &[&Graph]) -> Result<BatchedGraph> {
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("cannot stack an empty list of graphs".into()));
    }
    let width = graphs[0]
        .feature_dim()
        .ok_or_else(|| Error::InvalidArgument("graph 0 has no features".into()))?;
    let mut adjacencies = Vec::with_capacity(graphs.len());
    let mut data = Vec::new();
    let mut membership = Vec::new();
    let mut node_counts = Vec::with_capacity(graphs.len());
    for (g, graph) in graphs.iter().enumerate() {
        let x = graph
            .features()
            .ok_or_else(|| Error::InvalidArgument(format!("graph {g} has no features")))?;
        if x.cols() != width {
            return Err(Error::shape(
                "block_diag_stack",
                format!("graph {g} has feature width {}, expected {width}", x.cols()),
            ));
        }
        adjacencies.push(build_adjacency(graph)?);
        data.extend_from_slice(x.as_slice());
        membership.extend(std::iter::repeat_n(g, graph.num_nodes()));
        node_counts.push(graph.num_nodes());
    }
    let blocks: Vec<&SparseMatrix> = adjacencies.iter().collect();
    let rows = membership.len();
    Ok(BatchedGraph {
        adjacency: block_diagonal(&blocks),
        features: DenseMatrix::from_vec(rows, width, data)?,
        membership,
        graph_labels: Vec::new(),
        node_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Four-node example graph; node degrees with self-loops are 3, 4, 2, 3.
    fn example_graph() -> Graph {
        Graph::new(4, [(0, 1), (0, 3), (1, 2), (1, 3)]).unwrap()
    }

    #[test]
    fn example_adjacency_row_sums() {
        let a = build_adjacency(&example_graph()).unwrap();
        assert!(a.is_symmetric());
        assert_eq!(a.row_sums(), vec![2.0, 3.0, 1.0, 2.0]);
        let at = add_self_loops(&a).unwrap();
        assert_eq!(degree_vector(&at).unwrap(), vec![3.0, 4.0, 2.0, 3.0]);
        for i in 0..4 {
            assert_eq!(at.get(i, i), 1.0);
        }
    }

    #[test]
    fn small_adjacencies() {
        let a = build_adjacency(&Graph::new(2, [(0, 1)]).unwrap()).unwrap();
        assert_eq!(a.to_dense(), DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
        let z = build_adjacency(&Graph::new(3, []).unwrap()).unwrap();
        assert_eq!(z.to_dense(), DenseMatrix::zeros(3, 3));
        assert_eq!(add_self_loops(&z).unwrap(), SparseMatrix::identity(3));
        assert_eq!(
            add_self_loops(&a).unwrap().to_dense(),
            DenseMatrix::filled(2, 2, 1.0)
        );
        assert_eq!(degree_vector(&z).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn out_of_range_edge_is_an_error() {
        assert!(matches!(
            Graph::new(3, [(0, 3)]),
            Err(Error::NodeIndex { index: 3, num_nodes: 3 })
        ));
    }

    #[test]
    fn duplicates_are_canonicalized() {
        let g = Graph::new(3, [(0, 1), (1, 0), (2, 1), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0), (1, 2, 1.0)]);
    }

    #[test]
    fn raw_self_loop_is_kept_then_incremented() {
        let g = Graph::new(2, [(0, 0), (0, 1)]).unwrap();
        let a = build_adjacency(&g).unwrap();
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(add_self_loops(&a).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn degree_and_laplacian_errors() {
        let rect = SparseMatrix::zeros(2, 3);
        assert!(matches!(degree_vector(&rect), Err(Error::NotSquare { .. })));
        assert!(matches!(laplacian(&rect), Err(Error::NotSquare { .. })));
        assert!(add_self_loops(&rect).is_err());
        let neg = SparseMatrix::from_triplets(2, 2, [(0, 1, -1.0)]).unwrap();
        assert!(matches!(degree_vector(&neg), Err(Error::NegativeEntry { .. })));
    }

    #[test]
    fn laplacian_of_single_edge() {
        let a = build_adjacency(&Graph::new(2, [(0, 1)]).unwrap()).unwrap();
        assert_eq!(
            laplacian(&a).unwrap().to_dense(),
            DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap()
        );
        let z = SparseMatrix::zeros(3, 3);
        assert_eq!(laplacian(&z).unwrap().to_dense(), DenseMatrix::zeros(3, 3));
        let l = laplacian(&build_adjacency(&example_graph()).unwrap()).unwrap();
        assert!(l.row_sums().iter().all(|&s| s == 0.0));
    }

    fn featured(n: usize, edges: &[(usize, usize)], width: usize, fill: f64) -> Graph {
        Graph::new(n, edges.iter().copied())
            .unwrap()
            .with_features(DenseMatrix::filled(n, width, fill))
            .unwrap()
    }

    #[test]
    fn stacking_two_edges() {
        let a = featured(2, &[(0, 1)], 2, 1.0);
        let b = featured(2, &[(0, 1)], 2, 2.0);
        let batch = block_diag_stack(&[&a, &b]).unwrap();
        assert_eq!(batch.membership, vec![0, 0, 1, 1]);
        let expected = SparseMatrix::from_triplets(
            4,
            4,
            [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)],
        )
        .unwrap();
        assert_eq!(batch.adjacency, expected);
        assert_eq!(batch.features.row(3), &[2.0, 2.0]);
    }

    #[test]
    fn stacking_single_graph_is_identity() {
        let g = featured(3, &[(0, 1), (1, 2)], 1, 0.0);
        let batch = block_diag_stack(&[&g]).unwrap();
        assert_eq!(batch.adjacency, build_adjacency(&g).unwrap());
        assert_eq!(batch.membership, vec![0, 0, 0]);
    }

    #[test]
    fn stacking_three_graphs_has_no_cross_block_entries() {
        let gs = [
            featured(2, &[(0, 1)], 3, 0.0),
            featured(3, &[(0, 1), (0, 2), (1, 2)], 3, 0.0),
            featured(1, &[], 3, 0.0),
        ];
        let refs: Vec<&Graph> = gs.iter().collect();
        let batch = block_diag_stack(&refs).unwrap();
        assert_eq!(batch.membership, vec![0, 0, 1, 1, 1, 2]);
        assert_eq!(batch.adjacency.rows(), 6);
        for (r, c, _) in batch.adjacency.iter() {
            assert_eq!(batch.membership[r], batch.membership[c]);
        }
        assert_eq!(batch.adjacency.nnz(), 2 + 6);
    }

    #[test]
    fn stacking_mismatched_widths_fails() {
        let a = featured(2, &[(0, 1)], 2, 0.0);
        let b = featured(2, &[(0, 1)], 3, 0.0);
        assert!(block_diag_stack(&[&a, &b]).is_err());
        let bare = Graph::new(2, [(0, 1)]).unwrap();
        assert!(block_diag_stack(&[&bare]).is_err());
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 1u8..4), 0..(3 * n))
                .prop_map(move |es| {
                    Graph::with_weighted_edges(n, es.into_iter().map(|(i, j, w)| (i, j, w as f64)))
                        .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn adjacency_and_self_loops_stay_symmetric(g in arb_graph(20)) {
            let a = build_adjacency(&g).unwrap();
            prop_assert!(a.is_symmetric());
            prop_assert!(add_self_loops(&a).unwrap().is_symmetric());
        }

        #[test]
        fn laplacian_rows_vanish_and_form_is_psd(g in arb_graph(16), seed in 0u64..u64::MAX) {
            use rand::{Rng, SeedableRng};
            let a = build_adjacency(&g).unwrap();
            let l = laplacian(&a).unwrap();
            for s in l.row_sums() {
                prop_assert_eq!(s, 0.0);
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = g.num_nodes();
            for _ in 0..100 {
                let x = DenseMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
                let lx = l.spmm(&x).unwrap();
                let q: f64 = (0..n).map(|i| x.get(i, 0) * lx.get(i, 0)).sum();
                prop_assert!(q >= -1e-10);
            }
        }

        #[test]
        fn stacking_then_slicing_recovers_blocks(gs in proptest::collection::vec(arb_graph(6), 1..5)) {
            let gs: Vec<Graph> = gs
                .into_iter()
                .map(|g| { let n = g.num_nodes(); g.with_features(DenseMatrix::zeros(n, 2)).unwrap() })
                .collect();
            let refs: Vec<&Graph> = gs.iter().collect();
            let batch = block_diag_stack(&refs).unwrap();
            prop_assert!(batch.membership.windows(2).all(|w| w[0] <= w[1]));
            for (g, graph) in gs.iter().enumerate() {
                let range = batch.node_range(g);
                let idx: Vec<usize> = range.collect();
                let block = batch.adjacency.induced_submatrix(&idx).unwrap();
                prop_assert_eq!(block, build_adjacency(graph).unwrap());
            }
        }
    }
}
