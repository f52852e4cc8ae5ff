//! Loader for the TU graph-classification text layout.
//!
//! `<name>_A.txt` holds `i, j` node pairs (1-based, global numbering),
//! `<name>_graph_indicator.txt` the 1-based graph of every node and
//! `<name>_graph_labels.txt` one label per graph. Node labels and node
//! attributes are optional.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{block_diag_stack, BatchedGraph, Graph};

#[derive(Clone, Debug)]
pub struct TuDataset {
    pub name: String,
    /// Node labels, when present, are stored on each graph as indices into
    /// a vocabulary shared by the whole dataset.
    pub graphs: Vec<Graph>,
    /// Graph labels remapped to `0..num_classes` in ascending order of the
    /// original values.
    pub graph_labels: Vec<usize>,
    pub label_values: Vec<i64>,
    pub num_node_labels: usize,
    pub attributes: Option<Vec<DenseMatrix>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// One-hot node label followed by the node degree.
    DegreeLabel,
    /// The raw node attribute vectors.
    Attributes,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "degree_label" => Ok(FeatureMode::DegreeLabel),
            "attributes" => Ok(FeatureMode::Attributes),
            other => Err(Error::Config(format!("unknown feature mode `{other}`"))),
        }
    }
}

impl TuDataset {
    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn num_classes(&self) -> usize {
        self.label_values.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::num_nodes).sum()
    }

    pub fn avg_nodes(&self) -> f64 {
        self.total_nodes() as f64 / self.graphs.len() as f64
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.graphs.first().and_then(Graph::feature_dim)
    }

    /// Block-diagonal batch of the selected graphs, with their labels.
    pub fn batch(&self, indices: &[usize]) -> Result<BatchedGraph> {
        let graphs: Vec<&Graph> = indices.iter().map(|&i| &self.graphs[i]).collect();
        block_diag_stack(&graphs)?.with_graph_labels(indices.iter().map(|&i| self.graph_labels[i]).collect())
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_ints(path: &Path, lines: &[String]) -> Result<Vec<i64>> {
    lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            l.parse()
                .map_err(|_| parse_err(path, k + 1, format!("expected an integer, found `{l}`")))
        })
        .collect()
}

pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<TuDataset> {
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let indicator_path = file("graph_indicator");
    let indicator = parse_ints(&indicator_path, &read_lines(&indicator_path)?)?;
    let labels_path = file("graph_labels");
    let raw_labels = parse_ints(&labels_path, &read_lines(&labels_path)?)?;
    let num_graphs = raw_labels.len();
    let total = indicator.len();

    // Nodes of one graph must be contiguous and graph ids run 1..=G in order.
    let mut graph_of = Vec::with_capacity(total);
    let mut offsets = vec![0usize; num_graphs + 1];
    let mut prev = 0i64;
    for (k, &g) in indicator.iter().enumerate() {
        if g < 1 || g as usize > num_graphs {
            return Err(parse_err(
                &indicator_path,
                k + 1,
                format!("graph id {g} outside 1..={num_graphs}"),
            ));
        }
        if g != prev && g != prev + 1 {
            return Err(parse_err(
                &indicator_path,
                k + 1,
                format!("graph ids must be contiguous and ascending ({prev} then {g})"),
            ));
        }
        prev = g;
        graph_of.push(g as usize - 1);
        offsets[g as usize] += 1;
    }
    if (prev as usize) != num_graphs {
        return Err(Error::Format {
            path: indicator_path,
            message: format!("{num_graphs} graph labels but only {prev} graphs have nodes"),
        });
    }
    for g in 0..num_graphs {
        offsets[g + 1] += offsets[g];
    }

    let a_path = file("A");
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (k, line) in read_lines(&a_path)?.iter().enumerate() {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| parse_err(&a_path, k + 1, "expected `i, j`"))?;
        let parse = |t: &str| -> Result<usize> {
            let v: usize = t
                .trim()
                .parse()
                .map_err(|_| parse_err(&a_path, k + 1, format!("bad node index `{}`", t.trim())))?;
            if v == 0 || v > total {
                return Err(parse_err(
                    &a_path,
                    k + 1,
                    format!("node {v} outside 1..={total}"),
                ));
            }
            Ok(v - 1)
        };
        let (i, j) = (parse(a)?, parse(b)?);
        let g = graph_of[i];
        if graph_of[j] != g {
            return Err(parse_err(&a_path, k + 1, "edge joins two different graphs"));
        }
        edges[g].push((i - offsets[g], j - offsets[g]));
    }

    let node_labels_path = file("node_labels");
    let (node_labels, num_node_labels) = if node_labels_path.exists() {
        let raw = parse_ints(&node_labels_path, &read_lines(&node_labels_path)?)?;
        if raw.len() != total {
            return Err(Error::Format {
                path: node_labels_path,
                message: format!("{} node labels for {total} nodes", raw.len()),
            });
        }
        let vocab: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let idx = raw
            .iter()
            .map(|v| vocab.binary_search(v).expect("in vocabulary"))
            .collect::<Vec<_>>();
        (Some(idx), vocab.len())
    } else {
        (None, 0)
    };

    let attr_path = file("node_attributes");
    let attributes = if attr_path.exists() {
        let lines = read_lines(&attr_path)?;
        if lines.len() != total {
            return Err(Error::Format {
                path: attr_path,
                message: format!("{} attribute rows for {total} nodes", lines.len()),
            });
        }
        let mut width = None;
        let mut data = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            let row = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_err(&attr_path, k + 1, format!("bad attribute `{}`", t.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            if *width.get_or_insert(row.len()) != row.len() {
                return Err(parse_err(&attr_path, k + 1, "ragged attribute row"));
            }
            data.extend(row);
        }
        let all = DenseMatrix::from_vec(total, width.unwrap_or(0), data)?;
        let per_graph = (0..num_graphs)
            .map(|g| all.select_rows(&(offsets[g]..offsets[g + 1]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Some(per_graph)
    } else {
        None
    };

    let label_values: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let graph_labels = raw_labels
        .iter()
        .map(|v| label_values.binary_search(v).expect("in label set"))
        .collect();

    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, graph_edges) in edges.into_iter().enumerate() {
        let mut graph = Graph::new(offsets[g + 1] - offsets[g], graph_edges)?;
        if let Some(labels) = &node_labels {
            graph = graph.with_node_labels(labels[offsets[g]..offsets[g + 1]].to_vec())?;
        }
        graphs.push(graph);
    }
    Ok(TuDataset {
        name: name.to_string(),
        graphs,
        graph_labels,
        label_values,
        num_node_labels,
        attributes,
    })
}

/// Attaches features to every graph; all graphs get the same width.
///
/// `DegreeLabel` uses the unweighted degree without self-loops; without
/// node labels the feature is the degree alone.
pub fn build_features(mut ds: TuDataset, mode: FeatureMode) -> Result<TuDataset> {
    match mode {
        FeatureMode::DegreeLabel => {
            let vocab = ds.num_node_labels;
            for graph in ds.graphs.iter_mut() {
                let degrees = graph.edge_degrees();
                let labels = graph.node_labels().map(<[usize]>::to_vec);
                let x = DenseMatrix::from_fn(graph.num_nodes(), vocab + 1, |r, c| {
                    if c == vocab {
                        degrees[r] as f64
                    } else if labels.as_ref().is_some_and(|l| l[r] == c) {
                        1.0
                    } else {
                        0.0
                    }
                });
                *graph = graph.clone().with_features(x)?;
            }
        }
        FeatureMode::Attributes => {
            let attrs = ds.attributes.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("{} has no node attributes", ds.name))
            })?;
            for (graph, x) in ds.graphs.iter_mut().zip(attrs) {
                *graph = graph.clone().with_features(x.clone())?;
            }
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &Path, with_labels: bool) {
        let w = |suffix: &str, body: &str| std::fs::write(dir.join(format!("TOY_{suffix}.txt")), body).unwrap();
        // Graph 1: nodes 1-2 joined. Graph 2: path 3-4-5, listed in both directions.
        w("A", "1, 2\n2, 1\n3, 4\n4, 3\n4, 5\n5, 4\n");
        w("graph_indicator", "1\n1\n2\n2\n2\n");
        w("graph_labels", "-1\n1\n");
        if with_labels {
            w("node_labels", "0\n2\n2\n5\n0\n");
            w("node_attributes", "0.5, 1\n1, 1\n2, 0\n3, 0\n4, 1.5\n");
        }
    }

    #[test]
    fn two_graph_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), true);
        let ds = load_tu_dataset(dir.path(), "TOY").unwrap();
        assert_eq!(ds.num_graphs(), 2);
        assert_eq!(ds.graphs[0].num_nodes(), 2);
        assert_eq!(ds.graphs[1].num_nodes(), 3);
        assert_eq!(ds.graphs[1].edges(), &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(ds.graph_labels, vec![0, 1]);
        assert_eq!(ds.label_values, vec![-1, 1]);
        assert_eq!(ds.total_nodes(), 5);
        assert_eq!(ds.num_node_labels, 3);
        assert_eq!(ds.graphs[1].node_labels().unwrap(), &[1, 2, 0]);

        let feat = build_features(ds.clone(), FeatureMode::DegreeLabel).unwrap();
        let x = feat.graphs[1].features().unwrap();
        assert_eq!(x.row(1), &[0.0, 0.0, 1.0, 2.0]);
        assert!(feat.graphs.iter().all(|g| g.feature_dim() == Some(4)));

        let attrs = build_features(ds, FeatureMode::Attributes).unwrap();
        assert_eq!(attrs.graphs[1].features().unwrap().row(2), &[4.0, 1.5]);
    }

    #[test]
    fn degree_only_without_node_labels() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), false);
        let ds = load_tu_dataset(dir.path(), "TOY").unwrap();
        assert!(build_features(ds.clone(), FeatureMode::Attributes).is_err());
        let feat = build_features(ds, FeatureMode::DegreeLabel).unwrap();
        assert_eq!(feat.feature_dim(), Some(1));
        assert_eq!(feat.graphs[1].features().unwrap().as_slice(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), false);
        assert!(matches!(load_tu_dataset(dir.path(), "NOPE"), Err(Error::Io { .. })));
        std::fs::write(dir.path().join("TOY_A.txt"), "1, 9\n").unwrap();
        assert!(matches!(load_tu_dataset(dir.path(), "TOY"), Err(Error::Parse { line: 1, .. })));
        std::fs::write(dir.path().join("TOY_A.txt"), "2, 3\n").unwrap();
        assert!(load_tu_dataset(dir.path(), "TOY").is_err());
    }
}
