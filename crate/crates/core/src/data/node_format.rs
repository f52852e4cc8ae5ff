//! Plain-text node-classification format.
//!
//! ```text
//! N F C n_train n_val n_test
//! <N lines: F space-separated feature values>
//! <N lines: integer label, -1 for unlabeled>
//! <E lines: `i j` undirected edge, 0-based>
//! <train indices, space-separated>
//! <val indices>
//! <test indices>
//! ```
//!
//! UTF-8, LF line endings, every line (including the last) terminated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Label value for nodes without a class.
pub const UNLABELED: usize = usize::MAX;

/// A graph with per-node features and labels plus train/val/test splits.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeDataset {
    pub graph: Graph,
    pub num_classes: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl NodeDataset {
    /// `graph` must carry features and labels.
    pub fn new(
        graph: Graph,
        num_classes: usize,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let ds = Self {
            graph,
            num_classes,
            train,
            val,
            test,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.graph.features().is_none() {
            return Err(Error::InvalidArgument("node dataset needs features".into()));
        }
        let labels = self
            .graph
            .node_labels()
            .ok_or_else(|| Error::InvalidArgument("node dataset needs labels".into()))?;
        if let Some((i, &l)) = labels
            .iter()
            .enumerate()
            .find(|&(_, &l)| l != UNLABELED && l >= self.num_classes)
        {
            return Err(Error::InvalidArgument(format!(
                "node {i} has label {l} but there are {} classes",
                self.num_classes
            )));
        }
        let mut seen = vec![false; n];
        for (name, split) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in split {
                if i >= n {
                    return Err(Error::NodeIndex {
                        index: i,
                        num_nodes: n,
                    });
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "node {i} appears twice across splits (second time in {name})"
                    )));
                }
                if labels[i] == UNLABELED {
                    return Err(Error::InvalidArgument(format!(
                        "{name} node {i} is unlabeled"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn features(&self) -> &DenseMatrix {
        self.graph.features().expect("validated")
    }

    pub fn labels(&self) -> &[usize] {
        self.graph.node_labels().expect("validated")
    }

    pub fn mask(&self, indices: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.num_nodes()];
        for &i in indices {
            m[i] = true;
        }
        m
    }

    pub fn train_mask(&self) -> Vec<bool> {
        self.mask(&self.train)
    }

    pub fn val_mask(&self) -> Vec<bool> {
        self.mask(&self.val)
    }

    pub fn test_mask(&self) -> Vec<bool> {
        self.mask(&self.test)
    }

    /// ℓ1-normalizes every feature row (all-zero rows stay zero).
    pub fn row_normalize(&mut self) -> Result<()> {
        let mut x = self.features().clone();
        x.row_normalize_l1();
        self.graph = self.graph.clone().with_features(x)?;
        Ok(())
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_usize_list(path: &Path, lineno: usize, line: &str) -> Result<Vec<usize>> {
    line.split_ascii_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(path, lineno, format!("expected a node index, found `{t}`")))
        })
        .collect()
}

pub fn load_node_dataset(path: &Path) -> Result<NodeDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_node_dataset(&text, path)
}

/// Parses the text format; `path` is only used in error messages.
pub fn parse_node_dataset(text: &str, path: &Path) -> Result<NodeDataset> {
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| Error::Format {
            path: PathBuf::from(path),
            message: "file must end with a newline".into(),
        })?;
    let lines: Vec<&str> = body.split('\n').collect();
    let header = parse_usize_list(path, 1, lines[0])?;
    let [n, f, c, n_train, n_val, n_test] = header[..] else {
        return Err(parse_err(path, 1, "header must be `N F C n_train n_val n_test`"));
    };
    if lines.len() < 1 + 2 * n + 3 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!(
                "header announces {n} nodes but the file has only {} lines",
                lines.len()
            ),
        });
    }

    let mut data = Vec::with_capacity(n * f);
    for (k, line) in lines[1..=n].iter().enumerate() {
        let lineno = k + 2;
        let before = data.len();
        for t in line.split_ascii_whitespace() {
            let v: f64 = t
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad feature value `{t}`")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, "non-finite feature value"));
            }
            data.push(v);
        }
        if data.len() - before != f {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {f} feature values, found {}", data.len() - before),
            ));
        }
    }
    let features = DenseMatrix::from_vec(n, f, data)?;

    let mut labels = Vec::with_capacity(n);
    for (k, line) in lines[n + 1..=2 * n].iter().enumerate() {
        let lineno = n + k + 2;
        let t = line.trim();
        let label = if t == "-1" {
            UNLABELED
        } else {
            let l: usize = t
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad label `{t}`")))?;
            if l >= c {
                return Err(parse_err(path, lineno, format!("label {l} outside {c} classes")));
            }
            l
        };
        labels.push(label);
    }

    let edge_end = lines.len() - 3;
    let mut edges = Vec::with_capacity(edge_end - (2 * n + 1));
    for (k, line) in lines[2 * n + 1..edge_end].iter().enumerate() {
        let lineno = 2 * n + k + 2;
        let ends = parse_usize_list(path, lineno, line)?;
        let [i, j] = ends[..] else {
            return Err(parse_err(path, lineno, "edge line must be `i j`"));
        };
        if i >= n || j >= n {
            return Err(parse_err(path, lineno, format!("edge ({i}, {j}) outside {n} nodes")));
        }
        edges.push((i, j));
    }

    let mut splits = Vec::with_capacity(3);
    for (k, expected) in [n_train, n_val, n_test].into_iter().enumerate() {
        let lineno = edge_end + k + 1;
        let idx = parse_usize_list(path, lineno, lines[edge_end + k])?;
        if idx.len() != expected {
            return Err(parse_err(
                path,
                lineno,
                format!("header announces {expected} indices, line has {}", idx.len()),
            ));
        }
        splits.push(idx);
    }
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");

    let graph = Graph::new(n, edges)?.with_features(features)?.with_node_labels(labels)?;
    NodeDataset::new(graph, c, train, val, test).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Serializes in canonical form: edges as `i j` with `i <= j`, sorted.
pub fn format_node_dataset(ds: &NodeDataset) -> String {
    let x = ds.features();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {} {} {}",
        ds.num_nodes(),
        x.cols(),
        ds.num_classes,
        ds.train.len(),
        ds.val.len(),
        ds.test.len()
    );
    for r in 0..x.rows() {
        let row: Vec<String> = x.row(r).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    for &l in ds.labels() {
        if l == UNLABELED {
            out.push_str("-1\n");
        } else {
            let _ = writeln!(out, "{l}");
        }
    }
    for &(i, j, _) in ds.graph.edges() {
        let _ = writeln!(out, "{i} {j}");
    }
    for split in [&ds.train, &ds.val, &ds.test] {
        let items: Vec<String> = split.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{}", items.join(" "));
    }
    out
}

pub fn save_node_dataset(ds: &NodeDataset, path: &Path) -> Result<()> {
    std::fs::write(path, format_node_dataset(ds)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "2 2 2 1 0 1\n1 0\n0 0.5\n0\n1\n0 1\n0\n\n1\n";

    #[test]
    fn minimal_fixture_loads_and_round_trips() {
        let ds = parse_node_dataset(MINIMAL, Path::new("mini.nds")).unwrap();
        assert_eq!(ds.num_nodes(), 2);
        assert_eq!(ds.train_mask(), vec![true, false]);
        assert_eq!(ds.val_mask(), vec![false, false]);
        assert_eq!(ds.test_mask(), vec![false, true]);
        assert_eq!(ds.graph.num_edges(), 1);
        assert_eq!(format_node_dataset(&ds), MINIMAL);
    }

    #[test]
    fn unlabeled_nodes_round_trip() {
        let text = "3 1 2 1 0 1\n1\n2\n3\n0\n-1\n1\n0 1\n1 2\n0\n\n2\n";
        let ds = parse_node_dataset(text, Path::new("x")).unwrap();
        assert_eq!(ds.labels()[1], UNLABELED);
        assert_eq!(format_node_dataset(&ds), text);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "2 2 2 1 0 1\n1 0\n0 abc\n0\n1\n0 1\n0\n\n1\n";
        match parse_node_dataset(text, Path::new("bad.nds")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short_row = "2 2 2 1 0 1\n1 0\n0\n0\n1\n0 1\n0\n\n1\n";
        assert!(matches!(
            parse_node_dataset(short_row, Path::new("x")).unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
    }

    #[test]
    fn header_body_mismatch() {
        let wrong_split = "2 2 2 2 0 1\n1 0\n0 0.5\n0\n1\n0 1\n0\n\n1\n";
        assert!(parse_node_dataset(wrong_split, Path::new("x")).is_err());
        let too_short = "5 2 2 1 0 1\n1 0\n";
        assert!(parse_node_dataset(too_short, Path::new("x")).is_err());
        let no_newline = MINIMAL.trim_end();
        assert!(parse_node_dataset(no_newline, Path::new("x")).is_err());
        let overlap = "2 2 2 1 0 1\n1 0\n0 0.5\n0\n1\n0 1\n0\n\n0\n";
        assert!(parse_node_dataset(overlap, Path::new("x")).is_err());
    }
}
