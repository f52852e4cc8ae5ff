//! DropNode: train-time node subsampling.
//!
//! A downsampling layer keeps `⌊pN⌋` randomly chosen rows of its input
//! (all features of a dropped node go at once) and rebuilds the aggregation
//! matrix on the induced subgraph. An optional paired upsampling layer puts
//! the surviving rows back in place and zero-fills the rest. Without an
//! upsampling partner, the kept rows are scaled by `1/p`.
//!
//! Unlike dropout, which masks entries and preserves the shape, the
//! downsampled matrix has fewer rows and the graph itself changes.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TapeSlot;
use crate::aggregation::AggregationKind;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// How many nodes a downsampling layer keeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KeepSpec {
    /// Keep `⌊pN⌋` nodes, `p` in (0, 1].
    Ratio(f64),
    /// Keep exactly this many nodes.
    Count(usize),
}

impl KeepSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KeepSpec::Ratio(p) if !(p > 0.0 && p <= 1.0) => Err(Error::InvalidArgument(format!(
                "keep ratio {p} outside (0, 1]"
            ))),
            KeepSpec::Count(0) => Err(Error::InvalidArgument("keep count must be at least 1".into())),
            _ => Ok(()),
        }
    }

    /// Number of rows kept out of `n`.
    pub fn keep_count(&self, n: usize) -> Result<usize> {
        self.validate()?;
        let k = match *self {
            // The small offset absorbs products like 0.29 * 100 = 28.999999999999996.
            KeepSpec::Ratio(p) => (p * n as f64 + 1e-9).floor() as usize,
            KeepSpec::Count(c) => c,
        };
        if k < 1 || k > n {
            return Err(Error::InvalidArgument(format!(
                "DropNode would keep {k} of {n} nodes (must be between 1 and {n})"
            )));
        }
        Ok(k)
    }

    /// The keep probability `p` used for output scaling.
    pub fn ratio(&self, n: usize) -> f64 {
        match *self {
            KeepSpec::Ratio(p) => p,
            KeepSpec::Count(c) => c as f64 / n as f64,
        }
    }
}

/// Everything a downstream layer needs to operate on the sampled subgraph.
#[derive(Clone, Debug)]
pub struct DropPlan {
    /// Sorted indices (into the layer input) of the retained rows.
    pub kept_indices: Vec<usize>,
    pub input_rows: usize,
    pub keep_ratio: f64,
    /// Factor applied to retained rows (`1/p` or `1`).
    pub scale: f64,
    /// `Ã` restricted to the retained nodes; self-loops survive.
    pub a_tilde: Arc<SparseMatrix>,
    /// Aggregation matrix rebuilt from scratch on the induced subgraph.
    pub aggregation: Arc<SparseMatrix>,
    /// Graph membership of each retained row, for batched inputs.
    pub membership: Option<Vec<usize>>,
}

/// Uniformly samples `keep` of `n` indices without replacement (Fisher–Yates
/// prefix) and returns them sorted.
pub fn sample_kept_indices<R: Rng + ?Sized>(n: usize, keep: usize, rng: &mut R) -> Vec<usize> {
    assert!(keep <= n, "cannot keep {keep} of {n}");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..keep {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(keep);
    idx.sort_unstable();
    idx
}

#[derive(Debug)]
struct DownTape {
    kept: Vec<usize>,
    input_rows: usize,
    scale: f64,
}

/// Downsampling half of DropNode.
#[derive(Debug)]
pub struct DropNodeDown {
    spec: KeepSpec,
    kind: AggregationKind,
    scale_outputs: bool,
    tape: TapeSlot<DownTape>,
}

impl DropNodeDown {
    pub fn new(spec: KeepSpec, kind: AggregationKind, scale_outputs: bool) -> Self {
        Self {
            spec,
            kind,
            scale_outputs,
            tape: TapeSlot::new("DropNodeDown"),
        }
    }

    pub fn spec(&self) -> KeepSpec {
        self.spec
    }

    /// Samples a subgraph and returns the retained rows with the plan.
    ///
    /// With `membership` (a batch of stacked graphs), every graph is sampled
    /// separately and keeps `max(1, ⌊p·Nᵢ⌋)` nodes, so no graph vanishes
    /// before pooling. Only ratio specs are meaningful per graph.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &DenseMatrix,
        a_tilde: &SparseMatrix,
        membership: Option<&[usize]>,
        rng: &mut R,
    ) -> Result<(DenseMatrix, DropPlan)> {
        let n = input.rows();
        if a_tilde.rows() != n || a_tilde.cols() != n {
            return Err(Error::shape(
                "DropNodeDown::forward",
                format!("Ã is {}x{} for {n} input rows", a_tilde.rows(), a_tilde.cols()),
            ));
        }
        let (kept, keep_ratio, sub_membership) = match membership {
            None => {
                let keep = self.spec.keep_count(n)?;
                (sample_kept_indices(n, keep, rng), self.spec.ratio(n), None)
            }
            Some(groups) => {
                let p = match self.spec {
                    KeepSpec::Ratio(p) => p,
                    KeepSpec::Count(_) => {
                        return Err(Error::InvalidArgument(
                            "batched DropNode needs a keep ratio, not a count".into(),
                        ))
                    }
                };
                self.spec.validate()?;
                let kept = sample_per_group(groups, n, p, rng)?;
                let sub = kept.iter().map(|&i| groups[i]).collect();
                (kept, p, Some(sub))
            }
        };
        let scale = if self.scale_outputs { 1.0 / keep_ratio } else { 1.0 };
        let mut sub = input.select_rows(&kept)?;
        if scale != 1.0 {
            sub.scale(scale);
        }
        let induced = a_tilde.induced_submatrix(&kept)?;
        let aggregation = self.kind.build(&induced)?;
        self.tape.record(DownTape {
            kept: kept.clone(),
            input_rows: n,
            scale,
        });
        let plan = DropPlan {
            kept_indices: kept,
            input_rows: n,
            keep_ratio,
            scale,
            a_tilde: Arc::new(induced),
            aggregation: Arc::new(aggregation),
            membership: sub_membership,
        };
        Ok((sub, plan))
    }

    /// Scatters the gradient back to the retained rows; dropped rows get zero.
    pub fn backward(&mut self, grad_sub: &DenseMatrix) -> Result<DenseMatrix> {
        let tape = self.tape.take()?;
        if grad_sub.rows() != tape.kept.len() {
            return Err(Error::shape(
                "DropNodeDown::backward",
                format!("{} gradient rows for {} kept nodes", grad_sub.rows(), tape.kept.len()),
            ));
        }
        let mut grad = DenseMatrix::zeros(tape.input_rows, grad_sub.cols());
        for (r, &i) in tape.kept.iter().enumerate() {
            let dst = grad.row_mut(i);
            for (d, s) in dst.iter_mut().zip(grad_sub.row(r)) {
                *d = s * tape.scale;
            }
        }
        Ok(grad)
    }

    pub fn clear(&mut self) {
        self.tape.clear();
    }
}

fn sample_per_group<R: Rng + ?Sized>(
    membership: &[usize],
    n: usize,
    p: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if membership.len() != n {
        return Err(Error::shape(
            "DropNodeDown::forward",
            format!("membership of length {} for {n} rows", membership.len()),
        ));
    }
    let mut kept = Vec::new();
    let mut start = 0;
    while start < n {
        let g = membership[start];
        let mut end = start;
        while end < n && membership[end] == g {
            end += 1;
        }
        let size = end - start;
        let keep = ((p * size as f64 + 1e-9).floor() as usize).max(1);
        kept.extend(sample_kept_indices(size, keep, rng).into_iter().map(|i| i + start));
        start = end;
    }
    Ok(kept)
}

#[derive(Debug)]
struct UpTape {
    kept: Vec<usize>,
}

/// Upsampling half of DropNode: zero-fills the rows dropped by its partner.
#[derive(Debug)]
pub struct DropNodeUp {
    tape: TapeSlot<UpTape>,
}

impl Default for DropNodeUp {
    fn default() -> Self {
        Self {
            tape: TapeSlot::new("DropNodeUp"),
        }
    }
}

impl DropNodeUp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, sub: &DenseMatrix, kept: &[usize], n: usize) -> Result<DenseMatrix> {
        if sub.rows() != kept.len() {
            return Err(Error::shape(
                "DropNodeUp::forward",
                format!("{} rows for {} kept indices", sub.rows(), kept.len()),
            ));
        }
        let mut out = DenseMatrix::zeros(n, sub.cols());
        for (r, &i) in kept.iter().enumerate() {
            if i >= n {
                return Err(Error::NodeIndex {
                    index: i,
                    num_nodes: n,
                });
            }
            out.row_mut(i).copy_from_slice(sub.row(r));
        }
        self.tape.record(UpTape {
            kept: kept.to_vec(),
        });
        Ok(out)
    }

    pub fn backward(&mut self, grad: &DenseMatrix) -> Result<DenseMatrix> {
        let tape = self.tape.take()?;
        grad.select_rows(&tape.kept)
    }

    pub fn clear(&mut self) {
        self.tape.clear();
    }
}
