use super::TapeSlot;
use crate::dense::{axpy, DenseMatrix};
use crate::error::{Error, Result};

/// Graph-wise mean pooling over a membership vector.
#[derive(Debug)]
pub struct MeanPool {
    tape: TapeSlot<PoolTape>,
}

#[derive(Debug)]
struct PoolTape {
    membership: Vec<usize>,
    counts: Vec<usize>,
}

impl Default for MeanPool {
    fn default() -> Self {
        Self {
            tape: TapeSlot::new("MeanPool"),
        }
    }
}

impl MeanPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// One output row per graph `0..num_graphs`: the mean of its member rows.
    pub fn forward(
        &mut self,
        input: &DenseMatrix,
        membership: &[usize],
        num_graphs: usize,
    ) -> Result<DenseMatrix> {
        if membership.len() != input.rows() {
            return Err(Error::shape(
                "MeanPool::forward",
                format!("{} membership entries for {} rows", membership.len(), input.rows()),
            ));
        }
        let mut counts = vec![0usize; num_graphs];
        let mut out = DenseMatrix::zeros(num_graphs, input.cols());
        for (r, &g) in membership.iter().enumerate() {
            if g >= num_graphs {
                return Err(Error::InvalidArgument(format!(
                    "membership {g} at row {r} exceeds {num_graphs} graphs"
                )));
            }
            counts[g] += 1;
            axpy(1.0, input.row(r), out.row_mut(g));
        }
        if let Some(g) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!("graph {g} has no rows to pool")));
        }
        for (g, &c) in counts.iter().enumerate() {
            let inv = 1.0 / c as f64;
            out.row_mut(g).iter_mut().for_each(|v| *v *= inv);
        }
        self.tape.record(PoolTape {
            membership: membership.to_vec(),
            counts,
        });
        Ok(out)
    }

    /// Each member row receives its graph's gradient divided by the graph size.
    pub fn backward(&mut self, grad: &DenseMatrix) -> Result<DenseMatrix> {
        let tape = self.tape.take()?;
        if grad.rows() != tape.counts.len() {
            return Err(Error::shape(
                "MeanPool::backward",
                format!("{} gradient rows for {} graphs", grad.rows(), tape.counts.len()),
            ));
        }
        let mut out = DenseMatrix::zeros(tape.membership.len(), grad.cols());
        for (r, &g) in tape.membership.iter().enumerate() {
            let inv = 1.0 / tape.counts[g] as f64;
            for (o, s) in out.row_mut(r).iter_mut().zip(grad.row(g)) {
                *o = s * inv;
            }
        }
        Ok(out)
    }

    pub fn clear(&mut self) {
        self.tape.clear();
    }
}
