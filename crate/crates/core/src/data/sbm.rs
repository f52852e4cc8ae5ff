use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::NodeDataset;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Stochastic block model settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmConfig {
    pub n_per_block: usize,
    pub num_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Standard deviation of the Gaussian noise added to the one-hot block
    /// features.
    pub noise: f64,
    /// Fractions of each block used for training and validation; the rest
    /// is test.
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SbmConfig {
    pub fn new(n_per_block: usize, num_blocks: usize, p_in: f64, p_out: f64, seed: u64) -> Self {
        Self {
            n_per_block,
            num_blocks,
            p_in,
            p_out,
            noise: 1.0,
            train_fraction: 0.1,
            val_fraction: 0.2,
            seed,
        }
    }

    pub fn generate(&self) -> Result<NodeDataset> {
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= p_out < p_in <= 1, got p_in={}, p_out={}",
                self.p_in, self.p_out
            )));
        }
        if self.n_per_block == 0 || self.num_blocks == 0 {
            return Err(Error::InvalidArgument("empty block model".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad noise level {}", self.noise)));
        }
        let (b, m) = (self.num_blocks, self.n_per_block);
        let n = b * m;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let block = |i: usize| i / m;

        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if block(i) == block(j) { self.p_in } else { self.p_out };
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }

        let normal = Normal::new(0.0, self.noise).expect("validated noise");
        let features = DenseMatrix::from_fn(n, b, |r, c| {
            let base = if block(r) == c { 1.0 } else { 0.0 };
            base + normal.sample(&mut rng)
        });
        let labels: Vec<usize> = (0..n).map(block).collect();

        let n_train = ((self.train_fraction * m as f64).round() as usize).clamp(1, m);
        let n_val = ((self.val_fraction * m as f64).round() as usize).min(m - n_train);
        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..b {
            let mut members: Vec<usize> = (k * m..(k + 1) * m).collect();
            members.shuffle(&mut rng);
            train.extend_from_slice(&members[..n_train]);
            val.extend_from_slice(&members[n_train..n_train + n_val]);
            test.extend_from_slice(&members[n_train + n_val..]);
        }
        for split in [&mut train, &mut val, &mut test] {
            split.sort_unstable();
        }
        let graph = Graph::new(n, edges)?.with_features(features)?.with_node_labels(labels)?;
        NodeDataset::new(graph, b, train, val, test)
    }
}

/// Block model with default noise and splits; labels are block indices.
pub fn generate_sbm(
    n_per_block: usize,
    num_blocks: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<NodeDataset> {
    SbmConfig::new(n_per_block, num_blocks, p_in, p_out, seed).generate()
}
