use rand::Rng;

use super::TapeSlot;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Inverted dropout: survivors are scaled by `1/(1 − rate)` at train time so
/// inference is the identity. Output shape always equals input shape.
#[derive(Debug)]
pub struct Dropout {
    rate: f64,
    tape: TapeSlot<Option<DenseMatrix>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        Ok(Self {
            rate,
            tape: TapeSlot::new("Dropout"),
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &DenseMatrix,
        training: bool,
        rng: &mut R,
    ) -> DenseMatrix {
        if !training || self.rate == 0.0 {
            self.tape.record(None);
            return input.clone();
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask = DenseMatrix::from_fn(input.rows(), input.cols(), |_, _| {
            if rng.random::<f64>() < keep {
                scale
            } else {
                0.0
            }
        });
        let out = input.hadamard(&mask).expect("mask built with input shape");
        self.tape.record(Some(mask));
        out
    }

    pub fn backward(&mut self, grad: &DenseMatrix) -> Result<DenseMatrix> {
        match self.tape.take()? {
            None => Ok(grad.clone()),
            Some(mask) => grad.hadamard(&mask),
        }
    }

    pub fn clear(&mut self) {
        self.tape.clear();
    }
}
