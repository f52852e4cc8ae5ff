use std::path::Path;

use super::config::{ModelConfig, Task};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GPCVPRM1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    ConvWeight,
    FcWeight,
    FcBias,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub role: ParamRole,
}

/// Parameter layout implied by a config, in storage order.
pub fn param_specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    let l = config.num_gpconv;
    for i in 0..l {
        let rows = if i == 0 { config.input_dim } else { config.hidden_dim };
        let cols = match config.task {
            Task::Node if i == l - 1 => config.num_classes,
            _ => config.hidden_dim,
        };
        specs.push(ParamSpec {
            name: format!("conv{i}.weight"),
            rows,
            cols,
            role: ParamRole::ConvWeight,
        });
    }
    if config.task == Task::Graph {
        let mut width = config.hidden_dim;
        let layers = (0..config.num_fc)
            .map(|i| (format!("fc{i}"), config.fc_dim))
            .chain(std::iter::once(("out".to_string(), config.num_classes)));
        for (name, out) in layers {
            specs.push(ParamSpec {
                name: format!("{name}.weight"),
                rows: width,
                cols: out,
                role: ParamRole::FcWeight,
            });
            specs.push(ParamSpec {
                name: format!("{name}.bias"),
                rows: 1,
                cols: out,
                role: ParamRole::FcBias,
            });
            width = out;
        }
    }
    specs
}

/// Ordered weight and bias matrices of one model. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tensors: Vec<DenseMatrix>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            tensors: param_specs(config)
                .iter()
                .map(|s| DenseMatrix::zeros(s.rows, s.cols))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self.tensors.iter().map(|t| DenseMatrix::zeros(t.rows(), t.cols())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(DenseMatrix::is_finite)
    }

    /// Checks count and shapes against `config`.
    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        let specs = param_specs(config);
        if specs.len() != self.tensors.len() {
            return Err(Error::shape(
                "ModelParams::check",
                format!("{} tensors, config expects {}", self.tensors.len(), specs.len()),
            ));
        }
        for (spec, t) in specs.iter().zip(&self.tensors) {
            if t.shape() != (spec.rows, spec.cols) {
                return Err(Error::shape(
                    "ModelParams::check",
                    format!("{} is {:?}, expected {:?}", spec.name, t.shape(), (spec.rows, spec.cols)),
                ));
            }
        }
        Ok(())
    }

    /// Binary checkpoint: magic, tensor count, then per tensor its shape and
    /// little-endian `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.num_scalars() * 8 + self.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format {
            path: "<checkpoint>".into(),
            message: m.to_string(),
        };
        let mut cursor = bytes
            .strip_prefix(MAGIC.as_slice())
            .ok_or_else(|| bad("missing checkpoint header"))?;
        let next_u64 = |cursor: &mut &[u8]| -> Result<u64> {
            if cursor.len() < 8 {
                return Err(bad("truncated checkpoint"));
            }
            let (head, rest) = cursor.split_at(8);
            *cursor = rest;
            Ok(u64::from_le_bytes(head.try_into().expect("8 bytes")))
        };
        let count = next_u64(&mut cursor)? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let rows = next_u64(&mut cursor)? as usize;
            let cols = next_u64(&mut cursor)? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= cursor.len()))
                .ok_or_else(|| bad("truncated checkpoint"))?;
            let data = (0..n)
                .map(|_| next_u64(&mut cursor).map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            tensors.push(DenseMatrix::from_vec(rows, cols, data)?);
        }
        if !cursor.is_empty() {
            return Err(bad("trailing bytes after checkpoint"));
        }
        Ok(Self { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_and_graph_layouts() {
        let specs = param_specs(&ModelConfig::node_default(10, 3));
        let shapes: Vec<_> = specs.iter().map(|s| (s.rows, s.cols)).collect();
        assert_eq!(shapes, vec![(10, 64), (64, 3)]);

        let specs = param_specs(&ModelConfig::graph_default(8, 2));
        let shapes: Vec<_> = specs.iter().map(|s| (s.name.as_str(), s.rows, s.cols)).collect();
        assert_eq!(
            shapes,
            vec![
                ("conv0.weight", 8, 512),
                ("fc0.weight", 512, 512),
                ("fc0.bias", 1, 512),
                ("fc1.weight", 512, 512),
                ("fc1.bias", 1, 512),
                ("out.weight", 512, 2),
                ("out.bias", 1, 2),
            ]
        );
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let params = ModelParams {
            tensors: vec![
                DenseMatrix::from_rows(&[[1.5, -0.0, f64::MIN_POSITIVE]]).unwrap(),
                DenseMatrix::zeros(0, 3),
                DenseMatrix::from_rows(&[[1e-300], [std::f64::consts::PI]]).unwrap(),
            ],
        };
        let bytes = params.to_bytes();
        let back = ModelParams::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert!(ModelParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(ModelParams::from_bytes(b"NOTMAGIC").is_err());
    }

    #[test]
    fn check_reports_shape_mismatch() {
        let config = ModelConfig::node_default(4, 2);
        let mut p = ModelParams::zeros(&config);
        p.check(&config).unwrap();
        p.tensors[1] = DenseMatrix::zeros(64, 3);
        assert!(p.check(&config).is_err());
    }
}
