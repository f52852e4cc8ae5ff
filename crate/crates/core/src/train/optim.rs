use rand::Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::model::{param_specs, ModelConfig, ModelParams, ParamRole};

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_params<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> ModelParams {
    let tensors = param_specs(config)
        .iter()
        .map(|spec| match spec.role {
            ParamRole::FcBias => DenseMatrix::zeros(spec.rows, spec.cols),
            ParamRole::ConvWeight | ParamRole::FcWeight => {
                glorot_uniform(spec.rows, spec.cols, rng)
            }
        })
        .collect();
    ModelParams { tensors }
}

pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> DenseMatrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled decay: `θ ← θ − lr·λ·θ` after the moment update.
    pub decoupled_weight_decay: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decoupled_weight_decay: 0.0,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected adaptive-moment update, in place.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.m.len()),
        ));
    }
    for (p, g) in params.tensors.iter().zip(&grads.tensors) {
        if p.shape() != g.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("param {:?} vs grad {:?}", p.shape(), g.shape()),
            ));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let AdamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
        decoupled_weight_decay: wd,
    } = *config;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for k in 0..params.len() {
        let p = params.tensors[k].as_mut_slice();
        let g = grads.tensors[k].as_slice();
        let m = state.m.tensors[k].as_mut_slice();
        let v = state.v.tensors[k].as_mut_slice();
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            if wd != 0.0 {
                p[i] -= lr * wd * p[i];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> ModelParams {
        ModelParams {
            tensors: vec![DenseMatrix::filled(1, 1, v)],
        }
    }

    #[test]
    fn glorot_bound_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = glorot_uniform(3, 3, &mut rng);
        assert!(w.as_slice().iter().all(|v| v.abs() <= 1.0));
        let config = ModelConfig::graph_default(7, 2);
        let a = init_params(&config, &mut ChaCha8Rng::seed_from_u64(9));
        let b = init_params(&config, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.tensors[2].as_slice().iter().all(|&v| v == 0.0));
        a.check(&config).unwrap();
    }

    #[test]
    fn glorot_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = glorot_uniform(100, 100, &mut rng);
        let n: f64 = 10_000.0;
        let bound = (6.0f64 / 200.0).sqrt();
        let se = bound / 3f64.sqrt() / n.sqrt();
        let mean = w.sum() / n;
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(0.7);
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &scalar(0.0), &mut state, &AdamConfig::new(0.1)).unwrap();
        assert_eq!(p, scalar(0.7));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(1.0);
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &scalar(1.0), &mut state, &AdamConfig::new(0.1)).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + ε).
        assert!((p.tensors[0].get(0, 0) - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = scalar(1.0);
        let mut state = AdamState::new(&p);
        let g = ModelParams {
            tensors: vec![DenseMatrix::zeros(2, 1)],
        };
        assert!(adam_step(&mut p, &g, &mut state, &AdamConfig::new(0.1)).is_err());
    }

    #[test]
    fn decoupled_decay_shrinks_weights() {
        let mut p = scalar(2.0);
        let mut state = AdamState::new(&p);
        let config = AdamConfig {
            decoupled_weight_decay: 0.5,
            ..AdamConfig::new(0.1)
        };
        adam_step(&mut p, &scalar(0.0), &mut state, &config).unwrap();
        assert!((p.tensors[0].get(0, 0) - 1.9).abs() < 1e-15);
    }
}
