use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use super::tensor::Scalar;
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments per parameter tensor, kept in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new<F: Scalar>(params: &ModelParams<F>) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. `grads` holds one flat gradient per
/// parameter tensor, in declaration order.
pub fn adam_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    let mut tensors = params.tensors_mut();
    if grads.len() != tensors.len() || state.m.len() != tensors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gradients for {} parameter tensors",
            grads.len(),
            tensors.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in tensors
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        if g.len() != p.len() {
            return Err(Error::ShapeMismatch("gradient length".into()));
        }
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            let update = cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            if update != 0.0 {
                *pv = F::of(pv.as_f64() - update);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::layers::Dense;
    use crate::neural::tensor::Tensor;

    fn params(values: &[f64]) -> ModelParams<f64> {
        ModelParams {
            conv: vec![],
            dense: vec![Dense {
                weight: Tensor::from_vec(vec![1, values.len()], values.to_vec()).unwrap(),
                bias: Tensor::zeros(vec![1]),
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params(&[0.5, -1.0]);
        let before = p.clone();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[vec![0.0, 0.0], vec![0.0]], &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let cfg = AdamConfig::default();
        let g = [0.3, -2.0];
        let mut p = params(&[1.0, 1.0]);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[g.to_vec(), vec![0.0]], &mut st, &cfg).unwrap();
        for (i, gv) in g.iter().enumerate() {
            let expected = 1.0 - cfg.learning_rate * gv / (gv.abs() + cfg.epsilon);
            assert!((p.dense[0].weight.data()[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let cfg = AdamConfig::default();
        let mut p = params(&[0.0]);
        let mut st = AdamState::new(&p);
        let mut prev = 0.0;
        let mut last = 0.0;
        for _ in 0..5000 {
            adam_step(&mut p, &[vec![-0.25], vec![0.0]], &mut st, &cfg).unwrap();
            let now = p.dense[0].weight.data()[0];
            last = now - prev;
            prev = now;
        }
        assert!((last - cfg.learning_rate).abs() < 1e-9);
    }

    #[test]
    fn mismatched_gradients_rejected() {
        let mut p = params(&[0.0]);
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &[vec![0.0]], &mut st, &AdamConfig::default()).is_err());
    }
}
