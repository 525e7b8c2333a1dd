use serde::{Deserialize, Serialize};

use super::{GcnParams, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    Sgd,
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for Adam; unused by SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    m: GcnParams,
    v: GcnParams,
}

impl OptimizerState {
    pub fn new(params: &GcnParams) -> Self {
        OptimizerState {
            step: 0,
            m: GcnParams::zeros(params.dim(), params.hidden()),
            v: GcnParams::zeros(params.dim(), params.hidden()),
        }
    }
}

/// One update of `params` against `grads` (which already include any L2 term).
pub fn optimizer_step(
    state: &mut OptimizerState,
    params: &mut GcnParams,
    grads: &GcnParams,
    config: &TrainConfig,
) {
    state.step += 1;
    let lr = config.learning_rate;
    match config.optimizer {
        OptimizerKind::Sgd => {
            for (p, g) in params.slices_mut().into_iter().zip(grads.slices()) {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= lr * gi;
                }
            }
        }
        OptimizerKind::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            let t = state.step as i32;
            let correct1 = 1.0 - beta1.powi(t);
            let correct2 = 1.0 - beta2.powi(t);
            let slots = params
                .slices_mut()
                .into_iter()
                .zip(grads.slices())
                .zip(state.m.slices_mut())
                .zip(state.v.slices_mut());
            for (((p, g), m), v) in slots {
                for i in 0..p.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = m[i] / correct1;
                    let v_hat = v[i] / correct2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(optimizer: OptimizerKind, lr: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            optimizer,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::adam()] {
            let mut p = GcnParams::init(3, 2, 1);
            let before = p.clone();
            let mut state = OptimizerState::new(&p);
            let zeros = GcnParams::zeros(3, 2);
            for _ in 0..3 {
                optimizer_step(&mut state, &mut p, &zeros, &config(kind, 0.1));
            }
            assert_eq!(p, before);
        }
    }

    #[test]
    fn sgd_moves_against_the_gradient() {
        let mut p = GcnParams::zeros(1, 1);
        p.b_out[0] = 1.0;
        let mut g = GcnParams::zeros(1, 1);
        g.b_out[0] = 1.0;
        let mut state = OptimizerState::new(&p);
        optimizer_step(&mut state, &mut p, &g, &config(OptimizerKind::Sgd, 0.1));
        assert!((p.b_out[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn first_adam_step_has_magnitude_lr() {
        // Bias correction makes m̂ = g and v̂ = g², so Δ = lr · g / (|g| + ε).
        let lr = 1e-3;
        for grad in [2.5, -0.003, 1e3] {
            let mut p = GcnParams::zeros(1, 1);
            let mut g = GcnParams::zeros(1, 1);
            g.w1[(0, 0)] = grad;
            let mut state = OptimizerState::new(&p);
            optimizer_step(&mut state, &mut p, &g, &config(OptimizerKind::adam(), lr));
            let expected = -lr * grad / (grad.abs() + 1e-8);
            let step = p.w1[(0, 0)];
            assert!((step - expected).abs() < 1e-15, "{step} vs {expected}");
            assert_eq!(step.signum(), -grad.signum());
            assert!((step.abs() - lr).abs() < lr * 1e-4);
        }
    }
}
