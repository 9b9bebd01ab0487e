//! The two first-order optimizers the training and sampling loops use.

use crate::error::{Error, Result};

/// Per-parameter optimizer buffers plus hyperparameters.
#[derive(Clone, Debug)]
pub enum OptimizerState {
    /// Heavy-ball momentum: `v <- rho*v + g; p <- p - lr*v`.
    Momentum {
        lr: f64,
        rho: f64,
        velocity: Vec<f64>,
    },
    /// Bias-corrected ADAM.
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        step: u64,
    },
}

impl OptimizerState {
    pub fn momentum(lr: f64, rho: f64, dim: usize) -> Self {
        OptimizerState::Momentum {
            lr,
            rho,
            velocity: vec![0.0; dim],
        }
    }

    pub fn adam(lr: f64, dim: usize) -> Self {
        OptimizerState::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    pub fn set_lr(&mut self, new_lr: f64) {
        match self {
            OptimizerState::Momentum { lr, .. } => *lr = new_lr,
            OptimizerState::Adam { lr, .. } => *lr = new_lr,
        }
    }

    fn check_dim(&self, op: &'static str, params: &[f64], grad: &[f64]) -> Result<()> {
        let dim = match self {
            OptimizerState::Momentum { velocity, .. } => velocity.len(),
            OptimizerState::Adam { m, .. } => m.len(),
        };
        if params.len() != dim || grad.len() != dim {
            return Err(Error::ShapeMismatch {
                op,
                expected: format!("{dim} parameters"),
                got: format!("{} params / {} grads", params.len(), grad.len()),
            });
        }
        Ok(())
    }
}

/// One momentum update in place. Noise injection is the sampler's job.
pub fn momentum_step(state: &mut OptimizerState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    state.check_dim("momentum_step", params, grad)?;
    match state {
        OptimizerState::Momentum { lr, rho, velocity } => {
            for i in 0..params.len() {
                velocity[i] = *rho * velocity[i] + grad[i];
                params[i] -= *lr * velocity[i];
            }
            Ok(())
        }
        OptimizerState::Adam { .. } => Err(Error::InvalidConfig(
            "momentum_step called on an ADAM state".into(),
        )),
    }
}

/// One bias-corrected ADAM update in place.
pub fn adam_step(state: &mut OptimizerState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    state.check_dim("adam_step", params, grad)?;
    match state {
        OptimizerState::Adam {
            lr,
            beta1,
            beta2,
            eps,
            m,
            v,
            step,
        } => {
            *step += 1;
            let bc1 = 1.0 - beta1.powi(*step as i32);
            let bc2 = 1.0 - beta2.powi(*step as i32);
            for i in 0..params.len() {
                m[i] = *beta1 * m[i] + (1.0 - *beta1) * grad[i];
                v[i] = *beta2 * v[i] + (1.0 - *beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= *lr * m_hat / (v_hat.sqrt() + *eps);
            }
            Ok(())
        }
        OptimizerState::Momentum { .. } => Err(Error::InvalidConfig(
            "adam_step called on a momentum state".into(),
        )),
    }
}
