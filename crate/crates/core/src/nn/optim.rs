use serde::{Deserialize, Serialize};

use super::config::OptimizerKind;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPSILON: f64 = 1e-8;

/// Optimizer kind, learning rate and per-parameter moment buffers.
///
/// `first` is used by ADAM only; `second` by RMSProp and ADAM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        OptimizerState {
            kind,
            learning_rate,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub(crate) fn ensure_buffers(&mut self, shapes: &[usize]) {
        let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        match self.kind {
            OptimizerKind::Sgd => {}
            OptimizerKind::RmsProp => {
                if self.second.len() != shapes.len() {
                    self.second = zeros();
                }
            }
            OptimizerKind::Adam => {
                if self.first.len() != shapes.len() {
                    self.first = zeros();
                }
                if self.second.len() != shapes.len() {
                    self.second = zeros();
                }
            }
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: Vec<&mut Vec<f64>>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::LengthMismatch("gradient shapes do not match parameters".into()));
        }
        let shapes: Vec<usize> = grads.iter().map(Vec::len).collect();
        self.ensure_buffers(&shapes);
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    p.iter_mut().zip(g).for_each(|(w, g)| *w -= lr * g);
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.second) {
                    for ((w, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                        *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
                        *w -= lr * g / (v.sqrt() + RMSPROP_EPSILON);
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((w, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}
