//! Adam and SGD-with-momentum over [`Parameterized`] models, with global
//! gradient-norm clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::{GradientSet, Parameterized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptAlgorithm {
    Adam,
    SgdMomentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: OptAlgorithm,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub momentum: f64,
    /// Gradients are rescaled so their global norm never exceeds this.
    pub clip_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: OptAlgorithm::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            momentum: 0.9,
            clip_norm: 5.0,
        }
    }
}

/// Per-parameter moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub step: u64,
    /// First moments (Adam) or velocities (SGD).
    pub m: Vec<Vec<f64>>,
    /// Second moments; unused by SGD.
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, model: &impl Parameterized) -> OptimizerState {
        let shapes: Vec<usize> = model.param_blocks().iter().map(|b| b.len()).collect();
        OptimizerState {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update. Clips the global gradient norm first, then applies Adam
    /// with bias correction or SGD with momentum.
    pub fn apply(&mut self, model: &mut impl Parameterized, grads: &GradientSet) -> Result<()> {
        let names = model.block_names();
        grads.check_finite(&names, "optimizer step")?;
        if grads.blocks.len() != self.m.len() {
            return Err(Error::Dimension {
                context: "optimizer blocks".into(),
                expected: self.m.len(),
                actual: grads.blocks.len(),
            });
        }

        let norm = grads.global_norm();
        let clip = self.config.clip_norm;
        let scale = if clip > 0.0 && norm > clip { clip / norm } else { 1.0 };

        self.step += 1;
        let lr = self.config.learning_rate;
        match self.config.algorithm {
            OptAlgorithm::Adam => {
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.epsilon);
                let bc1 = 1.0 - b1.powi(self.step as i32);
                let bc2 = 1.0 - b2.powi(self.step as i32);
                for ((block, grad), (m, v)) in model
                    .param_blocks_mut()
                    .into_iter()
                    .zip(&grads.blocks)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    if block.len() != grad.len() {
                        return Err(Error::Dimension {
                            context: "optimizer block shape".into(),
                            expected: block.len(),
                            actual: grad.len(),
                        });
                    }
                    for i in 0..block.len() {
                        let g = grad[i] * scale;
                        m[i] = b1 * m[i] + (1.0 - b1) * g;
                        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        block[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            OptAlgorithm::SgdMomentum => {
                let mu = self.config.momentum;
                for ((block, grad), m) in model
                    .param_blocks_mut()
                    .into_iter()
                    .zip(&grads.blocks)
                    .zip(self.m.iter_mut())
                {
                    if block.len() != grad.len() {
                        return Err(Error::Dimension {
                            context: "optimizer block shape".into(),
                            expected: block.len(),
                            actual: grad.len(),
                        });
                    }
                    for i in 0..block.len() {
                        let g = grad[i] * scale;
                        m[i] = mu * m[i] - lr * g;
                        block[i] += m[i];
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar {
        p: Vec<f64>,
    }

    impl Parameterized for Scalar {
        fn param_blocks(&self) -> Vec<&[f64]> {
            vec![&self.p]
        }
        fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.p]
        }
        fn block_names(&self) -> Vec<String> {
            vec!["p".into()]
        }
    }

    fn grads(g: Vec<f64>) -> GradientSet {
        GradientSet { blocks: vec![g] }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        for algo in [OptAlgorithm::Adam, OptAlgorithm::SgdMomentum] {
            let mut model = Scalar { p: vec![1.5, -0.5] };
            let cfg = OptimizerConfig {
                algorithm: algo,
                ..OptimizerConfig::default()
            };
            let mut opt = OptimizerState::new(cfg, &model);
            for _ in 0..3 {
                opt.apply(&mut model, &grads(vec![0.0, 0.0])).unwrap();
            }
            assert_eq!(model.p, vec![1.5, -0.5]);
        }
    }

    #[test]
    fn sgd_hand_example() {
        let mut model = Scalar { p: vec![1.0] };
        let cfg = OptimizerConfig {
            algorithm: OptAlgorithm::SgdMomentum,
            learning_rate: 0.1,
            momentum: 0.0,
            clip_norm: 0.0,
            ..OptimizerConfig::default()
        };
        let mut opt = OptimizerState::new(cfg, &model);
        opt.apply(&mut model, &grads(vec![0.5])).unwrap();
        assert!((model.p[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_bounded_by_lr() {
        for &g in &[0.013, 2.0, -41.0] {
            let mut model = Scalar { p: vec![0.7] };
            let cfg = OptimizerConfig {
                clip_norm: 0.0,
                ..OptimizerConfig::default()
            };
            let lr = cfg.learning_rate;
            let mut opt = OptimizerState::new(cfg, &model);
            opt.apply(&mut model, &grads(vec![g])).unwrap();
            let delta = model.p[0] - 0.7;
            assert!(delta.abs() <= lr * (1.0 + 1e-8), "delta {delta}");
            assert!(delta.signum() == -g.signum());
        }
    }

    #[test]
    fn clipping_rescales_large_gradients() {
        let mut model = Scalar { p: vec![0.0, 0.0] };
        let cfg = OptimizerConfig {
            algorithm: OptAlgorithm::SgdMomentum,
            learning_rate: 1.0,
            momentum: 0.0,
            clip_norm: 1.0,
            ..OptimizerConfig::default()
        };
        let mut opt = OptimizerState::new(cfg, &model);
        opt.apply(&mut model, &grads(vec![30.0, 40.0])).unwrap();
        // gradient norm 50 clipped to 1: effective grad (0.6, 0.8)
        assert!((model.p[0] + 0.6).abs() < 1e-12);
        assert!((model.p[1] + 0.8).abs() < 1e-12);
    }

    #[test]
    fn nan_gradient_is_an_error() {
        let mut model = Scalar { p: vec![0.0] };
        let mut opt = OptimizerState::new(OptimizerConfig::default(), &model);
        let err = opt.apply(&mut model, &grads(vec![f64::NAN])).unwrap_err();
        assert!(err.is_numerical());
    }
}
