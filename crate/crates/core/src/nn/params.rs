//! Uniform access to a model's parameter blocks, used by the optimizer, the
//! checkpoint writer and the gradient checker.

use crate::error::{Error, Result};

/// A model exposing its trainable parameters as named flat blocks.
///
/// Block order must be stable; gradients and optimizer state are aligned with
/// it positionally.
pub trait Parameterized {
    fn param_blocks(&self) -> Vec<&[f64]>;
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]>;
    fn block_names(&self) -> Vec<String>;

    fn num_params(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    /// Flat read by global coordinate (block-major).
    fn get_param(&self, index: usize) -> f64 {
        let mut idx = index;
        for block in self.param_blocks() {
            if idx < block.len() {
                return block[idx];
            }
            idx -= block.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Flat write by global coordinate (block-major).
    fn set_param(&mut self, index: usize, value: f64) {
        let mut idx = index;
        for block in self.param_blocks_mut() {
            if idx < block.len() {
                block[idx] = value;
                return;
            }
            idx -= block.len();
        }
        panic!("parameter index {index} out of range");
    }
}

/// Dense gradients aligned with a model's parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub blocks: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(model: &impl Parameterized) -> GradientSet {
        GradientSet {
            blocks: model
                .param_blocks()
                .iter()
                .map(|b| vec![0.0; b.len()])
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for block in &mut self.blocks {
            for g in block {
                *g *= factor;
            }
        }
    }

    /// Euclidean norm over every coordinate of every block.
    pub fn global_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Block-major flattening, same coordinate order as
    /// [`Parameterized::get_param`].
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.iter().copied()).collect()
    }

    /// Errors with the offending block's name if any coordinate is NaN/Inf.
    pub fn check_finite(&self, names: &[String], context: &str) -> Result<()> {
        for (block, name) in self.blocks.iter().zip(names) {
            if block.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    what: format!("gradient of {name}"),
                    context: context.to_string(),
                });
            }
        }
        Ok(())
    }
}
