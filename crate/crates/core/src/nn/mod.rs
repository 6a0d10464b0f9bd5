//! Network numerics: activation/loss primitives, the embedding/convolution/
//! dense layers of the classifier, gradient reversal, optimizers and a
//! finite-difference gradient checker.

pub mod check;
pub mod layers;
pub mod ops;
pub mod optimizer;
pub mod params;

pub use check::{gradient_check, GradCheckReport};
pub use layers::{conv_forward, ConvFilterBank, ConvGroup, DenseHead, EmbeddingMatrix};
pub use ops::{
    cross_entropy_hard, cross_entropy_soft, entropy, grl_backward, grl_forward, max_over_time,
    relu, softmax_temperature, PROB_FLOOR,
};
pub use optimizer::{OptAlgorithm, OptimizerConfig, OptimizerState};
pub use params::{GradientSet, Parameterized};
