//! Cross-lingual text classification by knowledge distillation.
//!
//! A text classifier is trained in a label-rich source language, its soft
//! (temperature-scaled) predictions on the source side of an unlabeled
//! parallel corpus become training targets for a target-language classifier,
//! and a domain discriminator trained through a gradient reversal layer pulls
//! the feature distributions of mismatched splits together during both steps.
//!
//! The crate is organized around that pipeline:
//!
//! - [`corpus`] — tokenization, vocabularies, TSV/embedding loaders and a
//!   seeded synthetic bilingual corpus generator whose translation function is
//!   an exact token cipher.
//! - [`nn`] — the numeric kernel: temperature softmax, both cross-entropy
//!   losses, dense/convolution layers, gradient reversal, Adam/SGD and a
//!   finite-difference gradient checker.
//! - [`kcnn`] — the convolutional classifier (embeddings, multi-width filter
//!   bank, max-over-time pooling, softmax head) with hand-derived backprop
//!   and a self-describing JSON checkpoint format.
//! - [`distill`] — the two training steps, adversarial adaptation, soft-label
//!   generation, temperature ensembling and few-label fine-tuning.
//! - [`eval`] — accuracy reports, one-sample proportion tests, power-iteration
//!   PCA projections and a feature-divergence score.
//!
//! With the `parallel` feature (default) per-document inner loops run on
//! rayon; without it they fall back to plain iterators. Both modes reduce in
//! document order and produce bit-identical results.

pub mod corpus;
pub mod distill;
pub mod error;
pub mod eval;
pub mod kcnn;
pub mod nn;
pub mod par;
pub mod rng;

pub use error::{Error, Result};
