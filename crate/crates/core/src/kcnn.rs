//! The convolutional text classifier: embedding look-up, multi-width filter
//! bank with max-over-time pooling (the feature extractor), and a dense
//! softmax head (the label classifier), with hand-derived backprop.
//!
//! Checkpoints are single self-describing JSON files carrying the config, the
//! vocabulary, every parameter array and optionally the optimizer state. JSON
//! floats round-trip bit-exactly, so a reloaded model reproduces predictions
//! bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{EmbeddingUpdates, IdSequence, Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::nn::{
    conv_forward, max_over_time, softmax_temperature, ConvFilterBank, ConvGroup, DenseHead,
    EmbeddingMatrix, GradientSet, Parameterized,
};
use crate::rng::substream;

pub const CHECKPOINT_FORMAT: &str = "kcnn-checkpoint-v1";

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub window_sizes: Vec<usize>,
    pub filters_per_window: usize,
    pub max_len: usize,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 100,
            window_sizes: vec![3, 4, 5],
            filters_per_window: 100,
            max_len: 256,
            num_classes: 2,
        }
    }
}

impl ModelConfig {
    pub fn feature_dim(&self) -> usize {
        self.window_sizes.len() * self.filters_per_window
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(Error::invalid("embedding_dim must be positive"));
        }
        if self.window_sizes.is_empty() || self.filters_per_window == 0 {
            return Err(Error::invalid("need at least one window size and filter"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be at least 2"));
        }
        let max_window = *self.window_sizes.iter().max().unwrap();
        if self.max_len < max_window {
            return Err(Error::invalid(format!(
                "max_len {} shorter than largest window {max_window}",
                self.max_len
            )));
        }
        Ok(())
    }
}

/// Feature extractor plus label classifier, tied to the vocabulary it was
/// initialized with.
#[derive(Debug, Clone, PartialEq)]
pub struct KcnnModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub emb: EmbeddingMatrix,
    pub bank: ConvFilterBank,
    pub head: DenseHead,
}

/// Pooled feature vector of one document; components are non-negative because
/// pooling runs over rectified maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub doc_id: Option<usize>,
}

/// Forward bookkeeping needed by backprop: pooled features plus, per filter,
/// the winning window position and whether its rectifier was active.
#[derive(Debug, Clone)]
pub struct DocTrace {
    pub features: Vec<f64>,
    pub argmax: Vec<usize>,
    pub active: Vec<bool>,
}

impl DocTrace {
    /// Hash of the activation pattern; used by the gradient checker to detect
    /// kink crossings between the two finite-difference evaluations.
    pub fn signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x100_0000_01b3);
        };
        for (&a, &act) in self.argmax.iter().zip(&self.active) {
            feed(a as u64);
            feed(u64::from(act));
        }
        h
    }
}

/// Training target of one document.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Hard(usize),
    Soft(Vec<f64>),
}

/// Per-document gradients of the feature extractor. Embedding gradients are
/// sparse (touched rows only); the pad row is never included.
#[derive(Debug, Clone, Default)]
pub struct ExtractorGrads {
    pub emb_rows: Vec<(usize, Vec<f64>)>,
    /// Per group, same layout as `ConvGroup::weights`.
    pub conv_w: Vec<Vec<f64>>,
    pub conv_b: Vec<Vec<f64>>,
}

/// Per-document gradients of the full classifier.
#[derive(Debug, Clone)]
pub struct DocGradients {
    pub extractor: ExtractorGrads,
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl Parameterized for KcnnModel {
    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = vec![&self.emb.data];
        for g in &self.bank.groups {
            blocks.push(&g.weights);
            blocks.push(&g.biases);
        }
        blocks.push(&self.head.weight);
        blocks.push(&self.head.bias);
        blocks
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = vec![&mut self.emb.data];
        for g in &mut self.bank.groups {
            blocks.push(&mut g.weights);
            blocks.push(&mut g.biases);
        }
        blocks.push(&mut self.head.weight);
        blocks.push(&mut self.head.bias);
        blocks
    }

    fn block_names(&self) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for g in &self.bank.groups {
            names.push(format!("conv_w[h={}]", g.window));
            names.push(format!("conv_b[h={}]", g.window));
        }
        names.push("head_weight".into());
        names.push("head_bias".into());
        names
    }
}

/// Deterministic model initialization from a seed.
///
/// Embeddings are uniform(-0.25, 0.25) with a zero pad row; filters and the
/// head use uniform Glorot bounds; biases start at zero. Pretrained rows, when
/// given, overwrite the matching random rows.
pub fn init_model(
    vocab: &Vocabulary,
    config: &ModelConfig,
    seed: u64,
    pretrained: Option<&EmbeddingUpdates>,
) -> Result<KcnnModel> {
    config.validate()?;
    let mut rng = substream(seed, "kcnn-init");
    let mut emb = EmbeddingMatrix::init(vocab.size(), config.embedding_dim, &mut rng);
    let groups = config
        .window_sizes
        .iter()
        .map(|&h| ConvGroup::init(h, config.filters_per_window, config.embedding_dim, &mut rng))
        .collect();
    let bank = ConvFilterBank { groups };
    let head = DenseHead::init(config.feature_dim(), config.num_classes, &mut rng);

    if let Some(updates) = pretrained {
        if updates.matched > 0 && updates.dim != config.embedding_dim {
            return Err(Error::Dimension {
                context: "pretrained embedding dimension vs config".into(),
                expected: config.embedding_dim,
                actual: updates.dim,
            });
        }
        for (id, row) in &updates.rows {
            emb.row_mut(*id).copy_from_slice(row);
        }
    }

    Ok(KcnnModel {
        config: config.clone(),
        vocab: vocab.clone(),
        emb,
        bank,
        head,
    })
}

/// Runs the feature extractor and records what backprop needs.
pub fn extract_with_trace(model: &KcnnModel, doc: &IdSequence) -> Result<DocTrace> {
    let maps = conv_forward(doc, &model.emb, &model.bank)?;
    let mut features = Vec::with_capacity(maps.len());
    let mut argmax = Vec::with_capacity(maps.len());
    let mut active = Vec::with_capacity(maps.len());
    for map in &maps {
        let (value, idx) = max_over_time(map)?;
        features.push(value);
        argmax.push(idx);
        active.push(value > 0.0);
    }
    Ok(DocTrace {
        features,
        argmax,
        active,
    })
}

/// Pooled document representation; fixed dimension regardless of length.
pub fn extract_features(doc: &IdSequence, model: &KcnnModel) -> Result<FeatureVector> {
    Ok(FeatureVector {
        values: extract_with_trace(model, doc)?.features,
        doc_id: None,
    })
}

/// Class distribution of a feature vector at temperature `t`.
pub fn classify(features: &[f64], model: &KcnnModel, t: f64) -> Result<Vec<f64>> {
    softmax_temperature(&model.head.forward(features)?, t)
}

/// Class distribution of a document at temperature `t`.
pub fn classify_doc(model: &KcnnModel, doc: &IdSequence, t: f64) -> Result<Vec<f64>> {
    classify(&extract_with_trace(model, doc)?.features, model, t)
}

/// Argmax prediction at temperature 1; ties resolve to the smallest class id.
pub fn predict_label(doc: &IdSequence, model: &KcnnModel) -> Result<usize> {
    let probs = classify_doc(model, doc, 1.0)?;
    Ok(argmax_first(&probs))
}

/// First index attaining the maximum.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn loss_of(probs: &[f64], target: &Target) -> Result<f64> {
    match target {
        Target::Hard(label) => crate::nn::cross_entropy_hard(probs, *label),
        Target::Soft(t) => crate::nn::cross_entropy_soft(probs, t),
    }
}

/// Loss of one document at temperature `t`, plus the activation-pattern
/// signature for the gradient checker.
pub fn forward_loss(
    model: &KcnnModel,
    doc: &IdSequence,
    target: &Target,
    t: f64,
) -> Result<(f64, u64)> {
    let trace = extract_with_trace(model, doc)?;
    let probs = classify(&trace.features, model, t)?;
    Ok((loss_of(&probs, target)?, trace.signature()))
}

/// Gradient of the cross-entropy loss with respect to the logits.
///
/// For softmax at temperature `t` this is `(p - target) / t` for both the
/// hard (one-hot) and soft cases. The classic `t^2` correction that rescales
/// soft-target gradients back to hard-loss magnitude is applied only when
/// `rescale_t2` is set; the default objective is the plain cross-entropy.
pub fn loss_logit_grad(probs: &[f64], target: &Target, t: f64, rescale_t2: bool) -> Vec<f64> {
    let scale = if rescale_t2 { t } else { 1.0 / t };
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let tj = match target {
                Target::Hard(label) => {
                    if j == *label {
                        1.0
                    } else {
                        0.0
                    }
                }
                Target::Soft(soft) => soft[j],
            };
            (p - tj) * scale
        })
        .collect()
}

/// Backprop from a pooled-feature gradient into the convolution filters and
/// the touched embedding rows. Gradients for the pad row are dropped, which
/// keeps it exactly zero forever.
pub fn extractor_backward(
    model: &KcnnModel,
    doc: &IdSequence,
    trace: &DocTrace,
    d_features: &[f64],
) -> ExtractorGrads {
    let dim = model.emb.dim;
    let mut grads = ExtractorGrads {
        emb_rows: Vec::new(),
        conv_w: model
            .bank
            .groups
            .iter()
            .map(|g| vec![0.0; g.weights.len()])
            .collect(),
        conv_b: model
            .bank
            .groups
            .iter()
            .map(|g| vec![0.0; g.biases.len()])
            .collect(),
    };
    let mut emb_acc: std::collections::HashMap<usize, Vec<f64>> = std::collections::HashMap::new();

    let mut fidx = 0;
    for (gi, group) in model.bank.groups.iter().enumerate() {
        let h = group.window;
        for f in 0..group.num_filters {
            let dv = d_features[fidx];
            if trace.active[fidx] && dv != 0.0 {
                let pos = trace.argmax[fidx];
                let filter = group.filter(f, dim);
                let wbase = f * h * dim;
                grads.conv_b[gi][f] += dv;
                for j in 0..h {
                    let id = doc.ids[pos + j];
                    let row = model.emb.row(id);
                    let dw = &mut grads.conv_w[gi][wbase + j * dim..wbase + (j + 1) * dim];
                    for d in 0..dim {
                        dw[d] += dv * row[d];
                    }
                    if id != PAD_ID {
                        let acc = emb_acc.entry(id).or_insert_with(|| vec![0.0; dim]);
                        let wslice = &filter[j * dim..(j + 1) * dim];
                        for d in 0..dim {
                            acc[d] += dv * wslice[d];
                        }
                    }
                }
            }
            fidx += 1;
        }
    }
    grads.emb_rows = emb_acc.into_iter().collect();
    grads
}

/// Full per-document backward pass: loss value plus gradients of every
/// parameter the document touches.
pub fn backward(
    model: &KcnnModel,
    doc: &IdSequence,
    target: &Target,
    t: f64,
    rescale_t2: bool,
) -> Result<(f64, DocGradients)> {
    let trace = extract_with_trace(model, doc)?;
    let probs = classify(&trace.features, model, t)?;
    let loss = loss_of(&probs, target)?;
    let d_logits = loss_logit_grad(&probs, target, t, rescale_t2);
    let (head_w, head_b, d_features) = model.head.backward(&trace.features, &d_logits);
    let extractor = extractor_backward(model, doc, &trace, &d_features);
    Ok((
        loss,
        DocGradients {
            extractor,
            head_w,
            head_b,
        },
    ))
}

impl KcnnModel {
    /// Block indices used when folding per-document gradients into a dense
    /// [`GradientSet`]: [emb, (conv_w, conv_b) per group, head_w, head_b].
    pub fn accumulate_extractor(
        &self,
        gset: &mut GradientSet,
        grads: &ExtractorGrads,
        scale: f64,
    ) {
        let dim = self.emb.dim;
        for (id, row) in &grads.emb_rows {
            let base = id * dim;
            for d in 0..dim {
                gset.blocks[0][base + d] += scale * row[d];
            }
        }
        for gi in 0..self.bank.groups.len() {
            let wb = 1 + 2 * gi;
            for (dst, src) in gset.blocks[wb].iter_mut().zip(&grads.conv_w[gi]) {
                *dst += scale * src;
            }
            for (dst, src) in gset.blocks[wb + 1].iter_mut().zip(&grads.conv_b[gi]) {
                *dst += scale * src;
            }
        }
    }

    pub fn accumulate(&self, gset: &mut GradientSet, grads: &DocGradients, scale: f64) {
        self.accumulate_extractor(gset, &grads.extractor, scale);
        let nb = gset.blocks.len();
        for (dst, src) in gset.blocks[nb - 2].iter_mut().zip(&grads.head_w) {
            *dst += scale * src;
        }
        for (dst, src) in gset.blocks[nb - 1].iter_mut().zip(&grads.head_b) {
            *dst += scale * src;
        }
    }

    /// Flat coordinate range of the pad embedding row; these coordinates are
    /// constrained to zero and excluded from gradient checking.
    pub fn pad_row_coords(&self) -> std::ops::Range<usize> {
        PAD_ID * self.emb.dim..(PAD_ID + 1) * self.emb.dim
    }

    /// SHA-256 of the serialized checkpoint (without optimizer state).
    pub fn content_hash(&self) -> String {
        let bytes = checkpoint_bytes(self, None).expect("serialize model");
        sha256_hex(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: ModelConfig,
    vocab_tokens: Vec<String>,
    vocab_sha256: String,
    emb: EmbeddingMatrix,
    bank: ConvFilterBank,
    head: DenseHead,
    optimizer: Option<crate::nn::OptimizerState>,
}

fn vocab_sha256(vocab: &Vocabulary) -> String {
    let mut joined = Vec::new();
    for tok in vocab.tokens() {
        joined.extend_from_slice(tok.as_bytes());
        joined.push(b'\n');
    }
    sha256_hex(&joined)
}

fn checkpoint_bytes(
    model: &KcnnModel,
    optimizer: Option<&crate::nn::OptimizerState>,
) -> Result<Vec<u8>> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        config: model.config.clone(),
        vocab_tokens: model.vocab.tokens().to_vec(),
        vocab_sha256: vocab_sha256(&model.vocab),
        emb: model.emb.clone(),
        bank: model.bank.clone(),
        head: model.head.clone(),
        optimizer: optimizer.cloned(),
    };
    serde_json::to_vec(&file).map_err(|e| Error::Checkpoint(e.to_string()))
}

/// Writes a checkpoint and returns its SHA-256 content hash.
pub fn save_checkpoint(
    model: &KcnnModel,
    optimizer: Option<&crate::nn::OptimizerState>,
    path: &Path,
) -> Result<String> {
    let bytes = checkpoint_bytes(model, optimizer)?;
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(KcnnModel, Option<crate::nn::OptimizerState>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!(
            "unsupported format tag {:?}, expected {CHECKPOINT_FORMAT:?}",
            file.format
        )));
    }
    let vocab = Vocabulary::from_tokens(file.vocab_tokens)?;
    if vocab_sha256(&vocab) != file.vocab_sha256 {
        return Err(Error::Checkpoint("vocabulary hash mismatch".into()));
    }
    file.config.validate()?;
    let model = KcnnModel {
        config: file.config,
        vocab,
        emb: file.emb,
        bank: file.bank,
        head: file.head,
    };
    Ok((model, file.optimizer))
}
