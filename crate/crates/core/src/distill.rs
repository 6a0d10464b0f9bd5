//! The two-step cross-lingual transfer procedure.
//!
//! Step 1 trains a source-language classifier on labeled documents and, when
//! adversarial adaptation is enabled, simultaneously trains a domain
//! discriminator over pooled features whose reversed gradient pulls the
//! feature distributions of the labeled split and the parallel corpus's
//! source side together. Step 2 generates temperature-softened class
//! distributions for the parallel pairs and distills them into a fresh
//! target-language classifier, adapting its features to the unlabeled target
//! test documents the same way. Temperature ensembling and few-label
//! fine-tuning build on the same engine.
//!
//! Training never reads target-language gold labels: the distillation trainer
//! only accepts a [`ParallelCorpus`], a [`SoftLabelSet`] and unlabeled
//! adaptation documents.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{IdSequence, LabeledSet, ParallelCorpus, UnlabeledSet, Vocabulary};
use crate::error::{Error, Result};
use crate::kcnn::{
    argmax_first, classify, classify_doc, extract_with_trace, forward_loss, init_model,
    loss_logit_grad, DocGradients, ExtractorGrads, KcnnModel, ModelConfig, Target,
};
use crate::nn::{
    cross_entropy_hard, grl_backward, relu, softmax_temperature, DenseHead, GradientSet,
    OptimizerConfig, OptimizerState, Parameterized,
};
use crate::par::map_slice;
use crate::rng::substream;

/// Class distributions produced by a source model on the parallel corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelSet {
    /// One probability vector per parallel pair, aligned by index.
    pub probs: Vec<Vec<f64>>,
    /// Temperature used at generation.
    pub temperature: f64,
    /// Content hash of the generating source model.
    pub source_hash: String,
}

impl SoftLabelSet {
    /// `pair_index,p_0,...,p_{k-1},T` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let k = self.probs.first().map_or(0, |p| p.len());
        out.push_str("pair_index");
        for j in 0..k {
            out.push_str(&format!(",p_{j}"));
        }
        out.push_str(",T\n");
        for (i, p) in self.probs.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in p {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", self.temperature));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`SoftLabelSet::write_csv`]. The source hash is
    /// not stored in the CSV and comes back empty.
    pub fn read_csv(path: &Path) -> Result<SoftLabelSet> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Empty(format!("soft label file {}", path.display())))?;
        let cols = header.split(',').count();
        if cols < 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "expected pair_index,p_0,...,T header".into(),
            });
        }
        let k = cols - 2;
        let mut probs = Vec::new();
        let mut temperature = 1.0;
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected {cols} fields, got {}", fields.len()),
                });
            }
            let mut p = Vec::with_capacity(k);
            for f in &fields[1..=k] {
                p.push(f.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("bad probability {f:?}"),
                })?);
            }
            temperature = fields[cols - 1].parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("bad temperature {:?}", fields[cols - 1]),
            })?;
            probs.push(p);
        }
        Ok(SoftLabelSet {
            probs,
            temperature,
            source_hash: String::new(),
        })
    }

    fn validate(&self) -> Result<()> {
        for (i, p) in self.probs.iter().enumerate() {
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "soft label {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }
}

/// Multiplier applied to the adversarial weight as training progresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampSchedule {
    Constant,
    /// `2 / (1 + exp(-10 p)) - 1`: starts at 0, saturates toward 1. Useful
    /// when a cold-start adversarial signal destabilizes a small model.
    Sigmoid,
}

impl RampSchedule {
    pub fn multiplier(&self, progress: f64) -> f64 {
        match self {
            RampSchedule::Constant => 1.0,
            RampSchedule::Sigmoid => 2.0 / (1.0 + (-10.0 * progress).exp()) - 1.0,
        }
    }
}

/// Adversarial adaptation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    /// Relative weight of the reversed discriminator gradient into the
    /// feature extractor. The discriminator's own update is unscaled.
    pub alpha: f64,
    /// Width of the discriminator's single rectifier hidden layer.
    pub hidden_dim: usize,
    pub ramp: RampSchedule,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        AdversarialConfig {
            alpha: 0.2,
            hidden_dim: 100,
            ramp: RampSchedule::Constant,
        }
    }
}

/// Trainer settings shared by both steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Distillation temperature. Source training and fine-tuning always run
    /// at temperature 1 regardless of this value.
    pub temperature: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub adversarial: Option<AdversarialConfig>,
    pub seed: u64,
    /// Early stop after this many epochs without validation improvement;
    /// requires `val_fraction > 0`.
    pub patience: Option<usize>,
    /// Trailing fraction of the training items held out for validation.
    pub val_fraction: f64,
    /// Dropout probability on pooled features feeding the label head.
    pub dropout: f64,
    /// Rescale soft-target gradients by T^2 (off by default; the plain
    /// cross-entropy objective is the reference behavior).
    pub rescale_t2: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            temperature: 5.0,
            epochs: 10,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            adversarial: None,
            seed: 0,
            patience: None,
            val_fraction: 0.0,
            dropout: 0.0,
            rescale_t2: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::invalid("val_fraction must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        if let Some(adv) = &self.adversarial {
            if adv.alpha < 0.0 || !adv.alpha.is_finite() {
                return Err(Error::invalid("adversarial alpha must be non-negative"));
            }
            if adv.hidden_dim == 0 {
                return Err(Error::invalid("discriminator hidden_dim must be positive"));
            }
        }
        Ok(())
    }
}

/// One logged training step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub step: usize,
    pub loss_y: f64,
    pub loss_d: Option<f64>,
}

/// Per-step loss log of one training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,step,loss_y,loss_d\n");
        for r in &self.rows {
            match r.loss_d {
                Some(ld) => out.push_str(&format!("{},{},{},{}\n", r.epoch, r.step, r.loss_y, ld)),
                None => out.push_str(&format!("{},{},{},\n", r.epoch, r.step, r.loss_y)),
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Mean classifier loss of the final epoch.
    pub fn final_epoch_loss(&self) -> Option<f64> {
        let last = self.rows.last()?.epoch;
        let (sum, n) = self
            .rows
            .iter()
            .filter(|r| r.epoch == last)
            .fold((0.0, 0usize), |(s, n), r| (s + r.loss_y, n + 1));
        Some(sum / n as f64)
    }
}

/// Domain discriminator: one rectifier hidden layer over pooled features and
/// a binary softmax output. Domain label 0 marks the labeled/parallel split,
/// 1 the adaptation split.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscModel {
    pub hidden: DenseHead,
    pub output: DenseHead,
}

impl Parameterized for DiscModel {
    fn param_blocks(&self) -> Vec<&[f64]> {
        vec![
            &self.hidden.weight,
            &self.hidden.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
    fn block_names(&self) -> Vec<String> {
        ["disc_hidden_w", "disc_hidden_b", "disc_out_w", "disc_out_b"]
            .map(String::from)
            .to_vec()
    }
}

/// Per-document discriminator gradients, block-aligned with [`DiscModel`].
#[derive(Debug, Clone)]
pub struct DiscDocGrads {
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

impl DiscModel {
    pub fn init(feature_dim: usize, hidden_dim: usize, seed: u64) -> DiscModel {
        let mut rng = substream(seed, "disc-init");
        DiscModel {
            hidden: DenseHead::init(feature_dim, hidden_dim, &mut rng),
            output: DenseHead::init(hidden_dim, 2, &mut rng),
        }
    }

    /// Returns (domain probabilities, rectified hidden activations).
    pub fn forward(&self, features: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut hidden = self.hidden.forward(features)?;
        for h in &mut hidden {
            *h = relu(*h);
        }
        let probs = softmax_temperature(&self.output.forward(&hidden)?, 1.0)?;
        Ok((probs, hidden))
    }

    /// Backprop from the output-logit gradient; returns the parameter
    /// gradients and the gradient with respect to the input features.
    pub fn backward(
        &self,
        features: &[f64],
        hidden: &[f64],
        d_logits: &[f64],
    ) -> (DiscDocGrads, Vec<f64>) {
        let (out_w, out_b, mut d_hidden) = self.output.backward(hidden, d_logits);
        for (dh, &h) in d_hidden.iter_mut().zip(hidden) {
            if h <= 0.0 {
                *dh = 0.0;
            }
        }
        let (hidden_w, hidden_b, d_features) = self.hidden.backward(features, &d_hidden);
        (
            DiscDocGrads {
                hidden_w,
                hidden_b,
                out_w,
                out_b,
            },
            d_features,
        )
    }

    fn accumulate(&self, gset: &mut GradientSet, grads: &DiscDocGrads, scale: f64) {
        for (dst, src) in gset.blocks[0].iter_mut().zip(&grads.hidden_w) {
            *dst += scale * src;
        }
        for (dst, src) in gset.blocks[1].iter_mut().zip(&grads.hidden_b) {
            *dst += scale * src;
        }
        for (dst, src) in gset.blocks[2].iter_mut().zip(&grads.out_w) {
            *dst += scale * src;
        }
        for (dst, src) in gset.blocks[3].iter_mut().zip(&grads.out_b) {
            *dst += scale * src;
        }
    }
}

/// Losses of one combined update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    /// Mean classifier loss over the labeled half.
    pub loss_y: f64,
    /// Mean domain loss over both halves, if a discriminator was trained.
    pub loss_d: Option<f64>,
}

struct LabeledEntry<'a> {
    doc: &'a IdSequence,
    target: &'a Target,
    dropout_seed: Option<u64>,
}

struct PerDocOut {
    loss_y: Option<f64>,
    loss_d: Option<f64>,
    full: Option<DocGradients>,
    extractor_only: Option<ExtractorGrads>,
    disc: Option<DiscDocGrads>,
}

fn dropout_mask(dim: usize, keep: f64, seed: u64) -> Vec<bool> {
    use rand::Rng;
    let mut rng = substream(seed, "dropout-mask");
    (0..dim).map(|_| rng.gen::<f64>() < keep).collect()
}

/// Classifier gradients of one labeled document, scaled by `inv_batch`.
fn labeled_doc_out(
    model: &KcnnModel,
    disc: Option<&DiscModel>,
    entry: &LabeledEntry,
    temperature: f64,
    rescale_t2: bool,
    dropout: f64,
    alpha_eff: f64,
    inv_batch: f64,
    inv_domain: f64,
) -> Result<PerDocOut> {
    let trace = extract_with_trace(model, entry.doc)?;

    // label head branch, optionally through feature dropout
    let keep = 1.0 - dropout;
    let mask = entry
        .dropout_seed
        .filter(|_| dropout > 0.0)
        .map(|seed| dropout_mask(trace.features.len(), keep, seed));
    let head_input: Vec<f64> = match &mask {
        Some(m) => trace
            .features
            .iter()
            .zip(m)
            .map(|(&f, &k)| if k { f / keep } else { 0.0 })
            .collect(),
        None => trace.features.clone(),
    };
    let probs = classify(&head_input, model, temperature)?;
    let loss_y = match entry.target {
        Target::Hard(label) => cross_entropy_hard(&probs, *label)?,
        Target::Soft(t) => crate::nn::cross_entropy_soft(&probs, t)?,
    };
    let mut d_logits = loss_logit_grad(&probs, entry.target, temperature, rescale_t2);
    for d in &mut d_logits {
        *d *= inv_batch;
    }
    let (head_w, head_b, d_head_input) = model.head.backward(&head_input, &d_logits);
    let mut d_features: Vec<f64> = match &mask {
        Some(m) => d_head_input
            .iter()
            .zip(m)
            .map(|(&d, &k)| if k { d / keep } else { 0.0 })
            .collect(),
        None => d_head_input,
    };

    // domain branch on raw features, reversed into the extractor
    let mut loss_d = None;
    let mut disc_grads = None;
    if let Some(disc) = disc {
        let (dprobs, hidden) = disc.forward(&trace.features)?;
        loss_d = Some(cross_entropy_hard(&dprobs, 0)?);
        let mut dd: Vec<f64> = dprobs.clone();
        dd[0] -= 1.0;
        for d in &mut dd {
            *d *= inv_domain;
        }
        let (dg, d_feat_domain) = disc.backward(&trace.features, &hidden, &dd);
        disc_grads = Some(dg);
        if alpha_eff > 0.0 {
            let reversed = grl_backward(&d_feat_domain, alpha_eff)?;
            for (df, r) in d_features.iter_mut().zip(reversed) {
                *df += r;
            }
        }
    }

    let extractor = crate::kcnn::extractor_backward(model, entry.doc, &trace, &d_features);
    Ok(PerDocOut {
        loss_y: Some(loss_y),
        loss_d,
        full: Some(DocGradients {
            extractor,
            head_w,
            head_b,
        }),
        extractor_only: None,
        disc: disc_grads,
    })
}

/// Domain-only gradients of one unlabeled document.
fn unlabeled_doc_out(
    model: &KcnnModel,
    disc: &DiscModel,
    doc: &IdSequence,
    alpha_eff: f64,
    inv_domain: f64,
) -> Result<PerDocOut> {
    let trace = extract_with_trace(model, doc)?;
    let (dprobs, hidden) = disc.forward(&trace.features)?;
    let loss_d = cross_entropy_hard(&dprobs, 1)?;
    let mut dd: Vec<f64> = dprobs.clone();
    dd[1] -= 1.0;
    for d in &mut dd {
        *d *= inv_domain;
    }
    let (disc_grads, d_feat_domain) = disc.backward(&trace.features, &hidden, &dd);
    let extractor_only = if alpha_eff > 0.0 {
        let reversed = grl_backward(&d_feat_domain, alpha_eff)?;
        Some(crate::kcnn::extractor_backward(model, doc, &trace, &reversed))
    } else {
        None
    };
    Ok(PerDocOut {
        loss_y: None,
        loss_d: Some(loss_d),
        full: None,
        extractor_only,
        disc: Some(disc_grads),
    })
}

enum BatchEntry<'a> {
    Labeled(LabeledEntry<'a>),
    Unlabeled(&'a IdSequence),
}

/// One combined update on a labeled batch and (optionally) an unlabeled batch.
///
/// The label head minimizes its cross-entropy; the discriminator minimizes
/// the domain cross-entropy (unscaled); the feature extractor receives the
/// classifier gradient plus `-alpha` times the domain gradient through
/// gradient reversal. Per-document work runs in parallel; the fold back into
/// dense gradients is sequential in batch order, so results are independent
/// of thread scheduling.
#[allow(clippy::too_many_arguments)]
fn step_batch(
    model: &mut KcnnModel,
    model_opt: &mut OptimizerState,
    mut adv: Option<(&mut DiscModel, &mut OptimizerState)>,
    labeled: &[LabeledEntry],
    unlabeled: &[&IdSequence],
    alpha_eff: f64,
    temperature: f64,
    rescale_t2: bool,
    dropout: f64,
) -> Result<StepLosses> {
    if labeled.is_empty() {
        return Err(Error::Empty("labeled batch".into()));
    }
    let inv_batch = 1.0 / labeled.len() as f64;
    let n_domain = labeled.len() + unlabeled.len();
    let inv_domain = 1.0 / n_domain as f64;

    let entries: Vec<BatchEntry> = labeled
        .iter()
        .map(|e| {
            BatchEntry::Labeled(LabeledEntry {
                doc: e.doc,
                target: e.target,
                dropout_seed: e.dropout_seed,
            })
        })
        .chain(unlabeled.iter().map(|d| BatchEntry::Unlabeled(d)))
        .collect();

    let disc_ref = adv.as_ref().map(|(d, _)| &**d);
    let model_ref = &*model;
    let outs: Vec<Result<PerDocOut>> = map_slice(&entries, |entry| match entry {
        BatchEntry::Labeled(e) => labeled_doc_out(
            model_ref, disc_ref, e, temperature, rescale_t2, dropout, alpha_eff, inv_batch,
            inv_domain,
        ),
        BatchEntry::Unlabeled(doc) => {
            let disc = disc_ref.expect("unlabeled documents require a discriminator");
            unlabeled_doc_out(model_ref, disc, doc, alpha_eff, inv_domain)
        }
    });

    let mut model_grads = GradientSet::zeros_like(model);
    let mut disc_grads = adv
        .as_ref()
        .map(|(d, _)| GradientSet::zeros_like(&**d));
    let mut sum_y = 0.0;
    let mut sum_d = 0.0;
    for out in outs {
        let out = out?;
        if let Some(ly) = out.loss_y {
            sum_y += ly;
        }
        if let Some(ld) = out.loss_d {
            sum_d += ld;
        }
        if let Some(full) = &out.full {
            model.accumulate(&mut model_grads, full, 1.0);
        }
        if let Some(ext) = &out.extractor_only {
            model.accumulate_extractor(&mut model_grads, ext, 1.0);
        }
        if let (Some(dg), Some(dgset)) = (&out.disc, disc_grads.as_mut()) {
            if let Some((disc, _)) = adv.as_ref() {
                disc.accumulate(dgset, dg, 1.0);
            }
        }
    }

    model_opt.apply(model, &model_grads)?;
    let loss_d = if let (Some((disc, disc_opt)), Some(dgset)) = (adv.as_mut(), disc_grads) {
        disc_opt.apply(*disc, &dgset)?;
        Some(sum_d * inv_domain)
    } else {
        None
    };
    Ok(StepLosses {
        loss_y: sum_y * inv_batch,
        loss_d,
    })
}

/// Public form of the combined adversarial update, usable on hand-built
/// batches. Domain label 0 is assigned to `labeled` documents, 1 to
/// `unlabeled` ones.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_step(
    model: &mut KcnnModel,
    model_opt: &mut OptimizerState,
    disc: &mut DiscModel,
    disc_opt: &mut OptimizerState,
    labeled: &[(&IdSequence, Target)],
    unlabeled: &[&IdSequence],
    alpha: f64,
    temperature: f64,
) -> Result<StepLosses> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::invalid("alpha must be non-negative"));
    }
    if alpha > 0.0 && (labeled.is_empty() || unlabeled.is_empty()) {
        return Err(Error::Empty(
            "adversarial step needs both a labeled and an unlabeled batch".into(),
        ));
    }
    let entries: Vec<LabeledEntry> = labeled
        .iter()
        .map(|(doc, target)| LabeledEntry {
            doc,
            target,
            dropout_seed: None,
        })
        .collect();
    step_batch(
        model,
        model_opt,
        Some((disc, disc_opt)),
        &entries,
        unlabeled,
        alpha,
        temperature,
        false,
        0.0,
    )
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: KcnnModel,
    pub trace: TrainTrace,
    /// Final discriminator, when adversarial adaptation was enabled.
    pub discriminator: Option<DiscModel>,
    /// `(epoch, accuracy)` when an accuracy-trace split was supplied; entry 0
    /// is the pre-training accuracy.
    pub accuracy_trace: Vec<(usize, f64)>,
}

struct TrainItem<'a> {
    doc: &'a IdSequence,
    target: Target,
}

fn mean_loss(model: &KcnnModel, items: &[&TrainItem], temperature: f64) -> Result<f64> {
    let losses = map_slice(items, |item| {
        forward_loss(model, item.doc, &item.target, temperature).map(|(l, _)| l)
    });
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / items.len() as f64)
}

fn set_accuracy(model: &KcnnModel, set: &LabeledSet) -> Result<f64> {
    let preds = map_slice(&set.docs, |doc| crate::kcnn::predict_label(doc, model));
    let mut correct = 0usize;
    for (pred, &label) in preds.into_iter().zip(&set.labels) {
        if pred? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

fn with_step_context(err: Error, epoch: usize, step: usize) -> Error {
    match err {
        Error::NonFinite { what, context } => Error::NonFinite {
            what,
            context: format!("epoch {epoch}, batch {step}: {context}"),
        },
        other => other,
    }
}

/// Minibatch training loop shared by every trainer.
///
/// Separate seeded streams drive shuffling, unlabeled resampling, the
/// discriminator init and dropout, so enabling one component never perturbs
/// another: with `alpha = 0` the classifier's parameter trajectory is
/// bit-identical to a run without adversarial adaptation.
fn run_training(
    mut model: KcnnModel,
    items: &[TrainItem],
    adapt_to: Option<&UnlabeledSet>,
    temperature: f64,
    cfg: &TrainConfig,
    accuracy_on: Option<&LabeledSet>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if let Some(adv) = &cfg.adversarial {
        let adapt_len = adapt_to.map_or(0, |u| u.len());
        if adapt_len == 0 {
            return Err(Error::Empty(
                "adversarial adaptation needs a non-empty unlabeled set".into(),
            ));
        }
        let _ = adv;
    }

    let val_count = (items.len() as f64 * cfg.val_fraction).floor() as usize;
    let train_count = items.len() - val_count;
    if train_count == 0 {
        return Err(Error::invalid("val_fraction leaves no training items"));
    }
    let val_items: Vec<&TrainItem> = items[train_count..].iter().collect();

    let mut model_opt = OptimizerState::new(cfg.optimizer.clone(), &model);
    let mut adv_state = cfg.adversarial.as_ref().map(|adv| {
        let disc = DiscModel::init(model.config.feature_dim(), adv.hidden_dim, cfg.seed);
        let opt = OptimizerState::new(cfg.optimizer.clone(), &disc);
        (disc, opt, adv.alpha, adv.ramp)
    });

    let mut shuffle_rng = substream(cfg.seed, "shuffle");
    let mut unlabeled_rng = substream(cfg.seed, "unlabeled");
    let dropout_base = crate::rng::subseed(cfg.seed, "dropout");

    let steps_per_epoch = train_count.div_ceil(cfg.batch_size);
    let total_steps = (cfg.epochs * steps_per_epoch).max(1);

    let mut trace = TrainTrace::default();
    let mut accuracy_trace = Vec::new();
    if let Some(set) = accuracy_on {
        accuracy_trace.push((0, set_accuracy(&model, set)?));
    }

    let mut best: Option<(f64, KcnnModel)> = None;
    let mut stale_epochs = 0usize;
    let mut indices: Vec<usize> = (0..train_count).collect();
    let mut global_step = 0usize;

    'epochs: for epoch in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        use rand::Rng;
        indices.shuffle(&mut shuffle_rng);
        for (step, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            let progress = global_step as f64 / total_steps as f64;
            let labeled: Vec<LabeledEntry> = chunk
                .iter()
                .enumerate()
                .map(|(pos, &idx)| LabeledEntry {
                    doc: items[idx].doc,
                    target: &items[idx].target,
                    dropout_seed: (cfg.dropout > 0.0).then(|| {
                        dropout_base
                            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                            .wrapping_add((global_step as u64) << 16)
                            .wrapping_add(pos as u64)
                    }),
                })
                .collect();

            let (unlabeled_docs, alpha_eff) = match (&adv_state, adapt_to) {
                (Some((_, _, alpha, ramp)), Some(unl)) => {
                    let docs: Vec<&IdSequence> = (0..chunk.len())
                        .map(|_| &unl.docs[unlabeled_rng.gen_range(0..unl.len())])
                        .collect();
                    (docs, alpha * ramp.multiplier(progress))
                }
                _ => (Vec::new(), 0.0),
            };

            let losses = step_batch(
                &mut model,
                &mut model_opt,
                adv_state.as_mut().map(|(d, o, _, _)| (d, o)),
                &labeled,
                &unlabeled_docs,
                alpha_eff,
                temperature,
                cfg.rescale_t2,
                cfg.dropout,
            )
            .map_err(|e| with_step_context(e, epoch, step))?;

            if !losses.loss_y.is_finite() {
                return Err(Error::NonFinite {
                    what: "classifier loss".into(),
                    context: format!("epoch {epoch}, batch {step}"),
                });
            }
            trace.rows.push(TraceRow {
                epoch,
                step,
                loss_y: losses.loss_y,
                loss_d: losses.loss_d,
            });
            global_step += 1;
        }

        if let Some(set) = accuracy_on {
            accuracy_trace.push((epoch + 1, set_accuracy(&model, set)?));
        }

        if let Some(patience) = cfg.patience {
            if !val_items.is_empty() {
                let val_loss = mean_loss(&model, &val_items, temperature)?;
                let improved = best.as_ref().map_or(true, |(b, _)| val_loss < *b);
                if improved {
                    best = Some((val_loss, model.clone()));
                    stale_epochs = 0;
                } else {
                    stale_epochs += 1;
                    if stale_epochs > patience {
                        break 'epochs;
                    }
                }
            }
        }
    }

    if let Some((_, best_model)) = best {
        model = best_model;
    }
    Ok(TrainOutcome {
        model,
        trace,
        discriminator: adv_state.map(|(d, _, _, _)| d),
        accuracy_trace,
    })
}

/// Step 1: trains the source classifier on labeled source documents,
/// adapting its features to the (unlabeled) source side of the parallel
/// corpus when adversarial adaptation is enabled. Loss temperature is 1.
pub fn train_source(
    model: KcnnModel,
    l_src: &LabeledSet,
    adapt_to: Option<&UnlabeledSet>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if l_src.is_empty() {
        return Err(Error::Empty("labeled source set".into()));
    }
    if l_src.vocab_fingerprint != model.vocab.fingerprint() {
        return Err(Error::VocabMismatch(
            "labeled source set was encoded with a different vocabulary".into(),
        ));
    }
    if let Some(u) = adapt_to {
        if u.vocab_fingerprint != model.vocab.fingerprint() {
            return Err(Error::VocabMismatch(
                "adaptation set was encoded with a different vocabulary".into(),
            ));
        }
    }
    let classes = model.config.num_classes;
    for (i, &label) in l_src.labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::invalid(format!(
                "label {label} at document {i} exceeds {classes} classes"
            )));
        }
    }
    let items: Vec<TrainItem> = l_src
        .docs
        .iter()
        .zip(&l_src.labels)
        .map(|(doc, &label)| TrainItem {
            doc,
            target: Target::Hard(label),
        })
        .collect();
    run_training(model, &items, adapt_to, 1.0, cfg, None)
}

/// Class distributions of the parallel corpus's source side at temperature
/// `t`; a pure read of the source model.
pub fn soft_labels(model: &KcnnModel, parallel: &ParallelCorpus, t: f64) -> Result<SoftLabelSet> {
    if parallel.src_vocab_fingerprint != model.vocab.fingerprint() {
        return Err(Error::VocabMismatch(
            "parallel source documents were encoded with a different vocabulary".into(),
        ));
    }
    let probs = map_slice(&parallel.src_docs, |doc| classify_doc(model, doc, t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SoftLabelSet {
        probs,
        temperature: t,
        source_hash: model.content_hash(),
    })
}

/// Step 2: distills the soft labels into a target-language model trained on
/// the target side of the parallel corpus, with optional adversarial
/// adaptation to unlabeled target documents. The target-side probabilities
/// use the soft set's temperature during training; evaluation afterwards is
/// always at temperature 1.
pub fn train_target_distill(
    model: KcnnModel,
    parallel: &ParallelCorpus,
    soft: &SoftLabelSet,
    adapt_to: Option<&UnlabeledSet>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if soft.probs.len() != parallel.len() {
        return Err(Error::Dimension {
            context: "soft labels vs parallel pairs".into(),
            expected: parallel.len(),
            actual: soft.probs.len(),
        });
    }
    if (soft.temperature - cfg.temperature).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "soft labels were generated at T={}, config asks for T={}",
            soft.temperature, cfg.temperature
        )));
    }
    soft.validate()?;
    if parallel.tgt_vocab_fingerprint != model.vocab.fingerprint() {
        return Err(Error::VocabMismatch(
            "parallel target documents were encoded with a different vocabulary".into(),
        ));
    }
    if let Some(u) = adapt_to {
        if u.vocab_fingerprint != model.vocab.fingerprint() {
            return Err(Error::VocabMismatch(
                "adaptation set was encoded with a different vocabulary".into(),
            ));
        }
    }
    for p in &soft.probs {
        if p.len() != model.config.num_classes {
            return Err(Error::Dimension {
                context: "soft label classes".into(),
                expected: model.config.num_classes,
                actual: p.len(),
            });
        }
    }
    let items: Vec<TrainItem> = parallel
        .tgt_docs
        .iter()
        .zip(&soft.probs)
        .map(|(doc, p)| TrainItem {
            doc,
            target: Target::Soft(p.clone()),
        })
        .collect();
    run_training(model, &items, adapt_to, cfg.temperature, cfg, None)
}

/// Arithmetic mean of member distributions.
pub fn average_predictions(member_probs: &[Vec<f64>]) -> Vec<f64> {
    let k = member_probs.first().map_or(0, |p| p.len());
    let mut mean = vec![0.0; k];
    for p in member_probs {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    let n = member_probs.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// A set of distilled models trained at different temperatures; prediction
/// averages their temperature-1 outputs.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub members: Vec<KcnnModel>,
    pub temperatures: Vec<f64>,
}

impl Ensemble {
    pub fn predict_proba(&self, doc: &IdSequence) -> Result<Vec<f64>> {
        let member_probs = self
            .members
            .iter()
            .map(|m| classify_doc(m, doc, 1.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(average_predictions(&member_probs))
    }

    pub fn predict(&self, doc: &IdSequence) -> Result<usize> {
        Ok(argmax_first(&self.predict_proba(doc)?))
    }

    pub fn accuracy(&self, set: &LabeledSet) -> Result<f64> {
        let preds = map_slice(&set.docs, |doc| self.predict(doc));
        let mut correct = 0usize;
        for (pred, &label) in preds.into_iter().zip(&set.labels) {
            if pred? == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / set.len() as f64)
    }
}

/// Ensemble outcome: members aligned with the temperature set.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub ensemble: Ensemble,
    pub soft_sets: Vec<SoftLabelSet>,
    pub traces: Vec<TrainTrace>,
}

/// Trains one distilled model per temperature and averages their
/// temperature-1 predictions. Member `i` is initialized and trained with seed
/// `cfg.seed + i`, so members are independent; members train in parallel when
/// the `parallel` feature is on.
#[allow(clippy::too_many_arguments)]
pub fn temperature_ensemble(
    src_model: &KcnnModel,
    parallel: &ParallelCorpus,
    adapt_to: Option<&UnlabeledSet>,
    tgt_vocab: &Vocabulary,
    model_cfg: &ModelConfig,
    pretrained: Option<&crate::corpus::EmbeddingUpdates>,
    cfg: &TrainConfig,
    temperatures: &[f64],
) -> Result<EnsembleOutcome> {
    if temperatures.is_empty() {
        return Err(Error::Empty("temperature set".into()));
    }
    for &t in temperatures {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("temperature {t} must be positive")));
        }
    }
    let jobs: Vec<(usize, f64)> = temperatures.iter().copied().enumerate().collect();
    let results = map_slice(&jobs, |&(index, t)| -> Result<_> {
        let soft = soft_labels(src_model, parallel, t)?;
        let member_cfg = TrainConfig {
            temperature: t,
            seed: cfg.seed + index as u64,
            ..cfg.clone()
        };
        let init = init_model(tgt_vocab, model_cfg, member_cfg.seed, pretrained)?;
        let outcome = train_target_distill(init, parallel, &soft, adapt_to, &member_cfg)?;
        Ok((soft, outcome))
    });

    let mut members = Vec::with_capacity(jobs.len());
    let mut soft_sets = Vec::with_capacity(jobs.len());
    let mut traces = Vec::with_capacity(jobs.len());
    for r in results {
        let (soft, outcome) = r?;
        soft_sets.push(soft);
        members.push(outcome.model);
        traces.push(outcome.trace);
    }
    Ok(EnsembleOutcome {
        ensemble: Ensemble {
            members,
            temperatures: temperatures.to_vec(),
        },
        soft_sets,
        traces,
    })
}

/// Continues training a distilled model on a small labeled target set with
/// the hard-label loss at temperature 1. An empty label set returns the model
/// unchanged. The accuracy trace (entry 0 = before fine-tuning) is measured
/// on `eval_on` when given, else on the fine-tuning set itself.
pub fn fine_tune_target(
    model: KcnnModel,
    labeled_target: &LabeledSet,
    cfg: &TrainConfig,
    eval_on: Option<&LabeledSet>,
) -> Result<TrainOutcome> {
    if labeled_target.is_empty() {
        return Ok(TrainOutcome {
            model,
            trace: TrainTrace::default(),
            discriminator: None,
            accuracy_trace: Vec::new(),
        });
    }
    if labeled_target.vocab_fingerprint != model.vocab.fingerprint() {
        return Err(Error::VocabMismatch(
            "fine-tuning set was encoded with a different vocabulary".into(),
        ));
    }
    let classes = model.config.num_classes;
    for &label in &labeled_target.labels {
        if label >= classes {
            return Err(Error::invalid(format!(
                "fine-tuning label {label} exceeds {classes} classes"
            )));
        }
    }
    let items: Vec<TrainItem> = labeled_target
        .docs
        .iter()
        .zip(&labeled_target.labels)
        .map(|(doc, &label)| TrainItem {
            doc,
            target: Target::Hard(label),
        })
        .collect();
    let accuracy_on = eval_on.or(Some(labeled_target));
    run_training(model, &items, None, 1.0, cfg, accuracy_on)
}
