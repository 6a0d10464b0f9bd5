//! Seeded synthetic bilingual corpus.
//!
//! Documents live in a target-language word space `[0, vocab_size)`. Each
//! class owns a disjoint block of indicative "signal" words emitted with a
//! fixed probability; the remaining background words are partitioned into
//! topics whose mixture can differ per split (the covariate-shift knob —
//! topic weights depend only on the split, never on the class, so the
//! label-given-document relation is identical everywhere). The translation
//! between the two languages is a seeded bijective word cipher applied
//! token-wise, so every parallel source document is exactly the cipher image
//! of its target document and the mapping is deterministic and invertible.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{IdSequence, LabeledSet, ParallelCorpus, UnlabeledSet, Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::rng::substream;

/// How target words map to source words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CipherKind {
    /// Word `i` translates to word `i`; the two languages share structure.
    Identity,
    /// A seeded random bijection between the word spaces.
    Permutation,
}

/// Per-split topic mixtures over the background words.
///
/// Equal weights everywhere reproduce the no-shift corpus; diverging weights
/// shift the document marginals between splits while leaving the
/// class-conditional signal emission untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicShift {
    pub labeled: Vec<f64>,
    pub parallel: Vec<f64>,
    pub test: Vec<f64>,
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBilingualSpec {
    /// Word-space size per language.
    pub vocab_size: usize,
    pub num_classes: usize,
    /// Indicative words owned by each class (disjoint blocks).
    pub signal_tokens_per_class: usize,
    /// Probability that a token position emits a signal word of the class.
    pub signal_prob: f64,
    /// Inclusive document length range.
    pub doc_len: (usize, usize),
    pub n_labeled: usize,
    pub n_unlabeled_src: usize,
    pub n_parallel: usize,
    pub n_test: usize,
    /// Labeled target pool for fine-tuning budgets; disjoint from the test set.
    pub n_labeled_tgt: usize,
    pub num_topics: usize,
    pub shift: Option<TopicShift>,
    pub cipher: CipherKind,
    pub cipher_seed: u64,
    /// Encoding length of the emitted sets.
    pub max_len: usize,
}

impl Default for SyntheticBilingualSpec {
    fn default() -> Self {
        SyntheticBilingualSpec {
            vocab_size: 1000,
            num_classes: 2,
            signal_tokens_per_class: 25,
            signal_prob: 0.25,
            doc_len: (20, 40),
            n_labeled: 2000,
            n_unlabeled_src: 0,
            n_parallel: 2000,
            n_test: 2000,
            n_labeled_tgt: 0,
            num_topics: 2,
            shift: None,
            cipher: CipherKind::Permutation,
            cipher_seed: 1,
            max_len: 48,
        }
    }
}

impl SyntheticBilingualSpec {
    /// Target-space word range of one class's signal block.
    pub fn signal_block(&self, class: usize) -> std::ops::Range<usize> {
        let s = self.signal_tokens_per_class;
        class * s..(class + 1) * s
    }

    /// Class whose signal block contains the target-space word, if any.
    pub fn signal_class_of(&self, word: usize) -> Option<usize> {
        let s = self.signal_tokens_per_class;
        let c = word / s;
        (c < self.num_classes).then_some(c)
    }

    /// First background word index.
    pub fn background_start(&self) -> usize {
        self.num_classes * self.signal_tokens_per_class
    }

    /// Target-space word ranges of the background topics.
    pub fn topic_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let start = self.background_start();
        let total = self.vocab_size - start;
        let base = total / self.num_topics;
        let rem = total % self.num_topics;
        let mut ranges = Vec::with_capacity(self.num_topics);
        let mut lo = start;
        for g in 0..self.num_topics {
            let len = base + usize::from(g < rem);
            ranges.push(lo..lo + len);
            lo += len;
        }
        ranges
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be at least 2"));
        }
        if self.signal_tokens_per_class == 0 {
            return Err(Error::invalid("signal_tokens_per_class must be positive"));
        }
        if self.background_start() > self.vocab_size {
            return Err(Error::invalid(format!(
                "vocab_size {} too small to host {} disjoint class-signal sets of {} tokens",
                self.vocab_size, self.num_classes, self.signal_tokens_per_class
            )));
        }
        if self.num_topics == 0 {
            return Err(Error::invalid("num_topics must be positive"));
        }
        if self.signal_prob < 1.0 && self.vocab_size - self.background_start() < self.num_topics {
            return Err(Error::invalid(format!(
                "vocab_size {} leaves fewer than {} background tokens for the topic groups",
                self.vocab_size, self.num_topics
            )));
        }
        if !(0.0..=1.0).contains(&self.signal_prob) {
            return Err(Error::invalid("signal_prob must lie in [0, 1]"));
        }
        if self.doc_len.0 < 1 || self.doc_len.0 > self.doc_len.1 {
            return Err(Error::invalid("doc_len range must satisfy 1 <= min <= max"));
        }
        if self.max_len < 1 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        if let Some(shift) = &self.shift {
            for (name, w) in [
                ("labeled", &shift.labeled),
                ("parallel", &shift.parallel),
                ("test", &shift.test),
            ] {
                if w.len() != self.num_topics {
                    return Err(Error::invalid(format!(
                        "shift weights for {name} have length {}, expected num_topics {}",
                        w.len(),
                        self.num_topics
                    )));
                }
                if w.iter().any(|&x| x < 0.0 || !x.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::invalid(format!(
                        "shift weights for {name} are not a valid reweighting"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Bijective word-level translation between the target and source spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCipher {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl TokenCipher {
    pub fn identity(n: usize) -> TokenCipher {
        let forward: Vec<usize> = (0..n).collect();
        TokenCipher {
            inverse: forward.clone(),
            forward,
        }
    }

    /// Seeded Fisher-Yates permutation of `[0, n)`.
    pub fn permutation(n: usize, seed: u64) -> TokenCipher {
        let mut rng = substream(seed, "cipher");
        let mut forward: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            forward.swap(i, j);
        }
        let mut inverse = vec![0; n];
        for (i, &f) in forward.iter().enumerate() {
            inverse[f] = i;
        }
        TokenCipher { forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Target word → source word.
    pub fn map_word(&self, word: usize) -> usize {
        self.forward[word]
    }

    /// Source word → target word.
    pub fn unmap_word(&self, word: usize) -> usize {
        self.inverse[word]
    }

    /// Maps an encoded target document into the source id space.
    ///
    /// Assumes both vocabularies enumerate the full word universe in index
    /// order (as built by the generator), so word `w` has id `w + 2` on both
    /// sides. Pad/unk ids are preserved.
    pub fn map_ids(&self, doc: &IdSequence) -> IdSequence {
        self.translate(doc, &self.forward)
    }

    /// Inverse of [`TokenCipher::map_ids`].
    pub fn unmap_ids(&self, doc: &IdSequence) -> IdSequence {
        self.translate(doc, &self.inverse)
    }

    fn translate(&self, doc: &IdSequence, table: &[usize]) -> IdSequence {
        let ids = doc
            .ids
            .iter()
            .map(|&id| if id < 2 { id } else { table[id - 2] + 2 })
            .collect();
        IdSequence {
            ids,
            true_len: doc.true_len,
        }
    }
}

/// Everything the generator produces.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub spec: SyntheticBilingualSpec,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub l_src: LabeledSet,
    pub u_src: UnlabeledSet,
    pub u_parl: ParallelCorpus,
    /// Test documents; labels are for evaluation only.
    pub t_tgt: LabeledSet,
    /// Labeled target pool for fine-tuning budgets.
    pub labeled_tgt: LabeledSet,
    pub cipher: TokenCipher,
}

fn word_token(prefix: char, word: usize) -> String {
    format!("{prefix}{word:05}")
}

struct DocSampler<'a> {
    spec: &'a SyntheticBilingualSpec,
    topics: Vec<std::ops::Range<usize>>,
}

impl<'a> DocSampler<'a> {
    fn new(spec: &'a SyntheticBilingualSpec) -> DocSampler<'a> {
        DocSampler {
            spec,
            topics: spec.topic_ranges(),
        }
    }

    fn cumulative(weights: &[f64]) -> Vec<f64> {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect()
    }

    /// Samples one document of the given class in target word space.
    fn sample(&self, rng: &mut ChaCha8Rng, class: usize, topic_cum: &[f64]) -> Vec<usize> {
        let len = rng.gen_range(self.spec.doc_len.0..=self.spec.doc_len.1);
        let block = self.spec.signal_block(class);
        (0..len)
            .map(|_| {
                if rng.gen::<f64>() < self.spec.signal_prob {
                    rng.gen_range(block.clone())
                } else {
                    let u = rng.gen::<f64>();
                    let g = topic_cum.iter().position(|&c| u < c).unwrap_or(topic_cum.len() - 1);
                    rng.gen_range(self.topics[g].clone())
                }
            })
            .collect()
    }
}

fn to_sequence(words: &[usize], max_len: usize) -> IdSequence {
    let mut ids: Vec<usize> = words.iter().take(max_len).map(|&w| w + 2).collect();
    let true_len = ids.len().max(1);
    ids.resize(max_len, PAD_ID);
    IdSequence { ids, true_len }
}

/// Generates all splits of a synthetic bilingual task.
///
/// Target documents are drawn from the class-conditional word model; every
/// parallel source document is the cipher image of its target document. All
/// splits are drawn from independent substreams of `seed`, so the output is
/// fully reproducible and individual splits never overlap.
pub fn generate_synthetic_bilingual(
    spec: &SyntheticBilingualSpec,
    seed: u64,
) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let cipher = match spec.cipher {
        CipherKind::Identity => TokenCipher::identity(spec.vocab_size),
        CipherKind::Permutation => TokenCipher::permutation(spec.vocab_size, spec.cipher_seed),
    };

    let src_vocab =
        Vocabulary::from_tokens((0..spec.vocab_size).map(|w| word_token('s', w)))?;
    let tgt_vocab =
        Vocabulary::from_tokens((0..spec.vocab_size).map(|w| word_token('t', w)))?;

    let sampler = DocSampler::new(spec);
    let uniform = vec![1.0; spec.num_topics];
    let (w_labeled, w_parallel, w_test) = match &spec.shift {
        Some(s) => (
            DocSampler::cumulative(&s.labeled),
            DocSampler::cumulative(&s.parallel),
            DocSampler::cumulative(&s.test),
        ),
        None => (
            DocSampler::cumulative(&uniform),
            DocSampler::cumulative(&uniform),
            DocSampler::cumulative(&uniform),
        ),
    };

    let src_seq = |words: &[usize]| {
        let mapped: Vec<usize> = words.iter().map(|&w| cipher.map_word(w)).collect();
        to_sequence(&mapped, spec.max_len)
    };
    let tgt_seq = |words: &[usize]| to_sequence(words, spec.max_len);

    // L_src: class-balanced labeled source documents.
    let mut rng = substream(seed, "l_src");
    let mut l_docs = Vec::with_capacity(spec.n_labeled);
    let mut l_labels = Vec::with_capacity(spec.n_labeled);
    for i in 0..spec.n_labeled {
        let y = i % spec.num_classes;
        let words = sampler.sample(&mut rng, y, &w_labeled);
        l_docs.push(src_seq(&words));
        l_labels.push(y);
    }
    let l_src = LabeledSet::new(l_docs, l_labels, "l_src", &src_vocab)?;

    // U_src: unlabeled source documents from the parallel-pool distribution.
    let mut rng = substream(seed, "u_src");
    let u_src_docs: Vec<IdSequence> = (0..spec.n_unlabeled_src)
        .map(|i| {
            let y = i % spec.num_classes;
            let words = sampler.sample(&mut rng, y, &w_parallel);
            src_seq(&words)
        })
        .collect();
    let u_src = UnlabeledSet::new(u_src_docs, "u_src", &src_vocab);

    // U_parl: target documents plus their exact cipher images.
    let mut rng = substream(seed, "u_parl");
    let mut parl_src = Vec::with_capacity(spec.n_parallel);
    let mut parl_tgt = Vec::with_capacity(spec.n_parallel);
    for i in 0..spec.n_parallel {
        let y = i % spec.num_classes;
        let words = sampler.sample(&mut rng, y, &w_parallel);
        parl_src.push(src_seq(&words));
        parl_tgt.push(tgt_seq(&words));
    }
    let u_parl = ParallelCorpus::new(parl_src, parl_tgt, &src_vocab, &tgt_vocab)?;

    // T_tgt: labeled test documents (labels for evaluation only).
    let mut rng = substream(seed, "t_tgt");
    let mut t_docs = Vec::with_capacity(spec.n_test);
    let mut t_labels = Vec::with_capacity(spec.n_test);
    for i in 0..spec.n_test {
        let y = i % spec.num_classes;
        let words = sampler.sample(&mut rng, y, &w_test);
        t_docs.push(tgt_seq(&words));
        t_labels.push(y);
    }
    let t_tgt = LabeledSet::new(t_docs, t_labels, "t_tgt", &tgt_vocab)?;

    // Labeled target pool, same distribution as the test split but disjoint.
    let mut rng = substream(seed, "labeled_tgt");
    let mut ft_docs = Vec::with_capacity(spec.n_labeled_tgt);
    let mut ft_labels = Vec::with_capacity(spec.n_labeled_tgt);
    for i in 0..spec.n_labeled_tgt {
        let y = i % spec.num_classes;
        let words = sampler.sample(&mut rng, y, &w_test);
        ft_docs.push(tgt_seq(&words));
        ft_labels.push(y);
    }
    let labeled_tgt = LabeledSet::new(ft_docs, ft_labels, "labeled_tgt", &tgt_vocab)?;

    Ok(SyntheticCorpus {
        spec: spec.clone(),
        src_vocab,
        tgt_vocab,
        l_src,
        u_src,
        u_parl,
        t_tgt,
        labeled_tgt,
        cipher,
    })
}

/// Dumps the word-level translation table as `tgt_token<TAB>src_token` rows.
pub fn write_lexicon(
    cipher: &TokenCipher,
    tgt_vocab: &Vocabulary,
    src_vocab: &Vocabulary,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for word in 0..cipher.len() {
        let tgt = tgt_vocab.token_of(word + 2).unwrap_or("<unk>");
        let src = src_vocab.token_of(cipher.map_word(word) + 2).unwrap_or("<unk>");
        writeln!(w, "{tgt}\t{src}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_spec() -> SyntheticBilingualSpec {
        SyntheticBilingualSpec {
            vocab_size: 200,
            num_classes: 2,
            signal_tokens_per_class: 10,
            signal_prob: 0.25,
            doc_len: (20, 40),
            n_labeled: 300,
            n_unlabeled_src: 50,
            n_parallel: 300,
            n_test: 1500,
            n_labeled_tgt: 40,
            num_topics: 2,
            shift: None,
            cipher: CipherKind::Permutation,
            cipher_seed: 3,
            max_len: 48,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        let a = generate_synthetic_bilingual(&spec, 11).unwrap();
        let b = generate_synthetic_bilingual(&spec, 11).unwrap();
        assert_eq!(a.l_src.docs, b.l_src.docs);
        assert_eq!(a.u_parl.tgt_docs, b.u_parl.tgt_docs);
        assert_eq!(a.cipher, b.cipher);
        let c = generate_synthetic_bilingual(&spec, 12).unwrap();
        assert_ne!(a.l_src.docs, c.l_src.docs);
    }

    #[test]
    fn cipher_is_a_bijection_on_documents() {
        let corpus = generate_synthetic_bilingual(&small_spec(), 5).unwrap();
        let fwd: HashSet<usize> = (0..corpus.cipher.len())
            .map(|w| corpus.cipher.map_word(w))
            .collect();
        assert_eq!(fwd.len(), corpus.cipher.len());
        for doc in &corpus.u_parl.tgt_docs {
            let round = corpus.cipher.unmap_ids(&corpus.cipher.map_ids(doc));
            assert_eq!(&round, doc);
        }
    }

    #[test]
    fn parallel_pairs_are_exact_cipher_images() {
        let corpus = generate_synthetic_bilingual(&small_spec(), 5).unwrap();
        for (src, tgt) in corpus.u_parl.src_docs.iter().zip(&corpus.u_parl.tgt_docs) {
            assert_eq!(&corpus.cipher.map_ids(tgt), src);
        }
    }

    #[test]
    fn splits_are_disjoint() {
        let corpus = generate_synthetic_bilingual(&small_spec(), 5).unwrap();
        let mut seen: HashSet<&IdSequence> = HashSet::new();
        let all = corpus
            .l_src
            .docs
            .iter()
            .chain(&corpus.u_src.docs)
            .chain(&corpus.u_parl.src_docs)
            .chain(&corpus.t_tgt.docs)
            .chain(&corpus.labeled_tgt.docs);
        for doc in all {
            assert!(seen.insert(doc), "document shared between splits");
        }
    }

    /// Source-space signal frequency in L_src matches the cipher image of the
    /// parallel target side when there is no shift.
    #[test]
    fn no_shift_signal_frequencies_agree() {
        let mut spec = small_spec();
        spec.n_labeled = 4000;
        spec.n_parallel = 4000;
        let corpus = generate_synthetic_bilingual(&spec, 17).unwrap();

        let src_signal: HashSet<usize> = (0..spec.background_start())
            .map(|w| corpus.cipher.map_word(w))
            .collect();
        let freq = |docs: &[IdSequence]| {
            let mut hits = 0usize;
            let mut total = 0usize;
            for d in docs {
                for &id in &d.ids[..d.true_len] {
                    total += 1;
                    if id >= 2 && src_signal.contains(&(id - 2)) {
                        hits += 1;
                    }
                }
            }
            hits as f64 / total as f64
        };
        let mapped: Vec<IdSequence> = corpus
            .u_parl
            .tgt_docs
            .iter()
            .map(|d| corpus.cipher.map_ids(d))
            .collect();
        let f_l = freq(&corpus.l_src.docs);
        let f_p = freq(&mapped);
        assert!(
            (f_l - f_p).abs() < 0.02,
            "signal frequency differs: {f_l:.4} vs {f_p:.4}"
        );
    }

    /// A brute-force signal-token counter classifies the test split almost
    /// perfectly; the synthetic task is genuinely solvable.
    #[test]
    fn token_count_oracle_is_accurate() {
        let spec = small_spec();
        let corpus = generate_synthetic_bilingual(&spec, 23).unwrap();
        let mut correct = 0usize;
        for (doc, &label) in corpus.t_tgt.docs.iter().zip(&corpus.t_tgt.labels) {
            let mut counts = vec![0usize; spec.num_classes];
            for &id in &doc.ids[..doc.true_len] {
                if id >= 2 {
                    if let Some(c) = spec.signal_class_of(id - 2) {
                        counts[c] += 1;
                    }
                }
            }
            let pred = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap();
            if pred == label {
                correct += 1;
            }
        }
        let acc = correct as f64 / corpus.t_tgt.len() as f64;
        assert!(acc >= 0.99, "oracle accuracy {acc:.4}");
    }

    #[test]
    fn shift_changes_topic_marginals() {
        let mut spec = small_spec();
        spec.n_labeled = 2000;
        spec.n_parallel = 2000;
        spec.shift = Some(TopicShift {
            labeled: vec![0.9, 0.1],
            parallel: vec![0.1, 0.9],
            test: vec![0.9, 0.1],
        });
        let corpus = generate_synthetic_bilingual(&spec, 29).unwrap();
        let topic0: HashSet<usize> = spec.topic_ranges()[0]
            .clone()
            .map(|w| corpus.cipher.map_word(w))
            .collect();
        let share = |docs: &[IdSequence]| {
            let mut hits = 0usize;
            let mut total = 0usize;
            for d in docs {
                for &id in &d.ids[..d.true_len] {
                    total += 1;
                    if id >= 2 && topic0.contains(&(id - 2)) {
                        hits += 1;
                    }
                }
            }
            hits as f64 / total as f64
        };
        let in_labeled = share(&corpus.l_src.docs);
        let in_parallel = share(&corpus.u_parl.src_docs);
        assert!(
            in_labeled > in_parallel + 0.3,
            "expected strong topic shift, got {in_labeled:.3} vs {in_parallel:.3}"
        );
    }

    #[test]
    fn rejects_vocab_too_small_for_signal_sets() {
        let mut spec = small_spec();
        spec.vocab_size = 15; // 2 classes x 10 signal tokens do not fit
        let err = generate_synthetic_bilingual(&spec, 1).unwrap_err();
        assert!(err.to_string().contains("disjoint class-signal"), "{err}");
    }

    #[test]
    fn rejects_bad_shift_weights() {
        let mut spec = small_spec();
        spec.shift = Some(TopicShift {
            labeled: vec![0.5], // wrong length
            parallel: vec![0.5, 0.5],
            test: vec![0.5, 0.5],
        });
        assert!(generate_synthetic_bilingual(&spec, 1).is_err());
    }
}
