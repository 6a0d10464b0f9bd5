//! Parallel vs sequential throughput of the per-document inner loops:
//! batch gradient accumulation, soft-label generation and feature
//! extraction. Both modes produce bit-identical results (the fold is
//! sequential in document order); this suite measures what the rayon
//! fan-out buys on the current machine.
//!
//! Run with `cargo bench -p cldfa-core`. Building with
//! `--no-default-features` leaves only the sequential variants.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cldfa_core::corpus::{
    generate_synthetic_bilingual, CipherKind, IdSequence, SyntheticBilingualSpec, SyntheticCorpus,
};
use cldfa_core::kcnn::{
    backward, classify_doc, extract_features, init_model, DocGradients, KcnnModel, Target,
};
use cldfa_core::nn::GradientSet;
use cldfa_core::par::map_slice_seq;

#[cfg(feature = "parallel")]
use cldfa_core::par::map_slice_par;

fn bench_corpus() -> (SyntheticCorpus, KcnnModel) {
    let spec = SyntheticBilingualSpec {
        vocab_size: 1000,
        num_classes: 2,
        signal_tokens_per_class: 25,
        signal_prob: 0.25,
        doc_len: (20, 40),
        n_labeled: 512,
        n_unlabeled_src: 0,
        n_parallel: 512,
        n_test: 0,
        n_labeled_tgt: 0,
        num_topics: 2,
        shift: None,
        cipher: CipherKind::Permutation,
        cipher_seed: 1,
        max_len: 48,
    };
    let corpus = generate_synthetic_bilingual(&spec, 42).unwrap();
    let config = cldfa_core::kcnn::ModelConfig {
        embedding_dim: 32,
        window_sizes: vec![3, 4, 5],
        filters_per_window: 32,
        max_len: 48,
        num_classes: 2,
    };
    let model = init_model(&corpus.src_vocab, &config, 7, None).unwrap();
    (corpus, model)
}

type MapFn = fn(&[usize], &(dyn Fn(&usize) -> (f64, DocGradients) + Sync + Send)) -> Vec<(f64, DocGradients)>;

fn batch_gradients(model: &KcnnModel, corpus: &SyntheticCorpus, n: usize, map: MapFn) -> GradientSet {
    let idx: Vec<usize> = (0..n).collect();
    let work = |i: &usize| {
        backward(
            model,
            &corpus.l_src.docs[*i],
            &Target::Hard(corpus.l_src.labels[*i]),
            1.0,
            false,
        )
        .unwrap()
    };
    let outs = map(&idx, &work);
    let mut gset = GradientSet::zeros_like(model);
    for (_, g) in &outs {
        model.accumulate(&mut gset, g, 1.0 / n as f64);
    }
    gset
}

fn bench_batch_gradients(c: &mut Criterion) {
    let (corpus, model) = bench_corpus();
    let mut group = c.benchmark_group("batch_gradients");
    for &n in &[32usize, 128] {
        group.bench_with_input(BenchmarkId::new("seq", n), &n, |b, &n| {
            b.iter(|| {
                black_box(batch_gradients(&model, &corpus, n, |xs, f| {
                    map_slice_seq(xs, f)
                }))
            })
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("par", n), &n, |b, &n| {
            b.iter(|| {
                black_box(batch_gradients(&model, &corpus, n, |xs, f| {
                    map_slice_par(xs, f)
                }))
            })
        });
    }
    group.finish();
}

fn bench_soft_labels(c: &mut Criterion) {
    let (corpus, model) = bench_corpus();
    let docs = &corpus.u_parl.src_docs;
    let work = |doc: &IdSequence| classify_doc(&model, doc, 5.0).unwrap();
    let mut group = c.benchmark_group("soft_labels_512");
    group.bench_function("seq", |b| b.iter(|| black_box(map_slice_seq(docs, work))));
    #[cfg(feature = "parallel")]
    group.bench_function("par", |b| b.iter(|| black_box(map_slice_par(docs, work))));
    group.finish();
}

fn bench_feature_extraction(c: &mut Criterion) {
    let (corpus, model) = bench_corpus();
    let docs = &corpus.l_src.docs;
    let work = |doc: &IdSequence| extract_features(doc, &model).unwrap();
    let mut group = c.benchmark_group("extract_features_512");
    group.bench_function("seq", |b| b.iter(|| black_box(map_slice_seq(docs, work))));
    #[cfg(feature = "parallel")]
    group.bench_function("par", |b| b.iter(|| black_box(map_slice_par(docs, work))));
    group.finish();
}

criterion_group!(
    benches,
    bench_batch_gradients,
    bench_soft_labels,
    bench_feature_extraction
);
criterion_main!(benches);
