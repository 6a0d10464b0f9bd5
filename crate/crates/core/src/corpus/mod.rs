//! Text ingestion: tokenization, vocabularies, fixed-length encoding, TSV and
//! word-embedding loaders, plus the synthetic bilingual corpus generator in
//! [`synthetic`].

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub mod synthetic;

pub use synthetic::{
    generate_synthetic_bilingual, CipherKind, SyntheticBilingualSpec, SyntheticCorpus, TokenCipher,
    TopicShift,
};

/// Reserved id for padding; embedding row stays zero and is never trained.
pub const PAD_ID: usize = 0;
/// Reserved id for out-of-vocabulary tokens.
pub const UNK_ID: usize = 1;

/// Token ↔ dense-id mapping with reserved pad/unk slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit token list; ids are assigned in
    /// list order starting after pad/unk. Duplicate tokens are an error.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut id_to_token = vec!["<pad>".to_string(), "<unk>".to_string()];
        let mut token_to_id = HashMap::new();
        for tok in tokens {
            let tok = tok.into();
            if tok == "<pad>" || tok == "<unk>" {
                return Err(Error::invalid(format!("reserved token {tok:?} in input")));
            }
            let id = id_to_token.len();
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::invalid(format!("duplicate token {tok:?}")));
            }
            id_to_token.push(tok);
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    /// Number of ids including the pad/unk slots.
    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn pad_id(&self) -> usize {
        PAD_ID
    }

    pub fn unk_id(&self) -> usize {
        UNK_ID
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token_of(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(|s| s.as_str())
    }

    /// Non-special tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token[2..]
    }

    /// FNV-1a over the id-ordered token list; encoded sets carry this value so
    /// that a model and a corpus encoded with different vocabularies cannot be
    /// combined silently.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for tok in &self.id_to_token {
            for b in tok.as_bytes() {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        h
    }
}

/// A document encoded to exactly `max_len` ids, right-padded with [`PAD_ID`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdSequence {
    pub ids: Vec<usize>,
    /// Pre-padding length; always ≥ 1.
    pub true_len: usize,
}

/// Labeled documents of one split.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub docs: Vec<IdSequence>,
    pub labels: Vec<usize>,
    pub name: String,
    pub vocab_fingerprint: u64,
}

impl LabeledSet {
    pub fn new(
        docs: Vec<IdSequence>,
        labels: Vec<usize>,
        name: impl Into<String>,
        vocab: &Vocabulary,
    ) -> Result<LabeledSet> {
        if docs.len() != labels.len() {
            return Err(Error::Dimension {
                context: "labeled set docs vs labels".into(),
                expected: docs.len(),
                actual: labels.len(),
            });
        }
        Ok(LabeledSet {
            docs,
            labels,
            name: name.into(),
            vocab_fingerprint: vocab.fingerprint(),
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Drops the labels, e.g. to feed a split to adversarial adaptation.
    pub fn as_unlabeled(&self, name: impl Into<String>) -> UnlabeledSet {
        UnlabeledSet {
            docs: self.docs.clone(),
            name: name.into(),
            vocab_fingerprint: self.vocab_fingerprint,
        }
    }

    /// First `n` documents as their own labeled set (fine-tuning budgets).
    pub fn take(&self, n: usize, name: impl Into<String>) -> LabeledSet {
        let n = n.min(self.len());
        LabeledSet {
            docs: self.docs[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            name: name.into(),
            vocab_fingerprint: self.vocab_fingerprint,
        }
    }
}

/// Unlabeled documents of one split.
#[derive(Debug, Clone)]
pub struct UnlabeledSet {
    pub docs: Vec<IdSequence>,
    pub name: String,
    pub vocab_fingerprint: u64,
}

impl UnlabeledSet {
    pub fn new(docs: Vec<IdSequence>, name: impl Into<String>, vocab: &Vocabulary) -> UnlabeledSet {
        UnlabeledSet {
            docs,
            name: name.into(),
            vocab_fingerprint: vocab.fingerprint(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Concatenation, e.g. test docs plus extra unlabeled target docs.
    pub fn union(&self, other: &UnlabeledSet, name: impl Into<String>) -> Result<UnlabeledSet> {
        if self.vocab_fingerprint != other.vocab_fingerprint {
            return Err(Error::VocabMismatch(format!(
                "cannot union {:?} and {:?}: different vocabularies",
                self.name, other.name
            )));
        }
        let mut docs = self.docs.clone();
        docs.extend(other.docs.iter().cloned());
        Ok(UnlabeledSet {
            docs,
            name: name.into(),
            vocab_fingerprint: self.vocab_fingerprint,
        })
    }
}

/// Aligned translation pairs; pair `i` couples `src_docs[i]` and `tgt_docs[i]`.
#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pub src_docs: Vec<IdSequence>,
    pub tgt_docs: Vec<IdSequence>,
    pub src_vocab_fingerprint: u64,
    pub tgt_vocab_fingerprint: u64,
}

impl ParallelCorpus {
    pub fn new(
        src_docs: Vec<IdSequence>,
        tgt_docs: Vec<IdSequence>,
        src_vocab: &Vocabulary,
        tgt_vocab: &Vocabulary,
    ) -> Result<ParallelCorpus> {
        if src_docs.len() != tgt_docs.len() {
            return Err(Error::Dimension {
                context: "parallel corpus src vs tgt".into(),
                expected: src_docs.len(),
                actual: tgt_docs.len(),
            });
        }
        Ok(ParallelCorpus {
            src_docs,
            tgt_docs,
            src_vocab_fingerprint: src_vocab.fingerprint(),
            tgt_vocab_fingerprint: tgt_vocab.fingerprint(),
        })
    }

    pub fn len(&self) -> usize {
        self.src_docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src_docs.is_empty()
    }

    /// Source side as an unlabeled set (step-1 adaptation target).
    pub fn src_side(&self, name: impl Into<String>) -> UnlabeledSet {
        UnlabeledSet {
            docs: self.src_docs.clone(),
            name: name.into(),
            vocab_fingerprint: self.src_vocab_fingerprint,
        }
    }

    /// Target side as an unlabeled set.
    pub fn tgt_side(&self, name: impl Into<String>) -> UnlabeledSet {
        UnlabeledSet {
            docs: self.tgt_docs.clone(),
            name: name.into(),
            vocab_fingerprint: self.tgt_vocab_fingerprint,
        }
    }
}

/// Lowercases and splits on maximal alphanumeric runs; everything else is a
/// separator. Total function: empty or punctuation-only input gives `[]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Frequency-ordered vocabulary over tokenized documents.
///
/// Tokens with count ≥ `min_count` are kept, most frequent first, ties broken
/// lexicographically, capped at `max_size` ids including pad/unk.
pub fn build_vocab<S: AsRef<str>>(
    token_lists: &[Vec<S>],
    min_count: usize,
    max_size: usize,
) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    if max_size < 2 {
        return Err(Error::invalid("max_size must be at least 2 (pad + unk)"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in token_lists {
        for tok in doc {
            *counts.entry(tok.as_ref()).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.truncate(max_size.saturating_sub(2));
    Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t.to_string()))
}

/// Encodes tokens to a fixed-length id sequence.
///
/// Unknown tokens map to unk, the sequence is truncated to `max_len` and
/// right-padded; an empty document becomes a single unk token so every
/// document has at least one convolution window.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> Result<IdSequence> {
    if max_len < 1 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut ids: Vec<usize> = tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.id_of(t.as_ref()).unwrap_or(UNK_ID))
        .collect();
    if ids.is_empty() {
        ids.push(UNK_ID);
    }
    let true_len = ids.len();
    ids.resize(max_len, PAD_ID);
    Ok(IdSequence { ids, true_len })
}

/// Tokenize + encode in one step.
pub fn encode_text(text: &str, vocab: &Vocabulary, max_len: usize) -> Result<IdSequence> {
    encode(&tokenize(text), vocab, max_len)
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines())
}

/// Raw rows of a `label<TAB>text` file, in file order.
pub fn read_labeled_tsv(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut rows = Vec::new();
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected 2 tab-separated columns, got {}", fields.len()),
            });
        }
        let label: usize = fields[0].trim().parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("label {:?} is not a non-negative integer", fields[0]),
        })?;
        rows.push((label, fields[1].to_string()));
    }
    Ok(rows)
}

/// Raw rows of a `src_text<TAB>tgt_text` file, in file order.
pub fn read_parallel_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rows = Vec::new();
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 2 tab-separated columns, got {}", fields.len()),
            });
        }
        rows.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(rows)
}

/// One document per line.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut rows = Vec::new();
    for line in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.is_empty() {
            rows.push(line);
        }
    }
    Ok(rows)
}

/// Loads and encodes a labeled TSV split.
pub fn load_labeled_tsv(
    path: &Path,
    vocab: &Vocabulary,
    max_len: usize,
    name: impl Into<String>,
) -> Result<LabeledSet> {
    let rows = read_labeled_tsv(path)?;
    let mut docs = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (label, text) in rows {
        docs.push(encode_text(&text, vocab, max_len)?);
        labels.push(label);
    }
    LabeledSet::new(docs, labels, name, vocab)
}

/// Loads and encodes a parallel TSV corpus; each side uses its own vocabulary.
pub fn load_parallel(
    path: &Path,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    max_len: usize,
) -> Result<ParallelCorpus> {
    let rows = read_parallel_tsv(path)?;
    let mut src_docs = Vec::with_capacity(rows.len());
    let mut tgt_docs = Vec::with_capacity(rows.len());
    for (src, tgt) in rows {
        src_docs.push(encode_text(&src, src_vocab, max_len)?);
        tgt_docs.push(encode_text(&tgt, tgt_vocab, max_len)?);
    }
    ParallelCorpus::new(src_docs, tgt_docs, src_vocab, tgt_vocab)
}

/// Loads and encodes a one-document-per-line split.
pub fn load_unlabeled(
    path: &Path,
    vocab: &Vocabulary,
    max_len: usize,
    name: impl Into<String>,
) -> Result<UnlabeledSet> {
    let docs = read_lines(path)?
        .iter()
        .map(|text| encode_text(text, vocab, max_len))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnlabeledSet::new(docs, name, vocab))
}

/// Pretrained embedding rows matched against a vocabulary.
#[derive(Debug, Clone)]
pub struct EmbeddingUpdates {
    /// Vector dimension of the file.
    pub dim: usize,
    /// (vocab id, row) for every vocabulary token found in the file.
    pub rows: Vec<(usize, Vec<f64>)>,
    /// Number of matched tokens.
    pub matched: usize,
}

/// Reads word2vec text format: `token v1 v2 ... vk` per line, optional
/// `count dim` header. Tokens absent from `vocab` are skipped; inconsistent
/// vector dimensions are an error.
pub fn load_embeddings_text(path: &Path, vocab: &Vocabulary) -> Result<EmbeddingUpdates> {
    let mut dim: Option<usize> = None;
    let mut rows = Vec::new();
    let mut seen = vec![false; vocab.size()];
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        // word2vec-style header: two integer fields on the first line.
        if idx == 0
            && fields.len() == 2
            && fields[0].parse::<usize>().is_ok()
            && fields[1].parse::<usize>().is_ok()
        {
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: "expected `token v1 ... vk`".into(),
            });
        }
        let k = fields.len() - 1;
        match dim {
            None => dim = Some(k),
            Some(d) if d != k => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("vector dimension {k} differs from earlier dimension {d}"),
                })
            }
            _ => {}
        }
        let Some(id) = vocab.id_of(fields[0]) else {
            continue;
        };
        if seen[id] {
            continue; // first occurrence wins
        }
        seen[id] = true;
        let mut vec = Vec::with_capacity(k);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("bad float {f:?}"),
            })?;
            vec.push(v);
        }
        rows.push((id, vec));
    }
    let matched = rows.len();
    Ok(EmbeddingUpdates {
        dim: dim.unwrap_or(0),
        rows,
        matched,
    })
}

fn doc_text(doc: &IdSequence, vocab: &Vocabulary) -> String {
    doc.ids[..doc.true_len]
        .iter()
        .map(|&id| vocab.token_of(id).unwrap_or("<unk>"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes a labeled split as `label<TAB>text` rows.
pub fn write_labeled_tsv(set: &LabeledSet, vocab: &Vocabulary, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (doc, label) in set.docs.iter().zip(&set.labels) {
        writeln!(w, "{label}\t{}", doc_text(doc, vocab)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Writes an unlabeled split, one document per line.
pub fn write_unlabeled(set: &UnlabeledSet, vocab: &Vocabulary, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in &set.docs {
        writeln!(w, "{}", doc_text(doc, vocab)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Writes a parallel corpus as `src_text<TAB>tgt_text` rows.
pub fn write_parallel_tsv(
    corpus: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (src, tgt) in corpus.src_docs.iter().zip(&corpus.tgt_docs) {
        writeln!(
            w,
            "{}\t{}",
            doc_text(src, src_vocab),
            doc_text(tgt, tgt_vocab)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("Good, GREAT book!"), vec!["good", "great", "book"]);
        assert_eq!(tokenize("a  b"), vec!["a", "b"]);
        assert_eq!(tokenize("...!?"), Vec::<String>::new());
        assert_eq!(tokenize("it's 42"), vec!["it", "s", "42"]);
    }

    #[test]
    fn build_vocab_examples() {
        let lists = vec![vec!["a", "a", "b"]];
        let v = build_vocab(&lists, 2, 100).unwrap();
        assert_eq!(v.size(), 3);
        assert_eq!(v.id_of("a"), Some(2));
        assert_eq!(v.id_of("b"), None);

        let empty: Vec<Vec<&str>> = vec![vec![]];
        let v = build_vocab(&empty, 1, 100).unwrap();
        assert_eq!(v.size(), 2);

        let ties = vec![vec!["y", "x"]];
        let v = build_vocab(&ties, 1, 100).unwrap();
        assert_eq!(v.id_of("x"), Some(2));
        assert_eq!(v.id_of("y"), Some(3));
    }

    #[test]
    fn build_vocab_caps_and_validates() {
        let lists = vec![vec!["a", "a", "b", "b", "c"]];
        let v = build_vocab(&lists, 1, 3).unwrap();
        assert_eq!(v.size(), 3);
        assert_eq!(v.id_of("a"), Some(2)); // most frequent survives the cap
        assert!(build_vocab(&lists, 0, 10).is_err());
        assert!(build_vocab(&lists, 1, 1).is_err());
    }

    #[test]
    fn vocab_ids_are_dense_inverses() {
        let lists = vec![vec!["c", "a", "b", "a"]];
        let v = build_vocab(&lists, 1, 100).unwrap();
        for id in 2..v.size() {
            let tok = v.token_of(id).unwrap();
            assert_eq!(v.id_of(tok), Some(id));
        }
        assert_eq!(v.token_of(PAD_ID), Some("<pad>"));
        assert_eq!(v.token_of(UNK_ID), Some("<unk>"));
    }

    #[test]
    fn vocab_stable_across_builds() {
        let lists = vec![vec!["m", "z", "m", "k", "z", "q"]];
        let a = build_vocab(&lists, 1, 100).unwrap();
        let b = build_vocab(&lists, 1, 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn encode_examples() {
        let v = build_vocab(&[vec!["a", "a"]], 1, 100).unwrap();
        assert_eq!(v.id_of("a"), Some(2));

        let e = encode(&["a"], &v, 3).unwrap();
        assert_eq!(e.ids, vec![2, 0, 0]);
        assert_eq!(e.true_len, 1);

        let e = encode(&["zzz"], &v, 2).unwrap();
        assert_eq!(e.ids, vec![1, 0]);
        assert_eq!(e.true_len, 1);

        let e = encode(&["a", "a", "a"], &v, 2).unwrap();
        assert_eq!(e.ids, vec![2, 2]);
        assert_eq!(e.true_len, 2);

        let e = encode::<&str>(&[], &v, 4).unwrap();
        assert_eq!(e.ids, vec![1, 0, 0, 0]);
        assert_eq!(e.true_len, 1);

        assert!(encode(&["a"], &v, 0).is_err());
    }

    #[test]
    fn encode_tokenize_deterministic() {
        let v = build_vocab(&[vec!["good", "book"]], 1, 100).unwrap();
        let a = encode_text("Good book, very good!", &v, 8).unwrap();
        let b = encode_text("Good book, very good!", &v, 8).unwrap();
        assert_eq!(a, b);
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn labeled_tsv_roundtrip_and_errors() {
        let f = write_tmp("1\tgood book\n0\tbad book\n");
        let rows = read_labeled_tsv(f.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], (1, "good book".to_string()));

        let f = write_tmp("x\tbad\n");
        let err = read_labeled_tsv(f.path()).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");

        let f = write_tmp("1\ta\tb\tc\n");
        let err = read_labeled_tsv(f.path()).unwrap_err();
        assert!(err.to_string().contains("columns"), "{err}");
    }

    #[test]
    fn parallel_tsv_errors_name_line() {
        let f = write_tmp("hello there\tbonjour\nno tabs here\n");
        let err = read_parallel_tsv(f.path()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn embeddings_text_matching() {
        let v = build_vocab(&[vec!["a", "b"]], 1, 100).unwrap();
        let f = write_tmp("a 1.0 2.0\nzzz 3.0 4.0\n");
        let upd = load_embeddings_text(f.path(), &v).unwrap();
        assert_eq!(upd.dim, 2);
        assert_eq!(upd.matched, 1);
        assert_eq!(upd.rows[0], (v.id_of("a").unwrap(), vec![1.0, 2.0]));

        // header line is skipped
        let f = write_tmp("2 2\na 1.0 2.0\nb 3.0 4.0\n");
        let upd = load_embeddings_text(f.path(), &v).unwrap();
        assert_eq!(upd.matched, 2);

        let f = write_tmp("a 1.0 2.0\nb 1.0 2.0 3.0\n");
        let err = load_embeddings_text(f.path(), &v).unwrap_err();
        assert!(err.to_string().contains("dimension"), "{err}");
    }

    #[test]
    fn split_dump_roundtrip() {
        let v = build_vocab(&[vec!["good", "bad", "book"]], 1, 100).unwrap();
        let docs = vec![
            encode(&["good", "book"], &v, 4).unwrap(),
            encode(&["bad", "book"], &v, 4).unwrap(),
        ];
        let set = LabeledSet::new(docs, vec![1, 0], "train", &v).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.tsv");
        write_labeled_tsv(&set, &v, &path).unwrap();
        let back = load_labeled_tsv(&path, &v, 4, "train").unwrap();
        assert_eq!(back.docs, set.docs);
        assert_eq!(back.labels, set.labels);
    }
}
