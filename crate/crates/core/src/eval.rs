//! Evaluation: accuracy with confusion counts, one-sample proportion tests,
//! a deterministic power-iteration PCA for feature-divergence diagnostics,
//! and a scalar divergence score between two feature splits.

use std::fs;
use std::path::Path;

use crate::corpus::{IdSequence, LabeledSet};
use crate::error::{Error, Result};
use crate::kcnn::{extract_with_trace, predict_label, KcnnModel};
use crate::par::map_slice;
use crate::rng::substream;

/// Accuracy of one model on one labeled split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub split: String,
    pub n: usize,
    pub accuracy: f64,
    /// `confusion[true][pred]` counts; they sum to `n`.
    pub confusion: Vec<Vec<usize>>,
    pub checkpoint_hash: String,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,n,accuracy,checkpoint_hash\n");
        out.push_str(&format!(
            "{},{},{},{}\n",
            self.split, self.n, self.accuracy, self.checkpoint_hash
        ));
        out.push_str("true_class,pred_class,count\n");
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                out.push_str(&format!("{t},{p},{c}\n"));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Accuracy from an arbitrary prediction function; document order is
/// irrelevant to the result.
pub fn accuracy_with<F>(
    mut predict: F,
    set: &LabeledSet,
    num_classes: usize,
    checkpoint_hash: &str,
) -> Result<EvalReport>
where
    F: FnMut(&IdSequence) -> Result<usize>,
{
    if set.is_empty() {
        return Err(Error::Empty(format!("labeled set {:?}", set.name)));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (doc, &label) in set.docs.iter().zip(&set.labels) {
        if label >= num_classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {num_classes} classes in {:?}",
                set.name
            )));
        }
        let pred = predict(doc)?;
        if pred >= num_classes {
            return Err(Error::invalid(format!(
                "prediction {pred} out of range for {num_classes} classes"
            )));
        }
        confusion[label][pred] += 1;
    }
    let n = set.len();
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        split: set.name.clone(),
        n,
        accuracy: correct as f64 / n as f64,
        confusion,
        checkpoint_hash: checkpoint_hash.to_string(),
    })
}

/// Accuracy of argmax predictions at temperature 1.
pub fn accuracy(model: &KcnnModel, set: &LabeledSet) -> Result<EvalReport> {
    if set.vocab_fingerprint != model.vocab.fingerprint() {
        return Err(Error::VocabMismatch(format!(
            "split {:?} was encoded with a different vocabulary than the model",
            set.name
        )));
    }
    let preds = map_slice(&set.docs, |doc| predict_label(doc, model));
    let mut iter = preds.into_iter();
    accuracy_with(
        |_| iter.next().expect("one prediction per document"),
        set,
        model.config.num_classes,
        &model.content_hash(),
    )
}

/// One-sample proportion test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionTest {
    pub z: f64,
    /// One-sided upper-tail p-value.
    pub p_value: f64,
    /// p < 0.05.
    pub significant: bool,
}

/// Complementary error function, rational approximation with fractional error
/// below 1.2e-7 everywhere (Numerical Recipes' `erfcc`). Accurate enough for
/// the deep-tail p-values the significance test reports.
fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.5 * x.abs());
    let ans = t * (-x * x - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277)))))))))
    .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Upper tail of the standard normal.
fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Tests whether accuracy `acc_a` over `n` documents significantly exceeds a
/// reference accuracy: `z = (acc_a - acc_ref) / sqrt(acc_ref (1 - acc_ref) / n)`
/// with a one-sided threshold of p < 0.05.
pub fn proportion_test(acc_a: f64, acc_ref: f64, n: usize) -> Result<ProportionTest> {
    if n < 1 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    for (name, v) in [("acc_a", acc_a), ("acc_ref", acc_ref)] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if acc_ref == 0.0 || acc_ref == 1.0 {
        return Err(Error::invalid(
            "reference accuracy of exactly 0 or 1 has degenerate variance",
        ));
    }
    let se = (acc_ref * (1.0 - acc_ref) / n as f64).sqrt();
    let z = (acc_a - acc_ref) / se;
    let p_value = normal_sf(z);
    Ok(ProportionTest {
        z,
        p_value,
        significant: p_value < 0.05,
    })
}

/// 2-D PCA of pooled features from several splits.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// (split name, document index within split, 2-D coordinates).
    pub points: Vec<(String, usize, [f64; 2])>,
    /// Fraction of total variance captured by each component, non-increasing.
    pub explained: [f64; 2],
    /// The two orthonormal component directions.
    pub components: [Vec<f64>; 2],
}

impl ProjectionResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("explained_1,explained_2\n");
        out.push_str(&format!("{},{}\n", self.explained[0], self.explained[1]));
        out.push_str("split,doc_id,x,y\n");
        for (split, id, [x, y]) in &self.points {
            out.push_str(&format!("{split},{id},{x},{y}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Named feature split for projection.
#[derive(Debug, Clone)]
pub struct FeatureSplit {
    pub name: String,
    pub features: Vec<Vec<f64>>,
}

fn mat_vec(cov: &[f64], dim: usize, v: &[f64], out: &mut [f64]) {
    for r in 0..dim {
        let row = &cov[r * dim..(r + 1) * dim];
        out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Power iteration, optionally deflated against an earlier component.
fn power_iteration(
    cov: &[f64],
    dim: usize,
    start: Vec<f64>,
    orthogonal_to: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let mut v = start;
    if let Some(u) = orthogonal_to {
        let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        for (x, &ui) in v.iter_mut().zip(u) {
            *x -= d * ui;
        }
    }
    normalize(&mut v);
    let mut w = vec![0.0; dim];
    for _ in 0..max_iter {
        mat_vec(cov, dim, &v, &mut w);
        if let Some(u) = orthogonal_to {
            let d: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, &ui) in w.iter_mut().zip(u) {
                *x -= d * ui;
            }
        }
        if normalize(&mut w) == 0.0 {
            // no variance left in this subspace
            break;
        }
        // fix the sign so convergence is measured on the ray, not the line
        let dot: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            for x in w.iter_mut() {
                *x = -*x;
            }
        }
        let diff: f64 = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut v, &mut w);
        if diff < tol {
            break;
        }
    }
    let mut cv = vec![0.0; dim];
    mat_vec(cov, dim, &v, &mut cv);
    let lambda: f64 = cv.iter().zip(&v).map(|(a, b)| a * b).sum();
    (v, lambda)
}

/// Mean-centered PCA onto the top two components via iterated power method
/// (tolerance 1e-9, deflation for the second component). The iteration start
/// vectors come from a fixed internal stream, so the projection is
/// deterministic for a given input.
pub fn project_features_2d(splits: &[FeatureSplit]) -> Result<ProjectionResult> {
    let total: usize = splits.iter().map(|s| s.features.len()).sum();
    if total < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 feature vectors, got {total}"
        )));
    }
    let dim = splits
        .iter()
        .flat_map(|s| s.features.first())
        .map(|f| f.len())
        .next()
        .unwrap_or(0);
    if dim < 2 {
        return Err(Error::invalid("features must have dimension at least 2"));
    }
    for s in splits {
        for f in &s.features {
            if f.len() != dim {
                return Err(Error::Dimension {
                    context: format!("feature dimension in split {:?}", s.name),
                    expected: dim,
                    actual: f.len(),
                });
            }
        }
    }

    let mut mean = vec![0.0; dim];
    for s in splits {
        for f in &s.features {
            for (m, &x) in mean.iter_mut().zip(f) {
                *m += x;
            }
        }
    }
    for m in &mut mean {
        *m /= total as f64;
    }

    let mut cov = vec![0.0; dim * dim];
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(total);
    for s in splits {
        for f in &s.features {
            let c: Vec<f64> = f.iter().zip(&mean).map(|(x, m)| x - m).collect();
            for r in 0..dim {
                let cr = c[r];
                let row = &mut cov[r * dim..(r + 1) * dim];
                for (entry, &cc) in row.iter_mut().zip(&c) {
                    *entry += cr * cc;
                }
            }
            centered.push(c);
        }
    }
    for entry in &mut cov {
        *entry /= total as f64;
    }

    let total_var: f64 = (0..dim).map(|r| cov[r * dim + r]).sum();
    if total_var <= 1e-30 {
        return Err(Error::invalid("zero-variance data has no projection"));
    }

    use rand::Rng;
    let mut rng = substream(0x9c_a7, "pca-power");
    let start1: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let start2: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (v1, l1) = power_iteration(&cov, dim, start1, None, 1e-9, 100_000);
    let (v2, l2) = power_iteration(&cov, dim, start2, Some(&v1), 1e-9, 100_000);
    let (v1, l1, v2, l2) = if l2 > l1 { (v2, l2, v1, l1) } else { (v1, l1, v2, l2) };

    let explained = [
        (l1 / total_var).clamp(0.0, 1.0),
        (l2 / total_var).clamp(0.0, 1.0),
    ];

    let mut points = Vec::with_capacity(total);
    let mut row = 0usize;
    for s in splits {
        for i in 0..s.features.len() {
            let c = &centered[row];
            row += 1;
            let x: f64 = c.iter().zip(&v1).map(|(a, b)| a * b).sum();
            let y: f64 = c.iter().zip(&v2).map(|(a, b)| a * b).sum();
            points.push((s.name.clone(), i, [x, y]));
        }
    }
    Ok(ProjectionResult {
        points,
        explained,
        components: [v1, v2],
    })
}

/// Symmetrized mean discrepancy between two feature splits.
///
/// Features are standardized per dimension with the pooled mean and standard
/// deviation (constant dimensions pass through unscaled); the score is the
/// squared distance between the split means plus the summed absolute
/// difference of per-dimension variances. Identical splits score exactly 0.
pub fn divergence_score(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("divergence_score splits".into()));
    }
    let dim = a[0].len();
    for f in a.iter().chain(b) {
        if f.len() != dim {
            return Err(Error::Dimension {
                context: "divergence_score feature dimension".into(),
                expected: dim,
                actual: f.len(),
            });
        }
    }
    let total = (a.len() + b.len()) as f64;
    // per-split sums first, combined with single commutative additions, so
    // score(a, b) == score(b, a) bit-exactly
    let split_sum = |split: &[Vec<f64>], f: &dyn Fn(&[f64], &mut [f64])| {
        let mut acc = vec![0.0; dim];
        for row in split {
            f(row, &mut acc);
        }
        acc
    };
    let add_row = |row: &[f64], acc: &mut [f64]| {
        for (m, &x) in acc.iter_mut().zip(row) {
            *m += x;
        }
    };
    let sum_a = split_sum(a, &add_row);
    let sum_b = split_sum(b, &add_row);
    let pooled_mean: Vec<f64> = sum_a
        .iter()
        .zip(&sum_b)
        .map(|(x, y)| (x + y) / total)
        .collect();
    let sq_dev = |row: &[f64], acc: &mut [f64]| {
        for (v, (&x, &m)) in acc.iter_mut().zip(row.iter().zip(&pooled_mean)) {
            *v += (x - m) * (x - m);
        }
    };
    let dev_a = split_sum(a, &sq_dev);
    let dev_b = split_sum(b, &sq_dev);
    let pooled_var: Vec<f64> = dev_a.iter().zip(&dev_b).map(|(x, y)| x + y).collect();
    let sd: Vec<f64> = pooled_var
        .iter()
        .map(|v| {
            let s = (v / total).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();

    let stats = |split: &[Vec<f64>]| {
        let n = split.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in split {
            for (m, ((&x, &mu), &s)) in mean.iter_mut().zip(f.iter().zip(&pooled_mean).zip(&sd)) {
                *m += (x - mu) / s;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for f in split {
            for d in 0..dim {
                let z = (f[d] - pooled_mean[d]) / sd[d] - mean[d];
                var[d] += z * z;
            }
        }
        for v in &mut var {
            *v /= n;
        }
        (mean, var)
    };
    let (mean_a, var_a) = stats(a);
    let (mean_b, var_b) = stats(b);

    let mean_term: f64 = mean_a
        .iter()
        .zip(&mean_b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let var_term: f64 = var_a.iter().zip(&var_b).map(|(x, y)| (x - y).abs()).sum();
    Ok(mean_term + var_term)
}

/// Pooled features of a document list (parallel over documents).
pub fn extract_split_features(model: &KcnnModel, docs: &[IdSequence]) -> Result<Vec<Vec<f64>>> {
    map_slice(docs, |doc| extract_with_trace(model, doc).map(|t| t.features))
        .into_iter()
        .collect()
}

const SVG_COLORS: [&str; 6] = [
    "#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Minimal scatter plot of a projection, one color per split.
pub fn write_projection_svg(result: &ProjectionResult, path: &Path) -> Result<()> {
    let (width, height, margin) = (640.0, 480.0, 40.0);
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, _, [x, y]) in &result.points {
        min_x = min_x.min(*x);
        max_x = max_x.max(*x);
        min_y = min_y.min(*y);
        max_y = max_y.max(*y);
    }
    let span_x = (max_x - min_x).max(1e-12);
    let span_y = (max_y - min_y).max(1e-12);
    let sx = |x: f64| margin + (x - min_x) / span_x * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y - min_y) / span_y * (height - 2.0 * margin);

    let mut splits: Vec<&str> = Vec::new();
    for (name, _, _) in &result.points {
        if !splits.contains(&name.as_str()) {
            splits.push(name);
        }
    }

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\" stroke=\"#999\"/>\n"
    );
    for (name, _, [x, y]) in &result.points {
        let color = SVG_COLORS[splits.iter().position(|s| s == name).unwrap() % SVG_COLORS.len()];
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.6\"/>\n",
            sx(*x),
            sy(*y)
        ));
    }
    for (i, name) in splits.iter().enumerate() {
        let color = SVG_COLORS[i % SVG_COLORS.len()];
        let y = 20.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\">{name}</text>\n",
            width - 140.0,
            y,
            width - 130.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"20\" font-size=\"12\" font-family=\"sans-serif\">\
         explained variance: {:.3}, {:.3}</text>\n</svg>\n",
        result.explained[0], result.explained[1]
    ));
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn dummy_set(labels: Vec<usize>) -> LabeledSet {
        let vocab = Vocabulary::from_tokens(["a"]).unwrap();
        let docs = labels
            .iter()
            .enumerate()
            .map(|(i, _)| IdSequence {
                ids: vec![2, i + 10],
                true_len: 2,
            })
            .collect();
        LabeledSet::new(docs, labels, "dummy", &vocab).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        // predictions [1,0,1] vs labels [1,1,1]
        let set = dummy_set(vec![1, 1, 1]);
        let preds = [1usize, 0, 1];
        let mut i = 0;
        let report = accuracy_with(
            |_| {
                let p = preds[i];
                i += 1;
                Ok(p)
            },
            &set,
            2,
            "h",
        )
        .unwrap();
        assert!((report.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.confusion[1][1], 2);
        assert_eq!(report.confusion[1][0], 1);

        // perfect predictions
        let set = dummy_set(vec![0, 1, 0, 1]);
        let labels = set.labels.clone();
        let mut i = 0;
        let report = accuracy_with(
            |_| {
                let p = labels[i];
                i += 1;
                Ok(p)
            },
            &set,
            2,
            "h",
        )
        .unwrap();
        assert_eq!(report.accuracy, 1.0);

        // constant class on a balanced set
        let set = dummy_set(vec![0, 1, 0, 1, 0, 1]);
        let report = accuracy_with(|_| Ok(0), &set, 2, "h").unwrap();
        assert_eq!(report.accuracy, 0.5);

        let empty = dummy_set(vec![]);
        assert!(accuracy_with(|_| Ok(0), &empty, 2, "h").is_err());
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let set = dummy_set(vec![0, 1, 1, 0, 1]);
        let by_len = |doc: &IdSequence| Ok(doc.ids[1] % 2);
        let report = accuracy_with(by_len, &set, 2, "h").unwrap();

        let mut docs = set.docs.clone();
        let mut labels = set.labels.clone();
        docs.reverse();
        labels.reverse();
        let vocab = Vocabulary::from_tokens(["a"]).unwrap();
        let rev = LabeledSet::new(docs, labels, "dummy", &vocab).unwrap();
        let report_rev = accuracy_with(by_len, &rev, 2, "h").unwrap();
        assert_eq!(report.accuracy, report_rev.accuracy);
        assert_eq!(report.confusion, report_rev.confusion);
    }

    #[test]
    fn proportion_test_examples() {
        let t = proportion_test(0.5, 0.5, 100).unwrap();
        assert_eq!(t.z, 0.0);
        assert!((t.p_value - 0.5).abs() < 1e-7);
        assert!(!t.significant);

        let t = proportion_test(0.83, 0.5, 100).unwrap();
        assert!((t.z - 6.6).abs() < 1e-12, "z = {}", t.z);
        assert!(t.p_value > 1.8e-11 && t.p_value < 2.2e-11, "p = {}", t.p_value);
        assert!(t.significant);

        // accuracies of the strongest two methods on a 2000-document split
        let t = proportion_test(0.8395, 0.7922, 2000).unwrap();
        assert!((t.z - 5.2135).abs() < 1e-3, "z = {}", t.z);
        assert!(t.significant);

        assert!(proportion_test(0.5, 1.0, 100).is_err());
        assert!(proportion_test(0.5, 0.0, 100).is_err());
        assert!(proportion_test(0.5, 0.5, 0).is_err());
        assert!(proportion_test(1.5, 0.5, 10).is_err());
    }

    #[test]
    fn proportion_z_is_antisymmetric() {
        for delta in [0.01, 0.05, 0.2] {
            let up = proportion_test(0.6 + delta, 0.6, 500).unwrap();
            let down = proportion_test(0.6 - delta, 0.6, 500).unwrap();
            assert!((up.z + down.z).abs() < 1e-12);
        }
    }

    fn split(name: &str, features: Vec<Vec<f64>>) -> FeatureSplit {
        FeatureSplit {
            name: name.into(),
            features,
        }
    }

    #[test]
    fn pca_axis_aligned_2d() {
        // covariance diag(4, 1): components are the axes, fractions 0.8/0.2
        let data = vec![
            vec![2.0, 1.0],
            vec![2.0, -1.0],
            vec![-2.0, 1.0],
            vec![-2.0, -1.0],
        ];
        let result = project_features_2d(&[split("a", data)]).unwrap();
        assert!((result.explained[0] - 0.8).abs() < 1e-9);
        assert!((result.explained[1] - 0.2).abs() < 1e-9);
        assert!(result.components[0][0].abs() > 1.0 - 1e-9);
        assert!(result.components[1][1].abs() > 1.0 - 1e-9);
    }

    #[test]
    fn pca_components_are_orthonormal() {
        let mut rng = substream(5, "pca-data");
        use rand::Rng;
        let data: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let result = project_features_2d(&[split("a", data)]).unwrap();
        let dot: f64 = result.components[0]
            .iter()
            .zip(&result.components[1])
            .map(|(a, b)| a * b)
            .sum();
        assert!(dot.abs() < 1e-8, "dot {dot}");
        for v in &result.components {
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        assert!(result.explained[0] >= result.explained[1]);
    }

    #[test]
    fn pca_duplication_invariance() {
        let mut rng = substream(6, "pca-dup");
        use rand::Rng;
        let data: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let single = project_features_2d(&[split("a", data.clone())]).unwrap();
        let double = project_features_2d(&[split("a", data.clone()), split("b", data)]).unwrap();
        for i in 0..20 {
            let p = single.points[i].2;
            let q = double.points[i].2;
            let r = double.points[20 + i].2;
            for d in 0..2 {
                assert!((p[d] - q[d]).abs() < 1e-9);
                assert!((q[d] - r[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pca_isotropic_explained_fractions() {
        // Box-Muller standard normals, D = 4, n = 10k: each component holds
        // roughly a quarter of the variance.
        let mut rng = substream(7, "pca-iso");
        use rand::Rng;
        let mut normal = || {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let data: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..4).map(|_| normal()).collect())
            .collect();
        let result = project_features_2d(&[split("a", data)]).unwrap();
        assert!((result.explained[0] - 0.25).abs() < 0.05);
        assert!((result.explained[1] - 0.25).abs() < 0.05);
    }

    #[test]
    fn pca_projection_is_idempotent() {
        let mut rng = substream(8, "pca-idem");
        use rand::Rng;
        let data: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let first = project_features_2d(&[split("a", data)]).unwrap();
        let coords: Vec<Vec<f64>> = first.points.iter().map(|(_, _, c)| c.to_vec()).collect();
        let second = project_features_2d(&[split("a", coords.clone())]).unwrap();
        // on already-projected data the components are the axes up to sign
        let sign = |v: &[f64], d: usize| if v[d] >= 0.0 { 1.0 } else { -1.0 };
        let s1 = sign(&second.components[0], 0);
        let s2 = sign(&second.components[1], 1);
        for (i, (_, _, c)) in second.points.iter().enumerate() {
            assert!((s1 * c[0] - coords[i][0]).abs() < 1e-6);
            assert!((s2 * c[1] - coords[i][1]).abs() < 1e-6);
        }
    }

    #[test]
    fn pca_rejects_degenerate_inputs() {
        let flat = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        assert!(project_features_2d(&[split("a", flat)]).is_err());
        let two = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert!(project_features_2d(&[split("a", two)]).is_err());
    }

    #[test]
    fn divergence_examples() {
        let mut rng = substream(9, "div");
        use rand::Rng;
        let a: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        assert_eq!(divergence_score(&a, &a).unwrap(), 0.0);

        let shifted: Vec<Vec<f64>> = a
            .iter()
            .map(|f| f.iter().map(|x| x + 2.0).collect())
            .collect();
        let score = divergence_score(&a, &shifted).unwrap();
        assert!(score > 0.0);

        let ab = divergence_score(&a, &shifted).unwrap();
        let ba = divergence_score(&shifted, &a).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn svg_scatter_is_written() {
        let result = project_features_2d(&[
            split("red", vec![vec![1.0, 0.0], vec![2.0, 1.0]]),
            split("green", vec![vec![-1.0, 0.5], vec![0.0, -1.0]]),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj.svg");
        write_projection_svg(&result, &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 4 + 2); // points + legend
        assert!(svg.contains("red") && svg.contains("green"));

        let csv = result.to_csv();
        assert!(csv.starts_with("explained_1,explained_2\n"));
        assert!(csv.contains("split,doc_id,x,y"));
    }
}
