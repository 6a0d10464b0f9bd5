//! Scalar/vector primitives: temperature softmax, the two cross-entropy
//! losses, entropy, max-over-time pooling and the gradient reversal pair.

use crate::error::{Error, Result};

/// Probabilities are floored at this value inside logarithms so a confident
/// wrong prediction yields a large but finite loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Rectifier. Written as a comparison so `-0.0` maps to `0.0` deterministically.
#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Softmax of `logits / t`, computed with max-subtraction.
///
/// `t` is the temperature: 1 recovers plain softmax, larger values produce a
/// softer, higher-entropy distribution over the same argmax.
pub fn softmax_temperature(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive, got {t}")));
    }
    if logits.is_empty() {
        return Err(Error::Empty("softmax over empty logits".into()));
    }
    if logits.iter().any(|q| !q.is_finite()) {
        return Err(Error::NonFinite {
            what: "logits".into(),
            context: "softmax_temperature".into(),
        });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&q| ((q - max) / t).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    Ok(probs)
}

/// Shannon entropy in nats; `0 ln 0` counts as zero.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum()
}

/// `-ln p[label]`, the single-label cross-entropy.
pub fn cross_entropy_hard(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-probs[label].max(PROB_FLOOR).ln())
}

/// `-Σ_k target[k] ln probs[k]`, the soft-target cross-entropy.
///
/// By Gibbs' inequality the value is at least the entropy of `target`, with
/// equality exactly when the two distributions coincide.
pub fn cross_entropy_soft(probs: &[f64], target: &[f64]) -> Result<f64> {
    if probs.len() != target.len() {
        return Err(Error::Dimension {
            context: "cross_entropy_soft".into(),
            expected: target.len(),
            actual: probs.len(),
        });
    }
    let mut acc = 0.0;
    for (&p, &t) in probs.iter().zip(target) {
        acc += t * p.max(PROB_FLOOR).ln();
    }
    Ok(-acc)
}

/// Maximum of a feature map and the first index attaining it. The gradient of
/// the pooled value routes only to that index.
pub fn max_over_time(map: &[f64]) -> Result<(f64, usize)> {
    if map.is_empty() {
        return Err(Error::Empty("max_over_time over empty map".into()));
    }
    let mut best = map[0];
    let mut arg = 0;
    for (i, &v) in map.iter().enumerate().skip(1) {
        if v > best {
            best = v;
            arg = i;
        }
    }
    Ok((best, arg))
}

/// Gradient reversal, forward half: the identity on bit patterns.
pub fn grl_forward(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// Gradient reversal, backward half: multiplies the incoming gradient by
/// `-alpha`. With `alpha = 0` the adversarial signal is disabled.
pub fn grl_backward(grad: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "gradient reversal weight must be non-negative, got {alpha}"
        )));
    }
    Ok(grad.iter().map(|&g| -alpha * g).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_temperature(&[0.0, 0.0], 1.0).unwrap();
        assert_close(p[0], 0.5, 1e-12);
        assert_close(p[1], 0.5, 1e-12);

        let p = softmax_temperature(&[2.0, 0.0], 1.0).unwrap();
        assert_close(p[0], 0.8808, 1e-4);
        assert_close(p[1], 0.1192, 1e-4);

        let p = softmax_temperature(&[2.0, 0.0], 2.0).unwrap();
        assert_close(p[0], 0.7311, 1e-4);
        assert_close(p[1], 0.2689, 1e-4);
    }

    #[test]
    fn softmax_rejects_bad_temperature() {
        assert!(softmax_temperature(&[1.0], 0.0).is_err());
        assert!(softmax_temperature(&[1.0], -1.0).is_err());
        assert!(softmax_temperature(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax_temperature(&[1000.0, 0.0], 1.0).unwrap();
        assert_close(p[0], 1.0, 1e-12);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn hard_loss_examples() {
        assert_close(cross_entropy_hard(&[1.0, 0.0], 0).unwrap(), 0.0, 1e-12);
        assert_close(
            cross_entropy_hard(&[0.5, 0.5], 1).unwrap(),
            std::f64::consts::LN_2,
            1e-12,
        );
        assert_close(cross_entropy_hard(&[0.8808, 0.1192], 1).unwrap(), 2.1269, 1e-3);
        assert!(cross_entropy_hard(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn soft_loss_examples() {
        assert_close(
            cross_entropy_soft(&[0.5, 0.5], &[0.5, 0.5]).unwrap(),
            std::f64::consts::LN_2,
            1e-12,
        );
        // one-hot target reduces to the hard loss
        let soft = cross_entropy_soft(&[0.7, 0.3], &[1.0, 0.0]).unwrap();
        let hard = cross_entropy_hard(&[0.7, 0.3], 0).unwrap();
        assert_eq!(soft, hard);
        assert_close(
            cross_entropy_soft(&[0.9, 0.1], &[0.5, 0.5]).unwrap(),
            1.2040,
            1e-3,
        );
        assert!(cross_entropy_soft(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn max_over_time_examples() {
        assert_eq!(max_over_time(&[0.1, 0.9, 0.3]).unwrap(), (0.9, 1));
        assert_eq!(max_over_time(&[0.5, 0.5]).unwrap(), (0.5, 0));
        assert_eq!(max_over_time(&[0.0]).unwrap(), (0.0, 0));
        assert!(max_over_time(&[]).is_err());
    }

    #[test]
    fn grl_contract() {
        let x = vec![1.0, 2.0, -3.5];
        let fwd = grl_forward(&x);
        assert_eq!(fwd.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());

        assert_eq!(grl_backward(&[1.0, 1.0], 0.5).unwrap(), vec![-0.5, -0.5]);
        let zero = grl_backward(&[3.0, -4.0], 0.0).unwrap();
        assert!(zero.iter().all(|&g| g == 0.0));
        assert!(grl_backward(&[1.0], -0.1).is_err());
    }
}
