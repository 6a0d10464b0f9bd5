//! Central finite-difference verification of analytic gradients.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::params::Parameterized;
use crate::rng::substream;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates excluded because the perturbation crossed a rectifier kink
    /// or a pooling argmax switch (the loss is not differentiable there).
    pub skipped: usize,
}

/// Compares `analytic` against central differences of `eval` on a random
/// subsample of at least 200 coordinates (or all of them, if fewer).
///
/// `eval` returns the loss plus an activation-pattern signature (argmax
/// indices, rectifier masks). A coordinate whose `±eps` evaluations disagree
/// on the signature sits within `eps` of a kink and is skipped rather than
/// compared. `exclude` removes constrained coordinates (the pad embedding
/// row) from sampling entirely.
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check<M, F>(
    model: &mut M,
    mut eval: F,
    analytic: &[f64],
    sample_coords: usize,
    eps: f64,
    seed: u64,
    exclude: &dyn Fn(usize) -> bool,
) -> Result<GradCheckReport>
where
    M: Parameterized,
    F: FnMut(&M) -> Result<(f64, u64)>,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let n = model.num_params();
    if analytic.len() != n {
        return Err(Error::Dimension {
            context: "gradient_check analytic gradient".into(),
            expected: n,
            actual: analytic.len(),
        });
    }

    let mut coords: Vec<usize> = (0..n).filter(|&i| !exclude(i)).collect();
    let target = sample_coords.max(200).min(coords.len());
    let mut rng = substream(seed, "grad-check");
    coords.shuffle(&mut rng);
    coords.truncate(target);

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    for &coord in &coords {
        let orig = model.get_param(coord);
        model.set_param(coord, orig + eps);
        let (loss_plus, sig_plus) = eval(model)?;
        model.set_param(coord, orig - eps);
        let (loss_minus, sig_minus) = eval(model)?;
        model.set_param(coord, orig);

        if sig_plus != sig_minus {
            report.skipped += 1;
            continue;
        }
        let numeric = (loss_plus - loss_minus) / (2.0 * eps);
        let a = analytic[coord];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::DenseHead;
    use crate::nn::ops::{cross_entropy_hard, softmax_temperature};

    impl Parameterized for DenseHead {
        fn param_blocks(&self) -> Vec<&[f64]> {
            vec![&self.weight, &self.bias]
        }
        fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.weight, &mut self.bias]
        }
        fn block_names(&self) -> Vec<String> {
            vec!["dense_weight".into(), "dense_bias".into()]
        }
    }

    /// Softmax cross-entropy over a single dense layer is smooth, so central
    /// differences are essentially exact.
    #[test]
    fn linear_model_is_exact() {
        let mut rng = substream(3, "linear-check");
        let mut head = DenseHead::init(4, 3, &mut rng);
        let input = [0.4, -1.2, 0.9, 0.1];
        let label = 2usize;

        let logits = head.forward(&input).unwrap();
        let probs = softmax_temperature(&logits, 1.0).unwrap();
        let mut d_logits = probs.clone();
        d_logits[label] -= 1.0; // softmax-CE identity: dL/dq = p - onehot
        let (dw, db, _) = head.backward(&input, &d_logits);
        let analytic: Vec<f64> = dw.into_iter().chain(db).collect();

        let eval = |h: &DenseHead| -> Result<(f64, u64)> {
            let q = h.forward(&input)?;
            let p = softmax_temperature(&q, 1.0)?;
            Ok((cross_entropy_hard(&p, label)?, 0))
        };
        let report =
            gradient_check(&mut head, eval, &analytic, 200, 1e-5, 7, &|_| false).unwrap();
        assert_eq!(report.skipped, 0);
        assert!(report.checked >= 15);
        assert!(report.max_rel_err < 1e-6, "err {}", report.max_rel_err);
    }

    #[test]
    fn zero_eps_is_an_error() {
        let mut rng = substream(4, "zero-eps");
        let mut head = DenseHead::init(2, 2, &mut rng);
        let analytic = vec![0.0; head.num_params()];
        let err = gradient_check(
            &mut head,
            |_| Ok((0.0, 0)),
            &analytic,
            200,
            0.0,
            1,
            &|_| false,
        )
        .unwrap_err();
        assert!(err.to_string().contains("eps"), "{err}");
    }
}
