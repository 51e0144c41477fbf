use crate::error::{Error, Result};
use crate::linalg::softmax_backward;
use crate::scalar::Scalar;

/// Argument order of the fine-tuning KL loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KlDirection {
    /// `D_KL(target || prediction)`; logit gradient `prediction - target`.
    #[default]
    TargetFirst,
    /// `D_KL(prediction || smoothed target)`, the prediction-first reading.
    /// Target zeros are lifted by [`REVERSE_SMOOTHING`] so the loss is finite.
    PredictionFirst,
}

pub const REVERSE_SMOOTHING: f64 = 1e-6;

/// `sum_i p_i log(p_i / q_i)` with `0 log 0 = 0`.
pub fn kl_divergence<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    let mut total = S::zero();
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == S::zero() {
            continue;
        }
        if qi <= S::zero() {
            return Err(Error::KlSupport(i));
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total)
}

/// Loss and its gradient with respect to the logits that produced `prediction`
/// through a softmax.
pub fn kl_loss<S: Scalar>(prediction: &[S], target: &[S], direction: KlDirection) -> Result<(S, Vec<S>)> {
    match direction {
        KlDirection::TargetFirst => {
            let loss = kl_divergence(target, prediction)?;
            let grad = prediction.iter().zip(target).map(|(&p, &t)| p - t).collect();
            Ok((loss, grad))
        }
        KlDirection::PredictionFirst => {
            let n = S::lit(target.len() as f64);
            let eps = S::lit(REVERSE_SMOOTHING);
            let smoothed: Vec<S> = target.iter().map(|&t| (t + eps / n) / (S::one() + eps)).collect();
            let loss = kl_divergence(prediction, &smoothed)?;
            let d_pred: Vec<S> = prediction
                .iter()
                .zip(&smoothed)
                .map(|(&p, &q)| if p > S::zero() { (p / q).ln() + S::one() } else { S::zero() })
                .collect();
            Ok((loss, softmax_backward(prediction, &d_pred)))
        }
    }
}
