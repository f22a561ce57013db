//! Penalty-reduced focal loss over dense heatmaps.
//!
//! For prediction `p` and Gaussian-smoothed target `y`:
//!
//! ```text
//! L = -(1/N) Σ  (1 - p)^α · ln p                  where y = 1
//!               (1 - y)^β · p^α · ln(1 - p)         elsewhere
//! ```
//!
//! `N` counts the pixels with `y = 1` (at least one).

use crate::error::{NnError, Result};
use crate::tensor::{Real, Tensor};

/// Predictions are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 4.0 }
    }
}

#[derive(Debug, Clone)]
pub struct FocalLoss<T> {
    pub value: T,
    /// dL/dp, zero where the prediction was clamped.
    pub grad: Tensor<T>,
    pub positives: usize,
}

pub fn focal_loss<T: Real>(p: &Tensor<T>, y: &Tensor<T>, params: FocalParams) -> Result<FocalLoss<T>> {
    y.expect_shape(p.shape())?;
    if !(params.alpha > 0.0 && params.beta > 0.0) {
        return Err(NnError::Invalid(format!("focal loss needs alpha, beta > 0, got {params:?}")));
    }
    let alpha = T::lit(params.alpha);
    let beta = T::lit(params.beta);
    let lo = T::lit(PROB_EPS);
    let hi = T::one() - lo;
    let positives = y.data().iter().filter(|&&v| v == T::one()).count();
    let norm = T::lit(positives.max(1) as f64);

    let mut total = T::zero();
    let mut grad = Vec::with_capacity(p.len());
    for (&raw, &target) in p.data().iter().zip(y.data()) {
        if !raw.is_finite() {
            return Err(NnError::NonFinite("focal loss prediction".into()));
        }
        if !(target >= T::zero() && target <= T::one()) {
            return Err(NnError::Invalid("focal loss target outside [0, 1]".into()));
        }
        let clamped = raw < lo || raw > hi;
        let q = raw.max(lo).min(hi);
        let (term, dterm) = if target == T::one() {
            let w = (T::one() - q).powf(alpha);
            let dw = -alpha * (T::one() - q).powf(alpha - T::one());
            (w * q.ln(), dw * q.ln() + w / q)
        } else {
            let neg = (T::one() - target).powf(beta);
            let w = q.powf(alpha);
            let dw = alpha * q.powf(alpha - T::one());
            let l = (T::one() - q).ln();
            (neg * w * l, neg * (dw * l - w / (T::one() - q)))
        };
        total += term;
        grad.push(if clamped { T::zero() } else { -dterm / norm });
    }
    Ok(FocalLoss { value: -total / norm, grad: Tensor::from_vec(p.shape(), grad)?, positives })
}

/// `ln σ(z)` without underflow.
fn log_sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Focal loss of `σ(z)` with the gradient taken with respect to the logits `z`.
///
/// The value equals [`focal_loss`] applied to `σ(z)`. The gradient is the
/// exact derivative of the unclamped loss, so saturated logits still receive
/// a signal.
pub fn focal_loss_logits<T: Real>(z: &Tensor<T>, y: &Tensor<T>, params: FocalParams) -> Result<FocalLoss<T>> {
    y.expect_shape(z.shape())?;
    if z.data().iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("focal loss logit".into()));
    }
    let p = z.map(|v| T::one() / (T::one() + (-v).exp()));
    let mut out = focal_loss(&p, y, params)?;
    let alpha = T::lit(params.alpha);
    let beta = T::lit(params.beta);
    let norm = T::lit(out.positives.max(1) as f64);
    for ((g, (&zv, &pv)), &target) in out.grad.data_mut().iter_mut().zip(z.data().iter().zip(p.data())).zip(y.data()) {
        let q = T::one() - pv;
        let d = if target == T::one() {
            // d/dz [(1-p)^α ln p]
            q.powf(alpha) * (q - alpha * pv * log_sigmoid(zv))
        } else {
            // d/dz [(1-y)^β p^α ln(1-p)]
            let neg = (T::one() - target).powf(beta);
            neg * pv.powf(alpha) * (alpha * q * log_sigmoid(-zv) - pv)
        };
        *g = -d / norm;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::from_vec(&[1, 1], vec![v]).unwrap()
    }

    #[test]
    fn positive_pixel_at_half() {
        let l = focal_loss(&scalar(0.5), &scalar(1.0), FocalParams::default()).unwrap();
        assert!((l.value - 0.25 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l.value - 0.173287).abs() < 1e-6);
    }

    #[test]
    fn penalty_reduced_negative() {
        let l = focal_loss(&scalar(0.1), &scalar(0.5), FocalParams::default()).unwrap();
        let expected = 0.0625 * 0.01 * -(0.9f64.ln());
        assert!((l.value - expected).abs() < 1e-12 * expected);
        assert!((l.value - 6.5852e-5).abs() < 5e-9);
    }

    #[test]
    fn exact_fit_limit_is_near_zero() {
        let p = Tensor::from_vec(&[1, 3], vec![1.0, 0.0, 0.0]).unwrap();
        let y = Tensor::from_vec(&[1, 3], vec![1.0, 0.3, 0.0]).unwrap();
        let l = focal_loss(&p, &y, FocalParams::default()).unwrap();
        assert!(l.value >= 0.0 && l.value < 1e-12);
        assert!(l.grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn logit_form_matches_value_and_keeps_gradient_when_saturated() {
        let z = Tensor::<f64>::from_vec(&[1, 3], vec![0.3, -1.2, 2.0]).unwrap();
        let y = Tensor::from_vec(&[1, 3], vec![1.0, 0.4, 0.0]).unwrap();
        let a = focal_loss_logits(&z, &y, FocalParams::default()).unwrap();
        let b = focal_loss(&crate::ops::sigmoid(&z), &y, FocalParams::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        let dead = focal_loss_logits(&scalar(-40.0), &scalar(1.0), FocalParams::default()).unwrap();
        assert!((dead.grad.data()[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(focal_loss(&scalar(f64::NAN), &scalar(1.0), FocalParams::default()).is_err());
        assert!(focal_loss(&scalar(0.5), &scalar(1.5), FocalParams::default()).is_err());
        let bad = FocalParams { alpha: 0.0, beta: 4.0 };
        assert!(focal_loss(&scalar(0.5), &scalar(1.0), bad).is_err());
    }
}
