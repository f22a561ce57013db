//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Check at most this many coordinates, sampled without replacement.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-4, max_coords: 64, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckReport {
    /// max |analytic − numeric| / max(1, |numeric|)
    pub max_rel_error: f64,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// `f` returns a scalar value and its analytic gradient with respect to the input.
pub fn grad_check<F>(f: F, input: &Tensor<f64>, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&Tensor<f64>) -> Result<(f64, Tensor<f64>)>,
{
    let (value, analytic) = f(input)?;
    if !value.is_finite() {
        return Err(NnError::NonFinite("grad_check base evaluation".into()));
    }
    analytic.expect_shape(input.shape())?;
    let n = input.len();
    let coords: Vec<usize> = if n <= opts.max_coords {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut picked = sample(&mut rng, n, opts.max_coords).into_vec();
        picked.sort_unstable();
        picked
    };
    let mut probe = input.clone();
    let mut worst: f64 = 0.0;
    for &i in &coords {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + opts.step;
        let plus = f(&probe)?.0;
        probe.data_mut()[i] = orig - opts.step;
        let minus = f(&probe)?.0;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NnError::NonFinite(format!("grad_check evaluation at coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * opts.step);
        let err = (analytic.data()[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(GradCheckReport { max_rel_error: worst, coords_checked: coords.len() })
}
