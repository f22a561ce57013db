//! OCR noise injection for robustness runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::recording::OcrToken;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Probability of dropping each token.
    pub drop: f64,
    /// Probability of replacing one character of each surviving token.
    pub perturb: f64,
    pub seed: u64,
}

/// Independently drop or corrupt tokens, deterministic in `seed`.
pub fn inject_noise(tokens: &[Vec<OcrToken>], cfg: NoiseConfig) -> Vec<Vec<OcrToken>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    tokens
        .iter()
        .map(|frame| {
            frame
                .iter()
                .filter_map(|t| {
                    if rng.gen_bool(cfg.drop.clamp(0.0, 1.0)) {
                        return None;
                    }
                    let mut t = t.clone();
                    if rng.gen_bool(cfg.perturb.clamp(0.0, 1.0)) {
                        let mut chars: Vec<char> = t.text.chars().collect();
                        let i = rng.gen_range(0..chars.len());
                        chars[i] = char::from(b'a' + rng.gen_range(0..26u8));
                        t.text = chars.into_iter().collect();
                    }
                    Some(t)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn frames() -> Vec<Vec<OcrToken>> {
        (0..50).map(|f| (0..20).map(|i| OcrToken::new(format!("tok{i}"), Rect::new(0.0, 0.0, 5.0, 5.0), f)).collect()).collect()
    }

    #[test]
    fn drop_rate_is_close_to_p() {
        let noisy = inject_noise(&frames(), NoiseConfig { drop: 0.1, perturb: 0.0, seed: 3 });
        let kept: usize = noisy.iter().map(Vec::len).sum();
        assert!((850..=950).contains(&kept), "{kept}");
        assert_eq!(noisy, inject_noise(&frames(), NoiseConfig { drop: 0.1, perturb: 0.0, seed: 3 }));
    }

    #[test]
    fn zero_noise_is_identity() {
        let f = frames();
        assert_eq!(inject_noise(&f, NoiseConfig { drop: 0.0, perturb: 0.0, seed: 1 }), f);
    }
}
