//! Mini-batch Adam on the focal heatmap loss.
//!
//! Per-sample gradients are computed in parallel and summed in sample order,
//! so results do not depend on the thread count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vid2trace_nn::{AdamState, Tensor};

use super::{argmax, GridMap, LocError, LocModel, LocModelConfig, Sample};
use crate::geometry::ScreenDims;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 25, lr: 0.01, batch: 32, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: LocModel<f32>,
    /// Mean sample loss per epoch, measured during the epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

pub fn train(samples: &[Sample], model_cfg: LocModelConfig, cfg: &TrainConfig) -> Result<TrainReport, LocError> {
    train_with(samples, LocModel::init(model_cfg, cfg.seed)?, cfg, |_, _, _| {})
}

/// Share of samples whose predicted point falls inside the element box.
pub fn point_accuracy(model: &LocModel<f32>, samples: &[Sample], dims: ScreenDims) -> Result<f64, LocError> {
    if samples.is_empty() {
        return Err(LocError::EmptyDataset);
    }
    let cfg = model.config();
    let map = GridMap::new(dims, cfg.height, cfg.width);
    let hits = samples
        .par_iter()
        .map(|s| {
            let (r, c) = argmax(&model.predict(&s.clip)?);
            Ok(s.target.element_bbox.contains(map.to_source(r, c)))
        })
        .collect::<Result<Vec<bool>, LocError>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / samples.len() as f64)
}

/// Continue training `model`; `on_epoch(epoch, mean_loss, model)` runs after each epoch.
pub fn train_with(
    samples: &[Sample],
    mut model: LocModel<f32>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, &LocModel<f32>),
) -> Result<TrainReport, LocError> {
    if samples.is_empty() {
        return Err(LocError::EmptyDataset);
    }
    if cfg.batch == 0 {
        return Err(LocError::Config("batch must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut adam = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|&i| model.sample_loss_and_grads(&samples[i].clip, &samples[i].target))
                .collect();
            let mut sum: Option<Vec<Tensor<f32>>> = None;
            for (&i, r) in batch.iter().zip(results) {
                let (loss, grads) = r?;
                if !loss.is_finite() {
                    return Err(LocError::NonFinite { epoch, sample: i, value: loss as f64 });
                }
                total += loss as f64;
                match sum.as_mut() {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.add_assign(g)?;
                        }
                    }
                }
            }
            let mut grads = sum.expect("non-empty batch");
            let inv = 1.0 / batch.len() as f32;
            grads.iter_mut().for_each(|g| g.scale(inv));
            adam.step(model.params_mut(), &grads, cfg.lr)?;
        }
        let mean = total / samples.len() as f64;
        epoch_losses.push(mean);
        on_epoch(epoch, mean, &model);
    }
    Ok(TrainReport { model, epoch_losses, steps: adam.step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect, ScreenDims};
    use crate::localization::{make_target_heatmap, ClipTensor, GridMap, Variant};

    fn tiny_sample(seed: u64) -> (LocModelConfig, Sample) {
        let cfg = LocModelConfig { variant: Variant::Hm3d2d, k: 8, height: 16, width: 8, ..LocModelConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = Tensor::uniform(&[3, 8, 16, 8], 0.0, 1.0, &mut rng);
        let map = GridMap::new(ScreenDims::new(8, 16), 16, 8);
        let target = make_target_heatmap(Point::new(3.5, 9.5), Some(Rect::new(1.0, 7.0, 6.0, 6.0)), map).unwrap();
        (cfg, Sample { clip: ClipTensor { frames, indices: (0..8).collect() }, target })
    }

    #[test]
    fn single_sample_overfits() {
        let (mc, s) = tiny_sample(1);
        let cfg = TrainConfig { epochs: 200, lr: 0.01, batch: 1, seed: 3 };
        let r = train(std::slice::from_ref(&s), mc, &cfg).unwrap();
        assert_eq!(r.steps, 200);
        let first = r.epoch_losses[0];
        let last = r.model.sample_loss_and_grads(&s.clip, &s.target).unwrap().0 as f64;
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let (mc, s) = tiny_sample(2);
        let init = LocModel::<f32>::init(mc.clone(), 4).unwrap();
        let r = train(std::slice::from_ref(&s), mc, &TrainConfig { epochs: 3, lr: 0.0, batch: 1, seed: 4 }).unwrap();
        assert_eq!(r.model, init);
    }

    #[test]
    fn same_seed_same_history() {
        let samples: Vec<Sample> = (0..3).map(|i| tiny_sample(i).1).collect();
        let mc = tiny_sample(0).0;
        let cfg = TrainConfig { epochs: 4, lr: 0.01, batch: 2, seed: 8 };
        let a = train(&samples, mc.clone(), &cfg).unwrap();
        let b = train(&samples, mc, &cfg).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let mc = tiny_sample(0).0;
        assert!(matches!(train(&[], mc, &TrainConfig::default()), Err(LocError::EmptyDataset)));
    }
}
