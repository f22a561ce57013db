//! The heatmap network: a 2D block over the endpoint frames, a 3D block over
//! all `K` frames, and an upsampling decoder with one skip connection.
//!
//! ```text
//! 2D  [6,H,W]   -> 16 @H/2 -> 32 @H/4 -> 64 @H/8 ─┐
//! 3D  [3,K,H,W] -> 16 @H/2 -> 32 @H/4 -> 64 @H/8 ─┴ concat 128
//! up -> conv 64 -> up -> concat skip(16 + 16) -> conv 32 -> up -> conv 16 -> 1x1 -> sigmoid
//! ```
//!
//! The skip carries 2D stage-1 features next to the temporal mean of 3D
//! stage-1 features. Disabled branches feed zeros, so every variant shares
//! one parameter layout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vid2trace_nn::ops::{
    concat_channels, depth_avg_pool, depth_avg_pool_backward, relu, relu_backward, sigmoid,
    split_channels, temporal_mean, temporal_mean_backward, upsample2x, upsample2x_backward,
};
use vid2trace_nn::{
    conv2d_forward, conv3d_forward, focal_loss_logits, Conv2dSpec, Conv3dSpec, ConvForward, FocalParams, Real, Tensor,
};

use super::{ClipTensor, LocError, LocModelConfig, TargetHeatmap};

/// Prior probability the output bias starts at.
const OUTPUT_PRIOR: f64 = 0.1;

/// (out, in, kernel rank) per convolution, in parameter order.
const LAYERS: [(usize, usize, usize); 10] = [
    (16, 6, 2),
    (32, 16, 2),
    (64, 32, 2),
    (16, 3, 3),
    (32, 16, 3),
    (64, 32, 3),
    (64, 128, 2),
    (32, 96, 2),
    (16, 32, 2),
    (1, 16, 0),
];

/// Parameter tensors: weight then bias for every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LocModel<T: Real = f32> {
    config: LocModelConfig,
    params: Vec<Tensor<T>>,
}

pub type ModelGrads<T> = Vec<Tensor<T>>;

fn weight_shape(out: usize, inp: usize, rank: usize) -> Vec<usize> {
    match rank {
        0 => vec![out, inp, 1, 1],
        2 => vec![out, inp, 3, 3],
        _ => vec![out, inp, 3, 3, 3],
    }
}

pub fn param_shapes() -> Vec<Vec<usize>> {
    LAYERS.iter().flat_map(|&(o, i, r)| [weight_shape(o, i, r), vec![o]]).collect()
}

struct Cache<T: Real> {
    c2: Vec<ConvForward<T>>,
    a2: Vec<Tensor<T>>,
    c3: Vec<ConvForward<T>>,
    a3: Vec<Tensor<T>>,
    k1: usize,
    pool: usize,
    cd: Vec<ConvForward<T>>,
    ad: Vec<Tensor<T>>,
    out: Tensor<T>,
}

impl<T: Real> LocModel<T> {
    /// He-initialized weights, zero biases, output bias at the logit of [`OUTPUT_PRIOR`].
    pub fn init(config: LocModelConfig, seed: u64) -> Result<Self, LocError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for &(o, i, r) in &LAYERS {
            let shape = weight_shape(o, i, r);
            let fan_in: usize = shape[1..].iter().product();
            params.push(Tensor::normal(&shape, (2.0 / fan_in as f64).sqrt(), &mut rng));
            params.push(Tensor::zeros(&[o]));
        }
        let logit = (OUTPUT_PRIOR / (1.0 - OUTPUT_PRIOR)).ln();
        params.last_mut().expect("output bias").fill(T::lit(logit));
        Ok(Self { config, params })
    }

    pub fn from_params(config: LocModelConfig, params: Vec<Tensor<T>>) -> Result<Self, LocError> {
        config.validate()?;
        let shapes = param_shapes();
        if params.len() != shapes.len() {
            return Err(LocError::Config(format!("expected {} parameter tensors, got {}", shapes.len(), params.len())));
        }
        for (p, s) in params.iter().zip(&shapes) {
            if p.shape() != s.as_slice() {
                return Err(LocError::Shape { expected: s.clone(), got: p.shape().to_vec() });
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &LocModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> LocModel<U> {
        LocModel { config: self.config.clone(), params: self.params.iter().map(Tensor::cast).collect() }
    }

    fn check_input(&self, frames: &Tensor<T>) -> Result<(), LocError> {
        let c = &self.config;
        let expected = vec![3, c.k, c.height, c.width];
        if frames.shape() != expected.as_slice() {
            return Err(LocError::Shape { expected, got: frames.shape().to_vec() });
        }
        Ok(())
    }

    fn w(&self, layer: usize) -> (&Tensor<T>, &Tensor<T>) {
        (&self.params[2 * layer], &self.params[2 * layer + 1])
    }

    fn forward_cached(&self, frames: &Tensor<T>, endpoints: &Tensor<T>) -> Result<Cache<T>, LocError> {
        self.check_input(frames)?;
        let cfg = &self.config;
        let v = cfg.variant;
        let (h2, w2) = (cfg.height / 2, cfg.width / 2);
        let (h8, w8) = (cfg.height / 8, cfg.width / 8);
        let down2 = Conv2dSpec::new(2, 1);
        let down3 = Conv3dSpec::new([2, 2, 2], [1, 1, 1]);
        let same = Conv2dSpec::new(1, 1);

        let (mut c2, mut a2) = (Vec::new(), Vec::new());
        let (f2, s2) = if v.uses_2d() {
            let mut x = endpoints.clone();
            for layer in 0..3 {
                let (w, b) = self.w(layer);
                let f = conv2d_forward(&x, w, Some(b), down2)?;
                x = relu(&f.output);
                c2.push(f);
                a2.push(x.clone());
            }
            (x, a2[0].clone())
        } else {
            (Tensor::zeros(&[64, h8, w8]), Tensor::zeros(&[16, h2, w2]))
        };

        let (mut c3, mut a3) = (Vec::new(), Vec::new());
        let pool = cfg.k / 8;
        let (f3, s3, k1) = if v.uses_3d() {
            let mut x = frames.clone();
            for layer in 3..6 {
                let (w, b) = self.w(layer);
                let f = conv3d_forward(&x, w, Some(b), down3)?;
                x = relu(&f.output);
                c3.push(f);
                a3.push(x.clone());
            }
            let pooled = depth_avg_pool(&x, pool)?;
            (temporal_mean(&pooled)?, temporal_mean(&a3[0])?, a3[0].shape()[1])
        } else {
            (Tensor::zeros(&[64, h8, w8]), Tensor::zeros(&[16, h2, w2]), 0)
        };

        let mut cd = Vec::new();
        let mut ad = Vec::new();
        let x = upsample2x(&concat_channels(&[&f2, &f3])?)?;
        let (w, b) = self.w(6);
        let f = conv2d_forward(&x, w, Some(b), same)?;
        let x = relu(&f.output);
        cd.push(f);
        ad.push(x.clone());

        let up = upsample2x(&x)?;
        let skip = if v.has_shortcut() { concat_channels(&[&s2, &s3])? } else { Tensor::zeros(&[32, h2, w2]) };
        let (w, b) = self.w(7);
        let f = conv2d_forward(&concat_channels(&[&up, &skip])?, w, Some(b), same)?;
        let x = relu(&f.output);
        cd.push(f);
        ad.push(x.clone());

        let (w, b) = self.w(8);
        let f = conv2d_forward(&upsample2x(&x)?, w, Some(b), same)?;
        let x = relu(&f.output);
        cd.push(f);
        ad.push(x.clone());

        let (w, b) = self.w(9);
        let f = conv2d_forward(&x, w, Some(b), Conv2dSpec::new(1, 0))?;
        let out = sigmoid(&f.output);
        cd.push(f);
        Ok(Cache { c2, a2, c3, a3, k1, pool, cd, ad, out })
    }

    /// Heatmap `[1, H, W]` with every value in (0, 1).
    pub fn forward(&self, frames: &Tensor<T>, endpoints: &Tensor<T>) -> Result<Tensor<T>, LocError> {
        Ok(self.forward_cached(frames, endpoints)?.out)
    }

    /// Focal loss against `target` and its gradient for every parameter.
    pub fn loss_and_grads(
        &self,
        frames: &Tensor<T>,
        endpoints: &Tensor<T>,
        target: &Tensor<T>,
    ) -> Result<(T, ModelGrads<T>), LocError> {
        let cache = self.forward_cached(frames, endpoints)?;
        let fp = FocalParams { alpha: self.config.alpha, beta: self.config.beta };
        let loss = focal_loss_logits(&cache.cd[3].output, target, fp)?;
        let grads = self.backward(&cache, &loss.grad)?;
        Ok((loss.value, grads))
    }

    /// `grad_z` is the loss gradient with respect to the output logits.
    fn backward(&self, c: &Cache<T>, grad_z: &Tensor<T>) -> Result<ModelGrads<T>, LocError> {
        let v = self.config.variant;
        let mut grads: Vec<Tensor<T>> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut put = |layer: usize, g: &vid2trace_nn::ConvGrads<T>| {
            grads[2 * layer] = g.weight.clone();
            grads[2 * layer + 1] = g.bias.clone();
        };

        let cg = c.cd[3].backward(self.w(9).0, grad_z)?;
        put(9, &cg);
        let g = relu_backward(&c.ad[2], &cg.input)?;
        let cg = c.cd[2].backward(self.w(8).0, &g)?;
        put(8, &cg);
        let g = relu_backward(&c.ad[1], &upsample2x_backward(&cg.input)?)?;
        let cg = c.cd[1].backward(self.w(7).0, &g)?;
        put(7, &cg);
        let parts = split_channels(&cg.input, &[64, 16, 16])?;
        let g = relu_backward(&c.ad[0], &upsample2x_backward(&parts[0])?)?;
        let cg = c.cd[0].backward(self.w(6).0, &g)?;
        put(6, &cg);
        let top = split_channels(&upsample2x_backward(&cg.input)?, &[64, 64])?;

        if v.uses_2d() {
            let mut g = top[0].clone();
            for layer in (0..3).rev() {
                if layer == 0 && v.has_shortcut() {
                    g.add_assign(&parts[1])?;
                }
                let gr = relu_backward(&c.a2[layer], &g)?;
                let cg = c.c2[layer].backward(self.w(layer).0, &gr)?;
                put(layer, &cg);
                g = cg.input;
            }
        }
        if v.uses_3d() {
            let pooled = temporal_mean_backward(&top[1], 1)?;
            let mut g = depth_avg_pool_backward(&pooled, c.pool)?;
            for layer in (3..6).rev() {
                let i = layer - 3;
                if i == 0 && v.has_shortcut() {
                    g.add_assign(&temporal_mean_backward(&parts[2], c.k1)?)?;
                }
                let gr = relu_backward(&c.a3[i], &g)?;
                let cg = c.c3[i].backward(self.w(layer).0, &gr)?;
                put(layer, &cg);
                g = cg.input;
            }
        }
        Ok(grads)
    }
}

impl LocModel<f32> {
    pub fn predict(&self, clip: &ClipTensor) -> Result<Tensor<f32>, LocError> {
        self.forward(&clip.frames, &clip.endpoints())
    }

    pub fn sample_loss_and_grads(&self, clip: &ClipTensor, target: &TargetHeatmap) -> Result<(f32, ModelGrads<f32>), LocError> {
        self.loss_and_grads(&clip.frames, &clip.endpoints(), &target.grid)
    }
}
