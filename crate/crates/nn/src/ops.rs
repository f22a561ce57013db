//! Shape-changing and element-wise layers with their backward passes.

use crate::error::{NnError, Result};
use crate::tensor::{Real, Tensor};

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given the layer *output* (positive entries pass).
pub fn relu_backward<T: Real>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape(output.shape())?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(output.shape(), data)
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Gradient of the logistic function given its output `p`.
pub fn sigmoid_backward<T: Real>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape(output.shape())?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&p, &g)| g * p * (T::one() - p))
        .collect();
    Tensor::from_vec(output.shape(), data)
}

/// Nearest-neighbour 2× upsampling of `[C, H, W]`.
pub fn upsample2x<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank(3, "upsample2x")?;
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            let src = &x.data()[(ch * h + y / 2) * w..(ch * h + y / 2 + 1) * w];
            let dst = &mut out[(ch * oh + y) * ow..(ch * oh + y + 1) * ow];
            for (xo, v) in dst.iter_mut().enumerate() {
                *v = src[xo / 2];
            }
        }
    }
    Tensor::from_vec(&[c, oh, ow], out)
}

pub fn upsample2x_backward<T: Real>(grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_rank(3, "upsample2x backward")?;
    let (c, oh, ow) = (grad_out.shape()[0], grad_out.shape()[1], grad_out.shape()[2]);
    if oh % 2 != 0 || ow % 2 != 0 {
        return Err(NnError::Shape(format!("upsample2x backward: odd extent {oh}x{ow}")));
    }
    let (h, w) = (oh / 2, ow / 2);
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                out[(ch * h + y / 2) * w + x / 2] += grad_out.data()[(ch * oh + y) * ow + x];
            }
        }
    }
    Tensor::from_vec(&[c, h, w], out)
}

/// Mean over the depth axis: `[C, D, H, W]` → `[C, H, W]`.
pub fn temporal_mean<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank(4, "temporal_mean")?;
    let s = x.shape();
    let (c, d, hw) = (s[0], s[1], s[2] * s[3]);
    let inv = T::one() / T::lit(d as f64);
    let mut out = vec![T::zero(); c * hw];
    for ch in 0..c {
        let dst = &mut out[ch * hw..(ch + 1) * hw];
        for z in 0..d {
            let src = &x.data()[(ch * d + z) * hw..(ch * d + z + 1) * hw];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o += v;
            }
        }
        dst.iter_mut().for_each(|v| *v *= inv);
    }
    Tensor::from_vec(&[c, s[2], s[3]], out)
}

pub fn temporal_mean_backward<T: Real>(grad_out: &Tensor<T>, depth: usize) -> Result<Tensor<T>> {
    grad_out.expect_rank(3, "temporal_mean backward")?;
    let s = grad_out.shape();
    let (c, hw) = (s[0], s[1] * s[2]);
    let inv = T::one() / T::lit(depth as f64);
    let mut out = vec![T::zero(); c * depth * hw];
    for ch in 0..c {
        let src = &grad_out.data()[ch * hw..(ch + 1) * hw];
        for z in 0..depth {
            let dst = &mut out[(ch * depth + z) * hw..(ch * depth + z + 1) * hw];
            for (o, &g) in dst.iter_mut().zip(src) {
                *o = g * inv;
            }
        }
    }
    Tensor::from_vec(&[c, depth, s[1], s[2]], out)
}

/// Average pooling along depth with kernel = stride = `stride`.
pub fn depth_avg_pool<T: Real>(x: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    x.expect_rank(4, "depth_avg_pool")?;
    if stride == 0 {
        return Err(NnError::Invalid("pool stride must be >= 1".into()));
    }
    let s = x.shape();
    let (c, d, hw) = (s[0], s[1], s[2] * s[3]);
    if stride == 1 {
        return Ok(x.clone());
    }
    if d % stride != 0 {
        return Err(NnError::Shape(format!("depth {d} not divisible by pool stride {stride}")));
    }
    let od = d / stride;
    let inv = T::one() / T::lit(stride as f64);
    let mut out = vec![T::zero(); c * od * hw];
    for ch in 0..c {
        for z in 0..d {
            let src = &x.data()[(ch * d + z) * hw..(ch * d + z + 1) * hw];
            let dst = &mut out[(ch * od + z / stride) * hw..(ch * od + z / stride + 1) * hw];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o += v * inv;
            }
        }
    }
    Tensor::from_vec(&[c, od, s[2], s[3]], out)
}

pub fn depth_avg_pool_backward<T: Real>(grad_out: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    grad_out.expect_rank(4, "depth_avg_pool backward")?;
    if stride <= 1 {
        return Ok(grad_out.clone());
    }
    let s = grad_out.shape();
    let (c, od, hw) = (s[0], s[1], s[2] * s[3]);
    let d = od * stride;
    let inv = T::one() / T::lit(stride as f64);
    let mut out = vec![T::zero(); c * d * hw];
    for ch in 0..c {
        for z in 0..d {
            let src = &grad_out.data()[(ch * od + z / stride) * hw..(ch * od + z / stride + 1) * hw];
            let dst = &mut out[(ch * d + z) * hw..(ch * d + z + 1) * hw];
            for (o, &g) in dst.iter_mut().zip(src) {
                *o = g * inv;
            }
        }
    }
    Tensor::from_vec(&[c, d, s[2], s[3]], out)
}

/// Concatenate `[Ci, ...]` tensors along the leading (channel) axis.
pub fn concat_channels<T: Real>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| NnError::Invalid("concat of zero tensors".into()))?;
    let tail = &first.shape()[1..];
    let mut channels = 0;
    let mut data = Vec::new();
    for p in parts {
        if &p.shape()[1..] != tail {
            return Err(NnError::Shape(format!(
                "concat: trailing extents {:?} vs {:?}",
                &p.shape()[1..],
                tail
            )));
        }
        channels += p.shape()[0];
        data.extend_from_slice(p.data());
    }
    let mut shape = vec![channels];
    shape.extend_from_slice(tail);
    Tensor::from_vec(&shape, data)
}

/// Split a channel-concatenated gradient back into parts of the given channel counts.
pub fn split_channels<T: Real>(x: &Tensor<T>, channels: &[usize]) -> Result<Vec<Tensor<T>>> {
    let total: usize = channels.iter().sum();
    if x.shape().is_empty() || x.shape()[0] != total {
        return Err(NnError::Shape(format!("split {:?} into {channels:?}", x.shape())));
    }
    let tail = &x.shape()[1..];
    let per: usize = tail.iter().product();
    let mut offset = 0;
    channels
        .iter()
        .map(|&c| {
            let mut shape = vec![c];
            shape.extend_from_slice(tail);
            let t = Tensor::from_vec(&shape, x.data()[offset * per..(offset + c) * per].to_vec());
            offset += c;
            t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_repeats_each_pixel() {
        let x = Tensor::<f32>::from_vec(&[1, 1, 2], vec![1.0, 2.0]).unwrap();
        let up = upsample2x(&x).unwrap();
        assert_eq!(up.shape(), &[1, 2, 4]);
        assert_eq!(up.data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
        let back = upsample2x_backward(&up).unwrap();
        assert_eq!(back.data(), &[4.0, 8.0]);
    }

    #[test]
    fn depth_pool_halves_depth() {
        let x = Tensor::<f32>::from_vec(&[1, 2, 1, 1], vec![1.0, 3.0]).unwrap();
        let p = depth_avg_pool(&x, 2).unwrap();
        assert_eq!(p.shape(), &[1, 1, 1, 1]);
        assert_eq!(p.data(), &[2.0]);
        assert!(depth_avg_pool(&Tensor::<f32>::zeros(&[1, 3, 1, 1]), 2).is_err());
    }

    #[test]
    fn concat_then_split_restores_parts() {
        let a = Tensor::<f32>::full(&[1, 2, 2], 1.0);
        let b = Tensor::<f32>::full(&[2, 2, 2], 2.0);
        let cat = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(cat.shape(), &[3, 2, 2]);
        let parts = split_channels(&cat, &[1, 2]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
        assert!(concat_channels(&[&a, &Tensor::zeros(&[1, 3, 2])]).is_err());
    }

    #[test]
    fn sigmoid_is_in_open_unit_interval() {
        let x = Tensor::<f64>::from_vec(&[3], vec![-30.0, 0.0, 30.0]).unwrap();
        let p = sigmoid(&x);
        assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(p.data()[1], 0.5);
    }
}
