//! 2D and 3D convolution via im2col + GEMM, with reverse-mode gradients.
//!
//! Layouts (single sample, no batch axis):
//! - 3D input `[C, D, H, W]`, weight `[O, C, KD, KH, KW]`, output `[O, OD, OH, OW]`
//! - 2D input `[C, H, W]`, weight `[O, C, KH, KW]`, output `[O, OH, OW]`
//!
//! Output extent per axis is `floor((in + 2·pad − k) / stride) + 1`.

use crate::error::{NnError, Result};
use crate::tensor::{gemm, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv3dSpec {
    /// (depth, height, width)
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl Conv3dSpec {
    pub fn new(stride: [usize; 3], pad: [usize; 3]) -> Self {
        Self { stride, pad }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    /// (height, width)
    pub stride: [usize; 2],
    pub pad: [usize; 2],
}

impl Conv2dSpec {
    pub fn new(stride: usize, pad: usize) -> Self {
        Self { stride: [stride, stride], pad: [pad, pad] }
    }

    fn as_3d(self) -> Conv3dSpec {
        Conv3dSpec {
            stride: [1, self.stride[0], self.stride[1]],
            pad: [0, self.pad[0], self.pad[1]],
        }
    }
}

/// Resolved extents of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub input: [usize; 3],
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub output: [usize; 3],
    pub spec: Conv3dSpec,
}

impl ConvGeometry {
    pub fn new(
        in_channels: usize,
        input: [usize; 3],
        out_channels: usize,
        weight_channels: usize,
        kernel: [usize; 3],
        spec: Conv3dSpec,
    ) -> Result<Self> {
        if weight_channels != in_channels {
            return Err(NnError::Shape(format!(
                "conv: input has {in_channels} channels, kernel expects {weight_channels}"
            )));
        }
        let mut output = [0usize; 3];
        for axis in 0..3 {
            let stride = spec.stride[axis];
            if stride == 0 {
                return Err(NnError::Invalid("conv stride must be >= 1".into()));
            }
            let padded = input[axis] + 2 * spec.pad[axis];
            if padded < kernel[axis] || kernel[axis] == 0 {
                return Err(NnError::Shape(format!(
                    "conv: kernel {:?} larger than padded input {:?}",
                    kernel, input
                )));
            }
            output[axis] = (padded - kernel[axis]) / stride + 1;
        }
        Ok(Self { in_channels, input, out_channels, kernel, output, spec })
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    pub fn output_positions(&self) -> usize {
        self.output.iter().product()
    }

    fn input_len(&self) -> usize {
        self.in_channels * self.input.iter().product::<usize>()
    }

    /// Source coordinate of output index `o` under kernel tap `k` on `axis`,
    /// or `None` when it falls into the zero padding.
    #[inline]
    fn source(&self, axis: usize, o: usize, k: usize) -> Option<usize> {
        let pos = (o * self.spec.stride[axis] + k) as isize - self.spec.pad[axis] as isize;
        (pos >= 0 && (pos as usize) < self.input[axis]).then_some(pos as usize)
    }
}

/// Unfold input patches into a `[patch_len, positions]` matrix.
pub fn im2col<T: Real>(input: &[T], g: &ConvGeometry) -> Vec<T> {
    let n = g.output_positions();
    let [d, h, w] = g.input;
    let [kd, kh, kw] = g.kernel;
    let [od, oh, ow] = g.output;
    let mut cols = vec![T::zero(); g.patch_len() * n];
    let mut row = 0;
    for c in 0..g.in_channels {
        let plane = &input[c * d * h * w..(c + 1) * d * h * w];
        for kz in 0..kd {
            for ky in 0..kh {
                for kx in 0..kw {
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for oz in 0..od {
                        let Some(iz) = g.source(0, oz, kz) else { continue };
                        for oy in 0..oh {
                            let Some(iy) = g.source(1, oy, ky) else { continue };
                            let src_row = &plane[(iz * h + iy) * w..(iz * h + iy + 1) * w];
                            let base = (oz * oh + oy) * ow;
                            for ox in 0..ow {
                                if let Some(ix) = g.source(2, ox, kx) {
                                    dst[base + ox] = src_row[ix];
                                }
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add columns back into an input-shaped buffer.
pub fn col2im<T: Real>(cols: &[T], g: &ConvGeometry, out: &mut [T]) {
    let n = g.output_positions();
    let [d, h, w] = g.input;
    let [kd, kh, kw] = g.kernel;
    let [od, oh, ow] = g.output;
    let mut row = 0;
    for c in 0..g.in_channels {
        let plane = &mut out[c * d * h * w..(c + 1) * d * h * w];
        for kz in 0..kd {
            for ky in 0..kh {
                for kx in 0..kw {
                    let src = &cols[row * n..(row + 1) * n];
                    for oz in 0..od {
                        let Some(iz) = g.source(0, oz, kz) else { continue };
                        for oy in 0..oh {
                            let Some(iy) = g.source(1, oy, ky) else { continue };
                            let dst_row = &mut plane[(iz * h + iy) * w..(iz * h + iy + 1) * w];
                            let base = (oz * oh + oy) * ow;
                            for ox in 0..ow {
                                if let Some(ix) = g.source(2, ox, kx) {
                                    dst_row[ix] += src[base + ox];
                                }
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Gradients of a convolution with respect to all of its inputs.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Forward result that keeps the unfolded patches for the backward pass.
pub struct ConvForward<T> {
    pub output: Tensor<T>,
    pub geometry: ConvGeometry,
    cols: Vec<T>,
    input_shape: Vec<usize>,
}

impl<T: Real> ConvForward<T> {
    /// Backpropagate `grad_out` (shaped like `output`) through the convolution.
    pub fn backward(&self, weight: &Tensor<T>, grad_out: &Tensor<T>) -> Result<ConvGrads<T>> {
        grad_out.expect_shape(self.output.shape())?;
        let g = &self.geometry;
        let n = g.output_positions();
        let pk = g.patch_len();
        let o = g.out_channels;
        let mut grad_w = vec![T::zero(); o * pk];
        gemm(o, n, pk, grad_out.data(), false, &self.cols, true, T::zero(), &mut grad_w);
        let grad_b: Vec<T> = grad_out
            .data()
            .chunks_exact(n)
            .map(|row| row.iter().copied().sum())
            .collect();
        let mut grad_cols = vec![T::zero(); pk * n];
        gemm(pk, o, n, weight.data(), true, grad_out.data(), false, T::zero(), &mut grad_cols);
        let mut grad_in = vec![T::zero(); g.input_len()];
        col2im(&grad_cols, g, &mut grad_in);
        Ok(ConvGrads {
            input: Tensor::from_vec(&self.input_shape, grad_in)?,
            weight: Tensor::from_vec(weight.shape(), grad_w)?,
            bias: Tensor::from_vec(&[o], grad_b)?,
        })
    }
}

fn run_conv<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    g: ConvGeometry,
    output_shape: Vec<usize>,
) -> Result<ConvForward<T>> {
    if let Some(b) = bias {
        b.expect_shape(&[g.out_channels])?;
    }
    let cols = im2col(input.data(), &g);
    let n = g.output_positions();
    let mut out = vec![T::zero(); g.out_channels * n];
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_exact_mut(n).zip(b.data()) {
            row.fill(bv);
        }
    }
    let beta = if bias.is_some() { T::one() } else { T::zero() };
    gemm(g.out_channels, g.patch_len(), n, weight.data(), false, &cols, false, beta, &mut out);
    Ok(ConvForward {
        output: Tensor::from_vec(&output_shape, out)?,
        geometry: g,
        cols,
        input_shape: input.shape().to_vec(),
    })
}

pub fn conv3d_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: Conv3dSpec,
) -> Result<ConvForward<T>> {
    input.expect_rank(4, "conv3d input")?;
    weight.expect_rank(5, "conv3d weight")?;
    let s = input.shape();
    let k = weight.shape();
    let g = ConvGeometry::new(s[0], [s[1], s[2], s[3]], k[0], k[1], [k[2], k[3], k[4]], spec)?;
    let shape = vec![g.out_channels, g.output[0], g.output[1], g.output[2]];
    run_conv(input, weight, bias, g, shape)
}

pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: Conv2dSpec,
) -> Result<ConvForward<T>> {
    input.expect_rank(3, "conv2d input")?;
    weight.expect_rank(4, "conv2d weight")?;
    let s = input.shape();
    let k = weight.shape();
    let g = ConvGeometry::new(s[0], [1, s[1], s[2]], k[0], k[1], [1, k[2], k[3]], spec.as_3d())?;
    let shape = vec![g.out_channels, g.output[1], g.output[2]];
    run_conv(input, weight, bias, g, shape)
}

pub fn conv3d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: Conv3dSpec,
) -> Result<Tensor<T>> {
    Ok(conv3d_forward(input, weight, bias, spec)?.output)
}

pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: Conv2dSpec,
) -> Result<Tensor<T>> {
    Ok(conv2d_forward(input, weight, bias, spec)?.output)
}

pub fn conv3d_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    spec: Conv3dSpec,
) -> Result<ConvGrads<T>> {
    conv3d_forward(input, weight, None, spec)?.backward(weight, grad_out)
}

pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    spec: Conv2dSpec,
) -> Result<ConvGrads<T>> {
    conv2d_forward(input, weight, None, spec)?.backward(weight, grad_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight-line 2D correlation used as an oracle for the im2col path.
    fn naive_conv2d(input: &Tensor<f64>, weight: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
        let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (o, kh, kw) = (weight.shape()[0], weight.shape()[2], weight.shape()[3]);
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        let mut out = Tensor::zeros(&[o, oh, ow]);
        for oc in 0..o {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * stride + ky) as isize - pad as isize;
                                let ix = (x * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += input.data()[(ic * h + iy as usize) * w + ix as usize]
                                    * weight.data()[((oc * c + ic) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out.data_mut()[(oc * oh + y) * ow + x] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn unit_kernel_is_identity() {
        let input = Tensor::<f32>::from_vec(&[1, 3, 3], (1..=9).map(|v| v as f32).collect()).unwrap();
        let weight = Tensor::full(&[1, 1, 1, 1], 1.0f32);
        let out = conv2d(&input, &weight, None, Conv2dSpec::new(1, 0)).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn all_ones_2x2_kernel_sums_patch() {
        let input = Tensor::<f32>::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let weight = Tensor::full(&[1, 1, 2, 2], 1.0f32);
        let out = conv2d(&input, &weight, None, Conv2dSpec::new(1, 0)).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[10.0]);
    }

    #[test]
    fn temporal_stride_two_halves_depth() {
        let input = Tensor::<f32>::zeros(&[3, 8, 6, 6]);
        let weight = Tensor::<f32>::zeros(&[4, 3, 3, 3, 3]);
        let out = conv3d(&input, &weight, None, Conv3dSpec::new([2, 1, 1], [1, 1, 1])).unwrap();
        assert_eq!(out.shape(), &[4, 4, 6, 6]);
    }

    #[test]
    fn matches_naive_correlation_with_stride_and_padding() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let input = Tensor::<f64>::uniform(&[2, 7, 5], -1.0, 1.0, &mut rng);
        let weight = Tensor::<f64>::uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut rng);
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 0)] {
            let fast = conv2d(&input, &weight, None, Conv2dSpec::new(stride, pad)).unwrap();
            let slow = naive_conv2d(&input, &weight, stride, pad);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12, "stride {stride} pad {pad}");
            }
        }
    }

    #[test]
    fn bias_is_added_per_channel() {
        let input = Tensor::<f32>::zeros(&[1, 2, 2]);
        let weight = Tensor::<f32>::zeros(&[2, 1, 1, 1]);
        let bias = Tensor::from_vec(&[2], vec![0.5, -1.0]).unwrap();
        let out = conv2d(&input, &weight, Some(&bias), Conv2dSpec::new(1, 0)).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5, 0.5, 0.5, -1.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn rejects_channel_mismatch_and_oversized_kernels() {
        let input = Tensor::<f32>::zeros(&[2, 4, 4]);
        assert!(conv2d(&input, &Tensor::zeros(&[1, 3, 3, 3]), None, Conv2dSpec::new(1, 1)).is_err());
        assert!(conv2d(&input, &Tensor::zeros(&[1, 2, 7, 7]), None, Conv2dSpec::new(1, 0)).is_err());
        assert!(conv2d(&input, &Tensor::zeros(&[1, 2, 3, 3]), None, Conv2dSpec::new(0, 0)).is_err());
    }
}
