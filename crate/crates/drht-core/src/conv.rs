//! 2-D convolution and its transpose.
//!
//! `conv2d` is cross-correlation with "same" zero padding (`pad = k/2`) and
//! stride 1 or 2. `conv_transpose2d` is its exact linear adjoint for a fixed
//! weight, so a stride-2 convolution halves the spatial size and the matching
//! transpose doubles it again. Both are lowered per sample to an
//! im2col/col2im pass plus a matrix product, which keeps all the arithmetic
//! inside the three kernels in [`crate::linalg`].
//!
//! Weight layouts follow the usual convention: `[Cout, Cin, k, k]` for the
//! convolution and `[Cin, Cout, k, k]` for the transpose (its `Cin` is the
//! number of input channels of the transpose itself).

use alloc::format;
use alloc::vec::Vec;
use alloc::vec;


use crate::error::Error;
use crate::linalg::{matmul, matmul_acc_a_bt, matmul_at_b};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

/// Geometry of one convolution: the image side (`h`,`w`, `channels`) and the
/// patch side (`out_h`,`out_w` positions of a `k`×`k` window).
struct Geometry {
    channels: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn new(channels: usize, h: usize, w: usize, k: usize, stride: usize) -> Self {
        let pad = k / 2;
        let out_h = (h + 2 * pad - k) / stride + 1;
        let out_w = (w + 2 * pad - k) / stride + 1;
        Self {
            channels,
            h,
            w,
            k,
            stride,
            pad,
            out_h,
            out_w,
        }
    }

    fn col_rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Gather `k`×`k` windows of one CHW sample into a `[C·k² × outH·outW]`
/// matrix, zero-filling where the window hangs over the padding.
fn im2col<E: Scalar>(src: &[E], g: &Geometry, col: &mut [E]) {
    debug_assert_eq!(src.len(), g.channels * g.h * g.w);
    debug_assert_eq!(col.len(), g.col_rows() * g.col_cols());
    let spatial = g.col_cols();
    let mut row = 0;
    for ci in 0..g.channels {
        let plane = &src[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for kh in 0..g.k {
            for kw in 0..g.k {
                let col_row = &mut col[row * spatial..(row + 1) * spatial];
                let dw = kw as isize - g.pad as isize;
                let (wo_lo, wo_hi) = valid_range(dw, g.w, g.stride, g.out_w);
                for ho in 0..g.out_h {
                    let ih = (ho * g.stride + kh) as isize - g.pad as isize;
                    let dst = &mut col_row[ho * g.out_w..(ho + 1) * g.out_w];
                    if ih < 0 || ih >= g.h as isize || wo_lo > wo_hi {
                        dst.fill(E::ZERO);
                        continue;
                    }
                    let src_row = &plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    dst[..wo_lo].fill(E::ZERO);
                    dst[wo_hi + 1..].fill(E::ZERO);
                    if g.stride == 1 {
                        let iw0 = (wo_lo as isize + dw) as usize;
                        dst[wo_lo..=wo_hi].copy_from_slice(&src_row[iw0..iw0 + wo_hi - wo_lo + 1]);
                    } else {
                        for wo in wo_lo..=wo_hi {
                            dst[wo] = src_row[(wo as isize * g.stride as isize + dw) as usize];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add the column matrix back onto the image.
fn col2im<E: Scalar>(col: &[E], g: &Geometry, dst: &mut [E]) {
    debug_assert_eq!(dst.len(), g.channels * g.h * g.w);
    debug_assert_eq!(col.len(), g.col_rows() * g.col_cols());
    dst.fill(E::ZERO);
    let spatial = g.col_cols();
    let mut row = 0;
    for ci in 0..g.channels {
        let plane = &mut dst[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for kh in 0..g.k {
            for kw in 0..g.k {
                let col_row = &col[row * spatial..(row + 1) * spatial];
                let dw = kw as isize - g.pad as isize;
                let (wo_lo, wo_hi) = valid_range(dw, g.w, g.stride, g.out_w);
                for ho in 0..g.out_h {
                    let ih = (ho * g.stride + kh) as isize - g.pad as isize;
                    if ih < 0 || ih >= g.h as isize || wo_lo > wo_hi {
                        continue;
                    }
                    let src = &col_row[ho * g.out_w..(ho + 1) * g.out_w];
                    let dst_row = &mut plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    for wo in wo_lo..=wo_hi {
                        dst_row[(wo as isize * g.stride as isize + dw) as usize] += src[wo];
                    }
                }
                row += 1;
            }
        }
    }
}

/// Inclusive range of output positions whose sampled column `wo·stride + dw`
/// lands inside `[0, w)`; returns `(1, 0)` when empty.
fn valid_range(dw: isize, w: usize, stride: usize, out_w: usize) -> (usize, usize) {
    let lo = if dw >= 0 {
        0
    } else {
        ((-dw) as usize).div_ceil(stride)
    };
    let max_i = w as isize - 1 - dw;
    if max_i < 0 || lo >= out_w {
        return (1, 0);
    }
    let hi = (max_i as usize / stride).min(out_w - 1);
    if lo > hi {
        (1, 0)
    } else {
        (lo, hi)
    }
}

/// Direct per-tap accumulation for stride-1 convolutions. The im2col
/// lowering would materialize a k²-times duplicated copy of the input; at
/// stride 1 every kernel tap is just a shifted row-axpy, and the whole
/// working set (input planes, output planes, weights) stays cache resident.
fn conv1_forward_direct<E: Scalar>(
    src: &[E],
    weight: &[E],
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    k: usize,
    dst: &mut [E],
) {
    let pad = k / 2;
    let plane = h * w;
    for co in 0..cout {
        let out_plane = &mut dst[co * plane..(co + 1) * plane];
        for ci in 0..cin {
            let in_plane = &src[ci * plane..(ci + 1) * plane];
            let w_base = (co * cin + ci) * k * k;
            for kh in 0..k {
                for kw in 0..k {
                    let tap = weight[w_base + kh * k + kw];
                    let dw = kw as isize - pad as isize;
                    let (lo, hi) = valid_range(dw, w, 1, w);
                    if lo > hi {
                        continue;
                    }
                    for ho in 0..h {
                        let ih = (ho + kh) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let src_row = &in_plane[ih as usize * w..(ih as usize + 1) * w];
                        let out_row = &mut out_plane[ho * w + lo..ho * w + hi + 1];
                        let iw0 = (lo as isize + dw) as usize;
                        for (o, &v) in out_row.iter_mut().zip(&src_row[iw0..iw0 + hi - lo + 1]) {
                            *o += tap * v;
                        }
                    }
                }
            }
        }
    }
}

/// Per-tap weight gradient for stride-1 convolutions: each tap is the dot
/// product of the shifted input window with the output gradient plane,
/// accumulated on explicit lanes so the reduction vectorizes.
fn conv1_weight_grad_direct<E: Scalar>(
    src: &[E],
    grad_out: &[E],
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    k: usize,
    grad_weight: &mut [E],
) {
    const LANES: usize = 8;
    let pad = k / 2;
    let plane = h * w;
    for co in 0..cout {
        let dy_plane = &grad_out[co * plane..(co + 1) * plane];
        for ci in 0..cin {
            let in_plane = &src[ci * plane..(ci + 1) * plane];
            let w_base = (co * cin + ci) * k * k;
            for kh in 0..k {
                for kw in 0..k {
                    let dw = kw as isize - pad as isize;
                    let (lo, hi) = valid_range(dw, w, 1, w);
                    if lo > hi {
                        continue;
                    }
                    let mut lanes = [E::ZERO; LANES];
                    let mut tail = E::ZERO;
                    for ho in 0..h {
                        let ih = (ho + kh) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let iw0 = (lo as isize + dw) as usize;
                        let src_row = &in_plane[ih as usize * w + iw0..ih as usize * w + iw0 + hi - lo + 1];
                        let dy_row = &dy_plane[ho * w + lo..ho * w + hi + 1];
                        let mut s_chunks = src_row.chunks_exact(LANES);
                        let mut d_chunks = dy_row.chunks_exact(LANES);
                        for (sv, dv) in (&mut s_chunks).zip(&mut d_chunks) {
                            for l in 0..LANES {
                                lanes[l] += sv[l] * dv[l];
                            }
                        }
                        for (&sv, &dv) in s_chunks.remainder().iter().zip(d_chunks.remainder()) {
                            tail += sv * dv;
                        }
                    }
                    let mut acc = tail;
                    for &lane in &lanes {
                        acc += lane;
                    }
                    grad_weight[w_base + kh * k + kw] += acc;
                }
            }
        }
    }
}

fn check_conv_args<E: Scalar>(
    context: &'static str,
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    in_channel_axis: usize,
    out_channels: usize,
    stride: usize,
) -> Result<()> {
    if input.shape().len() != 4 {
        return Err(Error::ShapeMismatch {
            context,
            expected: vec![0, 0, 0, 0],
            found: input.shape().to_vec(),
        });
    }
    if weight.shape().len() != 4 {
        return Err(Error::ShapeMismatch {
            context,
            expected: vec![0, 0, 0, 0],
            found: weight.shape().to_vec(),
        });
    }
    let k = weight.shape()[2];
    if weight.shape()[3] != k || k % 2 == 0 {
        return Err(Error::InvalidArgument {
            context,
            message: format!("kernel must be square with odd size, got {:?}", &weight.shape()[2..]),
        });
    }
    if stride != 1 && stride != 2 {
        return Err(Error::InvalidArgument {
            context,
            message: format!("stride must be 1 or 2, got {stride}"),
        });
    }
    if weight.shape()[in_channel_axis] != input.shape()[1] {
        return Err(Error::ChannelMismatch {
            context,
            expected: weight.shape()[in_channel_axis],
            found: input.shape()[1],
        });
    }
    if let Some(b) = bias {
        if b.shape() != [out_channels] {
            return Err(Error::ShapeMismatch {
                context,
                expected: vec![out_channels],
                found: b.shape().to_vec(),
            });
        }
    }
    Ok(())
}

fn fill_bias<E: Scalar>(out_sample: &mut [E], bias: Option<&Tensor<E>>, plane: usize) {
    if let Some(b) = bias {
        for (co, &bv) in b.data().iter().enumerate() {
            out_sample[co * plane..(co + 1) * plane].fill(bv);
        }
    }
}

/// Cross-correlation of `input [N,Cin,H,W]` with `weight [Cout,Cin,k,k]`.
pub fn conv2d_forward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    stride: usize,
) -> Result<Tensor<E>> {
    let cout = weight.shape()[0];
    check_conv_args("conv2d", input, weight, bias, 1, cout, stride)?;
    let (n, cin, h, w) = dims4(input);
    let k = weight.shape()[2];
    if stride == 1 {
        let plane = h * w;
        let mut out = Tensor::zeros(&[n, cout, h, w]);
        for s in 0..n {
            let out_sample = &mut out.data_mut()[s * cout * plane..(s + 1) * cout * plane];
            fill_bias(out_sample, bias, plane);
            conv1_forward_direct(
                &input.data()[s * cin * plane..(s + 1) * cin * plane],
                weight.data(),
                cin,
                cout,
                h,
                w,
                k,
                out_sample,
            );
        }
        return Ok(out);
    }
    let g = Geometry::new(cin, h, w, k, stride);
    let spatial = g.col_cols();
    let mut out = Tensor::zeros(&[n, cout, g.out_h, g.out_w]);
    let mut col = vec![E::ZERO; g.col_rows() * spatial];
    for s in 0..n {
        im2col(&input.data()[s * cin * h * w..(s + 1) * cin * h * w], &g, &mut col);
        let out_sample = &mut out.data_mut()[s * cout * spatial..(s + 1) * cout * spatial];
        matmul(weight.data(), &col, cout, g.col_rows(), spatial, out_sample);
        if let Some(b) = bias {
            for (co, &bv) in b.data().iter().enumerate() {
                for v in &mut out_sample[co * spatial..(co + 1) * spatial] {
                    *v += bv;
                }
            }
        }
    }
    Ok(out)
}

/// Kernel with swapped channel axes and flipped taps:
/// `out[(b·a_count + a)·k² + (k−1−kh)·k + (k−1−kw)] = w[(a·b_count + b)·k² + kh·k + kw]`.
fn swap_flip_kernel<E: Scalar>(weight: &[E], a_count: usize, b_count: usize, k: usize) -> Vec<E> {
    let mut out = vec![E::ZERO; weight.len()];
    for a in 0..a_count {
        for b in 0..b_count {
            for kh in 0..k {
                for kw in 0..k {
                    out[((b * a_count + a) * k + (k - 1 - kh)) * k + (k - 1 - kw)] =
                        weight[((a * b_count + b) * k + kh) * k + kw];
                }
            }
        }
    }
    out
}

pub struct ConvGrads<E> {
    pub input: Tensor<E>,
    pub weight: Tensor<E>,
    pub bias: Tensor<E>,
}

/// Gradients of [`conv2d_forward`] w.r.t. input, weight and bias.
pub fn conv2d_backward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    stride: usize,
    grad_out: &Tensor<E>,
) -> Result<ConvGrads<E>> {
    let cout = weight.shape()[0];
    check_conv_args("conv2d backward", input, weight, None, 1, cout, stride)?;
    let (n, cin, h, w) = dims4(input);
    let g = Geometry::new(cin, h, w, weight.shape()[2], stride);
    let spatial = g.col_cols();
    if grad_out.shape() != [n, cout, g.out_h, g.out_w] {
        return Err(Error::ShapeMismatch {
            context: "conv2d backward",
            expected: vec![n, cout, g.out_h, g.out_w],
            found: grad_out.shape().to_vec(),
        });
    }
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_weight = Tensor::zeros(weight.shape());
    let mut grad_bias = Tensor::zeros(&[cout]);
    if stride == 1 {
        let plane = h * w;
        let k = weight.shape()[2];
        // dX is the cross-correlation of dY with the swap-flipped kernel.
        let flipped = swap_flip_kernel(weight.data(), cout, cin, k);
        for s in 0..n {
            let dy = &grad_out.data()[s * cout * plane..(s + 1) * cout * plane];
            let x = &input.data()[s * cin * plane..(s + 1) * cin * plane];
            conv1_forward_direct(
                dy,
                &flipped,
                cout,
                cin,
                h,
                w,
                k,
                &mut grad_input.data_mut()[s * cin * plane..(s + 1) * cin * plane],
            );
            conv1_weight_grad_direct(x, dy, cin, cout, h, w, k, grad_weight.data_mut());
            for (co, gb) in grad_bias.data_mut().iter_mut().enumerate() {
                for &v in &dy[co * plane..(co + 1) * plane] {
                    *gb += v;
                }
            }
        }
        return Ok(ConvGrads {
            input: grad_input,
            weight: grad_weight,
            bias: grad_bias,
        });
    }
    let mut col = vec![E::ZERO; g.col_rows() * spatial];
    let mut dcol = vec![E::ZERO; g.col_rows() * spatial];
    for s in 0..n {
        let dy = &grad_out.data()[s * cout * spatial..(s + 1) * cout * spatial];
        im2col(&input.data()[s * cin * h * w..(s + 1) * cin * h * w], &g, &mut col);
        matmul_acc_a_bt(dy, &col, cout, spatial, g.col_rows(), grad_weight.data_mut());
        matmul_at_b(weight.data(), dy, cout, g.col_rows(), spatial, &mut dcol);
        col2im(
            &dcol,
            &g,
            &mut grad_input.data_mut()[s * cin * h * w..(s + 1) * cin * h * w],
        );
        for (co, gb) in grad_bias.data_mut().iter_mut().enumerate() {
            for &v in &dy[co * spatial..(co + 1) * spatial] {
                *gb += v;
            }
        }
    }
    Ok(ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: grad_bias,
    })
}

/// Transposed convolution of `input [N,Cin,H,W]` with `weight [Cin,Cout,k,k]`,
/// producing `[N,Cout,H·stride,W·stride]`. For a fixed weight this is the
/// linear adjoint of [`conv2d_forward`] at the same stride and padding.
pub fn conv_transpose2d_forward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    stride: usize,
) -> Result<Tensor<E>> {
    let cout = weight.shape()[1];
    check_conv_args("conv2d_transpose", input, weight, bias, 0, cout, stride)?;
    let (n, cin, h, w) = dims4(input);
    let k = weight.shape()[2];
    if stride == 1 {
        // At stride 1 the transpose is the cross-correlation with the
        // swap-flipped kernel.
        let plane = h * w;
        let flipped = swap_flip_kernel(weight.data(), cin, cout, k);
        let mut out = Tensor::zeros(&[n, cout, h, w]);
        for s in 0..n {
            let out_sample = &mut out.data_mut()[s * cout * plane..(s + 1) * cout * plane];
            fill_bias(out_sample, bias, plane);
            conv1_forward_direct(
                &input.data()[s * cin * plane..(s + 1) * cin * plane],
                &flipped,
                cin,
                cout,
                h,
                w,
                k,
                out_sample,
            );
        }
        return Ok(out);
    }
    // The transpose writes into an image of stride-times the input size; its
    // geometry is that of the convolution this op is the adjoint of.
    let g = Geometry::new(cout, h * stride, w * stride, k, stride);
    debug_assert_eq!((g.out_h, g.out_w), (h, w));
    let spatial = h * w;
    let out_plane = g.h * g.w;
    let mut out = Tensor::zeros(&[n, cout, g.h, g.w]);
    let mut dcol = vec![E::ZERO; g.col_rows() * spatial];
    for s in 0..n {
        let src = &input.data()[s * cin * spatial..(s + 1) * cin * spatial];
        matmul_at_b(weight.data(), src, cin, g.col_rows(), spatial, &mut dcol);
        let out_sample = &mut out.data_mut()[s * cout * out_plane..(s + 1) * cout * out_plane];
        col2im(&dcol, &g, out_sample);
        if let Some(b) = bias {
            for (co, &bv) in b.data().iter().enumerate() {
                for v in &mut out_sample[co * out_plane..(co + 1) * out_plane] {
                    *v += bv;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv_transpose2d_forward`].
pub fn conv_transpose2d_backward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    stride: usize,
    grad_out: &Tensor<E>,
) -> Result<ConvGrads<E>> {
    let cout = weight.shape()[1];
    check_conv_args("conv2d_transpose backward", input, weight, None, 0, cout, stride)?;
    let (n, cin, h, w) = dims4(input);
    let k = weight.shape()[2];
    let g = Geometry::new(cout, h * stride, w * stride, k, stride);
    let spatial = h * w;
    let out_plane = g.h * g.w;
    if grad_out.shape() != [n, cout, g.h, g.w] {
        return Err(Error::ShapeMismatch {
            context: "conv2d_transpose backward",
            expected: vec![n, cout, g.h, g.w],
            found: grad_out.shape().to_vec(),
        });
    }
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_weight = Tensor::zeros(weight.shape());
    let mut grad_bias = Tensor::zeros(&[cout]);
    if stride == 1 {
        let plane = h * w;
        // dInput is the plain cross-correlation of dY with the kernel read
        // in its stored [Cin,Cout] orientation; the weight gradient reuses
        // the per-tap reduction with the tap axes flipped.
        let mut scratch = vec![E::ZERO; weight.len()];
        for s in 0..n {
            let dy = &grad_out.data()[s * cout * plane..(s + 1) * cout * plane];
            let src = &input.data()[s * cin * plane..(s + 1) * cin * plane];
            conv1_forward_direct(
                dy,
                weight.data(),
                cout,
                cin,
                h,
                w,
                k,
                &mut grad_input.data_mut()[s * cin * plane..(s + 1) * cin * plane],
            );
            conv1_weight_grad_direct(src, dy, cin, cout, h, w, k, &mut scratch);
            for (co, gb) in grad_bias.data_mut().iter_mut().enumerate() {
                for &v in &dy[co * plane..(co + 1) * plane] {
                    *gb += v;
                }
            }
        }
        let gw = grad_weight.data_mut();
        for ci in 0..cin {
            for co in 0..cout {
                for kh in 0..k {
                    for kw in 0..k {
                        gw[((ci * cout + co) * k + kh) * k + kw] +=
                            scratch[((co * cin + ci) * k + (k - 1 - kh)) * k + (k - 1 - kw)];
                    }
                }
            }
        }
        return Ok(ConvGrads {
            input: grad_input,
            weight: grad_weight,
            bias: grad_bias,
        });
    }
    let mut col = vec![E::ZERO; g.col_rows() * spatial];
    for s in 0..n {
        let dy = &grad_out.data()[s * cout * out_plane..(s + 1) * cout * out_plane];
        im2col(dy, &g, &mut col);
        // dInput = W · col(dY), dW += input · col(dY)ᵀ — the mirror image of
        // the convolution backward with input and output swapped.
        let src = &input.data()[s * cin * spatial..(s + 1) * cin * spatial];
        matmul(
            weight.data(),
            &col,
            cin,
            g.col_rows(),
            spatial,
            &mut grad_input.data_mut()[s * cin * spatial..(s + 1) * cin * spatial],
        );
        matmul_acc_a_bt(src, &col, cin, spatial, g.col_rows(), grad_weight.data_mut());
        for (co, gb) in grad_bias.data_mut().iter_mut().enumerate() {
            for &v in &dy[co * out_plane..(co + 1) * out_plane] {
                *gb += v;
            }
        }
    }
    Ok(ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: grad_bias,
    })
}

fn dims4<E: Scalar>(t: &Tensor<E>) -> (usize, usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2], s[3])
}
