//! Zero-padded 2-d cross-correlation lowered to GEMM through an im2col buffer.

use super::tensor::{Real, Tensor};
use crate::error::{shape_mismatch, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernel: &[usize], stride: usize, padding: usize) -> Result<Self> {
        if input.len() != 4 || kernel.len() != 4 {
            return Err(shape_mismatch("conv2d", input, kernel));
        }
        let (b, cin, h, w) = (input[0], input[1], input[2], input[3]);
        let (cout, kcin, kh, kw) = (kernel[0], kernel[1], kernel[2], kernel[3]);
        if kcin != cin || kh != kw || kh == 0 {
            return Err(shape_mismatch("conv2d", input, kernel));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be positive".into()));
        }
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(shape_mismatch("conv2d", input, kernel));
        }
        Ok(Self {
            batch: b,
            in_channels: cin,
            out_channels: cout,
            height: h,
            width: w,
            kernel: kh,
            stride,
            padding,
            out_height: (h + 2 * padding - kh) / stride + 1,
            out_width: (w + 2 * padding - kw) / stride + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn columns(&self) -> usize {
        self.batch * self.out_height * self.out_width
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_height, self.out_width]
    }

    /// Input coordinate for output position `o` and kernel tap `t`, if inside the image.
    #[inline]
    fn source(&self, o: usize, t: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + t) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

fn im2col<T: Real>(g: &ConvGeometry, x: &[T]) -> Vec<T> {
    let n = g.columns();
    let hw_out = g.out_height * g.out_width;
    let mut cols = vec![T::zero(); g.patch_len() * n];
    for ci in 0..g.in_channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (ci * g.kernel + ky) * g.kernel + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for b in 0..g.batch {
                    let plane = &x[(b * g.in_channels + ci) * g.height * g.width..][..g.height * g.width];
                    for oy in 0..g.out_height {
                        let Some(iy) = g.source(oy, ky, g.height) else { continue };
                        let base = b * hw_out + oy * g.out_width;
                        for ox in 0..g.out_width {
                            if let Some(ix) = g.source(ox, kx, g.width) {
                                dst[base + ox] = plane[iy * g.width + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im_add<T: Real>(g: &ConvGeometry, cols: &[T], dx: &mut [T]) {
    let n = g.columns();
    let hw_out = g.out_height * g.out_width;
    for ci in 0..g.in_channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (ci * g.kernel + ky) * g.kernel + kx;
                let src = &cols[row * n..(row + 1) * n];
                for b in 0..g.batch {
                    let plane = &mut dx[(b * g.in_channels + ci) * g.height * g.width..][..g.height * g.width];
                    for oy in 0..g.out_height {
                        let Some(iy) = g.source(oy, ky, g.height) else { continue };
                        let base = b * hw_out + oy * g.out_width;
                        for ox in 0..g.out_width {
                            if let Some(ix) = g.source(ox, kx, g.width) {
                                let v = &mut plane[iy * g.width + ix];
                                *v = *v + src[base + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `[Cout, B·HW]` → `[B, Cout, HW]`.
fn unfold_batch<T: Real>(g: &ConvGeometry, mat: &[T]) -> Vec<T> {
    let hw = g.out_height * g.out_width;
    let n = g.columns();
    let mut out = vec![T::zero(); mat.len()];
    for co in 0..g.out_channels {
        for b in 0..g.batch {
            out[(b * g.out_channels + co) * hw..][..hw].copy_from_slice(&mat[co * n + b * hw..][..hw]);
        }
    }
    out
}

/// `[B, Cout, HW]` → `[Cout, B·HW]`.
fn fold_batch<T: Real>(g: &ConvGeometry, y: &[T]) -> Vec<T> {
    let hw = g.out_height * g.out_width;
    let n = g.columns();
    let mut out = vec![T::zero(); y.len()];
    for co in 0..g.out_channels {
        for b in 0..g.batch {
            out[co * n + b * hw..][..hw].copy_from_slice(&y[(b * g.out_channels + co) * hw..][..hw]);
        }
    }
    out
}

/// Forward pass. Returns the output and the im2col buffer reused by the backward pass.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, ConvGeometry, Vec<T>)> {
    let g = ConvGeometry::new(input.shape(), kernel.shape(), stride, padding)?;
    let cols = im2col(&g, input.data());
    let (m, k, n) = (g.out_channels, g.patch_len(), g.columns());
    let mut mat = vec![T::zero(); m * n];
    T::gemm(
        m,
        k,
        n,
        T::one(),
        kernel.data(),
        k as isize,
        1,
        &cols,
        n as isize,
        1,
        T::zero(),
        &mut mat,
        n as isize,
        1,
    );
    let out = Tensor::from_vec(&g.output_shape(), unfold_batch(&g, &mat))?;
    Ok((out, g, cols))
}

/// Accumulates kernel and (optionally) input gradients.
pub fn conv2d_backward<T: Real>(
    g: &ConvGeometry,
    cols: &[T],
    kernel: &[T],
    grad_out: &[T],
    grad_kernel: Option<&mut [T]>,
    grad_input: Option<&mut [T]>,
) {
    let (m, k, n) = (g.out_channels, g.patch_len(), g.columns());
    let dy = fold_batch(g, grad_out);
    if let Some(dw) = grad_kernel {
        T::gemm(m, n, k, T::one(), &dy, n as isize, 1, cols, 1, n as isize, T::one(), dw, k as isize, 1);
    }
    if let Some(dx) = grad_input {
        let mut dcols = vec![T::zero(); k * n];
        T::gemm(k, m, n, T::one(), kernel, 1, k as isize, &dy, n as isize, 1, T::zero(), &mut dcols, n as isize, 1);
        col2im_add(g, &dcols, dx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive<T: Real>(x: &Tensor<T>, w: &Tensor<T>, stride: usize, pad: usize) -> Tensor<T> {
        let g = ConvGeometry::new(x.shape(), w.shape(), stride, pad).unwrap();
        let mut out = Tensor::zeros(&g.output_shape());
        for b in 0..g.batch {
            for co in 0..g.out_channels {
                for oy in 0..g.out_height {
                    for ox in 0..g.out_width {
                        let mut acc = T::zero();
                        for ci in 0..g.in_channels {
                            for ky in 0..g.kernel {
                                for kx in 0..g.kernel {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= g.height as isize || ix >= g.width as isize {
                                        continue;
                                    }
                                    let xv = x.data()[((b * g.in_channels + ci) * g.height + iy as usize) * g.width + ix as usize];
                                    let wv = w.data()[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
                                    acc = acc + xv * wv;
                                }
                            }
                        }
                        out.data_mut()[((b * g.out_channels + co) * g.out_height + oy) * g.out_width + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_direct_loop_with_stride_and_padding() {
        let x = Tensor::<f64>::from_vec(&[2, 3, 7, 6], (0..252).map(|i| ((i * 37) % 17) as f64 - 8.0).collect()).unwrap();
        let w = Tensor::<f64>::from_vec(&[4, 3, 4, 4], (0..192).map(|i| ((i * 11) % 7) as f64 - 3.0).collect()).unwrap();
        for (stride, pad) in [(1, 0), (1, 2), (2, 1), (3, 0)] {
            let (y, _, _) = conv2d_forward(&x, &w, stride, pad).unwrap();
            assert_eq!(y, naive(&x, &w, stride, pad), "stride {stride} pad {pad}");
        }
    }

    #[test]
    fn channel_mismatch_is_reported_with_both_shapes() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]);
        let w = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        let err = conv2d_forward(&x, &w, 1, 1).unwrap_err().to_string();
        assert!(err.contains("[1, 2, 4, 4]") && err.contains("[1, 3, 3, 3]"), "{err}");
    }
}
