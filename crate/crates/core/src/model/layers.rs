//! Forward and backward kernels for the layer types of the network.
//!
//! Weights are flat slices; shapes are carried alongside.

use super::tensor::Tensor;
use crate::scalar::Scalar;

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Valid (unpadded) stride-1 convolution, weight layout `[out][in][kernel]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel
    }

    pub fn out_len(&self, len: usize) -> usize {
        len + 1 - self.kernel
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel
    }
}

pub fn conv1d_forward<T: Scalar>(x: &Tensor<T>, w: &[T], bias: &[T], s: ConvShape) -> Tensor<T> {
    debug_assert_eq!(x.channels, s.in_channels);
    let lo = s.out_len(x.len);
    let mut out = Tensor::zeros(x.batch, s.out_channels, lo);
    for b in 0..x.batch {
        for o in 0..s.out_channels {
            let row = out.row_mut(b, o);
            row.fill(bias[o]);
            for i in 0..s.in_channels {
                let xr = x.row(b, i);
                let wr = &w[(o * s.in_channels + i) * s.kernel..][..s.kernel];
                for (k, &wk) in wr.iter().enumerate() {
                    axpy(wk, &xr[k..k + lo], row);
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the input gradient when requested.
pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &[T],
    dout: &Tensor<T>,
    s: ConvShape,
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Option<Tensor<T>> {
    let lo = dout.len;
    let mut dx = need_dx.then(|| Tensor::zeros(x.batch, x.channels, x.len));
    for b in 0..x.batch {
        for (o, dbo) in db.iter_mut().enumerate().take(s.out_channels) {
            let g = dout.row(b, o);
            *dbo += g.iter().copied().sum::<T>();
            for i in 0..s.in_channels {
                let xr = x.row(b, i);
                let base = (o * s.in_channels + i) * s.kernel;
                for k in 0..s.kernel {
                    dw[base + k] += dot(g, &xr[k..k + lo]);
                }
                if let Some(dx) = dx.as_mut() {
                    let dxr = dx.row_mut(b, i);
                    for k in 0..s.kernel {
                        axpy(w[base + k], g, &mut dxr[k..k + lo]);
                    }
                }
            }
        }
    }
    dx
}

/// Transposed convolution, weight layout `[in][out][kernel]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvTransposeShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvTransposeShape {
    pub fn weight_len(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel
    }

    pub fn out_len(&self, len: usize) -> usize {
        (len - 1) * self.stride + self.kernel
    }

    /// Input taps contributing to one output sample.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.div_ceil(self.stride)
    }
}

pub fn conv_transpose_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &[T],
    bias: &[T],
    s: ConvTransposeShape,
) -> Tensor<T> {
    let lo = s.out_len(x.len);
    let mut out = Tensor::zeros(x.batch, s.out_channels, lo);
    for b in 0..x.batch {
        for (o, &bo) in bias.iter().enumerate().take(s.out_channels) {
            out.row_mut(b, o).fill(bo);
        }
        for i in 0..s.in_channels {
            let xr = x.row(b, i);
            for o in 0..s.out_channels {
                let wr = &w[(i * s.out_channels + o) * s.kernel..][..s.kernel];
                let row = out.row_mut(b, o);
                for (t, &xv) in xr.iter().enumerate() {
                    let seg = &mut row[t * s.stride..t * s.stride + s.kernel];
                    axpy(xv, wr, seg);
                }
            }
        }
    }
    out
}

pub fn conv_transpose_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &[T],
    dout: &Tensor<T>,
    s: ConvTransposeShape,
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Option<Tensor<T>> {
    let mut dx = need_dx.then(|| Tensor::zeros(x.batch, x.channels, x.len));
    for b in 0..x.batch {
        for (o, dbo) in db.iter_mut().enumerate().take(s.out_channels) {
            *dbo += dout.row(b, o).iter().copied().sum::<T>();
        }
        for i in 0..s.in_channels {
            let xr = x.row(b, i);
            for o in 0..s.out_channels {
                let base = (i * s.out_channels + o) * s.kernel;
                let g = dout.row(b, o);
                for (t, &xv) in xr.iter().enumerate() {
                    let seg = &g[t * s.stride..t * s.stride + s.kernel];
                    axpy(xv, seg, &mut dw[base..base + s.kernel]);
                }
                if let Some(dx) = dx.as_mut() {
                    let wr = &w[base..base + s.kernel];
                    let dxr = dx.row_mut(b, i);
                    for (t, d) in dxr.iter_mut().enumerate() {
                        *d += dot(wr, &g[t * s.stride..t * s.stride + s.kernel]);
                    }
                }
            }
        }
    }
    dx
}

/// Normalized activations and per-channel inverse standard deviations.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub x_hat: Tensor<T>,
    pub inv_std: Vec<T>,
    /// Whether the statistics came from the batch (and so depend on the input).
    pub batch_stats: bool,
}

/// Per-channel batch mean and biased variance over (batch, time).
pub fn channel_moments<T: Scalar>(x: &Tensor<T>) -> (Vec<T>, Vec<T>) {
    let m = T::from_usize_lossy(x.batch * x.len);
    let mut mean = vec![T::zero(); x.channels];
    let mut var = vec![T::zero(); x.channels];
    for c in 0..x.channels {
        let mut s = T::zero();
        for b in 0..x.batch {
            s += x.row(b, c).iter().copied().sum::<T>();
        }
        let mu = s / m;
        let mut v = T::zero();
        for b in 0..x.batch {
            v += x.row(b, c).iter().map(|&z| (z - mu) * (z - mu)).sum::<T>();
        }
        mean[c] = mu;
        var[c] = v / m;
    }
    (mean, var)
}

pub fn batchnorm_forward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    mean: &[T],
    var: &[T],
    eps: T,
    batch_stats: bool,
) -> (Tensor<T>, BatchNormCache<T>) {
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut x_hat = Tensor::zeros(x.batch, x.channels, x.len);
    let mut y = Tensor::zeros(x.batch, x.channels, x.len);
    for b in 0..x.batch {
        for c in 0..x.channels {
            let (mu, is) = (mean[c], inv_std[c]);
            let (g, bt) = (gamma[c], beta[c]);
            let xr = x.row(b, c);
            for (h, &z) in x_hat.row_mut(b, c).iter_mut().zip(xr) {
                *h = (z - mu) * is;
            }
            for (yv, &h) in y.row_mut(b, c).iter_mut().zip(x_hat.row(b, c)) {
                *yv = g * h + bt;
            }
        }
    }
    (
        y,
        BatchNormCache {
            x_hat,
            inv_std,
            batch_stats,
        },
    )
}

pub fn batchnorm_backward<T: Scalar>(
    dy: &Tensor<T>,
    gamma: &[T],
    cache: &BatchNormCache<T>,
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Tensor<T> {
    let m = T::from_usize_lossy(dy.batch * dy.len);
    let mut dx = Tensor::zeros(dy.batch, dy.channels, dy.len);
    for c in 0..dy.channels {
        let mut sum_dy = T::zero();
        let mut sum_dy_xh = T::zero();
        for b in 0..dy.batch {
            let g = dy.row(b, c);
            sum_dy += g.iter().copied().sum::<T>();
            sum_dy_xh += dot(g, cache.x_hat.row(b, c));
        }
        dgamma[c] += sum_dy_xh;
        dbeta[c] += sum_dy;
        let scale = gamma[c] * cache.inv_std[c];
        for b in 0..dy.batch {
            let g = dy.row(b, c);
            let xh = cache.x_hat.row(b, c);
            let out = dx.row_mut(b, c);
            if cache.batch_stats {
                for t in 0..g.len() {
                    out[t] = scale * (g[t] - sum_dy / m - xh[t] * sum_dy_xh / m);
                }
            } else {
                for t in 0..g.len() {
                    out[t] = scale * g[t];
                }
            }
        }
    }
    dx
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    for v in y.data.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    y
}

/// Gradient through ReLU given its output.
pub fn relu_backward<T: Scalar>(dy: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data.iter_mut().zip(&y.data) {
        if v <= T::zero() {
            *d = T::zero();
        }
    }
    dx
}

/// Max pooling with kernel 2 and stride 2; returns the winning input index per output.
pub fn maxpool2_forward<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let lo = x.len / 2;
    let mut y = Tensor::zeros(x.batch, x.channels, lo);
    let mut arg = Vec::with_capacity(x.batch * x.channels * lo);
    for b in 0..x.batch {
        for c in 0..x.channels {
            let xr = x.row(b, c);
            let yr = y.row_mut(b, c);
            for t in 0..lo {
                let (a, bb) = (xr[2 * t], xr[2 * t + 1]);
                if bb > a {
                    yr[t] = bb;
                    arg.push((2 * t + 1) as u32);
                } else {
                    yr[t] = a;
                    arg.push((2 * t) as u32);
                }
            }
        }
    }
    (y, arg)
}

pub fn maxpool2_backward<T: Scalar>(dy: &Tensor<T>, arg: &[u32], in_len: usize) -> Tensor<T> {
    let mut dx = Tensor::zeros(dy.batch, dy.channels, in_len);
    let mut k = 0;
    for b in 0..dy.batch {
        for c in 0..dy.channels {
            let g = dy.row(b, c);
            let out = dx.row_mut(b, c);
            for &gv in g {
                out[arg[k] as usize] += gv;
                k += 1;
            }
        }
    }
    dx
}

/// Average pooling with equal kernel and stride.
pub fn avgpool_forward<T: Scalar>(x: &Tensor<T>, k: usize) -> Tensor<T> {
    let lo = x.len / k;
    let kt = T::from_usize_lossy(k);
    let mut y = Tensor::zeros(x.batch, x.channels, lo);
    for b in 0..x.batch {
        for c in 0..x.channels {
            let xr = x.row(b, c);
            for (t, v) in y.row_mut(b, c).iter_mut().enumerate() {
                *v = xr[t * k..(t + 1) * k].iter().copied().sum::<T>() / kt;
            }
        }
    }
    y
}

pub fn avgpool_backward<T: Scalar>(dy: &Tensor<T>, k: usize, in_len: usize) -> Tensor<T> {
    let kt = T::from_usize_lossy(k);
    let mut dx = Tensor::zeros(dy.batch, dy.channels, in_len);
    for b in 0..dy.batch {
        for c in 0..dy.channels {
            let g = dy.row(b, c);
            let out = dx.row_mut(b, c);
            for (t, &gv) in g.iter().enumerate() {
                out[t * k..(t + 1) * k]
                    .iter_mut()
                    .for_each(|d| *d += gv / kt);
            }
        }
    }
    dx
}

/// Nearest-neighbour upsampling: output `t` copies input `t * len / out_len`.
pub fn upsample_forward<T: Scalar>(x: &Tensor<T>, out_len: usize) -> Tensor<T> {
    let mut y = Tensor::zeros(x.batch, x.channels, out_len);
    for b in 0..x.batch {
        for c in 0..x.channels {
            let xr = x.row(b, c);
            for (t, v) in y.row_mut(b, c).iter_mut().enumerate() {
                *v = xr[t * x.len / out_len];
            }
        }
    }
    y
}

pub fn upsample_backward<T: Scalar>(dy: &Tensor<T>, in_len: usize) -> Tensor<T> {
    let mut dx = Tensor::zeros(dy.batch, dy.channels, in_len);
    for b in 0..dy.batch {
        for c in 0..dy.channels {
            let g = dy.row(b, c);
            let out = dx.row_mut(b, c);
            for (t, &gv) in g.iter().enumerate() {
                out[t * in_len / dy.len] += gv;
            }
        }
    }
    dx
}

/// Softmax across channels at each time step.
pub fn softmax_channels<T: Scalar>(z: &Tensor<T>) -> Tensor<T> {
    let mut p = z.clone();
    for b in 0..z.batch {
        for t in 0..z.len {
            let mut mx = T::neg_infinity();
            for c in 0..z.channels {
                mx = mx.max(z.row(b, c)[t]);
            }
            let mut s = T::zero();
            for c in 0..z.channels {
                let e = (z.row(b, c)[t] - mx).exp();
                p.row_mut(b, c)[t] = e;
                s += e;
            }
            for c in 0..z.channels {
                p.row_mut(b, c)[t] /= s;
            }
        }
    }
    p
}

/// Gradient through softmax given its output `p` and the upstream gradient `dp`.
pub fn softmax_backward<T: Scalar>(dp: &Tensor<T>, p: &Tensor<T>) -> Tensor<T> {
    let mut dz = Tensor::zeros(p.batch, p.channels, p.len);
    for b in 0..p.batch {
        for t in 0..p.len {
            let mut s = T::zero();
            for c in 0..p.channels {
                s += dp.row(b, c)[t] * p.row(b, c)[t];
            }
            for c in 0..p.channels {
                dz.row_mut(b, c)[t] = p.row(b, c)[t] * (dp.row(b, c)[t] - s);
            }
        }
    }
    dz
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(batch: usize, ch: usize, data: Vec<f64>) -> Tensor<f64> {
        let len = data.len() / (batch * ch);
        Tensor::from_vec(batch, ch, len, data).unwrap()
    }

    #[test]
    fn conv_valid_lengths_and_values() {
        let x = t(1, 1, vec![1., 2., 3., 4.]);
        let s = ConvShape {
            in_channels: 1,
            out_channels: 1,
            kernel: 3,
        };
        let y = conv1d_forward(&x, &[1., 0., -1.], &[0.5], s);
        assert_eq!(y.data, vec![-1.5, -1.5]);
    }

    #[test]
    fn conv_transpose_tiles_without_overlap() {
        let x = t(1, 1, vec![1., 2.]);
        let s = ConvTransposeShape {
            in_channels: 1,
            out_channels: 1,
            kernel: 2,
            stride: 2,
        };
        let y = conv_transpose_forward(&x, &[1., 10.], &[0.0], s);
        assert_eq!(y.data, vec![1., 10., 2., 20.]);
        assert_eq!(s.out_len(60), 120);
    }

    #[test]
    fn maxpool_and_avgpool() {
        let x = t(1, 1, vec![1., 3., 2., 2., 5., 0.]);
        let (y, arg) = maxpool2_forward(&x);
        assert_eq!(y.data, vec![3., 2., 5.]);
        assert_eq!(arg, vec![1, 2, 4]);
        let dx = maxpool2_backward(&t(1, 1, vec![1., 1., 1.]), &arg, 6);
        assert_eq!(dx.data, vec![0., 1., 1., 0., 1., 0.]);
        let a = avgpool_forward(&x, 3);
        assert_eq!(a.data, vec![2., 7. / 3.]);
    }

    #[test]
    fn upsample_nearest() {
        let x = t(1, 1, vec![1., 2.]);
        let y = upsample_forward(&x, 6);
        assert_eq!(y.data, vec![1., 1., 1., 2., 2., 2.]);
        assert_eq!(upsample_backward(&y, 2).data, vec![3., 6.]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = t(1, 2, vec![0., 100., -3., 1000.]);
        let p = softmax_channels(&z);
        for i in 0..2 {
            assert!((p.row(0, 0)[i] + p.row(0, 1)[i] - 1.0).abs() < 1e-12);
        }
        assert!(p.is_finite());
    }

    #[test]
    fn batchnorm_train_normalizes() {
        let x = t(2, 1, vec![1., 2., 3., 4.]);
        let (mean, var) = channel_moments(&x);
        assert_eq!(mean, vec![2.5]);
        assert_eq!(var, vec![1.25]);
        let (y, _) = batchnorm_forward(&x, &[1.0], &[0.0], &mean, &var, 0.0, true);
        let (m2, v2) = channel_moments(&y);
        assert!(m2[0].abs() < 1e-12 && (v2[0] - 1.0).abs() < 1e-12);
    }
}
