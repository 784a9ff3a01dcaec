use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense batch of 1-D multichannel signals laid out as `[batch][channel][time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub batch: usize,
    pub channels: usize,
    pub len: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Self {
            batch,
            channels,
            len,
            data: vec![T::zero(); batch * channels * len],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, len: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != batch * channels * len {
            return Err(Error::input(format!(
                "tensor data has {} entries, shape {batch}x{channels}x{len} needs {}",
                data.len(),
                batch * channels * len
            )));
        }
        Ok(Self {
            batch,
            channels,
            len,
            data,
        })
    }

    /// Stacks equally long single-channel rows into a batch.
    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let len = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::input("rows of a batch must have equal length"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), 1, len, data)
    }

    #[inline]
    pub fn row(&self, b: usize, c: usize) -> &[T] {
        let s = (b * self.channels + c) * self.len;
        &self.data[s..s + self.len]
    }

    #[inline]
    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let s = (b * self.channels + c) * self.len;
        &mut self.data[s..s + self.len]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.len)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, layer: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::numerical(layer, "non-finite activation"))
        }
    }

    /// Concatenates tensors along the channel axis.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Self {
        let batch = parts[0].batch;
        let len = parts[0].len;
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut out = Self::zeros(batch, channels, len);
        for b in 0..batch {
            let mut c0 = 0;
            for p in parts {
                debug_assert_eq!((p.batch, p.len), (batch, len));
                for c in 0..p.channels {
                    out.row_mut(b, c0 + c).copy_from_slice(p.row(b, c));
                }
                c0 += p.channels;
            }
        }
        out
    }

    /// Inverse of [`Tensor::concat_channels`] for gradients.
    pub fn split_channels(&self, sizes: &[usize]) -> Vec<Self> {
        let mut out: Vec<Self> = sizes
            .iter()
            .map(|&c| Self::zeros(self.batch, c, self.len))
            .collect();
        for b in 0..self.batch {
            let mut c0 = 0;
            for (part, &sz) in out.iter_mut().zip(sizes) {
                for c in 0..sz {
                    part.row_mut(b, c).copy_from_slice(self.row(b, c0 + c));
                }
                c0 += sz;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
