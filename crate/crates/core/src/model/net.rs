//! Dual-head convolutional sequence-to-sequence network.
//!
//! ```text
//! input 1 x 510
//!  encoder: 4 x [conv k3 -> BN -> ReLU], max-pool 2/2 after the first three
//!           lengths 508 -> 254 -> 252 -> 126 -> 124 -> 62 -> 60
//!  temporal pooling on the 60-sample encoder output, one branch per k in {5,10,20,30}:
//!           avg-pool k/k -> pointwise conv -> BN -> ReLU -> nearest upsample to 60
//!  concat [encoder, p5, p10, p20, p30] along channels
//!  decoder: transposed conv k8 s8 -> BN            (60 -> 480)
//!  heads:   status = softmax(pointwise conv, 2 ch), power = pointwise conv, 1 ch
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;
use crate::series::{INPUT_LEN, OUTPUT_LEN};

pub const ENCODER_BASE_CHANNELS: [usize; 4] = [32, 64, 128, 256];
pub const POOL_KERNELS: [usize; 4] = [5, 10, 20, 30];
pub const POOL_BASE_CHANNELS: usize = 64;
pub const DECODER_BASE_CHANNELS: usize = 32;
pub const ENCODER_KERNEL: usize = 3;
pub const DECODER_KERNEL: usize = 8;
pub const DECODER_STRIDE: usize = 8;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

const N_PARAMS: usize = 40;
const N_BATCHNORMS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Batch statistics in batch normalization.
    Train,
    /// Running statistics in batch normalization.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv,
    ReLU,
    MaxPool,
    AvgPool,
    BatchNorm,
    Upsample,
    Concat,
    ConvTranspose,
    PointwiseConv,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub out_len: usize,
}

/// Channel widths derived from a width scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub width_scale: f64,
    pub encoder: [usize; 4],
    pub pool: usize,
    pub decoder: usize,
}

impl Architecture {
    pub fn new(width_scale: f64) -> Result<Self> {
        if !(width_scale > 0.0 && width_scale <= 1.0) {
            return Err(Error::config(format!(
                "width_scale {width_scale} outside (0, 1]"
            )));
        }
        let scale = |c: usize| (width_scale * c as f64).round() as usize;
        let arch = Self {
            width_scale,
            encoder: ENCODER_BASE_CHANNELS.map(scale),
            pool: scale(POOL_BASE_CHANNELS),
            decoder: scale(DECODER_BASE_CHANNELS),
        };
        if arch.encoder.contains(&0) || arch.pool == 0 || arch.decoder == 0 {
            return Err(Error::config(format!(
                "width_scale {width_scale} produces a zero-channel layer"
            )));
        }
        Ok(arch)
    }

    fn enc_conv(&self, i: usize) -> ConvShape {
        ConvShape {
            in_channels: if i == 0 { 1 } else { self.encoder[i - 1] },
            out_channels: self.encoder[i],
            kernel: ENCODER_KERNEL,
        }
    }

    fn pool_conv(&self) -> ConvShape {
        ConvShape {
            in_channels: self.encoder[3],
            out_channels: self.pool,
            kernel: 1,
        }
    }

    fn concat_channels(&self) -> usize {
        self.encoder[3] + POOL_KERNELS.len() * self.pool
    }

    fn decoder_conv(&self) -> ConvTransposeShape {
        ConvTransposeShape {
            in_channels: self.concat_channels(),
            out_channels: self.decoder,
            kernel: DECODER_KERNEL,
            stride: DECODER_STRIDE,
        }
    }

    fn head(&self, out: usize) -> ConvShape {
        ConvShape {
            in_channels: self.decoder,
            out_channels: out,
            kernel: 1,
        }
    }

    /// Sequence lengths after each encoder convolution.
    pub fn encoder_lengths(&self) -> [usize; 4] {
        let mut len = INPUT_LEN;
        let mut out = [0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            len = self.enc_conv(i).out_len(len);
            *o = len;
            if i < 3 {
                len /= 2;
            }
        }
        out
    }

    /// Layer-by-layer description with output channels and lengths.
    pub fn describe(&self) -> Vec<LayerSpec> {
        let mut v = Vec::new();
        let mut push = |name: String, kind, kernel, stride, cin, cout, len| {
            v.push(LayerSpec {
                name,
                kind,
                kernel,
                stride,
                padding: 0,
                in_channels: cin,
                out_channels: cout,
                out_len: len,
            })
        };
        let mut len = INPUT_LEN;
        for i in 0..4 {
            let s = self.enc_conv(i);
            len = s.out_len(len);
            push(
                format!("enc{i}.conv"),
                LayerKind::Conv,
                3,
                1,
                s.in_channels,
                s.out_channels,
                len,
            );
            push(
                format!("enc{i}.bn"),
                LayerKind::BatchNorm,
                0,
                0,
                s.out_channels,
                s.out_channels,
                len,
            );
            push(
                format!("enc{i}.relu"),
                LayerKind::ReLU,
                0,
                0,
                s.out_channels,
                s.out_channels,
                len,
            );
            if i < 3 {
                len /= 2;
                push(
                    format!("enc{i}.maxpool"),
                    LayerKind::MaxPool,
                    2,
                    2,
                    s.out_channels,
                    s.out_channels,
                    len,
                );
            }
        }
        let c4 = self.encoder[3];
        for k in POOL_KERNELS {
            let pl = len / k;
            push(format!("pool{k}.avg"), LayerKind::AvgPool, k, k, c4, c4, pl);
            push(
                format!("pool{k}.conv"),
                LayerKind::PointwiseConv,
                1,
                1,
                c4,
                self.pool,
                pl,
            );
            push(
                format!("pool{k}.bn"),
                LayerKind::BatchNorm,
                0,
                0,
                self.pool,
                self.pool,
                pl,
            );
            push(
                format!("pool{k}.relu"),
                LayerKind::ReLU,
                0,
                0,
                self.pool,
                self.pool,
                pl,
            );
            push(
                format!("pool{k}.upsample"),
                LayerKind::Upsample,
                0,
                0,
                self.pool,
                self.pool,
                len,
            );
        }
        let cc = self.concat_channels();
        push("concat".into(), LayerKind::Concat, 0, 0, cc, cc, len);
        let d = self.decoder_conv();
        let dl = d.out_len(len);
        push(
            "dec.convt".into(),
            LayerKind::ConvTranspose,
            8,
            8,
            cc,
            self.decoder,
            dl,
        );
        push(
            "dec.bn".into(),
            LayerKind::BatchNorm,
            0,
            0,
            self.decoder,
            self.decoder,
            dl,
        );
        push(
            "status.conv".into(),
            LayerKind::PointwiseConv,
            1,
            1,
            self.decoder,
            2,
            dl,
        );
        push("status.softmax".into(), LayerKind::Softmax, 0, 0, 2, 2, dl);
        push(
            "power.conv".into(),
            LayerKind::PointwiseConv,
            1,
            1,
            self.decoder,
            1,
            dl,
        );
        v
    }
}

/// A named flat array with its logical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> NamedArray<T> {
    fn filled(name: impl Into<String>, shape: Vec<usize>, v: T) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![v; n],
        }
    }
}

/// First and second moment estimates per learnable array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

/// Every learnable array, batch-norm running statistics and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: Architecture,
    pub params: Vec<NamedArray<T>>,
    /// Running mean and variance for each batch-norm layer, in layer order.
    pub buffers: Vec<NamedArray<T>>,
    pub adam: AdamState<T>,
}

fn uniform_array<T: Scalar>(
    rng: &mut ChaCha8Rng,
    name: &str,
    shape: Vec<usize>,
    fan_in: usize,
) -> NamedArray<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::lit(rng.random_range(-bound..bound)))
        .collect();
    NamedArray {
        name: name.to_string(),
        shape,
        data,
    }
}

fn push_conv<T: Scalar>(
    p: &mut Vec<NamedArray<T>>,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    s: ConvShape,
) {
    p.push(uniform_array(
        rng,
        &format!("{prefix}.weight"),
        vec![s.out_channels, s.in_channels, s.kernel],
        s.fan_in(),
    ));
    p.push(uniform_array(
        rng,
        &format!("{prefix}.bias"),
        vec![s.out_channels],
        s.fan_in(),
    ));
}

fn push_bn<T: Scalar>(p: &mut Vec<NamedArray<T>>, prefix: &str, c: usize) {
    p.push(NamedArray::filled(
        format!("{prefix}.gamma"),
        vec![c],
        T::one(),
    ));
    p.push(NamedArray::filled(
        format!("{prefix}.beta"),
        vec![c],
        T::zero(),
    ));
}

// Parameter index layout.
const fn enc_ids(i: usize) -> [usize; 4] {
    [4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3]
}
const fn pool_ids(j: usize) -> [usize; 4] {
    [16 + 4 * j, 17 + 4 * j, 18 + 4 * j, 19 + 4 * j]
}
const DEC_IDS: [usize; 4] = [32, 33, 34, 35];
const STATUS_IDS: [usize; 2] = [36, 37];
const POWER_IDS: [usize; 2] = [38, 39];
const DEC_BN: usize = 8;
const fn pool_bn(j: usize) -> usize {
    4 + j
}

impl<T: Scalar> ModelParams<T> {
    /// Fresh parameters: uniform(±1/sqrt(fan_in)) weights and biases, unit
    /// batch-norm scale, zero shift.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut params = Vec::with_capacity(N_PARAMS);
        for i in 0..4 {
            let s = arch.enc_conv(i);
            push_conv(&mut params, &mut rng, &format!("enc{i}.conv"), s);
            push_bn(&mut params, &format!("enc{i}.bn"), s.out_channels);
        }
        for k in POOL_KERNELS {
            push_conv(
                &mut params,
                &mut rng,
                &format!("pool{k}.conv"),
                arch.pool_conv(),
            );
            push_bn(&mut params, &format!("pool{k}.bn"), arch.pool);
        }
        let d = arch.decoder_conv();
        params.push(uniform_array(
            &mut rng,
            "dec.convt.weight",
            vec![d.in_channels, d.out_channels, d.kernel],
            d.fan_in(),
        ));
        params.push(uniform_array(
            &mut rng,
            "dec.convt.bias",
            vec![d.out_channels],
            d.fan_in(),
        ));
        push_bn(&mut params, "dec.bn", d.out_channels);
        push_conv(&mut params, &mut rng, "status.conv", arch.head(2));
        push_conv(&mut params, &mut rng, "power.conv", arch.head(1));
        debug_assert_eq!(params.len(), N_PARAMS);

        let mut buffers = Vec::with_capacity(2 * N_BATCHNORMS);
        let bn_layers = (0..4)
            .map(|i| (format!("enc{i}.bn"), arch.encoder[i]))
            .chain(
                POOL_KERNELS
                    .iter()
                    .map(|k| (format!("pool{k}.bn"), arch.pool)),
            )
            .chain(std::iter::once(("dec.bn".to_string(), arch.decoder)));
        for (name, c) in bn_layers {
            buffers.push(NamedArray::filled(
                format!("{name}.running_mean"),
                vec![c],
                T::zero(),
            ));
            buffers.push(NamedArray::filled(
                format!("{name}.running_var"),
                vec![c],
                T::one(),
            ));
        }
        let adam = AdamState {
            m: params
                .iter()
                .map(|p| vec![T::zero(); p.data.len()])
                .collect(),
            v: params
                .iter()
                .map(|p| vec![T::zero(); p.data.len()])
                .collect(),
            step: 0,
        };
        Self {
            arch,
            params,
            buffers,
            adam,
        }
    }

    pub fn num_learnable(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Indices into `params` of the status head (weight, bias).
    pub fn status_head_ids() -> [usize; 2] {
        STATUS_IDS
    }

    /// Indices into `params` of the power head (weight, bias).
    pub fn power_head_ids() -> [usize; 2] {
        POWER_IDS
    }

    fn p(&self, i: usize) -> &[T] {
        &self.params[i].data
    }

    fn running(&self, bn: usize) -> (&[T], &[T]) {
        (&self.buffers[2 * bn].data, &self.buffers[2 * bn + 1].data)
    }

    /// Folds batch statistics of a training forward pass into the running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        let mom = T::lit(BN_MOMENTUM);
        for (bn, stats) in cache.batch_stats.iter().enumerate() {
            let Some((mean, var, count)) = stats else {
                continue;
            };
            let unbias = if *count > 1 {
                T::from_usize_lossy(*count) / T::from_usize_lossy(count - 1)
            } else {
                T::one()
            };
            for (r, &m) in self.buffers[2 * bn].data.iter_mut().zip(mean) {
                *r = (T::one() - mom) * *r + mom * m;
            }
            for (r, &v) in self.buffers[2 * bn + 1].data.iter_mut().zip(var) {
                *r = (T::one() - mom) * *r + mom * v * unbias;
            }
        }
    }

    fn batchnorm(
        &self,
        x: &Tensor<T>,
        param_ids: [usize; 4],
        bn: usize,
        mode: Mode,
        stats: &mut [BatchStat<T>],
    ) -> (Tensor<T>, BatchNormCache<T>) {
        let (gamma, beta) = (self.p(param_ids[2]), self.p(param_ids[3]));
        let eps = T::lit(BN_EPS);
        match mode {
            Mode::Train => {
                let (mean, var) = channel_moments(x);
                let out = batchnorm_forward(x, gamma, beta, &mean, &var, eps, true);
                stats[bn] = Some((mean, var, x.batch * x.len));
                out
            }
            Mode::Eval => {
                let (rm, rv) = self.running(bn);
                batchnorm_forward(x, gamma, beta, rm, rv, eps, false)
            }
        }
    }

    /// Runs the network on a batch of `n x 1 x 510` inputs.
    pub fn forward(&self, input: &Tensor<T>, mode: Mode) -> Result<(Output<T>, ForwardCache<T>)> {
        if input.channels != 1 || input.len != INPUT_LEN || input.batch == 0 {
            return Err(Error::input(format!(
                "network input must be n x 1 x {INPUT_LEN}, got {:?}",
                input.shape()
            )));
        }
        input.check_finite("input")?;
        let arch = &self.arch;
        let mut stats: Vec<BatchStat<T>> = vec![None; N_BATCHNORMS];

        let mut encoder = Vec::with_capacity(4);
        let mut x = input.clone();
        for i in 0..4 {
            let ids = enc_ids(i);
            let z = conv1d_forward(&x, self.p(ids[0]), self.p(ids[1]), arch.enc_conv(i));
            let (y, bn) = self.batchnorm(&z, ids, i, mode, &mut stats);
            let a = relu_forward(&y);
            a.check_finite(&format!("encoder block {i}"))?;
            let (next, arg) = if i < 3 {
                let (p, arg) = maxpool2_forward(&a);
                (p, Some(arg))
            } else {
                (a.clone(), None)
            };
            encoder.push(EncoderCache {
                input: x,
                bn,
                act: a,
                arg,
            });
            x = next;
        }
        let enc_out = x;

        let mut pools = Vec::with_capacity(POOL_KERNELS.len());
        let mut ups = Vec::with_capacity(POOL_KERNELS.len());
        for (j, &k) in POOL_KERNELS.iter().enumerate() {
            let ids = pool_ids(j);
            let pooled = avgpool_forward(&enc_out, k);
            let z = conv1d_forward(&pooled, self.p(ids[0]), self.p(ids[1]), arch.pool_conv());
            let (y, bn) = self.batchnorm(&z, ids, pool_bn(j), mode, &mut stats);
            let a = relu_forward(&y);
            a.check_finite(&format!("temporal pool {k}"))?;
            ups.push(upsample_forward(&a, enc_out.len));
            pools.push(PoolCache { pooled, bn, act: a });
        }

        let mut parts: Vec<&Tensor<T>> = vec![&enc_out];
        parts.extend(ups.iter());
        let concat = Tensor::concat_channels(&parts);
        let d = conv_transpose_forward(
            &concat,
            self.p(DEC_IDS[0]),
            self.p(DEC_IDS[1]),
            arch.decoder_conv(),
        );
        let (hidden, dec_bn) = self.batchnorm(&d, DEC_IDS, DEC_BN, mode, &mut stats);
        hidden.check_finite("decoder")?;

        let logits = conv1d_forward(
            &hidden,
            self.p(STATUS_IDS[0]),
            self.p(STATUS_IDS[1]),
            arch.head(2),
        );
        let status = softmax_channels(&logits);
        status.check_finite("status head")?;
        let power = conv1d_forward(
            &hidden,
            self.p(POWER_IDS[0]),
            self.p(POWER_IDS[1]),
            arch.head(1),
        );
        power.check_finite("power head")?;
        debug_assert_eq!(status.len, OUTPUT_LEN);

        let out = Output { status, power };
        let cache = ForwardCache {
            mode,
            encoder,
            enc_out,
            pools,
            concat,
            dec_bn,
            hidden,
            status: out.status.clone(),
            batch_stats: stats,
        };
        Ok((out, cache))
    }

    /// Back-propagates output gradients (w.r.t. status probabilities and
    /// power) through the cached forward pass.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        d_status: &Tensor<T>,
        d_power: &Tensor<T>,
    ) -> Result<Gradients<T>> {
        let arch = &self.arch;
        let mut g = Gradients::zeros_like(self);

        // heads
        let d_logits = softmax_backward(d_status, &cache.status);
        let [sw, sb] = STATUS_IDS;
        let mut d_hidden = {
            let (a, b) = g.pair_mut(sw, sb);
            conv1d_backward(
                &cache.hidden,
                self.p(sw),
                &d_logits,
                arch.head(2),
                a,
                b,
                true,
            )
            .expect("dx")
        };
        let [pw, pb] = POWER_IDS;
        {
            let (a, b) = g.pair_mut(pw, pb);
            let dh = conv1d_backward(&cache.hidden, self.p(pw), d_power, arch.head(1), a, b, true)
                .expect("dx");
            d_hidden.add_assign(&dh);
        }

        // decoder
        let d_dec = {
            let (dg, db) = g.pair_mut(DEC_IDS[2], DEC_IDS[3]);
            batchnorm_backward(&d_hidden, self.p(DEC_IDS[2]), &cache.dec_bn, dg, db)
        };
        let d_concat = {
            let (dw, db) = g.pair_mut(DEC_IDS[0], DEC_IDS[1]);
            conv_transpose_backward(
                &cache.concat,
                self.p(DEC_IDS[0]),
                &d_dec,
                arch.decoder_conv(),
                dw,
                db,
                true,
            )
            .expect("dx")
        };
        let mut sizes = vec![arch.encoder[3]];
        sizes.extend(std::iter::repeat_n(arch.pool, POOL_KERNELS.len()));
        let mut split = d_concat.split_channels(&sizes).into_iter();
        let mut d_enc = split.next().expect("encoder part");

        // temporal pooling branches
        for (j, (&k, d_up)) in POOL_KERNELS.iter().zip(split).enumerate() {
            let pc = &cache.pools[j];
            let ids = pool_ids(j);
            let d_act = upsample_backward(&d_up, pc.act.len);
            let d_y = relu_backward(&d_act, &pc.act);
            let d_z = {
                let (dg, db) = g.pair_mut(ids[2], ids[3]);
                batchnorm_backward(&d_y, self.p(ids[2]), &pc.bn, dg, db)
            };
            let d_pooled = {
                let (dw, db) = g.pair_mut(ids[0], ids[1]);
                conv1d_backward(
                    &pc.pooled,
                    self.p(ids[0]),
                    &d_z,
                    arch.pool_conv(),
                    dw,
                    db,
                    true,
                )
                .expect("dx")
            };
            d_enc.add_assign(&avgpool_backward(&d_pooled, k, cache.enc_out.len));
        }

        // encoder
        let mut d_x = d_enc;
        for i in (0..4).rev() {
            let ec = &cache.encoder[i];
            let ids = enc_ids(i);
            let d_act = match &ec.arg {
                Some(arg) => maxpool2_backward(&d_x, arg, ec.act.len),
                None => d_x,
            };
            let d_y = relu_backward(&d_act, &ec.act);
            let d_z = {
                let (dg, db) = g.pair_mut(ids[2], ids[3]);
                batchnorm_backward(&d_y, self.p(ids[2]), &ec.bn, dg, db)
            };
            let (dw, db) = g.pair_mut(ids[0], ids[1]);
            match conv1d_backward(
                &ec.input,
                self.p(ids[0]),
                &d_z,
                arch.enc_conv(i),
                dw,
                db,
                i > 0,
            ) {
                Some(d) => d_x = d,
                None => break,
            }
        }

        for (i, a) in g.arrays.iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(
                    self.params[i].name.clone(),
                    "non-finite gradient",
                ));
            }
        }
        Ok(g)
    }

    /// Single-window convenience wrapper around [`ModelParams::forward`].
    pub fn predict_window(&self, input: &[T], mode: Mode) -> Result<Output<T>> {
        let x = Tensor::from_vec(1, 1, input.len(), input.to_vec())?;
        Ok(self.forward(&x, mode)?.0)
    }
}

/// Head outputs for a batch: status probabilities `n x 2 x 480` (channel 1 = ON)
/// and normalized power `n x 1 x 480`.
#[derive(Debug, Clone, PartialEq)]
pub struct Output<T> {
    pub status: Tensor<T>,
    pub power: Tensor<T>,
}

impl<T: Scalar> Output<T> {
    pub fn prob_on(&self, b: usize) -> &[T] {
        self.status.row(b, 1)
    }

    pub fn power(&self, b: usize) -> &[T] {
        self.power.row(b, 0)
    }
}

type BatchStat<T> = Option<(Vec<T>, Vec<T>, usize)>;

#[derive(Debug, Clone)]
struct EncoderCache<T> {
    input: Tensor<T>,
    bn: BatchNormCache<T>,
    act: Tensor<T>,
    arg: Option<Vec<u32>>,
}

#[derive(Debug, Clone)]
struct PoolCache<T> {
    pooled: Tensor<T>,
    bn: BatchNormCache<T>,
    act: Tensor<T>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub mode: Mode,
    encoder: Vec<EncoderCache<T>>,
    enc_out: Tensor<T>,
    pools: Vec<PoolCache<T>>,
    concat: Tensor<T>,
    dec_bn: BatchNormCache<T>,
    hidden: Tensor<T>,
    status: Tensor<T>,
    /// Batch mean, biased variance and element count per batch-norm layer (Train mode).
    batch_stats: Vec<BatchStat<T>>,
}

/// Gradient arrays aligned with [`ModelParams::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub arrays: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        Self {
            arrays: params
                .params
                .iter()
                .map(|p| vec![T::zero(); p.data.len()])
                .collect(),
        }
    }

    fn pair_mut(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        debug_assert!(a < b);
        let (lo, hi) = self.arrays.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    }

    pub fn scale(&mut self, s: T) {
        self.arrays.iter_mut().flatten().for_each(|v| *v *= s);
    }
}
