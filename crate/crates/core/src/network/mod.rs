//! A small CRNN: a plain convolutional backbone, a bidirectional LSTM neck
//! and a linear head emitting one distribution per output step, with exact
//! reverse-mode gradients.
//!
//! ```text
//! image ─► [conv k×k, stride (sh, sw) ─► hard-swish] × stages
//!       ─► spatial dropout (last stage, train mode only)
//!       ─► mean over remaining height ─► steps × channels
//!       ─► BiLSTM × layers ─► linear ─► steps × vocab logits
//! ```
//!
//! The number of output steps is the input width divided by the product of
//! the horizontal strides. Stages are named by index; the horizontal stride
//! of each stage is the receptive-field knob, the width multiplier scales all
//! conv channel counts.

mod checkpoint;
pub mod layers;
mod params;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctc::{CtcError, LogProbMatrix};
use crate::imaging::ImageBuffer;
use crate::rng::Rng;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use params::{Gradients, Group, Parameters, Tensor};

use layers::{ConvShape, LstmCache};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("input shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("backward called without a train-mode forward")]
    NoForwardCache,
    #[error("upstream gradient: {0}")]
    BadUpstream(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),
    #[error("checkpoint vocabulary {checkpoint} does not match charset vocabulary {charset}")]
    VocabMismatch { checkpoint: usize, charset: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ctc(#[from] CtcError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl ConvStage {
    pub const fn new(out_channels: usize, kernel: usize, stride_h: usize, stride_w: usize) -> Self {
        Self {
            out_channels,
            kernel,
            stride_h,
            stride_w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    pub stages: Vec<ConvStage>,
    pub width_multiplier: f64,
    pub neck_hidden: usize,
    pub neck_layers: usize,
    /// Characters plus blank.
    pub vocab: usize,
    /// Keep probability of the spatial dropout after the last stage.
    pub dropout_keep_prob: f64,
    pub seed: u64,
}

impl NetConfig {
    /// Desk-scale default for 48×480 gray input: 120 output steps.
    pub fn desk(vocab: usize) -> Self {
        Self {
            input_height: 48,
            input_width: 480,
            input_channels: 1,
            stages: vec![
                ConvStage::new(16, 3, 2, 2),
                ConvStage::new(32, 3, 2, 2),
                ConvStage::new(48, 3, 2, 1),
                ConvStage::new(64, 3, 2, 1),
            ],
            width_multiplier: 0.5,
            neck_hidden: 48,
            neck_layers: 2,
            vocab,
            dropout_keep_prob: 0.9,
            seed: 42,
        }
    }

    /// Minimal network for gradient checks.
    pub fn tiny(vocab: usize) -> Self {
        Self {
            input_height: 8,
            input_width: 16,
            input_channels: 1,
            stages: vec![ConvStage::new(3, 3, 2, 2), ConvStage::new(4, 3, 2, 1)],
            width_multiplier: 1.0,
            neck_hidden: 3,
            neck_layers: 2,
            vocab,
            dropout_keep_prob: 1.0,
            seed: 1,
        }
    }

    /// Channel count of a stage after the width multiplier.
    pub fn stage_channels(&self, stage: usize) -> usize {
        ((self.stages[stage].out_channels as f64 * self.width_multiplier).round() as usize).max(1)
    }

    pub fn height_reduction(&self) -> usize {
        self.stages.iter().map(|s| s.stride_h).product()
    }

    pub fn width_reduction(&self) -> usize {
        self.stages.iter().map(|s| s.stride_w).product()
    }

    /// Output steps for an input of the given width.
    pub fn output_steps_for(&self, width: usize) -> usize {
        width / self.width_reduction()
    }

    pub fn output_steps(&self) -> usize {
        self.output_steps_for(self.input_width)
    }

    /// Whether an input of this size passes through the stride plan to a
    /// poolable feature map.
    pub fn accepts_scale(&self, height: usize, width: usize) -> bool {
        height >= self.height_reduction()
            && width >= self.width_reduction()
            && height % self.height_reduction() == 0
            && width % self.width_reduction() == 0
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidConfig(m));
        if self.stages.is_empty() {
            return bad("no conv stages".into());
        }
        if self.input_channels != 1 && self.input_channels != 3 {
            return bad(format!("input_channels {} (1 or 3)", self.input_channels));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.kernel == 0 || s.kernel % 2 == 0 {
                return bad(format!("stage {i}: kernel {} must be odd", s.kernel));
            }
            if s.stride_h == 0 || s.stride_w == 0 || s.out_channels == 0 {
                return bad(format!("stage {i}: zero stride or channels"));
            }
        }
        if !(self.width_multiplier > 0.0 && self.width_multiplier.is_finite()) {
            return bad(format!("width_multiplier {}", self.width_multiplier));
        }
        if !(self.dropout_keep_prob > 0.0 && self.dropout_keep_prob <= 1.0) {
            return bad(format!("dropout_keep_prob {} outside (0, 1]", self.dropout_keep_prob));
        }
        if self.neck_hidden == 0 || self.neck_layers == 0 {
            return bad("neck needs at least one layer and one unit".into());
        }
        if self.vocab < 2 {
            return bad(format!("vocab {} (blank plus at least one character)", self.vocab));
        }
        if !self.accepts_scale(self.input_height, self.input_width) {
            return bad(format!(
                "stride plan (height /{}, width /{}) does not evenly reduce {}x{}",
                self.height_reduction(),
                self.width_reduction(),
                self.input_height,
                self.input_width
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Raw head outputs for one sample, `steps × vocab`.
#[derive(Clone, Debug, PartialEq)]
pub struct Logits {
    pub steps: usize,
    pub vocab: usize,
    pub values: Vec<f64>,
}

impl Logits {
    pub fn log_probs(&self) -> Result<LogProbMatrix, CtcError> {
        LogProbMatrix::from_logits(self.steps, self.vocab, &self.values)
    }
}

#[derive(Clone, Debug)]
struct ConvLayer {
    weight: usize,
    bias: usize,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride_h: usize,
    stride_w: usize,
}

#[derive(Clone, Debug)]
struct LstmDir {
    wx: usize,
    wh: usize,
    b: usize,
    dim: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    convs: Vec<ConvLayer>,
    lstm: Vec<[LstmDir; 2]>,
    head_w: usize,
    head_b: usize,
}

/// Activations of one sample retained for the backward pass.
#[derive(Clone, Debug)]
pub struct SampleCache {
    /// Inputs of each conv stage (the first is the normalized image).
    conv_in: Vec<Vec<f64>>,
    /// Pre-activations of each conv stage.
    conv_pre: Vec<Vec<f64>>,
    /// Per-stage `(height, width)` of the conv inputs.
    dims: Vec<(usize, usize)>,
    mask: Option<Vec<f64>>,
    pooled_h: usize,
    steps: usize,
    /// Inputs of each LSTM layer, `steps × dim`.
    lstm_in: Vec<Vec<f64>>,
    lstm: Vec<[LstmCache; 2]>,
    /// Head input, `steps × 2h`.
    head_in: Vec<f64>,
}

const INIT_STREAM: u64 = 0x1417;
const DROPOUT_STREAM: u64 = 0xd20f;

/// Per-channel spatial dropout multipliers: 0 with probability `1 - keep`,
/// otherwise `1 / keep`.
pub fn spatial_dropout_mask(rng: &mut Rng, channels: usize, keep: f64) -> Vec<f64> {
    (0..channels)
        .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Maps 8-bit samples to `[-1, 1]`, channel-major.
pub fn normalize_image(img: &ImageBuffer) -> Vec<f64> {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut out = vec![0.0; ch * h * w];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                out[(c * h + y) * w + x] = img.get(y, x, c) as f64 / 127.5 - 1.0;
            }
        }
    }
    out
}

pub struct Network {
    config: NetConfig,
    params: Parameters,
    layout: Layout,
    cache: Option<Vec<SampleCache>>,
    dropout_rng: Rng,
}

impl Network {
    /// Builds and initializes from `config.seed`: He-uniform conv and head
    /// weights, `U(±1/√h)` recurrent weights, zero biases except the forget
    /// gate (1.0). Values are rounded to `f32`.
    pub fn build(config: NetConfig) -> Result<Self, NetError> {
        config.validate()?;
        let mut params = Parameters::default();
        let mut convs = Vec::new();
        let mut in_c = config.input_channels;
        let mut stream = 0u64;
        let mut init_rng = || {
            stream += 1;
            Rng::stream(config.seed, &[INIT_STREAM, stream])
        };
        for (i, st) in config.stages.iter().enumerate() {
            let out_c = config.stage_channels(i);
            let fan_in = in_c * st.kernel * st.kernel;
            let bound = (6.0 / fan_in as f64).sqrt();
            let mut rng = init_rng();
            let n = out_c * fan_in;
            let w: Vec<f64> = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
            let weight = params.push(
                format!("backbone.stage{i}.weight"),
                vec![out_c, in_c, st.kernel, st.kernel],
                Group::Backbone,
                w,
            );
            let bias = params.push(format!("backbone.stage{i}.bias"), vec![out_c], Group::Backbone, vec![0.0; out_c]);
            convs.push(ConvLayer {
                weight,
                bias,
                in_channels: in_c,
                out_channels: out_c,
                kernel: st.kernel,
                stride_h: st.stride_h,
                stride_w: st.stride_w,
            });
            in_c = out_c;
        }

        let hidden = config.neck_hidden;
        let mut lstm = Vec::new();
        let mut dim = in_c;
        for l in 0..config.neck_layers {
            let mut make_dir = |dir: &str| {
                let bound = 1.0 / (hidden as f64).sqrt();
                let mut rng = init_rng();
                let wx: Vec<f64> = (0..4 * hidden * dim).map(|_| rng.uniform(-bound, bound)).collect();
                let wh: Vec<f64> = (0..4 * hidden * hidden).map(|_| rng.uniform(-bound, bound)).collect();
                let mut b = vec![0.0; 4 * hidden];
                b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
                LstmDir {
                    wx: params.push(format!("neck.layer{l}.{dir}.wx"), vec![4 * hidden, dim], Group::Neck, wx),
                    wh: params.push(format!("neck.layer{l}.{dir}.wh"), vec![4 * hidden, hidden], Group::Neck, wh),
                    b: params.push(format!("neck.layer{l}.{dir}.b"), vec![4 * hidden], Group::Neck, b),
                    dim,
                }
            };
            let fwd = make_dir("fwd");
            let bwd = make_dir("bwd");
            lstm.push([fwd, bwd]);
            dim = 2 * hidden;
        }

        let bound = (6.0 / dim as f64).sqrt();
        let mut rng = init_rng();
        let hw: Vec<f64> = (0..config.vocab * dim).map(|_| rng.uniform(-bound, bound)).collect();
        let head_w = params.push("head.weight".into(), vec![config.vocab, dim], Group::Head, hw);
        let head_b = params.push("head.bias".into(), vec![config.vocab], Group::Head, vec![0.0; config.vocab]);
        params.round_to_f32();

        let dropout_rng = Rng::stream(config.seed, &[DROPOUT_STREAM]);
        Ok(Self {
            config,
            params,
            layout: Layout {
                convs,
                lstm,
                head_w,
                head_b,
            },
            cache: None,
            dropout_rng,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    /// Replaces all parameter values; shapes must match.
    pub fn set_params(&mut self, params: Parameters) -> Result<(), NetError> {
        if params.tensors.len() != self.params.tensors.len()
            || params
                .tensors
                .iter()
                .zip(&self.params.tensors)
                .any(|(a, b)| a.name != b.name || a.shape != b.shape || a.data.len() != b.data.len())
        {
            return Err(NetError::CorruptCheckpoint("parameter table does not match config".into()));
        }
        self.params = params;
        Ok(())
    }

    /// Exact parameter count and its size at four bytes per parameter.
    pub fn param_count(&self) -> (usize, usize) {
        let n = self.params.count();
        (n, 4 * n)
    }

    /// Reseeds the dropout mask stream.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.dropout_rng = Rng::stream(seed, &[DROPOUT_STREAM]);
    }

    /// Channels of the last conv stage (the dropout target).
    pub fn last_stage_channels(&self) -> usize {
        self.layout.convs.last().map(|c| c.out_channels).unwrap_or(0)
    }

    fn check_input(&self, img: &ImageBuffer, strict: bool) -> Result<(), NetError> {
        let c = &self.config;
        let ok = if strict {
            img.height() == c.input_height && img.width() == c.input_width
        } else {
            c.accepts_scale(img.height(), img.width())
        } && img.channels() == c.input_channels;
        if ok {
            Ok(())
        } else {
            Err(NetError::ShapeMismatch {
                expected: if strict {
                    format!("{}x{}x{}", c.input_height, c.input_width, c.input_channels)
                } else {
                    format!(
                        "HxWx{} with H divisible by {} and W by {}",
                        c.input_channels,
                        c.height_reduction(),
                        c.width_reduction()
                    )
                },
                found: format!("{}x{}x{}", img.height(), img.width(), img.channels()),
            })
        }
    }

    /// Forward pass for one normalized input. `mask` scales the channels of
    /// the last conv stage.
    pub fn forward_sample(&self, input: Vec<f64>, height: usize, width: usize, mask: Option<&[f64]>) -> (Logits, SampleCache) {
        let p = &self.params.tensors;
        let mut conv_in = Vec::with_capacity(self.layout.convs.len());
        let mut conv_pre = Vec::with_capacity(self.layout.convs.len());
        let mut dims = Vec::with_capacity(self.layout.convs.len());
        let (mut h, mut w) = (height, width);
        let mut x = input;
        for layer in &self.layout.convs {
            let shape = conv_shape(layer, h, w);
            let z = layers::conv_forward(&shape, &x, &p[layer.weight].data, &p[layer.bias].data);
            let a: Vec<f64> = z.iter().map(|&v| layers::hard_swish(v)).collect();
            dims.push((h, w));
            conv_in.push(x);
            conv_pre.push(z);
            x = a;
            h = shape.out_h();
            w = shape.out_w();
        }
        let channels = self.last_stage_channels();
        if let Some(m) = mask {
            for c in 0..channels {
                x[c * h * w..(c + 1) * h * w].iter_mut().for_each(|v| *v *= m[c]);
            }
        }
        // Mean over height; steps-major sequence.
        let steps = w;
        let mut seq = vec![0.0; steps * channels];
        for c in 0..channels {
            for y in 0..h {
                let row = &x[(c * h + y) * w..(c * h + y + 1) * w];
                for t in 0..steps {
                    seq[t * channels + c] += row[t];
                }
            }
        }
        let inv_h = 1.0 / h as f64;
        seq.iter_mut().for_each(|v| *v *= inv_h);

        let hidden = self.config.neck_hidden;
        let mut lstm_in = Vec::with_capacity(self.layout.lstm.len());
        let mut lstm_caches = Vec::with_capacity(self.layout.lstm.len());
        for dirs in &self.layout.lstm {
            let dim = dirs[0].dim;
            let run = |d: &LstmDir, reverse: bool| {
                layers::lstm_forward(&seq, steps, dim, hidden, &p[d.wx].data, &p[d.wh].data, &p[d.b].data, reverse)
            };
            let fwd = run(&dirs[0], false);
            let bwd = run(&dirs[1], true);
            let mut out = vec![0.0; steps * 2 * hidden];
            for t in 0..steps {
                out[t * 2 * hidden..t * 2 * hidden + hidden].copy_from_slice(&fwd.hidden[t * hidden..(t + 1) * hidden]);
                out[t * 2 * hidden + hidden..(t + 1) * 2 * hidden].copy_from_slice(&bwd.hidden[t * hidden..(t + 1) * hidden]);
            }
            lstm_in.push(std::mem::replace(&mut seq, out));
            lstm_caches.push([fwd, bwd]);
        }
        let vocab = self.config.vocab;
        let logits = layers::linear_seq(
            &seq,
            steps,
            2 * hidden,
            &p[self.layout.head_w].data,
            &p[self.layout.head_b].data,
            vocab,
        );
        let cache = SampleCache {
            conv_in,
            conv_pre,
            dims,
            mask: mask.map(<[f64]>::to_vec),
            pooled_h: h,
            steps,
            lstm_in,
            lstm: lstm_caches,
            head_in: seq,
        };
        (
            Logits {
                steps,
                vocab,
                values: logits,
            },
            cache,
        )
    }

    /// Parameter gradients for one sample given `d loss / d logits`.
    pub fn backward_sample(&self, cache: &SampleCache, dlogits: &[f64]) -> Gradients {
        let p = &self.params.tensors;
        let mut grads = self.params.zeros_like();
        let hidden = self.config.neck_hidden;
        let steps = cache.steps;
        let (hw, hb) = (self.layout.head_w, self.layout.head_b);
        let mut dseq = {
            let (gw, gb) = two_mut(&mut grads.tensors, hw, hb);
            layers::linear_seq_backward(&cache.head_in, steps, 2 * hidden, &p[hw].data, self.config.vocab, dlogits, gw, gb)
        };
        for (l, dirs) in self.layout.lstm.iter().enumerate().rev() {
            let dim = dirs[0].dim;
            let xs = &cache.lstm_in[l];
            let mut dx = vec![0.0; steps * dim];
            for (k, d) in dirs.iter().enumerate() {
                let mut dh = vec![0.0; steps * hidden];
                for t in 0..steps {
                    dh[t * hidden..(t + 1) * hidden]
                        .copy_from_slice(&dseq[t * 2 * hidden + k * hidden..t * 2 * hidden + (k + 1) * hidden]);
                }
                let (gx, gh, gbias) = three_mut(&mut grads.tensors, d.wx, d.wh, d.b);
                let part = layers::lstm_backward(
                    xs,
                    steps,
                    dim,
                    hidden,
                    &p[d.wx].data,
                    &p[d.wh].data,
                    &cache.lstm[l][k],
                    &dh,
                    k == 1,
                    gx,
                    gh,
                    gbias,
                );
                dx.iter_mut().zip(&part).for_each(|(a, b)| *a += b);
            }
            dseq = dx;
        }

        // Un-pool: every row of the last map receives d/H.
        let channels = self.last_stage_channels();
        let (h, w) = (cache.pooled_h, steps);
        let inv_h = 1.0 / h as f64;
        let mut dx = vec![0.0; channels * h * w];
        for c in 0..channels {
            let scale = inv_h * cache.mask.as_ref().map_or(1.0, |m| m[c]);
            for y in 0..h {
                for t in 0..w {
                    dx[(c * h + y) * w + t] = dseq[t * channels + c] * scale;
                }
            }
        }
        for (i, layer) in self.layout.convs.iter().enumerate().rev() {
            let (ih, iw) = cache.dims[i];
            let shape = conv_shape(layer, ih, iw);
            let dz: Vec<f64> = dx
                .iter()
                .zip(&cache.conv_pre[i])
                .map(|(&g, &z)| g * layers::hard_swish_grad(z))
                .collect();
            let (gw, gb) = two_mut(&mut grads.tensors, layer.weight, layer.bias);
            match layers::conv_backward(&shape, &cache.conv_in[i], &p[layer.weight].data, &dz, gw, gb, i > 0) {
                Some(d) => dx = d,
                None => break,
            }
        }
        grads
    }

    fn run_batch(&mut self, batch: &[ImageBuffer], mode: Mode, strict: bool) -> Result<Vec<Logits>, NetError> {
        for img in batch {
            self.check_input(img, strict)?;
        }
        match mode {
            Mode::Eval => {
                self.cache = None;
                Ok(self.infer_unchecked(batch))
            }
            Mode::Train => {
                let keep = self.config.dropout_keep_prob;
                let channels = self.last_stage_channels();
                let masks: Vec<Option<Vec<f64>>> = batch
                    .iter()
                    .map(|_| (keep < 1.0).then(|| spatial_dropout_mask(&mut self.dropout_rng, channels, keep)))
                    .collect();
                let this = &*self;
                let results: Vec<(Logits, SampleCache)> = batch
                    .par_iter()
                    .zip(masks.par_iter())
                    .map(|(img, m)| this.forward_sample(normalize_image(img), img.height(), img.width(), m.as_deref()))
                    .collect();
                let (logits, caches): (Vec<_>, Vec<_>) = results.into_iter().unzip();
                self.cache = Some(caches);
                Ok(logits)
            }
        }
    }

    /// Forward pass on images of exactly the configured size. Train mode
    /// samples dropout masks and retains activations for [`Self::backward`].
    pub fn forward(&mut self, batch: &[ImageBuffer], mode: Mode) -> Result<Vec<Logits>, NetError> {
        self.run_batch(batch, mode, true)
    }

    /// Like [`Self::forward`] but accepts any input size the stride plan
    /// reduces evenly; the height pooling absorbs the height change and the
    /// step count follows the width.
    pub fn forward_multiscale(&mut self, batch: &[ImageBuffer], mode: Mode) -> Result<Vec<Logits>, NetError> {
        self.run_batch(batch, mode, false)
    }

    fn infer_unchecked(&self, batch: &[ImageBuffer]) -> Vec<Logits> {
        batch
            .par_iter()
            .map(|img| self.forward_sample(normalize_image(img), img.height(), img.width(), None).0)
            .collect()
    }

    /// Eval-mode forward on a shared network.
    pub fn infer(&self, batch: &[ImageBuffer]) -> Result<Vec<Logits>, NetError> {
        for img in batch {
            self.check_input(img, true)?;
        }
        Ok(self.infer_unchecked(batch))
    }

    /// Eval-mode forward accepting any compatible scale.
    pub fn infer_multiscale(&self, batch: &[ImageBuffer]) -> Result<Vec<Logits>, NetError> {
        for img in batch {
            self.check_input(img, false)?;
        }
        Ok(self.infer_unchecked(batch))
    }

    /// Summed parameter gradients over the last train-mode batch, one
    /// upstream `steps × vocab` gradient per sample. Per-sample gradients
    /// are reduced in batch order.
    pub fn backward(&mut self, upstream: &[Vec<f64>]) -> Result<Gradients, NetError> {
        let caches = self.cache.take().ok_or(NetError::NoForwardCache)?;
        if caches.len() != upstream.len() {
            return Err(NetError::BadUpstream(format!(
                "{} gradients for a batch of {}",
                upstream.len(),
                caches.len()
            )));
        }
        for (c, u) in caches.iter().zip(upstream) {
            if u.len() != c.steps * self.config.vocab {
                return Err(NetError::BadUpstream(format!(
                    "expected {} values, found {}",
                    c.steps * self.config.vocab,
                    u.len()
                )));
            }
        }
        let this = &*self;
        let parts: Vec<Gradients> = caches
            .par_iter()
            .zip(upstream.par_iter())
            .map(|(c, u)| this.backward_sample(c, u))
            .collect();
        let mut total = self.params.zeros_like();
        for g in &parts {
            total.add_assign(g);
        }
        Ok(total)
    }
}

fn conv_shape(layer: &ConvLayer, h: usize, w: usize) -> ConvShape {
    ConvShape {
        in_channels: layer.in_channels,
        out_channels: layer.out_channels,
        kernel: layer.kernel,
        stride_h: layer.stride_h,
        stride_w: layer.stride_w,
        in_h: h,
        in_w: w,
    }
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

fn three_mut<T>(v: &mut [T], a: usize, b: usize, c: usize) -> (&mut T, &mut T, &mut T) {
    assert!(a < b && b < c);
    let (lo, rest) = v.split_at_mut(b);
    let (mid, hi) = rest.split_at_mut(c - b);
    (&mut lo[a], &mut mid[0], &mut hi[0])
}

#[cfg(test)]
mod tests;
