//! Dual-encoder / single-decoder network.
//!
//! Both encoders share one architecture: `stage_dims.len()` stages, each a
//! 3x3 convolution followed by ReLU, with 2x2 average pooling in front of
//! every stage but the first. The embedding is the global average of the
//! last stage. The decoder is U-Net shaped and only ever sees the image
//! encoder's stage outputs; the drawing encoder never feeds it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::Batch;
use crate::nn::{self, Act, ConvCache, ConvLayout, LinearLayout, NormCache, NormLayout};
use crate::real::Real;
use crate::seed::{self, tag};
use crate::tensor::{Matrix, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(
        "unknown backbone `{0}` (expected tiny, resnet101, densenet161, efficientnet_b3 or custom)"
    )]
    UnknownBackbone(String),
    #[error(
        "pretrained weights for `{0}` are not bundled and cannot be downloaded offline; \
         set `model.pretrained = false` to train it from scratch, or use the `tiny` backbone"
    )]
    PretrainedUnavailable(String),
    #[error("invalid backbone spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("input values outside [0, 1]")]
    InputRange,
    #[error("parameter group `{group}` has {got} values, expected {expected}")]
    ParamCount {
        group: &'static str,
        got: usize,
        expected: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneName {
    Tiny,
    Resnet101,
    Densenet161,
    #[serde(rename = "efficientnet_b3")]
    EfficientnetB3,
    Custom,
}

impl BackboneName {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneName::Tiny => "tiny",
            BackboneName::Resnet101 => "resnet101",
            BackboneName::Densenet161 => "densenet161",
            BackboneName::EfficientnetB3 => "efficientnet_b3",
            BackboneName::Custom => "custom",
        }
    }
}

impl FromStr for BackboneName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "tiny" => BackboneName::Tiny,
            "resnet101" => BackboneName::Resnet101,
            "densenet161" => BackboneName::Densenet161,
            "efficientnet_b3" => BackboneName::EfficientnetB3,
            "custom" => BackboneName::Custom,
            other => return Err(ModelError::UnknownBackbone(other.to_string())),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SpecFields")]
pub struct BackboneSpec {
    pub name: BackboneName,
    pub embedding_dim: usize,
    /// Output channels per stage; stage `i` runs at `1 / 2^i` input resolution.
    pub stage_dims: Vec<usize>,
    #[serde(default)]
    pub pretrained: bool,
}

/// Serialized form; omitted widths fall back to the named profile.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFields {
    #[serde(default = "default_name")]
    name: BackboneName,
    embedding_dim: Option<usize>,
    stage_dims: Option<Vec<usize>>,
    #[serde(default)]
    pretrained: bool,
}

fn default_name() -> BackboneName {
    BackboneName::Tiny
}

impl From<SpecFields> for BackboneSpec {
    fn from(f: SpecFields) -> Self {
        let base = BackboneSpec::named(f.name);
        let stage_dims = match (f.name, f.stage_dims) {
            (_, Some(d)) => d,
            (BackboneName::Custom, None) => Vec::new(),
            (_, None) => base.stage_dims,
        };
        let embedding_dim = f
            .embedding_dim
            .unwrap_or_else(|| stage_dims.last().copied().unwrap_or(0));
        BackboneSpec {
            name: f.name,
            embedding_dim,
            stage_dims,
            pretrained: f.pretrained,
        }
    }
}

/// Encoder input: each sample shifted to zero mean and scaled to unit
/// variance (constant samples only centred). Inputs are parameter-free, so
/// no gradient flows through this step.
pub(crate) fn encoder_input<T: Real>(x: &Tensor<T>) -> Act<T> {
    let mut a = Act::from_tensor(x);
    standardize_samples(&mut a);
    a
}

fn standardize_samples<T: Real>(a: &mut Act<T>) {
    let hw = a.h * a.w;
    let np = a.plane();
    for b in 0..a.n {
        let idx = |c: usize| c * np + b * hw;
        let count = (a.c * hw) as f64;
        let mut sum = 0.0;
        for c in 0..a.c {
            sum += a.data[idx(c)..][..hw]
                .iter()
                .map(|v| v.as_f64())
                .sum::<f64>();
        }
        let mean = sum / count;
        let mut var = 0.0;
        for c in 0..a.c {
            var += a.data[idx(c)..][..hw]
                .iter()
                .map(|v| {
                    let d = v.as_f64() - mean;
                    d * d
                })
                .sum::<f64>();
        }
        let std = libm::sqrt(var / count);
        let inv = if std > 1e-6 { 1.0 / std } else { 1.0 };
        for c in 0..a.c {
            for v in &mut a.data[idx(c)..][..hw] {
                *v = T::lit((v.as_f64() - mean) * inv);
            }
        }
    }
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec::tiny()
    }
}

impl BackboneSpec {
    /// Four stages, 128-d embedding; trains on a CPU in minutes.
    pub fn tiny() -> Self {
        BackboneSpec {
            name: BackboneName::Tiny,
            embedding_dim: 128,
            stage_dims: vec![8, 16, 32, 128],
            pretrained: false,
        }
    }

    /// Plain convolutional stages with the channel widths of the named
    /// network's four feature stages.
    pub fn named(name: BackboneName) -> Self {
        let dims: Vec<usize> = match name {
            BackboneName::Tiny | BackboneName::Custom => {
                return BackboneSpec {
                    name,
                    ..BackboneSpec::tiny()
                }
            }
            BackboneName::Resnet101 => vec![256, 512, 1024, 2048],
            BackboneName::Densenet161 => vec![384, 768, 2112, 2208],
            BackboneName::EfficientnetB3 => vec![32, 48, 136, 1536],
        };
        BackboneSpec {
            name,
            embedding_dim: *dims.last().unwrap(),
            stage_dims: dims,
            pretrained: false,
        }
    }

    pub fn custom(stage_dims: Vec<usize>) -> Self {
        let embedding_dim = stage_dims.last().copied().unwrap_or(0);
        BackboneSpec {
            name: BackboneName::Custom,
            embedding_dim,
            stage_dims,
            pretrained: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.pretrained {
            return Err(ModelError::PretrainedUnavailable(
                self.name.as_str().to_string(),
            ));
        }
        if self.stage_dims.is_empty() || self.stage_dims.contains(&0) {
            return Err(ModelError::InvalidSpec(
                "stage_dims must be non-empty and positive".to_string(),
            ));
        }
        if self.embedding_dim < 8 {
            return Err(ModelError::InvalidSpec(format!(
                "embedding_dim {} < 8",
                self.embedding_dim
            )));
        }
        if self.embedding_dim != *self.stage_dims.last().unwrap() {
            return Err(ModelError::InvalidSpec(format!(
                "embedding_dim {} must equal the last stage width {}",
                self.embedding_dim,
                self.stage_dims.last().unwrap()
            )));
        }
        Ok(())
    }

    /// Input side lengths must be divisible by this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.stage_dims.len() - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    EncDraw,
    EncIm,
    DecIm,
    HeadDraw,
    HeadIm,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::EncDraw,
        ParamGroup::EncIm,
        ParamGroup::DecIm,
        ParamGroup::HeadDraw,
        ParamGroup::HeadIm,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::EncDraw => "enc_draw",
            ParamGroup::EncIm => "enc_im",
            ParamGroup::DecIm => "dec_im",
            ParamGroup::HeadDraw => "head_draw",
            ParamGroup::HeadIm => "head_im",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ParamGroup::ALL.into_iter().find(|g| g.name() == name)
    }
}

/// One flat buffer per parameter group. Also used for gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T> {
    groups: [Vec<T>; 5],
}

impl<T: Real> ParamSet<T> {
    pub fn new(groups: [Vec<T>; 5]) -> Self {
        ParamSet { groups }
    }

    pub fn zeros_like(other: &ParamSet<T>) -> Self {
        ParamSet {
            groups: core::array::from_fn(|i| vec![T::zero(); other.groups[i].len()]),
        }
    }

    pub fn group(&self, g: ParamGroup) -> &[T] {
        &self.groups[g.index()]
    }

    pub fn group_mut(&mut self, g: ParamGroup) -> &mut [T] {
        &mut self.groups[g.index()]
    }

    pub fn total_len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self, g: ParamGroup) -> bool {
        self.group(g).iter().all(|v| *v == T::zero())
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            groups: core::array::from_fn(|i| {
                self.groups[i].iter().map(|v| U::lit(v.as_f64())).collect()
            }),
        }
    }

    pub fn into_groups(self) -> [Vec<T>; 5] {
        self.groups
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct StageLayout {
    pub conv: ConvLayout,
    pub pool_before: bool,
    pub relu: bool,
}

/// Convolutional stage stack; shared by both encoders and the perceptual
/// feature extractor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct EncoderLayout {
    pub stages: Vec<StageLayout>,
}

pub(crate) struct StagePass<T> {
    cache: ConvCache<T>,
    pub out: Act<T>,
}

pub(crate) struct EncoderPass<T> {
    pub stages: Vec<StagePass<T>>,
}

impl<T: Real> EncoderPass<T> {
    pub fn last(&self) -> &Act<T> {
        &self.stages.last().unwrap().out
    }
}

impl EncoderLayout {
    pub fn backbone(in_ch: usize, stage_dims: &[usize]) -> Self {
        let mut offset = 0;
        let mut prev = in_ch;
        let stages = stage_dims
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let conv = ConvLayout::new(prev, c, 3, offset);
                offset = conv.end();
                prev = c;
                StageLayout {
                    conv,
                    pool_before: i > 0,
                    relu: true,
                }
            })
            .collect();
        EncoderLayout { stages }
    }

    pub fn param_count(&self) -> usize {
        self.stages.last().map_or(0, |s| s.conv.end())
    }

    pub fn init<T: Real, R: rand::Rng>(&self, params: &mut [T], rng: &mut R) {
        for s in &self.stages {
            s.conv.init(params, rng);
        }
    }

    pub fn forward<T: Real>(&self, params: &[T], x: Act<T>) -> EncoderPass<T> {
        let mut stages: Vec<StagePass<T>> = Vec::with_capacity(self.stages.len());
        for (i, s) in self.stages.iter().enumerate() {
            let input = if i == 0 {
                None
            } else {
                Some(&stages[i - 1].out)
            };
            let pooled;
            let src = match (input, s.pool_before) {
                (None, true) => {
                    pooled = nn::avg_pool2(&x);
                    &pooled
                }
                (None, false) => &x,
                (Some(prev), true) => {
                    pooled = nn::avg_pool2(prev);
                    &pooled
                }
                (Some(prev), false) => prev,
            };
            let (y, cache) = s.conv.forward(params, src);
            let out = if s.relu { nn::relu(y) } else { y };
            stages.push(StagePass { cache, out });
        }
        EncoderPass { stages }
    }

    /// Backpropagates per-stage output gradients. `d_outs[i]` is the
    /// gradient reaching stage `i`'s output from outside the stack.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        pass: &EncoderPass<T>,
        mut d_outs: Vec<Option<Act<T>>>,
        mut grads: Option<&mut [T]>,
        want_input_grad: bool,
    ) -> Option<Act<T>> {
        assert_eq!(d_outs.len(), self.stages.len());
        let mut carry: Option<Act<T>> = None;
        for i in (0..self.stages.len()).rev() {
            let d = match (d_outs[i].take(), carry.take()) {
                (Some(mut a), Some(b)) => {
                    a.add_assign(&b);
                    Some(a)
                }
                (a, b) => a.or(b),
            };
            let Some(d) = d else { continue };
            let s = &self.stages[i];
            let d = if s.relu {
                nn::relu_backward(&pass.stages[i].out, d)
            } else {
                d
            };
            let need_dx = i > 0 || want_input_grad;
            let dx = s.conv.backward(
                params,
                &pass.stages[i].cache,
                &d,
                grads.as_deref_mut(),
                need_dx,
            );
            let Some(dx) = dx else { continue };
            let dx = if s.pool_before {
                nn::avg_pool2_backward(&dx)
            } else {
                dx
            };
            if i == 0 {
                return Some(dx);
            }
            carry = Some(dx);
        }
        None
    }
}

/// U-Net decoder over encoder stages `f_0 .. f_{n-1}`: a 1x1 bottleneck on
/// `f_{n-1}`, then per level upsample, concatenate the skip and convolve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct DecoderLayout {
    bottleneck: Option<(ConvLayout, NormLayout)>,
    /// Deepest level first; the last one emits the single output channel and
    /// is the only one without a norm.
    levels: Vec<(ConvLayout, Option<NormLayout>)>,
}

struct LevelPass<T> {
    conv: ConvCache<T>,
    norm: Option<NormCache<T>>,
    out: Act<T>,
}

pub(crate) struct DecoderPass<T> {
    bottleneck: Option<LevelPass<T>>,
    levels: Vec<LevelPass<T>>,
}

impl<T: Real> DecoderPass<T> {
    pub fn output(&self) -> &Act<T> {
        &self.levels.last().unwrap().out
    }
}

fn conv_norm<T: Real>(
    conv: &ConvLayout,
    norm: Option<&NormLayout>,
    params: &[T],
    x: &Act<T>,
) -> (Act<T>, ConvCache<T>, Option<NormCache<T>>) {
    let (y, cache) = conv.forward(params, x);
    match norm {
        Some(l) => {
            let (y, c) = l.forward(params, &y);
            (y, cache, Some(c))
        }
        None => (y, cache, None),
    }
}

impl DecoderLayout {
    pub fn new(stage_dims: &[usize]) -> Self {
        let n = stage_dims.len();
        if n == 1 {
            return DecoderLayout {
                bottleneck: None,
                levels: vec![(ConvLayout::new(stage_dims[0], 1, 3, 0), None)],
            };
        }
        let bn_conv = ConvLayout::new(stage_dims[n - 1], stage_dims[n - 2], 1, 0);
        let bn_norm = NormLayout::new(stage_dims[n - 2], bn_conv.end());
        let bottleneck = (bn_conv, bn_norm);
        let mut offset = bn_norm.end();
        let mut levels = Vec::new();
        for k in (0..n - 1).rev() {
            let out = if k > 0 { stage_dims[k - 1] } else { 1 };
            let conv = ConvLayout::new(2 * stage_dims[k], out, 3, offset);
            let norm = (k > 0).then(|| NormLayout::new(out, conv.end()));
            offset = norm.map_or(conv.end(), |l| l.end());
            levels.push((conv, norm));
        }
        DecoderLayout {
            bottleneck: Some(bottleneck),
            levels,
        }
    }

    pub fn param_count(&self) -> usize {
        let (conv, norm) = self.levels.last().unwrap();
        norm.map_or(conv.end(), |l| l.end())
    }

    pub fn init<T: Real, R: rand::Rng>(&self, params: &mut [T], rng: &mut R) {
        if let Some((conv, norm)) = &self.bottleneck {
            conv.init(params, rng);
            norm.init(params);
        }
        for (conv, norm) in &self.levels {
            conv.init(params, rng);
            if let Some(norm) = norm {
                norm.init(params);
            }
        }
    }

    pub fn forward<T: Real>(&self, params: &[T], skips: &[&Act<T>]) -> DecoderPass<T> {
        let n = skips.len();
        let Some((bn, bn_norm)) = &self.bottleneck else {
            let (y, conv, _) = conv_norm(&self.levels[0].0, None, params, skips[0]);
            return DecoderPass {
                bottleneck: None,
                levels: vec![LevelPass {
                    conv,
                    norm: None,
                    out: nn::sigmoid(y),
                }],
            };
        };
        let (y, conv, norm) = conv_norm(bn, Some(bn_norm), params, skips[n - 1]);
        let mut cur = nn::relu(y);
        let bottleneck = Some(LevelPass {
            conv,
            norm,
            out: cur.clone(),
        });
        let mut levels = Vec::with_capacity(self.levels.len());
        for (j, (conv_l, norm_l)) in self.levels.iter().enumerate() {
            let k = n - 2 - j;
            let up = nn::upsample2(&cur);
            let cat = nn::concat(&up, skips[k]);
            let (y, conv, norm) = conv_norm(conv_l, norm_l.as_ref(), params, &cat);
            cur = if k > 0 { nn::relu(y) } else { nn::sigmoid(y) };
            levels.push(LevelPass {
                conv,
                norm,
                out: cur.clone(),
            });
        }
        DecoderPass { bottleneck, levels }
    }

    /// Returns the gradient with respect to every skip input `f_0 .. f_{n-1}`.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        pass: &DecoderPass<T>,
        d_out: Act<T>,
        mut grads: Option<&mut [T]>,
    ) -> Vec<Option<Act<T>>> {
        let Some((bn, bn_norm)) = &self.bottleneck else {
            let d = nn::sigmoid_backward(&pass.levels[0].out, d_out);
            let dx = self.levels[0]
                .0
                .backward(params, &pass.levels[0].conv, &d, grads, true);
            return vec![dx];
        };
        let n = self.levels.len() + 1;
        let mut d_skips: Vec<Option<Act<T>>> = (0..n).map(|_| None).collect();
        let mut d = d_out;
        for j in (0..self.levels.len()).rev() {
            let k = n - 2 - j;
            let lp = &pass.levels[j];
            d = if k > 0 {
                nn::relu_backward(&lp.out, d)
            } else {
                nn::sigmoid_backward(&lp.out, d)
            };
            let (conv, norm) = &self.levels[j];
            if let (Some(l), Some(c)) = (norm, &lp.norm) {
                d = l.backward(params, c, &d, grads.as_deref_mut());
            }
            let dx = conv
                .backward(params, &lp.conv, &d, grads.as_deref_mut(), true)
                .unwrap();
            let up_ch = conv.in_ch / 2;
            let (d_up, d_skip) = nn::split_channels(dx, up_ch);
            d_skips[k] = Some(d_skip);
            d = nn::upsample2_backward(&d_up);
        }
        let lp = pass.bottleneck.as_ref().unwrap();
        let d = nn::relu_backward(&lp.out, d);
        let d = bn_norm.backward(params, lp.norm.as_ref().unwrap(), &d, grads.as_deref_mut());
        d_skips[n - 1] = bn.backward(params, &lp.conv, &d, grads, true);
        d_skips
    }
}

/// Forward state kept for the backward pass of one branch.
pub(crate) struct BranchPass<T> {
    pub encoder: EncoderPass<T>,
    pub z: Matrix<T>,
    pub logits: Matrix<T>,
}

/// Everything one forward pass over a batch produces.
#[derive(Clone, Debug, PartialEq)]
pub struct PairOutputs<T> {
    pub z_im: Matrix<T>,
    pub z_draw: Matrix<T>,
    pub logits_im: Matrix<T>,
    pub logits_draw: Matrix<T>,
    /// Reconstructed drawing, `[B, 1, S, S]` in `[0, 1]`.
    pub recon: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairModel<T> {
    spec: BackboneSpec,
    num_classes: usize,
    encoder: EncoderLayout,
    decoder: DecoderLayout,
    head: LinearLayout,
    params: ParamSet<T>,
}

impl<T: Real> PairModel<T> {
    /// Seeded initialization; each parameter group draws from its own stream.
    pub fn build(spec: &BackboneSpec, num_classes: usize, seed: u64) -> Result<Self, ModelError> {
        let mut model = Self::zeroed(spec, num_classes)?;
        for g in [ParamGroup::EncDraw, ParamGroup::EncIm] {
            let mut r = seed::rng(seed, &[tag("init"), tag(g.name())]);
            model
                .encoder
                .init(&mut model.params.groups[g.index()], &mut r);
        }
        let mut r = seed::rng(seed, &[tag("init"), tag("dec_im")]);
        model
            .decoder
            .init(&mut model.params.groups[ParamGroup::DecIm.index()], &mut r);
        model.init_heads(seed);
        Ok(model)
    }

    /// Rebuilds a model around existing parameters (e.g. from a checkpoint).
    pub fn from_params(
        spec: &BackboneSpec,
        num_classes: usize,
        params: ParamSet<T>,
    ) -> Result<Self, ModelError> {
        let mut model = Self::zeroed(spec, num_classes)?;
        for g in ParamGroup::ALL {
            let expected = model.params.group(g).len();
            let got = params.group(g).len();
            if got != expected {
                return Err(ModelError::ParamCount {
                    group: g.name(),
                    got,
                    expected,
                });
            }
        }
        model.params = params;
        Ok(model)
    }

    fn zeroed(spec: &BackboneSpec, num_classes: usize) -> Result<Self, ModelError> {
        spec.validate()?;
        if num_classes == 0 {
            return Err(ModelError::InvalidSpec(
                "num_classes must be positive".to_string(),
            ));
        }
        let encoder = EncoderLayout::backbone(1, &spec.stage_dims);
        let decoder = DecoderLayout::new(&spec.stage_dims);
        let head = LinearLayout {
            in_dim: spec.embedding_dim,
            out_dim: num_classes,
            offset: 0,
        };
        let enc = encoder.param_count();
        let params = ParamSet::new([
            vec![T::zero(); enc],
            vec![T::zero(); enc],
            vec![T::zero(); decoder.param_count()],
            vec![T::zero(); head.param_count()],
            vec![T::zero(); head.param_count()],
        ]);
        Ok(PairModel {
            spec: spec.clone(),
            num_classes,
            encoder,
            decoder,
            head,
            params,
        })
    }

    fn init_heads(&mut self, seed: u64) {
        for g in [ParamGroup::HeadDraw, ParamGroup::HeadIm] {
            let mut r = seed::rng(seed, &[tag("init"), tag(g.name()), self.num_classes as u64]);
            self.head.init(&mut self.params.groups[g.index()], &mut r);
        }
    }

    /// Replaces both classifier heads with fresh `num_classes`-way heads;
    /// encoders and decoder are kept.
    pub fn rebuild_heads(&mut self, num_classes: usize, seed: u64) -> Result<(), ModelError> {
        if num_classes == 0 {
            return Err(ModelError::InvalidSpec(
                "num_classes must be positive".to_string(),
            ));
        }
        self.num_classes = num_classes;
        self.head = LinearLayout {
            in_dim: self.spec.embedding_dim,
            out_dim: num_classes,
            offset: 0,
        };
        for g in [ParamGroup::HeadDraw, ParamGroup::HeadIm] {
            self.params.groups[g.index()] = vec![T::zero(); self.head.param_count()];
        }
        self.init_heads(seed);
        Ok(())
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn embedding_dim(&self) -> usize {
        self.spec.embedding_dim
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn group(&self, g: ParamGroup) -> &[T] {
        self.params.group(g)
    }

    /// `(rows, cols)` of each layer in a head: weight then bias.
    pub fn head_shapes(&self, g: ParamGroup) -> Vec<(usize, usize)> {
        assert!(matches!(g, ParamGroup::HeadDraw | ParamGroup::HeadIm));
        vec![
            (self.head.out_dim, self.head.in_dim),
            (self.head.out_dim, 1),
        ]
    }

    pub fn cast<U: Real>(&self) -> PairModel<U> {
        PairModel {
            spec: self.spec.clone(),
            num_classes: self.num_classes,
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
            head: self.head,
            params: self.params.cast(),
        }
    }

    pub(crate) fn encoder_layout(&self) -> &EncoderLayout {
        &self.encoder
    }

    pub(crate) fn decoder_layout(&self) -> &DecoderLayout {
        &self.decoder
    }

    pub(crate) fn head_layout(&self) -> &LinearLayout {
        &self.head
    }

    pub fn check_input(&self, t: &Tensor<T>) -> Result<(), ModelError> {
        let [b, c, h, w] = t.shape();
        let m = self.spec.size_multiple();
        if b == 0 || c != 1 || h == 0 || w == 0 || h % m != 0 || w % m != 0 {
            return Err(ModelError::Shape(format!(
                "expected [B>=1, 1, H, W] with H, W multiples of {m}, got {:?}",
                t.shape()
            )));
        }
        if t.data().iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(ModelError::InputRange);
        }
        Ok(())
    }

    pub(crate) fn branch(&self, enc: ParamGroup, head: ParamGroup, x: &Tensor<T>) -> BranchPass<T> {
        let encoder = self
            .encoder
            .forward(self.params.group(enc), encoder_input(x));
        let z = nn::global_avg_pool(encoder.last());
        let logits = self.head.forward(self.params.group(head), &z);
        BranchPass { encoder, z, logits }
    }

    pub(crate) fn decode(&self, encoder: &EncoderPass<T>) -> DecoderPass<T> {
        let skips: Vec<&Act<T>> = encoder.stages.iter().map(|s| &s.out).collect();
        self.decoder
            .forward(self.params.group(ParamGroup::DecIm), &skips)
    }

    fn embed(&self, enc: ParamGroup, x: &Tensor<T>) -> Result<Matrix<T>, ModelError> {
        self.check_input(x)?;
        let pass = self
            .encoder
            .forward(self.params.group(enc), encoder_input(x));
        Ok(nn::global_avg_pool(pass.last()))
    }

    /// Pooled final-stage features of the image encoder, `[B, d]`.
    pub fn encode_image(&self, images: &Tensor<T>) -> Result<Matrix<T>, ModelError> {
        self.embed(ParamGroup::EncIm, images)
    }

    pub fn encode_drawing(&self, drawings: &Tensor<T>) -> Result<Matrix<T>, ModelError> {
        self.embed(ParamGroup::EncDraw, drawings)
    }

    /// Image-head logits, `[B, C]`.
    pub fn classify_images(&self, images: &Tensor<T>) -> Result<Matrix<T>, ModelError> {
        let z = self.encode_image(images)?;
        Ok(self.head.forward(self.params.group(ParamGroup::HeadIm), &z))
    }

    pub fn generate_drawing(&self, images: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        self.check_input(images)?;
        let pass = self
            .encoder
            .forward(self.params.group(ParamGroup::EncIm), encoder_input(images));
        Ok(self.decode(&pass).output().to_tensor())
    }

    pub fn forward_pair(&self, batch: &Batch<T>) -> Result<PairOutputs<T>, ModelError> {
        self.check_input(&batch.images)?;
        self.check_input(&batch.drawings)?;
        if batch.images.shape() != batch.drawings.shape() {
            return Err(ModelError::Shape(
                "image and drawing batches differ".to_string(),
            ));
        }
        let im = self.branch(ParamGroup::EncIm, ParamGroup::HeadIm, &batch.images);
        let dr = self.branch(ParamGroup::EncDraw, ParamGroup::HeadDraw, &batch.drawings);
        let recon = self.decode(&im.encoder).output().to_tensor();
        Ok(PairOutputs {
            z_im: im.z,
            z_draw: dr.z,
            logits_im: im.logits,
            logits_draw: dr.logits,
            recon,
        })
    }
}
