//! Similarity, classification and generation losses with their gradients.
//!
//! Every `*_grad` function returns the gradient with respect to its first
//! argument only; the second argument is a constant.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EncoderLayout, StageLayout};
use crate::nn::{Act, ConvLayout};
use crate::real::Real;
use crate::seed::{self, tag};
use crate::tensor::{Matrix, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("{which} embedding row {row} has zero norm")]
    ZeroNorm { which: &'static str, row: usize },
    #[error("row {row}: label {label} is outside 0..{classes}")]
    LabelOutOfRange {
        row: usize,
        label: u32,
        classes: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("perceptual stage {stage} out of range (extractor has {available})")]
    StageOutOfRange { stage: usize, available: usize },
    #[error("non-finite {0} loss")]
    NonFinite(&'static str),
    #[error("invalid loss config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub gamma_sim: f64,
    pub gamma_ce: f64,
    pub gamma_gen: f64,
    pub alpha: f64,
    pub beta: f64,
    pub perceptual_stages: Vec<usize>,
    /// Weight of the drawing-branch cross-entropy. It is only applied
    /// while `gamma_ce > 0`.
    pub draw_ce_weight: f64,
    /// Seed of the frozen perceptual extractor's weights.
    pub perceptual_seed: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma_sim: 0.8,
            gamma_ce: 0.05,
            gamma_gen: 0.15,
            alpha: 0.3,
            beta: 0.7,
            perceptual_stages: vec![0, 1, 2],
            draw_ce_weight: 1.0,
            perceptual_seed: 0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        let weights = [
            ("gamma_sim", self.gamma_sim),
            ("gamma_ce", self.gamma_ce),
            ("gamma_gen", self.gamma_gen),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("draw_ce_weight", self.draw_ce_weight),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(LossError::Config(format!(
                    "{name} = {w} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    pub fn generation_active(&self) -> bool {
        self.gamma_gen > 0.0 && (self.alpha > 0.0 || self.beta > 0.0)
    }

    /// Whether the perceptual extractor has to run at all.
    pub fn perceptual_active(&self) -> bool {
        self.gamma_gen > 0.0 && self.beta > 0.0
    }
}

/// Per-component values of one step, averaged over their rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub sim: f64,
    pub ce_im: f64,
    pub ce_draw: f64,
    pub gen_pixel: f64,
    pub gen_perceptual: f64,
    pub total_image_loss: f64,
    /// Rows that carried a label; 0 means both CE terms are the empty-set 0.
    pub labeled_rows: usize,
}

impl LossBreakdown {
    pub fn generation(&self, cfg: &LossConfig) -> f64 {
        cfg.alpha * self.gen_pixel + cfg.beta * self.gen_perceptual
    }

    /// Component-wise mean; `labeled_rows` is summed.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let avg = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        LossBreakdown {
            sim: avg(|b| b.sim),
            ce_im: avg(|b| b.ce_im),
            ce_draw: avg(|b| b.ce_draw),
            gen_pixel: avg(|b| b.gen_pixel),
            gen_perceptual: avg(|b| b.gen_perceptual),
            total_image_loss: avg(|b| b.total_image_loss),
            labeled_rows: items.iter().map(|b| b.labeled_rows).sum(),
        }
    }
}

/// Fills a [`LossBreakdown`]; fails on the first non-finite component.
pub fn combined_image_loss(
    sim: f64,
    ce_im: f64,
    ce_draw: f64,
    gen_pixel: f64,
    gen_perceptual: f64,
    labeled_rows: usize,
    cfg: &LossConfig,
) -> Result<LossBreakdown, LossError> {
    for (name, v) in [
        ("sim", sim),
        ("ce_im", ce_im),
        ("ce_draw", ce_draw),
        ("gen_pixel", gen_pixel),
        ("gen_perceptual", gen_perceptual),
    ] {
        if !v.is_finite() {
            return Err(LossError::NonFinite(name));
        }
    }
    let total = cfg.gamma_sim * sim
        + cfg.gamma_ce * ce_im
        + cfg.gamma_gen * (cfg.alpha * gen_pixel + cfg.beta * gen_perceptual);
    if !total.is_finite() {
        return Err(LossError::NonFinite("total_image_loss"));
    }
    Ok(LossBreakdown {
        sim,
        ce_im,
        ce_draw,
        gen_pixel,
        gen_perceptual,
        total_image_loss: total,
        labeled_rows,
    })
}

fn same_shape<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<(), LossError> {
    if a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0 {
        return Err(LossError::Shape(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// Batch mean of `-cos(z_im_i, z_draw_i)`.
pub fn similarity_loss<T: Real>(z_im: &Matrix<T>, z_draw: &Matrix<T>) -> Result<T, LossError> {
    similarity_loss_grad(z_im, z_draw).map(|(v, _)| v)
}

/// Also returns `dL/dz_im`; `z_draw` is held constant.
pub fn similarity_loss_grad<T: Real>(
    z_im: &Matrix<T>,
    z_draw: &Matrix<T>,
) -> Result<(T, Matrix<T>), LossError> {
    same_shape(z_im, z_draw)?;
    let b = z_im.rows();
    let inv_b = T::one() / T::lit(b as f64);
    let mut grad = Matrix::zeros(b, z_im.cols());
    let mut total = T::zero();
    for i in 0..b {
        let (a, d) = (z_im.row(i), z_draw.row(i));
        let (na, nd) = (norm(a), norm(d));
        if na == T::zero() {
            return Err(LossError::ZeroNorm {
                which: "image",
                row: i,
            });
        }
        if nd == T::zero() {
            return Err(LossError::ZeroNorm {
                which: "drawing",
                row: i,
            });
        }
        let dot: T = a.iter().zip(d).map(|(x, y)| *x * *y).sum();
        let cos = dot / (na * nd);
        total -= cos;
        // d cos / d a = d / (|a||d|) - cos * a / |a|^2
        for ((g, &x), &y) in grad.row_mut(i).iter_mut().zip(a).zip(d) {
            *g = -(y / (na * nd) - cos * x / (na * na)) * inv_b;
        }
    }
    Ok((total * inv_b, grad))
}

/// Cross-entropy averaged over the labeled rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CeOutput<T> {
    pub value: T,
    pub labeled_rows: usize,
    /// `dL/dlogits`; zero on unlabeled rows.
    pub grad: Matrix<T>,
}

pub fn classification_loss<T: Real>(
    logits: &Matrix<T>,
    labels: &[u32],
    mask: &[bool],
) -> Result<CeOutput<T>, LossError> {
    let (b, c) = (logits.rows(), logits.cols());
    if labels.len() != b || mask.len() != b {
        return Err(LossError::Shape(format!(
            "{b} logit rows, {} labels, {} mask entries",
            labels.len(),
            mask.len()
        )));
    }
    let m = mask.iter().filter(|&&x| x).count();
    let mut grad = Matrix::zeros(b, c);
    if m == 0 {
        return Ok(CeOutput {
            value: T::zero(),
            labeled_rows: 0,
            grad,
        });
    }
    let inv_m = T::one() / T::lit(m as f64);
    let mut total = T::zero();
    for i in (0..b).filter(|&i| mask[i]) {
        let y = labels[i];
        if y as usize >= c {
            return Err(LossError::LabelOutOfRange {
                row: i,
                label: y,
                classes: c,
            });
        }
        let row = logits.row(i);
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&v| (v - mx).exp()).sum();
        let lse = mx + sum.ln();
        total += lse - row[y as usize];
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            let p = (row[j] - lse).exp();
            *g = (p - if j == y as usize { T::one() } else { T::zero() }) * inv_m;
        }
    }
    Ok(CeOutput {
        value: total * inv_m,
        labeled_rows: m,
        grad,
    })
}

fn same_tensor_shape<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(), LossError> {
    if a.shape() != b.shape() {
        return Err(LossError::Shape(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean squared error over all elements and `dL/drecon`.
pub fn pixel_loss_grad<T: Real>(
    recon: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(T, Tensor<T>), LossError> {
    same_tensor_shape(recon, target)?;
    let n = T::lit(recon.data().len() as f64);
    let mut total = T::zero();
    let grad = recon
        .data()
        .iter()
        .zip(target.data())
        .map(|(&r, &t)| {
            let d = r - t;
            total += d * d;
            T::lit(2.0) * d / n
        })
        .collect();
    Ok((total / n, Tensor::from_vec(recon.shape(), grad)))
}

/// Frozen convolutional feature extractor for the perceptual term.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualExtractor<T> {
    layout: EncoderLayout,
    params: Vec<T>,
    stages: Vec<usize>,
}

impl<T: Real> PerceptualExtractor<T> {
    /// Leading stages of the backbone architecture with seeded random
    /// weights. Only as many stages as `stages` reaches are built.
    pub fn random(stage_dims: &[usize], stages: &[usize], seed: u64) -> Result<Self, LossError> {
        let depth = Self::check_stages(stages, stage_dims.len())?;
        let layout = EncoderLayout::backbone(1, &stage_dims[..depth]);
        let mut params = vec![T::zero(); layout.param_count()];
        layout.init(&mut params, &mut seed::rng(seed, &[tag("perceptual")]));
        Ok(PerceptualExtractor {
            layout,
            params,
            stages: stages.to_vec(),
        })
    }

    /// One stage computing `1 * x + 0`: the distance reduces to plain MSE.
    pub fn identity() -> Self {
        let conv = ConvLayout::new(1, 1, 1, 0);
        let layout = EncoderLayout {
            stages: vec![StageLayout {
                conv,
                pool_before: false,
                relu: false,
            }],
        };
        PerceptualExtractor {
            layout,
            params: vec![T::one(), T::zero()],
            stages: vec![0],
        }
    }

    fn check_stages(stages: &[usize], available: usize) -> Result<usize, LossError> {
        if stages.is_empty() {
            return Err(LossError::Config(String::from(
                "perceptual_stages is empty",
            )));
        }
        match stages.iter().find(|&&s| s >= available) {
            Some(&stage) => Err(LossError::StageOutOfRange { stage, available }),
            None => Ok(stages.iter().max().unwrap() + 1),
        }
    }

    pub fn stages(&self) -> &[usize] {
        &self.stages
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    fn features(&self, x: &Tensor<T>) -> crate::model::EncoderPass<T> {
        self.layout.forward(&self.params, Act::from_tensor(x))
    }

    pub fn distance(&self, recon: &Tensor<T>, target: &Tensor<T>) -> Result<T, LossError> {
        same_tensor_shape(recon, target)?;
        let (fr, ft) = (self.features(recon), self.features(target));
        let mut total = T::zero();
        for &s in &self.stages {
            total += mse(&fr.stages[s].out.data, &ft.stages[s].out.data);
        }
        Ok(total / T::lit(self.stages.len() as f64))
    }

    /// Distance and its gradient with respect to `recon`.
    pub fn distance_grad(
        &self,
        recon: &Tensor<T>,
        target: &Tensor<T>,
    ) -> Result<(T, Tensor<T>), LossError> {
        same_tensor_shape(recon, target)?;
        let (fr, ft) = (self.features(recon), self.features(target));
        let inv_s = T::one() / T::lit(self.stages.len() as f64);
        let mut total = T::zero();
        let mut d_outs: Vec<Option<Act<T>>> = (0..self.layout.stages.len()).map(|_| None).collect();
        for &s in &self.stages {
            let (a, b) = (&fr.stages[s].out, &ft.stages[s].out);
            total += mse(&a.data, &b.data);
            let scale = T::lit(2.0) * inv_s / T::lit(a.data.len() as f64);
            let mut d = a.clone();
            for (g, &t) in d.data.iter_mut().zip(&b.data) {
                *g = (*g - t) * scale;
            }
            match &mut d_outs[s] {
                Some(acc) => acc.add_assign(&d),
                slot => *slot = Some(d),
            }
        }
        let dx = self
            .layout
            .backward(&self.params, &fr, d_outs, None, true)
            .expect("input gradient requested");
        Ok((total * inv_s, dx.to_tensor()))
    }
}

fn mse<T: Real>(a: &[T], b: &[T]) -> T {
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    s / T::lit(a.len() as f64)
}

/// `α·pixel + β·perceptual` plus both parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationLoss<T> {
    pub total: T,
    pub pixel: T,
    pub perceptual: T,
}

pub fn generation_loss<T: Real>(
    recon: &Tensor<T>,
    drawing: &Tensor<T>,
    cfg: &LossConfig,
    extractor: &PerceptualExtractor<T>,
) -> Result<GenerationLoss<T>, LossError> {
    let (pixel, _) = pixel_loss_grad(recon, drawing)?;
    let perceptual = extractor.distance(recon, drawing)?;
    let total = T::lit(cfg.alpha) * pixel + T::lit(cfg.beta) * perceptual;
    Ok(GenerationLoss {
        total,
        pixel,
        perceptual,
    })
}
