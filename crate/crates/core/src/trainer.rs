//! Gradient routing and single training steps.
//!
//! Routing per parameter group, with `ce_on = γ2 > 0 ∧ labeled rows > 0`
//! and `gen_on = γ3 > 0 ∧ (α > 0 ∨ β > 0)`:
//!
//! | group       | receives                                  |
//! |-------------|-------------------------------------------|
//! | `enc_im`    | γ1·L_Sim + γ2·CE(image) + γ3·L_Gen        |
//! | `dec_im`    | γ3·L_Gen                                  |
//! | `head_im`   | γ2·CE(image)                              |
//! | `enc_draw`  | w·CE(drawing), only while `ce_on`         |
//! | `head_draw` | w·CE(drawing), only while `ce_on`         |
//!
//! `z_draw` is a constant inside L_Sim. A group with no incoming path is
//! inactive for the step and the optimizer leaves it bitwise unchanged.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::Batch;
use crate::losses::{self, LossBreakdown, LossConfig, LossError, PerceptualExtractor};
use crate::model::{ModelError, PairModel, ParamGroup, ParamSet};
use crate::nn::{self, Act};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::real::Real;
use crate::split::LabeledFraction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite {what} at step {step}: {breakdown:?}")]
    NonFinite {
        what: String,
        step: u64,
        breakdown: LossBreakdown,
    },
    #[error("invalid training config: {0}")]
    Config(String),
}

/// What the image side is trained on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Weighted similarity, classification and generation losses.
    #[default]
    Full,
    /// Image encoder and head trained with unweighted CE on labeled rows;
    /// drawings, decoder and unlabeled rows are ignored.
    ImageOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub objective: Objective,
    pub epochs: usize,
    pub batch_size: usize,
    pub image_size: usize,
    pub seed: u64,
    pub labeled_fraction: LabeledFraction,
    /// Drop the unlabeled pool (labeled-only baseline).
    pub labeled_only: bool,
    /// Evaluate on the test fold every this many epochs; 0 disables.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            objective: Objective::Full,
            epochs: 40,
            batch_size: 32,
            image_size: 64,
            seed: 0,
            labeled_fraction: LabeledFraction::Full,
            labeled_only: false,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.loss.validate()?;
        self.optimizer.validate().map_err(TrainError::Config)?;
        if self.epochs == 0 {
            return Err(TrainError::Config(String::from("epochs must be >= 1")));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config(String::from("batch_size must be >= 1")));
        }
        if self.image_size == 0 {
            return Err(TrainError::Config(String::from("image_size must be >= 1")));
        }
        Ok(())
    }
}

/// Which parameter groups the optimizer updates on a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveGroups(pub [bool; 5]);

impl ActiveGroups {
    pub fn for_step(loss: &LossConfig, objective: Objective, labeled_rows: usize) -> Self {
        let mut a = [false; 5];
        let set = |a: &mut [bool; 5], g: ParamGroup, v: bool| a[g.index()] = v;
        match objective {
            Objective::Full => {
                let ce_on = loss.gamma_ce > 0.0 && labeled_rows > 0;
                let gen_on = loss.generation_active();
                set(
                    &mut a,
                    ParamGroup::EncIm,
                    loss.gamma_sim > 0.0 || ce_on || gen_on,
                );
                set(&mut a, ParamGroup::DecIm, gen_on);
                set(&mut a, ParamGroup::HeadIm, ce_on);
                let draw = ce_on && loss.draw_ce_weight > 0.0;
                set(&mut a, ParamGroup::EncDraw, draw);
                set(&mut a, ParamGroup::HeadDraw, draw);
            }
            Objective::ImageOnly => {
                set(&mut a, ParamGroup::EncIm, labeled_rows > 0);
                set(&mut a, ParamGroup::HeadIm, labeled_rows > 0);
            }
        }
        ActiveGroups(a)
    }

    pub fn is_active(&self, g: ParamGroup) -> bool {
        self.0[g.index()]
    }
}

/// Loss values and routed gradients for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct StepGradients<T> {
    pub breakdown: LossBreakdown,
    pub grads: ParamSet<T>,
    pub active: ActiveGroups,
}

/// Forward and routed backward pass; parameters are not touched.
pub fn compute_gradients<T: Real>(
    model: &PairModel<T>,
    extractor: &PerceptualExtractor<T>,
    batch: &Batch<T>,
    loss: &LossConfig,
    objective: Objective,
) -> Result<StepGradients<T>, TrainError> {
    gradients_impl(model, extractor, batch, loss, objective, true)
}

/// Loss values only.
pub fn evaluate_losses<T: Real>(
    model: &PairModel<T>,
    extractor: &PerceptualExtractor<T>,
    batch: &Batch<T>,
    loss: &LossConfig,
    objective: Objective,
) -> Result<LossBreakdown, TrainError> {
    gradients_impl(model, extractor, batch, loss, objective, false).map(|s| s.breakdown)
}

fn gradients_impl<T: Real>(
    model: &PairModel<T>,
    extractor: &PerceptualExtractor<T>,
    batch: &Batch<T>,
    cfg: &LossConfig,
    objective: Objective,
    backward: bool,
) -> Result<StepGradients<T>, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    model.check_input(&batch.images)?;
    let full = objective == Objective::Full;
    if full {
        model.check_input(&batch.drawings)?;
    }
    let lit = |v: f64| T::lit(v);
    let im = model.branch(ParamGroup::EncIm, ParamGroup::HeadIm, &batch.images);
    let ce_im = losses::classification_loss(&im.logits, &batch.labels, &batch.labeled_mask)?;
    let labeled_rows = ce_im.labeled_rows;
    let active = ActiveGroups::for_step(cfg, objective, labeled_rows);
    let mut grads = ParamSet::zeros_like(model.params());

    if !full {
        let breakdown = LossBreakdown {
            ce_im: ce_im.value.as_f64(),
            total_image_loss: ce_im.value.as_f64(),
            labeled_rows,
            ..Default::default()
        };
        if !breakdown.total_image_loss.is_finite() {
            return Err(LossError::NonFinite("ce_im").into());
        }
        if backward && labeled_rows > 0 {
            let head = model.head_layout();
            let dz = head.backward(
                model.group(ParamGroup::HeadIm),
                &im.z,
                &ce_im.grad,
                Some(grads.group_mut(ParamGroup::HeadIm)),
            );
            let last = im.encoder.last();
            let mut d_outs: Vec<Option<Act<T>>> =
                (0..im.encoder.stages.len()).map(|_| None).collect();
            *d_outs.last_mut().unwrap() = Some(nn::global_avg_pool_backward(&dz, last.h, last.w));
            model.encoder_layout().backward(
                model.group(ParamGroup::EncIm),
                &im.encoder,
                d_outs,
                Some(grads.group_mut(ParamGroup::EncIm)),
                false,
            );
        }
        return Ok(StepGradients {
            breakdown,
            grads,
            active,
        });
    }

    let dr = model.branch(ParamGroup::EncDraw, ParamGroup::HeadDraw, &batch.drawings);
    let ce_draw = losses::classification_loss(&dr.logits, &batch.labels, &batch.labeled_mask)?;
    let sim = if cfg.gamma_sim > 0.0 {
        Some(losses::similarity_loss_grad(&im.z, &dr.z)?)
    } else {
        None
    };
    let gen_on = cfg.generation_active();
    let mut gen = None;
    if gen_on {
        let dec = model.decode(&im.encoder);
        let recon = dec.output().to_tensor();
        let (pixel, d_pix) = losses::pixel_loss_grad(&recon, &batch.drawings)?;
        let perc = if cfg.beta > 0.0 {
            Some(extractor.distance_grad(&recon, &batch.drawings)?)
        } else {
            None
        };
        gen = Some((dec, pixel, d_pix, perc));
    }
    let breakdown = losses::combined_image_loss(
        sim.as_ref().map_or(0.0, |s| s.0.as_f64()),
        ce_im.value.as_f64(),
        ce_draw.value.as_f64(),
        gen.as_ref().map_or(0.0, |g| g.1.as_f64()),
        gen.as_ref()
            .and_then(|g| g.3.as_ref())
            .map_or(0.0, |p| p.0.as_f64()),
        labeled_rows,
        cfg,
    )?;
    if !backward {
        return Ok(StepGradients {
            breakdown,
            grads,
            active,
        });
    }

    let enc = model.encoder_layout();
    let n_stages = im.encoder.stages.len();
    let last = im.encoder.last();
    let (h, w) = (last.h, last.w);

    // Image side.
    if active.is_active(ParamGroup::EncIm) {
        let mut dz = match &sim {
            Some((_, g)) => {
                let mut g = g.clone();
                g.scale(lit(cfg.gamma_sim));
                g
            }
            None => crate::tensor::Matrix::zeros(im.z.rows(), im.z.cols()),
        };
        if active.is_active(ParamGroup::HeadIm) {
            let mut dl = ce_im.grad.clone();
            dl.scale(lit(cfg.gamma_ce));
            let dzh = model.head_layout().backward(
                model.group(ParamGroup::HeadIm),
                &im.z,
                &dl,
                Some(grads.group_mut(ParamGroup::HeadIm)),
            );
            dz.add_assign(&dzh);
        }
        let mut d_outs: Vec<Option<Act<T>>> = (0..n_stages).map(|_| None).collect();
        d_outs[n_stages - 1] = Some(nn::global_avg_pool_backward(&dz, h, w));
        if let Some((dec, _, d_pix, perc)) = &gen {
            let scale_pix = lit(cfg.gamma_gen * cfg.alpha);
            let scale_perc = lit(cfg.gamma_gen * cfg.beta);
            let mut d_recon = d_pix.clone();
            for (i, v) in d_recon.data_mut().iter_mut().enumerate() {
                *v *= scale_pix;
                if let Some((_, dp)) = perc {
                    *v += scale_perc * dp.data()[i];
                }
            }
            let skips = model.decoder_layout().backward(
                model.group(ParamGroup::DecIm),
                dec,
                Act::from_tensor(&d_recon),
                Some(grads.group_mut(ParamGroup::DecIm)),
            );
            for (slot, d) in d_outs.iter_mut().zip(skips) {
                match (slot.as_mut(), d) {
                    (Some(acc), Some(d)) => acc.add_assign(&d),
                    (None, d) => *slot = d,
                    (Some(_), None) => {}
                }
            }
        }
        enc.backward(
            model.group(ParamGroup::EncIm),
            &im.encoder,
            d_outs,
            Some(grads.group_mut(ParamGroup::EncIm)),
            false,
        );
    }

    // Drawing side: CE only.
    if active.is_active(ParamGroup::EncDraw) {
        let mut dl = ce_draw.grad.clone();
        dl.scale(lit(cfg.draw_ce_weight));
        let dz = model.head_layout().backward(
            model.group(ParamGroup::HeadDraw),
            &dr.z,
            &dl,
            Some(grads.group_mut(ParamGroup::HeadDraw)),
        );
        let mut d_outs: Vec<Option<Act<T>>> = (0..n_stages).map(|_| None).collect();
        d_outs[n_stages - 1] = Some(nn::global_avg_pool_backward(&dz, h, w));
        enc.backward(
            model.group(ParamGroup::EncDraw),
            &dr.encoder,
            d_outs,
            Some(grads.group_mut(ParamGroup::EncDraw)),
            false,
        );
    }
    Ok(StepGradients {
        breakdown,
        grads,
        active,
    })
}

/// Owns a model, its optimizer and the frozen perceptual extractor.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    model: PairModel<T>,
    extractor: PerceptualExtractor<T>,
    optimizer: Optimizer,
    cfg: TrainConfig,
    step: u64,
}

impl<T: Real> Trainer<T> {
    pub fn new(model: PairModel<T>, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let extractor = if cfg.objective == Objective::Full && cfg.loss.perceptual_active() {
            PerceptualExtractor::random(
                &model.spec().stage_dims,
                &cfg.loss.perceptual_stages,
                cfg.loss.perceptual_seed,
            )?
        } else {
            PerceptualExtractor::identity()
        };
        Ok(Self::with_extractor(model, cfg, extractor))
    }

    pub fn with_extractor(
        model: PairModel<T>,
        cfg: TrainConfig,
        extractor: PerceptualExtractor<T>,
    ) -> Self {
        let optimizer = Optimizer::new(cfg.optimizer.clone());
        Trainer {
            model,
            extractor,
            optimizer,
            cfg,
            step: 0,
        }
    }

    pub fn model(&self) -> &PairModel<T> {
        &self.model
    }

    pub fn into_model(self) -> PairModel<T> {
        self.model
    }

    pub fn extractor(&self) -> &PerceptualExtractor<T> {
        &self.extractor
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Computes routed gradients and applies one optimizer step. On error
    /// the model is unchanged.
    pub fn train_step(&mut self, batch: &Batch<T>) -> Result<LossBreakdown, TrainError> {
        let sg = compute_gradients(
            &self.model,
            &self.extractor,
            batch,
            &self.cfg.loss,
            self.cfg.objective,
        )
        .map_err(|e| match e {
            TrainError::Loss(LossError::NonFinite(what)) => TrainError::NonFinite {
                what: format!("{what} loss"),
                step: self.step,
                breakdown: LossBreakdown::default(),
            },
            e => e,
        })?;
        for g in ParamGroup::ALL {
            if sg.active.is_active(g) && !sg.grads.group(g).iter().all(|v| v.is_finite()) {
                return Err(TrainError::NonFinite {
                    what: format!("{} gradient", g.name()),
                    step: self.step,
                    breakdown: sg.breakdown,
                });
            }
        }
        self.optimizer
            .step(self.model.params_mut(), &sg.grads, &sg.active.0);
        self.step += 1;
        Ok(sg.breakdown)
    }

    pub fn evaluate(&self, batch: &Batch<T>) -> Result<LossBreakdown, TrainError> {
        evaluate_losses(
            &self.model,
            &self.extractor,
            batch,
            &self.cfg.loss,
            self.cfg.objective,
        )
    }
}
