//! Full training runs and period fine-tuning.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use glyphpair_core::losses::LossBreakdown;
use glyphpair_core::split::{make_two_fold_split, subsample_labeled};
use glyphpair_core::{Corpus, Fold, LabelKind, PairModel, SplitPlan, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::DecodedCorpus;
use crate::error::{Error, Result};
use crate::eval;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub mean: LossBreakdown,
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_test_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
    pub wall_seconds: f64,
}

/// Hooks called during [`train`]; errors abort the run.
pub trait TrainObserver {
    fn on_step(&mut self, _step: u64, _epoch: usize, _loss: &LossBreakdown) -> Result<()> {
        Ok(())
    }

    /// `improved` marks a new best test accuracy.
    fn on_epoch(
        &mut self,
        _record: &EpochRecord,
        _model: &PairModel<f32>,
        _improved: bool,
    ) -> Result<()> {
        Ok(())
    }
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

/// Applies the config's labeled fraction and labeled-only switch.
pub fn effective_plan(plan: &SplitPlan, cfg: &TrainConfig) -> Result<SplitPlan> {
    let mut p = if plan.labeled_fraction == cfg.labeled_fraction {
        plan.clone()
    } else {
        subsample_labeled(plan, cfg.labeled_fraction, plan.seed)?
    };
    if cfg.labeled_only {
        p = p.without_unlabeled();
    }
    Ok(p)
}

/// Records a run needs decoded: training records plus the test fold.
pub fn needed_ids(plan: &SplitPlan) -> Vec<String> {
    let mut ids = plan.training_ids();
    ids.extend(plan.test_ids());
    ids
}

/// `cfg.epochs` passes over the seeded batch stream of `plan`.
pub fn train(
    model: PairModel<f32>,
    data: &DecodedCorpus,
    plan: &SplitPlan,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(PairModel<f32>, TrainHistory)> {
    if data.image_size() != cfg.image_size {
        return Err(Error::Config(format!(
            "data decoded at {} px but train.image_size is {}",
            data.image_size(),
            cfg.image_size
        )));
    }
    let plan = effective_plan(plan, cfg)?;
    if plan.training_ids().is_empty() {
        return Err(Error::Data("no training records".into()));
    }
    let _fpu = crate::fpu::FlushDenormals::new();
    let start = Instant::now();
    let mut trainer = Trainer::new(model, cfg.clone())?;
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let mut losses = Vec::new();
        for batch in data.epoch_batches(&plan, cfg.batch_size, cfg.seed, epoch as u64) {
            let loss = trainer.train_step(&batch?)?;
            observer.on_step(trainer.steps_taken(), epoch, &loss)?;
            losses.push(loss);
        }
        let last = epoch + 1 == cfg.epochs;
        let eval_now = cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || last);
        let test_accuracy = if eval_now && !plan.test_ids().is_empty() {
            Some(eval::test_accuracy(trainer.model(), data, &plan)?)
        } else {
            None
        };
        let improved = match (test_accuracy, history.best_test_accuracy) {
            (Some(a), Some(b)) => a > b,
            (Some(_), None) => true,
            _ => false,
        };
        if improved {
            history.best_test_accuracy = test_accuracy;
            history.best_epoch = Some(epoch);
        }
        let record = EpochRecord {
            epoch,
            steps: losses.len(),
            mean: LossBreakdown::mean(&losses),
            test_accuracy,
        };
        observer.on_epoch(&record, trainer.model(), improved)?;
        history.epochs.push(record);
    }
    history.wall_seconds = start.elapsed().as_secs_f64();
    Ok((trainer.into_model(), history))
}

/// Starts from a shape-trained checkpoint, replaces both heads with
/// `kind`-sized ones and trains on a fresh two-fold split under `kind`.
/// Records lacking a `kind` label join the unlabeled pool.
pub fn finetune_periods(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
    kind: LabelKind,
    split_seed: u64,
    train_fold: Fold,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(PairModel<f32>, TrainHistory, SplitPlan, DecodedCorpus)> {
    if kind == LabelKind::Shape {
        return Err(Error::Usage(
            "fine-tuning targets period or subperiod labels".into(),
        ));
    }
    let shape_vocab = checkpoint
        .lineage
        .get(LabelKind::Shape.as_str())
        .ok_or_else(|| Error::Data("checkpoint was not trained on shape labels".into()))?;
    if shape_vocab.as_slice() != corpus.vocab(LabelKind::Shape).labels() {
        return Err(Error::Data(format!(
            "vocabulary mismatch: checkpoint shapes {:?}, corpus shapes {:?}",
            shape_vocab,
            corpus.vocab(LabelKind::Shape).labels()
        )));
    }
    let classes = corpus.vocab(kind).len();
    if classes == 0 {
        return Err(Error::Data(format!("corpus has no {kind} labels")));
    }
    let mut model = checkpoint.model()?;
    model.rebuild_heads(classes, cfg.seed)?;
    let plan = make_two_fold_split(corpus, kind, split_seed)?.with_train_fold(train_fold)?;
    let plan = effective_plan(&plan, cfg)?;
    let data = DecodedCorpus::decode(corpus, cfg.image_size, Some(needed_ids(&plan).iter()))?;
    let (model, history) = train(model, &data, &plan, cfg, observer)?;
    Ok((model, history, plan, data))
}

/// JSON-Lines training log plus best/final checkpoints.
pub struct RunRecorder {
    log: BufWriter<File>,
    checkpoint_dir: Option<std::path::PathBuf>,
    template: Checkpoint,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine<'a> {
    Step {
        step: u64,
        epoch: usize,
        loss: &'a LossBreakdown,
    },
    Epoch(&'a EpochRecord),
}

impl RunRecorder {
    /// `template` supplies everything but the parameters.
    pub fn create(
        log_path: &Path,
        checkpoint_dir: Option<&Path>,
        template: Checkpoint,
    ) -> Result<Self> {
        if let Some(d) = log_path.parent() {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let f = File::create(log_path).map_err(|e| Error::io(log_path, e))?;
        Ok(RunRecorder {
            log: BufWriter::new(f),
            checkpoint_dir: checkpoint_dir.map(Path::to_path_buf),
            template,
        })
    }

    fn line(&mut self, l: &LogLine) -> Result<()> {
        serde_json::to_writer(&mut self.log, l).expect("serializable log line");
        self.log
            .write_all(b"\n")
            .map_err(|e| Error::io(Path::new("train_log.jsonl"), e))
    }

    pub fn checkpoint_for(&self, model: &PairModel<f32>) -> Checkpoint {
        let mut c = Checkpoint::from_model(
            model,
            self.template.label_kind,
            self.template.vocabulary.clone(),
            self.template.config_hash.clone(),
        );
        c.lineage = self.template.lineage.clone();
        c
    }

    pub fn finish(mut self) -> Result<()> {
        self.log
            .flush()
            .map_err(|e| Error::io(Path::new("train_log.jsonl"), e))
    }
}

impl TrainObserver for RunRecorder {
    fn on_step(&mut self, step: u64, epoch: usize, loss: &LossBreakdown) -> Result<()> {
        self.line(&LogLine::Step { step, epoch, loss })
    }

    fn on_epoch(
        &mut self,
        record: &EpochRecord,
        model: &PairModel<f32>,
        improved: bool,
    ) -> Result<()> {
        self.line(&LogLine::Epoch(record))?;
        if improved {
            if let Some(d) = &self.checkpoint_dir {
                self.checkpoint_for(model).save(&d.join("best.ckpt.json"))?;
            }
        }
        Ok(())
    }
}
