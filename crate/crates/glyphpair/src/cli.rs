//! The `glyphpair` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use glyphpair_core::inspect::localization_map;
use glyphpair_core::metrics::retrieval::rank_by_cosine;
use glyphpair_core::split::{make_two_fold_split, subsample_labeled};
use glyphpair_core::{Corpus, Fold, LabelKind, PairModel, SplitPlan, Tensor};
use serde::Serialize;

use crate::checkpoint::{config_hash, Checkpoint};
use crate::config::RunConfig;
use crate::dataset::DecodedCorpus;
use crate::error::{exit, Error, Result};
use crate::manifest::{load_manifest, write_json};
use crate::train::{finetune_periods, needed_ids, train, RunRecorder, TrainHistory};
use crate::{eval, imageio, overlay, synthio};

#[derive(Debug, Parser)]
#[command(name = "glyphpair", version = crate::VERSION, about = "Drawing-guided image encoders: data, training and evaluation")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CheckpointArg {
    /// Defaults to `{output_dir}/train/final.ckpt.json`.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic paired corpus next to `corpus.manifest`.
    Synth,
    /// Compute the two-fold split (and labeled subsample) of the corpus.
    Split,
    /// Train on the configured split.
    Train,
    /// Retrain a shape checkpoint on period or subperiod labels.
    Finetune {
        #[command(flatten)]
        ckpt: CheckpointArg,
        #[arg(long, default_value = "period")]
        label_kind: LabelKind,
    },
    /// Test-fold classification accuracy.
    EvalClass {
        #[command(flatten)]
        ckpt: CheckpointArg,
    },
    /// Test-fold image retrieval mAP and P@k.
    EvalRetrieval {
        #[command(flatten)]
        ckpt: CheckpointArg,
    },
    /// Edge metrics of generated drawings on the test fold.
    EvalEdges {
        #[command(flatten)]
        ckpt: CheckpointArg,
    },
    /// Write generated drawings as PNG.
    Generate {
        #[command(flatten)]
        ckpt: CheckpointArg,
        /// Corpus record ids; the test fold when neither ids nor images are given.
        #[arg(long = "id", value_name = "ID")]
        ids: Vec<String>,
        /// Image files outside the corpus.
        #[arg(long = "image", value_name = "FILE")]
        images: Vec<PathBuf>,
    },
    /// Rank corpus records by cosine similarity to a query image.
    Retrieve {
        #[command(flatten)]
        ckpt: CheckpointArg,
        /// A corpus record id or an image file.
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Class localization maps as heat overlays.
    Explain {
        #[command(flatten)]
        ckpt: CheckpointArg,
        /// Record ids; the first `--limit` test ids when omitted.
        #[arg(long = "id", value_name = "ID")]
        ids: Vec<String>,
        /// Class name; defaults to the record's label, else the prediction.
        #[arg(long)]
        class: Option<String>,
        #[arg(long, default_value_t = 8)]
        limit: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Split => "split",
            Command::Train => "train",
            Command::Finetune { .. } => "finetune",
            Command::EvalClass { .. } => "eval-class",
            Command::EvalRetrieval { .. } => "eval-retrieval",
            Command::EvalEdges { .. } => "eval-edges",
            Command::Generate { .. } => "generate",
            Command::Retrieve { .. } => "retrieve",
            Command::Explain { .. } => "explain",
        }
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    split_seed: u64,
    config: &'a RunConfig,
    config_hash: String,
    wall_seconds: f64,
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let out = cfg.output_dir.join(cli.command.name());
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match &cli.command {
        Command::Synth => synth(&cfg)?,
        Command::Split => split(&cfg, &out)?,
        Command::Train => train_cmd(&cfg, &out)?,
        Command::Finetune { ckpt, label_kind } => {
            finetune(&cfg, &out, &checkpoint_path(&cfg, ckpt), *label_kind)?
        }
        Command::EvalClass { ckpt } => {
            let s = Session::open(&cfg, &checkpoint_path(&cfg, ckpt))?;
            let report = eval::class_report(&s.model, &s.data, &s.plan, &s.checkpoint.vocabulary)?;
            emit(&out.join("eval_class.json"), &report)?;
        }
        Command::EvalRetrieval { ckpt } => {
            let s = Session::open(&cfg, &checkpoint_path(&cfg, ckpt))?;
            let report = eval::retrieval_report(&s.model, &s.data, &s.plan, &cfg.eval.ks)?;
            emit(&out.join("eval_retrieval.json"), &report)?;
        }
        Command::EvalEdges { ckpt } => {
            let s = Session::open(&cfg, &checkpoint_path(&cfg, ckpt))?;
            let (ids, _) = eval::test_set(&s.plan);
            let report = eval::edge_report(&s.model, &s.data, &ids, &cfg.eval.edges)?;
            emit(&out.join("eval_edges.json"), &report)?;
        }
        Command::Generate { ckpt, ids, images } => {
            generate(&cfg, &out, &checkpoint_path(&cfg, ckpt), ids, images)?
        }
        Command::Retrieve { ckpt, query, k } => {
            retrieve(&cfg, &out, &checkpoint_path(&cfg, ckpt), query, *k)?
        }
        Command::Explain {
            ckpt,
            ids,
            class,
            limit,
        } => explain(
            &cfg,
            &out,
            &checkpoint_path(&cfg, ckpt),
            ids,
            class.as_deref(),
            *limit,
        )?,
    }
    let meta = RunMeta {
        command: cli.command.name(),
        version: crate::VERSION,
        seed: cfg.train.seed,
        split_seed: cfg.split.seed,
        config: &cfg,
        config_hash: config_hash(&cfg),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join("run_meta.json"), &meta)
}

fn checkpoint_path(cfg: &RunConfig, arg: &CheckpointArg) -> PathBuf {
    arg.checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("train").join("final.ckpt.json"))
}

/// Writes `value` to `path` and echoes it on standard output.
fn emit<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)?;
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable report")
    );
    Ok(())
}

fn train_fold(cfg: &RunConfig) -> Fold {
    Fold::from_index(cfg.split.train_fold).expect("validated train_fold")
}

/// The configured split: two folds, the chosen training fold, then the
/// labeled subsample.
pub fn configured_plan(cfg: &RunConfig, corpus: &Corpus, kind: LabelKind) -> Result<SplitPlan> {
    let plan =
        make_two_fold_split(corpus, kind, cfg.split.seed)?.with_train_fold(train_fold(cfg))?;
    Ok(subsample_labeled(
        &plan,
        cfg.train.labeled_fraction,
        cfg.split.seed,
    )?)
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let mut synth_cfg = cfg.synth.clone();
    synth_cfg.image_size = cfg.corpus.image_size.unwrap_or(synth_cfg.image_size);
    let manifest = &cfg.corpus.manifest;
    let dir = manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = manifest
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| {
            Error::Config(format!(
                "corpus.manifest `{}` has no file name",
                manifest.display()
            ))
        })?;
    let (corpus, _) = synthio::generate_corpus(&synth_cfg, dir, name)?;
    eprintln!("wrote {} records to {}", corpus.len(), manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct SplitSummary {
    label_kind: LabelKind,
    fold_sizes: (usize, usize),
    training_labeled: usize,
    test: usize,
    unlabeled: usize,
}

fn split(cfg: &RunConfig, out: &Path) -> Result<()> {
    let corpus = load_manifest(&cfg.corpus.manifest)?;
    let plan = configured_plan(cfg, &corpus, cfg.split.label_kind)?;
    write_json(&out.join("split.json"), &plan)?;
    let summary = SplitSummary {
        label_kind: plan.label_kind,
        fold_sizes: plan.fold_sizes(),
        training_labeled: plan.active_labeled_ids.len(),
        test: plan.test_ids().len(),
        unlabeled: plan.unlabeled_ids().len(),
    };
    emit(&out.join("split_summary.json"), &summary)
}

fn save_run(
    out: &Path,
    recorder: RunRecorder,
    model: &PairModel<f32>,
    plan: &SplitPlan,
    history: &TrainHistory,
) -> Result<()> {
    recorder
        .checkpoint_for(model)
        .save(&out.join("final.ckpt.json"))?;
    recorder.finish()?;
    write_json(&out.join("split.json"), plan)?;
    emit(&out.join("history.json"), history)
}

fn train_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let corpus = load_manifest(&cfg.corpus.manifest)?;
    let kind = cfg.split.label_kind;
    let plan = configured_plan(cfg, &corpus, kind)?;
    let data = DecodedCorpus::decode(
        &corpus,
        cfg.train.image_size,
        Some(needed_ids(&plan).iter()),
    )?;
    let vocab = corpus.vocab(kind).labels().to_vec();
    let model = PairModel::build(&cfg.model, vocab.len(), cfg.train.seed)?;
    let template = Checkpoint::from_model(&model, kind, vocab, config_hash(cfg));
    let mut recorder = RunRecorder::create(&out.join("train_log.jsonl"), Some(out), template)?;
    let (model, history) = train(model, &data, &plan, &cfg.train, &mut recorder)?;
    save_run(out, recorder, &model, &plan, &history)
}

fn finetune(cfg: &RunConfig, out: &Path, ckpt_path: &Path, kind: LabelKind) -> Result<()> {
    let corpus = load_manifest(&cfg.corpus.manifest)?;
    let checkpoint = Checkpoint::load(ckpt_path)?;
    let vocab = corpus.vocab(kind).labels().to_vec();
    let mut template =
        Checkpoint::from_model(&checkpoint.model()?, kind, vocab.clone(), config_hash(cfg));
    template.lineage = checkpoint.lineage.clone();
    template.lineage.insert(kind.as_str().to_string(), vocab);
    let mut recorder = RunRecorder::create(&out.join("train_log.jsonl"), Some(out), template)?;
    let (model, history, plan, _) = finetune_periods(
        &checkpoint,
        &corpus,
        kind,
        cfg.split.seed,
        train_fold(cfg),
        &cfg.train,
        &mut recorder,
    )?;
    save_run(out, recorder, &model, &plan, &history)
}

/// A checkpoint with its corpus, split and decoded records.
struct Session {
    checkpoint: Checkpoint,
    model: PairModel<f32>,
    corpus: Corpus,
    plan: SplitPlan,
    data: DecodedCorpus,
}

impl Session {
    /// Decodes the test fold only; `extra` adds more ids.
    fn open_with(cfg: &RunConfig, ckpt_path: &Path, extra: &[String], all: bool) -> Result<Self> {
        let corpus = load_manifest(&cfg.corpus.manifest)?;
        let checkpoint = Checkpoint::load(ckpt_path)?;
        let kind = checkpoint.label_kind;
        if checkpoint.vocabulary.as_slice() != corpus.vocab(kind).labels() {
            return Err(Error::Data(format!(
                "vocabulary mismatch: checkpoint {kind} labels {:?}, corpus {:?}",
                checkpoint.vocabulary,
                corpus.vocab(kind).labels()
            )));
        }
        let model = checkpoint.model()?;
        let plan = configured_plan(cfg, &corpus, kind)?;
        let mut ids: Vec<String> = if all {
            corpus.records().iter().map(|r| r.id.clone()).collect()
        } else {
            plan.test_ids().into_iter().collect()
        };
        for id in extra {
            if corpus.index_of(id).is_none() {
                return Err(Error::Data(format!("record `{id}` is not in the corpus")));
            }
            ids.push(id.clone());
        }
        let data = DecodedCorpus::decode(&corpus, cfg.train.image_size, Some(ids.iter()))?;
        Ok(Session {
            checkpoint,
            model,
            corpus,
            plan,
            data,
        })
    }

    fn open(cfg: &RunConfig, ckpt_path: &Path) -> Result<Self> {
        Session::open_with(cfg, ckpt_path, &[], false)
    }

    fn label_name(&self, class: u32) -> &str {
        &self.checkpoint.vocabulary[class as usize]
    }
}

fn load_external(path: &Path, size: usize) -> Result<Tensor<f32>> {
    let img = imageio::load_gray(path, size).map_err(|e| Error::Decode {
        id: path.display().to_string(),
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(Tensor::from_vec([1, 1, size, size], img))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn save_png(path: &Path, size: usize, ink: &[f32]) -> Result<()> {
    imageio::save_drawing(path, size, size, ink.iter().map(|&v| f64::from(v)))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn generate(
    cfg: &RunConfig,
    out: &Path,
    ckpt_path: &Path,
    ids: &[String],
    images: &[PathBuf],
) -> Result<()> {
    let s = Session::open_with(cfg, ckpt_path, ids, false)?;
    let size = cfg.train.image_size;
    let dir = out.join("drawings");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let ids: Vec<String> = if ids.is_empty() && images.is_empty() {
        s.plan.test_ids().into_iter().collect()
    } else {
        ids.to_vec()
    };
    let mut written = Vec::new();
    for (id, drawing) in ids.iter().zip(eval::generate(&s.model, &s.data, &ids)?) {
        let p = dir.join(format!("{id}.png"));
        save_png(&p, size, &drawing)?;
        written.push(p);
    }
    for path in images {
        let t = s.model.generate_drawing(&load_external(path, size)?)?;
        let p = dir.join(format!("{}.png", file_stem(path)));
        save_png(&p, size, t.item(0))?;
        written.push(p);
    }
    eprintln!("wrote {} drawings to {}", written.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct RetrievalRow {
    rank: usize,
    id: String,
    label: Option<String>,
    cosine: f64,
}

fn retrieve(cfg: &RunConfig, out: &Path, ckpt_path: &Path, query: &str, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Usage("--k must be >= 1".into()));
    }
    let s = Session::open_with(cfg, ckpt_path, &[], true)?;
    let size = cfg.train.image_size;
    let query_is_id = s.corpus.index_of(query).is_some();
    let q = if query_is_id {
        s.model
            .encode_image(&s.data.images(&[query.to_string()])?)?
    } else {
        let path = Path::new(query);
        if !path.exists() {
            return Err(Error::Data(format!(
                "query `{query}` is neither a record id nor an image file"
            )));
        }
        s.model.encode_image(&load_external(path, size)?)?
    };
    let gallery_ids: Vec<String> = s
        .corpus
        .records()
        .iter()
        .map(|r| r.id.clone())
        .filter(|id| !(query_is_id && id == query))
        .collect();
    let gallery = eval::embed_images(&s.model, &s.data, &gallery_ids)?;
    let kind = s.checkpoint.label_kind;
    let rows: Vec<RetrievalRow> = rank_by_cosine(q.row(0), &gallery)?
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, (i, cos))| {
            let rec = &s.corpus.records()[s.corpus.index_of(&gallery_ids[i]).expect("gallery id")];
            RetrievalRow {
                rank: r + 1,
                id: rec.id.clone(),
                label: rec.label(kind).map(str::to_string),
                cosine: cos,
            }
        })
        .collect();
    println!(
        "{:>4}  {:<24}  {:<16}  {:>8}",
        "rank", "id", "label", "cosine"
    );
    for r in &rows {
        println!(
            "{:>4}  {:<24}  {:<16}  {:>8.4}",
            r.rank,
            r.id,
            r.label.as_deref().unwrap_or("-"),
            r.cosine
        );
    }
    write_json(&out.join("retrieve.json"), &rows)
}

#[derive(Serialize)]
struct ExplainEntry {
    id: String,
    class: String,
    overlay: PathBuf,
    raw: PathBuf,
}

fn explain(
    cfg: &RunConfig,
    out: &Path,
    ckpt_path: &Path,
    ids: &[String],
    class: Option<&str>,
    limit: usize,
) -> Result<()> {
    let s = Session::open_with(cfg, ckpt_path, ids, false)?;
    let ids: Vec<String> = if ids.is_empty() {
        s.plan.test_ids().into_iter().take(limit).collect()
    } else {
        ids.to_vec()
    };
    let forced = match class {
        Some(name) => Some(
            s.checkpoint
                .vocabulary
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| {
                    Error::Usage(format!(
                        "class `{name}` is not in the checkpoint vocabulary"
                    ))
                })? as u32,
        ),
        None => None,
    };
    let predicted = eval::predict(&s.model, &s.data, &ids)?;
    let size = cfg.train.image_size;
    let raw_dir = out.join("raw");
    std::fs::create_dir_all(&raw_dir).map_err(|e| Error::io(&raw_dir, e))?;
    let kind = s.checkpoint.label_kind;
    let mut entries = Vec::new();
    for (id, pred) in ids.iter().zip(predicted) {
        let truth = s
            .corpus
            .label_id(s.corpus.index_of(id).expect("decoded id"), kind);
        let c = forced.or(truth).unwrap_or(pred);
        let image = s.data.image(id)?;
        let heat = localization_map(
            &s.model,
            &Tensor::from_vec([1, 1, size, size], image.to_vec()),
            c,
            id,
        )
        .map_err(|e| Error::Data(e.to_string()))?;
        let name = format!("{id}.{}.cam.png", s.label_name(c));
        let overlay_path = out.join(&name);
        let raw_path = raw_dir.join(&name);
        overlay::blend(image, &heat.values, size, size)
            .save(&overlay_path)
            .map_err(|e| Error::Data(format!("{}: {e}", overlay_path.display())))?;
        imageio::save_gray(&raw_path, size, size, heat.values.iter().copied())
            .map_err(|e| Error::Data(format!("{}: {e}", raw_path.display())))?;
        entries.push(ExplainEntry {
            id: id.clone(),
            class: s.label_name(c).to_string(),
            overlay: overlay_path,
            raw: raw_path,
        });
    }
    write_json(&out.join("explain.json"), &entries)
}
