//! Run configuration: a TOML document plus dotted-key overrides.

use std::path::{Path, PathBuf};

use glyphpair_core::metrics::EdgeEvalConfig;
use glyphpair_core::synth::SynthConfig;
use glyphpair_core::{BackboneSpec, LabelKind, LabeledFraction, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub manifest: PathBuf,
    /// When set, must agree with `train.image_size`.
    pub image_size: Option<usize>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            manifest: PathBuf::from("corpus/manifest.jsonl"),
            image_size: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub label_kind: LabelKind,
    pub seed: u64,
    /// 0 or 1; the other fold is the test fold.
    pub train_fold: usize,
    /// When set, must agree with `train.labeled_fraction`.
    pub labeled_fraction: Option<LabeledFraction>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            label_kind: LabelKind::Shape,
            seed: 0,
            train_fold: 0,
            labeled_fraction: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub edges: EdgeEvalConfig,
    pub ks: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            edges: EdgeEvalConfig::default(),
            ks: vec![1, 10],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    pub split: SplitSection,
    pub model: BackboneSpec,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub synth: SynthConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Reads `path` (or starts from defaults) and applies `key=value`
    /// overrides. Values are TOML literals; bare words are strings.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if cfg.output_dir.as_os_str().is_empty() {
            cfg.output_dir = PathBuf::from("runs/default");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.corpus.image_size {
            if s != self.train.image_size {
                return Err(Error::Config(format!(
                    "corpus.image_size = {s} disagrees with train.image_size = {}; set one of them",
                    self.train.image_size
                )));
            }
        }
        if let Some(f) = self.split.labeled_fraction {
            if f != self.train.labeled_fraction {
                return Err(Error::Config(format!(
                    "split.labeled_fraction = {f} disagrees with train.labeled_fraction = {}; set one of them",
                    self.train.labeled_fraction
                )));
            }
        }
        if self.split.train_fold > 1 {
            return Err(Error::Config(format!(
                "split.train_fold must be 0 or 1, got {}",
                self.split.train_fold
            )));
        }
        self.model
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let m = self.model.size_multiple();
        if self.train.image_size % m != 0 {
            return Err(Error::Config(format!(
                "train.image_size {} must be a multiple of {m}",
                self.train.image_size
            )));
        }
        self.train
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.eval
            .edges
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.ks entries must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable config")
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("override key `{key}` is malformed")));
    }
    let value = parse_value(raw.trim());
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Usage(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
