//! Versioned model checkpoints (JSON).

use std::collections::BTreeMap;
use std::path::Path;

use glyphpair_core::model::ParamSet;
use glyphpair_core::{BackboneSpec, LabelKind, PairModel, ParamGroup};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifest;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: BackboneSpec,
    pub num_classes: usize,
    pub label_kind: LabelKind,
    /// Head output `i` predicts `vocabulary[i]`.
    pub vocabulary: Vec<String>,
    /// Label kind → vocabulary the encoders were first trained on.
    #[serde(default)]
    pub lineage: BTreeMap<String, Vec<String>>,
    pub config_hash: String,
    pub groups: BTreeMap<String, Vec<f32>>,
}

/// Hex SHA-256 of the canonical JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("serializable config");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Checkpoint {
    pub fn from_model(
        model: &PairModel<f32>,
        label_kind: LabelKind,
        vocabulary: Vec<String>,
        config_hash: String,
    ) -> Self {
        let groups = ParamGroup::ALL
            .iter()
            .map(|g| (g.name().to_string(), model.group(*g).to_vec()))
            .collect();
        let mut lineage = BTreeMap::new();
        lineage.insert(label_kind.as_str().to_string(), vocabulary.clone());
        Checkpoint {
            format_version: FORMAT_VERSION,
            spec: model.spec().clone(),
            num_classes: model.num_classes(),
            label_kind,
            vocabulary,
            lineage,
            config_hash,
            groups,
        }
    }

    pub fn model(&self) -> Result<PairModel<f32>> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.vocabulary.len() != self.num_classes {
            return Err(Error::Data(format!(
                "checkpoint has {} classes but a vocabulary of {}",
                self.num_classes,
                self.vocabulary.len()
            )));
        }
        let groups =
            ParamGroup::ALL.map(|g| self.groups.get(g.name()).cloned().unwrap_or_default());
        Ok(PairModel::from_params(
            &self.spec,
            self.num_classes,
            ParamSet::new(groups),
        )?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self).expect("serializable checkpoint");
        manifest::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        manifest::read_json(path)
    }
}
