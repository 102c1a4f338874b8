//! Paired image/drawing records and their label vocabularies.
//!
//! Paths are opaque strings here; resolving and decoding them is the
//! caller's business.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Shape,
    Period,
    Subperiod,
}

impl LabelKind {
    pub const ALL: [LabelKind; 3] = [LabelKind::Shape, LabelKind::Period, LabelKind::Subperiod];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::Shape => "shape",
            LabelKind::Period => "period",
            LabelKind::Subperiod => "subperiod",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownLabelKind(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("empty corpus")]
    Empty,
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` has a subperiod label but no period label")]
    SubperiodWithoutPeriod(String),
    #[error("record `{id}`: {kind} label `{label}` is not in the declared vocabulary")]
    UnknownLabel {
        id: String,
        kind: LabelKind,
        label: String,
    },
    #[error("{kind} vocabulary lists `{label}` twice")]
    DuplicateVocabEntry { kind: LabelKind, label: String },
    #[error("unknown label kind `{0}` (expected shape, period or subperiod)")]
    UnknownLabelKind(String),
    #[error("record `{id}` has no {kind} label")]
    Unlabeled { id: String, kind: LabelKind },
    #[error("class `{0}` has no prototype drawings")]
    NoPrototypes(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub id: String,
    pub image_path: String,
    pub drawing_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subperiod_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl PairRecord {
    pub fn label(&self, kind: LabelKind) -> Option<&str> {
        match kind {
            LabelKind::Shape => self.shape_label.as_deref(),
            LabelKind::Period => self.period_label.as_deref(),
            LabelKind::Subperiod => self.subperiod_label.as_deref(),
        }
    }
}

/// Ordered label list; a label's id is its position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary(Vec<String>);

impl Vocabulary {
    pub fn new(labels: Vec<String>) -> Self {
        Vocabulary(labels)
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.0.iter().position(|l| l == label).map(|i| i as u32)
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.0.get(id as usize).map(String::as_str)
    }

    fn check_unique(&self, kind: LabelKind) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for l in &self.0 {
            if !seen.insert(l.as_str()) {
                return Err(CorpusError::DuplicateVocabEntry {
                    kind,
                    label: l.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Explicit vocabularies; any kind left `None` is inferred from the records.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subperiod: Option<Vocabulary>,
}

impl VocabHeader {
    fn get(&self, kind: LabelKind) -> Option<&Vocabulary> {
        match kind {
            LabelKind::Shape => self.shape.as_ref(),
            LabelKind::Period => self.period.as_ref(),
            LabelKind::Subperiod => self.subperiod.as_ref(),
        }
    }
}

/// A validated, immutable list of pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<PairRecord>,
    vocabs: [Vocabulary; 3],
    /// `label_ids[kind][i]` is record `i`'s label id under `kind`.
    label_ids: [Vec<Option<u32>>; 3],
    explicit: [bool; 3],
}

impl Corpus {
    /// Validates `records`; vocabularies not given in `header` become the
    /// sorted union of the labels present.
    pub fn new(
        records: Vec<PairRecord>,
        header: Option<&VocabHeader>,
    ) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut ids = BTreeSet::new();
        for r in &records {
            if !ids.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
            if r.subperiod_label.is_some() && r.period_label.is_none() {
                return Err(CorpusError::SubperiodWithoutPeriod(r.id.clone()));
            }
        }
        let mut explicit = [false; 3];
        let vocabs = LabelKind::ALL.map(|kind| match header.and_then(|h| h.get(kind)) {
            Some(v) => {
                explicit[kind.index()] = true;
                v.clone()
            }
            None => {
                let set: BTreeSet<&str> = records.iter().filter_map(|r| r.label(kind)).collect();
                Vocabulary(set.into_iter().map(String::from).collect())
            }
        });
        for kind in LabelKind::ALL {
            vocabs[kind.index()].check_unique(kind)?;
        }
        let mut label_ids: [Vec<Option<u32>>; 3] = Default::default();
        for kind in LabelKind::ALL {
            let v = &vocabs[kind.index()];
            label_ids[kind.index()] = records
                .iter()
                .map(|r| match r.label(kind) {
                    None => Ok(None),
                    Some(l) => v
                        .index_of(l)
                        .map(Some)
                        .ok_or_else(|| CorpusError::UnknownLabel {
                            id: r.id.clone(),
                            kind,
                            label: l.to_string(),
                        }),
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(Corpus {
            records,
            vocabs,
            label_ids,
            explicit,
        })
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn vocab(&self, kind: LabelKind) -> &Vocabulary {
        &self.vocabs[kind.index()]
    }

    /// The header that reproduces this corpus's vocabularies on reload.
    pub fn vocab_header(&self) -> VocabHeader {
        let pick = |k: LabelKind| self.explicit[k.index()].then(|| self.vocabs[k.index()].clone());
        VocabHeader {
            shape: pick(LabelKind::Shape),
            period: pick(LabelKind::Period),
            subperiod: pick(LabelKind::Subperiod),
        }
    }

    pub fn label_id(&self, index: usize, kind: LabelKind) -> Option<u32> {
        self.label_ids[kind.index()][index]
    }

    pub fn label_ids(&self, kind: LabelKind) -> &[Option<u32>] {
        &self.label_ids[kind.index()]
    }

    pub fn labeled_count(&self, kind: LabelKind) -> usize {
        self.label_ids(kind).iter().filter(|l| l.is_some()).count()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    /// Record id → position.
    pub fn id_index(&self) -> BTreeMap<&str, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect()
    }

    /// Records per label id; classes with no records are included as 0.
    pub fn class_counts(&self, kind: LabelKind) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.vocab(kind).len()];
        for l in self.label_ids(kind).iter().flatten() {
            counts[*l as usize] += 1;
        }
        counts
    }

    /// Keeps the records for which `keep` holds, with vocabularies unchanged.
    pub fn filter(&self, mut keep: impl FnMut(&PairRecord) -> bool) -> Result<Corpus, CorpusError> {
        let records: Vec<PairRecord> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        Corpus::new(records, Some(&self.full_header()))
    }

    fn full_header(&self) -> VocabHeader {
        VocabHeader {
            shape: Some(self.vocabs[0].clone()),
            period: Some(self.vocabs[1].clone()),
            subperiod: Some(self.vocabs[2].clone()),
        }
    }

    /// Replaces each record's drawing with a seeded uniform pick among the
    /// prototypes of its `kind` class. `prototypes` is keyed by label name.
    pub fn pair_with_class_prototypes(
        &self,
        kind: LabelKind,
        prototypes: &BTreeMap<String, Vec<String>>,
        seed: u64,
    ) -> Result<Corpus, CorpusError> {
        let mut rng = seed::rng(seed, &[tag("prototypes")]);
        let mut records = self.records.clone();
        for r in &mut records {
            let label = r.label(kind).ok_or_else(|| CorpusError::Unlabeled {
                id: r.id.clone(),
                kind,
            })?;
            let choices = prototypes
                .get(label)
                .filter(|c| !c.is_empty())
                .ok_or_else(|| CorpusError::NoPrototypes(label.to_string()))?;
            r.drawing_path = choices[rng.gen_range(0..choices.len())].clone();
        }
        let mut c = Corpus::new(records, Some(&self.full_header()))?;
        c.explicit = self.explicit;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn rec(id: &str, shape: Option<&str>) -> PairRecord {
        PairRecord {
            id: id.to_string(),
            image_path: format!("{id}.im.png"),
            drawing_path: format!("{id}.dr.png"),
            shape_label: shape.map(String::from),
            ..Default::default()
        }
    }

    #[test]
    fn vocab_is_sorted_union() {
        let c = Corpus::new(
            vec![
                rec("a", Some("lion")),
                rec("b", Some("ankh")),
                rec("c", None),
            ],
            None,
        )
        .unwrap();
        assert_eq!(c.vocab(LabelKind::Shape).labels(), ["ankh", "lion"]);
        assert_eq!(c.label_id(0, LabelKind::Shape), Some(1));
        assert_eq!(c.label_id(2, LabelKind::Shape), None);
        assert_eq!(c.labeled_count(LabelKind::Shape), 2);
        assert!(c.vocab(LabelKind::Period).is_empty());
    }

    #[test]
    fn explicit_vocab_is_kept_and_enforced() {
        let h = VocabHeader {
            shape: Some(Vocabulary::new(vec!["z".into(), "a".into()])),
            ..Default::default()
        };
        let c = Corpus::new(vec![rec("a", Some("a"))], Some(&h)).unwrap();
        assert_eq!(c.label_id(0, LabelKind::Shape), Some(1));
        assert_eq!(c.vocab_header(), h);
        let err = Corpus::new(vec![rec("a", Some("q"))], Some(&h)).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownLabel { .. }));
        let dup = VocabHeader {
            shape: Some(Vocabulary::new(vec!["a".into(), "a".into()])),
            ..Default::default()
        };
        assert!(matches!(
            Corpus::new(vec![rec("a", None)], Some(&dup)),
            Err(CorpusError::DuplicateVocabEntry { .. })
        ));
    }

    #[test]
    fn validation_errors() {
        assert_eq!(Corpus::new(vec![], None), Err(CorpusError::Empty));
        let err = Corpus::new(vec![rec("s01", None), rec("s01", None)], None).unwrap_err();
        assert!(err.to_string().contains("s01"));
        let mut r = rec("x", None);
        r.subperiod_label = Some("MB IIB".into());
        assert_eq!(
            Corpus::new(vec![r], None),
            Err(CorpusError::SubperiodWithoutPeriod("x".into()))
        );
    }

    #[test]
    fn prototype_pairing() {
        let c = Corpus::new(
            vec![
                rec("a", Some("x")),
                rec("b", Some("x")),
                rec("c", Some("y")),
            ],
            None,
        )
        .unwrap();
        let mut protos = BTreeMap::new();
        protos.insert("x".to_string(), vec!["x1".to_string()]);
        protos.insert(
            "y".to_string(),
            (0..7).map(|i| format!("y{i}")).collect::<Vec<_>>(),
        );
        let p = c
            .pair_with_class_prototypes(LabelKind::Shape, &protos, 1)
            .unwrap();
        assert_eq!(p.records()[0].drawing_path, "x1");
        assert_eq!(p.records()[1].drawing_path, "x1");
        let mut seen = BTreeSet::new();
        for s in 0..200 {
            seen.insert(
                c.pair_with_class_prototypes(LabelKind::Shape, &protos, s)
                    .unwrap()
                    .records()[2]
                    .drawing_path
                    .clone(),
            );
        }
        assert_eq!(seen.len(), 7);
        protos.remove("y");
        assert_eq!(
            c.pair_with_class_prototypes(LabelKind::Shape, &protos, 1),
            Err(CorpusError::NoPrototypes("y".into()))
        );
        let u = Corpus::new(vec![rec("a", Some("x")), rec("b", None)], None).unwrap();
        assert!(matches!(
            u.pair_with_class_prototypes(LabelKind::Shape, &protos, 1),
            Err(CorpusError::Unlabeled { .. })
        ));
    }
}
