//! Stratified two-fold splits, labeled-fraction subsampling and epoch order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, LabelKind};
use crate::seed::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fold {
    Fold0,
    Fold1,
    UnlabeledPool,
}

impl Fold {
    /// The other labeled fold.
    pub fn other(self) -> Fold {
        match self {
            Fold::Fold0 => Fold::Fold1,
            Fold::Fold1 => Fold::Fold0,
            Fold::UnlabeledPool => Fold::UnlabeledPool,
        }
    }

    pub fn from_index(i: usize) -> Option<Fold> {
        match i {
            0 => Some(Fold::Fold0),
            1 => Some(Fold::Fold1),
            _ => None,
        }
    }
}

/// Share of each class's training-fold records kept as labeled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabeledFraction {
    Full,
    Half,
    Quarter,
}

impl LabeledFraction {
    pub fn denominator(self) -> usize {
        match self {
            LabeledFraction::Full => 1,
            LabeledFraction::Half => 2,
            LabeledFraction::Quarter => 4,
        }
    }

    pub fn as_f64(self) -> f64 {
        1.0 / self.denominator() as f64
    }

    /// `⌈n / denominator⌉`.
    pub fn keep(self, n: usize) -> usize {
        n.div_ceil(self.denominator())
    }

    pub fn from_f64(v: f64) -> Result<Self, SplitError> {
        match v {
            v if v == 1.0 => Ok(LabeledFraction::Full),
            v if v == 0.5 => Ok(LabeledFraction::Half),
            v if v == 0.25 => Ok(LabeledFraction::Quarter),
            _ => Err(SplitError::BadFraction(format!("{v}"))),
        }
    }
}

impl fmt::Display for LabeledFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabeledFraction::Full => f.write_str("1"),
            LabeledFraction::Half => f.write_str("1/2"),
            LabeledFraction::Quarter => f.write_str("1/4"),
        }
    }
}

impl FromStr for LabeledFraction {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" | "1/1" => Ok(LabeledFraction::Full),
            "1/2" => Ok(LabeledFraction::Half),
            "1/4" => Ok(LabeledFraction::Quarter),
            other => other
                .parse::<f64>()
                .map_err(|_| SplitError::BadFraction(other.to_string()))
                .and_then(Self::from_f64),
        }
    }
}

impl Serialize for LabeledFraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabeledFraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = LabeledFraction;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("1, 1/2 or 1/4 (string or number)")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<LabeledFraction, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<LabeledFraction, E> {
                LabeledFraction::from_f64(v).map_err(E::custom)
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<LabeledFraction, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<LabeledFraction, E> {
                self.visit_f64(v as f64)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error(
        "{kind} class `{class}` has {count} labeled records; a two-fold split needs at least 2"
    )]
    ClassTooSmall {
        kind: LabelKind,
        class: String,
        count: usize,
    },
    #[error("labeled fraction `{0}` is not one of 1, 1/2, 1/4")]
    BadFraction(String),
    #[error("plan is already subsampled to {0}; subsample from the full plan")]
    AlreadySubsampled(LabeledFraction),
    #[error("split plan does not match the corpus: {0}")]
    Mismatch(String),
}

/// Assignment of records to folds plus the active labeled training subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub label_kind: LabelKind,
    pub seed: u64,
    pub labeled_fraction: LabeledFraction,
    pub train_fold: Fold,
    pub fold_of: BTreeMap<String, Fold>,
    /// Label id of every record in either labeled fold.
    pub class_of: BTreeMap<String, u32>,
    /// Always a subset of the training fold.
    pub active_labeled_ids: BTreeSet<String>,
}

/// Stratified 50/50 split of the labeled records. In classes of odd size
/// the extra record goes to one fold, picked once per seed, so that fold
/// sizes differ by the number of odd classes.
pub fn make_two_fold_split(
    corpus: &Corpus,
    kind: LabelKind,
    seed: u64,
) -> Result<SplitPlan, SplitError> {
    let vocab = corpus.vocab(kind);
    let mut by_class: Vec<Vec<&str>> = (0..vocab.len()).map(|_| Vec::new()).collect();
    let mut fold_of = BTreeMap::new();
    let mut class_of = BTreeMap::new();
    for (i, r) in corpus.records().iter().enumerate() {
        match corpus.label_id(i, kind) {
            Some(c) => {
                by_class[c as usize].push(r.id.as_str());
                class_of.insert(r.id.clone(), c);
            }
            None => {
                fold_of.insert(r.id.clone(), Fold::UnlabeledPool);
            }
        }
    }
    for (c, ids) in by_class.iter().enumerate() {
        // Declared classes with no records at all are allowed.
        if ids.len() == 1 {
            return Err(SplitError::ClassTooSmall {
                kind,
                class: vocab.label(c as u32).unwrap_or_default().to_string(),
                count: ids.len(),
            });
        }
    }
    let mut rng = seed::rng(seed, &[tag("split"), kind as u64]);
    let big = if rng.gen::<bool>() {
        Fold::Fold1
    } else {
        Fold::Fold0
    };
    for ids in &mut by_class {
        ids.sort_unstable();
        seed::shuffle(ids, &mut rng);
        let n_big = ids.len().div_ceil(2);
        for (j, id) in ids.iter().enumerate() {
            fold_of.insert(id.to_string(), if j < n_big { big } else { big.other() });
        }
    }
    let mut plan = SplitPlan {
        label_kind: kind,
        seed,
        labeled_fraction: LabeledFraction::Full,
        train_fold: Fold::Fold0,
        fold_of,
        class_of,
        active_labeled_ids: BTreeSet::new(),
    };
    plan.active_labeled_ids = plan.fold_ids(Fold::Fold0);
    Ok(plan)
}

/// Keeps `⌈fraction · n⌉` of each class's training-fold records active.
pub fn subsample_labeled(
    plan: &SplitPlan,
    fraction: LabeledFraction,
    seed: u64,
) -> Result<SplitPlan, SplitError> {
    if plan.labeled_fraction != LabeledFraction::Full {
        return Err(SplitError::AlreadySubsampled(plan.labeled_fraction));
    }
    let mut out = plan.clone();
    if fraction == LabeledFraction::Full {
        return Ok(out);
    }
    let mut by_class: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for id in &plan.active_labeled_ids {
        by_class
            .entry(plan.class_of[id])
            .or_default()
            .push(id.as_str());
    }
    let mut rng = seed::rng(
        seed,
        &[
            tag("subsample"),
            fraction.denominator() as u64,
            plan.train_fold as u64,
        ],
    );
    out.active_labeled_ids.clear();
    for ids in by_class.values_mut() {
        seed::shuffle(ids, &mut rng);
        out.active_labeled_ids.extend(
            ids[..fraction.keep(ids.len())]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    out.labeled_fraction = fraction;
    Ok(out)
}

impl SplitPlan {
    pub fn fold_ids(&self, fold: Fold) -> BTreeSet<String> {
        self.fold_of
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn test_fold(&self) -> Fold {
        self.train_fold.other()
    }

    pub fn test_ids(&self) -> BTreeSet<String> {
        self.fold_ids(self.test_fold())
    }

    pub fn unlabeled_ids(&self) -> BTreeSet<String> {
        self.fold_ids(Fold::UnlabeledPool)
    }

    /// The same assignment with the roles of the two folds swapped; the
    /// labeled fraction resets to 1.
    pub fn with_train_fold(&self, fold: Fold) -> Result<SplitPlan, SplitError> {
        if fold == Fold::UnlabeledPool {
            return Err(SplitError::Mismatch(
                "the unlabeled pool cannot be a training fold".to_string(),
            ));
        }
        let mut out = self.clone();
        out.train_fold = fold;
        out.labeled_fraction = LabeledFraction::Full;
        out.active_labeled_ids = self.fold_ids(fold);
        Ok(out)
    }

    /// Drops the unlabeled pool, for labeled-only baselines.
    pub fn without_unlabeled(&self) -> SplitPlan {
        let mut out = self.clone();
        out.fold_of.retain(|_, f| *f != Fold::UnlabeledPool);
        out
    }

    /// Training ids (active labeled and unlabeled pool), sorted.
    pub fn training_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.active_labeled_ids.iter().cloned().collect();
        ids.extend(self.unlabeled_ids());
        ids.sort_unstable();
        ids
    }

    /// Seeded shuffle of [`SplitPlan::training_ids`] for one epoch.
    pub fn epoch_order(&self, seed: u64, epoch: u64) -> Vec<String> {
        let mut ids = self.training_ids();
        let mut rng = seed::rng(seed, &[tag("epoch"), epoch]);
        seed::shuffle(&mut ids, &mut rng);
        ids
    }

    /// Label id of a record that counts as labeled for training.
    pub fn training_label(&self, id: &str) -> Option<u32> {
        self.active_labeled_ids
            .contains(id)
            .then(|| self.class_of[id])
    }

    /// Every record id in the plan must exist in `corpus`.
    pub fn check_against(&self, corpus: &Corpus) -> Result<(), SplitError> {
        let index = corpus.id_index();
        match self
            .fold_of
            .keys()
            .find(|id| !index.contains_key(id.as_str()))
        {
            Some(id) => Err(SplitError::Mismatch(format!(
                "record `{id}` is not in the corpus"
            ))),
            None => Ok(()),
        }
    }

    /// Labeled records per fold, `(fold0, fold1)`.
    pub fn fold_sizes(&self) -> (usize, usize) {
        (
            self.fold_ids(Fold::Fold0).len(),
            self.fold_ids(Fold::Fold1).len(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PairRecord;

    fn corpus(counts: &[usize], unlabeled: usize) -> Corpus {
        let mut recs = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                recs.push(PairRecord {
                    id: format!("c{c}_{i:04}"),
                    shape_label: Some(format!("class{c:02}")),
                    ..Default::default()
                });
            }
        }
        for i in 0..unlabeled {
            recs.push(PairRecord {
                id: format!("u{i:05}"),
                ..Default::default()
            });
        }
        Corpus::new(recs, None).unwrap()
    }

    #[test]
    fn two_per_class_is_symmetric() {
        let c = corpus(&[2, 2], 0);
        for s in 0..10 {
            let p = make_two_fold_split(&c, LabelKind::Shape, s).unwrap();
            for fold in [Fold::Fold0, Fold::Fold1] {
                let classes: BTreeSet<u32> =
                    p.fold_ids(fold).iter().map(|id| p.class_of[id]).collect();
                assert_eq!(classes.len(), 2);
                assert_eq!(p.fold_ids(fold).len(), 2);
            }
        }
    }

    #[test]
    fn odd_extras_go_to_one_fold() {
        let c = corpus(&[3, 5, 4], 3);
        let p = make_two_fold_split(&c, LabelKind::Shape, 11).unwrap();
        let (a, b) = p.fold_sizes();
        assert_eq!(a + b, 12);
        assert_eq!(a.abs_diff(b), 2);
        assert_eq!(p.unlabeled_ids().len(), 3);
        assert_eq!(p, make_two_fold_split(&c, LabelKind::Shape, 11).unwrap());
    }

    #[test]
    fn singleton_class_is_rejected() {
        let err = make_two_fold_split(&corpus(&[2, 1], 0), LabelKind::Shape, 0).unwrap_err();
        assert!(matches!(err, SplitError::ClassTooSmall { count: 1, .. }));
    }

    #[test]
    fn subsample_ceilings_and_test_fold_stability() {
        let c = corpus(&[9, 6, 3], 4);
        let p = make_two_fold_split(&c, LabelKind::Shape, 5).unwrap();
        let q = subsample_labeled(&p, LabeledFraction::Quarter, 5).unwrap();
        assert_eq!(q.test_ids(), p.test_ids());
        assert_eq!(q.unlabeled_ids(), p.unlabeled_ids());
        assert!(q.active_labeled_ids.is_subset(&p.fold_ids(p.train_fold)));
        let mut per_class = BTreeMap::<u32, (usize, usize)>::new();
        for id in p.fold_ids(p.train_fold) {
            per_class.entry(p.class_of[&id]).or_default().0 += 1;
        }
        for id in &q.active_labeled_ids {
            per_class.entry(p.class_of[id]).or_default().1 += 1;
        }
        for (n, kept) in per_class.values() {
            assert_eq!(*kept, n.div_ceil(4));
        }
        assert_eq!(subsample_labeled(&p, LabeledFraction::Full, 5).unwrap(), p);
        assert!(subsample_labeled(&q, LabeledFraction::Half, 5).is_err());
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(
            "1/4".parse::<LabeledFraction>(),
            Ok(LabeledFraction::Quarter)
        );
        assert_eq!("0.5".parse::<LabeledFraction>(), Ok(LabeledFraction::Half));
        assert_eq!("1".parse::<LabeledFraction>(), Ok(LabeledFraction::Full));
        assert!("1/3".parse::<LabeledFraction>().is_err());
        assert!(LabeledFraction::from_f64(0.3).is_err());
        assert_eq!(LabeledFraction::Quarter.keep(9), 3);
    }

    #[test]
    fn epoch_order_is_seeded() {
        let c = corpus(&[4, 4], 6);
        let p = make_two_fold_split(&c, LabelKind::Shape, 1).unwrap();
        let a = p.epoch_order(3, 0);
        assert_eq!(a, p.epoch_order(3, 0));
        assert_ne!(a, p.epoch_order(3, 1));
        assert_eq!(a.len(), 4 + 6);
        let l = p.without_unlabeled();
        assert_eq!(l.training_ids().len(), 4);
        let swapped = p.with_train_fold(Fold::Fold1).unwrap();
        assert_eq!(swapped.test_ids(), p.fold_ids(Fold::Fold0));
    }
}
