//! Inference over decoded records and the evaluation reports.

use glyphpair_core::metrics::edges::{edge_pr_curve, edge_summary};
use glyphpair_core::metrics::{
    self, EdgeCurves, EdgeEvalConfig, EdgeEvalResult, EdgeMap, RetrievalResult,
};
use glyphpair_core::{Matrix, PairModel, SplitPlan};
use serde::Serialize;

use crate::dataset::DecodedCorpus;
use crate::error::{Error, Result};

/// Rows per inference batch.
const CHUNK: usize = 64;

fn chunks(ids: &[String]) -> impl Iterator<Item = &[String]> {
    ids.chunks(CHUNK)
}

/// Arg-max of the image head.
pub fn predict(model: &PairModel<f32>, data: &DecodedCorpus, ids: &[String]) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(ids.len());
    for c in chunks(ids) {
        let logits = model.classify_images(&data.images(c)?)?;
        out.extend(logits.argmax_rows().into_iter().map(|i| i as u32));
    }
    Ok(out)
}

pub fn embed_images(
    model: &PairModel<f32>,
    data: &DecodedCorpus,
    ids: &[String],
) -> Result<Matrix<f32>> {
    let d = model.embedding_dim();
    let mut flat = Vec::with_capacity(ids.len() * d);
    for c in chunks(ids) {
        flat.extend_from_slice(model.encode_image(&data.images(c)?)?.data());
    }
    Ok(Matrix::from_vec(ids.len(), d, flat))
}

/// Generated drawings, one `size × size` raster per id, ink = 1.
pub fn generate(
    model: &PairModel<f32>,
    data: &DecodedCorpus,
    ids: &[String],
) -> Result<Vec<Vec<f32>>> {
    let mut out = Vec::with_capacity(ids.len());
    for c in chunks(ids) {
        let t = model.generate_drawing(&data.images(c)?)?;
        out.extend((0..t.batch()).map(|i| t.item(i).to_vec()));
    }
    Ok(out)
}

/// Labeled test-fold ids and their labels, sorted by id.
pub fn test_set(plan: &SplitPlan) -> (Vec<String>, Vec<u32>) {
    let ids: Vec<String> = plan.test_ids().into_iter().collect();
    let labels = ids.iter().map(|id| plan.class_of[id]).collect();
    (ids, labels)
}

pub fn test_accuracy(
    model: &PairModel<f32>,
    data: &DecodedCorpus,
    plan: &SplitPlan,
) -> Result<f64> {
    let (ids, labels) = test_set(plan);
    Ok(metrics::accuracy(&predict(model, data, &ids)?, &labels)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub accuracy: f64,
    pub n: usize,
    pub label_kind: String,
    pub vocabulary: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn class_report(
    model: &PairModel<f32>,
    data: &DecodedCorpus,
    plan: &SplitPlan,
    vocabulary: &[String],
) -> Result<ClassReport> {
    let (ids, labels) = test_set(plan);
    let pred = predict(model, data, &ids)?;
    let k = model.num_classes();
    let mut confusion = vec![vec![0; k]; k];
    for (&t, &p) in labels.iter().zip(&pred) {
        confusion[t as usize][p as usize] += 1;
    }
    Ok(ClassReport {
        accuracy: metrics::accuracy(&pred, &labels)?,
        n: ids.len(),
        label_kind: plan.label_kind.to_string(),
        vocabulary: vocabulary.to_vec(),
        confusion,
    })
}

pub fn retrieval_report(
    model: &PairModel<f32>,
    data: &DecodedCorpus,
    plan: &SplitPlan,
    ks: &[usize],
) -> Result<RetrievalResult> {
    let (ids, labels) = test_set(plan);
    let z = embed_images(model, data, &ids)?;
    Ok(metrics::retrieval::retrieval_metrics(&z, &labels, ks)?)
}

/// Ground truth for edge evaluation: the clean drawing thresholded at 1/2.
pub fn binarize(drawing: &[f32]) -> Vec<f64> {
    drawing
        .iter()
        .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
        .collect()
}

pub fn edge_curves(
    model: &PairModel<f32>,
    data: &DecodedCorpus,
    ids: &[String],
    cfg: &EdgeEvalConfig,
) -> Result<EdgeCurves> {
    let s = data.image_size();
    let generated = generate(model, data, ids)?;
    let preds: Vec<EdgeMap> = generated
        .into_iter()
        .map(|g| EdgeMap::new(s, s, g.into_iter().map(f64::from).collect()))
        .collect::<Result<_, _>>()?;
    let gts: Vec<EdgeMap> = ids
        .iter()
        .map(|id| Ok(EdgeMap::new(s, s, binarize(data.drawing(id)?))?))
        .collect::<Result<_>>()?;
    Ok(edge_pr_curve(&preds, &gts, cfg)?)
}

pub fn edge_report(
    model: &PairModel<f32>,
    data: &DecodedCorpus,
    ids: &[String],
    cfg: &EdgeEvalConfig,
) -> Result<EdgeEvalResult> {
    if ids.is_empty() {
        return Err(Error::Data("no records to evaluate".into()));
    }
    Ok(edge_summary(&edge_curves(model, data, ids, cfg)?))
}
