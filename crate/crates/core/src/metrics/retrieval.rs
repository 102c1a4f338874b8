//! Cosine-similarity retrieval: mean average precision and precision at k.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::real::Real;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    #[serde(rename = "mAP")]
    pub map: f64,
    /// Mean P@k over evaluated queries.
    pub p_at: BTreeMap<usize, f64>,
    /// AP of each evaluated query, in item order.
    pub per_query_ap: Vec<f64>,
    /// Item index of each entry in `per_query_ap`.
    pub queries: Vec<usize>,
    /// Queries whose label occurs nowhere else.
    pub skipped: usize,
}

/// Unit-normalized copies of the rows.
fn normalized<T: Real>(emb: &Matrix<T>) -> Result<Vec<Vec<f64>>, MetricsError> {
    (0..emb.rows())
        .map(|i| {
            let row: Vec<f64> = emb.row(i).iter().map(|v| v.as_f64()).collect();
            let n = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
            if !(n > 0.0 && n.is_finite()) {
                return Err(MetricsError::BadEmbedding(i));
            }
            Ok(row.into_iter().map(|v| v / n).collect())
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gallery indices sorted by descending cosine similarity to `query`, ties
/// broken by ascending index.
pub fn rank_by_cosine<T: Real>(
    query: &[T],
    gallery: &Matrix<T>,
) -> Result<Vec<(usize, f64)>, MetricsError> {
    let q = normalized(&Matrix::from_vec(1, query.len(), query.to_vec()))?;
    let g = normalized(gallery)?;
    let mut scored: Vec<(usize, f64)> = g
        .iter()
        .enumerate()
        .map(|(j, r)| (j, dot(&q[0], r)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(scored)
}

/// Every item queries all others; relevance is label equality.
pub fn retrieval_metrics<T: Real>(
    embeddings: &Matrix<T>,
    labels: &[u32],
    ks: &[usize],
) -> Result<RetrievalResult, MetricsError> {
    let n = embeddings.rows();
    if labels.len() != n {
        return Err(MetricsError::Length(format!(
            "{n} embeddings, {} labels",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(MetricsError::Empty);
    }
    if ks.contains(&0) {
        return Err(MetricsError::Config(format!("k must be >= 1, got {ks:?}")));
    }
    let z = normalized(embeddings)?;
    let mut per_query_ap = Vec::new();
    let mut queries = Vec::new();
    let mut p_sum: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut skipped = 0;
    for q in 0..n {
        let mut ranked: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != q)
            .map(|j| (j, dot(&z[q], &z[j])))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        let rel: Vec<bool> = ranked
            .iter()
            .map(|(j, _)| labels[*j] == labels[q])
            .collect();
        let total_rel = rel.iter().filter(|&&r| r).count();
        if total_rel == 0 {
            skipped += 1;
            continue;
        }
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (r, &is_rel) in rel.iter().enumerate() {
            if is_rel {
                hits += 1;
                ap += hits as f64 / (r + 1) as f64;
            }
        }
        per_query_ap.push(ap / total_rel as f64);
        queries.push(q);
        for (&k, sum) in p_sum.iter_mut() {
            *sum += rel.iter().take(k).filter(|&&r| r).count() as f64 / k as f64;
        }
    }
    let m = per_query_ap.len();
    let mean = |s: f64| if m == 0 { 0.0 } else { s / m as f64 };
    Ok(RetrievalResult {
        map: mean(per_query_ap.iter().sum()),
        p_at: p_sum.into_iter().map(|(k, s)| (k, mean(s))).collect(),
        per_query_ap,
        queries,
        skipped,
    })
}
