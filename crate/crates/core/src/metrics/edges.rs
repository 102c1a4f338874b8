//! Boundary-map precision/recall under pixel-distance tolerance.
//!
//! At each threshold the binarized prediction is matched one-to-one to the
//! ground-truth edge pixels by a maximum-cardinality bipartite matching; a
//! pair may match iff its Euclidean distance is at most the tolerance.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{f_measure, MetricsError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeEvalConfig {
    /// Thresholds `i / (n + 1)` for `i = 1..=n`.
    pub thresholds: usize,
    /// Pixels; `None` means `max(1, round(0.0075 * diagonal))`.
    pub match_tolerance: Option<f64>,
    /// Thin binarized predictions to one-pixel width before matching.
    pub thin: bool,
}

impl Default for EdgeEvalConfig {
    fn default() -> Self {
        EdgeEvalConfig {
            thresholds: 33,
            match_tolerance: None,
            thin: false,
        }
    }
}

impl EdgeEvalConfig {
    pub fn threshold_values(&self) -> Vec<f64> {
        let n = self.thresholds;
        (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
    }

    pub fn tolerance_for(&self, width: usize, height: usize) -> f64 {
        self.match_tolerance
            .unwrap_or_else(|| default_tolerance(width, height))
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.thresholds < 2 {
            return Err(MetricsError::Config(format!(
                "thresholds must be >= 2, got {}",
                self.thresholds
            )));
        }
        if let Some(t) = self.match_tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(MetricsError::Config(format!(
                    "match_tolerance must be >= 0, got {t}"
                )));
            }
        }
        Ok(())
    }
}

pub fn default_tolerance(width: usize, height: usize) -> f64 {
    let diag = libm::sqrt((width * width + height * height) as f64);
    libm::round(0.0075 * diag).max(1.0)
}

/// A single-channel map, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, MetricsError> {
        if data.len() != width * height {
            return Err(MetricsError::Shape(format!(
                "{width}x{height} map with {} values",
                data.len()
            )));
        }
        Ok(EdgeMap {
            width,
            height,
            data,
        })
    }

    /// Pixels with value `>= t`, as `(x, y)`.
    pub fn points_at(&self, t: f64) -> Vec<(usize, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= t)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    fn binarize(&self, t: f64) -> Vec<bool> {
        self.data.iter().map(|v| *v >= t).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EdgeCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }

    fn add(&mut self, o: &EdgeCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Maximum-cardinality matching between two point sets (Hopcroft–Karp).
pub fn max_matching(pred: &[(usize, usize)], gt: &[(usize, usize)], tolerance: f64) -> usize {
    if pred.is_empty() || gt.is_empty() {
        return 0;
    }
    let r = libm::floor(tolerance) as i64;
    let t2 = tolerance * tolerance;
    let (w, h) = pred
        .iter()
        .chain(gt)
        .fold((0, 0), |(w, h), &(x, y)| (w.max(x + 1), h.max(y + 1)));
    let mut gt_at = vec![usize::MAX; w * h];
    for (j, &(x, y)) in gt.iter().enumerate() {
        gt_at[y * w + x] = j;
    }
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|&(x, y)| {
            let mut out = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    if ((dx * dx + dy * dy) as f64) > t2 {
                        continue;
                    }
                    let (gx, gy) = (x as i64 + dx, y as i64 + dy);
                    if gx < 0 || gy < 0 || gx >= w as i64 || gy >= h as i64 {
                        continue;
                    }
                    let j = gt_at[gy as usize * w + gx as usize];
                    if j != usize::MAX {
                        out.push(j);
                    }
                }
            }
            out
        })
        .collect();
    hopcroft_karp(&adj, gt.len())
}

fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> usize {
    const FREE: usize = usize::MAX;
    let n_left = adj.len();
    let mut match_l = vec![FREE; n_left];
    let mut match_r = vec![FREE; n_right];
    let mut dist = vec![0usize; n_left];
    let mut matched = 0;
    loop {
        // Layer free left vertices by alternating-path distance.
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let m = match_r[v];
                if m == FREE {
                    found = true;
                } else if dist[m] == usize::MAX {
                    dist[m] = dist[u] + 1;
                    queue.push_back(m);
                }
            }
        }
        if !found {
            return matched;
        }
        // Iterative DFS along the layers; `next[u]` is u's edge cursor.
        let mut next = vec![0usize; n_left];
        for root in 0..n_left {
            if match_l[root] != FREE {
                continue;
            }
            let mut stack = vec![root];
            while let Some(&u) = stack.last() {
                if next[u] == adj[u].len() {
                    dist[u] = usize::MAX;
                    stack.pop();
                    continue;
                }
                let v = adj[u][next[u]];
                next[u] += 1;
                let m = match_r[v];
                if m == FREE {
                    // Augment along the stack; each stack vertex's last
                    // tried edge is `adj[w][next[w] - 1]`.
                    for &w in stack.iter().rev() {
                        let vv = adj[w][next[w] - 1];
                        match_r[vv] = w;
                        match_l[w] = vv;
                    }
                    matched += 1;
                    break;
                } else if dist[m] == dist[u] + 1 {
                    stack.push(m);
                }
            }
        }
    }
}

/// Zhang–Suen thinning of a binary image.
pub fn thin(mask: &mut [bool], width: usize, height: usize) {
    let at = |m: &[bool], x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < width
            && (y as usize) < height
            && m[y as usize * width + x as usize]
    };
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut remove = Vec::new();
            for y in 0..height as i64 {
                for x in 0..width as i64 {
                    if !at(mask, x, y) {
                        continue;
                    }
                    // p2..p9 clockwise from north.
                    let p = [
                        at(mask, x, y - 1),
                        at(mask, x + 1, y - 1),
                        at(mask, x + 1, y),
                        at(mask, x + 1, y + 1),
                        at(mask, x, y + 1),
                        at(mask, x - 1, y + 1),
                        at(mask, x - 1, y),
                        at(mask, x - 1, y - 1),
                    ];
                    let b = p.iter().filter(|&&v| v).count();
                    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                    let (c1, c2) = if pass == 0 {
                        (p[0] && p[2] && p[4], p[2] && p[4] && p[6])
                    } else {
                        (p[0] && p[2] && p[6], p[0] && p[4] && p[6])
                    };
                    if (2..=6).contains(&b) && a == 1 && !c1 && !c2 {
                        remove.push(y as usize * width + x as usize);
                    }
                }
            }
            changed |= !remove.is_empty();
            for i in remove {
                mask[i] = false;
            }
        }
        if !changed {
            return;
        }
    }
}

/// Counts at one threshold for one image.
pub fn edge_counts(
    pred: &EdgeMap,
    gt: &EdgeMap,
    t: f64,
    tolerance: f64,
    thinning: bool,
) -> EdgeCounts {
    let mut mask = pred.binarize(t);
    if thinning {
        thin(&mut mask, pred.width, pred.height);
    }
    let p: Vec<(usize, usize)> = mask
        .iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .map(|(i, _)| (i % pred.width, i / pred.width))
        .collect();
    let g = gt.points_at(0.5);
    let tp = max_matching(&p, &g, tolerance);
    EdgeCounts {
        tp,
        fp: p.len() - tp,
        fn_: g.len() - tp,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Dataset curve plus the per-image counts behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurves {
    pub thresholds: Vec<f64>,
    /// `per_image[i][k]`: image `i` at threshold `k`.
    pub per_image: Vec<Vec<EdgeCounts>>,
    pub dataset: Vec<PrPoint>,
}

pub fn edge_pr_curve(
    preds: &[EdgeMap],
    gts: &[EdgeMap],
    cfg: &EdgeEvalConfig,
) -> Result<EdgeCurves, MetricsError> {
    cfg.validate()?;
    if preds.len() != gts.len() {
        return Err(MetricsError::Length(format!(
            "{} predictions, {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        if (p.width, p.height) != (g.width, g.height) {
            return Err(MetricsError::Shape(format!(
                "pair {i}: {}x{} vs {}x{}",
                p.width, p.height, g.width, g.height
            )));
        }
        if g.data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(MetricsError::NonBinaryGroundTruth(i));
        }
        if p.data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(MetricsError::PredictionRange(i));
        }
    }
    let thresholds = cfg.threshold_values();
    let per_image: Vec<Vec<EdgeCounts>> = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| {
            let tol = cfg.tolerance_for(p.width, p.height);
            thresholds
                .iter()
                .map(|&t| edge_counts(p, g, t, tol, cfg.thin))
                .collect()
        })
        .collect();
    let dataset = thresholds
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut c = EdgeCounts::default();
            per_image.iter().for_each(|img| c.add(&img[k]));
            PrPoint {
                threshold: t,
                precision: c.precision(),
                recall: c.recall(),
                f: c.f(),
            }
        })
        .collect();
    Ok(EdgeCurves {
        thresholds,
        per_image,
        dataset,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeEvalResult {
    pub ods: f64,
    pub ods_threshold: f64,
    pub ois: f64,
    pub ap: f64,
    pub pr_curve: Vec<PrPoint>,
}

/// ODS: best dataset F over thresholds. OIS: F of the counts summed over
/// each image's own best threshold. AP: trapezoid area over recall-sorted
/// points, duplicate recalls collapsed to their best precision.
pub fn edge_summary(curves: &EdgeCurves) -> EdgeEvalResult {
    let (mut ods, mut ods_threshold) = (0.0, curves.thresholds.first().copied().unwrap_or(0.0));
    for p in &curves.dataset {
        if p.f > ods {
            ods = p.f;
            ods_threshold = p.threshold;
        }
    }
    let mut best = EdgeCounts::default();
    for img in &curves.per_image {
        let mut pick = img[0];
        for c in &img[1..] {
            if c.f() > pick.f() {
                pick = *c;
            }
        }
        best.add(&pick);
    }
    let mut pts: Vec<(f64, f64)> = curves
        .dataset
        .iter()
        .map(|p| (p.recall, p.precision))
        .collect();
    pts.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(b.1.partial_cmp(&a.1).unwrap())
    });
    pts.dedup_by(|later, first| later.0 == first.0);
    let ap = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    EdgeEvalResult {
        ods,
        ods_threshold,
        ois: best.f(),
        ap,
        pr_curve: curves.dataset.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_hand_example() {
        let pred = EdgeMap::new(6, 1, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let gt = EdgeMap::new(6, 1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let c = edge_counts(&pred, &gt, 0.5, 0.0, false);
        assert_eq!(
            c,
            EdgeCounts {
                tp: 1,
                fp: 1,
                fn_: 1
            }
        );
        assert_eq!((c.precision(), c.recall(), c.f()), (0.5, 0.5, 0.5));
        assert_eq!(edge_counts(&pred, &gt, 0.5, 1.0, false).tp, 2);
    }

    #[test]
    fn perfect_prediction() {
        let data: Vec<f64> = (0..64)
            .map(|i| if i % 9 == 0 { 1.0 } else { 0.0 })
            .collect();
        let m = EdgeMap::new(8, 8, data).unwrap();
        let curves = edge_pr_curve(&[m.clone()], &[m], &EdgeEvalConfig::default()).unwrap();
        let r = edge_summary(&curves);
        assert_eq!((r.ods, r.ois), (1.0, 1.0));
        assert!(curves
            .dataset
            .iter()
            .all(|p| p.precision == 1.0 && p.recall == 1.0));
    }

    #[test]
    fn hopcroft_karp_needs_augmenting_paths() {
        // Greedy in index order matches p0-g0 and strands p1.
        let pred = [(1, 0), (0, 0)];
        let gt = [(0, 0), (2, 0)];
        assert_eq!(max_matching(&pred, &gt, 1.0), 2);
    }

    #[test]
    fn tolerance_and_thresholds() {
        assert_eq!(default_tolerance(64, 64), 1.0);
        assert_eq!(default_tolerance(321, 481), 4.0);
        let t = EdgeEvalConfig {
            thresholds: 3,
            ..Default::default()
        }
        .threshold_values();
        assert_eq!(t, vec![0.25, 0.5, 0.75]);
        assert!(EdgeEvalConfig {
            thresholds: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn input_validation() {
        let p = EdgeMap::new(2, 1, vec![0.0, 0.5]).unwrap();
        let g = EdgeMap::new(2, 1, vec![0.0, 0.5]).unwrap();
        let cfg = EdgeEvalConfig::default();
        assert_eq!(
            edge_pr_curve(&[p.clone()], &[g], &cfg),
            Err(MetricsError::NonBinaryGroundTruth(0))
        );
        let g3 = EdgeMap::new(3, 1, vec![0.0; 3]).unwrap();
        assert!(matches!(
            edge_pr_curve(&[p], &[g3], &cfg),
            Err(MetricsError::Shape(_))
        ));
    }

    #[test]
    fn thinning_reduces_thick_line_to_one_pixel() {
        let (w, h) = (10, 7);
        let mut m = vec![false; w * h];
        for y in 2..5 {
            for x in 1..9 {
                m[y * w + x] = true;
            }
        }
        thin(&mut m, w, h);
        for x in 3..7 {
            assert_eq!((0..h).filter(|&y| m[y * w + x]).count(), 1, "column {x}");
        }
    }

    #[test]
    fn ois_and_ods_differ_when_bests_split() {
        // Image A prefers t=0.25, image B prefers t=0.75.
        let a_pred = EdgeMap::new(4, 1, vec![0.3, 0.3, 0.3, 0.0]).unwrap();
        let a_gt = EdgeMap::new(4, 1, vec![1.0, 1.0, 1.0, 0.0]).unwrap();
        let b_pred = EdgeMap::new(4, 1, vec![0.8, 0.3, 0.3, 0.3]).unwrap();
        let b_gt = EdgeMap::new(4, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let cfg = EdgeEvalConfig {
            thresholds: 3,
            match_tolerance: Some(0.0),
            thin: false,
        };
        let r = edge_summary(&edge_pr_curve(&[a_pred, b_pred], &[a_gt, b_gt], &cfg).unwrap());
        // t=0.25: A (3,0,0) B (1,3,0) -> P 4/7, R 1, F 8/11.
        // t=0.75: A (0,0,3) B (1,0,0) -> P 1, R 1/4, F 2/5.
        // OIS: A at 0.25 + B at 0.75 = (4,0,0) -> F 1.
        assert!((r.ods - 8.0 / 11.0).abs() < 1e-12);
        assert_eq!(r.ois, 1.0);
    }
}
