//! Anti-aliased stroke rasterization.

use alloc::vec;
use alloc::vec::Vec;

use super::{GlyphSpec, Stroke};

/// Segments per full turn when flattening arcs and ellipses.
const SEGMENTS_PER_TURN: usize = 64;

impl Stroke {
    /// The stroke as a polyline in unit coordinates.
    pub fn flatten(&self) -> Vec<(f64, f64)> {
        match self {
            Stroke::Polyline { points } => points.clone(),
            Stroke::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let n = libm::ceil(
                    libm::fabs(*sweep) / core::f64::consts::TAU * SEGMENTS_PER_TURN as f64,
                )
                .max(2.0) as usize;
                (0..=n)
                    .map(|i| {
                        let a = start + sweep * i as f64 / n as f64;
                        (
                            center.0 + radius * libm::cos(a),
                            center.1 + radius * libm::sin(a),
                        )
                    })
                    .collect()
            }
            Stroke::Ellipse {
                center,
                rx,
                ry,
                rotation,
            } => {
                let (c, s) = (libm::cos(*rotation), libm::sin(*rotation));
                (0..=SEGMENTS_PER_TURN)
                    .map(|i| {
                        let a = core::f64::consts::TAU * i as f64 / SEGMENTS_PER_TURN as f64;
                        let (x, y) = (rx * libm::cos(a), ry * libm::sin(a));
                        (center.0 + c * x - s * y, center.1 + s * x + c * y)
                    })
                    .collect()
            }
        }
    }
}

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx - px, a.1 + t * dy - py);
    libm::sqrt(qx * qx + qy * qy)
}

/// Row-major `size × size` raster, ink = 1. A pixel's ink is
/// `clamp(w/2 + 1/2 - d, 0, 1)` with `d` the distance in pixels from its
/// centre to the nearest stroke.
pub fn render_drawing(glyph: &GlyphSpec, size: usize) -> Vec<f64> {
    let s = size as f64;
    let mut dist = vec![f64::INFINITY; size * size];
    let reach = glyph.stroke_width / 2.0 + 0.5;
    for stroke in &glyph.strokes {
        let pts: Vec<(f64, f64)> = stroke
            .flatten()
            .into_iter()
            .map(|(x, y)| (x * s, y * s))
            .collect();
        let segs: Vec<((f64, f64), (f64, f64))> = if pts.len() == 1 {
            vec![(pts[0], pts[0])]
        } else {
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        };
        for (a, b) in segs {
            let x0 = libm::floor(a.0.min(b.0) - reach).max(0.0) as usize;
            let x1 = (libm::ceil(a.0.max(b.0) + reach).max(0.0) as usize).min(size);
            let y0 = libm::floor(a.1.min(b.1) - reach).max(0.0) as usize;
            let y1 = (libm::ceil(a.1.max(b.1) + reach).max(0.0) as usize).min(size);
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = segment_distance(x as f64 + 0.5, y as f64 + 0.5, a, b);
                    let cell = &mut dist[y * size + x];
                    if d < *cell {
                        *cell = d;
                    }
                }
            }
        }
    }
    dist.into_iter()
        .map(|d| (reach - d).clamp(0.0, 1.0))
        .collect()
}
