//! Heatmap overlays with a fixed colormap.

use image::{Rgb, RgbImage};

use crate::imageio::to_u8;

/// Opacity of the heat layer at full heat; zero heat leaves the input.
pub const ALPHA: f64 = 0.6;

/// Piecewise-linear blue → cyan → yellow → red ramp over `[0, 1]`.
pub fn colormap(v: f64) -> [f64; 3] {
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [0.0, 0.0, 1.0]),
        (1.0 / 3.0, [0.0, 1.0, 1.0]),
        (2.0 / 3.0, [1.0, 1.0, 0.0]),
        (1.0, [1.0, 0.0, 0.0]),
    ];
    let v = if v.is_finite() {
        v.clamp(0.0, 1.0)
    } else {
        0.0
    };
    for w in STOPS.windows(2) {
        let ((a, ca), (b, cb)) = (w[0], w[1]);
        if v <= b {
            let t = (v - a) / (b - a);
            return [0, 1, 2].map(|i| ca[i] + t * (cb[i] - ca[i]));
        }
    }
    STOPS[3].1
}

/// Grayscale `base` under the heat layer, blended per pixel with weight
/// `ALPHA · heat`.
pub fn blend(base: &[f32], heat: &[f64], width: usize, height: usize) -> RgbImage {
    assert_eq!(base.len(), width * height);
    assert_eq!(heat.len(), width * height);
    let mut img = RgbImage::new(width as u32, height as u32);
    for (i, (b, h)) in base.iter().zip(heat).enumerate() {
        let c = colormap(*h);
        let a = ALPHA * h.clamp(0.0, 1.0);
        let px = c.map(|ci| to_u8((1.0 - a) * f64::from(*b) + a * ci));
        img.put_pixel((i % width) as u32, (i / width) as u32, Rgb(px));
    }
    img
}
