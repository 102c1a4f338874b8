//! Turning a clean drawing into a worn "photograph" of an engraving.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::{self, tag};

/// Intensity of bare stone.
pub const STONE: f64 = 0.55;
/// Depth of a fully inked groove below [`STONE`].
const GROOVE: f64 = 0.4;
/// Brightness of the lit groove rim.
const HIGHLIGHT: f64 = 0.15;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradationConfig {
    /// Fraction of ink pixels erased by blotches, in `[0, 1)`.
    pub erosion_strength: f64,
    pub noise_sigma: f64,
    pub occluders: usize,
    /// Max `|dx|`, `|dy|` in pixels.
    pub misalign_translate: f64,
    /// Max rotation in degrees.
    pub misalign_rotate: f64,
    /// Max relative scale deviation.
    pub misalign_scale: f64,
    pub background_texture: f64,
}

impl DegradationConfig {
    pub fn none() -> Self {
        Self::default()
    }

    /// Worn, noisy and misaligned at 64 px; the acceptance setting.
    pub fn heavy() -> Self {
        Self::heavy_for(64)
    }

    /// [`DegradationConfig::heavy`] with the translation scaled to `size`.
    pub fn heavy_for(size: usize) -> Self {
        DegradationConfig {
            erosion_strength: 0.45,
            noise_sigma: 0.1,
            occluders: 3,
            misalign_translate: size as f64 / 16.0,
            misalign_rotate: 12.0,
            misalign_scale: 0.1,
            background_texture: 0.12,
        }
    }

    pub fn validate(&self, image_size: usize) -> Result<(), String> {
        let fields = [
            ("erosion_strength", self.erosion_strength),
            ("noise_sigma", self.noise_sigma),
            ("misalign_translate", self.misalign_translate),
            ("misalign_rotate", self.misalign_rotate),
            ("misalign_scale", self.misalign_scale),
            ("background_texture", self.background_texture),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.erosion_strength >= 1.0 {
            return Err(format!(
                "erosion_strength must be < 1, got {}",
                self.erosion_strength
            ));
        }
        if self.misalign_translate > 0.1 * image_size as f64 {
            return Err(format!(
                "misalign_translate {} exceeds 0.1 x image side {}",
                self.misalign_translate, image_size
            ));
        }
        Ok(())
    }

    fn misaligns(&self) -> bool {
        self.misalign_translate > 0.0 || self.misalign_rotate > 0.0 || self.misalign_scale > 0.0
    }
}

/// Engraved-relief rendering: dark grooves on mid-gray stone with a bright
/// rim where the groove falls away towards the lower right.
pub fn shade(clean: &[f64], size: usize) -> Vec<f64> {
    let mut out = vec![0.0; clean.len()];
    for y in 0..size {
        for x in 0..size {
            let ink = clean[y * size + x];
            let up_left = if x > 0 && y > 0 {
                clean[(y - 1) * size + x - 1]
            } else {
                0.0
            };
            let rim = (up_left - ink).max(0.0);
            out[y * size + x] = STONE - GROOVE * ink + HIGHLIGHT * rim;
        }
    }
    out
}

/// Shading, erosion, occluders, texture, noise, then a random affine;
/// clipped to `[0, 1]`. Each stage draws from its own seeded stream.
pub fn degrade_image(clean: &[f64], size: usize, cfg: &DegradationConfig, seed: u64) -> Vec<f64> {
    let mut img = shade(clean, size);
    let s = size as f64 / 64.0;

    if cfg.erosion_strength > 0.0 {
        let mut rng = seed::rng(seed, &[tag("erosion")]);
        let ink: Vec<usize> = (0..clean.len()).filter(|&i| clean[i] > 0.5).collect();
        let target = libm::ceil(cfg.erosion_strength * ink.len() as f64) as usize;
        let mut erased = vec![false; clean.len()];
        let mut count = 0;
        let mut guard = 0;
        while count < target && guard < 10_000 {
            guard += 1;
            let c = ink[rng.gen_range(0..ink.len())];
            let (cx, cy) = ((c % size) as f64, (c / size) as f64);
            let r = rng.gen_range(1.5..4.0) * s;
            let ri = libm::ceil(r) as i64;
            for dy in -ri..=ri {
                for dx in -ri..=ri {
                    let (x, y) = (cx as i64 + dx, cy as i64 + dy);
                    if x < 0
                        || y < 0
                        || x >= size as i64
                        || y >= size as i64
                        || ((dx * dx + dy * dy) as f64) > r * r
                    {
                        continue;
                    }
                    let i = y as usize * size + x as usize;
                    if !erased[i] {
                        erased[i] = true;
                        img[i] = STONE;
                        if clean[i] > 0.5 {
                            count += 1;
                        }
                    }
                }
            }
        }
    }

    if cfg.occluders > 0 {
        let mut rng = seed::rng(seed, &[tag("occluders")]);
        for _ in 0..cfg.occluders {
            let w = (rng.gen_range(4.0..12.0) * s) as usize;
            let h = (rng.gen_range(4.0..12.0) * s) as usize;
            let x0 = rng.gen_range(0..size.saturating_sub(w).max(1));
            let y0 = rng.gen_range(0..size.saturating_sub(h).max(1));
            let v = rng.gen_range(0.3..0.8);
            for y in y0..(y0 + h).min(size) {
                for x in x0..(x0 + w).min(size) {
                    img[y * size + x] = v;
                }
            }
        }
    }

    if cfg.background_texture > 0.0 {
        let mut rng = seed::rng(seed, &[tag("texture")]);
        let waves: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                let f = rng.gen_range(1.0..3.0);
                let a = rng.gen_range(0.0..core::f64::consts::TAU);
                (
                    f * libm::cos(a),
                    f * libm::sin(a),
                    rng.gen_range(0.0..core::f64::consts::TAU),
                )
            })
            .collect();
        for y in 0..size {
            for x in 0..size {
                let (u, v) = (x as f64 / size as f64, y as f64 / size as f64);
                let m: f64 = waves
                    .iter()
                    .map(|(fx, fy, p)| libm::sin(core::f64::consts::TAU * (fx * u + fy * v) + p))
                    .sum();
                img[y * size + x] += cfg.background_texture * m / 3.0;
            }
        }
    }

    if cfg.noise_sigma > 0.0 {
        let mut rng = seed::rng(seed, &[tag("noise")]);
        for v in &mut img {
            *v += cfg.noise_sigma * seed::gaussian(&mut rng);
        }
    }

    if cfg.misaligns() {
        let mut rng = seed::rng(seed, &[tag("misalign")]);
        let sym = |rng: &mut rand_chacha::ChaCha8Rng, m: f64| {
            if m > 0.0 {
                rng.gen_range(-m..=m)
            } else {
                0.0
            }
        };
        let tx = sym(&mut rng, cfg.misalign_translate);
        let ty = sym(&mut rng, cfg.misalign_translate);
        let rot = sym(&mut rng, cfg.misalign_rotate).to_radians();
        let scale = 1.0 + sym(&mut rng, cfg.misalign_scale);
        img = affine(&img, size, tx, ty, rot, scale, STONE);
    }

    for v in &mut img {
        *v = v.clamp(0.0, 1.0);
    }
    img
}

/// Output pixel `p` samples the input at `A⁻¹(p - c - t) + c` with `A` the
/// rotation-scale about the centre `c`; bilinear, `fill` outside.
pub fn affine(
    img: &[f64],
    size: usize,
    tx: f64,
    ty: f64,
    rot: f64,
    scale: f64,
    fill: f64,
) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let (cs, sn) = (libm::cos(rot), libm::sin(rot));
    let at = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= size as i64 || y >= size as i64 {
            fill
        } else {
            img[y as usize * size + x as usize]
        }
    };
    let mut out = vec![fill; img.len()];
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 - c - tx, y as f64 - c - ty);
            let sx = (cs * dx + sn * dy) / scale + c;
            let sy = (-sn * dx + cs * dy) / scale + c;
            let (x0, y0) = (libm::floor(sx), libm::floor(sy));
            let (fx, fy) = (sx - x0, sy - y0);
            let (xi, yi) = (x0 as i64, y0 as i64);
            out[y * size + x] = (1.0 - fy) * ((1.0 - fx) * at(xi, yi) + fx * at(xi + 1, yi))
                + fy * ((1.0 - fx) * at(xi, yi + 1) + fx * at(xi + 1, yi + 1));
        }
    }
    out
}
