//! Procedural glyph pairs: a clean drawing and a degraded "photograph" of
//! the same jittered glyph instance.
//!
//! Each class is a fixed set of 2–3 stroke primitives drawn from the
//! corpus seed; instances perturb the control points. Unlabeled pairs use
//! a second, disjoint set of classes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, tag};

mod degrade;
mod raster;

pub use degrade::{affine, degrade_image, shade, DegradationConfig, STONE};
pub use raster::render_drawing;

use core::f64::consts::{PI, TAU};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthesis config: {0}")]
    Config(String),
    #[error("invalid glyph: {0}")]
    Glyph(String),
}

/// A primitive in unit-square coordinates, `y` pointing down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stroke {
    Polyline {
        points: Vec<(f64, f64)>,
    },
    Arc {
        center: (f64, f64),
        radius: f64,
        start: f64,
        sweep: f64,
    },
    Ellipse {
        center: (f64, f64),
        rx: f64,
        ry: f64,
        rotation: f64,
    },
}

impl Stroke {
    fn control_points(&self) -> Vec<(f64, f64)> {
        match self {
            Stroke::Polyline { points } => points.clone(),
            Stroke::Arc { center, .. } | Stroke::Ellipse { center, .. } => alloc::vec![*center],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlyphSpec {
    pub class_id: u32,
    pub strokes: Vec<Stroke>,
    /// Pixels at render size.
    pub stroke_width: f64,
    /// Max control-point perturbation per instance, unit-square units.
    pub jitter: f64,
}

const MIN_CTRL: f64 = 0.02;
const MAX_CTRL: f64 = 0.98;

impl GlyphSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.strokes.is_empty() {
            return Err(SynthError::Glyph(String::from("no strokes")));
        }
        if !(0.0..0.2).contains(&self.jitter) {
            return Err(SynthError::Glyph(format!(
                "jitter {} outside [0, 0.2)",
                self.jitter
            )));
        }
        if !(self.stroke_width > 0.0) {
            return Err(SynthError::Glyph(format!(
                "stroke width {} must be > 0",
                self.stroke_width
            )));
        }
        for s in &self.strokes {
            if let Stroke::Polyline { points } = s {
                if points.is_empty() {
                    return Err(SynthError::Glyph(String::from("empty polyline")));
                }
            }
            for (x, y) in s.control_points() {
                if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
                    return Err(SynthError::Glyph(format!(
                        "control point ({x}, {y}) outside the unit square"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Class template for `class_id` within the family of `corpus_seed`.
    pub fn prototype(class_id: u32, corpus_seed: u64, stroke_width: f64, jitter: f64) -> GlyphSpec {
        let mut rng = seed::rng(corpus_seed, &[tag("class"), class_id as u64]);
        let n = rng.gen_range(2..=3);
        let strokes = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => {
                    let k = rng.gen_range(2..=4);
                    Stroke::Polyline {
                        points: (0..k)
                            .map(|_| (rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85)))
                            .collect(),
                    }
                }
                1 => Stroke::Arc {
                    center: (rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)),
                    radius: rng.gen_range(0.12..0.25),
                    start: rng.gen_range(0.0..TAU),
                    sweep: rng.gen_range(PI / 2.0..1.5 * PI),
                },
                _ => Stroke::Ellipse {
                    center: (rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)),
                    rx: rng.gen_range(0.08..0.2),
                    ry: rng.gen_range(0.08..0.2),
                    rotation: rng.gen_range(0.0..PI),
                },
            })
            .collect();
        GlyphSpec {
            class_id,
            strokes,
            stroke_width,
            jitter,
        }
    }

    /// A perturbed copy: control points move by up to `jitter`, radii by up
    /// to a relative `jitter`, angles by up to `jitter · π`.
    pub fn instance<R: Rng + ?Sized>(&self, rng: &mut R) -> GlyphSpec {
        let j = self.jitter;
        let d = |rng: &mut R| if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
        let pt = |rng: &mut R, p: (f64, f64)| {
            (
                (p.0 + d(rng)).clamp(MIN_CTRL, MAX_CTRL),
                (p.1 + d(rng)).clamp(MIN_CTRL, MAX_CTRL),
            )
        };
        let strokes = self
            .strokes
            .iter()
            .map(|s| match s {
                Stroke::Polyline { points } => Stroke::Polyline {
                    points: points.iter().map(|&p| pt(rng, p)).collect(),
                },
                Stroke::Arc {
                    center,
                    radius,
                    start,
                    sweep,
                } => Stroke::Arc {
                    center: pt(rng, *center),
                    radius: radius * (1.0 + d(rng)),
                    start: start + PI * d(rng),
                    sweep: sweep * (1.0 + d(rng)),
                },
                Stroke::Ellipse {
                    center,
                    rx,
                    ry,
                    rotation,
                } => Stroke::Ellipse {
                    center: pt(rng, *center),
                    rx: rx * (1.0 + d(rng)),
                    ry: ry * (1.0 + d(rng)),
                    rotation: rotation + PI * d(rng),
                },
            })
            .collect();
        GlyphSpec {
            strokes,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub per_class_labeled: usize,
    pub extra_unlabeled: usize,
    pub image_size: usize,
    pub degradation: DegradationConfig,
    pub seed: u64,
    pub jitter: f64,
    /// As a fraction of `image_size`.
    pub stroke_width: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 10,
            per_class_labeled: 40,
            extra_unlabeled: 400,
            image_size: 64,
            degradation: DegradationConfig::heavy(),
            seed: 7,
            jitter: 0.05,
            stroke_width: 0.05,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_classes < 2 {
            return Err(SynthError::Config(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.per_class_labeled < 2 {
            return Err(SynthError::Config(format!(
                "per_class_labeled must be >= 2, got {}",
                self.per_class_labeled
            )));
        }
        if self.image_size < 8 {
            return Err(SynthError::Config(format!(
                "image_size must be >= 8, got {}",
                self.image_size
            )));
        }
        if !(0.0..0.2).contains(&self.jitter) {
            return Err(SynthError::Config(format!(
                "jitter must be in [0, 0.2), got {}",
                self.jitter
            )));
        }
        if !(self.stroke_width > 0.0 && self.stroke_width < 0.5) {
            return Err(SynthError::Config(format!(
                "stroke_width must be in (0, 0.5), got {}",
                self.stroke_width
            )));
        }
        self.degradation
            .validate(self.image_size)
            .map_err(SynthError::Config)
    }

    pub fn stroke_width_px(&self) -> f64 {
        self.stroke_width * self.image_size as f64
    }

    pub fn label_name(class_id: u32) -> String {
        format!("glyph{class_id:02}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPair {
    pub id: String,
    /// Generating class; unlabeled pairs use ids `num_classes..2·num_classes`.
    pub class_id: u32,
    pub labeled: bool,
    /// Seed every random choice of this pair derives from.
    pub pair_seed: u64,
    pub glyph: GlyphSpec,
    /// Row-major, ink = 1.
    pub drawing: Vec<f64>,
    pub image: Vec<f64>,
}

/// Regenerates the pair of `class_id` / `index` exactly.
pub fn make_pair(cfg: &SynthConfig, class_id: u32, index: usize, labeled: bool) -> SynthPair {
    let pair_seed = seed::derive(cfg.seed, &[tag("pair"), class_id as u64, index as u64]);
    let proto = GlyphSpec::prototype(class_id, cfg.seed, cfg.stroke_width_px(), cfg.jitter);
    let glyph = proto.instance(&mut seed::rng(pair_seed, &[tag("jitter")]));
    let drawing = render_drawing(&glyph, cfg.image_size);
    let image = degrade_image(
        &drawing,
        cfg.image_size,
        &cfg.degradation,
        seed::derive(pair_seed, &[tag("degrade")]),
    );
    let id = if labeled {
        format!("s{class_id:02}_{index:04}")
    } else {
        format!("u{class_id:02}_{index:04}")
    };
    SynthPair {
        id,
        class_id,
        labeled,
        pair_seed,
        glyph,
        drawing,
        image,
    }
}

/// Labeled pairs class by class, then unlabeled pairs dealt round-robin
/// over the held-out classes.
pub fn generate_pairs(cfg: &SynthConfig) -> Result<Vec<SynthPair>, SynthError> {
    cfg.validate()?;
    let k = cfg.num_classes as u32;
    let mut out = Vec::with_capacity(cfg.num_classes * cfg.per_class_labeled + cfg.extra_unlabeled);
    for c in 0..k {
        for i in 0..cfg.per_class_labeled {
            out.push(make_pair(cfg, c, i, true));
        }
    }
    for i in 0..cfg.extra_unlabeled {
        out.push(make_pair(
            cfg,
            k + (i % cfg.num_classes) as u32,
            i / cfg.num_classes,
            false,
        ));
    }
    Ok(out)
}
