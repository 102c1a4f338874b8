//! Writing synthetic corpora to disk.

use std::fs;
use std::path::{Path, PathBuf};

use glyphpair_core::corpus::{VocabHeader, Vocabulary};
use glyphpair_core::synth::{self, SynthConfig, SynthPair};
use glyphpair_core::{Corpus, PairRecord};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imageio;
use crate::manifest;

#[derive(Serialize)]
struct GenMeta<'a> {
    generator: &'static str,
    version: &'static str,
    config: &'a SynthConfig,
    seed: u64,
    labeled: usize,
    unlabeled: usize,
}

/// Writes `images/{id}.png`, `drawings/{id}.png`, the manifest and
/// `gen_meta.json` under `out_dir`; returns the corpus as reloaded paths.
pub fn generate_corpus(
    cfg: &SynthConfig,
    out_dir: &Path,
    manifest_name: &str,
) -> Result<(Corpus, Vec<SynthPair>)> {
    let pairs = synth::generate_pairs(cfg)?;
    for sub in ["images", "drawings"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let s = cfg.image_size;
    let mut records = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let image_rel = format!("images/{}.png", p.id);
        let drawing_rel = format!("drawings/{}.png", p.id);
        let write_err = |path: PathBuf| {
            move |e: image::ImageError| Error::Data(format!("{}: {e}", path.display()))
        };
        imageio::save_gray(&out_dir.join(&image_rel), s, s, p.image.iter().copied())
            .map_err(write_err(out_dir.join(&image_rel)))?;
        imageio::save_drawing(&out_dir.join(&drawing_rel), s, s, p.drawing.iter().copied())
            .map_err(write_err(out_dir.join(&drawing_rel)))?;
        records.push(PairRecord {
            id: p.id.clone(),
            image_path: image_rel,
            drawing_path: drawing_rel,
            shape_label: p.labeled.then(|| SynthConfig::label_name(p.class_id)),
            source: Some(format!("synth seed={} pair_seed={}", cfg.seed, p.pair_seed)),
            ..Default::default()
        });
    }
    let vocab = Vocabulary::new(
        (0..cfg.num_classes as u32)
            .map(SynthConfig::label_name)
            .collect(),
    );
    let header = VocabHeader {
        shape: Some(vocab),
        ..Default::default()
    };
    let relative = Corpus::new(records, Some(&header))?;
    let manifest_path = out_dir.join(manifest_name);
    manifest::save_manifest(&relative, &manifest_path)?;
    let meta = GenMeta {
        generator: "glyphpair synth",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seed: cfg.seed,
        labeled: pairs.iter().filter(|p| p.labeled).count(),
        unlabeled: pairs.iter().filter(|p| !p.labeled).count(),
    };
    manifest::write_json(&out_dir.join("gen_meta.json"), &meta)?;
    let corpus = manifest::load_manifest_unchecked(&manifest_path)?;
    Ok((corpus, pairs))
}
