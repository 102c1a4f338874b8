//! JSON-Lines corpus manifests.
//!
//! One [`PairRecord`] per line. An optional first line
//! `{"vocab": {"shape": [...], "period": [...], "subperiod": [...]}}` fixes
//! label order; otherwise vocabularies are the sorted union of labels seen.
//! Relative paths are resolved against the manifest's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use glyphpair_core::corpus::VocabHeader;
use glyphpair_core::{Corpus, PairRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    vocab: VocabHeader,
}

/// Parses manifest text; `base` resolves relative paths.
pub fn parse_manifest(text: &str, base: &Path, origin: &Path) -> Result<Corpus> {
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let bad = |e: serde_json::Error| {
            Error::Data(format!(
                "{}:{lineno}: malformed manifest line: {e}",
                origin.display()
            ))
        };
        if records.is_empty() && header.is_none() && is_header(line) {
            let h: HeaderLine = serde_json::from_str(line).map_err(bad)?;
            header = Some(h.vocab);
            continue;
        }
        let mut r: PairRecord = serde_json::from_str(line).map_err(bad)?;
        r.image_path = resolve(base, &r.image_path);
        r.drawing_path = resolve(base, &r.drawing_path);
        records.push(r);
    }
    Ok(Corpus::new(records, header.as_ref())?)
}

fn is_header(line: &str) -> bool {
    matches!(serde_json::from_str::<serde_json::Value>(line), Ok(serde_json::Value::Object(m)) if m.contains_key("vocab") && !m.contains_key("id"))
}

fn resolve(base: &Path, p: &str) -> String {
    base.join(p).to_string_lossy().into_owned()
}

/// Loads and validates a manifest, checking every referenced image can be
/// opened and identified.
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let corpus = load_manifest_unchecked(path)?;
    for r in corpus.records() {
        for p in [&r.image_path, &r.drawing_path] {
            imageio::probe(Path::new(p)).map_err(|source| Error::Decode {
                id: r.id.clone(),
                path: PathBuf::from(p),
                source,
            })?;
        }
    }
    Ok(corpus)
}

/// [`load_manifest`] without touching the referenced images.
pub fn load_manifest_unchecked(path: &Path) -> Result<Corpus> {
    if !path.exists() {
        return Err(Error::Data(format!(
            "manifest not found: {}",
            path.display()
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base, path)
}

/// Writes the header (when any vocabulary was explicit) and one line per
/// record, paths as stored in the corpus.
pub fn save_manifest(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let header = corpus.vocab_header();
    if header != VocabHeader::default() {
        serde_json::to_writer(&mut out, &HeaderLine { vocab: header }).expect("in-memory write");
        out.push(b'\n');
    }
    for r in corpus.records() {
        serde_json::to_writer(&mut out, r).expect("in-memory write");
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

/// Writes via a sibling temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable report");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::Data(format!("file not found: {}", path.display())));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
