//! Decoding records into tensors and cutting them into batches.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use glyphpair_core::{Batch, Corpus, SplitPlan, Tensor};

use crate::error::{Error, Result};
use crate::imageio;

/// Decoded `size × size` image and drawing rasters, kept in memory.
#[derive(Clone, Debug)]
pub struct DecodedCorpus {
    image_size: usize,
    index: BTreeMap<String, usize>,
    images: Vec<Vec<f32>>,
    drawings: Vec<Vec<f32>>,
}

fn decode_record(corpus: &Corpus, i: usize, size: usize) -> Result<(Vec<f32>, Vec<f32>)> {
    let r = &corpus.records()[i];
    let err = |p: &String| {
        let path = PathBuf::from(p);
        move |source| Error::Decode {
            id: r.id.clone(),
            path,
            source,
        }
    };
    let image = imageio::load_gray(Path::new(&r.image_path), size).map_err(err(&r.image_path))?;
    let drawing =
        imageio::load_drawing(Path::new(&r.drawing_path), size).map_err(err(&r.drawing_path))?;
    Ok((image, drawing))
}

impl DecodedCorpus {
    /// Decodes the records named in `ids` (all records when `None`).
    pub fn decode<'a>(
        corpus: &Corpus,
        image_size: usize,
        ids: Option<impl IntoIterator<Item = &'a String>>,
    ) -> Result<Self> {
        let positions: Vec<usize> = match ids {
            None => (0..corpus.len()).collect(),
            Some(ids) => {
                let at = corpus.id_index();
                let mut v: Vec<usize> = ids
                    .into_iter()
                    .map(|id| {
                        at.get(id.as_str()).copied().ok_or_else(|| {
                            Error::Data(format!("record `{id}` is not in the corpus"))
                        })
                    })
                    .collect::<Result<_>>()?;
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        let mut out = DecodedCorpus {
            image_size,
            index: BTreeMap::new(),
            images: Vec::new(),
            drawings: Vec::new(),
        };
        for i in positions {
            let (im, dr) = decode_record(corpus, i, image_size)?;
            out.index
                .insert(corpus.records()[i].id.clone(), out.images.len());
            out.images.push(im);
            out.drawings.push(dr);
        }
        Ok(out)
    }

    /// In-memory rasters, e.g. straight from the synthesizer.
    pub fn from_rasters(
        image_size: usize,
        items: impl IntoIterator<Item = (String, Vec<f32>, Vec<f32>)>,
    ) -> Self {
        let mut out = DecodedCorpus {
            image_size,
            index: BTreeMap::new(),
            images: Vec::new(),
            drawings: Vec::new(),
        };
        for (id, im, dr) in items {
            assert_eq!(im.len(), image_size * image_size);
            assert_eq!(dr.len(), image_size * image_size);
            out.index.insert(id, out.images.len());
            out.images.push(im);
            out.drawings.push(dr);
        }
        out
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn pos(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Data(format!("record `{id}` was not decoded")))
    }

    pub fn image(&self, id: &str) -> Result<&[f32]> {
        Ok(&self.images[self.pos(id)?])
    }

    pub fn drawing(&self, id: &str) -> Result<&[f32]> {
        Ok(&self.drawings[self.pos(id)?])
    }

    fn stack(&self, ids: &[String], drawings: bool) -> Result<Tensor<f32>> {
        let s = self.image_size;
        let src = if drawings {
            &self.drawings
        } else {
            &self.images
        };
        let items: Vec<&[f32]> = ids
            .iter()
            .map(|id| self.pos(id).map(|p| src[p].as_slice()))
            .collect::<Result<_>>()?;
        Ok(Tensor::stack(&items, [1, s, s]))
    }

    pub fn images(&self, ids: &[String]) -> Result<Tensor<f32>> {
        self.stack(ids, false)
    }

    pub fn drawings(&self, ids: &[String]) -> Result<Tensor<f32>> {
        self.stack(ids, true)
    }

    pub fn batch(&self, ids: &[String], labels: Vec<Option<u32>>) -> Result<Batch<f32>> {
        Ok(Batch::new(
            self.images(ids)?,
            self.drawings(ids)?,
            labels,
            ids.to_vec(),
        )?)
    }

    /// One epoch of training batches in seeded order; the last batch may be
    /// short.
    pub fn epoch_batches<'a>(
        &'a self,
        plan: &'a SplitPlan,
        batch_size: usize,
        seed: u64,
        epoch: u64,
    ) -> impl Iterator<Item = Result<Batch<f32>>> + 'a {
        let order = plan.epoch_order(seed, epoch);
        let chunks: Vec<Vec<String>> = order
            .chunks(batch_size.max(1))
            .map(<[String]>::to_vec)
            .collect();
        chunks.into_iter().map(move |ids| {
            let labels = ids.iter().map(|id| plan.training_label(id)).collect();
            self.batch(&ids, labels)
        })
    }
}

/// Seeded training batches, decoding each record as its batch is built.
pub fn iterate_batches<'a>(
    corpus: &'a Corpus,
    plan: &'a SplitPlan,
    batch_size: usize,
    image_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<impl Iterator<Item = Result<Batch<f32>>> + 'a> {
    if batch_size == 0 {
        return Err(Error::Usage("batch_size must be >= 1".into()));
    }
    plan.check_against(corpus)?;
    let order = plan.epoch_order(seed, epoch);
    let chunks: Vec<Vec<String>> = order.chunks(batch_size).map(<[String]>::to_vec).collect();
    Ok(chunks.into_iter().map(move |ids| {
        let decoded = DecodedCorpus::decode(corpus, image_size, Some(ids.iter()))?;
        let labels = ids.iter().map(|id| plan.training_label(id)).collect();
        decoded.batch(&ids, labels)
    }))
}
