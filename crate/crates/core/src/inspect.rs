//! Class localization maps (Grad-CAM over the image encoder's last stage).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{ModelError, PairModel, ParamGroup};
use crate::nn;
use crate::real::Real;
use crate::tensor::{Matrix, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InspectError {
    #[error("class {class} outside 0..{classes}")]
    ClassOutOfRange { class: u32, classes: usize },
    #[error("expected a single image [1, 1, S, S], got {0:?}")]
    NotSingle([usize; 4]),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    /// Row-major, in `[0, 1]`; the maximum is 1 unless all values are 0.
    pub values: Vec<f64>,
    pub class_id: u32,
    pub record_id: String,
}

impl Heatmap {
    /// `Σ heat·mask / Σ heat`; 0 for an all-zero map.
    pub fn mass_fraction(&self, mask: &[bool]) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        self.values
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v)
            .sum::<f64>()
            / total
    }
}

/// Channel weights are the spatial means of `d logit_class / d A` over the
/// last image-encoder stage `A`; the map is `relu(Σ_k w_k A_k)`, bilinearly
/// resized to the input and divided by its maximum.
pub fn localization_map<T: Real>(
    model: &PairModel<T>,
    image: &Tensor<T>,
    class_id: u32,
    record_id: &str,
) -> Result<Heatmap, InspectError> {
    let shape = image.shape();
    if shape[0] != 1 {
        return Err(InspectError::NotSingle(shape));
    }
    if class_id as usize >= model.num_classes() {
        return Err(InspectError::ClassOutOfRange {
            class: class_id,
            classes: model.num_classes(),
        });
    }
    model.check_input(image)?;
    let pass = model.branch(ParamGroup::EncIm, ParamGroup::HeadIm, image);
    let last = pass.encoder.last();
    let mut one_hot = Matrix::zeros(1, model.num_classes());
    one_hot.data_mut()[class_id as usize] = T::one();
    let dz = model
        .head_layout()
        .backward(model.group(ParamGroup::HeadIm), &pass.z, &one_hot, None);
    let grad = nn::global_avg_pool_backward(&dz, last.h, last.w);
    let plane = last.h * last.w;
    let mut cam = vec![0.0f64; plane];
    for k in 0..last.c {
        let g = &grad.data[k * plane..(k + 1) * plane];
        let weight = g.iter().map(|v| v.as_f64()).sum::<f64>() / plane as f64;
        for (c, a) in cam.iter_mut().zip(&last.data[k * plane..(k + 1) * plane]) {
            *c += weight * a.as_f64();
        }
    }
    cam.iter_mut().for_each(|v| *v = v.max(0.0));
    let (h, w) = (shape[2], shape[3]);
    let mut values = resize_bilinear(&cam, last.w, last.h, w, h);
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 && max.is_finite() {
        values.iter_mut().for_each(|v| *v /= max);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(Heatmap {
        width: w,
        height: h,
        values,
        class_id,
        record_id: String::from(record_id),
    })
}

/// Pixel-centre aligned bilinear resize with edge clamping.
pub fn resize_bilinear(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let coord = |d: usize, dn: usize, sn: usize| {
        let s = ((d as f64 + 0.5) * sn as f64 / dn as f64 - 0.5).clamp(0.0, (sn - 1) as f64);
        let i = s as usize;
        (i, (i + 1).min(sn - 1), s - i as f64)
    };
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let (y0, y1, fy) = coord(y, dh, sh);
        for x in 0..dw {
            let (x0, x1, fx) = coord(x, dw, sw);
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bot = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BackboneSpec;

    #[test]
    fn maps_are_normalized_and_pure() {
        let m = PairModel::<f32>::build(&BackboneSpec::custom(vec![4, 8, 16]), 3, 2).unwrap();
        let before = m.clone();
        let img = Tensor::from_vec(
            [1, 1, 16, 16],
            (0..256).map(|i| ((i * 37 % 101) as f32) / 100.0).collect(),
        );
        let mut any = false;
        for c in 0..3 {
            let h = localization_map(&m, &img, c, "r").unwrap();
            assert_eq!(h.values.len(), 256);
            assert!(h.values.iter().all(|v| (0.0..=1.0).contains(v)));
            let max = h.values.iter().copied().fold(0.0, f64::max);
            assert!(max == 0.0 || (max - 1.0).abs() < 1e-12);
            any |= max > 0.0;
        }
        assert!(any);
        assert_eq!(m, before);
        let zero = localization_map(&m, &Tensor::zeros([1, 1, 16, 16]), 0, "z").unwrap();
        assert!(zero.values.iter().all(|v| v.is_finite()));
        assert!(matches!(
            localization_map(&m, &img, 3, "r"),
            Err(InspectError::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn resize_identity_and_constant() {
        let src = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(resize_bilinear(&src, 2, 2, 2, 2), src);
        assert!(resize_bilinear(&[5.0; 4], 2, 2, 7, 7)
            .iter()
            .all(|&v| v == 5.0));
    }
}
