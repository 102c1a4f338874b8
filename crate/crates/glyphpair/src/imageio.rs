//! 8-bit grayscale PNG/JPEG in and out.

use std::path::Path;

use image::imageops::FilterType;
use image::{GrayImage, ImageReader};

/// Luminance in `[0, 1]`, resized to `size × size` when needed.
pub fn load_gray(path: &Path, size: usize) -> Result<Vec<f32>, image::ImageError> {
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()?
        .to_luma8();
    let img = if img.width() as usize == size && img.height() as usize == size {
        img
    } else {
        image::imageops::resize(&img, size as u32, size as u32, FilterType::Triangle)
    };
    Ok(img
        .into_raw()
        .into_iter()
        .map(|v| v as f32 / 255.0)
        .collect())
}

/// Drawings are stored dark-on-light; in memory ink is 1.
pub fn load_drawing(path: &Path, size: usize) -> Result<Vec<f32>, image::ImageError> {
    load_gray(path, size).map(|v| v.into_iter().map(|x| 1.0 - x).collect())
}

/// Header-only readability check.
pub fn probe(path: &Path) -> Result<(u32, u32), image::ImageError> {
    ImageReader::open(path)?
        .with_guessed_format()?
        .into_dimensions()
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn gray_image(width: usize, height: usize, values: impl IntoIterator<Item = f64>) -> GrayImage {
    let raw: Vec<u8> = values.into_iter().map(to_u8).collect();
    GrayImage::from_raw(width as u32, height as u32, raw).expect("buffer matches dimensions")
}

pub fn save_gray(
    path: &Path,
    width: usize,
    height: usize,
    values: impl IntoIterator<Item = f64>,
) -> Result<(), image::ImageError> {
    gray_image(width, height, values).save_with_format(path, image::ImageFormat::Png)
}

/// Writes an ink-is-1 raster the way drawings are stored on disk.
pub fn save_drawing(
    path: &Path,
    width: usize,
    height: usize,
    ink: impl IntoIterator<Item = f64>,
) -> Result<(), image::ImageError> {
    save_gray(path, width, height, ink.into_iter().map(|v| 1.0 - v))
}
