//! PNG masks and images.

use std::path::Path;

use image::{DynamicImage, GrayImage, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::map::DenseMap;

/// Loads an 8-bit PNG as a binary map: any nonzero channel marks the pixel as inside.
pub fn load_mask(path: impl AsRef<Path>) -> Result<DenseMap> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let cells: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.pixels().map(|p| f64::from(p.0[0] != 0)).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| f64::from(p.0.iter().any(|v| *v != 0)))
            .collect(),
    };
    DenseMap::from_vec(h, w, cells)
}

/// Writes a binary map as an 8-bit grayscale PNG (inside = 255).
pub fn save_mask(mask: &DenseMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = mask.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if mask.get(y as usize, x as usize) != 0.0 { 255 } else { 0 }])
    });
    img.save(path).map_err(|e| Error::image(path, e))
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    Ok(image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8())
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save(path).map_err(|e| Error::image(path, e))
}

/// `(height, width)` read from the image header.
pub fn image_size(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let (w, h) = image::image_dimensions(path).map_err(|e| Error::image(path, e))?;
    Ok((h as usize, w as usize))
}

/// Grayscale heatmap of a map min-max scaled to 0..=255.
pub fn save_heatmap(map: &DenseMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (lo, hi) = (map.min(), map.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (h, w) = map.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = (map.get(y as usize, x as usize) - lo) / span;
        Luma([(v * 255.0).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path).map_err(|e| Error::image(path, e))
}
