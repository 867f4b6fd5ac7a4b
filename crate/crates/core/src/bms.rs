//! Boolean Map Saliency, a classical training-free saliency model, and two
//! knowledge-free reference maps (center prior, uniform noise).
//!
//! Feature channels are thresholded at regular levels into boolean maps.
//! Regions connected to the image border are suppressed, the remainder is
//! opened with a disk and L2-normalized, and the mean over all maps is
//! blurred and rescaled to `[0, 1]`.

use std::collections::VecDeque;

use image::RgbImage;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::DenseMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorSpace {
    /// Intensity plus red-green and blue-yellow opponent channels.
    OpponentLabLike,
    Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmsConfig {
    pub threshold_step: u32,
    pub opening_radius: usize,
    pub blur_sigma: f64,
    pub use_both_polarities: bool,
    pub colorspace: ColorSpace,
}

impl Default for BmsConfig {
    fn default() -> Self {
        Self {
            threshold_step: 8,
            opening_radius: 2,
            blur_sigma: 7.0,
            use_both_polarities: true,
            colorspace: ColorSpace::OpponentLabLike,
        }
    }
}

impl BmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=128).contains(&self.threshold_step) {
            return Err(Error::InvalidConfig("threshold_step must lie in 1..=128".into()));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::InvalidConfig("blur_sigma must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// `step, 2*step, ...` below 256.
    pub fn thresholds(&self) -> Vec<f64> {
        let step = self.threshold_step.max(1);
        (1..).map(|k| k * step).take_while(|t| *t < 256).map(f64::from).collect()
    }
}

/// Per-channel grids on a 0..=255 scale.
pub fn feature_channels(img: &RgbImage, colorspace: ColorSpace) -> Vec<DenseMap> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = |x: usize, y: usize| {
        let p = img.get_pixel(x as u32, y as u32).0;
        (f64::from(p[0]), f64::from(p[1]), f64::from(p[2]))
    };
    let make = |f: &dyn Fn(f64, f64, f64) -> f64| {
        DenseMap::from_fn(h, w, |(y, x)| {
            let (r, g, b) = px(x, y);
            f(r, g, b)
        })
        .expect("8-bit channels are finite")
    };
    match colorspace {
        ColorSpace::Rgb => vec![make(&|r, _, _| r), make(&|_, g, _| g), make(&|_, _, b| b)],
        ColorSpace::OpponentLabLike => vec![
            make(&|r, g, b| (r + g + b) / 3.0),
            make(&|r, g, _| (r - g + 255.0) / 2.0),
            make(&|r, g, b| ((r + g) / 2.0 - b + 255.0) / 2.0),
        ],
    }
}

#[derive(Debug, Clone, Copy)]
struct MapTask {
    channel: usize,
    threshold: f64,
    above: bool,
}

fn tasks(n_channels: usize, cfg: &BmsConfig) -> Vec<MapTask> {
    let mut out = Vec::new();
    for channel in 0..n_channels {
        for threshold in cfg.thresholds() {
            out.push(MapTask {
                channel,
                threshold,
                above: true,
            });
            if cfg.use_both_polarities {
                out.push(MapTask {
                    channel,
                    threshold,
                    above: false,
                });
            }
        }
    }
    out
}

fn threshold_map(channel: &DenseMap, t: &MapTask) -> Vec<bool> {
    channel
        .as_slice()
        .iter()
        .map(|v| if t.above { *v > t.threshold } else { *v <= t.threshold })
        .collect()
}

fn to_dense(h: usize, w: usize, bits: &[bool]) -> DenseMap {
    DenseMap::from_vec(h, w, bits.iter().map(|b| f64::from(*b)).collect()).expect("sizes agree")
}

/// Every boolean map of the given 0..=255 channels: for each channel and
/// threshold, `channel > t` and, with both polarities, `channel <= t`.
pub fn boolean_maps(channels: &[DenseMap], cfg: &BmsConfig) -> Vec<DenseMap> {
    tasks(channels.len(), cfg)
        .iter()
        .map(|t| {
            let ch = &channels[t.channel];
            to_dense(ch.height(), ch.width(), &threshold_map(ch, t))
        })
        .collect()
}

/// Clears every 4-connected set pixel reachable from the image border.
fn suppress_border(h: usize, w: usize, bits: &mut [bool]) {
    let mut queue = VecDeque::new();
    let seed = |i: usize, bits: &mut [bool], q: &mut VecDeque<usize>| {
        if bits[i] {
            bits[i] = false;
            q.push_back(i);
        }
    };
    for x in 0..w {
        seed(x, bits, &mut queue);
        seed((h - 1) * w + x, bits, &mut queue);
    }
    for y in 0..h {
        seed(y * w, bits, &mut queue);
        seed(y * w + w - 1, bits, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        let (y, x) = (i / w, i % w);
        if y > 0 {
            seed(i - w, bits, &mut queue);
        }
        if y + 1 < h {
            seed(i + w, bits, &mut queue);
        }
        if x > 0 {
            seed(i - 1, bits, &mut queue);
        }
        if x + 1 < w {
            seed(i + 1, bits, &mut queue);
        }
    }
}

fn disk(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dy * dy + dx * dx <= r * r {
                out.push((dy, dx));
            }
        }
    }
    out
}

/// Morphological opening with a disk; pixels outside the image count as unset.
fn open(h: usize, w: usize, bits: &[bool], radius: usize) -> Vec<bool> {
    if radius == 0 {
        return bits.to_vec();
    }
    let se = disk(radius);
    let at = |b: &[bool], y: isize, x: isize| y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w && b[y as usize * w + x as usize];
    let mut eroded = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if bits[y * w + x] {
                eroded[y * w + x] = se.iter().all(|(dy, dx)| at(bits, y as isize + dy, x as isize + dx));
            }
        }
    }
    let mut opened = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if eroded[y * w + x] {
                for (dy, dx) in &se {
                    let (yy, xx) = (y as isize + dy, x as isize + dx);
                    if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                        opened[yy as usize * w + xx as usize] = true;
                    }
                }
            }
        }
    }
    opened
}

fn attention_bits(h: usize, w: usize, mut bits: Vec<bool>, radius: usize) -> Option<Array2<f64>> {
    suppress_border(h, w, &mut bits);
    if !bits.iter().any(|b| *b) {
        return None;
    }
    let opened = open(h, w, &bits, radius);
    let count = opened.iter().filter(|b| **b).count();
    if count == 0 {
        return None;
    }
    let norm = (count as f64).sqrt();
    Some(Array2::from_shape_fn((h, w), |(y, x)| if opened[y * w + x] { 1.0 / norm } else { 0.0 }))
}

/// Border-suppressed, opened and L2-normalized version of a boolean map.
pub fn attention_map(bmap: &DenseMap, cfg: &BmsConfig) -> DenseMap {
    let (h, w) = bmap.dims();
    let bits: Vec<bool> = bmap.as_slice().iter().map(|v| *v != 0.0).collect();
    match attention_bits(h, w, bits, cfg.opening_radius) {
        Some(a) => DenseMap::new(a).expect("finite"),
        None => DenseMap::zeros(h, w),
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian blur; the kernel is renormalized where it leaves the image.
pub fn gaussian_blur(m: &DenseMap, sigma: f64) -> DenseMap {
    if sigma <= 0.0 {
        return m.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (h, w) = m.dims();
    let src = m.values();
    let pass = |get: &dyn Fn(usize, usize) -> f64, len: usize, i: usize, j: usize| {
        let (mut acc, mut wsum) = (0.0, 0.0);
        for (t, kv) in k.iter().enumerate() {
            let p = j as isize + t as isize - r;
            if p >= 0 && (p as usize) < len {
                acc += kv * get(i, p as usize);
                wsum += kv;
            }
        }
        acc / wsum
    };
    let rows = Array2::from_shape_fn((h, w), |(y, x)| pass(&|i, p| src[[i, p]], w, y, x));
    let out = Array2::from_shape_fn((h, w), |(y, x)| pass(&|i, p| rows[[p, i]], h, x, y));
    DenseMap::new(out).expect("finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmsSaliency {
    pub map: DenseMap,
    /// Set when every attention map was empty and the output is all zeros.
    pub degenerate: bool,
}

/// Chunk size of the fixed-shape reduction over boolean maps.
const REDUCE_CHUNK: usize = 8;

pub fn bms_saliency(image: &RgbImage, cfg: &BmsConfig) -> Result<BmsSaliency> {
    cfg.validate()?;
    let (h, w) = (image.height() as usize, image.width() as usize);
    if h == 0 || w == 0 {
        return Err(Error::InvalidShape {
            shape: vec![h, w],
            reason: "empty image".into(),
        });
    }
    let channels = feature_channels(image, cfg.colorspace);
    let all = tasks(channels.len(), cfg);
    // fixed chunking keeps the summation order independent of thread count
    let partials: Vec<Array2<f64>> = all
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = Array2::<f64>::zeros((h, w));
            for t in chunk {
                if let Some(a) = attention_bits(h, w, threshold_map(&channels[t.channel], t), cfg.opening_radius) {
                    acc += &a;
                }
            }
            acc
        })
        .collect();
    let mut mean = Array2::<f64>::zeros((h, w));
    for p in &partials {
        mean += p;
    }
    mean /= all.len() as f64;
    if mean.iter().all(|v| *v == 0.0) {
        return Ok(BmsSaliency {
            map: DenseMap::zeros(h, w),
            degenerate: true,
        });
    }
    let blurred = gaussian_blur(&DenseMap::new(mean)?, cfg.blur_sigma);
    let (lo, hi) = (blurred.min(), blurred.max());
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return Ok(BmsSaliency {
            map: DenseMap::zeros(h, w),
            degenerate: true,
        });
    }
    let scaled = blurred.values().mapv(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0));
    Ok(BmsSaliency {
        map: DenseMap::new(scaled)?,
        degenerate: false,
    })
}

/// Isotropic Gaussian centered on the image with sigma = min(h, w) / 4.
pub fn center_prior(h: usize, w: usize) -> Result<DenseMap> {
    if h == 0 || w == 0 {
        return Err(Error::InvalidShape {
            shape: vec![h, w],
            reason: "empty prior".into(),
        });
    }
    let sigma = h.min(w) as f64 / 4.0;
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    DenseMap::from_fn(h, w, |(y, x)| {
        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Uniform `[0, 1)` noise from a seeded generator.
pub fn random_map(h: usize, w: usize, seed: u64) -> Result<DenseMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMap::from_fn(h, w, |_| rng.random_range(0.0..1.0))
}
