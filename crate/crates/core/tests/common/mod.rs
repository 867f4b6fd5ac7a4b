//! Brute-force reference implementations and fixtures shared by the
//! integration tests. The references work on nested `Vec`s and share no code
//! with the library.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saldissect::data_io::{
    save_mask, save_stack, Category, DatasetManifest, FixationSet, ImageRecord, ManifestEntry, RegionAnnotation,
};
use saldissect::decoder::TrainSample;
use saldissect::dissection::DissectionSample;
use saldissect::{ActivationStack, DenseMap};

pub type Grid = Vec<Vec<f64>>;
pub type Mask = Vec<Vec<bool>>;

pub mod oracle {
    use super::{Grid, Mask};

    pub const EPS: f64 = 1e-12;

    fn flat(g: &Grid) -> Vec<f64> {
        g.iter().flatten().copied().collect()
    }

    fn standardize(g: &Grid) -> Option<Grid> {
        let v = flat(g);
        let n = v.len() as f64;
        let mu = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= EPS {
            return None;
        }
        Some(g.iter().map(|row| row.iter().map(|x| (x - mu) / sd).collect()).collect())
    }

    fn mean_over(g: &Grid, sel: &Mask) -> Option<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for (r, row) in g.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if sel[r][c] {
                    total += v;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| total / n as f64)
    }

    /// `None` for a constant map or an empty fixation set.
    pub fn nss(map: &Grid, fix: &Mask) -> Option<f64> {
        mean_over(&standardize(map)?, fix)
    }

    pub fn nmm(pred: &Grid, mask: &Mask) -> Option<f64> {
        nss(pred, mask)
    }

    pub fn assoc(map: &Grid, fix: &Mask, mask: &Mask) -> Option<f64> {
        let both: Mask = fix
            .iter()
            .zip(mask)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x && *y).collect())
            .collect();
        nss(map, &both)
    }

    /// Average ranks (1-based) by counting smaller and equal values.
    pub fn ranks(xs: &[f64]) -> Vec<f64> {
        xs.iter()
            .map(|x| {
                let less = xs.iter().filter(|y| *y < x).count() as f64;
                let equal = xs.iter().filter(|y| *y == x).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }

    pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
    }

    pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
        if xs.len() != ys.len() || xs.len() < 3 {
            return None;
        }
        pearson(&ranks(xs), &ranks(ys))
    }

    /// Corner-aligned bilinear interpolation evaluated point by point.
    pub fn bilinear(g: &Grid, out: (usize, usize)) -> Grid {
        let (h, w) = (g.len(), g[0].len());
        let src = |i: usize, n_in: usize, n_out: usize| -> f64 {
            if n_out == 1 {
                (n_in as f64 - 1.0) / 2.0
            } else {
                i as f64 * (n_in as f64 - 1.0) / (n_out as f64 - 1.0)
            }
        };
        (0..out.0)
            .map(|i| {
                (0..out.1)
                    .map(|j| {
                        let (y, x) = (src(i, h, out.0), src(j, w, out.1));
                        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
                        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
                        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
                        g[y0][x0] * (1.0 - fy) * (1.0 - fx)
                            + g[y0][x1] * (1.0 - fy) * fx
                            + g[y1][x0] * fy * (1.0 - fx)
                            + g[y1][x1] * fy * fx
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn to_map(g: &Grid) -> DenseMap {
    let (h, w) = (g.len(), g[0].len());
    DenseMap::from_vec(h, w, g.iter().flatten().copied().collect()).unwrap()
}

pub fn mask_to_map(m: &Mask) -> DenseMap {
    to_map(&m.iter().map(|r| r.iter().map(|b| f64::from(*b)).collect()).collect())
}

pub fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Grid {
    (0..h).map(|_| (0..w).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
}

/// A mask with at least one set cell at roughly the given density.
pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> Mask {
    let mut m: Mask = (0..h).map(|_| (0..w).map(|_| rng.random_bool(density)).collect()).collect();
    let (r, c) = (rng.random_range(0..h), rng.random_range(0..w));
    m[r][c] = true;
    m
}

// ---------------------------------------------------------------------------
// dissection fixture

pub struct FixtureRegion {
    pub region_id: i64,
    pub category: Category,
    pub mask: Mask,
}

pub struct FixtureImage {
    pub image_id: String,
    pub fixations: Mask,
    pub regions: Vec<FixtureRegion>,
    /// `[channel][row][col]` at native resolution.
    pub channels: Vec<Grid>,
}

pub const FIXTURE_SIZE: (usize, usize) = (16, 16);
pub const FIXTURE_NATIVE: (usize, usize) = (6, 6);
pub const FIXTURE_CHANNELS: usize = 8;
pub const FIXTURE_LAYER: &str = "conv5-3";

fn rect(r0: usize, c0: usize, r1: usize, c1: usize) -> Mask {
    (0..FIXTURE_SIZE.0)
        .map(|r| (0..FIXTURE_SIZE.1).map(|c| (r0..r1).contains(&r) && (c0..c1).contains(&c)).collect())
        .collect()
}

fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

/// Four images, eight channels, two categories. Includes a region without
/// fixations, a constant channel on one image and two identical channels so
/// that ranking ties occur. Values are exactly representable in `f32`.
pub fn dissection_fixture() -> Vec<FixtureImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (nh, nw) = FIXTURE_NATIVE;
    let (h, w) = FIXTURE_SIZE;
    (0..4)
        .map(|i| {
            let points: Vec<(usize, usize)> = match i {
                0 => vec![(2, 3), (3, 3), (12, 12)],
                1 => vec![(5, 10), (13, 2)],
                2 => vec![(1, 1), (8, 8), (9, 9), (14, 5)],
                _ => vec![(10, 3), (4, 12)],
            };
            let fixations: Mask = (0..h).map(|r| (0..w).map(|c| points.contains(&(r, c))).collect()).collect();
            let mut regions = vec![
                FixtureRegion {
                    region_id: 10,
                    category: Category::Text,
                    mask: rect(0, 0, 8, 8),
                },
                FixtureRegion {
                    region_id: 3,
                    category: Category::PersonHead,
                    mask: rect(8, 0, 16, 16),
                },
                FixtureRegion {
                    region_id: 7,
                    category: Category::Text,
                    mask: rect(0, 8, 8, 16),
                },
            ];
            if i == 1 {
                // no fixation lands here
                regions.push(FixtureRegion {
                    region_id: 1,
                    category: Category::PersonHead,
                    mask: rect(9, 9, 12, 12),
                });
            }
            let scale_y = (h - 1) as f64 / (nh - 1) as f64;
            let scale_x = (w - 1) as f64 / (nw - 1) as f64;
            let mut channels: Vec<Grid> = (0..FIXTURE_CHANNELS)
                .map(|j| {
                    (0..nh)
                        .map(|r| {
                            (0..nw)
                                .map(|c| {
                                    let noise = rng.random_range(0.0..1.0);
                                    let peak: f64 = if j < 3 {
                                        points
                                            .iter()
                                            .map(|&(y, x)| {
                                                let d2 = (r as f64 * scale_y - y as f64).powi(2) + (c as f64 * scale_x - x as f64).powi(2);
                                                (-d2 / (4.0 * (j + 1) as f64)).exp()
                                            })
                                            .sum()
                                    } else {
                                        0.0
                                    };
                                    f32_exact(3.0 * peak + 0.3 * noise)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            channels[5] = channels[2].clone();
            if i == 2 {
                channels[6] = vec![vec![0.0; nw]; nh];
            }
            FixtureImage {
                image_id: format!("img{i}"),
                fixations,
                regions,
                channels,
            }
        })
        .collect()
}

impl FixtureImage {
    pub fn record(&self) -> ImageRecord {
        ImageRecord {
            image_id: self.image_id.clone(),
            size: FIXTURE_SIZE,
            fixations: mask_to_map(&self.fixations),
            regions: self
                .regions
                .iter()
                .map(|r| RegionAnnotation::new(self.image_id.clone(), r.region_id, r.category, mask_to_map(&r.mask)).unwrap())
                .collect(),
        }
    }

    pub fn stack(&self) -> ActivationStack {
        ActivationStack::new(self.image_id.clone(), FIXTURE_LAYER, self.channels.iter().map(to_map).collect()).unwrap()
    }

    pub fn sample(&self) -> DissectionSample {
        DissectionSample {
            record: self.record(),
            stacks: vec![self.stack()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStats {
    pub category: Category,
    pub per_map: Vec<Option<f64>>,
    pub top: Vec<usize>,
    pub top_mean: f64,
    pub above: usize,
    pub used: usize,
    pub skipped: usize,
}

/// Exhaustive category statistics: per-channel mean of region scores over
/// usable regions, top-k by repeated arg-max (lowest index wins ties).
pub fn oracle_dissection(images: &[FixtureImage], k: usize, threshold: f64) -> Vec<OracleStats> {
    let mut out = Vec::new();
    for category in Category::ALL {
        let mut used = 0;
        let mut skipped = 0;
        let mut scores: Vec<Vec<f64>> = vec![Vec::new(); FIXTURE_CHANNELS];
        for img in images {
            for region in img.regions.iter().filter(|r| r.category == category) {
                let both: Mask = img
                    .fixations
                    .iter()
                    .zip(&region.mask)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x && *y).collect())
                    .collect();
                if !both.iter().flatten().any(|b| *b) {
                    skipped += 1;
                    continue;
                }
                used += 1;
                for (j, ch) in img.channels.iter().enumerate() {
                    let up = oracle::bilinear(ch, FIXTURE_SIZE);
                    if let Some(v) = oracle::assoc(&up, &img.fixations, &region.mask) {
                        scores[j].push(v);
                    }
                }
            }
        }
        if used == 0 {
            continue;
        }
        let per_map: Vec<Option<f64>> = scores
            .iter()
            .map(|s| (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64))
            .collect();
        let mut top = Vec::new();
        let mut taken = vec![false; per_map.len()];
        while top.len() < k {
            let mut best: Option<usize> = None;
            for j in 0..per_map.len() {
                if taken[j] || per_map[j].is_none() {
                    continue;
                }
                if best.is_none_or(|b| per_map[j].unwrap() > per_map[b].unwrap()) {
                    best = Some(j);
                }
            }
            match best {
                Some(b) => {
                    taken[b] = true;
                    top.push(b);
                }
                None => break,
            }
        }
        let top_mean = top.iter().map(|&j| per_map[j].unwrap()).sum::<f64>() / top.len() as f64;
        let above = per_map.iter().flatten().filter(|v| **v > threshold).count();
        out.push(OracleStats {
            category,
            per_map,
            top,
            top_mean,
            above,
            used,
            skipped,
        });
    }
    out
}

/// Writes the fixture as a dataset directory and returns the manifest path.
pub fn write_dissection_fixture(images: &[FixtureImage], dir: &Path) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut entries = Vec::new();
    for img in images {
        let id = &img.image_id;
        let image_path = dir.join(format!("{id}.png"));
        image::RgbImage::new(FIXTURE_SIZE.1 as u32, FIXTURE_SIZE.0 as u32).save(&image_path).unwrap();
        let points: Vec<[f64; 2]> = img
            .fixations
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().filter(|(_, b)| **b).map(move |(c, _)| [r as f64, c as f64]))
            .collect();
        let fix_path = dir.join(format!("{id}.fix.json"));
        FixationSet {
            image_id: id.clone(),
            frame: [FIXTURE_SIZE.0, FIXTURE_SIZE.1],
            points,
        }
        .save(&fix_path)
        .unwrap();
        let mut regions = Vec::new();
        for r in &img.regions {
            let name = format!("{id}_r{}.png", r.region_id);
            save_mask(&mask_to_map(&r.mask), dir.join(&name)).unwrap();
            regions.push(serde_json::json!({"region_id": r.region_id, "category": r.category.label(), "mask_png": name}));
        }
        let ann_path = dir.join(format!("{id}.ann.json"));
        std::fs::write(&ann_path, serde_json::to_string_pretty(&serde_json::json!({"image_id": id, "regions": regions})).unwrap()).unwrap();
        let stack_path = dir.join(format!("{id}.{FIXTURE_LAYER}.npy"));
        save_stack(&img.stack(), &stack_path).unwrap();
        entries.push(ManifestEntry {
            image_id: id.clone(),
            image: image_path,
            fixations: Some(fix_path),
            annotations: vec![ann_path],
            activations: [(FIXTURE_LAYER.to_string(), stack_path)].into_iter().collect(),
        });
    }
    let manifest = dir.join("manifest.json");
    DatasetManifest { entries }.save(&manifest).unwrap();
    manifest
}

// ---------------------------------------------------------------------------
// planted decoder fixture

pub const PLANTED_IMAGE: usize = 32;
pub const PLANTED_NATIVE: usize = 8;
pub const PLANTED_CHANNELS: usize = 8;
pub const PLANTED_CHANNEL: usize = 3;

/// Channel `PLANTED_CHANNEL` is a sum of Gaussian bumps at the fixations; the
/// others are smooth patterns unrelated to them.
pub fn planted_dataset(n: usize, seed: u64) -> Vec<TrainSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (PLANTED_IMAGE - 1) as f64 / (PLANTED_NATIVE - 1) as f64;
    (0..n)
        .map(|i| {
            let points: Vec<(usize, usize)> = (0..rng.random_range(2..5))
                .map(|_| (rng.random_range(0..PLANTED_IMAGE), rng.random_range(0..PLANTED_IMAGE)))
                .collect();
            let fixations = DenseMap::from_fn(PLANTED_IMAGE, PLANTED_IMAGE, |p| f64::from(points.contains(&p))).unwrap();
            let channels = (0..PLANTED_CHANNELS)
                .map(|j| {
                    if j == PLANTED_CHANNEL {
                        DenseMap::from_fn(PLANTED_NATIVE, PLANTED_NATIVE, |(r, c)| {
                            f32_exact(
                                points
                                    .iter()
                                    .map(|&(y, x)| {
                                        let d2 = (r as f64 * scale - y as f64).powi(2) + (c as f64 * scale - x as f64).powi(2);
                                        (-d2 / 32.0).exp()
                                    })
                                    .sum(),
                            )
                        })
                        .unwrap()
                    } else {
                        let (fy, fx, ph): (f64, f64, f64) = (rng.random_range(0.2..1.2), rng.random_range(0.2..1.2), rng.random_range(0.0..6.3));
                        DenseMap::from_fn(PLANTED_NATIVE, PLANTED_NATIVE, |(r, c)| f32_exact((fy * r as f64 + fx * c as f64 + ph).sin() + 1.0)).unwrap()
                    }
                })
                .collect();
            TrainSample {
                features: ActivationStack::new(format!("img{i:03}"), "planted", channels).unwrap(),
                fixations,
            }
        })
        .collect()
}

/// Writes a planted dataset as a manifest (fixation points at cell centers
/// of the image grid) and returns the manifest path.
pub fn write_planted_dataset(data: &[TrainSample], dir: &Path, layer: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut entries = Vec::new();
    for s in data {
        let id = s.features.image_id.clone();
        let (h, w) = s.fixations.dims();
        let image_path = dir.join(format!("{id}.png"));
        image::RgbImage::new(w as u32, h as u32).save(&image_path).unwrap();
        let points: Vec<[f64; 2]> = s.fixations.nonzero_indices().iter().map(|&k| [(k / w) as f64, (k % w) as f64]).collect();
        let fix_path = dir.join(format!("{id}.fix.json"));
        FixationSet {
            image_id: id.clone(),
            frame: [h, w],
            points,
        }
        .save(&fix_path)
        .unwrap();
        let stack_path = dir.join(format!("{id}.{layer}.npy"));
        save_stack(&s.features, &stack_path).unwrap();
        entries.push(ManifestEntry {
            image_id: id,
            image: image_path,
            fixations: Some(fix_path),
            annotations: vec![],
            activations: [(layer.to_string(), stack_path)].into_iter().collect(),
        });
    }
    let manifest = dir.join("manifest.json");
    DatasetManifest { entries }.save(&manifest).unwrap();
    manifest
}
